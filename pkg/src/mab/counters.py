"""Operation counters for the cost model (modmul, modexp, hash, ...).

Counting happens at the ``mab.arith`` API boundary. A scope opened with
:func:`counting` receives every tick issued while it is active, including
ticks from nested scopes.
"""
from __future__ import annotations

import contextvars
from contextlib import contextmanager
from dataclasses import asdict, dataclass

_active: contextvars.ContextVar[tuple["OpCounters", ...]] = contextvars.ContextVar(
    "mab_active_counters", default=()
)

# symbol used for each field in the cost table
SYMBOLS = {
    "mul": "tau_m",
    "add": "tau_a",
    "mod_mul": "tau_M",
    "mod_exp": "tau_E",
    "hash": "tau_H",
    "trial_division": "tau_td",
    "biprimality": "tau_bp",
    "tx_broadcast": "tau_Tx",
    "block_confirm": "tau_Bl",
}


@dataclass
class OpCounters:
    mul: int = 0
    add: int = 0
    mod_mul: int = 0
    mod_exp: int = 0
    hash: int = 0
    trial_division: int = 0
    biprimality: int = 0
    tx_broadcast: int = 0
    block_confirm: int = 0

    def as_dict(self) -> dict[str, int]:
        return asdict(self)

    def by_symbol(self) -> dict[str, int]:
        return {SYMBOLS[k]: v for k, v in asdict(self).items()}

    def total(self) -> int:
        return sum(asdict(self).values())


def tick(field: str, amount: int = 1) -> None:
    for c in _active.get():
        setattr(c, field, getattr(c, field) + amount)


@contextmanager
def counting(counters: OpCounters | None = None):
    """Collect operation counts for the enclosed block."""
    counters = counters if counters is not None else OpCounters()
    token = _active.set(_active.get() + (counters,))
    try:
        yield counters
    finally:
        _active.reset(token)
