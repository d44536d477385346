"""Operation counts per scope, next to the reference cost model.

The reference formulas are estimates written without an implementation;
the report shows them beside the measured counts and asserts nothing.
"""
from __future__ import annotations

from dataclasses import dataclass

from mab import arith, cokeygen, ledger, paillier, profiles
from mab.commitments import commit, random_blinding
from mab.counters import SYMBOLS, OpCounters, counting

# symbol -> coefficient as a function of (i, k)
REFERENCE = {
    "keygen": ("tau_bp + 3 tau_td + 2k tau_a + tau_m", lambda i, k: {"tau_bp": 1, "tau_td": 3, "tau_a": 2 * k, "tau_m": 1}),
    "encryption": ("2i tau_M + 4i tau_E", lambda i, k: {"tau_M": 2 * i, "tau_E": 4 * i}),
    "verification": (
        "(2i+3) tau_m + (7i+8) tau_M + (12i+14) tau_E + 2 tau_H",
        lambda i, k: {"tau_m": 2 * i + 3, "tau_M": 7 * i + 8, "tau_E": 12 * i + 14, "tau_H": 2},
    ),
    "decryption": ("2 tau_m + 2i tau_E", lambda i, k: {"tau_m": 2, "tau_E": 2 * i}),
    "blockchain": ("i tau_Tx + tau_Bl", lambda i, k: {"tau_Tx": i, "tau_Bl": 1}),
    "empty": ("0", lambda i, k: {}),
}
SCOPES = tuple(REFERENCE)


@dataclass
class MeasureReport:
    scope: str
    profile: str
    i: int
    k: int
    measured: OpCounters

    def to_json(self) -> dict:
        text, coeffs = REFERENCE[self.scope]
        formula = {sym: 0 for sym in SYMBOLS.values()}
        formula.update(coeffs(self.i, self.k))
        return {
            "scope": self.scope,
            "profile": self.profile,
            "i": self.i,
            "k": self.k,
            "measured": self.measured.by_symbol(),
            "reference": formula,
            "reference_formula": text,
            "informational": True,
        }


def _system(prof, k, seed):
    sp, con = ledger.setup_system(prof, k, seed)
    reg = ledger.Registry()
    rng = arith.make_rng(seed, "measure")
    return sp, con, reg, rng


def measure(scope: str, profile: str = "test", i: int = 2, k: int = 3, seed: object = 0) -> MeasureReport:
    """Count operations for one scope with ``i`` outputs and ``k`` parties."""
    if scope not in REFERENCE:
        raise ValueError(f"unknown scope {scope!r}; choose from {SCOPES}")
    if i < 1 or k < 2:
        raise ValueError("need i >= 1 outputs and k >= 2 parties")
    prof = profiles.get_profile(profile)
    ops = OpCounters()

    if scope == "empty":
        with counting(ops):
            pass
    elif scope == "keygen":
        with counting(ops):
            cokeygen.run_ceremony(
                k, prof.prime_bits, prof.exponent, seed, trial_bound=prof.trial_division_bound, rounds=prof.biprimality_rounds
            )
    else:
        sp, con, reg, rng = _system(prof, k, seed)
        wallet, coinbase = ledger.mint(sp, reg, "sender", rng, key_mode="independent")
        receivers = [ledger.mint(sp, reg, f"r{j}", rng, reward=False, key_mode="independent")[0] for j in range(i)]
        amounts = [1] * (i - 1) + [prof.reward_amount - (i - 1)]
        nodes = ledger.make_nodes(sp, reg)
        ledger.consensus_round(nodes, [coinbase])
        chain = nodes[0].chain
        if scope == "encryption":
            pd = sp.params_d
            with counting(ops):
                for w, m in zip(receivers, amounts):
                    paillier.h_enc(w.public, m, rng=rng)
                    commit(pd, m, random_blinding(pd, rng, prof.s))
        else:
            outs = [(w.address, m) for w, m in zip(receivers, amounts)]
            tx = ledger.build_transaction(sp, reg, wallet, chain, [(coinbase.tx_id, 0)], outs, rng)
            if scope == "verification":
                with counting(ops):
                    ledger.verify_transaction(sp, reg, chain.state, tx)
            elif scope == "decryption":
                ledger.consensus_round(nodes, [tx])
                with counting(ops):
                    for j, w in enumerate(receivers):
                        ledger.spend_and_decrypt(w, chain, tx.tx_id, j)
            elif scope == "blockchain":
                # i independent transfers in one block
                txs = [tx]
                for j in range(1, i):
                    w, cb = ledger.mint(sp, reg, f"extra{j}", rng, key_mode="independent")
                    ledger.consensus_round(nodes, [cb])
                    txs.append(ledger.build_transaction(sp, reg, w, chain, [(cb.tx_id, 0)], [(w.address, prof.reward_amount)], rng))
                with counting(ops):
                    ledger.consensus_round(nodes, txs)
    return MeasureReport(scope, profile, i, k, ops)
