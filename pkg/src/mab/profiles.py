"""Security profiles and cached public parameters."""
from __future__ import annotations

import json
import os
import random
from dataclasses import asdict, dataclass
from pathlib import Path

from mab import commitments


@dataclass(frozen=True)
class SecurityProfile:
    name: str
    prime_bits: int  # per consortium prime
    commit_bits: int  # RSA-form commitment modulus
    dumb_bits: int  # dumb-account modulus n_d
    t: int
    l: int
    s: int
    T: int
    msg_bits: int
    trial_division_bound: int
    biprimality_rounds: int
    reward_amount: int
    exponent: int = 65537

    def __post_init__(self):
        values = [v for k, v in asdict(self).items() if k != "name"]
        if any(v <= 0 for v in values):
            raise ValueError("profile fields must be positive")
        if self.T <= self.t + self.l + self.s:
            raise ValueError("need T > t + l + s")
        if self.reward_amount >= 1 << self.msg_bits:
            raise ValueError("reward exceeds the message bound")

    @property
    def challenge_bits(self) -> int:
        return self.t

    def to_json(self) -> dict:
        return {**asdict(self), "challenge_bits": self.challenge_bits}


TEST = SecurityProfile(
    name="test",
    prime_bits=32,
    commit_bits=256,
    dumb_bits=256,
    t=16,
    l=8,
    s=8,
    T=33,
    msg_bits=32,
    trial_division_bound=10_000,
    biprimality_rounds=20,
    reward_amount=50,
)

DEFAULT = SecurityProfile(
    name="default",
    prime_bits=512,
    commit_bits=2048,
    dumb_bits=2048,
    t=128,
    l=40,
    s=40,
    T=209,
    msg_bits=64,
    trial_division_bound=10_000,
    biprimality_rounds=40,
    reward_amount=50,
)

PROFILES = {p.name: p for p in (TEST, DEFAULT)}


def get_profile(name: str) -> SecurityProfile:
    try:
        return PROFILES[name]
    except KeyError:
        raise ValueError(f"unknown profile {name!r}; choose from {sorted(PROFILES)}") from None


def params_dir() -> Path | None:
    raw = os.environ.get("MAB_PARAMS_DIR")
    return Path(raw) if raw else None


def commitment_params(profile: SecurityProfile, seed: object, directory: Path | None = None):
    """RSA-form and dumb-account parameters for ``profile``.

    Generation of 2048-bit safe-prime moduli is slow, so results are cached
    as JSON under ``directory`` (or ``$MAB_PARAMS_DIR``) keyed by profile and seed.
    """
    directory = directory if directory is not None else params_dir()
    path = directory / f"commit_{profile.name}_{seed}.json" if directory is not None and seed is not None else None
    if path is not None and path.exists():
        doc = json.loads(path.read_text())
        return commitments.CommitParams.from_json(doc["alpha"]), commitments.CommitParams.from_json(doc["dumb"])
    rng = random.Random(f"{seed}:commit-setup") if seed is not None else random.SystemRandom()
    alpha = commitments.setup_params(profile.commit_bits, rng, profile.msg_bits)
    dumb = commitments.dumb_account_params(profile.dumb_bits, rng, profile.msg_bits)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps({"alpha": alpha.to_json(), "dumb": dumb.to_json()}, indent=1))
    return alpha, dumb
