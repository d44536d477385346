"""Sigma protocols for linear relations between integer exponents.

A statement is a set of relations ``target = prod base_k^{w_k} mod n_j``
over secret integer witnesses ``w_k`` with public bounds ``|w_k| < B_k``.
Responses are plain integers ``z = rho + c*w`` with masks
``rho in [0, 2^{t+l} B)``. Witnesses flagged as *interval* witnesses get the
Chan–Frankel–Tsiounis style check ``0 <= z < 2^{t+l} B``, which proves
``|w| < 2^{t+l} B`` at the price of an occasional prover restart.

The challenge is ``1 + H(transcript) mod (2^t - 1)`` by default; pass
``challenge_fn`` to run the interactive variant instead.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

from mab import arith

MAX_RESTARTS = 256


class ProofError(ValueError):
    """The prover's witness does not satisfy the statement."""


@dataclass(frozen=True)
class Relation:
    modulus: int
    target: int
    terms: tuple[tuple[int, str], ...]  # (base, witness name)


@dataclass(frozen=True)
class Statement:
    label: str
    relations: tuple[Relation, ...]
    bounds: tuple[tuple[str, int], ...]  # witness name -> bound B
    interval: frozenset[str] = frozenset()
    context: bytes = b""

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.bounds)

    def bound(self, name: str) -> int:
        return dict(self.bounds)[name]

    def encode(self) -> list[bytes]:
        out = [self.label.encode(), self.context]
        for rel in self.relations:
            out += [arith.nat_to_bytes(rel.modulus), arith.nat_to_bytes(rel.target)]
            for base, name in rel.terms:
                out += [arith.nat_to_bytes(base), name.encode()]
        for name, b in self.bounds:
            out += [name.encode(), arith.nat_to_bytes(b), b"I" if name in self.interval else b"-"]
        return out


@dataclass(frozen=True)
class SigmaProof:
    announcements: tuple[int, ...]
    challenge: int
    responses: tuple[int, ...]

    def to_json(self) -> dict:
        return {
            "a_hex": [arith.to_hex(a) for a in self.announcements],
            "c_hex": arith.to_hex(self.challenge),
            "z_hex": [arith.to_hex(z) for z in self.responses],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "SigmaProof":
        return cls(
            tuple(arith.from_hex(a) for a in doc["a_hex"]),
            arith.from_hex(doc["c_hex"]),
            tuple(arith.from_hex(z) for z in doc["z_hex"]),
        )


def _evaluate(rel: Relation, values: Mapping[str, int]) -> int:
    return arith.prodmod((arith.powmod(base, values[name], rel.modulus) for base, name in rel.terms), rel.modulus)


def fiat_shamir(stmt: Statement, announcements: Sequence[int], t: int) -> int:
    parts = stmt.encode() + [arith.nat_to_bytes(a) for a in announcements]
    return 1 + arith.hash_to_int(b"mab/sigma/" + stmt.label.encode(), parts, (1 << t) - 1)


def _response_ok(stmt: Statement, name: str, z: int, t: int, l: int) -> bool:
    b = stmt.bound(name)
    if name in stmt.interval:
        return 0 <= z < (b << (t + l))
    return abs(z) < (b << (t + l + 1))


def prove(
    stmt: Statement,
    witness: Mapping[str, int],
    rng: random.Random,
    t: int,
    l: int,
    *,
    challenge_fn: Callable[[tuple[int, ...]], int] | None = None,
    strict: bool = True,
) -> SigmaProof:
    """Prove knowledge of ``witness`` for ``stmt``.

    ``strict=False`` skips the witness checks and the interval restarts; it
    exists so cheating provers can be scripted in tests.
    """
    names = stmt.names
    if strict:
        for name in names:
            if abs(witness[name]) >= stmt.bound(name):
                raise ProofError(f"witness {name} exceeds its bound")
        for rel in stmt.relations:
            if _evaluate(rel, witness) != rel.target % rel.modulus:
                raise ProofError(f"relation for {stmt.label} does not hold")
    attempts = MAX_RESTARTS if strict else 1
    for _ in range(attempts):
        masks = {name: rng.randrange(stmt.bound(name) << (t + l)) for name in names}
        ann = tuple(_evaluate(rel, masks) for rel in stmt.relations)
        c = challenge_fn(ann) if challenge_fn else fiat_shamir(stmt, ann, t)
        if not 1 <= c < (1 << t):
            raise ValueError("challenge out of range")
        z = tuple(masks[name] + c * witness[name] for name in names)
        arith.tick("mul", len(names))
        arith.tick("add", len(names))
        if not strict or all(_response_ok(stmt, n, zi, t, l) for n, zi in zip(names, z)):
            return SigmaProof(ann, c, z)
    raise ProofError("interval response kept falling outside its range")


def verify(stmt: Statement, proof: SigmaProof, t: int, l: int, *, challenge: int | None = None) -> bool:
    """Check responses, relations and the challenge.

    ``challenge`` is the value an interactive verifier sent; without it the
    Fiat–Shamir challenge is recomputed.
    """
    names = stmt.names
    if len(proof.responses) != len(names) or len(proof.announcements) != len(stmt.relations):
        return False
    expected = challenge if challenge is not None else fiat_shamir(stmt, proof.announcements, t)
    c = proof.challenge
    if c != expected or not 1 <= c < (1 << t):
        return False
    if not all(_response_ok(stmt, n, z, t, l) for n, z in zip(names, proof.responses)):
        return False
    values = dict(zip(names, proof.responses))
    for rel, a in zip(stmt.relations, proof.announcements):
        if not 1 <= a < rel.modulus:
            return False
        try:
            lhs = _evaluate(rel, values)
            rhs = arith.mulmod(a, arith.powmod(rel.target, c, rel.modulus), rel.modulus)
        except arith.NotInvertibleError:
            return False
        if lhs != rhs:
            return False
    return True
