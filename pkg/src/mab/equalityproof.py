"""Equality of committed values across parameter sets, and the dumb-account check.

``E = g_a^m h_a^ra mod n_a`` and ``F = g_b^m h_b^rb mod n_b`` hide the same
``m``: the prover sends ``(u, D, D1, D2)`` with integer responses
``D = w + u m``, ``D1 = e1 + u ra``, ``D2 = e2 + u rb`` and the verifier
recomputes ``u`` from ``g^D h^D1 E^-u`` and ``g^D h^D2 F^-u``.

:func:`link_prove` is the same idea between a Paillier ciphertext under a
receiver key and the matching dumb-account ciphertext.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

from mab import arith
from mab.commitments import Commitment, CommitParams, commit
from mab.paillier import Ciphertext, PaillierPublicKey
from mab.sigma import ProofError

# headroom for blindings that are sums of up to 2^8 fresh blindings
SUM_SLACK_BITS = 8


@dataclass(frozen=True)
class EqualityParams:
    params_a: CommitParams
    params_b: CommitParams
    t: int
    l: int
    s: int

    def __post_init__(self):
        if self.params_a.params_id == self.params_b.params_id:
            raise ValueError("equality proofs need two distinct parameter sets")

    @property
    def msg_bound(self) -> int:
        return 1 << min(self.params_a.msg_bits, self.params_b.msg_bits)

    def blinding_bound(self, cp: CommitParams) -> int:
        return cp.order_bound << (self.s + SUM_SLACK_BITS)


@dataclass(frozen=True)
class DualCommitment:
    e_cm: Commitment
    f_cm: Commitment

    def to_json(self) -> dict:
        return {
            "e_hex": arith.to_hex(self.e_cm.value),
            "f_hex": arith.to_hex(self.f_cm.value),
            "params_a_id": self.e_cm.params_id,
            "params_b_id": self.f_cm.params_id,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "DualCommitment":
        return cls(
            Commitment(arith.from_hex(doc["e_hex"]), doc["params_a_id"]),
            Commitment(arith.from_hex(doc["f_hex"]), doc["params_b_id"]),
        )


@dataclass(frozen=True)
class EqualityProof:
    u_value: int
    d_value: int
    d1_value: int
    d2_value: int

    def to_json(self) -> dict:
        return {
            "u_hex": arith.to_hex(self.u_value),
            "d_hex": arith.to_hex(self.d_value),
            "d1_hex": arith.to_hex(self.d1_value),
            "d2_hex": arith.to_hex(self.d2_value),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "EqualityProof":
        return cls(*(arith.from_hex(doc[k]) for k in ("u_hex", "d_hex", "d1_hex", "d2_hex")))


def e_com(ep: EqualityParams, m: int, r_a: int, r_b: int) -> DualCommitment:
    return DualCommitment(commit(ep.params_a, m, r_a), commit(ep.params_b, m, r_b))


def _challenge(tag: bytes, t: int, values: Sequence[int], context: bytes) -> int:
    parts = [context] + [arith.int_to_bytes(v) for v in values]
    return 1 + arith.hash_to_int(tag, parts, (1 << t) - 1)


def _u(ep: EqualityParams, W1: int, W2: int, dual: DualCommitment, context: bytes) -> int:
    ids = (ep.params_a.params_id + ep.params_b.params_id).encode()
    return _challenge(b"mab/equality", ep.t, [W1, W2, dual.e_cm.value, dual.f_cm.value], ids + context)


def e_prove(
    ep: EqualityParams,
    dual: DualCommitment,
    m: int,
    r_a: int,
    r_b: int,
    rng: random.Random,
    *,
    context: bytes = b"",
    strict: bool = True,
) -> EqualityProof:
    pa, pb = ep.params_a, ep.params_b
    if strict:
        if commit(pa, m, r_a).value != dual.e_cm.value or commit(pb, m, r_b).value != dual.f_cm.value:
            raise ProofError("openings do not match the dual commitment")
        if not 0 <= m < ep.msg_bound:
            raise ProofError("value outside the message bound")
        if not (0 <= r_a < ep.blinding_bound(pa) and 0 <= r_b < ep.blinding_bound(pb)):
            raise ProofError("blinding outside its bound")
    w = rng.randrange(1, ep.msg_bound << (ep.l + ep.t))
    e1 = rng.randrange(1, ep.blinding_bound(pa) << (ep.l + ep.t))
    e2 = rng.randrange(1, ep.blinding_bound(pb) << (ep.l + ep.t))
    W1 = arith.powmod2(pa.g_base, w, pa.h_base, e1, pa.modulus)
    W2 = arith.powmod2(pb.g_base, w, pb.h_base, e2, pb.modulus)
    u = _u(ep, W1, W2, dual, context)
    arith.tick("mul", 3)
    arith.tick("add", 3)
    return EqualityProof(u, w + u * m, e1 + u * r_a, e2 + u * r_b)


def _within(value: int, bound: int, ep: EqualityParams) -> bool:
    return 0 <= value < (bound << (ep.l + ep.t)) + (bound << ep.t)


def e_verify(ep: EqualityParams, dual: DualCommitment, proof: EqualityProof, *, context: bytes = b"") -> bool:
    pa, pb = ep.params_a, ep.params_b
    if dual.e_cm.params_id != pa.params_id or dual.f_cm.params_id != pb.params_id:
        return False
    if not (1 <= dual.e_cm.value < pa.modulus and 1 <= dual.f_cm.value < pb.modulus):
        return False
    u = proof.u_value
    if not 1 <= u < (1 << ep.t):
        return False
    if not (
        _within(proof.d_value, ep.msg_bound, ep)
        and _within(proof.d1_value, ep.blinding_bound(pa), ep)
        and _within(proof.d2_value, ep.blinding_bound(pb), ep)
    ):
        return False
    try:
        W1 = arith.mulmod(
            arith.powmod2(pa.g_base, proof.d_value, pa.h_base, proof.d1_value, pa.modulus),
            arith.powmod(dual.e_cm.value, -u, pa.modulus),
            pa.modulus,
        )
        W2 = arith.mulmod(
            arith.powmod2(pb.g_base, proof.d_value, pb.h_base, proof.d2_value, pb.modulus),
            arith.powmod(dual.f_cm.value, -u, pb.modulus),
            pb.modulus,
        )
    except arith.NotInvertibleError:
        return False
    return _u(ep, W1, W2, dual, context) == u


def aggregate_check(params_d: CommitParams, verification_cts: Sequence[Ciphertext], f_cm: Commitment) -> bool:
    """``prod c_id mod n_d^2 == F``: the outputs add up to the value in ``F``."""
    if not verification_cts:
        raise ValueError("no verification ciphertexts")
    if params_d.kind != "paillier" or f_cm.params_id != params_d.params_id:
        raise ValueError("F is not under the dumb-account parameters")
    H = arith.prodmod((c.c_value for c in verification_cts), params_d.modulus)
    return H == f_cm.value


# -- payment layer <-> verification layer -----------------------------------


@dataclass(frozen=True)
class LinkProof:
    u_value: int
    d_value: int
    z_value: int
    d2_value: int

    def to_json(self) -> dict:
        return {
            "u_hex": arith.to_hex(self.u_value),
            "d_hex": arith.to_hex(self.d_value),
            "z_hex": arith.to_hex(self.z_value),
            "d2_hex": arith.to_hex(self.d2_value),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "LinkProof":
        return cls(*(arith.from_hex(doc[k]) for k in ("u_hex", "d_hex", "z_hex", "d2_hex")))


def _value(x: Ciphertext | Commitment) -> int:
    return x.c_value if isinstance(x, Ciphertext) else x.value


def _link_u(pk: PaillierPublicKey, pd: CommitParams, W1: int, W2: int, c: int, cd: int, t: int, context: bytes) -> int:
    ids = (pk.key_id + pd.params_id).encode()
    return _challenge(b"mab/link", t, [W1, W2, c, cd], ids + context)


def link_prove(
    pk: PaillierPublicKey,
    params_d: CommitParams,
    c: Ciphertext,
    c_d: Ciphertext | Commitment,
    m: int,
    r: int,
    rho: int,
    rng: random.Random,
    t: int,
    l: int,
    s: int,
    *,
    context: bytes = b"",
) -> LinkProof:
    """``c = g^m r^N mod N^2`` and ``c_d = g_d^m h_d^rho`` share ``m``.

    ``c_d`` may be a dumb-account ciphertext or a commitment under any
    parameter set.
    """
    n, n2 = pk.n_value, pk.n_squared
    pd = params_d
    msg_bound = 1 << pd.msg_bits
    R = pd.order_bound << (s + SUM_SLACK_BITS)
    w = rng.randrange(msg_bound << (l + t))
    eta = rng.randrange(R << (l + t))
    sv = arith.rand_unit(rng, n)
    W1 = arith.powmod2(pk.g_value, w, sv, n, n2)
    W2 = arith.powmod2(pd.g_base, w, pd.h_base, eta, pd.modulus)
    u = _link_u(pk, pd, W1, W2, c.c_value, _value(c_d), t, context)
    z = arith.mulmod(sv, arith.powmod(r, u, n), n)
    return LinkProof(u, w + u * m, z, eta + u * rho)


def link_verify(
    pk: PaillierPublicKey,
    params_d: CommitParams,
    c: Ciphertext,
    c_d: Ciphertext | Commitment,
    proof: LinkProof,
    t: int,
    l: int,
    s: int,
    *,
    context: bytes = b"",
) -> bool:
    n, n2 = pk.n_value, pk.n_squared
    pd = params_d
    msg_bound = 1 << pd.msg_bits
    R = pd.order_bound << (s + SUM_SLACK_BITS)
    u = proof.u_value
    if not 1 <= u < (1 << t):
        return False
    if not (0 <= proof.d_value < (msg_bound << (l + t)) + (msg_bound << t)):
        return False
    if not (0 <= proof.d2_value < (R << (l + t)) + (R << t)):
        return False
    cd = _value(c_d)
    if not (1 <= proof.z_value < n and 1 <= c.c_value < n2 and 1 <= cd < pd.modulus):
        return False
    try:
        W1 = arith.mulmod(
            arith.powmod2(pk.g_value, proof.d_value, proof.z_value, n, n2), arith.powmod(c.c_value, -u, n2), n2
        )
        W2 = arith.mulmod(
            arith.powmod2(pd.g_base, proof.d_value, pd.h_base, proof.d2_value, pd.modulus),
            arith.powmod(cd, -u, pd.modulus),
            pd.modulus,
        )
    except arith.NotInvertibleError:
        return False
    return _link_u(pk, pd, W1, W2, c.c_value, cd, t, context) == u
