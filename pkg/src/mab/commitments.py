"""Integer commitments ``g^x h^r mod n`` in groups of unknown order.

Two parameter families are used:

* RSA form: ``n`` is a product of two safe primes made inside
  :func:`setup_params` and thrown away, ``g`` a quadratic residue of order
  ``p'q'`` and ``h = g^sigma`` for a discarded ``sigma``.
* Paillier form: modulus ``n_d^2`` with ``g = n_d + 1`` and ``h = h0^{n_d}``.
  A commitment there is at the same time a Paillier ciphertext under
  ``(n_d, n_d + 1)``, which lets the dumb account double as a commitment
  layer.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Sequence

from mab import arith

MIN_BITS = 32
DEFAULT_MSG_BITS = 128


class CommitmentBoundError(ValueError):
    pass


@dataclass(frozen=True)
class CommitParams:
    modulus: int
    g_base: int
    h_base: int
    kind: str = "rsa"  # "rsa" or "paillier"
    order_bound: int = 0  # public upper bound on the order of h
    msg_bits: int = DEFAULT_MSG_BITS
    setup_transcript_hash: str = ""

    @property
    def params_id(self) -> str:
        parts = [self.kind.encode(), *(arith.nat_to_bytes(v) for v in (self.modulus, self.g_base, self.h_base))]
        return arith.digest_hex(arith.encode_parts([b"mab/commit-params", *parts]))[:32]

    @property
    def paillier_n(self) -> int:
        if self.kind != "paillier":
            raise ValueError("not a Paillier-form parameter set")
        return self.g_base - 1

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "n_hex": arith.to_hex(self.modulus),
            "g_hex": arith.to_hex(self.g_base),
            "h_hex": arith.to_hex(self.h_base),
            "order_bound_hex": arith.to_hex(self.order_bound),
            "msg_bits": self.msg_bits,
            "setup_transcript_hash": self.setup_transcript_hash,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "CommitParams":
        return cls(
            arith.from_hex(doc["n_hex"]),
            arith.from_hex(doc["g_hex"]),
            arith.from_hex(doc["h_hex"]),
            doc.get("kind", "rsa"),
            arith.from_hex(doc["order_bound_hex"]),
            doc.get("msg_bits", DEFAULT_MSG_BITS),
            doc.get("setup_transcript_hash", ""),
        )


@dataclass(frozen=True)
class Commitment:
    value: int
    params_id: str

    def to_json(self) -> dict:
        return {"params_id": self.params_id, "value_hex": arith.to_hex(self.value)}


@dataclass(frozen=True)
class Opening:
    x_value: int
    r_value: int


@dataclass(frozen=True)
class Trapdoor:
    """Setup secrets, kept only when a test asks for them."""

    sigma: int
    group_order: int


def _transcript_hash(label: bytes, values: Sequence[int]) -> str:
    return arith.digest_hex(arith.encode_parts([label, *(arith.nat_to_bytes(v) for v in values)]))


def setup_params(
    bits: int, rng: random.Random, msg_bits: int = DEFAULT_MSG_BITS, keep_trapdoor: bool = False
):
    """Trusted setup of RSA-form parameters with a ``bits``-bit modulus.

    Returns the params, or ``(params, Trapdoor)`` with ``keep_trapdoor``.
    """
    if bits < MIN_BITS:
        raise ValueError(f"commitment modulus needs at least {MIN_BITS} bits")
    while True:
        p = arith.gen_safe_prime(bits // 2, rng)
        q = arith.gen_safe_prime(bits - bits // 2, rng)
        if p != q and (p * q).bit_length() == bits:
            break
    n = p * q
    order = (p - 1) // 2 * ((q - 1) // 2)
    while True:
        a = rng.randrange(2, n - 1)
        g = a * a % n
        if g != 1 and math.gcd(g - 1, n) == 1 and math.gcd(a, n) == 1:
            break
    while True:
        sigma = rng.randrange(2, order)
        if math.gcd(sigma, order) == 1:
            break
    h = pow(g, sigma, n)
    params = CommitParams(n, g, h, "rsa", n // 4, msg_bits, _transcript_hash(b"mab/setup/rsa", [n, g, h]))
    return (params, Trapdoor(sigma, order)) if keep_trapdoor else params


def paillier_params(n_d: int, rng: random.Random, msg_bits: int = DEFAULT_MSG_BITS) -> CommitParams:
    """Paillier-form parameters over ``n_d^2`` for an existing modulus ``n_d``."""
    n2 = n_d * n_d
    h0 = arith.rand_unit(rng, n_d)
    h = pow(h0 * h0 % n2, n_d, n2)
    return CommitParams(n2, n_d + 1, h, "paillier", n_d, msg_bits, _transcript_hash(b"mab/setup/paillier", [n_d, h]))


def dumb_account_params(bits: int, rng: random.Random, msg_bits: int = DEFAULT_MSG_BITS) -> CommitParams:
    """Fresh modulus ``n_d`` whose factors are discarded, in Paillier form."""
    if bits < MIN_BITS:
        raise ValueError(f"commitment modulus needs at least {MIN_BITS} bits")
    half = bits // 2
    while True:
        p = arith.gen_prime(arith.PrimeSpec(half), rng)
        q = arith.gen_prime(arith.PrimeSpec(bits - half), rng)
        n = p * q
        if p != q and n.bit_length() == bits and math.gcd(n, (p - 1) * (q - 1)) == 1:
            return paillier_params(n, rng, msg_bits)


def _check_bounds(params: CommitParams, x: int, r: int) -> None:
    if abs(x) >= 1 << params.msg_bits:
        raise CommitmentBoundError(f"|x| must be below 2^{params.msg_bits}")


def commit(params: CommitParams, x: int, r: int) -> Commitment:
    """``g^x h^r mod n``; negative ``x`` goes through the inverse of ``g``."""
    _check_bounds(params, x, r)
    return Commitment(arith.powmod2(params.g_base, x, params.h_base, r, params.modulus), params.params_id)


def random_blinding(params: CommitParams, rng: random.Random, slack_bits: int = 0) -> int:
    """Blinding from ``[0, 2^slack * order_bound)``."""
    return rng.randrange(params.order_bound << slack_bits)


def verify_opening(params: CommitParams, cm: Commitment, opening: Opening) -> bool:
    if cm.params_id != params.params_id:
        return False
    try:
        return commit(params, opening.x_value, opening.r_value).value == cm.value
    except (CommitmentBoundError, arith.NotInvertibleError):
        return False


def combine(params: CommitParams, cms: Sequence[Commitment]) -> Commitment:
    """Product of commitments: commits to the sum of values and blindings."""
    if not cms:
        raise ValueError("nothing to combine")
    if any(c.params_id != params.params_id for c in cms):
        raise ValueError("commitments under different parameters")
    return Commitment(arith.prodmod((c.value for c in cms), params.modulus), params.params_id)


def divide(params: CommitParams, cm: Commitment, x: int) -> Commitment:
    """``cm / g^x``: shifts the committed value by ``-x``."""
    return Commitment(arith.powmod2(cm.value, 1, params.g_base, -x, params.modulus), params.params_id)
