"""Paillier encryption of transaction amounts.

``g = n + 1`` throughout, so ``g^m mod n^2 = 1 + m*n``. Two kinds of key
exist: an ordinary key pair (:func:`h_keygen` from two primes) and the
consortium key whose modulus is the jointly generated ``N``; the latter has
no single private key and decrypts through :class:`ThresholdPaillier`.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Sequence

from mab import arith
from mab.cokeygen import Bus, Dealer, JointModulus, PartyShare, ThresholdError, open_mod, shared_int_product


class MessageSpaceError(ValueError):
    """Plaintext outside ``[0, n)``."""


class MalformedCiphertextError(ValueError):
    """Ciphertext not under this key or not a unit mod ``n^2``."""


@dataclass(frozen=True)
class PaillierPublicKey:
    n_value: int
    g_value: int

    @property
    def n_squared(self) -> int:
        return self.n_value * self.n_value

    @property
    def key_id(self) -> str:
        return arith.digest_hex(
            arith.encode_parts([b"mab/paillier-pk", arith.nat_to_bytes(self.n_value), arith.nat_to_bytes(self.g_value)])
        )[:32]

    def to_json(self) -> dict:
        return {"n_hex": arith.to_hex(self.n_value), "g_hex": arith.to_hex(self.g_value)}

    @classmethod
    def from_json(cls, doc: dict) -> "PaillierPublicKey":
        return cls(arith.from_hex(doc["n_hex"]), arith.from_hex(doc["g_hex"]))


@dataclass(frozen=True)
class PaillierKey:
    public: PaillierPublicKey
    lambda_value: int
    mu_value: int

    @property
    def n_value(self) -> int:
        return self.public.n_value

    @property
    def n_squared(self) -> int:
        return self.public.n_squared

    @property
    def g_value(self) -> int:
        return self.public.g_value


@dataclass(frozen=True)
class Ciphertext:
    c_value: int
    key_id: str

    def to_json(self) -> dict:
        return {"key_id": self.key_id, "c_hex": arith.to_hex(self.c_value)}

    @classmethod
    def from_json(cls, doc: dict) -> "Ciphertext":
        return cls(arith.from_hex(doc["c_hex"]), doc["key_id"])


def _L(x: int, n: int) -> int:
    if x % n != 1:
        raise MalformedCiphertextError("L argument is not 1 mod n")
    return (x - 1) // n


def key_from_primes(p: int, q: int) -> PaillierKey:
    if p == q:
        raise ValueError("p and q must be distinct")
    n = p * q
    if n < 15:
        raise ValueError("modulus too small")
    if math.gcd(n, (p - 1) * (q - 1)) != 1:
        raise ValueError("gcd(n, phi(n)) != 1")
    lam = arith.lcm(p - 1, q - 1)
    pk = PaillierPublicKey(n, n + 1)
    mu = arith.mod_inv(_L(pow(n + 1, lam, n * n), n), n)
    return PaillierKey(pk, lam, mu)


def h_keygen(bits: int, rng: random.Random) -> PaillierKey:
    """Fresh key pair with a ``bits``-bit modulus."""
    if bits < 16:
        raise ValueError("bits must be at least 16")
    half = bits // 2
    while True:
        p = arith.gen_prime(arith.PrimeSpec(half), rng)
        q = arith.gen_prime(arith.PrimeSpec(bits - half), rng)
        if p != q and (p * q).bit_length() == bits:
            try:
                return key_from_primes(p, q)
            except ValueError:
                continue


def _public(key) -> PaillierPublicKey:
    return key.public if isinstance(key, (PaillierKey, ThresholdPaillier)) else key


def h_enc(key, m: int, r: int | None = None, rng: random.Random | None = None) -> Ciphertext:
    pk = _public(key)
    n, n2 = pk.n_value, pk.n_squared
    if not 0 <= m < n:
        raise MessageSpaceError(f"plaintext must lie in [0, {n})")
    if r is None:
        r = arith.rand_unit(rng or random.SystemRandom(), n)
    elif math.gcd(r, n) != 1:
        raise ValueError("randomness must be coprime to n")
    # g^m = 1 + m n when g = n + 1
    gm = (1 + m * n) % n2 if pk.g_value == n + 1 else arith.powmod(pk.g_value, m, n2)
    arith.tick("mul")
    return Ciphertext(arith.mulmod(gm, arith.powmod(r, n, n2), n2), pk.key_id)


def h_oper(cs: Sequence[Ciphertext], key) -> Ciphertext:
    """Homomorphic addition: product of ciphertexts mod ``n^2``."""
    if not cs:
        raise ValueError("need at least one ciphertext")
    pk = _public(key)
    if any(c.key_id != pk.key_id for c in cs):
        raise MalformedCiphertextError("ciphertexts under different keys")
    return Ciphertext(arith.prodmod((c.c_value for c in cs), pk.n_squared), pk.key_id)


def _check(c: Ciphertext, pk: PaillierPublicKey) -> None:
    if c.key_id != pk.key_id:
        raise MalformedCiphertextError("ciphertext under a different key")
    if not 1 <= c.c_value < pk.n_squared or math.gcd(c.c_value, pk.n_value) != 1:
        raise MalformedCiphertextError("ciphertext is not a unit mod n^2")


def h_dec(sk: PaillierKey, c: Ciphertext) -> int:
    _check(c, sk.public)
    n = sk.n_value
    arith.tick("mul", 2)
    return _L(arith.powmod(c.c_value, sk.lambda_value, sk.n_squared), n) * sk.mu_value % n


def nth_root(sk: PaillierKey, x: int) -> int:
    """``y`` with ``y^n = x mod n``, using ``n^-1 mod lambda``."""
    n = sk.n_value
    if math.gcd(x, n) != 1:
        raise ValueError("x must be a unit mod n")
    return arith.powmod(x % n, arith.mod_inv(n, sk.lambda_value), n)


def recover_randomness(key, c: Ciphertext, roots) -> int:
    """The ``r`` in ``c = g^m r^n``: an ``n``-th root of ``c mod n``.

    ``roots`` maps a unit mod ``n`` to its ``n``-th root, e.g.
    ``functools.partial(nth_root, sk)``.
    """
    pk = _public(key)
    _check(c, pk)
    return roots(c.c_value % pk.n_value)


def rerandomize(key, c: Ciphertext, rng: random.Random) -> Ciphertext:
    pk = _public(key)
    s = arith.rand_unit(rng, pk.n_value)
    return Ciphertext(arith.mulmod(c.c_value, arith.powmod(s, pk.n_value, pk.n_squared), pk.n_squared), c.key_id)


# -- consortium key ----------------------------------------------------------


@dataclass(frozen=True)
class ThresholdPaillier:
    """Paillier key on the joint modulus; decryption needs every party.

    Party ``i`` holds an integer share ``s_i`` of ``beta * phi(N)`` for a
    jointly random ``beta``; ``theta = beta * phi(N) mod N`` is public.
    """

    public: PaillierPublicKey
    theta: int
    party_count: int

    @property
    def n_value(self) -> int:
        return self.public.n_value

    def partial(self, share: "PaillierShare", c: Ciphertext) -> "PartialDecryption":
        _check(c, self.public)
        return PartialDecryption(share.party_index, arith.powmod(c.c_value, share.exponent, self.public.n_squared))

    def combine(self, partials: Sequence["PartialDecryption"]) -> int:
        idx = sorted(p.party_index for p in partials)
        if idx != list(range(1, self.party_count + 1)):
            raise ThresholdError(f"need partial decryptions from all {self.party_count} parties, got {idx}")
        n = self.n_value
        acc = arith.prodmod((p.value for p in partials), self.public.n_squared)
        return _L(acc, n) * arith.mod_inv(self.theta, n) % n

    def decrypt(self, shares: Sequence["PaillierShare"], c: Ciphertext) -> int:
        """Run every party's partial decryption and combine them."""
        return self.combine([self.partial(s, c) for s in shares])

    def nth_root(self, shares: Sequence["PaillierShare"], x: int) -> int:
        """Joint ``n``-th root of ``x`` from the shares of ``beta * phi``.

        With ``zeta = -theta^-1 mod N`` the exponent ``(1 + zeta beta phi) / N``
        inverts ``N`` modulo ``phi``; party ``i`` holds ``floor((delta_i1 +
        zeta s_i) / N)`` and the up to ``k - 1`` units lost to flooring are
        found by checking the public result.
        """
        idx = sorted(s.party_index for s in shares)
        if idx != list(range(1, self.party_count + 1)):
            raise ThresholdError(f"need all {self.party_count} parties, got {idx}")
        n = self.n_value
        if math.gcd(x, n) != 1:
            raise ValueError("x must be a unit mod n")
        x %= n
        zeta = -arith.mod_inv(self.theta, n) % n
        parts = [arith.powmod(x, ((1 if s.party_index == 1 else 0) + zeta * s.exponent) // n, n) for s in shares]
        y = arith.prodmod(parts, n)
        for _ in range(self.party_count):
            if arith.powmod(y, n, n) == x:
                return y
            y = arith.mulmod(y, x, n)
        raise ThresholdError("joint root did not verify")

    def to_json(self) -> dict:
        return {**self.public.to_json(), "theta_hex": arith.to_hex(self.theta), "party_count": self.party_count}


@dataclass(frozen=True)
class PaillierShare:
    party_index: int
    exponent: int


@dataclass(frozen=True)
class PartialDecryption:
    party_index: int
    value: int


def consortium_key(
    jm: JointModulus, shares: Sequence[PartyShare], rng: random.Random, kappa: int = 40
) -> tuple[ThresholdPaillier, list[PaillierShare]]:
    """Derive the consortium Paillier key from a finished ceremony."""
    if not jm.biprime_verified:
        raise ValueError("consortium ceremony incomplete")
    n, k = jm.n_value, len(shares)
    dealer = Dealer(k, rng)
    bus = Bus(jm.transcript)
    nbits = n.bit_length()
    while True:
        betas = [rng.getrandbits(nbits + kappa) for _ in shares]
        phis = [s.phi_share(n) for s in shares]
        prod = shared_int_product(betas, phis, nbits + kappa + 3, nbits + 1, dealer, bus, "beta-phi", kappa)
        theta = open_mod(prod, n, dealer, bus, "theta")
        if math.gcd(theta, n) == 1:
            break
    pk = PaillierPublicKey(n, n + 1)
    return ThresholdPaillier(pk, theta, k), [PaillierShare(s.party_index, e) for s, e in zip(shares, prod)]


def escrow_key(shares: Sequence[PartyShare]) -> PaillierKey:
    """Rebuild the consortium private key from all shares. Test mode only."""
    p = sum(s.p_share for s in shares)
    q = sum(s.q_share for s in shares)
    return key_from_primes(p, q)
