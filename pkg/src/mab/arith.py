"""Big-integer arithmetic, prime generation, hashing and encodings.

Every other module goes through this one for modular arithmetic so that the
operation counters in :mod:`mab.counters` see a consistent picture. The hot
kernels come from the compiled ``mab._kernels`` extension when it is
importable, otherwise from ``mab._pykernels``. Set ``MAB_PURE_PYTHON=1`` to
force the fallback.
"""
from __future__ import annotations

import hashlib
import math
import os
import random
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

from mab.counters import tick

if os.environ.get("MAB_PURE_PYTHON") == "1":
    from mab import _pykernels as _k
else:
    try:
        from mab import _kernels as _k  # type: ignore[attr-defined]
    except ImportError:
        from mab import _pykernels as _k

BACKEND: str = _k.BACKEND
MR_ROUNDS = 40
DEFAULT_TRIAL_BOUND = 10_000


class NotInvertibleError(ValueError):
    """Raised when a modular inverse does not exist."""


class PrimeGenerationError(RuntimeError):
    """Raised when prime search exhausts its candidate budget."""


# -- encodings ---------------------------------------------------------------


def nat_to_bytes(x: int) -> bytes:
    """Minimal big-endian encoding; zero encodes as a single zero byte."""
    if x < 0:
        raise ValueError("naturals are non-negative")
    if x == 0:
        return b"\x00"
    return x.to_bytes((x.bit_length() + 7) // 8, "big")


def nat_from_bytes(data: bytes) -> int:
    if not data:
        raise ValueError("empty encoding")
    if len(data) > 1 and data[0] == 0:
        raise ValueError("non-canonical encoding: leading zero byte")
    return int.from_bytes(data, "big")


def int_to_bytes(x: int) -> bytes:
    """Signed integer encoding: one sign byte followed by the magnitude."""
    return (b"\x01" if x < 0 else b"\x00") + nat_to_bytes(abs(x))


def to_hex(x: int) -> str:
    """Lowercase hex without leading zeros; negative values get a '-' prefix."""
    return format(x, "x")


_HEX = re.compile(r"0|-?[1-9a-f][0-9a-f]*")


def from_hex(s: str) -> int:
    """Inverse of :func:`to_hex`; only the canonical form is accepted."""
    if not isinstance(s, str) or not _HEX.fullmatch(s):
        raise ValueError(f"bad hex integer: {s!r}")
    return int(s, 16)


def encode_parts(parts: Iterable[bytes]) -> bytes:
    """Length-prefixed concatenation (8-byte big-endian lengths)."""
    out = bytearray()
    for p in parts:
        out += len(p).to_bytes(8, "big")
        out += p
    return bytes(out)


# -- counted modular arithmetic ----------------------------------------------


def powmod(base: int, exp: int, mod: int) -> int:
    tick("mod_exp")
    try:
        return _k.powmod(base, exp, mod)
    except ValueError as exc:
        raise NotInvertibleError(str(exc)) from None


def powmod2(b1: int, e1: int, b2: int, e2: int, mod: int) -> int:
    """``b1**e1 * b2**e2 % mod``; counted as two exponentiations and a product."""
    tick("mod_exp", 2)
    tick("mod_mul")
    try:
        return _k.powmod2(b1, e1, b2, e2, mod)
    except ValueError as exc:
        raise NotInvertibleError(str(exc)) from None


def mulmod(a: int, b: int, mod: int) -> int:
    tick("mod_mul")
    return a * b % mod


def prodmod(values: Iterable[int], mod: int) -> int:
    acc = 1
    for i, v in enumerate(values):
        if i:
            tick("mod_mul")
        acc = acc * v % mod
    return acc


def mul(a: int, b: int) -> int:
    tick("mul")
    return a * b


def add(a: int, b: int) -> int:
    tick("add")
    return a + b


def mod_inv(a: int, n: int) -> int:
    """Inverse of ``a`` modulo ``n``; raises :class:`NotInvertibleError`."""
    if n < 1:
        raise ValueError("modulus must be positive")
    try:
        return pow(a, -1, n)
    except ValueError:
        raise NotInvertibleError(f"{a} has no inverse modulo {n}") from None


def jacobi(a: int, n: int) -> int:
    if n < 3 or n % 2 == 0:
        raise ValueError("Jacobi symbol needs an odd modulus >= 3")
    return _k.jacobi(a, n)


def lcm(a: int, b: int) -> int:
    return a // math.gcd(a, b) * b


# -- primes ------------------------------------------------------------------


@lru_cache(maxsize=16)
def small_primes(bound: int) -> tuple[int, ...]:
    """All primes strictly below ``bound``."""
    if bound <= 2:
        return ()
    sieve = bytearray([1]) * bound
    sieve[0:2] = b"\x00\x00"
    for i in range(2, math.isqrt(bound - 1) + 1):
        if sieve[i]:
            sieve[i * i :: i] = bytearray(len(range(i * i, bound, i)))
    return tuple(i for i, flag in enumerate(sieve) if flag)


def first_small_divisor(n: int, bound: int = DEFAULT_TRIAL_BOUND) -> int:
    """Smallest prime below ``bound`` dividing ``n`` (other than ``n``), else 0."""
    tick("trial_division")
    return _k.first_divisor(n, small_primes(bound))


def small_residues(n: int, primes: Sequence[int]) -> list[int]:
    return _k.residues(n, primes)


def is_probable_prime(n: int, rng: random.Random, rounds: int = MR_ROUNDS) -> bool:
    if n < 2:
        return False
    if n < 4:
        return True
    if n % 2 == 0:
        return False
    if _k.first_divisor(n, small_primes(1000)):
        return False
    if n < 1000 * 1000:
        return True
    bases = [rng.randrange(2, n - 1) for _ in range(rounds)]
    return _k.miller_rabin(n, bases)


@dataclass(frozen=True)
class PrimeSpec:
    bit_length: int
    residue_class: tuple[int, int] | None = None

    def __post_init__(self):
        if self.bit_length < 8:
            raise ValueError("bit_length must be at least 8")
        if self.residue_class is not None:
            rem, mod = self.residue_class
            if mod < 1 or math.gcd(rem, mod) != 1:
                raise ValueError(f"residue class {rem} mod {mod} contains no large primes")


def gen_prime(spec: PrimeSpec, rng: random.Random, max_attempts: int | None = None) -> int:
    """Random probable prime of exactly ``spec.bit_length`` bits."""
    bits = spec.bit_length
    rem, mod = spec.residue_class or (1, 2)
    attempts = max_attempts if max_attempts is not None else 200 * bits
    lo = 1 << (bits - 1)
    for _ in range(attempts):
        cand = rng.getrandbits(bits) | lo
        cand += (rem - cand) % mod
        if cand.bit_length() != bits:
            continue
        if is_probable_prime(cand, rng):
            return cand
    raise PrimeGenerationError(f"no {bits}-bit prime found in {attempts} attempts")


def gen_safe_prime(bits: int, rng: random.Random, max_attempts: int | None = None) -> int:
    """Prime ``p = 2p' + 1`` with ``p'`` prime, exactly ``bits`` bits."""
    if bits < 8:
        raise ValueError("safe primes need at least 8 bits")
    attempts = max_attempts if max_attempts is not None else 20_000 * bits
    sieve = small_primes(2000)
    for _ in range(attempts):
        half = rng.getrandbits(bits - 1) | (1 << (bits - 2)) | 1
        # p' = 1 mod 3 would make p divisible by 3
        if half % 3 != 2 and half > 3:
            continue
        p = 2 * half + 1
        if p.bit_length() != bits:
            continue
        if any(half % q == 0 and half != q or p % q == 0 and p != q for q in sieve[:40]):
            continue
        if is_probable_prime(half, rng, 8) and is_probable_prime(p, rng):
            if is_probable_prime(half, rng):
                return p
    raise PrimeGenerationError(f"no {bits}-bit safe prime found in {attempts} attempts")


# -- randomness and hashing --------------------------------------------------


def make_rng(seed: object, *labels: object) -> random.Random:
    """Deterministic generator for ``seed`` and a purpose label.

    ``seed=None`` yields an OS-entropy generator.
    """
    if seed is None:
        return random.SystemRandom()
    return random.Random(":".join(str(x) for x in (seed, *labels)))


def rand_unit(rng: random.Random, n: int) -> int:
    """Uniform element of [1, n) coprime to ``n``."""
    while True:
        r = rng.randrange(1, n)
        if math.gcd(r, n) == 1:
            return r


def hash_to_int(domain_tag: bytes, parts: Sequence[bytes], bound: int) -> int:
    """Deterministic value in ``[0, bound)`` from SHA-256 with rejection sampling."""
    if bound < 2:
        raise ValueError("bound must be at least 2")
    tick("hash")
    seed = hashlib.sha256(encode_parts([domain_tag, len(parts).to_bytes(8, "big"), *parts])).digest()
    nbits = (bound - 1).bit_length()
    nbytes = (nbits + 7) // 8
    counter = 0
    while True:
        stream = b""
        block = 0
        while len(stream) < nbytes:
            stream += hashlib.sha256(seed + counter.to_bytes(4, "big") + block.to_bytes(4, "big")).digest()
            block += 1
        x = int.from_bytes(stream[:nbytes], "big") >> (8 * nbytes - nbits)
        if x < bound:
            return x
        counter += 1


def hash_ints(domain_tag: bytes, values: Iterable[int], bound: int) -> int:
    return hash_to_int(domain_tag, [int_to_bytes(v) for v in values], bound)


def digest_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()
