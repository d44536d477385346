"""Joint RSA modulus generation among ``k`` consortium parties.

Each party holds additive shares ``p_i``, ``q_i`` of the two primes. The
modulus ``N = (sum p_i)(sum q_i)`` is opened through a masked multiplication,
primality of the factors is checked with the two-prime test of Boneh and
Franklin, and the private exponent ``d`` ends up additively shared.

The simulation runs in one process. Public broadcasts go through a
:class:`Bus` and form the ceremony transcript; correlated randomness
(multiplication triples, zero-sharings) comes from a :class:`Dealer` over
private channels and never reaches the transcript. Parties only ever
combine their own share with public messages.
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Sequence

import numpy as np

from mab import arith
from mab.counters import tick

DEFAULT_EXPONENT = 65537
DEFAULT_ROUNDS = 20


class CeremonyError(RuntimeError):
    """The ceremony cannot continue with the current candidate."""


class TrialDivisionError(CeremonyError):
    def __init__(self, which: str, divisor: int | None = None):
        self.which = which
        self.divisor = divisor
        super().__init__(f"candidate {which} failed trial division")


class ThresholdError(ValueError):
    """Not every party contributed to a k-out-of-k operation."""


@dataclass(frozen=True)
class PartyShare:
    party_index: int
    p_share: int
    q_share: int
    d_share: int | None = None

    def phi_share(self, n: int) -> int:
        """This party's additive share of ``phi(N) = N - p - q + 1``."""
        if self.party_index == 1:
            return n - self.p_share - self.q_share + 1
        return -(self.p_share + self.q_share)

    def to_json(self) -> dict:
        out = {
            "party_index": self.party_index,
            "p_share_hex": arith.to_hex(self.p_share),
            "q_share_hex": arith.to_hex(self.q_share),
        }
        if self.d_share is not None:
            out["d_share_hex"] = arith.to_hex(self.d_share)
        return out

    @classmethod
    def from_json(cls, doc: dict) -> "PartyShare":
        d = doc.get("d_share_hex")
        return cls(
            doc["party_index"],
            arith.from_hex(doc["p_share_hex"]),
            arith.from_hex(doc["q_share_hex"]),
            arith.from_hex(d) if d is not None else None,
        )


@dataclass(frozen=True)
class Message:
    round: int
    from_party: int  # 0 is the public coin / coordinator
    kind: str
    payload: tuple[int, ...]

    @property
    def payload_bytes(self) -> bytes:
        return arith.encode_parts(arith.int_to_bytes(v) for v in self.payload)

    def to_json(self) -> dict:
        return {
            "round": self.round,
            "from_party": self.from_party,
            "kind": self.kind,
            "payload_hex": self.payload_bytes.hex(),
        }


class Bus:
    """Append-only broadcast channel. Its log is the public transcript."""

    def __init__(self, messages: list[Message] | None = None):
        self.messages: list[Message] = messages if messages is not None else []
        self._round = max((m.round for m in self.messages), default=0)

    def next_round(self) -> int:
        self._round += 1
        return self._round

    def broadcast(self, round_no: int, party: int, kind: str, payload: Sequence[int]) -> Message:
        msg = Message(round_no, party, kind, tuple(int(v) for v in payload))
        self.messages.append(msg)
        return msg

    def gather(self, round_no: int, kind: str) -> list[Message]:
        got = [m for m in self.messages if m.round == round_no and m.kind == kind]
        return sorted(got, key=lambda m: m.from_party)


class Dealer:
    """Preprocessing functionality handing out correlated randomness."""

    def __init__(self, k: int, rng: random.Random):
        self.k = k
        self.rng = rng
        self._np = np.random.default_rng(rng.getrandbits(64))

    def _split_mod(self, value: np.ndarray, moduli: np.ndarray) -> list[np.ndarray]:
        parts = [self._np.integers(0, moduli) for _ in range(self.k - 1)]
        last = (value - sum(parts)) % moduli
        return parts + [last]

    def sieve_material(self, moduli: np.ndarray):
        """Per-party shares of a nonzero mask and a triple, elementwise mod each prime."""
        rho = self._np.integers(1, moduli)
        a = self._np.integers(0, moduli)
        b = self._np.integers(0, moduli)
        c = a * b % moduli
        rs, as_, bs, cs = (self._split_mod(v, moduli) for v in (rho, a, b, c))
        return list(zip(rs, as_, bs, cs))

    def triple_mod(self, modulus: int):
        a = self.rng.randrange(modulus)
        b = self.rng.randrange(modulus)
        split = lambda v: self.split_mod(v, modulus)
        return list(zip(split(a), split(b), split(a * b % modulus)))

    def split_mod(self, value: int, modulus: int) -> list[int]:
        parts = [self.rng.randrange(modulus) for _ in range(self.k - 1)]
        return parts + [(value - sum(parts)) % modulus]

    def split_int(self, value: int, bits: int) -> list[int]:
        parts = [self.rng.randrange(-(1 << bits), 1 << bits) for _ in range(self.k - 1)]
        return parts + [value - sum(parts)]

    def int_triple(self, x_bits: int, y_bits: int, kappa: int):
        """Integer triple with masks ``kappa`` bits wider than the operands."""
        a = self.rng.getrandbits(x_bits + kappa)
        b = self.rng.getrandbits(y_bits + kappa)
        width = x_bits + y_bits + 2 * kappa
        return list(zip(self.split_int(a, width), self.split_int(b, width), self.split_int(a * b, width)))


@dataclass
class JointModulus:
    n_value: int
    party_count: int
    e_public: int | None = None
    transcript: list[Message] = field(default_factory=list)
    trial_bound: int = arith.DEFAULT_TRIAL_BOUND

    @property
    def biprime_verified(self) -> bool:
        verdicts = [m for m in self.transcript if m.kind == "bipri-verdict"]
        return bool(verdicts) and verdicts[-1].payload == (1,)

    def public_json(self) -> dict:
        return {
            "n_hex": arith.to_hex(self.n_value),
            "party_count": self.party_count,
            "e_hex": arith.to_hex(self.e_public) if self.e_public is not None else None,
            "trial_bound": self.trial_bound,
            "biprime_verified": self.biprime_verified,
        }

    def transcript_json(self) -> list[dict]:
        return [m.to_json() for m in self.transcript]

    def transcript_bytes(self) -> bytes:
        return json.dumps(self.transcript_json(), sort_keys=True).encode()


# -- share sampling ----------------------------------------------------------


def _share_bits(prime_bits: int, k: int) -> int:
    return prime_bits - 1 - max(1, math.ceil(math.log2(k)))


def _draw(prime_bits: int, k: int, index: int, rng: random.Random) -> int:
    quarter = 1 << (_share_bits(prime_bits, k) - 2)
    if index == 1:
        # party 1 also carries the public top bit so p has exactly prime_bits bits
        return (1 << (prime_bits - 1)) + 4 * rng.randrange(quarter) + 3
    return 4 * rng.randrange(1, quarter)


def rdm_para(prime_bits: int, k: int, rngs: Sequence[random.Random]) -> list[PartyShare]:
    """Each party samples its secret shares of ``p`` and ``q``.

    Party 1 picks shares congruent to 3 mod 4 and everybody else shares
    divisible by 4, so that ``p = q = 3 (mod 4)``.
    """
    if k < 2:
        raise ValueError("a consortium needs at least two parties")
    if prime_bits < 16:
        raise ValueError("prime_bits must be at least 16")
    if len(rngs) != k:
        raise ValueError("one randomness source per party")
    return [
        PartyShare(i, _draw(prime_bits, k, i, rngs[i - 1]), _draw(prime_bits, k, i, rngs[i - 1]))
        for i in range(1, k + 1)
    ]


def split_value(value: int, k: int, rng: random.Random, share_bits: int | None = None) -> list[int]:
    """Additive split following the mod-4 convention (test and planting helper)."""
    if value % 4 != 3:
        raise ValueError("value must be 3 mod 4")
    share_bits = share_bits or max(4, value.bit_length() - 1 - math.ceil(math.log2(k)))
    others = [4 * rng.randrange(1, 1 << (share_bits - 2)) for _ in range(k - 1)]
    first = value - sum(others)
    if first <= 0:
        raise ValueError("value too small to split")
    return [first] + others


def shares_for(p: int, q: int, k: int, rng: random.Random) -> list[PartyShare]:
    """Build party shares that sum to given ``p`` and ``q``. Test mode only."""
    ps, qs = split_value(p, k, rng), split_value(q, k, rng)
    return [PartyShare(i + 1, ps[i], qs[i]) for i in range(k)]


def reconstruct_factors(shares: Sequence[PartyShare]) -> tuple[int, int]:
    """Recombine ``p`` and ``q``. Test mode only: no real party can do this."""
    return sum(s.p_share for s in shares), sum(s.q_share for s in shares)


# -- distributed computation -------------------------------------------------


@lru_cache(maxsize=32)
def _field_prime(bits: int) -> int:
    rng = random.Random(f"mab-field-{bits}")
    cand = (1 << bits) + 1
    while not arith.is_probable_prime(cand, rng):
        cand += 2
    return cand


def _sieve(values: Sequence[int], bound: int, dealer: Dealer, bus: Bus, label: str) -> int:
    """Jointly test whether ``sum(values)`` has a prime factor below ``bound``.

    For every small prime l the parties open ``x * rho mod l`` for a shared
    random nonzero ``rho``: zero exactly when l divides x, uniform otherwise.
    Returns the smallest such divisor or 0.
    """
    primes = arith.small_primes(bound)
    tick("trial_division")
    if not primes:
        return 0
    L = np.array(primes, dtype=np.int64)
    material = dealer.sieve_material(L)
    locals_ = [np.array(arith.small_residues(v, primes), dtype=np.int64) for v in values]

    r1 = bus.next_round()
    for i, (x, (rho, a, b, _)) in enumerate(zip(locals_, material), start=1):
        eps_i = (x - a) % L
        del_i = (rho - b) % L
        bus.broadcast(r1, i, f"sieve-{label}-open", np.concatenate([eps_i, del_i]).tolist())
    opened = [np.array(m.payload, dtype=np.int64) for m in bus.gather(r1, f"sieve-{label}-open")]
    eps = sum(o[: len(L)] for o in opened) % L
    delta = sum(o[len(L) :] for o in opened) % L

    r2 = bus.next_round()
    for i, (rho, a, b, c) in enumerate(material, start=1):
        z_i = (c + eps * b + delta * a) % L
        if i == 1:
            z_i = (z_i + eps * delta) % L
        bus.broadcast(r2, i, f"sieve-{label}-product", z_i.tolist())
    z = sum(np.array(m.payload, dtype=np.int64) for m in bus.gather(r2, f"sieve-{label}-product")) % L

    hits = np.nonzero(z == 0)[0]
    return int(L[hits[0]]) if len(hits) else 0


def _multiply_mod(xs: Sequence[int], ys: Sequence[int], modulus: int, dealer: Dealer, bus: Bus, label: str) -> int:
    """Open ``(sum xs)(sum ys) mod modulus`` with one multiplication triple."""
    triple = dealer.triple_mod(modulus)
    r1 = bus.next_round()
    for i, (x, y, (a, b, _)) in enumerate(zip(xs, ys, triple), start=1):
        bus.broadcast(r1, i, f"{label}-open", [(x - a) % modulus, (y - b) % modulus])
    opened = bus.gather(r1, f"{label}-open")
    eps = sum(m.payload[0] for m in opened) % modulus
    delta = sum(m.payload[1] for m in opened) % modulus
    r2 = bus.next_round()
    for i, (a, b, c) in enumerate(triple, start=1):
        z_i = (c + eps * b + delta * a + (eps * delta if i == 1 else 0)) % modulus
        bus.broadcast(r2, i, f"{label}-product", [z_i])
    return sum(m.payload[0] for m in bus.gather(r2, f"{label}-product")) % modulus


def shared_int_product(
    xs: Sequence[int], ys: Sequence[int], x_bits: int, y_bits: int, dealer: Dealer, bus: Bus, label: str, kappa: int = 40
) -> list[int]:
    """Additive integer shares of ``(sum xs)(sum ys)``; nothing is opened but masked differences."""
    triple = dealer.int_triple(x_bits, y_bits, kappa)
    r1 = bus.next_round()
    for i, (x, y, (a, b, _)) in enumerate(zip(xs, ys, triple), start=1):
        bus.broadcast(r1, i, f"{label}-open", [x - a, y - b])
    opened = bus.gather(r1, f"{label}-open")
    eps = sum(m.payload[0] for m in opened)
    delta = sum(m.payload[1] for m in opened)
    return [c + eps * b + delta * a + (eps * delta if i == 1 else 0) for i, (a, b, c) in enumerate(triple, start=1)]


def open_mod(values: Sequence[int], modulus: int, dealer: Dealer, bus: Bus, label: str) -> int:
    """Reveal ``sum(values) mod modulus`` behind a zero-sharing mask."""
    masks = dealer.split_mod(0, modulus)
    r = bus.next_round()
    for i, (v, z) in enumerate(zip(values, masks), start=1):
        bus.broadcast(r, i, f"{label}-open", [(v + z) % modulus])
    return sum(m.payload[0] for m in bus.gather(r, f"{label}-open")) % modulus


def co_n(
    shares: Sequence[PartyShare],
    *,
    bound: int = arith.DEFAULT_TRIAL_BOUND,
    dealer: Dealer | None = None,
    bus: Bus | None = None,
    prime_bits: int | None = None,
) -> JointModulus:
    """Sieve both factors, open ``N`` and trial-divide it.

    Raises :class:`TrialDivisionError` naming the failed candidate.
    """
    k = len(shares)
    if k < 2:
        raise ValueError("a consortium needs at least two parties")
    bus = bus if bus is not None else Bus()
    dealer = dealer if dealer is not None else Dealer(k, random.Random(0))
    for which in ("p", "q"):
        vals = [getattr(s, f"{which}_share") for s in shares]
        hit = _sieve(vals, bound, dealer, bus, which)
        if hit:
            raise TrialDivisionError(which, hit)
    if prime_bits is None:
        top = max(max(s.p_share, s.q_share) for s in shares)
        prime_bits = top.bit_length() + math.ceil(math.log2(k)) + 1
    field_p = _field_prime(2 * prime_bits + 2)
    n = _multiply_mod([s.p_share for s in shares], [s.q_share for s in shares], field_p, dealer, bus, "n")
    r = bus.next_round()
    bus.broadcast(r, 0, "modulus", [n])
    tick("trial_division")
    hit = arith._k.first_divisor(n, arith.small_primes(bound))
    if hit:
        raise TrialDivisionError("n", hit)
    return JointModulus(n, k, transcript=bus.messages, trial_bound=bound)


def _public_generator(n: int, rng: random.Random) -> int:
    while True:
        g = rng.randrange(2, n - 1)
        if arith.jacobi(g, n) == 1:
            return g


def biprimality_test(
    jm: JointModulus, shares: Sequence[PartyShare], rounds: int = DEFAULT_ROUNDS, rng: random.Random | None = None
) -> bool:
    """Distributed test that ``N`` is a product of two primes 3 mod 4.

    Each round draws a public ``g`` with Jacobi symbol +1; the parties publish
    ``g`` raised to their share of ``phi(N)/4`` and accept when the product is
    +-1 mod N.
    """
    n = jm.n_value
    if n % 4 != 1:
        raise ValueError("N must be 1 mod 4")
    exps = []
    for s in shares:
        phi_i = s.phi_share(n)
        if phi_i % 4:
            raise ValueError(f"party {s.party_index} share of phi(N) is not divisible by 4")
        exps.append(phi_i // 4)
    rng = rng if rng is not None else random.Random(f"bipri:{n}")
    bus = Bus(jm.transcript)
    ok = True
    for _ in range(rounds):
        tick("biprimality")
        r = bus.next_round()
        g = _public_generator(n, rng)
        bus.broadcast(r, 0, "bipri-g", [g])
        for s, e in zip(shares, exps):
            bus.broadcast(r, s.party_index, "bipri-share", [arith.powmod(g, e, n)])
        prod = arith.prodmod((m.payload[0] for m in bus.gather(r, "bipri-share")), n)
        if prod not in (1, n - 1):
            ok = False
            break
    bus.broadcast(bus.next_round(), 0, "bipri-verdict", [int(ok)])
    return ok


def co_keygen(
    jm: JointModulus, e: int, shares: Sequence[PartyShare], dealer: Dealer | None = None
) -> list[PartyShare]:
    """Jointly derive additive shares of ``d = e^-1 mod phi(N)``.

    Only ``phi(N) mod e`` is opened (behind a zero-sharing), then each party
    computes its share locally; a public trial decryption fixes the at most
    ``k-1`` units lost to flooring.
    """
    if not jm.biprime_verified:
        raise CeremonyError("biprimality has not been confirmed for this modulus")
    if e < 2:
        raise ValueError("public exponent must be at least 2")
    n, k = jm.n_value, len(shares)
    dealer = dealer if dealer is not None else Dealer(k, random.Random(f"keygen:{n}"))
    bus = Bus(jm.transcript)
    phis = [s.phi_share(n) for s in shares]
    psi = open_mod(phis, e, dealer, bus, "phi-mod-e")
    if math.gcd(psi, e) != 1:
        raise ValueError(f"gcd(e, phi(N)) != 1 for e={e}")
    zeta = (-arith.mod_inv(psi, e)) % e
    ds = [((1 if s.party_index == 1 else 0) + zeta * phi) // e for s, phi in zip(shares, phis)]

    probes = [m for m in range(2, 50) if math.gcd(m, n) == 1][:3]
    fix = None
    for j in range(k):
        trial = [(s.party_index, d + (j if s.party_index == 1 else 0)) for s, d in zip(shares, ds)]
        if all(
            arith.prodmod((arith.powmod(arith.powmod(m, e, n), d, n) for _, d in trial), n) == m % n for m in probes
        ):
            fix = j
            break
    if fix is None:
        raise CeremonyError("trial decryption could not align the exponent shares")
    r = bus.next_round()
    bus.broadcast(r, 0, "keygen-correction", [fix])
    jm.e_public = e
    return [replace(s, d_share=d + (fix if s.party_index == 1 else 0)) for s, d in zip(shares, ds)]


@dataclass(frozen=True)
class Contribution:
    party_index: int
    value: int


def threshold_decrypt_contrib(share: PartyShare, c: int, jm: JointModulus) -> Contribution:
    if share.d_share is None:
        raise ThresholdError(f"party {share.party_index} has no exponent share yet")
    return Contribution(share.party_index, arith.powmod(c, share.d_share, jm.n_value))


def combine(contribs: Sequence[Contribution], jm: JointModulus) -> int:
    """Multiply all ``k`` contributions: ``c^(sum d_i) = c^d mod N``."""
    seen = {c.party_index for c in contribs}
    if seen != set(range(1, jm.party_count + 1)) or len(contribs) != jm.party_count:
        raise ThresholdError(f"need contributions from all {jm.party_count} parties, got {sorted(seen)}")
    return arith.prodmod((c.value for c in contribs), jm.n_value)


# -- full ceremony -----------------------------------------------------------


@dataclass
class Ceremony:
    modulus: JointModulus
    shares: list[PartyShare]
    restarts: int
    candidates: int


def _redraw(shares: list[PartyShare], which: str, prime_bits: int, rngs) -> list[PartyShare]:
    k = len(shares)
    return [replace(s, **{f"{which}_share": _draw(prime_bits, k, s.party_index, rngs[s.party_index - 1])}) for s in shares]


def run_ceremony(
    parties: int,
    prime_bits: int,
    e: int = DEFAULT_EXPONENT,
    seed: object = None,
    *,
    trial_bound: int = arith.DEFAULT_TRIAL_BOUND,
    rounds: int = DEFAULT_ROUNDS,
    max_restarts: int = 10_000,
) -> Ceremony:
    """Repeat the ceremony until a biprime ``N`` with invertible ``e`` is found."""
    if (1 << (prime_bits - 1)) <= trial_bound:
        raise ValueError("prime_bits too small for the trial-division bound")
    rngs = [arith.make_rng(seed, "party", i) for i in range(1, parties + 1)]
    dealer = Dealer(parties, arith.make_rng(seed, "dealer"))
    coin = arith.make_rng(seed, "public-coin")
    shares = rdm_para(prime_bits, parties, rngs)
    restarts = candidates = 0
    while restarts <= max_restarts:
        bus = Bus()
        for which in ("p", "q"):
            while True:
                candidates += 1
                hit = _sieve([getattr(s, f"{which}_share") for s in shares], trial_bound, dealer, bus, which)
                if not hit:
                    break
                shares = _redraw(shares, which, prime_bits, rngs)
        try:
            jm = co_n(shares, bound=1, dealer=dealer, bus=bus, prime_bits=prime_bits)
            jm.trial_bound = trial_bound
            tick("trial_division")
            if arith._k.first_divisor(jm.n_value, arith.small_primes(trial_bound)):
                raise TrialDivisionError("n")
            if biprimality_test(jm, shares, rounds, coin):
                return Ceremony(jm, co_keygen(jm, e, shares, dealer), restarts, candidates)
        except (TrialDivisionError, ValueError):
            pass
        restarts += 1
        shares = rdm_para(prime_bits, parties, rngs)
    raise CeremonyError(f"no biprime found within {max_restarts} restarts")
