"""Proof that a committed integer exceeds a public lower bound ``a``.

With ``E1 = cm / g^a`` committing ``y = x - a`` the prover picks a secret
``alpha`` and publishes

    E2 = E1^alpha h^r1,   E3 = E2^alpha h^r2,   F = g^omega h^r3,
    v  = alpha^2 y + omega,   V = g^v / E3,

then proves knowledge of the exponents linking ``E1 -> E2 -> E3`` (PK1),
that ``F`` and ``V`` hide the same ``omega`` (PK2) and that ``omega`` is
small (PK3). The verifier accepts when ``v > 2^theta`` with
``theta = t + l + s + T``: since ``|omega| < 2^theta`` this forces
``alpha^2 y > 0`` and hence ``y > 0``.

``alpha`` is drawn from ``[2^ceil(theta/2), 2^(ceil(theta/2)+1))`` so that
``alpha^2 y`` clears the threshold for every ``y >= 1``.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable

from mab import arith, sigma
from mab.commitments import Commitment, CommitParams, Opening, commit, divide, random_blinding, verify_opening
from mab.sigma import ProofError, Relation, SigmaProof, Statement


class RangeParamsError(ValueError):
    pass


@dataclass(frozen=True)
class RangeParams:
    commit_params: CommitParams
    t: int
    l: int
    s: int
    T: int

    def __post_init__(self):
        if min(self.t, self.l, self.s, self.T) < 1:
            raise RangeParamsError("t, l, s, T must be positive")
        if self.T <= self.t + self.l + self.s:
            raise RangeParamsError("need T > t + l + s")
        if self.commit_params.kind == "paillier":
            # g has the public order n_d here, so exponents only bind mod n_d;
            # keep every provable alpha^2 y + omega far below n_d
            need = self.v_max_bits + 2 * (self.alpha_bits + 1 + self.t + self.l + 1) + 3
            if self.commit_params.paillier_n.bit_length() <= need:
                raise RangeParamsError(f"Paillier-form modulus needs more than {need} bits")

    @property
    def theta(self) -> int:
        return self.t + self.l + self.s + self.T

    @property
    def alpha_bits(self) -> int:
        return (self.theta + 1) // 2

    @property
    def blinding_bound(self) -> int:
        return self.commit_params.order_bound << self.s

    @property
    def v_max_bits(self) -> int:
        return 2 * (self.alpha_bits + 1) + self.commit_params.msg_bits + 2


@dataclass(frozen=True)
class RangeProof:
    E1: int
    E2: int
    E3: int
    F: int
    V: int
    v: int
    pk1: SigmaProof
    pk2: SigmaProof
    pk3: SigmaProof

    def to_json(self) -> dict:
        out = {k: arith.to_hex(getattr(self, k)) for k in ("E1", "E2", "E3", "F", "V", "v")}
        out.update(pk1=self.pk1.to_json(), pk2=self.pk2.to_json(), pk3=self.pk3.to_json())
        return out

    @classmethod
    def from_json(cls, doc: dict) -> "RangeProof":
        vals = {k: arith.from_hex(doc[k]) for k in ("E1", "E2", "E3", "F", "V", "v")}
        return cls(**vals, **{k: SigmaProof.from_json(doc[k]) for k in ("pk1", "pk2", "pk3")})


def r_com(params: RangeParams, x: int, r: int) -> Commitment:
    if x < 0:
        raise ValueError("range commitments hold non-negative amounts")
    return commit(params.commit_params, x, r)


def _statements(params: RangeParams, cm: Commitment, a: int, E: dict, context: bytes):
    cp = params.commit_params
    n, g, h = cp.modulus, cp.g_base, cp.h_base
    R = params.blinding_bound
    A = 1 << (params.alpha_bits + 1)
    ctx = arith.encode_parts(
        [context, cp.params_id.encode(), arith.nat_to_bytes(cm.value), arith.int_to_bytes(a)]
        + [arith.int_to_bytes(E[k]) for k in ("E1", "E2", "E3", "F", "V", "v")]
    )
    st1 = Statement(
        "range/pk1",
        (
            Relation(n, E["E1"], ((g, "y"), (h, "r"))),
            Relation(n, E["E2"], ((E["E1"], "alpha"), (h, "r1"))),
            Relation(n, E["E3"], ((E["E2"], "alpha"), (h, "r2"))),
        ),
        (("y", 1 << (cp.msg_bits + 1)), ("r", R), ("alpha", A), ("r1", R), ("r2", R)),
        context=ctx,
    )
    omega_bound = 1 << (params.s + params.T)
    st2 = Statement(
        "range/pk2",
        (Relation(n, E["F"], ((g, "omega"), (h, "r3"))), Relation(n, E["V"], ((g, "omega"), (h, "rv")))),
        (("omega", omega_bound), ("r3", R), ("rv", A * A * 4 * R)),
        context=ctx,
    )
    st3 = Statement(
        "range/pk3",
        (Relation(n, E["F"], ((g, "omega"), (h, "r3"))),),
        (("omega", omega_bound), ("r3", R)),
        interval=frozenset({"omega"}),
        context=ctx,
    )
    return st1, st2, st3


ChallengeFn = Callable[[str, tuple[int, ...]], int]


def _build(
    params: RangeParams,
    cm: Commitment,
    y: int,
    r: int,
    a: int,
    rng: random.Random,
    *,
    alpha: int,
    omega: int,
    v: int | None = None,
    strict: bool = True,
    context: bytes = b"",
    challenge_fn: ChallengeFn | None = None,
) -> RangeProof:
    cp = params.commit_params
    n, g, h = cp.modulus, cp.g_base, cp.h_base
    r1, r2, r3 = (random_blinding(cp, rng, params.s) for _ in range(3))
    E1 = divide(cp, cm, a).value
    E2 = arith.powmod2(E1, alpha, h, r1, n)
    E3 = arith.powmod2(E2, alpha, h, r2, n)
    F = arith.powmod2(g, omega, h, r3, n)
    if v is None:
        v = alpha * alpha * y + omega
        arith.tick("mul", 2)
        arith.tick("add")
    V = arith.mulmod(arith.powmod(g, v, n), arith.mod_inv(E3, n), n)
    E = dict(E1=E1, E2=E2, E3=E3, F=F, V=V, v=v)
    st1, st2, st3 = _statements(params, cm, a, E, context)
    rv = -(alpha * (alpha * r + r1) + r2)
    w = dict(y=y, r=r, alpha=alpha, r1=r1, r2=r2, omega=omega, r3=r3, rv=rv)
    proofs = []
    for st in (st1, st2, st3):
        fn = (lambda ann, label=st.label: challenge_fn(label, ann)) if challenge_fn else None
        proofs.append(sigma.prove(st, w, rng, params.t, params.l, challenge_fn=fn, strict=strict))
    return RangeProof(E1, E2, E3, F, V, v, *proofs)


def r_prove(
    params: RangeParams,
    cm: Commitment,
    opening: Opening,
    a: int,
    rng: random.Random,
    *,
    context: bytes = b"",
    challenge_fn: ChallengeFn | None = None,
) -> RangeProof:
    """Honest proof that the value in ``cm`` is strictly greater than ``a``."""
    cp = params.commit_params
    if not verify_opening(cp, cm, opening):
        raise ProofError("opening does not match the commitment")
    y = opening.x_value - a
    if y <= 0:
        raise ProofError("committed value must be strictly greater than the bound")
    alpha = rng.randrange(1 << params.alpha_bits, 1 << (params.alpha_bits + 1))
    omega = rng.randrange(1, 1 << (params.s + params.T))
    proof = _build(
        params, cm, y, opening.r_value, a, rng, alpha=alpha, omega=omega, context=context, challenge_fn=challenge_fn
    )
    if not (proof.v >> params.theta) or proof.v.bit_length() >= params.v_max_bits:
        raise RangeParamsError("parameters too tight for this value")
    return proof


def r_verify(
    params: RangeParams,
    cm: Commitment,
    a: int,
    proof: RangeProof,
    *,
    context: bytes = b"",
    challenges: dict[str, int] | None = None,
) -> bool:
    cp = params.commit_params
    n, g = cp.modulus, cp.g_base
    if cm.params_id != cp.params_id:
        return False
    if not all(1 <= x < n for x in (cm.value, proof.E1, proof.E2, proof.E3, proof.F, proof.V)):
        return False
    if not (1 << params.theta) < proof.v < (1 << params.v_max_bits):
        return False
    try:
        if divide(cp, cm, a).value != proof.E1:
            return False
        U = arith.mulmod(arith.powmod(g, proof.v, n), arith.mod_inv(proof.E3, n), n)
    except arith.NotInvertibleError:
        return False
    if U != proof.V:
        return False
    E = dict(E1=proof.E1, E2=proof.E2, E3=proof.E3, F=proof.F, V=proof.V, v=proof.v)
    for st, pk in zip(_statements(params, cm, a, E, context), (proof.pk1, proof.pk2, proof.pk3)):
        c = challenges.get(st.label) if challenges else None
        if not sigma.verify(st, pk, params.t, params.l, challenge=c):
            return False
    return True


class InteractiveVerifier:
    """Verifier side of the interactive protocol, driven by message passing."""

    def __init__(self, params: RangeParams, rng: random.Random):
        self.params = params
        self.rng = rng
        self.sent: dict[str, int] = {}

    def challenge(self, label: str, announcements: tuple[int, ...]) -> int:
        c = self.rng.randrange(1, 1 << self.params.t)
        self.sent[label] = c
        return c

    def decide(self, cm: Commitment, a: int, proof: RangeProof) -> bool:
        return r_verify(self.params, cm, a, proof, challenges=self.sent)


def r_interactive(
    params: RangeParams, cm: Commitment, opening: Opening, a: int, prover_rng: random.Random, verifier_rng: random.Random
) -> tuple[RangeProof, bool]:
    verifier = InteractiveVerifier(params, verifier_rng)
    proof = r_prove(params, cm, opening, a, prover_rng, challenge_fn=verifier.challenge)
    return proof, verifier.decide(cm, a, proof)


def r_prove_interval(
    params: RangeParams, cm: Commitment, opening: Opening, a: int, b: int, rng: random.Random
) -> tuple[RangeProof, RangeProof]:
    """``a < x < b`` as ``x > a`` on ``cm`` and ``b - x > 0`` on ``g^b / cm``."""
    x = opening.x_value
    if not a < x < b:
        raise ProofError("value outside the open interval")
    mirror = mirrored(params, cm, b)
    lower = r_prove(params, cm, opening, a, rng, context=b"lower")
    upper = r_prove(params, mirror, Opening(b - x, -opening.r_value), 0, rng, context=b"upper")
    return lower, upper


def mirrored(params: RangeParams, cm: Commitment, b: int) -> Commitment:
    cp = params.commit_params
    n = cp.modulus
    return Commitment(arith.mulmod(arith.powmod(cp.g_base, b, n), arith.mod_inv(cm.value, n), n), cp.params_id)


def r_verify_interval(params: RangeParams, cm: Commitment, a: int, b: int, proofs: tuple[RangeProof, RangeProof]) -> bool:
    lower, upper = proofs
    try:
        mirror = mirrored(params, cm, b)
    except arith.NotInvertibleError:
        return False
    return r_verify(params, cm, a, lower, context=b"lower") and r_verify(params, mirror, 0, upper, context=b"upper")


# -- scripted cheaters -------------------------------------------------------

CHEAT_STRATEGIES = ("honest_omega", "inflated_omega", "claim_v")


def forge_nonpositive(
    params: RangeParams, cm: Commitment, opening: Opening, a: int, rng: random.Random, strategy: str
) -> RangeProof:
    """Best-effort proof for ``x <= a``, for soundness tests.

    ``honest_omega`` follows the protocol, so ``v <= omega`` is too small.
    ``inflated_omega`` lifts ``omega`` until ``v`` clears the threshold, which
    breaks the bound PK3 proves. ``claim_v`` announces a large ``v`` while
    keeping ``omega`` honest, so ``V`` and ``F`` no longer hide the same value.
    """
    y = opening.x_value - a
    alpha = rng.randrange(1 << params.alpha_bits, 1 << (params.alpha_bits + 1))
    omega = rng.randrange(1, 1 << (params.s + params.T))
    kw = dict(alpha=alpha, strict=False)
    if strategy == "honest_omega":
        return _build(params, cm, y, opening.r_value, a, rng, omega=omega, **kw)
    if strategy == "inflated_omega":
        lifted = (1 << params.theta) + 1 + rng.randrange(1 << params.s) - alpha * alpha * y
        return _build(params, cm, y, opening.r_value, a, rng, omega=lifted, **kw)
    if strategy == "claim_v":
        v = (1 << params.theta) + 1 + rng.randrange(1 << params.s)
        return _build(params, cm, y, opening.r_value, a, rng, omega=omega, v=v, **kw)
    raise ValueError(f"unknown strategy {strategy!r}")
