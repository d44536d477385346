import dataclasses
import random

import pytest
from hypothesis import given, settings, strategies as st

from mab import arith, commitments, rangeproof
from mab.commitments import Opening, commit
from mab.rangeproof import RangeParams


def honest(rp, x, rng, a=0, context=b""):
    r = rng.randrange(rp.blinding_bound)
    cm = rangeproof.r_com(rp, x, r)
    return cm, Opening(x, r), rangeproof.r_prove(rp, cm, Opening(x, r), a, rng, context=context)


def test_honest_proofs_accept_and_identity(range_params):
    rp = range_params
    cp = rp.commit_params
    rng = random.Random(1)
    for x in [1, 2, 3, 1 << 16] + [rng.randrange(1, 1 << 16) for _ in range(40)]:
        cm, _, proof = honest(rp, x, rng)
        assert rangeproof.r_verify(rp, cm, 0, proof)
        assert pow(cp.g_base, proof.v, cp.modulus) == proof.V * proof.E3 % cp.modulus
        assert (1 << rp.theta) < proof.v < (1 << rp.v_max_bits)


def test_lower_bound_a(range_params):
    rng = random.Random(2)
    cm, op, proof = honest(range_params, 100, rng, a=99)
    assert rangeproof.r_verify(range_params, cm, 99, proof)
    assert not rangeproof.r_verify(range_params, cm, 0, proof)
    with pytest.raises(rangeproof.ProofError):
        rangeproof.r_prove(range_params, cm, op, 100, rng)


def test_prover_refuses_nonpositive(range_params):
    rng = random.Random(3)
    cm = commit(range_params.commit_params, 0, 5)
    with pytest.raises(rangeproof.ProofError):
        rangeproof.r_prove(range_params, cm, Opening(0, 5), 0, rng)
    with pytest.raises(rangeproof.ProofError):
        rangeproof.r_prove(range_params, cm, Opening(1, 5), 0, rng)
    with pytest.raises(ValueError):
        rangeproof.r_com(range_params, -1, 5)


@pytest.mark.parametrize("strategy", rangeproof.CHEAT_STRATEGIES)
def test_cheaters_rejected(range_params, strategy):
    rp = range_params
    rng = random.Random(strategy)
    for x in [0, -1, -2, -(1 << 16)] + [-rng.randrange(1, 1 << 16) for _ in range(16)]:
        r = rng.randrange(rp.blinding_bound)
        cm = commit(rp.commit_params, x, r)
        forged = rangeproof.forge_nonpositive(rp, cm, Opening(x, r), 0, rng, strategy)
        assert not rangeproof.r_verify(rp, cm, 0, forged)


def test_context_binding(range_params):
    rng = random.Random(4)
    cm, _, proof = honest(range_params, 7, rng, context=b"tx-1")
    assert rangeproof.r_verify(range_params, cm, 0, proof, context=b"tx-1")
    assert not rangeproof.r_verify(range_params, cm, 0, proof, context=b"tx-2")


def test_proof_bound_to_commitment(range_params):
    rng = random.Random(5)
    cm, _, proof = honest(range_params, 7, rng)
    other, _, _ = honest(range_params, 7, rng)
    assert not rangeproof.r_verify(range_params, other, 0, proof)


@pytest.mark.parametrize("field", ["E1", "E2", "E3", "F", "V", "v"])
def test_field_mutations_rejected(range_params, field):
    rng = random.Random(field)
    cm, _, proof = honest(range_params, 12, rng)
    for delta in (1, 2, -1):
        bad = dataclasses.replace(proof, **{field: getattr(proof, field) + delta})
        assert not rangeproof.r_verify(range_params, cm, 0, bad)


@pytest.mark.parametrize("which", ["pk1", "pk2", "pk3"])
def test_subproof_mutations_rejected(range_params, which):
    rng = random.Random(which)
    cm, _, proof = honest(range_params, 12, rng)
    pk = getattr(proof, which)
    for i in range(len(pk.responses)):
        z = list(pk.responses)
        z[i] += 1
        bad = dataclasses.replace(proof, **{which: dataclasses.replace(pk, responses=tuple(z))})
        assert not rangeproof.r_verify(range_params, cm, 0, bad)


def test_interactive_mode(range_params):
    rp = range_params
    rng = random.Random(6)
    r = rng.randrange(rp.blinding_bound)
    cm = rangeproof.r_com(rp, 30, r)
    proof, ok = rangeproof.r_interactive(rp, cm, Opening(30, r), 0, rng, random.Random(7))
    assert ok
    # the same transcript does not pass as a Fiat-Shamir proof
    assert not rangeproof.r_verify(rp, cm, 0, proof)


def test_interval_proof(range_params):
    rp = range_params
    rng = random.Random(8)
    r = rng.randrange(rp.blinding_bound)
    cm = rangeproof.r_com(rp, 50, r)
    proofs = rangeproof.r_prove_interval(rp, cm, Opening(50, r), 10, 60, rng)
    assert rangeproof.r_verify_interval(rp, cm, 10, 60, proofs)
    assert not rangeproof.r_verify_interval(rp, cm, 10, 50, proofs)
    with pytest.raises(rangeproof.ProofError):
        rangeproof.r_prove_interval(rp, cm, Opening(50, r), 50, 60, rng)


def test_json_roundtrip(range_params):
    cm, _, proof = honest(range_params, 9, random.Random(9))
    back = rangeproof.RangeProof.from_json(proof.to_json())
    assert back == proof and rangeproof.r_verify(range_params, cm, 0, back)


def test_params_validation(range_params):
    cp = range_params.commit_params
    with pytest.raises(rangeproof.RangeParamsError):
        RangeParams(cp, 16, 8, 8, 32)  # T must exceed t + l + s
    small = commitments.paillier_params(arith.gen_prime(arith.PrimeSpec(40), random.Random(1)) * 1009, random.Random(2), 16)
    with pytest.raises(rangeproof.RangeParamsError):
        RangeParams(small, 16, 8, 8, 33)


def test_rsa_form_params(range_params):
    cp = commitments.setup_params(256, random.Random(10), msg_bits=32)
    rp = RangeParams(cp, 16, 8, 8, 33)
    cm, _, proof = honest(rp, 5, random.Random(11))
    assert rangeproof.r_verify(rp, cm, 0, proof)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, (1 << 32) - 1), st.integers(0, 2**32))
def test_completeness_property(range_params, x, seed):
    cm, _, proof = honest(range_params, x, random.Random(seed))
    assert rangeproof.r_verify(range_params, cm, 0, proof)
