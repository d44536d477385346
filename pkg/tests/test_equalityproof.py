import dataclasses
import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from mab import commitments, equalityproof, paillier
from mab.commitments import commit


def dual(ep, m, rng):
    ra = rng.randrange(ep.blinding_bound(ep.params_a) >> equalityproof.SUM_SLACK_BITS)
    rb = rng.randrange(ep.blinding_bound(ep.params_b) >> equalityproof.SUM_SLACK_BITS)
    return equalityproof.e_com(ep, m, ra, rb), ra, rb


def test_honest_accept(equality_params):
    ep = equality_params
    rng = random.Random(1)
    for m in [0, 1, 50, (1 << 32) - 1] + [rng.randrange(1 << 32) for _ in range(30)]:
        d, ra, rb = dual(ep, m, rng)
        proof = equalityproof.e_prove(ep, d, m, ra, rb, rng, context=b"c")
        assert equalityproof.e_verify(ep, d, proof, context=b"c")
        assert not equalityproof.e_verify(ep, d, proof, context=b"d")


def test_different_values_rejected(equality_params):
    ep = equality_params
    rng = random.Random(2)
    for _ in range(30):
        m = rng.randrange(1, 1 << 20)
        ra, rb = rng.randrange(1 << 200), rng.randrange(1 << 200)
        d = equalityproof.DualCommitment(commit(ep.params_a, m, ra), commit(ep.params_b, m + 1, rb))
        with pytest.raises(equalityproof.ProofError):
            equalityproof.e_prove(ep, d, m, ra, rb, rng)
        forged = equalityproof.e_prove(ep, d, m, ra, rb, rng, strict=False)
        assert not equalityproof.e_verify(ep, d, forged)


@pytest.mark.parametrize("field", ["u_value", "d_value", "d1_value", "d2_value"])
def test_mutations_rejected(equality_params, field):
    rng = random.Random(field)
    d, ra, rb = dual(equality_params, 77, rng)
    proof = equalityproof.e_prove(equality_params, d, 77, ra, rb, rng)
    for delta in (1, -1, 1 << 10):
        bad = dataclasses.replace(proof, **{field: getattr(proof, field) + delta})
        assert not equalityproof.e_verify(equality_params, d, bad)
    other, _, _ = dual(equality_params, 77, rng)
    assert not equalityproof.e_verify(equality_params, other, proof)


def test_params_must_differ(equality_params):
    with pytest.raises(ValueError):
        equalityproof.EqualityParams(equality_params.params_a, equality_params.params_a, 16, 8, 8)


def test_json_roundtrip(equality_params):
    rng = random.Random(3)
    d, ra, rb = dual(equality_params, 5, rng)
    proof = equalityproof.e_prove(equality_params, d, 5, ra, rb, rng)
    assert equalityproof.EqualityProof.from_json(proof.to_json()) == proof
    assert equalityproof.DualCommitment.from_json(d.to_json()) == d


@pytest.fixture(scope="module")
def tiny_dumb():
    return commitments.dumb_account_params(32, random.Random(4), msg_bits=8)


def test_aggregate_exhaustive_tiny(tiny_dumb):
    pd = tiny_dumb
    rng = random.Random(5)
    cases = disagreements = 0
    for size in (1, 2, 3):
        for outs in itertools.product(range(1, 7), repeat=size):
            rhos = [rng.randrange(pd.order_bound) for _ in outs]
            cts = [paillier.Ciphertext(commit(pd, m, r).value, "d") for m, r in zip(outs, rhos)]
            for m_in in range(1, 19):
                f = commit(pd, m_in, sum(rhos))
                cases += 1
                disagreements += equalityproof.aggregate_check(pd, cts, f) != (sum(outs) == m_in)
    assert cases == 258 * 18 and disagreements == 0


def test_aggregate_rejects_wrong_params(tiny_dumb, equality_params):
    with pytest.raises(ValueError):
        equalityproof.aggregate_check(tiny_dumb, [], commit(tiny_dumb, 1, 1))
    with pytest.raises(ValueError):
        equalityproof.aggregate_check(equality_params.params_a, [paillier.Ciphertext(1, "x")], commit(tiny_dumb, 1, 1))


@pytest.fixture(scope="module")
def link_setup(system):
    sp, _ = system
    rng = random.Random(6)
    key = paillier.h_keygen(64, rng)
    return sp, key, rng


def make_link(sp, key, rng, m, m_d=None):
    pd, prof = sp.params_d, sp.profile
    r = rng.randrange(1, key.n_value)
    rho = rng.randrange(pd.order_bound << prof.s)
    c = paillier.h_enc(key, m, r=r)
    cd = paillier.Ciphertext(commit(pd, m if m_d is None else m_d, rho).value, sp.dumb_pk.key_id)
    proof = equalityproof.link_prove(key.public, pd, c, cd, m, r, rho, rng, prof.t, prof.l, prof.s, context=b"x")
    return c, cd, proof


def test_link_proof(link_setup):
    sp, key, rng = link_setup
    prof = sp.profile
    for m in (1, 20, 30, 12345):
        c, cd, proof = make_link(sp, key, rng, m)
        assert equalityproof.link_verify(key.public, sp.params_d, c, cd, proof, prof.t, prof.l, prof.s, context=b"x")
        assert not equalityproof.link_verify(key.public, sp.params_d, c, cd, proof, prof.t, prof.l, prof.s, context=b"y")
    c, cd, proof = make_link(sp, key, rng, 20, m_d=21)
    assert not equalityproof.link_verify(key.public, sp.params_d, c, cd, proof, prof.t, prof.l, prof.s, context=b"x")


@settings(max_examples=40, deadline=None)
@given(st.integers(0, (1 << 32) - 1), st.integers(0, 2**32))
def test_equality_completeness_property(equality_params, m, seed):
    rng = random.Random(seed)
    d, ra, rb = dual(equality_params, m, rng)
    assert equalityproof.e_verify(equality_params, d, equalityproof.e_prove(equality_params, d, m, ra, rb, rng))
