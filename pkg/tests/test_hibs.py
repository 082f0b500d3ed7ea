import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import RecordingRng, ZeroRng
from tbids import bbg, group, hibs

IDENTITY = (b"com", b"example")


@pytest.fixture(scope="module")
def setup2():
    rng = random.Random(21)
    pp = hibs.setup(2, rng)
    keys = bbg.gen(pp, rng)
    key = bbg.delegate(pp, keys, IDENTITY, rng)
    return pp, keys, key


def test_signature_depth(setup2):
    pp, _, key = setup2
    assert pp.max_depth == 3 and hibs.signature_depth(pp) == 2
    assert key.depth == 2 and len(key.b) == 1


def test_sign_matches_closed_form(setup2):
    pp, keys, _ = setup2
    rec = RecordingRng(5)
    alpha_keys = bbg.gen(pp, rec)
    key = bbg.delegate(pp, alpha_keys, IDENTITY, rec)
    sig = hibs.sign(pp, key, b"msg", rec)
    alpha, v, w = rec.drawn
    f = pp.g3
    for i, e in enumerate(hibs.full_exponents(pp, IDENTITY, b"msg")):
        f = f + group.mul(pp.h[i], e)
    assert sig.a0 == group.mul(pp.g2, alpha) + group.mul(f, v + w)
    assert sig.a1 == group.mul(group.g2(), v + w)


def test_sign_verify(setup2, rng):
    pp, keys, key = setup2
    sig = hibs.sign(pp, key, b"hello", rng)
    assert hibs.verify_deterministic(pp, keys.pk, IDENTITY, b"hello", sig)
    assert hibs.verify_probabilistic(pp, keys.pk, IDENTITY, b"hello", sig, rng)


def test_wrong_message_identity_or_key_rejected(setup2, rng):
    pp, keys, key = setup2
    sig = hibs.sign(pp, key, b"hello", rng)
    other_pk = bbg.gen(pp, rng).pk
    assert not hibs.verify_deterministic(pp, keys.pk, IDENTITY, b"hellp", sig)
    assert not hibs.verify_deterministic(pp, keys.pk, (b"com", b"exampld"), b"hello", sig)
    assert not hibs.verify_deterministic(pp, other_pk, IDENTITY, b"hello", sig)
    assert not hibs.verify_deterministic(pp, keys.pk, IDENTITY[:1], b"hello", sig)
    assert not hibs.verify_probabilistic(pp, keys.pk, IDENTITY[:1], b"hello", sig, rng)


def test_precomputation_gives_identical_signatures(setup2):
    pp, _, key = setup2
    pre = hibs.precompute(pp, IDENTITY)
    a = hibs.sign(pp, key, b"m", random.Random(7))
    b = hibs.sign_with_precomputation(pp, key, pre, b"m", random.Random(7))
    assert a == b


def test_mismatched_precomputation_does_not_verify(setup2, rng):
    pp, keys, key = setup2
    pre = hibs.precompute(pp, (b"com", b"other"))
    sig = hibs.sign_with_precomputation(pp, key, pre, b"m", rng)
    assert not hibs.verify_deterministic(pp, keys.pk, IDENTITY, b"m", sig)


def test_zero_randomness_still_verifies(setup2):
    pp, keys, key = setup2
    sig = hibs.sign(pp, key, b"m", ZeroRng())
    assert sig.a1 == key.a1
    assert hibs.verify_deterministic(pp, keys.pk, IDENTITY, b"m", sig)


def test_signing_needs_full_depth_key(setup2, rng):
    pp, keys, _ = setup2
    short = bbg.delegate(pp, keys, IDENTITY[:1], rng)
    with pytest.raises(bbg.DepthError):
        hibs.sign(pp, short, b"m", rng)
    with pytest.raises(bbg.DepthError):
        hibs.precompute(pp, IDENTITY[:1])
    with pytest.raises(bbg.DepthError):
        hibs.setup(0, rng)


def test_message_domain_separated_from_identity(setup2):
    pp, _, _ = setup2
    assert hibs.message_exponent(pp, b"x") != bbg.level_exponent(pp, pp.max_depth, b"x")


@settings(max_examples=15, deadline=None)
@given(msg=st.binary(max_size=64), seed=st.integers(0, 2**32))
def test_verifiers_agree_on_honest_and_forged(setup2, msg, seed):
    pp, keys, key = setup2
    rng = random.Random(seed)
    sig = hibs.sign(pp, key, msg, rng)
    forged = hibs.HibsSignature(sig.a0 + group.g1(), sig.a1)
    for s, expected in ((sig, True), (forged, False)):
        assert hibs.verify_deterministic(pp, keys.pk, IDENTITY, msg, s) is expected
        assert hibs.verify_probabilistic(pp, keys.pk, IDENTITY, msg, s, rng) is expected
