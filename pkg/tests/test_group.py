import hashlib
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from py_arkworks_bls12381 import G1Point, G2Point
from py_ecc.bls.point_compression import compress_G1, compress_G2
from py_ecc.optimized_bls12_381 import G1 as ECC_G1
from py_ecc.optimized_bls12_381 import G2 as ECC_G2
from py_ecc.optimized_bls12_381 import curve_order, field_modulus, multiply

from tbids import group

scalars = st.integers(min_value=0, max_value=group.ORDER - 1)


def test_constants_match_independent_library():
    assert group.ORDER == curve_order
    assert group.FIELD_MODULUS == field_modulus


@pytest.mark.parametrize("k", [1, 2, 3, 0xDEADBEEF, group.ORDER - 1, 2**200 + 17])
def test_g1_scalar_mul_matches_py_ecc(k):
    ours = bytes(group.mul(group.g1(), k).to_compressed_bytes())
    theirs = compress_G1(multiply(ECC_G1, k)).to_bytes(48, "big")
    assert ours == theirs


@pytest.mark.parametrize("k", [1, 5, 0xC0FFEE, group.ORDER - 2])
def test_g2_scalar_mul_matches_py_ecc(k):
    ours = bytes(group.mul(group.g2(), k).to_compressed_bytes())
    z1, z2 = compress_G2(multiply(ECC_G2, k))
    assert ours == z1.to_bytes(48, "big") + z2.to_bytes(48, "big")


def test_hash_to_scalar_range_over_many_inputs():
    seen = set()
    for i in range(10_000):
        h = group.hash_to_scalar(b"range", i.to_bytes(4, "big"))
        assert 1 <= h < group.ORDER
        seen.add(h)
    assert len(seen) == 10_000


def test_hash_to_scalar_reference_formula():
    tag, data = b"tbids-v1/id", b"\x00\x01example.com"
    digest = hashlib.shake_256(bytes([len(tag)]) + tag + data).digest(64)
    assert group.hash_to_scalar(tag, data) == int.from_bytes(digest, "big") % curve_order


def test_hash_to_scalar_tag_is_length_prefixed():
    # without a length prefix these two would hash the same byte string
    assert group.hash_to_scalar(b"ab", b"c") != group.hash_to_scalar(b"a", b"bc")


def test_hash_to_scalar_rejects_long_tag():
    with pytest.raises(ValueError):
        group.hash_to_scalar(b"x" * 256, b"")


def test_bilinearity_over_random_pairs():
    rng = random.Random(11)
    base = group.pairing(group.g1(), group.g2())
    for _ in range(100):
        a, b = group.random_scalar(rng), group.random_scalar(rng)
        lhs = group.pairing(group.mul(group.g1(), a), group.mul(group.g2(), b))
        assert lhs == group.gt_pow(base, a * b)


def test_pairing_is_non_degenerate():
    assert group.pairing(group.g1(), group.g2()) != group.gt_identity()
    assert group.pairing(group.g1_identity(), group.g2()) == group.gt_identity()


def test_multi_pairing_is_product_of_pairings(rng):
    pairs = [
        (group.mul(group.g1(), group.random_scalar(rng)), group.mul(group.g2(), group.random_scalar(rng)))
        for _ in range(3)
    ]
    product = group.gt_identity()
    for a, b in pairs:
        product = product * group.pairing(a, b)
    assert group.multi_pairing(pairs) == product


def test_multi_pairing_rejects_empty():
    with pytest.raises(ValueError):
        group.multi_pairing([])


def test_gt_inverse():
    x = group.pairing(group.mul(group.g1(), 7), group.g2())
    assert x * group.gt_inverse(x) == group.gt_identity()


def test_g1_multiexp_matches_naive(rng):
    points = [group.mul(group.g1(), group.random_scalar(rng)) for _ in range(5)]
    ks = [group.random_scalar(rng) for _ in range(5)]
    naive = group.g1_identity()
    for p, k in zip(points, ks):
        naive = naive + group.mul(p, k)
    assert group.g1_multiexp(points, ks) == naive
    assert group.g1_multiexp([], []) == group.g1_identity()
    with pytest.raises(ValueError):
        group.g1_multiexp(points, ks[:2])


@settings(max_examples=25, deadline=None)
@given(scalars, scalars)
def test_scalar_mul_is_additive(a, b):
    g = group.g1()
    assert group.mul(g, a) + group.mul(g, b) == group.mul(g, a + b)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=1, max_value=group.ORDER - 1))
def test_scalar_inverse(k):
    assert k * group.scalar_inverse(k) % group.ORDER == 1


def test_scalar_inverse_of_zero():
    with pytest.raises(ZeroDivisionError):
        group.scalar_inverse(group.ORDER)


def test_mul_reduces_negative_and_large_scalars():
    g = group.g2()
    assert group.mul(g, -1) == -g
    assert group.mul(g, group.ORDER + 3) == group.mul(g, 3)


def test_in_subgroup_accepts_honest_points(rng):
    assert group.in_subgroup(group.mul(group.g1(), group.random_scalar(rng)))
    assert group.in_subgroup(group.mul(group.g2(), group.random_scalar(rng)))
    assert group.in_subgroup(group.g1_identity())


def test_in_subgroup_rejects_torsion_points(torsion_g1_bytes, torsion_g2_bytes):
    p = G1Point.from_compressed_bytes_unchecked(list(torsion_g1_bytes))
    q = G2Point.from_compressed_bytes_unchecked(list(torsion_g2_bytes))
    assert not group.in_subgroup(p)
    assert not group.in_subgroup(q)


def test_context_constant():
    ctx = group.BLS12_381
    assert ctx.order == group.ORDER and ctx.g1 == group.g1() and ctx.g2 == group.g2()
