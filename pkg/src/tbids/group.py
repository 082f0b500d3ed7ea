"""Type-3 pairing group over BLS12-381.

Scalars are plain Python ints in ``[0, ORDER)``. Points and target-group
values are the native objects of the ``py_arkworks_bls12381`` backend;
this module is the only place that touches the backend directly.
"""

from __future__ import annotations

import hashlib
import secrets
from dataclasses import dataclass
from typing import Protocol, Sequence, Tuple

from py_arkworks_bls12381 import GT, G1Point, G2Point, Scalar

__all__ = [
    "ORDER",
    "FIELD_MODULUS",
    "CURVE_ID",
    "G1Point",
    "G2Point",
    "GT",
    "GroupContext",
    "BLS12_381",
    "Rng",
    "system_rng",
    "random_scalar",
    "hash_to_scalar",
    "g1",
    "g2",
    "g1_identity",
    "g2_identity",
    "gt_identity",
    "mul",
    "g1_multiexp",
    "pairing",
    "multi_pairing",
    "gt_pow",
    "gt_inverse",
    "in_subgroup",
    "scalar_inverse",
]

ORDER = 0x73EDA753299D7D483339D80809A1D80553BDA402FFFE5BFEFFFFFFFF00000001
FIELD_MODULUS = int(
    "1a0111ea397fe69a4b1ba7b6434bacd764774b84f38512bf6730d2a0f6b0f624"
    "1eabfffeb153ffffb9feffffffffaaab",
    16,
)
CURVE_ID = 0x01  # BLS12-381, the only supported curve

G1_BYTES = 48
G2_BYTES = 96


class Rng(Protocol):
    """Anything with ``randrange``: ``random.Random``, ``secrets.SystemRandom``."""

    def randrange(self, stop: int) -> int: ...


def system_rng() -> Rng:
    return secrets.SystemRandom()


@dataclass(frozen=True)
class GroupContext:
    order: int
    g1: G1Point
    g2: G2Point
    curve_id: int


_G1 = G1Point()
_G2 = G2Point()
BLS12_381 = GroupContext(order=ORDER, g1=_G1, g2=_G2, curve_id=CURVE_ID)


def g1() -> G1Point:
    return _G1


def g2() -> G2Point:
    return _G2


def g1_identity() -> G1Point:
    return G1Point.identity()


def g2_identity() -> G2Point:
    return G2Point.identity()


def gt_identity() -> GT:
    return GT.one()


def random_scalar(rng: Rng) -> int:
    return rng.randrange(ORDER)


def hash_to_scalar(domain_tag: bytes, data: bytes) -> int:
    """Hash into Z_p^* with 512 bits of SHAKE-256 output.

    The tag is length-prefixed so that (tag, data) pairs never collide
    across tags. A zero result is mapped to 1.
    """
    if len(domain_tag) > 255:
        raise ValueError("domain tag longer than 255 bytes")
    xof = hashlib.shake_256()
    xof.update(bytes([len(domain_tag)]))
    xof.update(domain_tag)
    xof.update(data)
    value = int.from_bytes(xof.digest(64), "big") % ORDER
    return value or 1


def _scalar(k: int) -> Scalar:
    return Scalar(k % ORDER)


def mul(point, k: int):
    """Scalar multiplication (``point^k`` in multiplicative notation) in G1 or G2."""
    return point * _scalar(k)


def g1_multiexp(points: Sequence[G1Point], scalars: Sequence[int]) -> G1Point:
    """prod points[i]^scalars[i]; the points must already be validated."""
    if len(points) != len(scalars):
        raise ValueError("points and scalars differ in length")
    if not points:
        return G1Point.identity()
    return G1Point.multiexp_unchecked(list(points), [_scalar(k) for k in scalars])


def pairing(a: G1Point, b: G2Point) -> GT:
    return GT.pairing(a, b)


def multi_pairing(pairs: Sequence[Tuple[G1Point, G2Point]]) -> GT:
    """Product of pairings evaluated with one shared final exponentiation."""
    if not pairs:
        raise ValueError("multi_pairing needs at least one pair")
    return GT.multi_pairing([a for a, _ in pairs], [b for _, b in pairs])


def gt_pow(x: GT, k: int) -> GT:
    # The backend has no GT exponentiation; plain square-and-multiply.
    k %= ORDER
    result = GT.one()
    base = x
    while k:
        if k & 1:
            result = result * base
        base = base * base
        k >>= 1
    return result


def gt_inverse(x: GT) -> GT:
    return gt_pow(x, ORDER - 1)


def scalar_inverse(k: int) -> int:
    if k % ORDER == 0:
        raise ZeroDivisionError("zero has no inverse mod the group order")
    return pow(k, -1, ORDER)


def in_subgroup(point) -> bool:
    """Arithmetic membership check: P^(r-1) * P is the identity iff P has order dividing r."""
    identity = type(point).identity()
    return point * Scalar(ORDER - 1) + point == identity
