import dataclasses
import random
import sys
from pathlib import Path

import pytest
from py_arkworks_bls12381 import G1Point, G2Point

from tbids import group, timebound

sys.path.insert(0, str(Path(__file__).parent))


class RecordingRng(random.Random):
    """Seeded rng that remembers every scalar it hands out."""

    def __init__(self, seed=0):
        super().__init__(seed)
        self.drawn = []

    def randrange(self, *args, **kwargs):
        value = super().randrange(*args, **kwargs)
        self.drawn.append(value)
        return value


class ZeroRng:
    def randrange(self, stop):
        return 0


@pytest.fixture
def rng():
    return random.Random(0x7B1D5)


@pytest.fixture
def recording_rng():
    return RecordingRng(99)


@pytest.fixture(scope="session")
def params16():
    return timebound.setup(16, random.Random(16), identity_levels=1)


@pytest.fixture(scope="session")
def params16_l2():
    return timebound.setup(16, random.Random(162), identity_levels=2)


# -- points outside the prime-order subgroup, built with an independent library --


def _g1_torsion():
    from py_ecc.bls12_381.bls12_381_curve import field_modulus as q
    from py_ecc.optimized_bls12_381 import FQ, Z1, curve_order, multiply
    from py_ecc.bls.point_compression import compress_G1

    x = 4
    while True:
        rhs = (x**3 + 4) % q
        y = pow(rhs, (q + 1) // 4, q)
        if y * y % q == rhs:
            pt = (FQ(x), FQ(y), FQ(1))
            if multiply(pt, curve_order) != Z1:
                return compress_G1(pt).to_bytes(48, "big")
        x += 1


def _g2_torsion():
    from py_ecc.optimized_bls12_381 import FQ2, Z2, b2, curve_order, multiply
    from py_ecc.bls.point_compression import compress_G2
    from py_ecc.bls.point_compression import modular_squareroot_in_FQ2 as sqrt_fq2

    xi = 0
    while True:
        x = FQ2([xi, 1])
        y = sqrt_fq2(x**3 + b2)
        if y is not None:
            pt = (x, y, FQ2.one())
            if multiply(pt, curve_order) != Z2:
                z1, z2 = compress_G2(pt)
                return z1.to_bytes(48, "big") + z2.to_bytes(48, "big")
        xi += 1


@pytest.fixture(scope="session")
def torsion_g1_bytes():
    return _g1_torsion()


@pytest.fixture(scope="session")
def torsion_g2_bytes():
    return _g2_torsion()


def iter_points(obj):
    """Every G1/G2 point reachable inside a decoded object."""
    if isinstance(obj, (G1Point, G2Point)):
        yield obj
    elif dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        for f in dataclasses.fields(obj):
            yield from iter_points(getattr(obj, f.name))
    elif isinstance(obj, (list, tuple)):
        for item in obj:
            yield from iter_points(item)


def all_points_valid(obj) -> bool:
    return all(group.in_subgroup(p) for p in iter_points(obj))
