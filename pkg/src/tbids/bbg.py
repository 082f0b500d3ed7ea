"""Boneh-Boyen-Goh hierarchical identity-based encryption over a type-3 pairing.

Keys for an identity ``(I1, ..., Ik)`` have the shape ``(a0, a1, b_{k+1}..b_L)``
with ``a0 = msk * F_k^v``, ``a1 = g^v`` (in G2) and ``b_i = h_i^v`` where
``F_k = h1^H(I1) ... hk^H(Ik) * g3``. Identity levels are hashed as
``H(tag/id || level index || bytes)`` so equal byte-strings at different
levels never map to the same exponent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple, Union

from . import group
from .group import GT, G1Point, G2Point, Rng

IdentityVector = Tuple[bytes, ...]

DEFAULT_TAG = b"tbids-v1"


class DelegationError(ValueError):
    """Target identity cannot be derived from the given key."""


class DepthError(ValueError):
    """An identity or key exceeds, or does not match, the supported depth."""


@dataclass(frozen=True, eq=True)
class PublicParams:
    max_depth: int
    g2: G1Point
    g3: G1Point
    h: Tuple[G1Point, ...]
    tag: bytes = DEFAULT_TAG

    def __post_init__(self):
        if self.max_depth < 1:
            raise DepthError("max_depth must be at least 1")
        if len(self.h) != self.max_depth:
            raise DepthError(f"expected {self.max_depth} level generators, got {len(self.h)}")

    def truncated(self, depth: int) -> "PublicParams":
        """Parameters for a shallower hierarchy sharing this instance's generators."""
        if not 1 <= depth <= self.max_depth:
            raise DepthError(f"cannot truncate depth {self.max_depth} params to {depth}")
        return PublicParams(depth, self.g2, self.g3, self.h[:depth], self.tag)


@dataclass(frozen=True)
class MasterKeyPair:
    pk: G2Point
    msk: G1Point


@dataclass(frozen=True)
class DelegatedKey:
    identity: IdentityVector
    a0: G1Point
    a1: G2Point
    b: Tuple[G1Point, ...] = field(default=())

    @property
    def depth(self) -> int:
        return len(self.identity)


@dataclass(frozen=True)
class Ciphertext:
    c1: GT
    c2: G2Point
    c3: G1Point
    depth: int


def setup(max_depth: int, rng: Rng, tag: bytes = DEFAULT_TAG) -> PublicParams:
    if max_depth < 1:
        raise DepthError("max_depth must be at least 1")

    def sample() -> G1Point:
        return group.mul(group.g1(), group.random_scalar(rng))

    g2 = sample()
    g3 = sample()
    h = tuple(sample() for _ in range(max_depth))
    return PublicParams(max_depth, g2, g3, h, tag)


def gen(pp: PublicParams, rng: Rng) -> MasterKeyPair:
    alpha = group.random_scalar(rng)
    return MasterKeyPair(pk=group.mul(group.g2(), alpha), msk=group.mul(pp.g2, alpha))


def level_exponent(pp: PublicParams, index: int, level: bytes) -> int:
    """Hash of one identity level; ``index`` is 1-based."""
    return group.hash_to_scalar(pp.tag + b"/id", index.to_bytes(2, "big") + bytes(level))


def identity_exponents(pp: PublicParams, identity: Sequence[bytes]) -> List[int]:
    return [level_exponent(pp, i + 1, level) for i, level in enumerate(identity)]


def identity_product(pp: PublicParams, exponents: Sequence[int]) -> G1Point:
    """F = h1^e1 ... hk^ek * g3."""
    if len(exponents) > pp.max_depth:
        raise DepthError(f"identity depth {len(exponents)} exceeds max depth {pp.max_depth}")
    return group.g1_multiexp(pp.h[: len(exponents)], exponents) + pp.g3


def _check_identity(pp: PublicParams, identity: Sequence[bytes]) -> IdentityVector:
    identity = tuple(bytes(level) for level in identity)
    if not identity:
        raise DepthError("identity vector must have at least one level")
    if len(identity) > pp.max_depth:
        raise DepthError(f"identity depth {len(identity)} exceeds max depth {pp.max_depth}")
    if any(len(level) == 0 for level in identity):
        raise ValueError("identity levels must be non-empty")
    return identity


def extend_one_level(pp: PublicParams, key: DelegatedKey, exponent: int, rng: Rng) -> Tuple[G1Point, G2Point, Tuple[G1Point, ...]]:
    """Child rule of Del for one new level with the given hashed exponent.

    ``key`` covers ``k-1`` levels; ``exponent`` is ``H(I_k)``. Works on the
    raw exponent so callers can hash the new level under their own domain
    (the signature layer uses this for messages). Returns the new key's
    components; the caller attaches the identity.
    """
    k = key.depth + 1
    if k > pp.max_depth or not key.b:
        raise DepthError("key has no remaining level to delegate")
    prefix = identity_exponents(pp, key.identity)
    f_k = identity_product(pp, prefix + [exponent])
    w = group.random_scalar(rng)
    a0 = key.a0 + group.mul(key.b[0], exponent) + group.mul(f_k, w)
    a1 = key.a1 + group.mul(group.g2(), w)
    b = tuple(b_i + group.mul(h_i, w) for b_i, h_i in zip(key.b[1:], pp.h[k:]))
    return a0, a1, b


def _from_master(pp: PublicParams, master: MasterKeyPair, identity: IdentityVector, rng: Rng) -> DelegatedKey:
    k = len(identity)
    v = group.random_scalar(rng)
    f_k = identity_product(pp, identity_exponents(pp, identity))
    return DelegatedKey(
        identity=identity,
        a0=master.msk + group.mul(f_k, v),
        a1=group.mul(group.g2(), v),
        b=tuple(group.mul(h_i, v) for h_i in pp.h[k:]),
    )


def delegate(
    pp: PublicParams,
    key: Union[MasterKeyPair, DelegatedKey],
    target: Sequence[bytes],
    rng: Rng,
) -> DelegatedKey:
    """Derive a key for ``target`` from the master key or from an ancestor's key.

    From a delegated key the one-level child rule is applied once per extra
    level, re-randomizing each time. Raises DelegationError if the key's
    identity is not a strict prefix of ``target``.
    """
    target = _check_identity(pp, target)
    if isinstance(key, MasterKeyPair):
        return _from_master(pp, key, target, rng)

    if len(key.b) != pp.max_depth - key.depth:
        raise DepthError("key does not match these parameters")
    if len(target) <= key.depth or target[: key.depth] != key.identity:
        raise DelegationError(
            f"key for {_fmt(key.identity)} cannot derive {_fmt(target)}: not a strict prefix"
        )
    current = key
    for index in range(key.depth, len(target)):
        exponent = level_exponent(pp, index + 1, target[index])
        a0, a1, b = extend_one_level(pp, current, exponent, rng)
        current = DelegatedKey(target[: index + 1], a0, a1, b)
    return current


def encrypt(pp: PublicParams, pk: G2Point, identity: Sequence[bytes], m: GT, rng: Rng) -> Ciphertext:
    identity = _check_identity(pp, identity)
    return encrypt_exponents(pp, pk, identity_exponents(pp, identity), m, rng)


def encrypt_exponents(pp: PublicParams, pk: G2Point, exponents: Sequence[int], m: GT, rng: Rng) -> Ciphertext:
    s = group.random_scalar(rng)
    # e(g2, pk)^s computed as e(g2^s, pk)
    c1 = group.pairing(group.mul(pp.g2, s), pk) * m
    c2 = group.mul(group.g2(), s)
    c3 = group.mul(identity_product(pp, exponents), s)
    return Ciphertext(c1, c2, c3, len(exponents))


def decrypt(pp: PublicParams, key: DelegatedKey, c: Ciphertext) -> GT:
    """m = C1 * e(C3, a1) / e(a0, C2); exact-depth keys only."""
    if key.depth != c.depth:
        raise DepthError(f"key depth {key.depth} does not match ciphertext depth {c.depth}")
    return c.c1 * group.multi_pairing([(c.c3, key.a1), (-key.a0, c.c2)])


def key_is_consistent(pp: PublicParams, pk: G2Point, key: DelegatedKey) -> bool:
    """e(F_k, a1) * e(g2, pk) == e(a0, g) for the key's own depth."""
    f_k = identity_product(pp, identity_exponents(pp, key.identity))
    check = group.multi_pairing([(f_k, key.a1), (pp.g2, pk), (-key.a0, group.g2())])
    return check == group.gt_identity()


def _fmt(identity: Sequence[bytes]) -> str:
    return "(" + ", ".join(repr(level) for level in identity) + ")"
