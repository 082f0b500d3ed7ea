"""Hierarchical identity-based signatures from the BBG HIBE (Naor transform).

A signature on ``msg`` for identity ``(id_1..id_l)`` is a HIBE key for
``(id_1..id_l, msg)``. The HIBE therefore has one more level than the
signature hierarchy; the last level is reserved for messages and hashed
under its own domain tag.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from . import bbg, group
from .bbg import DelegatedKey, DepthError, PublicParams
from .group import G1Point, G2Point, Rng


@dataclass(frozen=True)
class HibsSignature:
    a0: G1Point
    a1: G2Point


@dataclass(frozen=True)
class SignerPrecomputation:
    # h1^H(id1) ... hl^H(idl) * g3 for the signer's fixed identity
    t: G1Point


def setup(signature_depth: int, rng: Rng, tag: bytes = bbg.DEFAULT_TAG) -> PublicParams:
    if signature_depth < 1:
        raise DepthError("signature depth must be at least 1")
    return bbg.setup(signature_depth + 1, rng, tag)


def signature_depth(pp: PublicParams) -> int:
    return pp.max_depth - 1


def message_exponent(pp: PublicParams, msg: bytes) -> int:
    return message_exponent_at(pp.tag, pp.max_depth, msg)


def message_exponent_at(tag: bytes, level: int, msg: bytes) -> int:
    """Messages get their own domain tag; ``level`` is the HIBE level they occupy."""
    return group.hash_to_scalar(tag + b"/msg", level.to_bytes(2, "big") + bytes(msg))


def _check_key(pp: PublicParams, key: DelegatedKey) -> None:
    if key.depth != signature_depth(pp) or len(key.b) != 1:
        raise DepthError(
            f"signing key must have depth {signature_depth(pp)} with one open level, got depth {key.depth}"
        )


def sign(pp: PublicParams, key: DelegatedKey, msg: bytes, rng: Rng) -> HibsSignature:
    _check_key(pp, key)
    a0, a1, _ = bbg.extend_one_level(pp, key, message_exponent(pp, msg), rng)
    return HibsSignature(a0, a1)


def precompute(pp: PublicParams, identity: Sequence[bytes]) -> SignerPrecomputation:
    if len(identity) != signature_depth(pp):
        raise DepthError(f"identity must have {signature_depth(pp)} levels")
    return SignerPrecomputation(bbg.identity_product(pp, bbg.identity_exponents(pp, identity)))


def sign_with_precomputation(
    pp: PublicParams,
    key: DelegatedKey,
    pre: SignerPrecomputation,
    msg: bytes,
    rng: Rng,
) -> HibsSignature:
    """(a0 * b^H(m) * (t * h_last^H(m))^w, a1 * g^w).

    The precomputation is trusted; a mismatched ``pre`` simply yields a
    signature that does not verify.
    """
    _check_key(pp, key)
    return sign_raw(pp.h[-1], key.a0, key.a1, key.b[0], pre.t, message_exponent(pp, msg), rng)


def sign_raw(h_last: G1Point, a0: G1Point, a1: G2Point, b_last: G1Point, t: G1Point, m: int, rng: Rng) -> HibsSignature:
    """Constant-cost signing core shared with stored epoch keys."""
    w = group.random_scalar(rng)
    f = t + group.mul(h_last, m)
    return HibsSignature(
        a0 + group.mul(b_last, m) + group.mul(f, w),
        a1 + group.mul(group.g2(), w),
    )


def full_exponents(pp: PublicParams, identity: Sequence[bytes], msg: bytes) -> list:
    return bbg.identity_exponents(pp, identity) + [message_exponent(pp, msg)]


def verify_deterministic(pp: PublicParams, pk: G2Point, identity: Sequence[bytes], msg: bytes, sig: HibsSignature) -> bool:
    """e(F, a1) * e(g2, pk) * e(a0, g)^-1 == 1 as one pairing product."""
    if len(identity) != signature_depth(pp):
        return False
    f = bbg.identity_product(pp, full_exponents(pp, identity, msg))
    return verify_product(pp, pk, f, sig)


def verify_product(pp: PublicParams, pk: G2Point, f: G1Point, sig: HibsSignature) -> bool:
    check = group.multi_pairing([(f, sig.a1), (pp.g2, pk), (-sig.a0, group.g2())])
    return check == group.gt_identity()


def verify_probabilistic(
    pp: PublicParams,
    pk: G2Point,
    identity: Sequence[bytes],
    msg: bytes,
    sig: HibsSignature,
    rng: Rng,
) -> bool:
    """Naor's check: encrypt a random GT element to (id, msg), decrypt with the signature.

    Kept as an oracle for the deterministic verifier.
    """
    if len(identity) != signature_depth(pp):
        return False
    challenge = group.pairing(group.mul(group.g1(), group.random_scalar(rng)), group.g2())
    exps = full_exponents(pp, identity, msg)
    c = bbg.encrypt_exponents(pp, pk, exps, challenge, rng)
    as_key = DelegatedKey(identity=tuple(identity) + (bytes(msg),), a0=sig.a0, a1=sig.a1, b=())
    return bbg.decrypt(pp, as_key, c) == challenge
