"""Time-bound identity-based signatures.

Two schemes share one parameter set:

* ``flat``: the epoch and identity are fused into a single identity level
  of a two-level HIBE (identity level + message level).
* ``fs``: the epoch is spelled out bit by bit as the top levels of the
  hierarchy. The master state walks the binary tree over epochs
  depth-first, keeping only keys for nodes that cover future epochs,
  so past epochs cannot be delegated once the state moves on.

Epoch 0 is the leftmost leaf; ``fs_gen`` descends to it immediately and
drops the root key.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

from . import bbg, group, hibs
from .bbg import DelegatedKey, MasterKeyPair, PublicParams
from .epochs import (
    DEFAULT_EPOCH_BITS,
    EpochConfig,
    EpochError,
    binid,
    covers,
    epoch_bits_for,
    epoch_from_timestamp,
    label_identity,
    window_order,
)
from .group import G1Point, G2Point, Rng
from .hibs import HibsSignature, SignerPrecomputation

log = logging.getLogger(__name__)

FLAT = "flat"
FS = "fs"
SCHEMES = (FLAT, FS)

IdentityVector = Tuple[bytes, ...]
TbidsSignature = HibsSignature
StackEntry = Tuple[str, Union[MasterKeyPair, DelegatedKey]]


class EpochsExhausted(EpochError):
    """The key state has no epochs left."""


class NotCurrentEpoch(EpochError):
    """A forward-secure state can only delegate for its current epoch."""


@dataclass(frozen=True)
class TbidsParams:
    n: int
    identity_levels: int
    pp: PublicParams

    def __post_init__(self):
        if self.n < 2 or self.n & (self.n - 1):
            raise EpochError("n must be a power of two >= 2")
        if self.identity_levels < 1:
            raise ValueError("identity_levels must be at least 1")
        if self.pp.max_depth != self.epoch_bits + self.identity_levels + 1:
            raise bbg.DepthError("HIBE depth does not match epoch bits and identity levels")

    @property
    def epoch_bits(self) -> int:
        return epoch_bits_for(self.n)

    def hibe(self, scheme: str) -> PublicParams:
        """HIBE parameters used by ``scheme``; flat uses the first two level generators."""
        if scheme == FS:
            return self.pp
        if scheme == FLAT:
            return self.pp.truncated(2)
        raise ValueError(f"unknown scheme {scheme!r}")


@dataclass(frozen=True)
class FlatMasterKey:
    params: TbidsParams
    keys: MasterKeyPair


@dataclass
class FsSecretKeyState:
    params: TbidsParams
    current_epoch: int
    # bottom to top; the top entry is the leaf of current_epoch
    stack: List[StackEntry] = field(default_factory=list)

    def labels(self) -> List[str]:
        return [lbl for lbl, _ in self.stack]


@dataclass(frozen=True)
class DelegatedEpochKey:
    """Everything an edge needs to sign for one (epoch, identity), and nothing more."""

    scheme: str
    epoch: int
    identity: IdentityVector
    epoch_bits: int
    inner: DelegatedKey
    precomp: SignerPrecomputation
    h_msg: G1Point
    tag: bytes

    def __post_init__(self):
        if len(self.inner.b) != 1:
            raise bbg.DepthError("delegated epoch key must leave exactly the message level open")

    @property
    def hibe_depth(self) -> int:
        return self.inner.depth + 1


def setup(
    n: int = 1 << DEFAULT_EPOCH_BITS,
    rng: Optional[Rng] = None,
    identity_levels: int = 1,
    tag: bytes = bbg.DEFAULT_TAG,
) -> TbidsParams:
    """Parameters for up to ``n`` epochs (rounded up to a power of two)."""
    rng = rng or group.system_rng()
    bits = epoch_bits_for(n)
    pp = bbg.setup(bits + identity_levels + 1, rng, tag)
    return TbidsParams(1 << bits, identity_levels, pp)


def _check_identity(params: TbidsParams, identity: Sequence[bytes]) -> IdentityVector:
    identity = tuple(bytes(level) for level in identity)
    if len(identity) != params.identity_levels:
        raise ValueError(f"identity must have {params.identity_levels} level(s), got {len(identity)}")
    if any(not level for level in identity):
        raise ValueError("identity levels must be non-empty")
    return identity


def _check_epoch(params: TbidsParams, epoch: int) -> None:
    if not 0 <= epoch < params.n:
        raise EpochError(f"epoch {epoch} outside [0, {params.n})")


def fused_identity(epoch: int, identity: Sequence[bytes]) -> bytes:
    """Injective epoch || identity encoding: 8-byte epoch, then length-prefixed levels."""
    out = bytearray(epoch.to_bytes(8, "big"))
    for level in identity:
        out += len(level).to_bytes(4, "big") + level
    return bytes(out)


def hibs_identity(params: TbidsParams, scheme: str, epoch: int, identity: Sequence[bytes]) -> IdentityVector:
    """The identity under which the underlying HIBS signs for (epoch, identity)."""
    if scheme == FLAT:
        return (fused_identity(epoch, identity),)
    if scheme == FS:
        return binid(epoch, params.epoch_bits) + tuple(identity)
    raise ValueError(f"unknown scheme {scheme!r}")


def _epoch_key(params: TbidsParams, scheme: str, epoch: int, identity: IdentityVector, inner: DelegatedKey) -> DelegatedEpochKey:
    pp = params.hibe(scheme)
    return DelegatedEpochKey(
        scheme=scheme,
        epoch=epoch,
        identity=identity,
        epoch_bits=params.epoch_bits,
        inner=inner,
        precomp=hibs.precompute(pp, inner.identity),
        h_msg=pp.h[-1],
        tag=pp.tag,
    )


# -- flat scheme -------------------------------------------------------------


def flat_gen(params: TbidsParams, rng: Rng) -> Tuple[G2Point, FlatMasterKey]:
    keys = bbg.gen(params.pp, rng)
    return keys.pk, FlatMasterKey(params, keys)


def flat_delegate(master: FlatMasterKey, epoch: int, identity: Sequence[bytes], rng: Rng) -> DelegatedEpochKey:
    params = master.params
    _check_epoch(params, epoch)
    identity = _check_identity(params, identity)
    target = hibs_identity(params, FLAT, epoch, identity)
    inner = bbg.delegate(params.hibe(FLAT), master.keys, target, rng)
    return _epoch_key(params, FLAT, epoch, identity, inner)


# -- forward-secure scheme ---------------------------------------------------


def dfeval(pp: PublicParams, stack: List[StackEntry], epoch_bits: int, rng: Rng) -> StackEntry:
    """Pop the top node and walk down its left spine to a leaf.

    Right children met on the way are pushed onto ``stack`` (mutated in
    place); the reached leaf is returned, not pushed.
    """
    if not stack:
        raise EpochsExhausted("no epochs remain")
    node, key = stack.pop()
    while len(node) < epoch_bits:
        left = bbg.delegate(pp, key, label_identity(node + "0"), rng)
        right = bbg.delegate(pp, key, label_identity(node + "1"), rng)
        stack.append((node + "1", right))
        node, key = node + "0", left
    return node, key


def fs_gen(params: TbidsParams, rng: Rng) -> Tuple[G2Point, FsSecretKeyState]:
    keys = bbg.gen(params.pp, rng)
    stack: List[StackEntry] = [("", keys)]
    leaf = dfeval(params.pp, stack, params.epoch_bits, rng)
    stack.append(leaf)
    pk = keys.pk
    del keys  # the root key only lives on inside its delegations
    return pk, FsSecretKeyState(params, 0, stack)


def fs_update(state: FsSecretKeyState, rng: Rng) -> FsSecretKeyState:
    """Advance ``state`` to the next epoch in place and return it.

    The current leaf is popped and dropped before descending; Python gives
    no stronger erasure than losing the last reference. Updating from the
    last epoch leaves a retired state (``current_epoch == n``, empty stack).
    """
    params = state.params
    if state.current_epoch >= params.n or not state.stack:
        raise EpochsExhausted(f"all {params.n} epochs used")
    state.stack.pop()
    if state.current_epoch + 1 == params.n:
        # past the last epoch: retire, keeping no key at all
        state.stack.clear()
        state.current_epoch = params.n
        return state
    leaf = dfeval(params.pp, state.stack, params.epoch_bits, rng)
    state.stack.append(leaf)
    state.current_epoch += 1
    if leaf[0] != format(state.current_epoch, f"0{params.epoch_bits}b"):
        raise AssertionError(f"stack out of order: reached {leaf[0]} for epoch {state.current_epoch}")
    log.debug("fs state advanced to epoch %d, stack height %d", state.current_epoch, len(state.stack))
    return state


def fs_del(state: FsSecretKeyState, identity: Sequence[bytes], rng: Rng, epoch: Optional[int] = None) -> DelegatedEpochKey:
    params = state.params
    if epoch is not None and epoch != state.current_epoch:
        raise NotCurrentEpoch(
            f"state is at epoch {state.current_epoch}; cannot delegate for epoch {epoch}"
        )
    if not state.stack:
        raise EpochsExhausted("key state is empty")
    identity = _check_identity(params, identity)
    node, leaf = state.stack[-1]
    target = hibs_identity(params, FS, state.current_epoch, identity)
    if node != format(state.current_epoch, f"0{params.epoch_bits}b"):
        raise AssertionError("top of stack is not the current leaf")
    inner = bbg.delegate(params.pp, leaf, target, rng)
    return _epoch_key(params, FS, state.current_epoch, identity, inner)


# -- signing and verification ------------------------------------------------


def sign(key: DelegatedEpochKey, msg: bytes, rng: Rng) -> TbidsSignature:
    m = hibs.message_exponent_at(key.tag, key.hibe_depth, msg)
    return hibs.sign_raw(key.h_msg, key.inner.a0, key.inner.a1, key.inner.b[0], key.precomp.t, m, rng)


def verify(
    params: TbidsParams,
    scheme: str,
    pk: G2Point,
    epoch: int,
    identity: Sequence[bytes],
    msg: bytes,
    sig: TbidsSignature,
) -> bool:
    if not 0 <= epoch < params.n or pk == group.g2_identity():
        return False
    try:
        identity = _check_identity(params, identity)
    except ValueError:
        return False
    pp = params.hibe(scheme)
    return hibs.verify_deterministic(pp, pk, hibs_identity(params, scheme, epoch, identity), msg, sig)


def verify_with_window(
    params: TbidsParams,
    scheme: str,
    pk: G2Point,
    ts: float,
    identity: Sequence[bytes],
    msg: bytes,
    sig: TbidsSignature,
    cfg: EpochConfig,
) -> bool:
    """Accept if the signature verifies for the clock's epoch or one within ``cfg.window`` of it."""
    e = epoch_from_timestamp(ts, cfg)
    return matching_epoch(params, scheme, pk, e, identity, msg, sig, cfg.window) is not None


def matching_epoch(
    params: TbidsParams,
    scheme: str,
    pk: G2Point,
    epoch: int,
    identity: Sequence[bytes],
    msg: bytes,
    sig: TbidsSignature,
    window: int,
) -> Optional[int]:
    for candidate in window_order(epoch, window, params.n):
        if verify(params, scheme, pk, candidate, identity, msg, sig):
            return candidate
    return None


def stack_covers(state: FsSecretKeyState, epoch: int) -> bool:
    """True if any stacked node key could still derive a key for ``epoch``."""
    return any(covers(node, epoch, state.params.epoch_bits) for node in state.labels())
