import random

import pytest

from tbids import bbg, group, hibs, timebound
from tbids.epochs import EpochConfig, binid, label, label_identity
from tbids.timebound import FLAT, FS

ID = (b"example.com",)


def dfs_leaves(node, bits):
    """Recursive reference: leaves of a complete binary tree, left to right."""
    if len(node) == bits:
        yield node
        return
    yield from dfs_leaves(node + "0", bits)
    yield from dfs_leaves(node + "1", bits)


def expected_stack(leaf):
    """Right siblings along the root-to-leaf path (outermost first), then the leaf."""
    return [leaf[:i] + "1" for i, bit in enumerate(leaf) if bit == "0"] + [leaf]


@pytest.mark.parametrize("n", [2, 4, 8, 16])
def test_dfeval_visits_leaves_in_dfs_order(n):
    rng = random.Random(n)
    params = timebound.setup(n, rng)
    _, state = timebound.fs_gen(params, rng)
    visited, heights = [], []
    while True:
        visited.append(state.labels()[-1])
        heights.append(len(state.stack))
        assert state.labels() == expected_stack(state.labels()[-1])
        if state.current_epoch == n - 1:
            break
        timebound.fs_update(state, rng)
    assert visited == list(dfs_leaves("", params.epoch_bits))
    assert max(heights) <= params.epoch_bits + 1


def test_stack_keys_are_valid_node_keys(params16, rng):
    pk, state = timebound.fs_gen(params16, rng)
    for _ in range(5):
        timebound.fs_update(state, rng)
    for node, key in state.stack:
        assert key.identity == label_identity(node)
        assert bbg.key_is_consistent(params16.pp, pk, key)


def test_dfeval_on_empty_stack(params16, rng):
    with pytest.raises(timebound.EpochsExhausted):
        timebound.dfeval(params16.pp, [], params16.epoch_bits, rng)


def test_retirement_after_last_epoch(rng):
    params = timebound.setup(4, rng)
    _, state = timebound.fs_gen(params, rng)
    for _ in range(4):
        timebound.fs_update(state, rng)
    assert state.current_epoch == 4 and state.stack == []
    with pytest.raises(timebound.EpochsExhausted):
        timebound.fs_update(state, rng)
    with pytest.raises(timebound.EpochsExhausted):
        timebound.fs_del(state, ID, rng)


@pytest.mark.parametrize("scheme", [FLAT, FS])
def test_sign_verify_round_trip(params16, rng, scheme):
    if scheme == FLAT:
        pk, master = timebound.flat_gen(params16, rng)
        key = timebound.flat_delegate(master, 9, ID, rng)
        epoch = 9
    else:
        pk, state = timebound.fs_gen(params16, rng)
        key = timebound.fs_del(state, ID, rng)
        epoch = 0
    sig = timebound.sign(key, b"transcript", rng)
    assert timebound.verify(params16, scheme, pk, epoch, ID, b"transcript", sig)
    assert not timebound.verify(params16, scheme, pk, epoch, ID, b"transcripu", sig)
    assert not timebound.verify(params16, scheme, pk, epoch, (b"example.org",), b"transcript", sig)
    other = FS if scheme == FLAT else FLAT
    assert not timebound.verify(params16, other, pk, epoch, ID, b"transcript", sig)


def test_signature_equals_plain_hibs_signature(params16):
    # the stored-key fast path must agree with signing through the generic layer
    pk, state = timebound.fs_gen(params16, random.Random(1))
    key = timebound.fs_del(state, ID, random.Random(2))
    fast = timebound.sign(key, b"m", random.Random(3))
    slow = hibs.sign(params16.pp, key.inner, b"m", random.Random(3))
    assert fast == slow


def test_flat_key_identity_is_injective():
    assert timebound.fused_identity(1, (b"ab", b"c")) != timebound.fused_identity(1, (b"a", b"bc"))
    assert timebound.fused_identity(256, (b"a",)) != timebound.fused_identity(1, (b"\x00a",))


def test_fs_delegation_only_for_current_epoch(params16, rng):
    _, state = timebound.fs_gen(params16, rng)
    timebound.fs_update(state, rng)
    with pytest.raises(timebound.NotCurrentEpoch):
        timebound.fs_del(state, ID, rng, epoch=0)
    with pytest.raises(timebound.NotCurrentEpoch):
        timebound.fs_del(state, ID, rng, epoch=2)
    assert timebound.fs_del(state, ID, rng, epoch=1).epoch == 1


def test_forward_security_exhaustive_small(rng):
    n = 8
    params = timebound.setup(n, rng)
    _, state = timebound.fs_gen(params, rng)
    for i in range(n):
        timebound.fs_update(state, rng)
        for j in range(i + 1):
            assert not timebound.stack_covers(state, j)
            target = binid(j, params.epoch_bits) + ID
            for _, key in state.stack:
                with pytest.raises(bbg.DelegationError):
                    bbg.delegate(params.pp, key, target, rng)


def test_time_binding_flat(rng):
    params = timebound.setup(4, rng)
    pk, master = timebound.flat_gen(params, rng)
    for i in range(4):
        sig = timebound.sign(timebound.flat_delegate(master, i, ID, rng), b"m", rng)
        for j in range(4):
            assert timebound.verify(params, FLAT, pk, j, ID, b"m", sig) is (i == j)


def test_windowed_verification(params16, rng):
    pk, master = timebound.flat_gen(params16, rng)
    cfg = EpochConfig(t0=1000, epoch_length=100, window=1)
    sig = timebound.sign(timebound.flat_delegate(master, 5, ID, rng), b"m", rng)
    at = lambda e: cfg.epoch_start(e) + 50  # noqa: E731
    assert timebound.verify_with_window(params16, FLAT, pk, at(5), ID, b"m", sig, cfg)
    assert timebound.verify_with_window(params16, FLAT, pk, at(4), ID, b"m", sig, cfg)
    assert timebound.verify_with_window(params16, FLAT, pk, at(6), ID, b"m", sig, cfg)
    assert not timebound.verify_with_window(params16, FLAT, pk, at(7), ID, b"m", sig, cfg)
    assert not timebound.verify_with_window(params16, FLAT, pk, at(3), ID, b"m", sig, cfg)
    assert timebound.matching_epoch(params16, FLAT, pk, 6, ID, b"m", sig, 1) == 5


def test_verify_edge_inputs(params16, rng):
    pk, master = timebound.flat_gen(params16, rng)
    sig = timebound.sign(timebound.flat_delegate(master, 0, ID, rng), b"m", rng)
    assert not timebound.verify(params16, FLAT, pk, -1, ID, b"m", sig)
    assert not timebound.verify(params16, FLAT, pk, 16, ID, b"m", sig)
    assert not timebound.verify(params16, FLAT, group.g2_identity(), 0, ID, b"m", sig)
    assert not timebound.verify(params16, FLAT, pk, 0, (b"a", b"b"), b"m", sig)
    assert not timebound.verify(params16, FLAT, pk, 0, (b"",), b"m", sig)


def test_identity_at_the_identity_pk_cannot_be_forged(params16):
    # with pk = 1 and msk = 1 anyone could sign; verification refuses that key outright
    forged = hibs.HibsSignature(group.g1_identity(), group.g2_identity())
    assert not timebound.verify(params16, FS, group.g2_identity(), 0, ID, b"m", forged)


def test_multi_level_identities(params16_l2, rng):
    ident = (b"com", b"example")
    pk, state = timebound.fs_gen(params16_l2, rng)
    sig = timebound.sign(timebound.fs_del(state, ident, rng), b"m", rng)
    assert timebound.verify(params16_l2, FS, pk, 0, ident, b"m", sig)
    with pytest.raises(ValueError):
        timebound.fs_del(state, (b"com",), rng)


def test_params_validation(rng):
    pp = bbg.setup(6, rng)
    with pytest.raises(ValueError):
        timebound.TbidsParams(12, 1, pp)
    with pytest.raises(ValueError):
        timebound.TbidsParams(16, 2, pp)
    with pytest.raises(ValueError):
        timebound.flat_delegate(timebound.flat_gen(timebound.TbidsParams(16, 1, pp), rng)[1], 16, ID, rng)


def test_hibe_views(params16):
    assert params16.hibe(FS) is params16.pp
    assert params16.hibe(FLAT).max_depth == 2
    assert label(3, params16.epoch_bits) == "0011"
    with pytest.raises(ValueError):
        timebound.hibs_identity(params16, "other", 0, ID)
