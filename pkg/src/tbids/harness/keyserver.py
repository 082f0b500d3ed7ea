"""Origin keyserver role: derives per-epoch keys ahead of time and pushes them to the edge.

Ordering per epoch ``e`` (the state's current epoch):

1. delegate the key for ``e`` and append it to the durable outbox,
2. advance the forward-secure state to ``e + 1`` and persist it,
3. push everything in the outbox, oldest first; acknowledged keys leave it.

A crash between any two steps leaves either a queued key or an advanced
state on disk, never a gap: on restart a queued-but-not-advanced epoch is
advanced without re-delegating, and the outbox is flushed again.
"""

from __future__ import annotations

import asyncio
import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Awaitable, Callable, List, Optional, Sequence, Tuple

from .. import codec, group, storage
from ..epochs import EpochConfig, epoch_from_timestamp
from ..timebound import FsSecretKeyState, fs_del, fs_update
from . import wire
from .wire import MsgType

log = logging.getLogger(__name__)

Pusher = Callable[[bytes], Awaitable[None]]

CRASH_POINTS = ("after-queue", "after-update")


class SimulatedCrash(RuntimeError):
    pass


class PushFailed(ConnectionError):
    pass


@dataclass
class StepResult:
    pushed: List[int]
    pending: List[int]
    state_epoch: int


class TcpPusher:
    def __init__(self, address: Tuple[str, int], authenticator: wire.Authenticator, timeout: float = 5.0):
        self.address = address
        self.auth = authenticator
        self.timeout = timeout

    async def __call__(self, envelope: bytes) -> None:
        reader, writer = await asyncio.wait_for(asyncio.open_connection(*self.address), self.timeout)
        try:
            await wire.write_frame(writer, MsgType.PUSH_KEY, self.auth.seal(envelope))
            kind, payload = await asyncio.wait_for(wire.read_frame(reader), self.timeout)
            if kind != MsgType.PUSH_ACK:
                raise PushFailed(f"edge answered {kind.name}: {payload[1:].decode(errors='replace')}")
            try:
                acked = self.auth.open(payload)
            except wire.AuthError as exc:
                raise PushFailed(f"unauthenticated ack: {exc}") from exc
            if acked != codec.load(envelope).epoch.to_bytes(8, "big"):
                raise PushFailed("ack names a different epoch")
        finally:
            writer.close()
            try:
                await writer.wait_closed()
            except ConnectionError:
                pass


class Keyserver:
    def __init__(
        self,
        state_path: storage.PathLike,
        identity: Sequence[bytes],
        push: Pusher,
        cfg: EpochConfig,
        clock: Callable[[], float] = time.time,
        rng: Optional[group.Rng] = None,
        outbox_path: Optional[storage.PathLike] = None,
        lookahead: int = 1,
        retries: int = 3,
        backoff: float = 0.05,
        max_backoff: float = 1.0,
    ):
        self.state_path = Path(state_path)
        self.outbox_path = Path(outbox_path) if outbox_path else Path(str(state_path) + ".outbox")
        self.identity = tuple(identity)
        self.push = push
        self.cfg = cfg
        self.clock = clock
        self.rng = rng or group.system_rng()
        self.lookahead = lookahead
        self.retries = retries
        self.backoff = backoff
        self.max_backoff = max_backoff
        self.crash_at: Optional[str] = None

        self.state: FsSecretKeyState = codec.load(self.state_path.read_bytes(), codec.Kind.FS_STATE)
        self.last_queued, self.pending = self._load_outbox()

    # -- persistence -------------------------------------------------------------

    def _load_outbox(self) -> Tuple[int, List[bytes]]:
        if not self.outbox_path.exists():
            return self.state.current_epoch - 1, []
        doc = json.loads(self.outbox_path.read_text())
        return int(doc["last_queued"]), [bytes.fromhex(h) for h in doc["pending"]]

    def _save_outbox(self) -> None:
        doc = {"last_queued": self.last_queued, "pending": [p.hex() for p in self.pending]}
        storage.atomic_write(self.outbox_path, json.dumps(doc).encode())

    def _save_state(self) -> None:
        storage.atomic_write(self.state_path, codec.dump(self.state))

    def _maybe_crash(self, point: str) -> None:
        if self.crash_at == point:
            self.crash_at = None
            raise SimulatedCrash(point)

    # -- work --------------------------------------------------------------------

    def _advance(self) -> bool:
        if self.state.current_epoch >= self.state.params.n:
            return False
        fs_update(self.state, self.rng)
        self._save_state()
        return True

    def derive_due(self) -> None:
        """Queue keys up to ``now + lookahead``, advancing the state behind each one."""
        params = self.state.params
        # recovery: key queued, state not yet advanced
        if self.last_queued >= self.state.current_epoch:
            self._advance()
        target = min(epoch_from_timestamp(self.clock(), self.cfg) + self.lookahead, params.n - 1)
        while self.last_queued < self.state.current_epoch <= target:
            epoch = self.state.current_epoch
            key = fs_del(self.state, self.identity, self.rng, epoch=epoch)
            self.pending.append(codec.encode(key))
            self.last_queued = epoch
            self._save_outbox()
            self._maybe_crash("after-queue")
            if not self._advance():
                break
            self._maybe_crash("after-update")

    async def _push_with_retry(self, envelope: bytes) -> bool:
        delay = self.backoff
        for attempt in range(1, self.retries + 1):
            try:
                await self.push(envelope)
                return True
            except (OSError, asyncio.TimeoutError, asyncio.IncompleteReadError, wire.WireError) as exc:
                log.warning("push attempt %d/%d failed: %s", attempt, self.retries, exc)
                if attempt < self.retries:
                    await asyncio.sleep(delay)
                    delay = min(delay * 2, self.max_backoff)
        return False

    async def flush(self) -> List[int]:
        pushed = []
        while self.pending:
            envelope = self.pending[0]
            if not await self._push_with_retry(envelope):
                break
            self.pending.pop(0)
            self._save_outbox()
            pushed.append(codec.decode(envelope).epoch)
        return pushed

    def pending_epochs(self) -> List[int]:
        return [codec.decode(p).epoch for p in self.pending]

    async def step(self) -> StepResult:
        with storage.locked(self.state_path):
            self.derive_due()
            pushed = await self.flush()
        return StepResult(pushed, self.pending_epochs(), self.state.current_epoch)

    async def run_forever(self) -> None:
        while True:
            result = await self.step()
            log.info("pushed %s, pending %s, state at epoch %d", result.pushed, result.pending, result.state_epoch)
            now = self.clock()
            e = epoch_from_timestamp(now, self.cfg)
            wait = self.cfg.epoch_start(e + 1) - now + 1
            if result.pending:
                wait = min(wait, 5.0)
            await asyncio.sleep(max(wait, 0.1))


async def keyserver_run(
    state_path: storage.PathLike,
    edge_address: Tuple[str, int],
    cfg: EpochConfig,
    identity: Sequence[bytes],
    authenticator: wire.Authenticator,
    once: bool = False,
) -> Optional[StepResult]:
    server = Keyserver(state_path, identity, TcpPusher(edge_address, authenticator), cfg)
    if once:
        return await server.step()
    await server.run_forever()
    return None
