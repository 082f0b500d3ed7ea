"""Edge (CDN) role: stores pushed epoch keys and signs handshake transcripts."""

from __future__ import annotations

import asyncio
import logging
import secrets
import time
from typing import Callable, Dict, List, Optional, Tuple

from .. import codec, group
from ..epochs import EpochConfig, epoch_from_timestamp
from ..timebound import DelegatedEpochKey, sign
from . import wire
from .wire import MsgType, Reject, RejectReason

log = logging.getLogger(__name__)

KeyIndex = Dict[Tuple[int, Tuple[bytes, ...]], DelegatedEpochKey]


class Edge:
    """Holds delegated keys only; never master or state material.

    ``mode="stale"`` makes the edge misbehave by signing with the newest
    key it still has even when that key's epoch is over (keys are then
    never evicted). It exists so clients can be tested against replay.
    """

    def __init__(
        self,
        pk_bytes: bytes,
        authenticator: wire.Authenticator,
        cfg: EpochConfig,
        clock: Callable[[], float] = time.time,
        mode: str = "honest",
        rng: Optional[group.Rng] = None,
    ):
        self.pk_ref = wire.pk_reference(pk_bytes)
        self.auth = authenticator
        self.cfg = cfg
        self.clock = clock
        self.mode = mode
        self.rng = rng or group.system_rng()
        self._keys: KeyIndex = {}
        self.received: List[MsgType] = []
        self.received_kinds: List[codec.Kind] = []
        self._server: Optional[asyncio.base_events.Server] = None

    # -- key store ---------------------------------------------------------------

    def current_epoch(self) -> int:
        return epoch_from_timestamp(self.clock(), self.cfg)

    def install(self, key: DelegatedEpochKey) -> None:
        keys = dict(self._keys)
        keys[(key.epoch, key.identity)] = key
        if self.mode == "honest":
            now = self.current_epoch()
            keys = {k: v for k, v in keys.items() if k[0] >= now}
        self._keys = keys  # single reference swap; readers see old or new snapshot

    def held_epochs(self) -> List[int]:
        return sorted({epoch for epoch, _ in self._keys})

    def select_key(self, identity: Tuple[bytes, ...]) -> Tuple[Optional[DelegatedEpochKey], RejectReason]:
        snapshot = self._keys
        mine = {e: k for (e, ident), k in snapshot.items() if ident == identity}
        if not mine:
            return None, RejectReason.UNKNOWN_IDENTITY
        now = self.current_epoch()
        if now in mine:
            return mine[now], RejectReason.NO_VALID_KEY
        if self.mode == "stale":
            older = [e for e in mine if e < now]
            if older:
                return mine[max(older)], RejectReason.NO_VALID_KEY
        return None, RejectReason.NO_VALID_KEY

    # -- protocol ----------------------------------------------------------------

    def handle_push(self, payload: bytes) -> bytes:
        data = self.auth.open(payload)
        kind = codec.peek_kind(data)
        self.received_kinds.append(kind)
        key = codec.decode(data, expect=codec.Kind.DELEGATED_EPOCH_KEY)
        self.install(key)
        log.info("edge installed key for epoch %d", key.epoch)
        return self.auth.seal(key.epoch.to_bytes(8, "big"))

    def handle_hello(self, payload: bytes) -> Tuple[MsgType, bytes]:
        try:
            hello = wire.Hello.unpack(payload)
        except wire.WireError as exc:
            return MsgType.REJECT, Reject(RejectReason.BAD_REQUEST, str(exc)).pack()
        key, reason = self.select_key(hello.identity)
        if key is None:
            return MsgType.REJECT, Reject(reason, f"no usable key at epoch {self.current_epoch()}").pack()
        server_nonce = secrets.token_bytes(wire.NONCE_LEN)
        ts = int(self.clock())
        transcript = wire.HandshakeTranscript(hello.client_nonce, server_nonce, hello.identity, ts)
        sig = sign(key, transcript.digest(), self.rng)
        response = wire.SignedResponse(server_nonce, ts, self.pk_ref, hello.identity, codec.encode(sig))
        return MsgType.SIGNED_RESPONSE, response.pack()

    async def _serve_connection(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        try:
            while True:
                try:
                    kind, payload = await wire.read_frame(reader)
                except asyncio.IncompleteReadError:
                    break
                self.received.append(kind)
                if kind == MsgType.PUSH_KEY:
                    try:
                        ack = self.handle_push(payload)
                    except (wire.AuthError, codec.CodecError) as exc:
                        log.warning("rejected push: %s", exc)
                        await wire.write_frame(writer, MsgType.REJECT, Reject(RejectReason.BAD_REQUEST, str(exc)).pack())
                        continue
                    await wire.write_frame(writer, MsgType.PUSH_ACK, ack)
                elif kind == MsgType.HELLO:
                    await wire.write_frame(writer, *self.handle_hello(payload))
                else:
                    await wire.write_frame(
                        writer, MsgType.REJECT, Reject(RejectReason.BAD_REQUEST, f"unexpected {kind.name}").pack()
                    )
        except (wire.WireError, ConnectionError) as exc:
            log.debug("connection dropped: %s", exc)
        finally:
            writer.close()
            try:
                await writer.wait_closed()
            except ConnectionError:
                pass

    async def start(self, host: str = "127.0.0.1", port: int = 0) -> Tuple[str, int]:
        self._server = await asyncio.start_server(self._serve_connection, host, port)
        sock = self._server.sockets[0].getsockname()
        return sock[0], sock[1]

    async def stop(self) -> None:
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
            self._server = None

    async def serve_forever(self) -> None:
        if self._server is None:
            raise RuntimeError("edge not started")
        await self._server.serve_forever()

    @property
    def running(self) -> bool:
        return self._server is not None


async def edge_run(listen: Tuple[str, int], pk_bytes: bytes, authenticator: wire.Authenticator, cfg: EpochConfig) -> None:
    edge = Edge(pk_bytes, authenticator, cfg)
    host, port = await edge.start(*listen)
    log.info("edge listening on %s:%d", host, port)
    await edge.serve_forever()
