"""Client role: one handshake against an edge, verified against the client's own clock."""

from __future__ import annotations

import asyncio
import secrets
import time
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

from py_arkworks_bls12381 import G2Point

from .. import codec
from ..epochs import EpochConfig, epoch_from_timestamp
from ..timebound import TbidsParams, matching_epoch
from . import wire
from .wire import MsgType


@dataclass(frozen=True)
class ConnectReport:
    accepted: bool
    reason: str  # "ok" or a short machine-readable cause
    epoch: Optional[int] = None  # epoch the signature matched, if any
    network_error: bool = False

    def line(self) -> str:
        if self.accepted:
            return f"result=accept epoch={self.epoch}"
        kind = "error" if self.network_error else "reject"
        return f"result={kind} reason={self.reason}"


def _reject(reason: str) -> ConnectReport:
    return ConnectReport(False, reason)


def check_response(
    response: wire.SignedResponse,
    client_nonce: bytes,
    expected_identity: Tuple[bytes, ...],
    params: TbidsParams,
    scheme: str,
    pk: G2Point,
    pk_ref: bytes,
    cfg: EpochConfig,
    now: float,
    window: int,
) -> ConnectReport:
    """Pure acceptance decision; the epoch comes from ``now`` alone."""
    if response.pk_ref != pk_ref:
        return _reject("pk-mismatch")
    if response.identity != expected_identity:
        return _reject("identity-mismatch")
    try:
        sig = codec.decode(response.signature, expect=codec.Kind.SIGNATURE)
    except codec.CodecError as exc:
        return _reject(f"bad-signature-encoding:{type(exc).__name__}")
    transcript = wire.HandshakeTranscript(client_nonce, response.server_nonce, response.identity, response.timestamp)
    epoch = epoch_from_timestamp(now, cfg)
    hit = matching_epoch(params, scheme, pk, epoch, expected_identity, transcript.digest(), sig, window)
    if hit is None:
        return _reject("invalid-signature")
    return ConnectReport(True, "ok", hit)


async def client_connect(
    address: Tuple[str, int],
    expected_identity: Sequence[bytes],
    params: TbidsParams,
    pk: G2Point,
    cfg: EpochConfig,
    now: Optional[float] = None,
    scheme: str = "fs",
    window: Optional[int] = None,
    timeout: float = 5.0,
) -> ConnectReport:
    expected_identity = tuple(expected_identity)
    now = time.time() if now is None else now
    window = cfg.window if window is None else window
    client_nonce = secrets.token_bytes(wire.NONCE_LEN)
    try:
        reader, writer = await asyncio.wait_for(asyncio.open_connection(*address), timeout)
    except (OSError, asyncio.TimeoutError) as exc:
        return ConnectReport(False, f"connect-failed:{type(exc).__name__}", network_error=True)
    try:
        await wire.write_frame(writer, MsgType.HELLO, wire.Hello(client_nonce, expected_identity).pack())
        kind, payload = await asyncio.wait_for(wire.read_frame(reader), timeout)
    except (OSError, asyncio.TimeoutError, asyncio.IncompleteReadError, wire.WireError) as exc:
        return ConnectReport(False, f"io:{type(exc).__name__}", network_error=True)
    finally:
        writer.close()
        try:
            await writer.wait_closed()
        except (ConnectionError, OSError):
            pass

    if kind == MsgType.REJECT:
        try:
            rej = wire.Reject.unpack(payload)
        except wire.WireError:
            return _reject("malformed-reject")
        return _reject(rej.reason.name.lower().replace("_", "-"))
    if kind != MsgType.SIGNED_RESPONSE:
        return _reject(f"unexpected-{kind.name.lower()}")
    try:
        response = wire.SignedResponse.unpack(payload)
    except wire.WireError:
        return _reject("malformed-response")
    return check_response(
        response, client_nonce, expected_identity, params, scheme, pk,
        wire.pk_reference(codec.point_bytes(pk)), cfg, now, window,
    )
