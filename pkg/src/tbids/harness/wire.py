"""Length-prefixed frames and payload layouts for the delegation harness.

Frame: ``length(4, big-endian) | type(1) | payload`` where ``length``
counts the type byte plus the payload.
"""

from __future__ import annotations

import asyncio
import enum
import hashlib
import hmac
import struct
from dataclasses import dataclass
from typing import Protocol, Tuple

MAX_FRAME = 1 << 20
NONCE_LEN = 32
REF_LEN = 32
MAC_LEN = 32


class WireError(ValueError):
    pass


class AuthError(WireError):
    pass


class MsgType(enum.IntEnum):
    PUSH_KEY = 1
    HELLO = 2
    SIGNED_RESPONSE = 3
    REJECT = 4
    PUSH_ACK = 5


class RejectReason(enum.IntEnum):
    NO_VALID_KEY = 1
    UNKNOWN_IDENTITY = 2
    BAD_REQUEST = 3


def encode_frame(kind: MsgType, payload: bytes) -> bytes:
    if len(payload) + 1 > MAX_FRAME:
        raise WireError("frame too large")
    return struct.pack(">IB", len(payload) + 1, kind) + payload


def decode_frame(data: bytes) -> Tuple[MsgType, bytes]:
    """Parse exactly one complete frame."""
    if len(data) < 5:
        raise WireError("short frame")
    (length,) = struct.unpack(">I", data[:4])
    if length != len(data) - 4:
        raise WireError(f"length prefix {length} does not match {len(data) - 4} bytes")
    return _frame_type(data[4]), bytes(data[5:])


def _frame_type(value: int) -> MsgType:
    try:
        return MsgType(value)
    except ValueError:
        raise WireError(f"unknown message type {value}") from None


async def read_frame(reader: asyncio.StreamReader) -> Tuple[MsgType, bytes]:
    header = await reader.readexactly(4)
    (length,) = struct.unpack(">I", header)
    if length < 1 or length > MAX_FRAME:
        raise WireError(f"bad frame length {length}")
    body = await reader.readexactly(length)
    return _frame_type(body[0]), body[1:]


async def write_frame(writer: asyncio.StreamWriter, kind: MsgType, payload: bytes) -> None:
    writer.write(encode_frame(kind, payload))
    await writer.drain()


# -- payloads --------------------------------------------------------------------


def _pack_identity(identity) -> bytes:
    out = bytearray([len(identity)])
    for level in identity:
        out += struct.pack(">H", len(level)) + level
    return bytes(out)


def _unpack_identity(data: bytes, pos: int) -> Tuple[Tuple[bytes, ...], int]:
    try:
        count = data[pos]
        pos += 1
        levels = []
        for _ in range(count):
            (n,) = struct.unpack_from(">H", data, pos)
            pos += 2
            if pos + n > len(data):
                raise WireError("identity level overruns payload")
            levels.append(bytes(data[pos : pos + n]))
            pos += n
    except (IndexError, struct.error):
        raise WireError("truncated identity") from None
    return tuple(levels), pos


@dataclass(frozen=True)
class Hello:
    client_nonce: bytes
    identity: Tuple[bytes, ...]

    def pack(self) -> bytes:
        return self.client_nonce + _pack_identity(self.identity)

    @classmethod
    def unpack(cls, data: bytes) -> "Hello":
        if len(data) < NONCE_LEN:
            raise WireError("short HELLO")
        identity, pos = _unpack_identity(data, NONCE_LEN)
        if pos != len(data):
            raise WireError("trailing bytes in HELLO")
        return cls(bytes(data[:NONCE_LEN]), identity)


@dataclass(frozen=True)
class SignedResponse:
    server_nonce: bytes
    timestamp: int  # server's clock; part of the transcript, never used to pick an epoch
    pk_ref: bytes
    identity: Tuple[bytes, ...]
    signature: bytes  # codec envelope; carries no epoch

    def pack(self) -> bytes:
        head = self.server_nonce + struct.pack(">Q", self.timestamp) + self.pk_ref
        return head + _pack_identity(self.identity) + self.signature

    @classmethod
    def unpack(cls, data: bytes) -> "SignedResponse":
        head = NONCE_LEN + 8 + REF_LEN
        if len(data) < head:
            raise WireError("short SIGNED_RESPONSE")
        (ts,) = struct.unpack_from(">Q", data, NONCE_LEN)
        identity, pos = _unpack_identity(data, head)
        return cls(bytes(data[:NONCE_LEN]), ts, bytes(data[NONCE_LEN + 8 : head]), identity, bytes(data[pos:]))


@dataclass(frozen=True)
class Reject:
    reason: RejectReason
    message: str = ""

    def pack(self) -> bytes:
        return bytes([self.reason]) + self.message.encode()

    @classmethod
    def unpack(cls, data: bytes) -> "Reject":
        if not data:
            raise WireError("empty REJECT")
        try:
            reason = RejectReason(data[0])
        except ValueError:
            raise WireError(f"unknown reject reason {data[0]}") from None
        return cls(reason, data[1:].decode(errors="replace"))


def pk_reference(pk_bytes: bytes) -> bytes:
    return hashlib.sha256(b"tbids-pk-ref" + pk_bytes).digest()


@dataclass(frozen=True)
class HandshakeTranscript:
    client_nonce: bytes
    server_nonce: bytes
    identity: Tuple[bytes, ...]
    timestamp: int

    def digest(self) -> bytes:
        h = hashlib.sha256(b"tbids-handshake-v1")
        h.update(self.client_nonce)
        h.update(self.server_nonce)
        h.update(_pack_identity(self.identity))
        h.update(struct.pack(">Q", self.timestamp))
        return h.digest()


# -- push channel authentication -------------------------------------------------


class Authenticator(Protocol):
    """Seam for the keyserver-to-edge channel; swap in mutual TLS here."""

    def seal(self, data: bytes) -> bytes: ...

    def open(self, payload: bytes) -> bytes: ...


class PskAuthenticator:
    """HMAC-SHA256 under a pre-shared key, prepended to the payload."""

    def __init__(self, psk: bytes):
        if len(psk) < 16:
            raise ValueError("pre-shared key must be at least 16 bytes")
        self._psk = psk

    def seal(self, data: bytes) -> bytes:
        return hmac.new(self._psk, data, hashlib.sha256).digest() + data

    def open(self, payload: bytes) -> bytes:
        mac, data = payload[:MAC_LEN], payload[MAC_LEN:]
        if len(mac) != MAC_LEN or not hmac.compare_digest(mac, hmac.new(self._psk, data, hashlib.sha256).digest()):
            raise AuthError("push authentication failed")
        return data
