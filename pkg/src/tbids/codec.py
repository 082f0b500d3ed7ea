"""Binary envelopes for parameters, keys, key states, signatures and epoch configs.

Layout: ``magic(4) | version(1) | kind(1) | curve(1) | body``. Integers are
big-endian, points are compressed (48 bytes in G1, 96 in G2) and every
point is checked for canonical encoding, curve membership and subgroup
membership on decode. Decoding consumes the whole input; leftovers are an
error.
"""

from __future__ import annotations

import base64
import binascii
import enum
import struct
from typing import List, Tuple, Type, Union

from . import group
from .bbg import DelegatedKey, MasterKeyPair, PublicParams
from .epochs import EpochConfig, binid, label_identity
from .group import FIELD_MODULUS, G1Point, G2Point
from .hibs import HibsSignature, SignerPrecomputation
from .timebound import (
    FLAT,
    FS,
    DelegatedEpochKey,
    FlatMasterKey,
    FsSecretKeyState,
    TbidsParams,
    fused_identity,
)

MAGIC = b"TBID"
VERSION = 1
HEADER_LEN = 7
G1_LEN = 48
G2_LEN = 96

MAX_EPOCH_BITS = 32


class Kind(enum.IntEnum):
    PARAMS = 1
    MASTER_PK = 2
    MASTER_SK = 3
    DELEGATED_EPOCH_KEY = 4
    FS_STATE = 5
    SIGNATURE = 6
    EPOCH_CONFIG = 7


_ARMOR_NAMES = {
    Kind.PARAMS: "PARAMS",
    Kind.MASTER_PK: "PUBLIC KEY",
    Kind.MASTER_SK: "MASTER SECRET KEY",
    Kind.DELEGATED_EPOCH_KEY: "DELEGATED KEY",
    Kind.FS_STATE: "KEY STATE",
    Kind.SIGNATURE: "SIGNATURE",
    Kind.EPOCH_CONFIG: "EPOCH CONFIG",
}

_SCHEME_CODES = {FLAT: 1, FS: 2}
_SCHEME_NAMES = {v: k for k, v in _SCHEME_CODES.items()}


class CodecError(ValueError):
    pass


class BadMagic(CodecError):
    pass


class UnsupportedVersion(CodecError):
    pass


class UnknownKind(CodecError):
    pass


class UnexpectedKind(CodecError):
    pass


class UnknownCurve(CodecError):
    pass


class Truncated(CodecError):
    pass


class TrailingData(CodecError):
    pass


class MalformedPoint(CodecError):
    """Bad flag bits, unreduced coordinate or non-canonical encoding."""


class OffCurve(CodecError):
    pass


class NotInSubgroup(CodecError):
    pass


class DepthMismatch(CodecError):
    pass


class InvalidField(CodecError):
    """A scalar field of the body is out of range or inconsistent."""


class ArmorError(CodecError):
    pass


# -- primitive readers/writers -------------------------------------------------


class _Reader:
    def __init__(self, data: bytes):
        self.data = memoryview(data)
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise Truncated(f"need {n} bytes at offset {self.pos}, have {len(self.data) - self.pos}")
        out = bytes(self.data[self.pos : self.pos + n])
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack(">H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack(">Q", self.take(8))[0]

    def i64(self) -> int:
        return struct.unpack(">q", self.take(8))[0]

    def g1(self) -> G1Point:
        return decode_point(G1Point, self.take(G1_LEN))

    def g2(self) -> G2Point:
        return decode_point(G2Point, self.take(G2_LEN))

    def finish(self) -> None:
        if self.pos != len(self.data):
            raise TrailingData(f"{len(self.data) - self.pos} unexpected trailing bytes")


def point_bytes(p: Union[G1Point, G2Point]) -> bytes:
    return bytes(p.to_compressed_bytes())


def decode_point(cls: Type, data: bytes):
    """Strict decode of a compressed point (ZCash flag convention)."""
    size = G1_LEN if cls is G1Point else G2_LEN
    if len(data) != size:
        raise Truncated(f"point needs {size} bytes, got {len(data)}")
    flags = data[0] & 0xE0
    if not flags & 0x80:
        raise MalformedPoint("compression flag not set")
    if flags & 0x40:
        if flags & 0x20 or data[0] & 0x1F or any(data[1:]):
            raise MalformedPoint("non-canonical encoding of the point at infinity")
        return cls.identity()
    # each 48-byte coordinate limb must be a reduced field element
    first = int.from_bytes(bytes([data[0] & 0x1F]) + data[1:48], "big")
    if first >= FIELD_MODULUS or (size == G2_LEN and int.from_bytes(data[48:], "big") >= FIELD_MODULUS):
        raise MalformedPoint("coordinate not reduced modulo the field prime")
    try:
        point = cls.from_compressed_bytes_unchecked(list(data))
    except ValueError as exc:
        raise OffCurve(f"no curve point with this x-coordinate: {exc}") from None
    try:
        cls.from_compressed_bytes(list(data))
    except ValueError:
        raise NotInSubgroup("point is not in the prime-order subgroup") from None
    if point_bytes(point) != bytes(data):
        raise MalformedPoint("non-canonical point encoding")
    return point


# -- bodies ----------------------------------------------------------------------


def _params_body(params: TbidsParams) -> bytes:
    pp = params.pp
    out = bytearray()
    out += bytes([params.epoch_bits, params.identity_levels, pp.max_depth, len(pp.tag)])
    out += pp.tag
    out += point_bytes(pp.g2) + point_bytes(pp.g3)
    for h in pp.h:
        out += point_bytes(h)
    return bytes(out)


def _read_params(r: _Reader) -> TbidsParams:
    epoch_bits, identity_levels, depth, tag_len = r.u8(), r.u8(), r.u8(), r.u8()
    if not 1 <= epoch_bits <= MAX_EPOCH_BITS:
        raise InvalidField(f"epoch_bits {epoch_bits} out of range")
    if identity_levels < 1:
        raise InvalidField("identity_levels must be at least 1")
    if depth != epoch_bits + identity_levels + 1:
        raise DepthMismatch(f"depth {depth} != epoch_bits + identity_levels + 1")
    tag = r.take(tag_len)
    g2, g3 = r.g1(), r.g1()
    h = tuple(r.g1() for _ in range(depth))
    return TbidsParams(1 << epoch_bits, identity_levels, PublicParams(depth, g2, g3, h, tag))


def _key_body(key: DelegatedKey) -> bytes:
    out = bytearray(point_bytes(key.a0) + point_bytes(key.a1))
    out.append(len(key.b))
    for b in key.b:
        out += point_bytes(b)
    return bytes(out)


def _read_key_points(r: _Reader) -> Tuple[G1Point, G2Point, Tuple[G1Point, ...]]:
    a0, a1 = r.g1(), r.g2()
    count = r.u8()
    return a0, a1, tuple(r.g1() for _ in range(count))


def _identity_body(identity) -> bytes:
    out = bytearray([len(identity)])
    for level in identity:
        out += struct.pack(">H", len(level)) + level
    return bytes(out)


def _read_identity(r: _Reader) -> Tuple[bytes, ...]:
    count = r.u8()
    levels = tuple(r.take(r.u16()) for _ in range(count))
    if not levels or any(not level for level in levels):
        raise InvalidField("identity must have non-empty levels")
    return levels


def _encode_body(obj) -> Tuple[Kind, bytes]:
    if isinstance(obj, TbidsParams):
        return Kind.PARAMS, _params_body(obj)
    if isinstance(obj, G2Point):
        return Kind.MASTER_PK, point_bytes(obj)
    if isinstance(obj, FlatMasterKey):
        return Kind.MASTER_SK, _params_body(obj.params) + point_bytes(obj.keys.pk) + point_bytes(obj.keys.msk)
    if isinstance(obj, FsSecretKeyState):
        out = bytearray(_params_body(obj.params))
        out += struct.pack(">QB", obj.current_epoch, len(obj.stack))
        for node, key in obj.stack:
            if not isinstance(key, DelegatedKey):
                raise CodecError("refusing to serialize a root key inside a key state")
            out += struct.pack(">BI", len(node), int(node, 2) if node else 0)
            out += _key_body(key)
        return Kind.FS_STATE, bytes(out)
    if isinstance(obj, DelegatedEpochKey):
        out = bytearray(struct.pack(">BQB", _SCHEME_CODES[obj.scheme], obj.epoch, obj.epoch_bits))
        out += _identity_body(obj.identity)
        out += bytes([len(obj.tag)]) + obj.tag
        out += point_bytes(obj.inner.a0) + point_bytes(obj.inner.a1) + point_bytes(obj.inner.b[0])
        out += point_bytes(obj.precomp.t) + point_bytes(obj.h_msg)
        return Kind.DELEGATED_EPOCH_KEY, bytes(out)
    if isinstance(obj, HibsSignature):
        return Kind.SIGNATURE, point_bytes(obj.a0) + point_bytes(obj.a1)
    if isinstance(obj, EpochConfig):
        return Kind.EPOCH_CONFIG, struct.pack(">qIH", obj.t0, obj.epoch_length, obj.window)
    raise TypeError(f"cannot encode {type(obj).__name__}")


def _decode_body(kind: Kind, r: _Reader):
    if kind == Kind.PARAMS:
        return _read_params(r)
    if kind == Kind.MASTER_PK:
        return r.g2()
    if kind == Kind.MASTER_SK:
        params = _read_params(r)
        pk, msk = r.g2(), r.g1()
        return FlatMasterKey(params, MasterKeyPair(pk, msk))
    if kind == Kind.FS_STATE:
        return _read_fs_state(r)
    if kind == Kind.DELEGATED_EPOCH_KEY:
        return _read_epoch_key(r)
    if kind == Kind.SIGNATURE:
        return HibsSignature(r.g1(), r.g2())
    if kind == Kind.EPOCH_CONFIG:
        t0, length, window = r.i64(), r.u32(), r.u16()
        if length == 0:
            raise InvalidField("epoch_length must be positive")
        return EpochConfig(t0, length, window)
    raise UnknownKind(kind)


def _read_fs_state(r: _Reader) -> FsSecretKeyState:
    params = _read_params(r)
    bits = params.epoch_bits
    current, height = r.u64(), r.u8()
    if current > params.n:
        raise InvalidField(f"current epoch {current} outside [0, {params.n}]")
    if current == params.n:
        if height:
            raise InvalidField("a retired state must hold no keys")
        return FsSecretKeyState(params, current, [])
    if not 1 <= height <= bits + 1:
        raise InvalidField(f"stack height {height} outside [1, {bits + 1}]")
    stack = []
    for _ in range(height):
        length, value = r.u8(), r.u32()
        if length > bits or value >= (1 << length) or (length == 0 and value):
            raise InvalidField(f"bad node label ({length}, {value})")
        node = format(value, f"0{length}b") if length else ""
        a0, a1, b = _read_key_points(r)
        if len(b) != params.pp.max_depth - length:
            raise DepthMismatch(f"node {node!r} carries {len(b)} open levels")
        stack.append((node, DelegatedKey(label_identity(node), a0, a1, b)))
    if stack[-1][0] != format(current, f"0{bits}b"):
        raise InvalidField("top of stack is not the current epoch's leaf")
    return FsSecretKeyState(params, current, stack)


def _read_epoch_key(r: _Reader) -> DelegatedEpochKey:
    scheme_code, epoch, epoch_bits = r.u8(), r.u64(), r.u8()
    if scheme_code not in _SCHEME_NAMES:
        raise InvalidField(f"unknown scheme code {scheme_code}")
    scheme = _SCHEME_NAMES[scheme_code]
    if not 1 <= epoch_bits <= MAX_EPOCH_BITS or epoch >= (1 << epoch_bits):
        raise InvalidField(f"epoch {epoch} does not fit {epoch_bits} bits")
    identity = _read_identity(r)
    tag = r.take(r.u8())
    a0, a1, b_last = r.g1(), r.g2(), r.g1()
    t, h_msg = r.g1(), r.g1()
    if scheme == FLAT:
        inner_id = (fused_identity(epoch, identity),)
    else:
        inner_id = binid(epoch, epoch_bits) + identity
    return DelegatedEpochKey(
        scheme=scheme,
        epoch=epoch,
        identity=identity,
        epoch_bits=epoch_bits,
        inner=DelegatedKey(inner_id, a0, a1, (b_last,)),
        precomp=SignerPrecomputation(t),
        h_msg=h_msg,
        tag=tag,
    )


# -- envelope --------------------------------------------------------------------


def encode(obj) -> bytes:
    kind, body = _encode_body(obj)
    return MAGIC + bytes([VERSION, kind, group.CURVE_ID]) + body


def peek_kind(data: bytes) -> Kind:
    if len(data) < HEADER_LEN:
        raise Truncated("shorter than the envelope header")
    if data[:4] != MAGIC:
        raise BadMagic(f"bad magic {bytes(data[:4])!r}")
    if data[4] != VERSION:
        raise UnsupportedVersion(f"unsupported version {data[4]}")
    try:
        kind = Kind(data[5])
    except ValueError:
        raise UnknownKind(f"unknown object kind {data[5]}") from None
    if data[6] != group.CURVE_ID:
        raise UnknownCurve(f"unknown curve id {data[6]}")
    return kind


def decode(data: bytes, expect: Union[Kind, None] = None):
    """Decode one envelope; ``expect`` pins the object kind."""
    kind = peek_kind(data)
    if expect is not None and kind != expect:
        raise UnexpectedKind(f"expected {expect.name}, found {kind.name}")
    r = _Reader(data[HEADER_LEN:])
    obj = _decode_body(kind, r)
    r.finish()
    return obj


# -- text armor ------------------------------------------------------------------


def armor(data: bytes) -> str:
    name = _ARMOR_NAMES[peek_kind(data)]
    b64 = base64.b64encode(data).decode()
    lines = [b64[i : i + 64] for i in range(0, len(b64), 64)]
    return "\n".join([f"-----BEGIN TBIDS {name}-----", *lines, f"-----END TBIDS {name}-----"]) + "\n"


def dearmor(text: Union[str, bytes]) -> bytes:
    if isinstance(text, bytes):
        text = text.decode("ascii", errors="replace")
    lines = [line.strip() for line in text.strip().splitlines() if line.strip()]
    if len(lines) < 2 or not lines[0].startswith("-----BEGIN TBIDS ") or not lines[-1].startswith("-----END TBIDS "):
        raise ArmorError("missing BEGIN/END banner")
    name = lines[0][len("-----BEGIN TBIDS ") : -5]
    if lines[-1] != f"-----END TBIDS {name}-----" or not lines[0].endswith("-----"):
        raise ArmorError("mismatched armor banners")
    try:
        data = base64.b64decode("".join(lines[1:-1]), validate=True)
    except binascii.Error as exc:
        raise ArmorError(f"invalid base64: {exc}") from None
    if _ARMOR_NAMES[peek_kind(data)] != name:
        raise ArmorError(f"banner says {name} but envelope holds {peek_kind(data).name}")
    return data


def load(data: bytes, expect: Union[Kind, None] = None):
    """Decode binary or armored input."""
    if data.lstrip().startswith(b"-----BEGIN"):
        data = dearmor(data)
    return decode(data, expect)


def dump(obj, text: bool = True) -> bytes:
    data = encode(obj)
    return armor(data).encode() if text else data


def encoded_size(kind: Kind, epoch_bits: int = 0, identity_levels: int = 1, tag_len: int = 8, stack: List[int] = ()) -> int:
    """Envelope size for fixed-shape kinds; ``stack`` lists node label lengths for FS_STATE."""
    depth = epoch_bits + identity_levels + 1
    params = 4 + tag_len + (2 + depth) * G1_LEN
    body = {
        Kind.PARAMS: params,
        Kind.MASTER_PK: G2_LEN,
        Kind.MASTER_SK: params + G2_LEN + G1_LEN,
        Kind.SIGNATURE: G1_LEN + G2_LEN,
        Kind.EPOCH_CONFIG: 14,
    }.get(kind)
    if kind == Kind.FS_STATE:
        body = params + 9 + sum(5 + G1_LEN + G2_LEN + 1 + (depth - length) * G1_LEN for length in stack)
    if body is None:
        raise ValueError(f"size of {kind.name} depends on its identity; encode it instead")
    return HEADER_LEN + body
