"""Binary wire protocol: message schema, tensor encoding, stream framing.

Frame format:
    ┌──────────────┬─────────┬──────────────┬─────────────────────┐
    │ length (4B)  │ tag(1B) │ sequence(8B) │   body fields ...   │
    │ u32 LE       │ u8      │ u64 LE       │                     │
    └──────────────┴─────────┴──────────────┴─────────────────────┘

The length prefix counts everything after itself (tag + sequence + body).
All multi-byte integers and floats are little-endian. Strings are a u32
byte length followed by UTF-8 data. Maps are a u32 entry count followed
by key/value pairs sorted strictly ascending by key, which makes the
encoding canonical: structurally equal messages always produce identical
bytes. Lists are a u32 count followed by elements in caller order.

Tensors are encoded as dtype (u8), rank (u8), rank u32 extents, then the
raw element data: row-major, little-endian, with no length prefix of its
own (the byte count is implied by dtype and shape). STRING tensors are
the exception: each element is an independently length-prefixed string.

The full normative description, including message tags and the legal
message flow, lives in protocol.md at the repository root. Encoders and
decoders here are pure functions and safe to call from any thread.
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass, field
from typing import Callable, Iterable, Union

import numpy as np

# A frame's payload (everything after the length prefix) may not exceed this.
MAX_PAYLOAD = 2**31 - 1

# Error codes carried by ErrorResponse.
INVALID_ARGUMENT = 3
NOT_FOUND = 5
FAILED_PRECONDITION = 9
INTERNAL = 13

ERROR_CODE_NAMES = {
    INVALID_ARGUMENT: "INVALID_ARGUMENT",
    NOT_FOUND: "NOT_FOUND",
    FAILED_PRECONDITION: "FAILED_PRECONDITION",
    INTERNAL: "INTERNAL",
}


class EncodeError(ValueError):
    """Raised when a message cannot be encoded (malformed or oversize)."""


class DecodeError(ValueError):
    """Raised when bytes cannot be decoded; carries the failing byte offset."""

    def __init__(self, offset: int, reason: str):
        self.offset = offset
        self.reason = reason
        super().__init__(f"decode error at byte {offset}: {reason}")


class DType(enum.IntEnum):
    F32 = 1
    F64 = 2
    I32 = 3
    I64 = 4
    U8 = 5
    BOOL = 6
    STRING = 7


_ELEMENT_SIZE = {
    DType.F32: 4,
    DType.F64: 8,
    DType.I32: 4,
    DType.I64: 8,
    DType.U8: 1,
    DType.BOOL: 1,
}

_NUMPY_DTYPE = {
    DType.F32: "<f4",
    DType.F64: "<f8",
    DType.I32: "<i4",
    DType.I64: "<i8",
    DType.U8: "u1",
    DType.BOOL: "?",
}

_DTYPE_FROM_NUMPY = {
    "f4": DType.F32,
    "f8": DType.F64,
    "i4": DType.I32,
    "i8": DType.I64,
    "u1": DType.U8,
    "b1": DType.BOOL,
}


def _shape_product(shape: Iterable[int]) -> int:
    n = 1
    for extent in shape:
        n *= extent
    return n


@dataclass(frozen=True)
class Tensor:
    """Typed, shaped, row-major payload; the sole currency for values on the wire.

    `shape` uses non-negative u32 extents; an empty shape means a scalar
    (one element). `data` holds the raw element bytes.
    """

    dtype: DType
    shape: tuple[int, ...]
    data: bytes

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(e) for e in self.shape))
        object.__setattr__(self, "dtype", DType(self.dtype))
        object.__setattr__(self, "data", bytes(self.data))
        if len(self.shape) > 255:
            raise ValueError(f"tensor rank {len(self.shape)} exceeds 255")
        for extent in self.shape:
            if extent < 0 or extent > 0xFFFFFFFF:
                raise ValueError(f"invalid tensor extent {extent}")
        if self.dtype == DType.STRING:
            _scan_string_data(self.data, self.element_count)
        else:
            expected = self.element_count * _ELEMENT_SIZE[self.dtype]
            if len(self.data) != expected:
                raise ValueError(
                    f"tensor data is {len(self.data)} bytes, expected {expected} "
                    f"for dtype {self.dtype.name} shape {self.shape}"
                )
            if self.dtype == DType.BOOL and any(b > 1 for b in self.data):
                raise ValueError("BOOL tensor bytes must be 0 or 1")

    @property
    def element_count(self) -> int:
        return _shape_product(self.shape)

    @classmethod
    def from_numpy(cls, array: np.ndarray) -> "Tensor":
        array = np.asarray(array)
        key = f"{array.dtype.kind}{array.dtype.itemsize}"
        if key not in _DTYPE_FROM_NUMPY:
            raise ValueError(f"unsupported numpy dtype {array.dtype}")
        dtype = _DTYPE_FROM_NUMPY[key]
        data = np.ascontiguousarray(array).astype(_NUMPY_DTYPE[dtype]).tobytes()
        return cls(dtype, array.shape, data)

    @classmethod
    def from_scalar(cls, value, dtype: DType) -> "Tensor":
        if dtype == DType.STRING:
            return cls.from_strings(value)
        packed = np.array(value).astype(_NUMPY_DTYPE[dtype]).tobytes()
        return cls(dtype, (), packed)

    @classmethod
    def from_strings(cls, values, shape: tuple[int, ...] | None = None) -> "Tensor":
        if isinstance(values, str):
            values = [values]
            shape = () if shape is None else shape
        values = list(values)
        if shape is None:
            shape = (len(values),)
        if _shape_product(shape) != len(values):
            raise ValueError("string count does not match shape")
        out = bytearray()
        for s in values:
            raw = s.encode("utf-8")
            out += struct.pack("<I", len(raw)) + raw
        return cls(DType.STRING, shape, bytes(out))

    def to_numpy(self) -> np.ndarray:
        if self.dtype == DType.STRING:
            raise ValueError("STRING tensors convert via to_strings()")
        return np.frombuffer(self.data, dtype=_NUMPY_DTYPE[self.dtype]).reshape(self.shape).copy()

    def to_strings(self) -> list[str]:
        if self.dtype != DType.STRING:
            raise ValueError("not a STRING tensor")
        return _scan_string_data(self.data, self.element_count)

    def item(self):
        """The single element of a scalar tensor, as a Python value."""
        if self.element_count != 1:
            raise ValueError(f"item() on tensor of {self.element_count} elements")
        if self.dtype == DType.STRING:
            return self.to_strings()[0]
        return self.to_numpy().reshape(()).item()


def _scan_string_data(data: bytes, count: int) -> list[str]:
    """Validate and split length-prefixed string element data."""
    out = []
    off = 0
    for _ in range(count):
        if off + 4 > len(data):
            raise ValueError("truncated string element length")
        (n,) = struct.unpack_from("<I", data, off)
        off += 4
        if off + n > len(data):
            raise ValueError("truncated string element data")
        try:
            out.append(data[off : off + n].decode("utf-8"))
        except UnicodeDecodeError as e:
            raise ValueError(f"string element is not valid UTF-8: {e}") from None
        off += n
    if off != len(data):
        raise ValueError("trailing bytes after string elements")
    return out


def as_tensor(value, dtype: DType | None = None) -> Tensor:
    """Coerce a Python value (str/bool/int/float/ndarray/Tensor) to a Tensor."""
    if isinstance(value, Tensor):
        return value
    if dtype is not None:
        if dtype == DType.STRING:
            return Tensor.from_strings(value) if not isinstance(value, str) else Tensor.from_strings(value)
        if np.ndim(value) == 0:
            return Tensor.from_scalar(value, dtype)
        return Tensor.from_numpy(np.asarray(value, dtype=_NUMPY_DTYPE[dtype]))
    if isinstance(value, str):
        return Tensor.from_strings(value)
    if isinstance(value, (bool, np.bool_)):
        return Tensor.from_scalar(bool(value), DType.BOOL)
    if isinstance(value, (int, np.integer)):
        return Tensor.from_scalar(int(value), DType.I64)
    if isinstance(value, (float, np.floating)):
        return Tensor.from_scalar(float(value), DType.F64)
    return Tensor.from_numpy(np.asarray(value))


class EpisodeStateTag(enum.IntEnum):
    RUNNING = 1
    TERMINATED = 2
    INTERRUPTED = 3

    @property
    def is_terminal(self) -> bool:
        return self is not EpisodeStateTag.RUNNING


@dataclass(frozen=True)
class ActuatorSpec:
    uid: int
    name: str
    dtype: DType
    shape: tuple[int, ...]
    bounds: tuple[float, float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(self.shape))
        if self.bounds is not None:
            lo, hi = self.bounds
            if math.isnan(lo) or math.isnan(hi) or lo > hi:
                raise ValueError(f"actuator bounds ({lo}, {hi}) require min <= max")
            object.__setattr__(self, "bounds", (float(lo), float(hi)))


@dataclass(frozen=True)
class SensorSpec:
    uid: int
    name: str
    dtype: DType
    shape: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(self.shape))


@dataclass(frozen=True)
class SpecSet:
    """Advertisement of an avatar's actuators and sensors, returned on join."""

    actuators: tuple[ActuatorSpec, ...] = ()
    sensors: tuple[SensorSpec, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "actuators", tuple(self.actuators))
        object.__setattr__(self, "sensors", tuple(self.sensors))
        for entries in (self.actuators, self.sensors):
            uids = [e.uid for e in entries]
            if len(set(uids)) != len(uids):
                raise ValueError("duplicate uid in spec set")

    def actuator_by_name(self, name: str) -> ActuatorSpec:
        for a in self.actuators:
            if a.name == name:
                return a
        raise KeyError(name)

    def sensor_by_name(self, name: str) -> SensorSpec:
        for s in self.sensors:
            if s.name == name:
                return s
        raise KeyError(name)


# --------------------------------------------------------------------------
# Message bodies. One dataclass per message kind; the request/response
# pairing and the 1-byte wire tags live in the tables below.
# --------------------------------------------------------------------------

@dataclass
class CreateWorldRequest:
    settings: dict[str, Tensor] = field(default_factory=dict)


@dataclass
class CreateWorldResponse:
    world_name: str


@dataclass
class JoinWorldRequest:
    world_name: str
    settings: dict[str, Tensor] = field(default_factory=dict)


@dataclass
class JoinWorldResponse:
    specs: SpecSet


@dataclass
class StepRequest:
    actions: dict[int, Tensor] = field(default_factory=dict)
    requested_observations: tuple[int, ...] = ()

    def __post_init__(self):
        self.requested_observations = tuple(self.requested_observations)


@dataclass
class StepResponse:
    state: EpisodeStateTag
    observations: dict[int, Tensor] = field(default_factory=dict)


@dataclass
class ResetRequest:
    settings: dict[str, Tensor] = field(default_factory=dict)


@dataclass
class ResetResponse:
    specs: SpecSet


@dataclass
class ResetWorldRequest:
    pass


@dataclass
class ResetWorldResponse:
    pass


@dataclass
class LeaveWorldRequest:
    pass


@dataclass
class LeaveWorldResponse:
    pass


@dataclass
class DestroyWorldRequest:
    world_name: str


@dataclass
class DestroyWorldResponse:
    pass


@dataclass
class ErrorResponse:
    code: int
    message: str


Body = Union[
    CreateWorldRequest, CreateWorldResponse,
    JoinWorldRequest, JoinWorldResponse,
    StepRequest, StepResponse,
    ResetRequest, ResetResponse,
    ResetWorldRequest, ResetWorldResponse,
    LeaveWorldRequest, LeaveWorldResponse,
    DestroyWorldRequest, DestroyWorldResponse,
    ErrorResponse,
]


@dataclass
class Message:
    """Tagged envelope: a sequence number plus one request or response body."""

    sequence: int
    body: Body


TAG_BY_BODY = {
    CreateWorldRequest: 1,
    CreateWorldResponse: 2,
    JoinWorldRequest: 3,
    JoinWorldResponse: 4,
    StepRequest: 5,
    StepResponse: 6,
    ResetRequest: 7,
    ResetResponse: 8,
    ResetWorldRequest: 9,
    ResetWorldResponse: 10,
    LeaveWorldRequest: 11,
    LeaveWorldResponse: 12,
    DestroyWorldRequest: 13,
    DestroyWorldResponse: 14,
    ErrorResponse: 15,
}

BODY_BY_TAG = {tag: body for body, tag in TAG_BY_BODY.items()}

RESPONSE_FOR_REQUEST = {
    CreateWorldRequest: CreateWorldResponse,
    JoinWorldRequest: JoinWorldResponse,
    StepRequest: StepResponse,
    ResetRequest: ResetResponse,
    ResetWorldRequest: ResetWorldResponse,
    LeaveWorldRequest: LeaveWorldResponse,
    DestroyWorldRequest: DestroyWorldResponse,
}


# --------------------------------------------------------------------------
# Encoding
# --------------------------------------------------------------------------

def _w_u8(out: bytearray, v: int):
    if not 0 <= v <= 0xFF:
        raise EncodeError(f"u8 out of range: {v}")
    out.append(v)


def _w_u32(out: bytearray, v: int):
    if not 0 <= v <= 0xFFFFFFFF:
        raise EncodeError(f"u32 out of range: {v}")
    out += struct.pack("<I", v)


def _w_u64(out: bytearray, v: int):
    if not 0 <= v <= 0xFFFFFFFFFFFFFFFF:
        raise EncodeError(f"u64 out of range: {v}")
    out += struct.pack("<Q", v)


def _w_f64(out: bytearray, v: float):
    out += struct.pack("<d", v)


def _w_str(out: bytearray, s: str):
    raw = s.encode("utf-8")
    _w_u32(out, len(raw))
    out += raw


def _w_shape(out: bytearray, shape: tuple[int, ...]):
    _w_u8(out, len(shape))
    for extent in shape:
        _w_u32(out, extent)


def _w_tensor(out: bytearray, t: Tensor):
    _w_u8(out, int(t.dtype))
    _w_shape(out, t.shape)
    out += t.data


def _w_settings(out: bytearray, settings: dict[str, Tensor]):
    _w_u32(out, len(settings))
    for key in sorted(settings):
        _w_str(out, key)
        _w_tensor(out, settings[key])


def _w_uid_tensor_map(out: bytearray, entries: dict[int, Tensor]):
    _w_u32(out, len(entries))
    for uid in sorted(entries):
        _w_u32(out, uid)
        _w_tensor(out, entries[uid])


def _w_uid_list(out: bytearray, uids: tuple[int, ...]):
    _w_u32(out, len(uids))
    for uid in uids:
        _w_u32(out, uid)


def _w_specset(out: bytearray, specs: SpecSet):
    _w_u32(out, len(specs.actuators))
    for a in specs.actuators:
        _w_u32(out, a.uid)
        _w_str(out, a.name)
        _w_u8(out, int(a.dtype))
        _w_shape(out, a.shape)
        lo, hi = a.bounds if a.bounds is not None else (0.0, 0.0)
        _w_f64(out, lo)
        _w_f64(out, hi)
        _w_u8(out, 1 if a.bounds is not None else 0)
    _w_u32(out, len(specs.sensors))
    for s in specs.sensors:
        _w_u32(out, s.uid)
        _w_str(out, s.name)
        _w_u8(out, int(s.dtype))
        _w_shape(out, s.shape)


def _enc_create_world_request(out, b: CreateWorldRequest):
    _w_settings(out, b.settings)


def _enc_create_world_response(out, b: CreateWorldResponse):
    _w_str(out, b.world_name)


def _enc_join_world_request(out, b: JoinWorldRequest):
    _w_str(out, b.world_name)
    _w_settings(out, b.settings)


def _enc_join_world_response(out, b: JoinWorldResponse):
    _w_specset(out, b.specs)


def _enc_step_request(out, b: StepRequest):
    _w_uid_tensor_map(out, b.actions)
    _w_uid_list(out, b.requested_observations)


def _enc_step_response(out, b: StepResponse):
    _w_u8(out, int(EpisodeStateTag(b.state)))
    _w_uid_tensor_map(out, b.observations)


def _enc_reset_request(out, b: ResetRequest):
    _w_settings(out, b.settings)


def _enc_reset_response(out, b: ResetResponse):
    _w_specset(out, b.specs)


def _enc_empty(out, b):
    pass


def _enc_destroy_world_request(out, b: DestroyWorldRequest):
    _w_str(out, b.world_name)


def _enc_error_response(out, b: ErrorResponse):
    _w_u32(out, b.code)
    _w_str(out, b.message)


_ENCODERS: dict[type, Callable] = {
    CreateWorldRequest: _enc_create_world_request,
    CreateWorldResponse: _enc_create_world_response,
    JoinWorldRequest: _enc_join_world_request,
    JoinWorldResponse: _enc_join_world_response,
    StepRequest: _enc_step_request,
    StepResponse: _enc_step_response,
    ResetRequest: _enc_reset_request,
    ResetResponse: _enc_reset_response,
    ResetWorldRequest: _enc_empty,
    ResetWorldResponse: _enc_empty,
    LeaveWorldRequest: _enc_empty,
    LeaveWorldResponse: _enc_empty,
    DestroyWorldRequest: _enc_destroy_world_request,
    DestroyWorldResponse: _enc_empty,
    ErrorResponse: _enc_error_response,
}


def encode_message(msg: Message) -> bytes:
    """Encode one message into a complete frame (length prefix included)."""
    kind = type(msg.body)
    if kind not in TAG_BY_BODY:
        raise EncodeError(f"unknown message body type {kind.__name__}")
    payload = bytearray()
    _w_u8(payload, TAG_BY_BODY[kind])
    _w_u64(payload, msg.sequence)
    _ENCODERS[kind](payload, msg.body)
    if len(payload) > MAX_PAYLOAD:
        raise EncodeError(f"payload of {len(payload)} bytes exceeds {MAX_PAYLOAD}")
    return struct.pack("<I", len(payload)) + bytes(payload)


# --------------------------------------------------------------------------
# Decoding
# --------------------------------------------------------------------------

class _Reader:
    """Cursor over one frame; every read is bounds-checked against the frame."""

    __slots__ = ("buf", "off")

    def __init__(self, buf: bytes):
        self.buf = buf
        self.off = 0

    @property
    def remaining(self) -> int:
        return len(self.buf) - self.off

    def fail(self, reason: str):
        raise DecodeError(self.off, reason)

    def take(self, n: int, what: str) -> bytes:
        if self.remaining < n:
            self.fail(f"truncated frame: need {n} bytes for {what}, have {self.remaining}")
        chunk = self.buf[self.off : self.off + n]
        self.off += n
        return chunk

    def u8(self, what: str = "u8") -> int:
        return self.take(1, what)[0]

    def u32(self, what: str = "u32") -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    def u64(self, what: str = "u64") -> int:
        return struct.unpack("<Q", self.take(8, what))[0]

    def f64(self, what: str = "f64") -> float:
        return struct.unpack("<d", self.take(8, what))[0]

    def string(self, what: str = "string") -> str:
        n = self.u32(f"{what} length")
        start = self.off
        raw = self.take(n, what)
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError:
            raise DecodeError(start, f"{what} is not valid UTF-8") from None


def _r_shape(r: _Reader) -> tuple[int, ...]:
    rank = r.u8("tensor rank")
    return tuple(r.u32("tensor extent") for _ in range(rank))


def _r_tensor(r: _Reader) -> Tensor:
    start = r.off
    raw_dtype = r.u8("tensor dtype")
    try:
        dtype = DType(raw_dtype)
    except ValueError:
        raise DecodeError(start, f"unknown tensor dtype {raw_dtype}") from None
    shape = _r_shape(r)
    count = _shape_product(shape)
    if dtype == DType.STRING:
        data = bytearray()
        for _ in range(count):
            n = r.u32("string element length")
            data += struct.pack("<I", n)
            data += r.take(n, "string element data")
        data = bytes(data)
    else:
        data = r.take(count * _ELEMENT_SIZE[dtype], "tensor data")
    try:
        return Tensor(dtype, shape, data)
    except ValueError as e:
        raise DecodeError(start, f"invalid tensor: {e}") from None


def _r_settings(r: _Reader) -> dict[str, Tensor]:
    n = r.u32("settings count")
    out: dict[str, Tensor] = {}
    prev = None
    for _ in range(n):
        at = r.off
        key = r.string("settings key")
        if prev is not None and key.encode("utf-8") <= prev.encode("utf-8"):
            raise DecodeError(at, "map keys not strictly ascending")
        prev = key
        out[key] = _r_tensor(r)
    return out


def _r_uid_tensor_map(r: _Reader) -> dict[int, Tensor]:
    n = r.u32("map count")
    out: dict[int, Tensor] = {}
    prev = -1
    for _ in range(n):
        at = r.off
        uid = r.u32("map uid key")
        if uid <= prev:
            raise DecodeError(at, "map keys not strictly ascending")
        prev = uid
        out[uid] = _r_tensor(r)
    return out


def _r_uid_list(r: _Reader) -> tuple[int, ...]:
    n = r.u32("uid list count")
    return tuple(r.u32("uid") for _ in range(n))


def _r_bool_byte(r: _Reader, what: str) -> bool:
    at = r.off
    v = r.u8(what)
    if v > 1:
        raise DecodeError(at, f"{what} byte must be 0 or 1, got {v}")
    return bool(v)


def _r_specset(r: _Reader) -> SpecSet:
    actuators = []
    for _ in range(r.u32("actuator count")):
        at = r.off
        uid = r.u32("actuator uid")
        name = r.string("actuator name")
        raw_dtype = r.u8("actuator dtype")
        try:
            dtype = DType(raw_dtype)
        except ValueError:
            raise DecodeError(at, f"unknown dtype {raw_dtype}") from None
        shape = _r_shape(r)
        lo = r.f64("actuator min")
        hi = r.f64("actuator max")
        bounded = _r_bool_byte(r, "actuator bounded flag")
        try:
            actuators.append(ActuatorSpec(uid, name, dtype, shape, (lo, hi) if bounded else None))
        except ValueError as e:
            raise DecodeError(at, str(e)) from None
    sensors = []
    for _ in range(r.u32("sensor count")):
        at = r.off
        uid = r.u32("sensor uid")
        name = r.string("sensor name")
        raw_dtype = r.u8("sensor dtype")
        try:
            dtype = DType(raw_dtype)
        except ValueError:
            raise DecodeError(at, f"unknown dtype {raw_dtype}") from None
        sensors.append(SensorSpec(uid, name, dtype, _r_shape(r)))
    at = r.off
    try:
        return SpecSet(tuple(actuators), tuple(sensors))
    except ValueError as e:
        raise DecodeError(at, str(e)) from None


def _r_episode_state(r: _Reader) -> EpisodeStateTag:
    at = r.off
    v = r.u8("episode state")
    try:
        return EpisodeStateTag(v)
    except ValueError:
        raise DecodeError(at, f"unknown episode state {v}") from None


def _dec_create_world_request(r):
    return CreateWorldRequest(_r_settings(r))


def _dec_create_world_response(r):
    return CreateWorldResponse(r.string("world name"))


def _dec_join_world_request(r):
    return JoinWorldRequest(r.string("world name"), _r_settings(r))


def _dec_join_world_response(r):
    return JoinWorldResponse(_r_specset(r))


def _dec_step_request(r):
    return StepRequest(_r_uid_tensor_map(r), _r_uid_list(r))


def _dec_step_response(r):
    return StepResponse(_r_episode_state(r), _r_uid_tensor_map(r))


def _dec_reset_request(r):
    return ResetRequest(_r_settings(r))


def _dec_reset_response(r):
    return ResetResponse(_r_specset(r))


def _dec_destroy_world_request(r):
    return DestroyWorldRequest(r.string("world name"))


def _dec_error_response(r):
    return ErrorResponse(r.u32("error code"), r.string("error message"))


_DECODERS: dict[int, Callable[[_Reader], Body]] = {
    TAG_BY_BODY[CreateWorldRequest]: _dec_create_world_request,
    TAG_BY_BODY[CreateWorldResponse]: _dec_create_world_response,
    TAG_BY_BODY[JoinWorldRequest]: _dec_join_world_request,
    TAG_BY_BODY[JoinWorldResponse]: _dec_join_world_response,
    TAG_BY_BODY[StepRequest]: _dec_step_request,
    TAG_BY_BODY[StepResponse]: _dec_step_response,
    TAG_BY_BODY[ResetRequest]: _dec_reset_request,
    TAG_BY_BODY[ResetResponse]: _dec_reset_response,
    TAG_BY_BODY[ResetWorldRequest]: lambda r: ResetWorldRequest(),
    TAG_BY_BODY[ResetWorldResponse]: lambda r: ResetWorldResponse(),
    TAG_BY_BODY[LeaveWorldRequest]: lambda r: LeaveWorldRequest(),
    TAG_BY_BODY[LeaveWorldResponse]: lambda r: LeaveWorldResponse(),
    TAG_BY_BODY[DestroyWorldRequest]: _dec_destroy_world_request,
    TAG_BY_BODY[DestroyWorldResponse]: lambda r: DestroyWorldResponse(),
    TAG_BY_BODY[ErrorResponse]: _dec_error_response,
}


def decode_message(frame: bytes) -> Message:
    """Decode one complete frame (length prefix included) into a Message.

    Total over all inputs: returns a Message or raises DecodeError; never
    reads past the declared frame length.
    """
    r = _Reader(bytes(frame))
    declared = r.u32("frame length") if r.remaining >= 4 else r.fail("truncated frame: length prefix")
    if declared > MAX_PAYLOAD:
        raise DecodeError(0, f"declared payload of {declared} bytes exceeds {MAX_PAYLOAD}")
    if len(frame) - 4 != declared:
        raise DecodeError(
            4, f"frame length mismatch: declared {declared}, got {len(frame) - 4}"
        )
    at = r.off
    tag = r.u8("message tag")
    sequence = r.u64("sequence")
    decoder = _DECODERS.get(tag)
    if decoder is None:
        raise DecodeError(at, f"unknown message kind 0x{tag:02X}")
    body = decoder(r)
    if r.remaining:
        raise DecodeError(r.off, f"{r.remaining} trailing bytes in payload")
    return Message(sequence, body)
