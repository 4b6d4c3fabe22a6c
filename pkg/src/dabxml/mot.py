"""MOT object codec.

An MOT object is a 7-byte header core, a list of header-extension
parameters, and a body (here: the bytes of one XML envelope). Objects are
serialized, cut into CRC-protected data groups for transport through PAD
fields, and reassembled on the receive side. Validity parameters bound when
an object's content applies.

Header core layout (56 bits, packed big-endian bit order):
    body_size        28 bits   body length in bytes
    header_size      13 bits   core + encoded parameters, in bytes
    content_type      6 bits   0 = general data
    content_subtype   9 bits   1 = MIME/HTTP

Parameter encoding: param_id (1 byte), value length (1 byte), value.

Data group wire format (all integers big-endian):
    transport_id     2 bytes
    flags/segment    2 bytes   top bit = last-segment flag, low 15 bits = segment number
    data length      2 bytes
    data             data-length bytes
    crc              2 bytes   CRC-16/X.25 over everything before it
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field as dc_field
from typing import Iterable, Optional

CONTENT_TYPE_GENERAL_DATA = 0
CONTENT_SUBTYPE_MIME_HTTP = 1
CONTENT_NAME_XML = b"TEXT/XML"

PARAM_CONTENT_NAME = 0x0C
PARAM_START_VALIDITY = 0x0A
PARAM_EXPIRE_TIME = 0x04

GROUP_HEADER_SIZE = 6
GROUP_OVERHEAD = GROUP_HEADER_SIZE + 2  # header + trailing CRC


class MotError(Exception):
    """Base class for MOT codec errors."""


class EmptyBody(MotError):
    pass


class InvalidValidity(MotError):
    pass


class Truncated(MotError):
    pass


class SizeMismatch(MotError):
    pass


class EmptyInput(MotError):
    pass


class MalformedTimestamp(MotError):
    pass


class MixedTransportIds(MotError):
    pass


class DuplicateSegment(MotError):
    pass


class NoTerminalSegment(MotError):
    pass


class CrcFailure(MotError):
    def __init__(self, segment_number: Optional[int]) -> None:
        super().__init__(f"CRC mismatch on segment {segment_number}")
        self.segment_number = segment_number


class MissingSegments(MotError):
    def __init__(self, missing: list[int]) -> None:
        super().__init__(f"missing segments {missing}")
        self.missing = missing


def crc16(data: bytes) -> int:
    """CRC-16/X.25: poly 0x1021 reflected, init 0xFFFF, final XOR 0xFFFF.

    Check value: crc16(b"123456789") == 0x906E. Appending the CRC
    little-endian to the message makes the whole check to the constant
    0x0F47.
    """
    reg = 0xFFFF
    for byte in data:
        reg ^= byte
        for _ in range(8):
            if reg & 1:
                reg = (reg >> 1) ^ 0x8408  # 0x1021 bit-reversed
            else:
                reg >>= 1
    return reg ^ 0xFFFF


#: crc16(data + crc16(data) as 2 bytes little-endian), for any data.
CRC_RESIDUE_MAGIC = 0x0F47


@dataclass(frozen=True)
class MotHeaderCore:
    """The fixed 7-byte object header."""

    body_size: int
    header_size: int
    content_type: int = CONTENT_TYPE_GENERAL_DATA
    content_subtype: int = CONTENT_SUBTYPE_MIME_HTTP

    def to_bytes(self) -> bytes:
        if not 0 <= self.body_size < 1 << 28:
            raise SizeMismatch(f"body_size {self.body_size} needs 28 bits")
        if not 0 <= self.header_size < 1 << 13:
            raise SizeMismatch(f"header_size {self.header_size} needs 13 bits")
        if not 0 <= self.content_type < 1 << 6:
            raise SizeMismatch(f"content_type {self.content_type} needs 6 bits")
        if not 0 <= self.content_subtype < 1 << 9:
            raise SizeMismatch(f"content_subtype {self.content_subtype} needs 9 bits")
        packed = (
            (self.body_size << 28)
            | (self.header_size << 15)
            | (self.content_type << 9)
            | self.content_subtype
        )
        return packed.to_bytes(7, "big")

    @classmethod
    def from_bytes(cls, data: bytes) -> "MotHeaderCore":
        if len(data) < 7:
            raise Truncated(f"header core needs 7 bytes, got {len(data)}")
        packed = int.from_bytes(data[:7], "big")
        return cls(
            body_size=packed >> 28,
            header_size=(packed >> 15) & 0x1FFF,
            content_type=(packed >> 9) & 0x3F,
            content_subtype=packed & 0x1FF,
        )


@dataclass(frozen=True)
class MotParameter:
    """One header-extension parameter (id, value)."""

    param_id: int
    value: bytes

    def encoded(self) -> bytes:
        if not 0 <= self.param_id <= 0xFF:
            raise SizeMismatch(f"param_id {self.param_id} is not one byte")
        if len(self.value) > 0xFF:
            raise SizeMismatch(f"parameter value is {len(self.value)} bytes, max 255")
        return bytes([self.param_id, len(self.value)]) + self.value


@dataclass
class ValidityWindow:
    """Half-open [start, expire) window in Unix UTC seconds; both optional."""

    start_validity: Optional[int] = None
    expire_time: Optional[int] = None

    def is_empty(self) -> bool:
        return self.start_validity is None and self.expire_time is None


@dataclass
class MotObject:
    core: MotHeaderCore
    parameters: list[MotParameter] = dc_field(default_factory=list)
    body: bytes = b""

    def parameter(self, param_id: int) -> Optional[MotParameter]:
        for p in self.parameters:
            if p.param_id == param_id:
                return p
        return None

    def content_name(self) -> Optional[bytes]:
        p = self.parameter(PARAM_CONTENT_NAME)
        return p.value if p else None


def _timestamp_param(param_id: int, seconds: int) -> MotParameter:
    return MotParameter(param_id, struct.pack(">Q", seconds))


def _read_timestamp(obj: MotObject, param_id: int) -> Optional[int]:
    p = obj.parameter(param_id)
    if p is None:
        return None
    if len(p.value) != 8:
        raise MalformedTimestamp(
            f"parameter {param_id:#04x} value is {len(p.value)} bytes, expected 8"
        )
    return struct.unpack(">Q", p.value)[0]


def build_mot_object(xml_bytes: bytes, validity: Optional[ValidityWindow] = None) -> MotObject:
    """Build an XML-carrying MOT object (general data / MIME-HTTP, TEXT/XML).

    Validity timestamps are encoded as 8-byte big-endian Unix seconds and
    included only when set.
    """
    if not xml_bytes:
        raise EmptyBody("MOT body must be non-empty")
    validity = validity or ValidityWindow()
    if (
        validity.start_validity is not None
        and validity.expire_time is not None
        and validity.start_validity >= validity.expire_time
    ):
        raise InvalidValidity(
            f"start {validity.start_validity} must precede expire {validity.expire_time}"
        )
    parameters = [MotParameter(PARAM_CONTENT_NAME, CONTENT_NAME_XML)]
    if validity.start_validity is not None:
        parameters.append(_timestamp_param(PARAM_START_VALIDITY, validity.start_validity))
    if validity.expire_time is not None:
        parameters.append(_timestamp_param(PARAM_EXPIRE_TIME, validity.expire_time))
    header_size = 7 + sum(len(p.encoded()) for p in parameters)
    core = MotHeaderCore(body_size=len(xml_bytes), header_size=header_size)
    return MotObject(core=core, parameters=parameters, body=xml_bytes)


def object_validity(obj: MotObject) -> ValidityWindow:
    """Read the object's validity window from its parameters."""
    return ValidityWindow(
        start_validity=_read_timestamp(obj, PARAM_START_VALIDITY),
        expire_time=_read_timestamp(obj, PARAM_EXPIRE_TIME),
    )


def serialize_object(obj: MotObject) -> bytes:
    """Serialize core, parameters, then body. parse_object inverts this."""
    out = bytearray(obj.core.to_bytes())
    for p in obj.parameters:
        out += p.encoded()
    out += obj.body
    return bytes(out)


def parse_object(data: bytes) -> MotObject:
    """Parse a serialized MOT object, validating declared sizes.

    Unknown parameter ids are preserved verbatim (forward compatibility).
    """
    core = MotHeaderCore.from_bytes(data)
    if core.header_size < 7:
        raise SizeMismatch(f"declared header_size {core.header_size} below the 7 core bytes")
    if len(data) < core.header_size:
        raise Truncated(
            f"declared header_size {core.header_size}, only {len(data)} bytes present"
        )
    parameters = []
    pos = 7
    while pos < core.header_size:
        if pos + 2 > core.header_size:
            raise Truncated(f"parameter header cut short at offset {pos}")
        param_id = data[pos]
        value_len = data[pos + 1]
        pos += 2
        if pos + value_len > core.header_size:
            raise Truncated(f"parameter {param_id:#04x} value overruns the header")
        parameters.append(MotParameter(param_id, data[pos : pos + value_len]))
        pos += value_len
    body = data[core.header_size :]
    if len(body) != core.body_size:
        raise SizeMismatch(
            f"declared body_size {core.body_size}, actual body is {len(body)} bytes"
        )
    return MotObject(core=core, parameters=parameters, body=body)


# --- data groups -------------------------------------------------------------


@dataclass(frozen=True)
class DataGroup:
    """One CRC-protected segment of a serialized MOT object."""

    transport_id: int
    segment_number: int
    last: bool
    data: bytes
    crc: int

    def header_bytes(self) -> bytes:
        if not 0 <= self.transport_id <= 0xFFFF:
            raise SizeMismatch(f"transport_id {self.transport_id} is not 16-bit")
        if not 0 <= self.segment_number <= 0x7FFF:
            raise SizeMismatch(f"segment_number {self.segment_number} is not 15-bit")
        flags = (0x8000 if self.last else 0) | self.segment_number
        return struct.pack(">HHH", self.transport_id, flags, len(self.data))

    def crc_ok(self) -> bool:
        return crc16(self.header_bytes() + self.data) == self.crc


def segment(obj_bytes: bytes, transport_id: int, segment_size: int) -> list[DataGroup]:
    """Cut serialized object bytes into data groups of segment_size bytes.

    The final group carries the remainder and the last-segment flag; CRCs
    cover header plus data.
    """
    if not obj_bytes:
        raise EmptyInput("nothing to segment")
    if segment_size < 1:
        raise SizeMismatch(f"segment_size {segment_size} must be >= 1")
    if not 0 <= transport_id <= 0xFFFF:
        raise SizeMismatch(f"transport_id {transport_id} is not 16-bit")
    groups = []
    count = (len(obj_bytes) + segment_size - 1) // segment_size
    if count > 0x8000:
        raise SizeMismatch(f"{count} segments exceed the 15-bit segment counter")
    for number in range(count):
        chunk = obj_bytes[number * segment_size : (number + 1) * segment_size]
        last = number == count - 1
        header = struct.pack(">HHH", transport_id, (0x8000 if last else 0) | number, len(chunk))
        groups.append(
            DataGroup(
                transport_id=transport_id,
                segment_number=number,
                last=last,
                data=chunk,
                crc=crc16(header + chunk),
            )
        )
    return groups


def serialize_group(group: DataGroup) -> bytes:
    """Serialize a data group; the stored CRC is written as-is."""
    return group.header_bytes() + group.data + struct.pack(">H", group.crc)


def parse_group(data: bytes) -> DataGroup:
    """Parse one serialized data group (structure only; CRC is not verified)."""
    if len(data) < GROUP_OVERHEAD:
        raise Truncated(f"data group needs at least {GROUP_OVERHEAD} bytes, got {len(data)}")
    transport_id, flags, data_len = struct.unpack(">HHH", data[:GROUP_HEADER_SIZE])
    if len(data) != GROUP_OVERHEAD + data_len:
        raise SizeMismatch(
            f"declared data length {data_len}, frame holds {len(data) - GROUP_OVERHEAD}"
        )
    (crc,) = struct.unpack(">H", data[-2:])
    return DataGroup(
        transport_id=transport_id,
        segment_number=flags & 0x7FFF,
        last=bool(flags & 0x8000),
        data=data[GROUP_HEADER_SIZE:-2],
        crc=crc,
    )


def reassemble(groups: Iterable[DataGroup]) -> bytes:
    """Reassemble one object's bytes from data groups, in any arrival order.

    Verifies every CRC, requires a single transport id, contiguous segments
    0..N, and exactly one last-flagged group at the highest number.
    """
    groups = list(groups)
    if not groups:
        raise NoTerminalSegment("no groups given")
    ids = {g.transport_id for g in groups}
    if len(ids) > 1:
        raise MixedTransportIds(f"groups span transport ids {sorted(ids)}")
    for g in sorted(groups, key=lambda g: g.segment_number):
        if not g.crc_ok():
            raise CrcFailure(g.segment_number)
    seen: dict[int, DataGroup] = {}
    for g in groups:
        if g.segment_number in seen:
            raise DuplicateSegment(f"segment {g.segment_number} appears twice")
        seen[g.segment_number] = g
    top = max(seen)
    lasts = sorted(n for n, g in seen.items() if g.last)
    if lasts != [top]:
        raise NoTerminalSegment(f"last flags on segments {lasts}, highest is {top}")
    missing = [n for n in range(top + 1) if n not in seen]
    if missing:
        raise MissingSegments(missing)
    return b"".join(seen[n].data for n in range(top + 1))


class ReassemblyBuffer:
    """Collects data groups per transport id and releases completed objects.

    Owned by a single consumer; groups may arrive in any order. An exact
    duplicate of an already-held segment is ignored (rebroadcast tolerance);
    a conflicting one raises DuplicateSegment. Bad CRCs raise CrcFailure.
    """

    def __init__(self) -> None:
        self._partial: dict[int, dict[int, DataGroup]] = {}

    def pending_transport_ids(self) -> list[int]:
        return sorted(self._partial)

    def add(self, group: DataGroup) -> Optional[bytes]:
        """Add one group; returns the full object bytes once complete."""
        if not group.crc_ok():
            raise CrcFailure(group.segment_number)
        held = self._partial.setdefault(group.transport_id, {})
        existing = held.get(group.segment_number)
        if existing is not None:
            if existing == group:
                return None
            raise DuplicateSegment(
                f"conflicting segment {group.segment_number} for transport {group.transport_id}"
            )
        held[group.segment_number] = group
        lasts = [n for n, g in held.items() if g.last]
        if not lasts:
            return None
        top = max(lasts)
        if any(n > top for n in held):
            raise NoTerminalSegment(f"segment beyond last-flagged {top}")
        if all(n in held for n in range(top + 1)):
            del self._partial[group.transport_id]
            return b"".join(held[n].data for n in range(top + 1))
        return None


class ValidityState(enum.Enum):
    ACTIVE = "Active"
    PENDING = "Pending"
    EXPIRED = "Expired"


def check_validity(obj: MotObject, now: float) -> ValidityState:
    """Evaluate the object's validity window at a point in time.

    The window is half-open: the start is inclusive, the expiry exclusive.
    Absent parameters impose no constraint.
    """
    window = object_validity(obj)
    if window.start_validity is not None and now < window.start_validity:
        return ValidityState.PENDING
    if window.expire_time is not None and now >= window.expire_time:
        return ValidityState.EXPIRED
    return ValidityState.ACTIVE
