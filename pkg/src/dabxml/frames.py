"""DAB transmission frame model.

A transmission frame is split into the FIC (a list of Fast Information
Groups describing the multiplex) and the MSC (the subchannels, each carrying
audio frames with a fixed-capacity PAD field). FIG 0/13 announces the user
application type carried per subchannel; user application type 6 means
"MOT XML Message". The legacy dynamic label is kept as the deliberately
structureless alternative for contrast.

The module also defines the byte-exact stream container used to move frames
between the broadcaster and receivers (file or socket).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, Iterator

PAD_CAPACITY_DEFAULT = 58
MAX_FIG_PAYLOAD = 29
MAX_APP_DATA = 31
MAX_SUBCHANNEL_ID = 63
MAX_USER_APP_TYPE = 0x7FF  # 11 bits

#: User application type announcing an XML message carried as MOT objects.
USER_APP_XML_MESSAGE = 6

STREAM_MAGIC = b"DABS"


class FrameError(Exception):
    """Base class for frame-model errors."""


class PayloadOverflow(FrameError):
    pass


class ValueOutOfRange(FrameError):
    pass


class WrongFigKind(FrameError):
    pass


class TruncatedPayload(FrameError):
    pass


class NonAsciiCharacter(FrameError):
    pass


class KeyMismatch(FrameError):
    pass


class StreamFormatError(FrameError):
    """Container stream malformed; carries the byte offset of the defect."""

    def __init__(self, message: str, offset: int) -> None:
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


@dataclass(frozen=True)
class UserAppInfo:
    """One FIG 0/13 entry: what a subchannel carries.

    Wire layout per entry:
    - 1 byte subchannel id (0-63)
    - 2 bytes packing user_app_type (high 11 bits) and app_data length
      (low 5 bits), big-endian
    - app_data bytes
    """

    subchannel_id: int
    user_app_type: int
    app_data: bytes = b""


@dataclass(frozen=True)
class FastInfoGroup:
    """A typed record in the FIC, identified as FIG type/extension."""

    fig_type: int
    extension: int
    payload: bytes = b""


@dataclass
class AudioFrame:
    """One audio frame of a subchannel: opaque audio plus its PAD field."""

    audio_payload: bytes
    pad: bytes


@dataclass
class TransmissionFrame:
    """One broadcast unit: FIC plus the MSC subchannels."""

    frame_index: int
    fic: list[FastInfoGroup] = field(default_factory=list)
    subchannels: dict[int, list[AudioFrame]] = field(default_factory=dict)


def _check_entry(entry: UserAppInfo) -> None:
    if not 0 <= entry.subchannel_id <= MAX_SUBCHANNEL_ID:
        raise ValueOutOfRange(f"subchannel_id {entry.subchannel_id} not in 0..63")
    if not 0 <= entry.user_app_type <= MAX_USER_APP_TYPE:
        raise ValueOutOfRange(f"user_app_type {entry.user_app_type} needs 11 bits")
    if len(entry.app_data) > MAX_APP_DATA:
        raise ValueOutOfRange(f"app_data is {len(entry.app_data)} bytes, max {MAX_APP_DATA}")


def encode_fig_0_13(entries: Iterable[UserAppInfo]) -> FastInfoGroup:
    """Encode user application announcements as a FIG 0/13.

    Raises PayloadOverflow when the entries do not fit the 29-byte FIG
    payload, ValueOutOfRange when a field exceeds its bit width.
    """
    payload = bytearray()
    for entry in entries:
        _check_entry(entry)
        word = (entry.user_app_type << 5) | len(entry.app_data)
        payload.append(entry.subchannel_id)
        payload += struct.pack(">H", word)
        payload += entry.app_data
    if len(payload) > MAX_FIG_PAYLOAD:
        raise PayloadOverflow(f"FIG payload is {len(payload)} bytes, max {MAX_FIG_PAYLOAD}")
    return FastInfoGroup(fig_type=0, extension=13, payload=bytes(payload))


def decode_fig_0_13(fig: FastInfoGroup) -> list[UserAppInfo]:
    """Decode a FIG 0/13 payload back into its entries (inverse of encode)."""
    if fig.fig_type != 0 or fig.extension != 13:
        raise WrongFigKind(f"expected FIG 0/13, got FIG {fig.fig_type}/{fig.extension}")
    entries = []
    data = fig.payload
    pos = 0
    while pos < len(data):
        if pos + 3 > len(data):
            raise TruncatedPayload(f"entry header cut short at offset {pos}")
        subchannel_id = data[pos]
        (word,) = struct.unpack_from(">H", data, pos + 1)
        app_len = word & 0x1F
        pos += 3
        if pos + app_len > len(data):
            raise TruncatedPayload(f"app_data cut short at offset {pos}")
        entries.append(
            UserAppInfo(
                subchannel_id=subchannel_id,
                user_app_type=word >> 5,
                app_data=data[pos : pos + app_len],
            )
        )
        pos += app_len
    return entries


def encode_dynamic_label(text: str) -> bytes:
    """Encode a dynamic label: the raw ASCII bytes, nothing else.

    Deliberately structureless; a receiver cannot tell which part of the
    text is a title and which an artiste. Kept for contrast with the XML
    annotation path.
    """
    if len(text) > 128:
        raise ValueOutOfRange(f"dynamic label is {len(text)} chars, max 128")
    for ch in text:
        if not 0x20 <= ord(ch) <= 0x7E:
            raise NonAsciiCharacter(f"character {ch!r} is not printable ASCII")
    return text.encode("ascii")


def decode_dynamic_label(data: bytes) -> str:
    """Decode dynamic label bytes back to text (identity on encode output)."""
    for b in data:
        if not 0x20 <= b <= 0x7E:
            raise NonAsciiCharacter(f"byte {b:#04x} is not printable ASCII")
    return data.decode("ascii")


def mux_frame(
    fic_entries: Iterable[FastInfoGroup],
    pad_chunks: dict[int, bytes],
    audio: dict[int, bytes],
    frame_index: int,
) -> TransmissionFrame:
    """Assemble one transmission frame from FIGs, PAD chunks and audio.

    pad_chunks and audio must cover the same subchannel ids.
    """
    if set(pad_chunks) != set(audio):
        raise KeyMismatch(
            f"pad subchannels {sorted(pad_chunks)} != audio subchannels {sorted(audio)}"
        )
    subchannels: dict[int, list[AudioFrame]] = {}
    for sub_id in sorted(pad_chunks):
        if not 0 <= sub_id <= MAX_SUBCHANNEL_ID:
            raise ValueOutOfRange(f"subchannel id {sub_id} not in 0..63")
        subchannels[sub_id] = [AudioFrame(audio_payload=audio[sub_id], pad=pad_chunks[sub_id])]
    return TransmissionFrame(frame_index=frame_index, fic=list(fic_entries), subchannels=subchannels)


def demux_pads(frame: TransmissionFrame, subchannel_id: int) -> list[bytes]:
    """Return the PAD fields of one subchannel, in audio-frame order."""
    return [af.pad for af in frame.subchannels.get(subchannel_id, [])]


def signaled_subchannels(frame: TransmissionFrame, user_app_type: int = USER_APP_XML_MESSAGE) -> set[int]:
    """Subchannel ids announced with the given user application type in this frame.

    FIGs that are not FIG 0/13 are ignored; malformed FIG 0/13 payloads
    raise TruncatedPayload.
    """
    found = set()
    for fig in frame.fic:
        if fig.fig_type == 0 and fig.extension == 13:
            for entry in decode_fig_0_13(fig):
                if entry.user_app_type == user_app_type:
                    found.add(entry.subchannel_id)
    return found


# --- stream container -------------------------------------------------------
#
# Frame layout, all integers big-endian:
#   magic "DABS" (4 bytes)
#   frame_index (4 bytes)
#   FIC block:  count (2 bytes), then per FIG:
#                 1 byte  fig_type<<5 | payload length
#                 1 byte  extension
#                 payload bytes
#   MSC block:  entry count (1 byte), then per (subchannel, audio frame):
#                 1 byte  subchannel id
#                 2 bytes audio length, audio bytes
#                 1 byte  PAD length, PAD bytes


def serialize_frame(frame: TransmissionFrame) -> bytes:
    """Serialize one frame in the container format."""
    out = bytearray(STREAM_MAGIC)
    out += struct.pack(">I", frame.frame_index)
    out += struct.pack(">H", len(frame.fic))
    for fig in frame.fic:
        if not 0 <= fig.fig_type <= 7:
            raise ValueOutOfRange(f"fig_type {fig.fig_type} not in 0..7")
        if not 0 <= fig.extension <= 31:
            raise ValueOutOfRange(f"extension {fig.extension} not in 0..31")
        if len(fig.payload) > MAX_FIG_PAYLOAD:
            raise PayloadOverflow(f"FIG payload {len(fig.payload)} bytes, max {MAX_FIG_PAYLOAD}")
        out.append((fig.fig_type << 5) | len(fig.payload))
        out.append(fig.extension)
        out += fig.payload
    entries = [
        (sub_id, af)
        for sub_id in sorted(frame.subchannels)
        for af in frame.subchannels[sub_id]
    ]
    if len(entries) > 0xFF:
        raise ValueOutOfRange(f"{len(entries)} MSC entries, max 255")
    out.append(len(entries))
    for sub_id, af in entries:
        if len(af.audio_payload) > 0xFFFF:
            raise ValueOutOfRange("audio payload exceeds 65535 bytes")
        if len(af.pad) > 0xFF:
            raise ValueOutOfRange("PAD field exceeds 255 bytes")
        out.append(sub_id)
        out += struct.pack(">H", len(af.audio_payload))
        out += af.audio_payload
        out.append(len(af.pad))
        out += af.pad
    return bytes(out)


def write_frame(sink: BinaryIO, frame: TransmissionFrame) -> int:
    """Write one frame to a binary sink; returns the bytes written."""
    blob = serialize_frame(frame)
    sink.write(blob)
    return len(blob)


class _Reader:
    """Tracks the absolute offset while reading, for truncation reports."""

    def __init__(self, stream: BinaryIO) -> None:
        self.stream = stream
        self.offset = 0

    def exactly(self, n: int, what: str) -> bytes:
        data = self.stream.read(n)
        if data is None:
            data = b""
        if len(data) < n:
            raise StreamFormatError(f"stream ends inside {what}", self.offset + len(data))
        self.offset += n
        return data


def read_frames(stream: BinaryIO) -> Iterator[TransmissionFrame]:
    """Yield frames from a container stream until a clean end of stream.

    Raises StreamFormatError (with the byte offset) on truncation or a bad
    magic marker.
    """
    reader = _Reader(stream)
    while True:
        magic = stream.read(len(STREAM_MAGIC))
        if magic is None or magic == b"":
            return
        if len(magic) < len(STREAM_MAGIC) or magic != STREAM_MAGIC:
            raise StreamFormatError("bad or truncated frame magic", reader.offset)
        reader.offset += len(STREAM_MAGIC)
        (frame_index,) = struct.unpack(">I", reader.exactly(4, "frame index"))
        (fig_count,) = struct.unpack(">H", reader.exactly(2, "FIC count"))
        fic = []
        for _ in range(fig_count):
            head = reader.exactly(2, "FIG header")
            fig_type = head[0] >> 5
            length = head[0] & 0x1F
            payload = reader.exactly(length, "FIG payload")
            fic.append(FastInfoGroup(fig_type=fig_type, extension=head[1], payload=payload))
        (entry_count,) = reader.exactly(1, "MSC entry count")
        subchannels: dict[int, list[AudioFrame]] = {}
        for _ in range(entry_count):
            (sub_id,) = reader.exactly(1, "subchannel id")
            (audio_len,) = struct.unpack(">H", reader.exactly(2, "audio length"))
            audio = reader.exactly(audio_len, "audio payload")
            (pad_len,) = reader.exactly(1, "PAD length")
            pad = reader.exactly(pad_len, "PAD field")
            subchannels.setdefault(sub_id, []).append(AudioFrame(audio_payload=audio, pad=pad))
        yield TransmissionFrame(frame_index=frame_index, fic=fic, subchannels=subchannels)
