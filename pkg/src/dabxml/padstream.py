"""Streaming data groups through fixed-capacity PAD fields.

Serialized data groups are framed as marker byte 0xFD plus a 2-byte
big-endian length, concatenated, and cut greedily into PAD fields of the
configured capacity; idle space is zero-filled. Groups may straddle PAD
(and therefore audio-frame) boundaries.

The extractor is chunking-agnostic: it keeps residual bytes between calls,
skips idle zeros, and only ever emits groups whose CRC checked out. After a
bad marker it resynchronizes by scanning for the next 0xFD; a candidate
found while scanning is accepted only if its framed bytes pass CRC,
otherwise the scan resumes one byte later.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Optional, Union

from . import mot

MARKER = 0xFD
FRAMING_OVERHEAD = 3  # marker + 2-byte length


class PadError(Exception):
    """Base class for PAD transport errors."""


class GroupTooLarge(PadError):
    pass


@dataclass(frozen=True)
class PadIssue:
    """A data anomaly noticed during extraction; the stream keeps flowing.

    kind is one of "BadMarker", "CrcFailure", "Truncated".
    """

    kind: str
    offset: int
    segment_number: Optional[int] = None
    detail: str = ""


class PadPacker:
    """Queues serialized data groups and emits fixed-size PAD fields."""

    def __init__(self, capacity: int) -> None:
        if capacity < 1:
            raise PadError(f"PAD capacity {capacity} must be >= 1")
        self.capacity = capacity
        self._pending = bytearray()

    def enqueue(self, group: Union[mot.DataGroup, bytes]) -> None:
        blob = mot.serialize_group(group) if isinstance(group, mot.DataGroup) else bytes(group)
        if len(blob) > 0xFFFF:
            raise GroupTooLarge(f"serialized group is {len(blob)} bytes, max 65535")
        self._pending += bytes([MARKER]) + struct.pack(">H", len(blob)) + blob

    @property
    def pending_bytes(self) -> int:
        return len(self._pending)

    @property
    def idle(self) -> bool:
        return not self._pending

    def pack_next_pad(self) -> bytes:
        """Emit the next PAD field: queued bytes first, zero padding after."""
        chunk = bytes(self._pending[: self.capacity])
        del self._pending[: len(chunk)]
        return chunk + b"\x00" * (self.capacity - len(chunk))


class PadExtractor:
    """Recovers data groups from a sequence of PAD fields.

    Issues (bad markers, CRC failures) are appended to ``issues``; callers
    that want them per-call can use :meth:`drain_issues`.
    """

    def __init__(self, capacity: Optional[int] = None) -> None:
        self.capacity = capacity
        self.issues: list[PadIssue] = []
        self._carry = bytearray()
        self._base = 0  # absolute stream offset of _carry[0]
        self._scanning = False

    def extract_from_pad(self, pad: bytes) -> list[mot.DataGroup]:
        """Feed one PAD field; return every group completed by it."""
        if self.capacity is not None and len(pad) != self.capacity:
            self.issues.append(
                PadIssue(
                    kind="Truncated",
                    offset=self._base + len(self._carry),
                    detail=f"PAD is {len(pad)} bytes, capacity {self.capacity}",
                )
            )
        self._carry += pad
        return self._drain(final=False)

    def flush(self) -> list[mot.DataGroup]:
        """End of stream: recover whatever the residual bytes still hold."""
        return self._drain(final=True)

    def drain_issues(self) -> list[PadIssue]:
        issues, self.issues = self.issues, []
        return issues

    def _check_blob(self, blob: bytes) -> Optional[mot.DataGroup]:
        if len(blob) < mot.GROUP_OVERHEAD:
            return None
        (stored,) = struct.unpack(">H", blob[-2:])
        if mot.crc16(blob[:-2]) != stored:
            return None
        try:
            return mot.parse_group(blob)
        except mot.MotError:
            return None

    @staticmethod
    def _blob_segment_number(blob: bytes) -> Optional[int]:
        if len(blob) >= 4:
            return struct.unpack(">H", blob[2:4])[0] & 0x7FFF
        return None

    def _drain(self, final: bool) -> list[mot.DataGroup]:
        out: list[mot.DataGroup] = []
        buf = self._carry
        pos = 0
        while True:
            if not self._scanning:
                while pos < len(buf) and buf[pos] == 0:
                    pos += 1
                if pos >= len(buf):
                    break
                if buf[pos] != MARKER:
                    self.issues.append(
                        PadIssue(
                            kind="BadMarker",
                            offset=self._base + pos,
                            detail=f"expected marker, found {buf[pos]:#04x}",
                        )
                    )
                    self._scanning = True
                    continue
                if pos + FRAMING_OVERHEAD > len(buf):
                    if final:
                        self._note_truncated(pos)
                        pos = len(buf)
                    break
                (length,) = struct.unpack(">H", buf[pos + 1 : pos + 3])
                end = pos + FRAMING_OVERHEAD + length
                if end > len(buf):
                    if final:
                        self._note_truncated(pos)
                        pos = len(buf)
                    break
                blob = bytes(buf[pos + FRAMING_OVERHEAD : end])
                group = self._check_blob(blob)
                if group is not None:
                    out.append(group)
                else:
                    self.issues.append(
                        PadIssue(
                            kind="CrcFailure",
                            offset=self._base + pos,
                            segment_number=self._blob_segment_number(blob),
                        )
                    )
                # Either way the framing length delimited the group's bytes;
                # the stream stays aligned after them.
                pos = end
            else:
                idx = buf.find(MARKER, pos)
                if idx < 0:
                    pos = len(buf)
                    break
                pos = idx
                if pos + FRAMING_OVERHEAD > len(buf):
                    if final:
                        pos = len(buf)
                    break
                (length,) = struct.unpack(">H", buf[pos + 1 : pos + 3])
                end = pos + FRAMING_OVERHEAD + length
                if end > len(buf):
                    if final:
                        pos += 1  # candidate can never complete; rescan
                        continue
                    break
                group = self._check_blob(bytes(buf[pos + FRAMING_OVERHEAD : end]))
                if group is not None:
                    out.append(group)
                    self._scanning = False
                    pos = end
                else:
                    pos += 1  # false sync; no report, rescan from the next byte
        del buf[:pos]
        self._base += pos
        return out

    def _note_truncated(self, pos: int) -> None:
        self.issues.append(
            PadIssue(
                kind="Truncated",
                offset=self._base + pos,
                detail="stream ends inside a framed group",
            )
        )
