"""Command-line broadcaster: scenario-driven transmission-frame streams.

A scenario declares the ensemble, its subchannels, and the envelopes to
inject as MOT objects at chosen frames. Every frame of a scenario that
carries XML anywhere announces it via FIG 0/13 (receivers may join
mid-stream), and output is byte-identical across runs of the same scenario.

Scenario files are line-oriented; see ``parse_scenario`` for the format.
"""

from __future__ import annotations

import hashlib
import shlex
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Optional

from . import dabml, mot
from .frames import (
    StreamFormatError,
    TransmissionFrame,
    UserAppInfo,
    USER_APP_XML_MESSAGE,
    encode_fig_0_13,
    mux_frame,
    read_frames,
    serialize_frame,
    signaled_subchannels,
)
from .mot import ValidityWindow
from .padstream import PadExtractor, PadPacker


class ScenarioError(Exception):
    """Scenario file or scenario invariant problem."""


class ScheduleOverflow(Exception):
    """A scheduled message cannot be fully emitted before the stream ends."""


@dataclass
class ScheduledMessage:
    at_frame: int
    subchannel: int
    message: dabml.DabmlMessage
    validity: ValidityWindow = field(default_factory=ValidityWindow)


@dataclass
class BroadcastScenario:
    ensemble_label: str = "Campus DAB"
    subchannels: list[tuple[int, str]] = field(default_factory=list)
    scheduled_messages: list[ScheduledMessage] = field(default_factory=list)
    frame_count: int = 50
    pad_capacity: int = 58
    segment_size: int = 64
    epoch: int = 0
    audio_size: int = 32

    def check(self) -> None:
        ids = [sub_id for sub_id, _ in self.subchannels]
        if len(ids) != len(set(ids)):
            raise ScenarioError(f"duplicate subchannel ids in {ids}")
        if self.frame_count < 1:
            raise ScenarioError("frame_count must be positive")
        for msg in self.scheduled_messages:
            if not 0 <= msg.at_frame < self.frame_count:
                raise ScenarioError(
                    f"message scheduled at frame {msg.at_frame}, stream has {self.frame_count}"
                )
            if msg.subchannel not in set(ids):
                raise ScenarioError(f"message on undeclared subchannel {msg.subchannel}")


def _parse_kv(tokens: list[str], line_no: int) -> dict[str, str]:
    out = {}
    for token in tokens:
        key, sep, value = token.partition("=")
        if not sep:
            raise ScenarioError(f"line {line_no}: expected key=value, got {token!r}")
        out[key] = value
    return out


def _parse_time(raw: str, epoch: int, line_no: int) -> int:
    try:
        if raw.startswith("+"):
            return epoch + int(raw[1:])
        return int(raw)
    except ValueError:
        raise ScenarioError(f"line {line_no}: bad timestamp {raw!r}")


def _parse_message_line(
    tokens: list[str], line_no: int, epoch: int, base_dir: Path
) -> ScheduledMessage:
    head: dict[str, str] = {}
    rest = tokens
    while rest and "=" in rest[0] and rest[0].split("=", 1)[0] in ("at", "sub", "start", "expire", "envelope"):
        key, value = rest[0].split("=", 1)
        head[key] = value
        rest = rest[1:]
    if "at" not in head or "sub" not in head:
        raise ScenarioError(f"line {line_no}: message needs at= and sub=")
    validity = ValidityWindow(
        start_validity=_parse_time(head["start"], epoch, line_no) if "start" in head else None,
        expire_time=_parse_time(head["expire"], epoch, line_no) if "expire" in head else None,
    )
    if "envelope" in head:
        path = base_dir / head["envelope"]
        try:
            message = dabml.parse_envelope(path.read_bytes())
        except OSError as exc:
            raise ScenarioError(f"line {line_no}: cannot read envelope file: {exc}")
        except dabml.DabmlError as exc:
            raise ScenarioError(f"line {line_no}: bad envelope file: {exc}")
    elif rest and rest[0] == "audio":
        fields = _parse_kv(rest[1:], line_no)
        payload = dabml.AudioContent(
            artiste=fields.pop("artiste", None),
            song_title=fields.pop("songTitle", None),
            genre=fields.pop("genre", None),
            extra=fields,
        )
        message = dabml.DabmlMessage(payload=payload)
    elif rest and rest[0] == "data":
        fields = _parse_kv(rest[1:], line_no)
        payload = dabml.DataContent(
            content_kind=fields.pop("contentKind", ""),
            name=fields.pop("name", ""),
            uri=fields.pop("uri", None),
            extra=fields,
        )
        message = dabml.DabmlMessage(payload=payload)
    else:
        raise ScenarioError(
            f"line {line_no}: message needs envelope=FILE or an inline audio/data payload"
        )
    violations = dabml.validate(message)
    if violations:
        raise ScenarioError(f"line {line_no}: invalid message: {violations[0]}")
    try:
        return ScheduledMessage(
            at_frame=int(head["at"]),
            subchannel=int(head["sub"]),
            message=message,
            validity=validity,
        )
    except ValueError as exc:
        raise ScenarioError(f"line {line_no}: {exc}")


def parse_scenario(text: str, base_dir: Optional[Path] = None) -> BroadcastScenario:
    """Parse the line-oriented scenario format.

    Directives (one per line, '#' comments allowed)::

        ensemble <label>
        frames <count>
        pad-capacity <bytes>          # default 58
        segment-size <bytes>          # default 64
        epoch <unix-seconds>          # default 0; anchors +relative times
        audio-size <bytes>            # default 32, opaque filler
        subchannel <id> <label>
        message at=<frame> sub=<id> [start=<t>] [expire=<t>] \\
                (audio|data) <field>=<value>...
        message at=<frame> sub=<id> [start=<t>] [expire=<t>] envelope=<file>

    Times are absolute Unix seconds or ``+N`` relative to the epoch.
    """
    base_dir = base_dir or Path(".")
    scenario = BroadcastScenario()
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        try:
            tokens = shlex.split(raw_line, comments=True)
        except ValueError as exc:
            raise ScenarioError(f"line {line_no}: {exc}")
        if not tokens:
            continue
        directive, args = tokens[0], tokens[1:]
        try:
            if directive == "ensemble":
                scenario.ensemble_label = " ".join(args)
            elif directive == "frames":
                scenario.frame_count = int(args[0])
            elif directive == "pad-capacity":
                scenario.pad_capacity = int(args[0])
            elif directive == "segment-size":
                scenario.segment_size = int(args[0])
            elif directive == "epoch":
                scenario.epoch = int(args[0])
            elif directive == "audio-size":
                scenario.audio_size = int(args[0])
            elif directive == "subchannel":
                scenario.subchannels.append((int(args[0]), " ".join(args[1:])))
            elif directive == "message":
                scenario.scheduled_messages.append(
                    _parse_message_line(args, line_no, scenario.epoch, base_dir)
                )
            else:
                raise ScenarioError(f"line {line_no}: unknown directive {directive!r}")
        except (IndexError, ValueError) as exc:
            raise ScenarioError(f"line {line_no}: {exc}")
    scenario.check()
    return scenario


def load_scenario(path: str) -> BroadcastScenario:
    scenario_path = Path(path)
    return parse_scenario(scenario_path.read_text(), base_dir=scenario_path.parent)


def build_frames(scenario: BroadcastScenario) -> list[TransmissionFrame]:
    """Assemble the whole frame stream for a scenario, deterministically.

    Raises ScheduleOverflow when queued groups spill past the last frame.
    """
    scenario.check()
    xml_subchannels = sorted({m.subchannel for m in scenario.scheduled_messages})
    entries = [UserAppInfo(sub, USER_APP_XML_MESSAGE) for sub in xml_subchannels]
    figs = [encode_fig_0_13(entries[i : i + 9]) for i in range(0, len(entries), 9)]

    all_subchannels = sorted(sub_id for sub_id, _ in scenario.subchannels)
    packers = {sub: PadPacker(scenario.pad_capacity) for sub in all_subchannels}
    audio = {sub: b"\xaa" * scenario.audio_size for sub in all_subchannels}

    schedule = sorted(
        enumerate(scenario.scheduled_messages), key=lambda pair: (pair[1].at_frame, pair[0])
    )
    transport_ids = {index: tid for tid, (index, _) in enumerate(schedule, start=1)}

    result = []
    for frame_index in range(scenario.frame_count):
        for index, scheduled in schedule:
            if scheduled.at_frame != frame_index:
                continue
            envelope = dabml.serialize_envelope(scheduled.message)
            obj = mot.build_mot_object(envelope, scheduled.validity)
            groups = mot.segment(
                mot.serialize_object(obj), transport_ids[index], scenario.segment_size
            )
            for group in groups:
                packers[scheduled.subchannel].enqueue(group)
        pads = {sub: packers[sub].pack_next_pad() for sub in all_subchannels}
        result.append(mux_frame(figs, pads, audio, frame_index))
    leftover = {sub: p.pending_bytes for sub, p in packers.items() if not p.idle}
    if leftover:
        raise ScheduleOverflow(
            f"undelivered bytes at end of stream: {leftover} "
            f"(raise frame_count or pad-capacity)"
        )
    return result


def run_broadcast(scenario: BroadcastScenario, sink: BinaryIO, pace_fps: float = 0.0) -> int:
    """Emit the scenario's frames to a sink; returns the frame count."""
    import time as _time

    built = build_frames(scenario)
    for frame in built:
        sink.write(serialize_frame(frame))
        if pace_fps > 0:
            _time.sleep(1.0 / pace_fps)
    sink.flush()
    return len(built)


def inspect_stream(stream: BinaryIO) -> str:
    """Human-readable report over a frame stream; read-only, never aborts.

    Lists per-frame FIG announcements, recovered data-group boundaries, and
    digests of every reassembled MOT object.
    """
    lines: list[str] = []
    extractors: dict[int, PadExtractor] = {}
    buffers: dict[int, mot.ReassemblyBuffer] = {}
    frame_count = 0
    object_count = 0

    def describe_object(sub: int, transport_id: int, blob: bytes) -> None:
        nonlocal object_count
        object_count += 1
        digest = hashlib.sha256(blob).hexdigest()[:12]
        try:
            obj = mot.parse_object(blob)
        except mot.MotError as exc:
            lines.append(f"  sub {sub}: MOT object transport={transport_id} unparseable: {exc}")
            return
        name = (obj.content_name() or b"?").decode("ascii", "replace")
        summary = (
            f"  sub {sub}: MOT object transport={transport_id} ContentName={name} "
            f"body={len(obj.body)}B sha256={digest}"
        )
        try:
            message = dabml.parse_envelope(obj.body)
        except dabml.DabmlError as exc:
            summary += f" envelope-error={type(exc).__name__}"
        else:
            payload = message.payload
            if isinstance(payload, dabml.AudioContent):
                summary += f" payload=audioContent artiste={payload.artiste!r} songTitle={payload.song_title!r}"
            elif isinstance(payload, dabml.DataContent):
                summary += f" payload=dataContent name={payload.name!r}"
            elif isinstance(payload, dabml.HardwareControl):
                summary += f" payload=hardwareControl actions={len(payload.actions)}"
            elif isinstance(payload, list):
                summary += f" payload=behaviours count={len(payload)}"
        lines.append(summary)

    try:
        for frame in read_frames(stream):
            frame_count += 1
            try:
                signaled = sorted(signaled_subchannels(frame))
            except Exception as exc:  # malformed FIG: report, keep walking
                lines.append(f"frame {frame.frame_index}: bad FIC: {exc}")
                signaled = []
            figs = ", ".join(f"FIG {f.fig_type}/{f.extension}" for f in frame.fic) or "none"
            lines.append(
                f"frame {frame.frame_index}: FIC [{figs}] xml-signaled={signaled} "
                f"subchannels={sorted(frame.subchannels)}"
            )
            for sub in signaled:
                extractor = extractors.setdefault(sub, PadExtractor())
                buffer = buffers.setdefault(sub, mot.ReassemblyBuffer())
                for pad in [af.pad for af in frame.subchannels.get(sub, [])]:
                    for group in extractor.extract_from_pad(pad):
                        lines.append(
                            f"  sub {sub}: data group transport={group.transport_id} "
                            f"segment={group.segment_number}{' last' if group.last else ''} "
                            f"data={len(group.data)}B"
                        )
                        try:
                            blob = buffer.add(group)
                        except mot.MotError as exc:
                            lines.append(f"  sub {sub}: reassembly issue: {exc}")
                            continue
                        if blob is not None:
                            describe_object(sub, group.transport_id, blob)
                for issue in extractor.drain_issues():
                    lines.append(f"  sub {sub}: {issue.kind} at offset {issue.offset}")
    except StreamFormatError as exc:
        lines.append(f"stream truncated: {exc}")
    lines.append(f"frames: {frame_count}")
    lines.append(f"MOT objects reassembled: {object_count}")
    return "\n".join(lines) + "\n"
