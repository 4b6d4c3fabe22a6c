"""The receiver server: simulated tuner, extraction, interpretation, control.

Three cooperating threads mirror the server-side application design:

* the extractor thread walks the broadcast stream, recovers MOT objects from
  the watched subchannel's PAD and turns them into decoded-message events;
* the main thread interprets every message (from air or from clients alike),
  runs behaviour matching, and answers client requests;
* the hardware thread exclusively owns the simulated tuner state, executes
  commands, runs the autonomous AFC correction, and writes saved objects.

Communication is message passing over bounded queues; client requests enter
the main thread's inbox from the HTTP listener and receive exactly one
reply.
"""

from __future__ import annotations

import dataclasses
import itertools
import logging
import queue
import socket
import threading
import time
from concurrent.futures import Future
from concurrent.futures import TimeoutError as FutureTimeout
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Iterator, Optional, Union
from xml.etree import ElementTree as ET

from . import behaviors, dabml, frames, mot
from .config import ServerConfig
from .dabml import (
    AfcAdjust,
    AudioContent,
    DabmlMessage,
    DataContent,
    HardwareControl,
    RecordStart,
    RecordStop,
    SelectSubchannel,
    SetVolume,
    TuneEnsemble,
)
from .padstream import PadExtractor

logger = logging.getLogger(__name__)

_STOP = object()


# --- events ------------------------------------------------------------------


@dataclass
class XmlMessageDecoded:
    message: DabmlMessage
    transport_id: int
    validity: mot.ValidityState
    raw_xml: bytes = b""
    timestamp: float = field(default_factory=time.time)


@dataclass
class ObjectSaved:
    destination: str
    timestamp: float = field(default_factory=time.time)


@dataclass
class HardwareResult:
    correlation_id: int
    outcome: str  # "ok" | "error"
    detail: str = ""
    timestamp: float = field(default_factory=time.time)


@dataclass
class ExtractionError:
    kind: str
    detail: str = ""
    timestamp: float = field(default_factory=time.time)


@dataclass
class Notification:
    text: str
    behaviour_id: str = ""
    timestamp: float = field(default_factory=time.time)


ServerEvent = Union[XmlMessageDecoded, ObjectSaved, HardwareResult, ExtractionError, Notification]


def _payload_kind(message: DabmlMessage) -> str:
    payload = message.payload
    if isinstance(payload, AudioContent):
        return "audioContent"
    if isinstance(payload, DataContent):
        return "dataContent"
    if isinstance(payload, HardwareControl):
        return "hardwareControl"
    if isinstance(payload, list):
        return "behaviours"
    return "none"


def format_event(event: ServerEvent) -> str:
    stamp = datetime.fromtimestamp(event.timestamp, timezone.utc).isoformat()
    if isinstance(event, XmlMessageDecoded):
        detail = (
            f"transport={event.transport_id} validity={event.validity.value} "
            f"payload={_payload_kind(event.message)}"
        )
    elif isinstance(event, ObjectSaved):
        detail = f"destination={event.destination}"
    elif isinstance(event, HardwareResult):
        detail = f"correlation={event.correlation_id} outcome={event.outcome} {event.detail}"
    elif isinstance(event, ExtractionError):
        detail = f"kind={event.kind} {event.detail}".rstrip()
    else:
        detail = event.text if not event.behaviour_id else f"[{event.behaviour_id}] {event.text}"
    return f"{stamp} {type(event).__name__} {detail}".rstrip()


class EventLog:
    """Thread-safe append-only event log, oldest first."""

    def __init__(self, limit: int = 2000) -> None:
        self._events: list[ServerEvent] = []
        self._lock = threading.Lock()
        self._limit = limit

    def append(self, event: ServerEvent) -> None:
        with self._lock:
            self._events.append(event)
            if len(self._events) > self._limit:
                del self._events[: len(self._events) - self._limit]

    def snapshot(self) -> list[ServerEvent]:
        with self._lock:
            return list(self._events)

    def text(self) -> str:
        return "".join(format_event(e) + "\n" for e in self.snapshot())


# --- simulated tuner ---------------------------------------------------------


@dataclass
class ReceiverState:
    ensemble_label: str
    selected_subchannel: int
    volume: int = 0
    afc_offset: int = 0
    recording: Optional[tuple[int, str]] = None
    audio_muted: bool = False


class SimulatedTuner:
    """The receiver hardware stand-in; mutated only by the hardware thread.

    Every mutation records the acting thread id so tests can assert the
    single-writer rule. Reads hand out snapshots, never the live state.
    """

    def __init__(self, ensembles: dict[str, list[int]], initial: ReceiverState) -> None:
        if initial.ensemble_label not in ensembles:
            raise ValueError(f"unknown ensemble {initial.ensemble_label!r}")
        self._ensembles = {label: sorted(set(subs)) for label, subs in ensembles.items()}
        self._state = initial
        self._lock = threading.Lock()
        self.mutation_thread_ids: list[int] = []

    def _mutated(self) -> None:
        self.mutation_thread_ids.append(threading.get_ident())

    def snapshot(self) -> ReceiverState:
        with self._lock:
            return dataclasses.replace(self._state)

    def subchannels(self) -> list[int]:
        with self._lock:
            return list(self._ensembles[self._state.ensemble_label])

    def apply(self, action: dabml.Action) -> tuple[str, str]:
        """Apply one action; returns (outcome, detail), state untouched on error."""
        with self._lock:
            state = self._state
            available = self._ensembles[state.ensemble_label]
            if isinstance(action, SetVolume):
                if not 0 <= action.level <= 100:
                    return "error", f"volume {action.level} not in 0..100"
                state.volume = action.level
                state.audio_muted = action.level == 0
                self._mutated()
                return "ok", f"volume set to {action.level}"
            if isinstance(action, SelectSubchannel):
                if action.subchannel_id not in available:
                    return (
                        "error",
                        f"subchannel {action.subchannel_id} not in ensemble {available}",
                    )
                state.selected_subchannel = action.subchannel_id
                self._mutated()
                return "ok", f"selected subchannel {action.subchannel_id}"
            if isinstance(action, TuneEnsemble):
                if action.label not in self._ensembles:
                    return "error", f"unknown ensemble {action.label!r}"
                state.ensemble_label = action.label
                subs = self._ensembles[action.label]
                if state.selected_subchannel not in subs:
                    state.selected_subchannel = subs[0]
                self._mutated()
                return "ok", f"tuned to ensemble {action.label!r}"
            if isinstance(action, RecordStart):
                if action.subchannel_id not in available:
                    return (
                        "error",
                        f"subchannel {action.subchannel_id} not in ensemble {available}",
                    )
                if state.recording is not None:
                    return "error", f"already recording subchannel {state.recording[0]}"
                state.recording = (action.subchannel_id, action.destination)
                self._mutated()
                return "ok", f"recording subchannel {action.subchannel_id} to {action.destination}"
            if isinstance(action, RecordStop):
                if state.recording is None:
                    return "error", "not recording"
                stopped = state.recording
                state.recording = None
                self._mutated()
                return "ok", f"stopped recording subchannel {stopped[0]}"
            if isinstance(action, AfcAdjust):
                state.afc_offset += action.offset
                self._mutated()
                return "ok", f"AFC offset now {state.afc_offset}"
            return "error", f"unsupported action {type(action).__name__}"

    def set_afc_offset(self, offset: int) -> None:
        with self._lock:
            self._state.afc_offset = offset
            self._mutated()

    def afc_tick(self) -> None:
        """Autonomous correction: decay the offset by 10% toward zero."""
        with self._lock:
            if self._state.afc_offset != 0:
                self._state.afc_offset = int(self._state.afc_offset * 0.9)
                self._mutated()


# --- extraction --------------------------------------------------------------


def run_extractor(
    frame_source: Iterable[frames.TransmissionFrame],
    subchannel: int,
    *,
    pad_capacity: Optional[int] = None,
    clock: Callable[[], float] = time.time,
) -> Iterator[ServerEvent]:
    """Walk a frame stream and yield decoded-message and error events.

    Only PAD fields of frames whose FIC announces the XML user application
    type for the watched subchannel are consumed. Objects whose validity has
    not started are held and released once it arrives; expired objects are
    dropped with an error event. Data errors never stop the stream.
    """
    extractor = PadExtractor(capacity=pad_capacity)
    buffer = mot.ReassemblyBuffer()
    pending: list[tuple[int, mot.MotObject]] = []

    def decode(transport_id: int, obj: mot.MotObject, state: mot.ValidityState) -> Iterator[ServerEvent]:
        try:
            message = dabml.parse_envelope(obj.body)
        except dabml.DabmlError as exc:
            yield ExtractionError(kind=type(exc).__name__, detail=str(exc))
            return
        yield XmlMessageDecoded(
            message=message, transport_id=transport_id, validity=state, raw_xml=obj.body
        )

    def release_pending(now: float) -> Iterator[ServerEvent]:
        for transport_id, obj in list(pending):
            state = mot.check_validity(obj, now)
            if state is mot.ValidityState.PENDING:
                continue
            pending.remove((transport_id, obj))
            if state is mot.ValidityState.EXPIRED:
                yield ExtractionError(kind="Expired", detail=f"transport={transport_id}")
            else:
                yield from decode(transport_id, obj, state)

    def drain_issues() -> Iterator[ServerEvent]:
        for issue in extractor.drain_issues():
            detail = f"offset={issue.offset}"
            if issue.segment_number is not None:
                detail += f" segment={issue.segment_number}"
            if issue.detail:
                detail += f" {issue.detail}"
            yield ExtractionError(kind=issue.kind, detail=detail)

    def handle_groups(groups: list[mot.DataGroup], now: float) -> Iterator[ServerEvent]:
        for group in groups:
            try:
                obj_bytes = buffer.add(group)
            except mot.MotError as exc:
                yield ExtractionError(kind=type(exc).__name__, detail=str(exc))
                continue
            if obj_bytes is None:
                continue
            try:
                obj = mot.parse_object(obj_bytes)
            except mot.MotError as exc:
                yield ExtractionError(kind=type(exc).__name__, detail=str(exc))
                continue
            if obj.content_name() != mot.CONTENT_NAME_XML:
                yield ExtractionError(
                    kind="UnsupportedObject",
                    detail=f"transport={group.transport_id} ContentName={obj.content_name()!r}",
                )
                continue
            try:
                state = mot.check_validity(obj, now)
            except mot.MalformedTimestamp as exc:
                yield ExtractionError(kind="MalformedTimestamp", detail=str(exc))
                continue
            if state is mot.ValidityState.PENDING:
                pending.append((group.transport_id, obj))
            elif state is mot.ValidityState.EXPIRED:
                yield ExtractionError(kind="Expired", detail=f"transport={group.transport_id}")
            else:
                yield from decode(group.transport_id, obj, state)

    now = 0.0
    for frame in frame_source:
        now = clock()
        yield from release_pending(now)
        try:
            signaled = frames.signaled_subchannels(frame)
        except frames.FrameError as exc:
            yield ExtractionError(kind=type(exc).__name__, detail=str(exc))
            continue
        if subchannel not in signaled:
            continue
        for pad in frames.demux_pads(frame, subchannel):
            groups = extractor.extract_from_pad(pad)
            yield from drain_issues()
            yield from handle_groups(groups, now)
    groups = extractor.flush()
    yield from drain_issues()
    yield from handle_groups(groups, now)
    yield from release_pending(now)


# --- frame sources -----------------------------------------------------------


class FrameSource:
    """A frame iterator plus the plumbing needed to shut it down."""

    def __init__(self, spec: str) -> None:
        self.spec = spec
        self.port: Optional[int] = None
        self._file = None
        self._listener: Optional[socket.socket] = None
        self._conn: Optional[socket.socket] = None
        self._stop = threading.Event()
        if spec.startswith("tcp-listen:"):
            self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            self._listener.bind(("127.0.0.1", int(spec.split(":", 1)[1])))
            self._listener.listen(1)
            self._listener.settimeout(0.2)
            self.port = self._listener.getsockname()[1]
        else:
            path = spec.split(":", 1)[1] if spec.startswith("file:") else spec
            self._file = open(path, "rb")

    def iter_frames(self) -> Iterator[frames.TransmissionFrame]:
        if self._file is not None:
            yield from frames.read_frames(self._file)
            return
        assert self._listener is not None
        while not self._stop.is_set():
            try:
                conn, _ = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            self._conn = conn
            with conn, conn.makefile("rb") as stream:
                yield from frames.read_frames(stream)
            return

    def close(self) -> None:
        self._stop.set()
        for sock in (self._conn, self._listener):
            if sock is not None:
                try:
                    sock.close()
                except OSError:
                    pass
        if self._file is not None:
            self._file.close()


# --- server ------------------------------------------------------------------


@dataclass(frozen=True)
class SaveObject:
    """Internal hardware command: persist envelope bytes under a name."""

    destination: str
    payload: bytes


@dataclass
class HardwareCommand:
    action: Union[dabml.Action, SaveObject]
    correlation_id: int
    result: Future


@dataclass
class _ClientRequest:
    raw: bytes
    reply: Future


class ReceiverServer:
    """Owns the three threads and the message plumbing between them."""

    def __init__(
        self,
        config: ServerConfig,
        *,
        frame_source: Optional[Iterable[frames.TransmissionFrame]] = None,
        clock: Callable[[], float] = time.time,
    ) -> None:
        self.config = config
        self.clock = clock
        self.events = EventLog()
        self.store = behaviors.BehaviourStore()
        self.tuner = SimulatedTuner(
            ensembles={config.ensemble.label: config.ensemble.subchannels},
            initial=ReceiverState(
                ensemble_label=config.ensemble.label,
                selected_subchannel=sorted(config.ensemble.subchannels)[0],
            ),
        )
        self._inbox: queue.Queue = queue.Queue(maxsize=256)
        self._hw_queue: queue.Queue = queue.Queue(maxsize=64)
        self._correlations = itertools.count(1)
        self.commands_dispatched = 0
        self._latest: dict[str, tuple[DabmlMessage, bytes]] = {}
        self._frames_override = frame_source
        self._source: Optional[FrameSource] = None
        self._threads: list[threading.Thread] = []
        self._hw_ready = threading.Event()
        self._running = False
        self.hardware_thread: Optional[threading.Thread] = None

    # -- lifecycle

    @property
    def input_port(self) -> Optional[int]:
        return self._source.port if self._source else None

    def start(self) -> None:
        if self._running:
            raise RuntimeError("server already started")
        self._running = True
        self.hardware_thread = threading.Thread(
            target=self._hardware_loop, name="dab-hardware", daemon=True
        )
        main = threading.Thread(target=self._main_loop, name="dab-main", daemon=True)
        self._threads = [self.hardware_thread, main]
        if self._frames_override is None and self.config.input:
            self._source = FrameSource(self.config.input)
        if self._frames_override is not None or self._source is not None:
            self._threads.append(
                threading.Thread(target=self._extractor_loop, name="dab-extractor", daemon=True)
            )
        for thread in self._threads:
            thread.start()
        if not self._hw_ready.wait(timeout=5):
            raise RuntimeError("hardware thread failed to initialize")

    def stop(self) -> None:
        if not self._running:
            return
        self._running = False
        if self._source is not None:
            self._source.close()
        self._inbox.put(_STOP)
        self._hw_queue.put(_STOP)
        for thread in self._threads:
            thread.join(timeout=5)

    # -- public surface (HTTP listener + tests)

    def handle_client_request(self, raw: bytes) -> bytes:
        """One client envelope in, exactly one reply envelope out."""
        if not self._running:
            reply = dabml.make_reply("error", detail="server is not running")
            return dabml.serialize_envelope(reply)
        request = _ClientRequest(raw=raw, reply=Future())
        self._inbox.put(request)
        try:
            return request.reply.result(timeout=self.config.request_timeout_seconds)
        except FutureTimeout:
            reply = dabml.make_reply("error", detail="request timed out")
            return dabml.serialize_envelope(reply)

    def state_snapshot(self) -> ReceiverState:
        return self.tuner.snapshot()

    def state_xml(self) -> bytes:
        state = self.state_snapshot()
        root = ET.Element("receiverState")
        for tag, value in (
            ("ensembleLabel", state.ensemble_label),
            ("selectedSubchannel", str(state.selected_subchannel)),
            ("volume", str(state.volume)),
            ("afcOffset", str(state.afc_offset)),
            ("audioMuted", "true" if state.audio_muted else "false"),
            ("watchedSubchannel", str(self.config.watched_subchannel)),
        ):
            child = ET.SubElement(root, tag)
            child.text = value
        if state.recording is not None:
            ET.SubElement(
                root,
                "recording",
                {"subchannel": str(state.recording[0]), "destination": state.recording[1]},
            )
        return ET.tostring(root, encoding="unicode").encode("utf-8")

    def events_text(self) -> str:
        return self.events.text()

    def latest_content(self, kind: str) -> Optional[DabmlMessage]:
        cached = self._latest.get(kind)
        return cached[0] if cached else None

    # -- thread bodies

    def _extractor_loop(self) -> None:
        source = self._frames_override
        if source is None:
            assert self._source is not None
            source = self._source.iter_frames()
        try:
            for event in run_extractor(
                source,
                self.config.watched_subchannel,
                pad_capacity=self.config.pad_capacity,
                clock=self.clock,
            ):
                self._inbox.put(("event", event))
        except frames.StreamFormatError as exc:
            self._inbox.put(("event", ExtractionError(kind="StreamFormatError", detail=str(exc))))
        except Exception:  # never bring the server down over a bad stream
            if self._running:
                logger.exception("extractor thread failed")

    def _main_loop(self) -> None:
        while True:
            item = self._inbox.get()
            if item is _STOP:
                break
            if isinstance(item, _ClientRequest):
                reply = self._handle_raw(item.raw)
                item.reply.set_result(dabml.serialize_envelope(reply))
                continue
            _, event = item
            self.events.append(event)
            if isinstance(event, XmlMessageDecoded):
                self._interpret(event.message, event.raw_xml, origin="air")

    def _hardware_loop(self) -> None:
        # startup defaults: tune the configured service before serving commands
        self.tuner.apply(SelectSubchannel(self.config.defaults.subchannel))
        self.tuner.apply(SetVolume(self.config.defaults.volume))
        if self.config.afc_drift:
            self.tuner.set_afc_offset(self.config.afc_drift)
        self._hw_ready.set()
        while True:
            try:
                command = self._hw_queue.get(timeout=self.config.afc_tick_seconds)
            except queue.Empty:
                self.tuner.afc_tick()
                continue
            if command is _STOP:
                break
            outcome, detail = self._execute(command.action)
            self.events.append(
                HardwareResult(
                    correlation_id=command.correlation_id, outcome=outcome, detail=detail
                )
            )
            command.result.set_result((outcome, detail))

    def _execute(self, action: Union[dabml.Action, SaveObject]) -> tuple[str, str]:
        if isinstance(action, SaveObject):
            return self._save_object(action)
        return self.tuner.apply(action)

    def _save_object(self, save: SaveObject) -> tuple[str, str]:
        name = save.destination
        if not name or name.startswith(("/", "\\")) or ".." in Path(name).parts:
            return "error", f"unusable destination name {name!r}"
        target = Path(self.config.output_dir) / name
        if target.suffix == "":
            target = target.with_suffix(".xml")
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_bytes(save.payload)
        except OSError as exc:
            return "error", f"could not save object: {exc}"
        relative = str(target.relative_to(self.config.output_dir))
        self.events.append(ObjectSaved(destination=relative))
        return "ok", f"saved {relative}"

    # -- interpretation (main thread only)

    def _dispatch(self, action: Union[dabml.Action, SaveObject]) -> Future:
        command = HardwareCommand(
            action=action, correlation_id=next(self._correlations), result=Future()
        )
        self.commands_dispatched += 1
        self._hw_queue.put(command)
        return command.result

    def _handle_raw(self, raw: bytes) -> DabmlMessage:
        try:
            message = dabml.parse_envelope(raw)
        except dabml.DabmlError as exc:
            return dabml.make_reply(
                "error", detail=str(exc), extra_headers={"kind": type(exc).__name__}
            )
        reply = self._interpret(message, raw, origin="client")
        return reply if reply is not None else dabml.make_reply("ok")

    def _interpret(
        self, message: DabmlMessage, raw: bytes, origin: str
    ) -> Optional[DabmlMessage]:
        """Process one message; origin only decides whether a reply is built."""
        payload = message.payload
        if isinstance(payload, (AudioContent, DataContent)):
            return self._interpret_content(message, raw, origin)
        if isinstance(payload, HardwareControl):
            return self._interpret_control(payload, origin)
        if isinstance(payload, list):
            return self._interpret_behaviours(payload, origin)
        return self._interpret_query(message, origin)

    def _interpret_content(
        self, message: DabmlMessage, raw: bytes, origin: str
    ) -> Optional[DabmlMessage]:
        kind = "audio" if isinstance(message.payload, AudioContent) else "data"
        self._latest[kind] = (message, raw)
        fired = behaviors.match_message(self.store, message)
        for firing in fired:
            reaction = firing.reaction
            if isinstance(reaction, dabml.Device):
                self._dispatch(reaction.action)
            elif isinstance(reaction, dabml.SaveToDisk):
                self._dispatch(SaveObject(destination=reaction.destination, payload=raw))
            elif isinstance(reaction, dabml.Notify):
                self.events.append(
                    Notification(text=reaction.text, behaviour_id=firing.behaviour_id)
                )
        if origin != "client":
            return None
        return dabml.make_reply("ok", detail=f"content noted; {len(fired)} reaction(s) fired")

    def _interpret_control(self, payload: HardwareControl, origin: str) -> Optional[DabmlMessage]:
        futures = [self._dispatch(action) for action in payload.actions]
        if origin != "client":
            return None
        details = []
        for future in futures:
            try:
                outcome, detail = future.result(timeout=self.config.request_timeout_seconds)
            except FutureTimeout:
                outcome, detail = "error", "hardware timed out"
            details.append(detail)
            if outcome != "ok":
                return dabml.make_reply("error", detail=detail)
        return dabml.make_reply("ok", detail="; ".join(details))

    def _interpret_behaviours(
        self, payload: list[dabml.BehaviourDef], origin: str
    ) -> Optional[DabmlMessage]:
        try:
            seen: set[str] = set()
            for definition in payload:
                violations = dabml.validate_behaviour(definition)
                if violations:
                    raise behaviors.InvalidDefinition("; ".join(str(v) for v in violations))
                if definition.behaviour_id in self.store or definition.behaviour_id in seen:
                    raise behaviors.DuplicateId(
                        f"behaviour {definition.behaviour_id!r} already defined"
                    )
                seen.add(definition.behaviour_id)
            added = [self.store.add(definition) for definition in payload]
        except behaviors.BehaviourError as exc:
            if origin == "client":
                return dabml.make_reply(
                    "error", detail=str(exc), extra_headers={"kind": type(exc).__name__}
                )
            self.events.append(Notification(text=f"behaviours message rejected: {exc}"))
            return None
        if origin != "client":
            self.events.append(Notification(text=f"behaviours added from air: {', '.join(added)}"))
            return None
        return dabml.make_reply(
            "ok",
            detail=f"added behaviour(s): {', '.join(added)}",
            extra_headers={"behaviourIds": ",".join(added)},
        )

    def _interpret_query(self, message: DabmlMessage, origin: str) -> Optional[DabmlMessage]:
        if origin != "client":
            return None
        request = message.header_entries.get("request")
        if request == "contentInfo":
            kind = message.header_entries.get("kind", "audio")
            if kind not in ("audio", "data"):
                return dabml.make_reply("error", detail=f"unknown content kind {kind!r}")
            cached = self._latest.get(kind)
            if cached is None:
                return dabml.make_reply("ok", detail="no content decoded yet")
            return dabml.make_reply("ok", payload=cached[0].payload)
        if request == "listBehaviours":
            definitions = list(self.store)
            if not definitions:
                return dabml.make_reply("ok", detail="no behaviours defined")
            return dabml.make_reply("ok", payload=definitions)
        if request == "removeBehaviour":
            behaviour_id = message.header_entries.get("id", "")
            try:
                removed = self.store.remove(behaviour_id)
            except behaviors.NotFound as exc:
                return dabml.make_reply(
                    "error", detail=str(exc), extra_headers={"kind": "NotFound"}
                )
            return dabml.make_reply("ok", detail=f"removed behaviour {removed}")
        return dabml.make_reply("error", detail=f"unsupported request {request!r}")
