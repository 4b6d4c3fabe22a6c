"""DABml message schema and envelope codec.

Messages travel inside a SOAP-style envelope: an Envelope element (SOAP
namespace) holding a Header of flat string entries and a Body whose single
child is a DAB element (dabml namespace) wrapping the payload. Payloads are
one of the four schema tags:

    audioContent      descriptive fields for the audio service
    dataContent       descriptive fields for non-audio objects
    hardwareControl   an ordered list of receiver actions
    behaviours        stored trigger -> reaction rules

Queries and status replies reuse the same envelope with header entries
(``request``, ``status``, ``detail``) and an empty DAB element; their
payload is None.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Union
from xml.etree import ElementTree as ET

SOAP_ENV_NS = "http://schemas.xmlsoap.org/soap/envelope/"
SOAP_ENCODING = "http://schemas.xmlsoap.org/soap/encoding/"
DABML_NS = "http://location/dabml/"

ET.register_namespace("SOAP-ENV", SOAP_ENV_NS)
ET.register_namespace("dabml", DABML_NS)

_TAG_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\-]*$")


class DabmlError(Exception):
    """Base class for envelope parse errors."""


class MalformedXml(DabmlError):
    pass


class MissingBody(DabmlError):
    pass


class UnknownPayload(DabmlError):
    pass


class SchemaViolation(DabmlError):
    pass


# --- actions and reactions ---------------------------------------------------


@dataclass(frozen=True)
class SetVolume:
    level: int


@dataclass(frozen=True)
class SelectSubchannel:
    subchannel_id: int


@dataclass(frozen=True)
class TuneEnsemble:
    label: str


@dataclass(frozen=True)
class RecordStart:
    subchannel_id: int
    destination: str


@dataclass(frozen=True)
class RecordStop:
    pass


@dataclass(frozen=True)
class AfcAdjust:
    offset: int


Action = Union[SetVolume, SelectSubchannel, TuneEnsemble, RecordStart, RecordStop, AfcAdjust]


@dataclass(frozen=True)
class Device:
    """Reaction: apply one action to the receiver hardware."""

    action: Action


@dataclass(frozen=True)
class SaveToDisk:
    """Reaction: persist the triggering object under a destination name."""

    destination: str


@dataclass(frozen=True)
class Notify:
    """Reaction: append a note to the server event log."""

    text: str


Reaction = Union[Device, SaveToDisk, Notify]


# --- payloads ----------------------------------------------------------------


@dataclass
class AudioContent:
    artiste: Optional[str] = None
    song_title: Optional[str] = None
    genre: Optional[str] = None
    extra: dict[str, str] = field(default_factory=dict)


@dataclass
class DataContent:
    content_kind: str = ""
    name: str = ""
    uri: Optional[str] = None
    extra: dict[str, str] = field(default_factory=dict)


@dataclass
class HardwareControl:
    actions: list[Action] = field(default_factory=list)


@dataclass(frozen=True)
class TriggerClause:
    """One conjunct of a behaviour trigger.

    field_path addresses a content field ("audioContent.artiste",
    "dataContent.name", extras by tag name); match is "equals"
    (case-sensitive, field must exist) or "contains" (case-insensitive
    substring).
    """

    field_path: str
    match: str
    value: str


@dataclass
class BehaviourDef:
    behaviour_id: str
    trigger: list[TriggerClause] = field(default_factory=list)
    reactions: list[Reaction] = field(default_factory=list)


Payload = Union[AudioContent, DataContent, HardwareControl, list[BehaviourDef]]


@dataclass
class DabmlMessage:
    header_entries: dict[str, str] = field(default_factory=dict)
    payload: Optional[Payload] = None


def make_reply(
    status: str,
    detail: Optional[str] = None,
    payload: Optional[Payload] = None,
    extra_headers: Optional[dict[str, str]] = None,
) -> DabmlMessage:
    """Build a status reply envelope (status "ok" or "error")."""
    headers = {"status": status}
    if detail is not None:
        headers["detail"] = detail
    if extra_headers:
        headers.update(extra_headers)
    return DabmlMessage(header_entries=headers, payload=payload)


def make_content_query(kind: str = "audio") -> DabmlMessage:
    """Build the query envelope asking for the latest decoded content."""
    return DabmlMessage(header_entries={"request": "contentInfo", "kind": kind})


# --- validation --------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


def _check_tag_name(name: str, path: str, out: list[Violation]) -> None:
    if not _TAG_NAME.match(name):
        out.append(Violation(path, f"{name!r} is not a usable XML tag name"))


def _validate_action(action: Action, path: str, out: list[Violation]) -> None:
    if isinstance(action, SetVolume):
        if not 0 <= action.level <= 100:
            out.append(Violation(f"{path}.level", f"volume {action.level} not in 0..100"))
    elif isinstance(action, SelectSubchannel):
        if not 0 <= action.subchannel_id <= 63:
            out.append(
                Violation(f"{path}.subchannel_id", f"subchannel {action.subchannel_id} not in 0..63")
            )
    elif isinstance(action, TuneEnsemble):
        if not action.label:
            out.append(Violation(f"{path}.label", "ensemble label must be non-empty"))
    elif isinstance(action, RecordStart):
        if not 0 <= action.subchannel_id <= 63:
            out.append(
                Violation(f"{path}.subchannel_id", f"subchannel {action.subchannel_id} not in 0..63")
            )
        if not action.destination:
            out.append(Violation(f"{path}.destination", "destination must be non-empty"))
    elif isinstance(action, (RecordStop, AfcAdjust)):
        pass
    else:
        out.append(Violation(path, f"unknown action type {type(action).__name__}"))


def validate_behaviour(definition: BehaviourDef, prefix: str = "") -> list[Violation]:
    out: list[Violation] = []
    if not definition.behaviour_id:
        out.append(Violation(f"{prefix}behaviour_id", "behaviour id must be non-empty"))
    if not definition.trigger:
        out.append(Violation(f"{prefix}trigger", "trigger must have at least one clause"))
    for i, clause in enumerate(definition.trigger):
        path = f"{prefix}trigger[{i}]"
        if clause.match not in ("equals", "contains"):
            out.append(Violation(f"{path}.match", f"unknown match kind {clause.match!r}"))
        root = clause.field_path.split(".", 1)[0]
        if root not in ("audioContent", "dataContent") or "." not in clause.field_path:
            out.append(
                Violation(
                    f"{path}.field_path",
                    "must address an audioContent or dataContent field",
                )
            )
    if not definition.reactions:
        out.append(Violation(f"{prefix}reactions", "reactions must be non-empty"))
    for j, reaction in enumerate(definition.reactions):
        path = f"{prefix}reactions[{j}]"
        if isinstance(reaction, Device):
            _validate_action(reaction.action, path, out)
        elif isinstance(reaction, SaveToDisk):
            if not reaction.destination:
                out.append(Violation(f"{path}.destination", "destination must be non-empty"))
        elif isinstance(reaction, Notify):
            pass
        else:
            out.append(Violation(path, f"unknown reaction type {type(reaction).__name__}"))
    return out


def validate(msg: DabmlMessage) -> list[Violation]:
    """Collect every invariant violation; an empty list means valid."""
    out: list[Violation] = []
    for key in msg.header_entries:
        _check_tag_name(key, f"header.{key}", out)
    payload = msg.payload
    if payload is None:
        return out
    if isinstance(payload, AudioContent):
        if (
            payload.artiste is None
            and payload.song_title is None
            and payload.genre is None
            and not payload.extra
        ):
            out.append(Violation("audioContent", "at least one descriptive field required"))
        for key in payload.extra:
            _check_tag_name(key, f"audioContent.{key}", out)
            if key in ("artiste", "songTitle", "genre"):
                out.append(Violation(f"audioContent.{key}", "extra shadows a schema field"))
    elif isinstance(payload, DataContent):
        if not payload.name:
            out.append(Violation("dataContent.name", "name must be non-empty"))
        for key in payload.extra:
            _check_tag_name(key, f"dataContent.{key}", out)
            if key in ("contentKind", "name", "uri"):
                out.append(Violation(f"dataContent.{key}", "extra shadows a schema field"))
    elif isinstance(payload, HardwareControl):
        if not payload.actions:
            out.append(Violation("actions", "at least one action required"))
        for i, action in enumerate(payload.actions):
            _validate_action(action, f"actions[{i}]", out)
    elif isinstance(payload, list):
        if not payload:
            out.append(Violation("behaviours", "at least one behaviour required"))
        for i, definition in enumerate(payload):
            if not isinstance(definition, BehaviourDef):
                out.append(Violation(f"behaviours[{i}]", "not a behaviour definition"))
                continue
            out.extend(validate_behaviour(definition, f"behaviours[{i}]."))
    else:
        out.append(Violation("payload", f"unknown payload type {type(payload).__name__}"))
    return out


# --- serialization -----------------------------------------------------------

_ACTION_TAGS = {
    SetVolume: "setVolume",
    SelectSubchannel: "selectSubchannel",
    TuneEnsemble: "tuneEnsemble",
    RecordStart: "recordStart",
    RecordStop: "recordStop",
    AfcAdjust: "afcAdjust",
}


def _action_element(action: Action) -> ET.Element:
    tag = _ACTION_TAGS[type(action)]
    elem = ET.Element(tag)
    if isinstance(action, SetVolume):
        elem.set("level", str(action.level))
    elif isinstance(action, SelectSubchannel):
        elem.set("id", str(action.subchannel_id))
    elif isinstance(action, TuneEnsemble):
        elem.set("label", action.label)
    elif isinstance(action, RecordStart):
        elem.set("subchannel", str(action.subchannel_id))
        elem.set("destination", action.destination)
    elif isinstance(action, AfcAdjust):
        elem.set("offset", str(action.offset))
    return elem


def _text_child(parent: ET.Element, tag: str, text: str) -> None:
    child = ET.SubElement(parent, tag)
    child.text = text


def _payload_element(payload: Payload) -> ET.Element:
    if isinstance(payload, AudioContent):
        elem = ET.Element("audioContent")
        if payload.artiste is not None:
            _text_child(elem, "artiste", payload.artiste)
        if payload.song_title is not None:
            _text_child(elem, "songTitle", payload.song_title)
        if payload.genre is not None:
            _text_child(elem, "genre", payload.genre)
        for key, value in payload.extra.items():
            _text_child(elem, key, value)
        return elem
    if isinstance(payload, DataContent):
        elem = ET.Element("dataContent")
        _text_child(elem, "contentKind", payload.content_kind)
        _text_child(elem, "name", payload.name)
        if payload.uri is not None:
            _text_child(elem, "uri", payload.uri)
        for key, value in payload.extra.items():
            _text_child(elem, key, value)
        return elem
    if isinstance(payload, HardwareControl):
        elem = ET.Element("hardwareControl")
        for action in payload.actions:
            elem.append(_action_element(action))
        return elem
    if isinstance(payload, list):
        elem = ET.Element("behaviours")
        for definition in payload:
            b = ET.SubElement(elem, "behaviour", {"id": definition.behaviour_id})
            for clause in definition.trigger:
                ET.SubElement(
                    b,
                    "when",
                    {"field": clause.field_path, "match": clause.match, "value": clause.value},
                )
            for reaction in definition.reactions:
                if isinstance(reaction, Device):
                    wrap = ET.SubElement(b, "device")
                    wrap.append(_action_element(reaction.action))
                elif isinstance(reaction, SaveToDisk):
                    ET.SubElement(b, "saveToDisk", {"destination": reaction.destination})
                elif isinstance(reaction, Notify):
                    ET.SubElement(b, "notify", {"text": reaction.text})
        return elem
    raise TypeError(f"cannot serialize payload of type {type(payload).__name__}")


def serialize_envelope(msg: DabmlMessage) -> bytes:
    """Serialize a message as a UTF-8 SOAP envelope.

    The message is assumed valid (see :func:`validate`); serialization
    itself cannot fail on a valid message.
    """
    env = ET.Element(
        f"{{{SOAP_ENV_NS}}}Envelope",
        {f"{{{SOAP_ENV_NS}}}encodingStyle": SOAP_ENCODING},
    )
    header = ET.SubElement(env, f"{{{SOAP_ENV_NS}}}Header")
    for key, value in msg.header_entries.items():
        _text_child(header, key, value)
    body = ET.SubElement(env, f"{{{SOAP_ENV_NS}}}Body")
    dab = ET.SubElement(body, f"{{{DABML_NS}}}DAB")
    if msg.payload is not None:
        dab.append(_payload_element(msg.payload))
    return ET.tostring(env, encoding="unicode").encode("utf-8")


# --- parsing -----------------------------------------------------------------


def _local(tag: object) -> str:
    if not isinstance(tag, str):
        return ""
    return tag.rsplit("}", 1)[-1]


def _namespace(tag: str) -> Optional[str]:
    if tag.startswith("{"):
        return tag[1:].rsplit("}", 1)[0]
    return None


def _require_attr(elem: ET.Element, name: str) -> str:
    value = elem.get(name)
    if value is None:
        raise SchemaViolation(f"<{_local(elem.tag)}> is missing attribute {name!r}")
    return value


def _int_attr(elem: ET.Element, name: str) -> int:
    raw = _require_attr(elem, name)
    try:
        return int(raw)
    except ValueError:
        raise SchemaViolation(f"<{_local(elem.tag)}> attribute {name}={raw!r} is not an integer")


def _parse_action(elem: ET.Element) -> Action:
    name = _local(elem.tag)
    if name == "setVolume":
        return SetVolume(level=_int_attr(elem, "level"))
    if name == "selectSubchannel":
        return SelectSubchannel(subchannel_id=_int_attr(elem, "id"))
    if name == "tuneEnsemble":
        return TuneEnsemble(label=_require_attr(elem, "label"))
    if name == "recordStart":
        return RecordStart(
            subchannel_id=_int_attr(elem, "subchannel"),
            destination=_require_attr(elem, "destination"),
        )
    if name == "recordStop":
        return RecordStop()
    if name == "afcAdjust":
        return AfcAdjust(offset=_int_attr(elem, "offset"))
    raise SchemaViolation(f"unknown action element <{name}>")


def _parse_audio_content(elem: ET.Element) -> AudioContent:
    payload = AudioContent()
    for child in elem:
        name = _local(child.tag)
        text = child.text or ""
        if name == "artiste":
            payload.artiste = text
        elif name == "songTitle":
            payload.song_title = text
        elif name == "genre":
            payload.genre = text
        else:
            payload.extra[name] = text
    return payload


def _parse_data_content(elem: ET.Element) -> DataContent:
    payload = DataContent()
    saw_uri = False
    for child in elem:
        name = _local(child.tag)
        text = child.text or ""
        if name == "contentKind":
            payload.content_kind = text
        elif name == "name":
            payload.name = text
        elif name == "uri":
            payload.uri = text
            saw_uri = True
        else:
            payload.extra[name] = text
    if not saw_uri:
        payload.uri = None
    return payload


def _parse_behaviour(elem: ET.Element) -> BehaviourDef:
    definition = BehaviourDef(behaviour_id=_require_attr(elem, "id"))
    for child in elem:
        name = _local(child.tag)
        if name == "when":
            definition.trigger.append(
                TriggerClause(
                    field_path=_require_attr(child, "field"),
                    match=_require_attr(child, "match"),
                    value=_require_attr(child, "value"),
                )
            )
        elif name == "device":
            actions = list(child)
            if len(actions) != 1:
                raise SchemaViolation("<device> must wrap exactly one action element")
            definition.reactions.append(Device(action=_parse_action(actions[0])))
        elif name == "saveToDisk":
            definition.reactions.append(SaveToDisk(destination=_require_attr(child, "destination")))
        elif name == "notify":
            definition.reactions.append(Notify(text=_require_attr(child, "text")))
        else:
            raise SchemaViolation(f"unknown behaviour element <{name}>")
    return definition


def _parse_payload(elem: ET.Element) -> Payload:
    name = _local(elem.tag)
    if name == "audioContent":
        return _parse_audio_content(elem)
    if name == "dataContent":
        return _parse_data_content(elem)
    if name == "hardwareControl":
        return HardwareControl(actions=[_parse_action(child) for child in elem])
    if name == "behaviours":
        defs = []
        for child in elem:
            if _local(child.tag) != "behaviour":
                raise SchemaViolation(f"unexpected element <{_local(child.tag)}> in behaviours")
            defs.append(_parse_behaviour(child))
        return defs
    raise UnknownPayload(f"<{name}> is not a DABml payload element")


def parse_envelope(data: bytes) -> DabmlMessage:
    """Parse an envelope; inverse of :func:`serialize_envelope`.

    Tolerates whitespace, attribute order and namespace-prefix choice.
    Raises MalformedXml, MissingBody, UnknownPayload or SchemaViolation.
    """
    if isinstance(data, str):
        data = data.encode("utf-8")
    if not data or not data.strip():
        raise MalformedXml("empty request body")
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise MalformedXml(f"not well-formed XML: {exc}") from exc
    if root.tag != f"{{{SOAP_ENV_NS}}}Envelope":
        raise MalformedXml(f"root element <{_local(root.tag)}> is not a SOAP Envelope")

    header_entries: dict[str, str] = {}
    body: Optional[ET.Element] = None
    for child in root:
        name = _local(child.tag)
        if name == "Header":
            for entry in child:
                header_entries[_local(entry.tag)] = entry.text or ""
        elif name == "Body" and body is None:
            body = child
    if body is None:
        raise MissingBody("envelope has no Body element")

    body_children = list(body)
    if not body_children:
        raise MissingBody("Body element is empty")
    if len(body_children) > 1:
        raise SchemaViolation("Body must hold a single DAB element")
    dab = body_children[0]
    if _local(dab.tag) != "DAB" or _namespace(dab.tag) not in (DABML_NS, None):
        raise UnknownPayload(f"Body child <{_local(dab.tag)}> is not a dabml DAB element")

    payload_elems = list(dab)
    if len(payload_elems) > 1:
        raise SchemaViolation("DAB element holds more than one payload")
    payload = _parse_payload(payload_elems[0]) if payload_elems else None

    msg = DabmlMessage(header_entries=header_entries, payload=payload)
    violations = validate(msg)
    if violations:
        raise SchemaViolation("; ".join(str(v) for v in violations))
    return msg
