"""Behaviour store and trigger matching.

Behaviours map received content to reactions: a behaviour fires when all of
its trigger clauses hold against an audioContent/dataContent message, and
its reactions are then emitted in definition order. The store keeps
insertion order so reaction dispatch is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional

from .dabml import (
    AudioContent,
    BehaviourDef,
    DabmlMessage,
    DataContent,
    Reaction,
    validate_behaviour,
)


class BehaviourError(Exception):
    pass


class DuplicateId(BehaviourError):
    pass


class InvalidDefinition(BehaviourError):
    pass


class NotFound(BehaviourError):
    pass


@dataclass(frozen=True)
class FiredReaction:
    behaviour_id: str
    reaction: Reaction
    triggering_message: DabmlMessage


class BehaviourStore:
    """Insertion-ordered behaviour registry, owned by the server main thread."""

    def __init__(self) -> None:
        self._defs: dict[str, BehaviourDef] = {}

    def __len__(self) -> int:
        return len(self._defs)

    def __iter__(self) -> Iterator[BehaviourDef]:
        return iter(self._defs.values())

    def __contains__(self, behaviour_id: str) -> bool:
        return behaviour_id in self._defs

    def get(self, behaviour_id: str) -> Optional[BehaviourDef]:
        return self._defs.get(behaviour_id)

    def ids(self) -> list[str]:
        return list(self._defs)

    def add(self, definition: BehaviourDef) -> str:
        """Add a behaviour; returns its id as the acknowledgment."""
        violations = validate_behaviour(definition)
        if violations:
            raise InvalidDefinition("; ".join(str(v) for v in violations))
        if definition.behaviour_id in self._defs:
            raise DuplicateId(f"behaviour {definition.behaviour_id!r} already defined")
        self._defs[definition.behaviour_id] = definition
        return definition.behaviour_id

    def remove(self, behaviour_id: str) -> str:
        if behaviour_id not in self._defs:
            raise NotFound(f"behaviour {behaviour_id!r} is not defined")
        del self._defs[behaviour_id]
        return behaviour_id


_AUDIO_FIELDS = {"artiste": "artiste", "songTitle": "song_title", "genre": "genre"}
_DATA_FIELDS = {"contentKind": "content_kind", "name": "name", "uri": "uri"}


def message_field(msg: DabmlMessage, field_path: str) -> Optional[str]:
    """Resolve a trigger field path against a content message.

    Returns None when the path does not apply (wrong payload kind, unknown
    or absent field).
    """
    root, _, leaf = field_path.partition(".")
    if not leaf:
        return None
    payload = msg.payload
    if root == "audioContent" and isinstance(payload, AudioContent):
        if leaf in _AUDIO_FIELDS:
            return getattr(payload, _AUDIO_FIELDS[leaf])
        return payload.extra.get(leaf)
    if root == "dataContent" and isinstance(payload, DataContent):
        if leaf in _DATA_FIELDS:
            return getattr(payload, _DATA_FIELDS[leaf])
        return payload.extra.get(leaf)
    return None


def _clause_holds(msg: DabmlMessage, clause) -> bool:
    value = message_field(msg, clause.field_path)
    if value is None:
        return False
    if clause.match == "equals":
        return value == clause.value
    if clause.match == "contains":
        return clause.value.lower() in value.lower()
    return False


def match_message(store: BehaviourStore, msg: DabmlMessage) -> list[FiredReaction]:
    """Return the reactions of every behaviour whose trigger fully matches.

    Only audioContent/dataContent payloads can match; anything else yields
    no reactions. Pure: neither the store nor the message is changed.
    """
    if not isinstance(msg.payload, (AudioContent, DataContent)):
        return []
    fired: list[FiredReaction] = []
    for definition in store:
        if all(_clause_holds(msg, clause) for clause in definition.trigger):
            for reaction in definition.reactions:
                fired.append(
                    FiredReaction(
                        behaviour_id=definition.behaviour_id,
                        reaction=reaction,
                        triggering_message=msg,
                    )
                )
    return fired
