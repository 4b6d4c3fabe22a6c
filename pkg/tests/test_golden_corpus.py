"""The client-envelope corpus is shared with the browser console; the
serializer must keep reproducing it byte-for-byte."""

from dabxml import dabml
from dabxml.dabml import (
    BehaviourDef,
    DabmlMessage,
    Device,
    HardwareControl,
    SaveToDisk,
    SelectSubchannel,
    SetVolume,
    TriggerClause,
)

CORPUS = {
    "content_query_audio.xml": dabml.make_content_query("audio"),
    "content_query_data.xml": dabml.make_content_query("data"),
    "set_volume_80.xml": DabmlMessage(payload=HardwareControl([SetVolume(80)])),
    "select_subchannel_2.xml": DabmlMessage(payload=HardwareControl([SelectSubchannel(2)])),
    "add_behaviour_volume80_on_abba.xml": DabmlMessage(
        payload=[
            BehaviourDef(
                behaviour_id="vol80-on-abba",
                trigger=[TriggerClause("audioContent.artiste", "equals", "ABBA")],
                reactions=[Device(SetVolume(80)), SaveToDisk("abba-object")],
            )
        ]
    ),
}


def test_corpus_is_reproduced_exactly(golden_dir):
    for name, message in CORPUS.items():
        frozen = (golden_dir / "envelopes" / name).read_bytes()
        assert dabml.serialize_envelope(message) == frozen, name


def test_corpus_parses_back(golden_dir):
    for name, message in CORPUS.items():
        frozen = (golden_dir / "envelopes" / name).read_bytes()
        assert dabml.parse_envelope(frozen) == message, name
