import warnings

import pytest

with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    from fastapi.testclient import TestClient

from dabxml import broadcast, dabml
from dabxml.config import ServerConfig
from dabxml.receiver import ReceiverServer
from dabxml.service import create_app

from test_receiver import abba_scenario, server_config, wait_until


@pytest.fixture
def served(tmp_path):
    frames_list = broadcast.build_frames(abba_scenario())
    server = ReceiverServer(server_config(tmp_path), frame_source=iter(frames_list))
    server.start()
    client = TestClient(create_app(server))
    yield server, client
    server.stop()


def test_post_dabml_control(served):
    server, client = served
    raw = dabml.serialize_envelope(
        dabml.DabmlMessage(payload=dabml.HardwareControl([dabml.SetVolume(66)]))
    )
    response = client.post("/dabml", content=raw, headers={"content-type": "text/xml"})
    assert response.status_code == 200
    assert response.headers["content-type"].startswith("text/xml")
    reply = dabml.parse_envelope(response.content)
    assert reply.header_entries["status"] == "ok"
    assert server.state_snapshot().volume == 66


def test_post_dabml_non_xml_keeps_serving(served):
    server, client = served
    response = client.post("/dabml", content=b"\x00\x01garbage")
    reply = dabml.parse_envelope(response.content)
    assert reply.header_entries["status"] == "error"
    again = client.post(
        "/dabml", content=dabml.serialize_envelope(dabml.make_content_query())
    )
    assert dabml.parse_envelope(again.content).header_entries["status"] == "ok"


def test_get_state_xml(served):
    server, client = served
    response = client.get("/state")
    assert response.status_code == 200
    body = response.text
    assert "<receiverState>" in body
    assert "<volume>40</volume>" in body


def test_get_events_plaintext_newest_last(served):
    server, client = served
    for level in (10, 20):
        client.post(
            "/dabml",
            content=dabml.serialize_envelope(
                dabml.DabmlMessage(payload=dabml.HardwareControl([dabml.SetVolume(level)]))
            ),
        )
    wait_until(lambda: server.state_snapshot().volume == 20)
    lines = client.get("/events").text.strip().splitlines()
    hw = [l for l in lines if "HardwareResult" in l]
    assert len(hw) >= 2
    assert "volume set to 10" in hw[-2]
    assert "volume set to 20" in hw[-1]
    # ISO-8601 timestamp prefix
    assert hw[-1].split(" ")[0].startswith("20")


def test_content_query_over_http(served):
    server, client = served
    assert wait_until(lambda: server.latest_content("audio") is not None)
    response = client.post(
        "/dabml", content=dabml.serialize_envelope(dabml.make_content_query("audio"))
    )
    reply = dabml.parse_envelope(response.content)
    assert isinstance(reply.payload, dabml.AudioContent)
    assert reply.payload.artiste == "ABBA"
    assert reply.payload.song_title == "Dancing Queen"
