import pathlib
import socket
import subprocess
import sys
import time

import httpx
import pytest

from dabxml import dabml
from dabxml.cli import main

REPO = pathlib.Path(__file__).parent.parent
SCENARIO = REPO / "scenarios" / "abba.scenario"


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


class TestBroadcastInspect:
    def test_broadcast_then_inspect(self, tmp_path, capsys):
        out = tmp_path / "abba.dabs"
        assert main(["broadcast", "--scenario", str(SCENARIO), "--out", str(out)]) == 0
        assert out.stat().st_size > 0
        assert "wrote 60 frames" in capsys.readouterr().out

        assert main(["inspect", "--in", str(out)]) == 0
        report = capsys.readouterr().out
        assert "MOT objects reassembled: 2" in report
        assert "ContentName=TEXT/XML" in report

    def test_broadcast_missing_scenario(self, tmp_path, capsys):
        code = main(["broadcast", "--scenario", "nope.scenario", "--out", str(tmp_path / "x")])
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_overrides(self, tmp_path, capsys):
        out = tmp_path / "abba.dabs"
        code = main(
            [
                "broadcast",
                "--scenario",
                str(SCENARIO),
                "--out",
                str(out),
                "--pad-capacity",
                "128",
            ]
        )
        assert code == 0


@pytest.fixture(scope="module")
def live_server(tmp_path_factory):
    """A real `dabxml serve` process fed from a broadcast stream file."""
    tmp_path = tmp_path_factory.mktemp("cli")
    stream = tmp_path / "abba.dabs"
    assert main(["broadcast", "--scenario", str(SCENARIO), "--out", str(stream)]) == 0
    port = free_port()
    proc = subprocess.Popen(
        [
            sys.executable,
            "-m",
            "dabxml.cli",
            "serve",
            "--port",
            str(port),
            "--input",
            f"file:{stream}",
            "--output-dir",
            str(tmp_path / "received"),
        ],
        stdout=subprocess.DEVNULL,
        stderr=subprocess.DEVNULL,
    )
    base = f"http://127.0.0.1:{port}"
    try:
        deadline = time.monotonic() + 10
        while time.monotonic() < deadline:
            try:
                if httpx.get(f"{base}/state", timeout=1).status_code == 200:
                    break
            except httpx.TransportError:
                time.sleep(0.1)
        else:
            raise RuntimeError("server did not come up")
        yield base
    finally:
        proc.terminate()
        proc.wait(timeout=10)


class TestThinClient:
    def test_volume_and_state(self, live_server, capsys):
        assert main(["client", "--server", live_server, "volume", "55"]) == 0
        assert "status: ok" in capsys.readouterr().out
        assert main(["client", "--server", live_server, "state"]) == 0
        assert "<volume>55</volume>" in capsys.readouterr().out

    def test_content_query(self, live_server, capsys):
        deadline = time.monotonic() + 5
        while time.monotonic() < deadline:
            main(["client", "--server", live_server, "content", "--kind", "audio"])
            out = capsys.readouterr().out
            if "ABBA" in out:
                break
            time.sleep(0.1)
        assert "artiste='ABBA'" in out

    def test_select_error_reply(self, live_server, capsys):
        code = main(["client", "--server", live_server, "select", "9"])
        assert code == 2
        assert "status: error" in capsys.readouterr().out

    def test_add_and_list_behaviours(self, live_server, capsys, golden_dir):
        envelope = golden_dir / "envelopes" / "add_behaviour_volume80_on_abba.xml"
        assert main(["client", "--server", live_server, "add-behaviour", str(envelope)]) == 0
        assert "vol80-on-abba" in capsys.readouterr().out
        assert main(["client", "--server", live_server, "list-behaviours"]) == 0
        assert "behaviour: vol80-on-abba" in capsys.readouterr().out

    def test_events(self, live_server, capsys):
        assert main(["client", "--server", live_server, "events"]) == 0
        assert "XmlMessageDecoded" in capsys.readouterr().out
