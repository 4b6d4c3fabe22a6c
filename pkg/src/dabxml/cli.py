"""dabxml command line.

    dabxml broadcast --scenario FILE --out FILE|tcp:HOST:PORT
    dabxml inspect --in FILE
    dabxml serve [--config FILE] [overrides...]
    dabxml client --server URL COMMAND [...]

``serve`` runs the receiver server with its HTTP endpoints; ``client`` is a
thin HTTP client that composes DABml envelopes and prints the reply status.
"""

from __future__ import annotations

import argparse
import socket
import sys
from pathlib import Path
from typing import Optional

from . import dabml
from .broadcast import ScenarioError, ScheduleOverflow, inspect_stream, load_scenario, run_broadcast


def _add_broadcast(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("broadcast", help="emit a scenario as a transmission-frame stream")
    p.add_argument("--scenario", required=True, help="scenario file")
    p.add_argument("--out", required=True, help="output file path or tcp:HOST:PORT")
    p.add_argument("--pad-capacity", type=int, default=None, help="override scenario PAD capacity")
    p.add_argument("--segment-size", type=int, default=None, help="override scenario segment size")
    p.add_argument("--fps", type=float, default=0.0, help="throttle to N frames per second")


def _add_inspect(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("inspect", help="describe a recorded frame stream")
    p.add_argument("--in", dest="input", required=True, help="stream file")


def _add_serve(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("serve", help="run the receiver server")
    p.add_argument("--config", default=None, help="YAML config file")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--input", default=None, help="broadcast source: file:PATH or tcp-listen:PORT")
    p.add_argument("--subchannel", type=int, default=None, help="watched subchannel")
    p.add_argument("--pad-capacity", type=int, default=None)
    p.add_argument("--segment-size", type=int, default=None)
    p.add_argument("--output-dir", default=None, help="directory for saved objects")


def _add_client(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("client", help="talk to a running receiver server")
    p.add_argument("--server", default="http://127.0.0.1:8321", help="server base URL")
    cmds = p.add_subparsers(dest="client_command", required=True)
    cmds.add_parser("state", help="GET /state")
    cmds.add_parser("events", help="GET /events")
    c = cmds.add_parser("content", help="query the latest decoded content")
    c.add_argument("--kind", choices=["audio", "data"], default="audio")
    c = cmds.add_parser("volume", help="set the volume")
    c.add_argument("level", type=int)
    c = cmds.add_parser("select", help="select a subchannel")
    c.add_argument("subchannel", type=int)
    c = cmds.add_parser("tune", help="tune to an ensemble")
    c.add_argument("label")
    c = cmds.add_parser("record-start")
    c.add_argument("subchannel", type=int)
    c.add_argument("destination")
    cmds.add_parser("record-stop")
    c = cmds.add_parser("afc", help="adjust the AFC offset")
    c.add_argument("offset", type=int)
    c = cmds.add_parser("add-behaviour", help="POST a behaviours envelope file")
    c.add_argument("file")
    c = cmds.add_parser("remove-behaviour")
    c.add_argument("id")
    cmds.add_parser("list-behaviours")
    c = cmds.add_parser("send", help="POST a raw envelope file")
    c.add_argument("file")


def _open_sink(spec: str):
    if spec.startswith("tcp:"):
        _, host, port = spec.split(":", 2)
        conn = socket.create_connection((host, int(port)))
        return conn.makefile("wb"), conn.close
    f = open(spec, "wb")
    return f, lambda: None


def _cmd_broadcast(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    if args.pad_capacity is not None:
        scenario.pad_capacity = args.pad_capacity
    if args.segment_size is not None:
        scenario.segment_size = args.segment_size
    sink, close = _open_sink(args.out)
    try:
        count = run_broadcast(scenario, sink, pace_fps=args.fps)
    finally:
        sink.close()
        close()
    print(f"wrote {count} frames to {args.out}")
    return 0


def _cmd_inspect(args: argparse.Namespace) -> int:
    with open(args.input, "rb") as stream:
        sys.stdout.write(inspect_stream(stream))
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .config import load_config
    from .receiver import ReceiverServer
    from .service import create_app

    config = load_config(
        args.config,
        overrides={
            "port": args.port,
            "input": args.input,
            "watched_subchannel": args.subchannel,
            "pad_capacity": args.pad_capacity,
            "segment_size": args.segment_size,
            "output_dir": args.output_dir,
        },
    )
    server = ReceiverServer(config)
    server.start()
    try:
        if server.input_port is not None:
            print(f"broadcast input listening on tcp port {server.input_port}")
        uvicorn.run(create_app(server), host=args.host, port=config.port, log_level="warning")
    finally:
        server.stop()
    return 0


def _client_message(args: argparse.Namespace) -> Optional[dabml.DabmlMessage]:
    cmd = args.client_command
    if cmd == "content":
        return dabml.make_content_query(args.kind)
    if cmd == "volume":
        return dabml.DabmlMessage(payload=dabml.HardwareControl([dabml.SetVolume(args.level)]))
    if cmd == "select":
        return dabml.DabmlMessage(
            payload=dabml.HardwareControl([dabml.SelectSubchannel(args.subchannel)])
        )
    if cmd == "tune":
        return dabml.DabmlMessage(payload=dabml.HardwareControl([dabml.TuneEnsemble(args.label)]))
    if cmd == "record-start":
        return dabml.DabmlMessage(
            payload=dabml.HardwareControl([dabml.RecordStart(args.subchannel, args.destination)])
        )
    if cmd == "record-stop":
        return dabml.DabmlMessage(payload=dabml.HardwareControl([dabml.RecordStop()]))
    if cmd == "afc":
        return dabml.DabmlMessage(payload=dabml.HardwareControl([dabml.AfcAdjust(args.offset)]))
    if cmd == "remove-behaviour":
        return dabml.DabmlMessage(header_entries={"request": "removeBehaviour", "id": args.id})
    if cmd == "list-behaviours":
        return dabml.DabmlMessage(header_entries={"request": "listBehaviours"})
    return None


def _cmd_client(args: argparse.Namespace) -> int:
    import httpx

    base = args.server.rstrip("/")
    if args.client_command in ("state", "events"):
        response = httpx.get(f"{base}/{args.client_command}", timeout=10)
        print(response.text.rstrip("\n"))
        return 0 if response.status_code == 200 else 2
    if args.client_command in ("add-behaviour", "send"):
        raw = Path(args.file).read_bytes()
    else:
        message = _client_message(args)
        assert message is not None
        raw = dabml.serialize_envelope(message)
    response = httpx.post(
        f"{base}/dabml", content=raw, headers={"content-type": "text/xml"}, timeout=10
    )
    reply = dabml.parse_envelope(response.content)
    status = reply.header_entries.get("status", "?")
    detail = reply.header_entries.get("detail", "")
    print(f"status: {status}" + (f"  {detail}" if detail else ""))
    if isinstance(reply.payload, dabml.AudioContent):
        print(
            f"audioContent: artiste={reply.payload.artiste!r} "
            f"songTitle={reply.payload.song_title!r} genre={reply.payload.genre!r}"
        )
    elif isinstance(reply.payload, dabml.DataContent):
        print(
            f"dataContent: kind={reply.payload.content_kind!r} "
            f"name={reply.payload.name!r} uri={reply.payload.uri!r}"
        )
    elif isinstance(reply.payload, list):
        for definition in reply.payload:
            print(f"behaviour: {definition.behaviour_id}")
    return 0 if status == "ok" else 2


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="dabxml", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    _add_broadcast(sub)
    _add_inspect(sub)
    _add_serve(sub)
    _add_client(sub)
    args = parser.parse_args(argv)
    handlers = {
        "broadcast": _cmd_broadcast,
        "inspect": _cmd_inspect,
        "serve": _cmd_serve,
        "client": _cmd_client,
    }
    try:
        return handlers[args.command](args)
    except (ScenarioError, ScheduleOverflow, OSError, dabml.DabmlError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
