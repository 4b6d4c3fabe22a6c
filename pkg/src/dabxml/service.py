"""HTTP surface for the receiver server.

POST /dabml takes a DABml envelope (text/xml) and returns the reply
envelope; GET /events returns the plain-text event log (one line per event,
ISO-8601 timestamp first, newest last); GET /state returns an XML snapshot
of the receiver state. CORS is open so the browser console can poll from
anywhere.
"""

from __future__ import annotations

from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import PlainTextResponse
from starlette.concurrency import run_in_threadpool

from .receiver import ReceiverServer


def create_app(server: ReceiverServer) -> FastAPI:
    app = FastAPI(title="DAB receiver server", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.post("/dabml")
    async def post_dabml(request: Request) -> Response:
        body = await request.body()
        reply = await run_in_threadpool(server.handle_client_request, body)
        return Response(content=reply, media_type="text/xml")

    @app.get("/events")
    def get_events() -> PlainTextResponse:
        return PlainTextResponse(server.events_text())

    @app.get("/state")
    def get_state() -> Response:
        return Response(content=server.state_xml(), media_type="text/xml")

    return app
