"""Networked front door: session lifecycle, message exchange, memento
registration, profile/metrics/suggestion retrieval, and per-session event
streams.

Every response is an envelope {request_id, payload, error} with exactly one
of payload/error set. Request ids are a per-process counter so replayed
scripts produce byte-identical responses. Turns appended by a request are
also pushed verbatim on the session's event stream.
"""

from __future__ import annotations

import json
import queue
import threading
from collections import defaultdict
from pathlib import Path

from fastapi import FastAPI, Header, Request
from fastapi.responses import JSONResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .engine.engine import (
    SessionClosedError,
    SessionConflictError,
    UnknownMementoError,
    UnknownPersonError,
    UnknownSessionError,
)
from .engine.session import SessionError
from .mementos import Memento, unfilled_slots
from .metrics import compute_report
from .runtime import Runtime

SSE_KEEPALIVE_SECONDS = 15.0


class CreateSessionBody(BaseModel):
    person_id: str
    memento_id: str | None = None


class MessageBody(BaseModel):
    text: str


class RegisterMementoBody(BaseModel):
    owner: str
    media_kind: str = "picture"
    uri: str
    visibility: str = "private"
    feature_fixture: str | None = None


class EndSessionBody(BaseModel):
    rating: int | None = None


class _EventHub:
    """Per-session fan-out queues for the SSE streams."""

    def __init__(self):
        self._subscribers: dict[str, list[queue.Queue]] = defaultdict(list)
        self._lock = threading.Lock()

    def subscribe(self, session_id: str) -> queue.Queue:
        q: queue.Queue = queue.Queue()
        with self._lock:
            self._subscribers[session_id].append(q)
        return q

    def unsubscribe(self, session_id: str, q: queue.Queue) -> None:
        with self._lock:
            if q in self._subscribers.get(session_id, []):
                self._subscribers[session_id].remove(q)

    def publish(self, session_id: str, turn_doc: dict) -> None:
        with self._lock:
            targets = list(self._subscribers.get(session_id, []))
        for q in targets:
            q.put(turn_doc)


def create_app(runtime: Runtime, api_token: str | None = None, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="remi chat service", version="0.1.0")
    hub = _EventHub()
    request_counter = {"n": 0}
    counter_lock = threading.Lock()
    session_locks: dict[str, threading.Lock] = defaultdict(threading.Lock)
    create_lock = threading.Lock()

    def next_request_id() -> str:
        with counter_lock:
            request_counter["n"] += 1
            return f"r-{request_counter['n']:06d}"

    def envelope(payload: dict | None, error: dict | None = None, status: int = 200) -> JSONResponse:
        return JSONResponse(
            status_code=status,
            content={"request_id": next_request_id(), "payload": payload, "error": error},
        )

    def error_response(code: str, message: str, status: int) -> JSONResponse:
        return envelope(None, {"code": code, "message": message}, status)

    def check_token(given: str | None) -> JSONResponse | None:
        if api_token is not None and given != api_token:
            return error_response("unauthorized", "missing or invalid API token", 401)
        return None

    def memento_payload(memento: Memento) -> dict:
        doc = memento.to_doc()
        doc["unfilled_slots"] = unfilled_slots(memento)
        return doc

    def live_metrics(session_id: str) -> dict:
        session = runtime.engine.session(session_id)
        return compute_report(session, markers=runtime.baseline.detect_social_markers).to_doc()

    # -- endpoints ----------------------------------------------------------

    @app.post("/api/sessions")
    def create_session(body: CreateSessionBody, x_api_token: str | None = Header(default=None)):
        if (denied := check_token(x_api_token)) is not None:
            return denied
        try:
            with create_lock:
                session = runtime.start_session(body.person_id, body.memento_id)
        except UnknownPersonError:
            return error_response("person-not-found", f"unknown person: {body.person_id}", 404)
        except UnknownMementoError:
            return error_response("memento-not-found", f"unknown memento: {body.memento_id}", 404)
        except SessionConflictError as exc:
            return error_response("session-conflict", str(exc), 409)
        turns = [t.to_doc() for t in session.turns]
        for doc in turns:
            hub.publish(session.session_id, doc)
        return envelope({"session_id": session.session_id, "turns": turns}, status=201)

    @app.post("/api/sessions/{session_id}/messages")
    def post_message(session_id: str, body: MessageBody, x_api_token: str | None = Header(default=None)):
        if (denied := check_token(x_api_token)) is not None:
            return denied
        if not body.text.strip():
            return error_response("validation-error", "message text must be non-empty", 422)
        try:
            with session_locks[session_id]:
                session, new_turns = runtime.process_user_turn(session_id, body.text)
        except UnknownSessionError:
            return error_response("session-not-found", f"unknown session: {session_id}", 404)
        except SessionClosedError as exc:
            return error_response("session-closed", str(exc), 409)
        turn_docs = [t.to_doc() for t in new_turns]
        for doc in turn_docs:
            hub.publish(session_id, doc)
        memento = (
            memento_payload(runtime.engine.memento(session.active_memento))
            if session.active_memento
            else None
        )
        return envelope(
            {
                "session_id": session_id,
                "turns": turn_docs,
                "active_memento": memento,
                "metrics": live_metrics(session_id),
            }
        )

    @app.post("/api/mementos")
    def register_memento(body: RegisterMementoBody, x_api_token: str | None = Header(default=None)):
        if (denied := check_token(x_api_token)) is not None:
            return denied
        try:
            memento, flagged = runtime.register_memento(
                body.owner, body.media_kind, body.uri, body.visibility, body.feature_fixture
            )
        except UnknownPersonError:
            return error_response("person-not-found", f"unknown person: {body.owner}", 404)
        except ValueError as exc:
            return error_response("validation-error", str(exc), 422)
        payload = {"memento": memento_payload(memento), "adapter_unavailable": flagged}
        return envelope(payload, status=201)

    @app.get("/api/mementos/{memento_id}")
    def get_memento(memento_id: str, x_api_token: str | None = Header(default=None)):
        if (denied := check_token(x_api_token)) is not None:
            return denied
        try:
            memento = runtime.engine.memento(memento_id)
        except UnknownMementoError:
            return error_response("memento-not-found", f"unknown memento: {memento_id}", 404)
        return envelope({"memento": memento_payload(memento)})

    @app.get("/api/people/{person_id}/profile")
    def get_profile(person_id: str, x_api_token: str | None = Header(default=None)):
        if (denied := check_token(x_api_token)) is not None:
            return denied
        doc = runtime.store.get(f"profiles/{person_id}")
        if doc is None:
            return error_response("person-not-found", f"unknown person: {person_id}", 404)
        return envelope({"profile": doc})

    @app.get("/api/people/{person_id}/suggestions")
    def get_suggestions(person_id: str, x_api_token: str | None = Header(default=None)):
        if (denied := check_token(x_api_token)) is not None:
            return denied
        try:
            ranked = runtime.suggestions(person_id)
        except UnknownPersonError:
            return error_response("person-not-found", f"unknown person: {person_id}", 404)
        return envelope({"suggestions": ranked})

    @app.get("/api/sessions/{session_id}/metrics")
    def get_metrics(session_id: str, x_api_token: str | None = Header(default=None)):
        if (denied := check_token(x_api_token)) is not None:
            return denied
        try:
            report = runtime.get_metrics(session_id)
        except UnknownSessionError:
            return error_response("session-not-found", f"unknown session: {session_id}", 404)
        return envelope({"report": report})

    @app.post("/api/sessions/{session_id}/end")
    def end_session(session_id: str, body: EndSessionBody, x_api_token: str | None = Header(default=None)):
        if (denied := check_token(x_api_token)) is not None:
            return denied
        try:
            with session_locks[session_id]:
                _, report = runtime.close_session(session_id, body.rating)
        except UnknownSessionError:
            return error_response("session-not-found", f"unknown session: {session_id}", 404)
        except SessionClosedError as exc:
            return error_response("session-closed", str(exc), 409)
        except SessionError as exc:
            return error_response("validation-error", str(exc), 422)
        runtime.store.compact()
        return envelope({"report": report.to_doc()})

    @app.get("/api/sessions/{session_id}/turns")
    def get_turns(session_id: str, since: int = 0, x_api_token: str | None = Header(default=None)):
        if (denied := check_token(x_api_token)) is not None:
            return denied
        try:
            session = runtime.engine.session(session_id)
        except UnknownSessionError:
            return error_response("session-not-found", f"unknown session: {session_id}", 404)
        turns = [t.to_doc() for t in session.turns if t.index >= since]
        return envelope({"session_id": session_id, "turns": turns, "status": session.status})

    @app.get("/api/sessions/{session_id}/events")
    def events(session_id: str, request: Request):
        try:
            runtime.engine.session(session_id)
        except UnknownSessionError:
            return error_response("session-not-found", f"unknown session: {session_id}", 404)
        subscription = hub.subscribe(session_id)

        def stream():
            try:
                yield ": connected\n\n"
                while True:
                    try:
                        doc = subscription.get(timeout=SSE_KEEPALIVE_SECONDS)
                    except queue.Empty:
                        yield ": keepalive\n\n"
                        continue
                    data = json.dumps(doc, ensure_ascii=False, sort_keys=True)
                    yield f"id: {doc['index']}\nevent: turn\ndata: {data}\n\n"
            finally:
                hub.unsubscribe(session_id, subscription)

        return StreamingResponse(stream(), media_type="text/event-stream")

    if ui_dir is not None and Path(ui_dir).exists():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
