"""HTTP session service for the web UI.

A thin adapter over the library: every behavior is reachable without the
service running.  Sessions live in memory, optionally persisted one file
per session (temp-file-then-rename after each successful turn).  Turns on
one session are serialized; requests for other sessions never wait on a
backend call.
"""

from __future__ import annotations

import json
import os
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response

from .agent import SessionState, TurnRecord, load_session_from_xml, new_session, run_turn
from .backends import DEFAULT_API_KEY_ENV, CompletionBackend, make_backend
from .dsl import dsl_to_graph, parse_dsl, serialize_dsl
from .layout import auto_layout
from .render import render_svg

# closed set of machine-readable error codes
ERROR_CODES = ("session_not_found", "invalid_request", "turn_rejected",
               "import_failed")


@dataclass
class ServiceConfig:
    backend_spec: str = ""
    executor_backend_spec: str = ""  # defaults to the planner backend
    model: str = "gpt-4-turbo"
    api_key_env: str = DEFAULT_API_KEY_ENV
    backend_timeout: float = 120.0
    persist_dir: Path | None = None
    cors_origins: list[str] = field(default_factory=lambda: ["*"])


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str,
                 details: list | None = None):
        assert code in ERROR_CODES
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.details = details or []

    def response(self) -> JSONResponse:
        body = {"code": self.code, "message": self.message}
        if self.details:
            body["details"] = self.details
        return JSONResponse(body, status_code=self.status)


class SessionStore:
    """In-memory sessions with per-session locks and optional persistence."""

    def __init__(self, persist_dir: Path | None = None):
        self._sessions: dict[str, SessionState] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._mutex = threading.Lock()
        self.persist_dir = persist_dir
        if persist_dir is not None:
            persist_dir.mkdir(parents=True, exist_ok=True)
            self._load_persisted()

    def _load_persisted(self) -> None:
        for path in sorted(self.persist_dir.glob("*.session.json")):
            data = json.loads(path.read_text(encoding="utf-8"))
            doc = parse_dsl(data["dsl"])
            graph = dsl_to_graph(doc)
            from .agent import derive_artifacts

            xml, description = derive_artifacts(graph)
            state = SessionState(
                id=data["id"], dsl=doc, graph=graph, xml=xml,
                description=description,
                turns=[TurnRecord(prompt=p) for p in data.get("prompts", [])],
            )
            self._sessions[state.id] = state

    def persist(self, state: SessionState) -> None:
        if self.persist_dir is None:
            return
        payload = {
            "id": state.id,
            "dsl": serialize_dsl(state.dsl),
            "prompts": [t.prompt for t in state.turns],
        }
        path = self.persist_dir / f"{state.id}.session.json"
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n",
                       encoding="utf-8")
        os.replace(tmp, path)

    def create(self, state: SessionState) -> SessionState:
        with self._mutex:
            self._sessions[state.id] = state
            self._locks[state.id] = threading.Lock()
        self.persist(state)
        return state

    def get(self, session_id: str) -> SessionState:
        with self._mutex:
            state = self._sessions.get(session_id)
        if state is None:
            raise ApiError(404, "session_not_found",
                           f"no session with id {session_id!r}")
        return state

    def lock_for(self, session_id: str) -> threading.Lock:
        with self._mutex:
            if session_id not in self._locks:
                self._locks[session_id] = threading.Lock()
            return self._locks[session_id]

    def replace(self, state: SessionState) -> None:
        with self._mutex:
            self._sessions[state.id] = state
        self.persist(state)

    def delete(self, session_id: str) -> None:
        with self._mutex:
            if session_id not in self._sessions:
                raise ApiError(404, "session_not_found",
                               f"no session with id {session_id!r}")
            del self._sessions[session_id]
            self._locks.pop(session_id, None)
        if self.persist_dir is not None:
            path = self.persist_dir / f"{session_id}.session.json"
            if path.exists():
                path.unlink()

    def ids(self) -> list[str]:
        with self._mutex:
            return sorted(self._sessions)


def session_svg(state: SessionState) -> str:
    return render_svg(state.graph, auto_layout(state.graph))


def session_payload(state: SessionState) -> dict:
    return {
        "id": state.id,
        "xml": state.xml,
        "svg": session_svg(state),
        "description": state.description,
        "dsl": serialize_dsl(state.dsl),
        "turns": [
            {
                "prompt": t.prompt,
                "plan": [p.description for p in t.plan],
                "diagnostics": [str(d) for d in t.diagnostics],
            }
            for t in state.turns
        ],
    }


def create_app(config: ServiceConfig,
               backend: CompletionBackend | None = None,
               executor_backend: CompletionBackend | None = None) -> FastAPI:
    """Build the service; a misconfigured backend fails here, at startup."""
    if backend is None:
        if not config.backend_spec:
            raise ValueError("a backend is required: pass --backend "
                             "scripted:<file> or http:<base_url>")
        backend = make_backend(config.backend_spec, model=config.model,
                               api_key_env=config.api_key_env,
                               timeout=config.backend_timeout)
    if executor_backend is None and config.executor_backend_spec:
        executor_backend = make_backend(config.executor_backend_spec,
                                        model=config.model,
                                        api_key_env=config.api_key_env,
                                        timeout=config.backend_timeout)

    app = FastAPI(title="pidcopilot", version="0.1.0")
    app.add_middleware(
        CORSMiddleware, allow_origins=config.cors_origins,
        allow_methods=["*"], allow_headers=["*"],
    )
    store = SessionStore(config.persist_dir)
    app.state.store = store
    app.state.backend = backend

    @app.exception_handler(ApiError)
    async def api_error_handler(request: Request, exc: ApiError):
        return exc.response()

    @app.exception_handler(RequestValidationError)
    async def validation_error_handler(request: Request,
                                       exc: RequestValidationError):
        return ApiError(400, "invalid_request", str(exc.errors()[:1])).response()

    @app.post("/sessions", status_code=201)
    def create_session():
        state = store.create(new_session(uuid.uuid4().hex))
        return session_payload(state)

    @app.post("/sessions/import", status_code=201)
    def import_session(body: dict):
        xml = body.get("xml") if isinstance(body, dict) else None
        if not isinstance(xml, str) or not xml.strip():
            raise ApiError(400, "invalid_request",
                           "body must carry a non-empty 'xml' string")
        try:
            state = load_session_from_xml(xml, uuid.uuid4().hex)
        except ValueError as exc:
            raise ApiError(422, "import_failed", str(exc))
        return session_payload(store.create(state))

    @app.get("/sessions")
    def list_sessions():
        return {"sessions": store.ids()}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return session_payload(store.get(session_id))

    @app.post("/sessions/{session_id}/turns")
    def post_turn(session_id: str, body: dict):
        prompt = body.get("prompt") if isinstance(body, dict) else None
        if not isinstance(prompt, str) or not prompt.strip():
            raise ApiError(400, "invalid_request",
                           "body must carry a non-empty 'prompt' string")
        store.get(session_id)  # 404 before creating a lock for a bogus id
        lock = store.lock_for(session_id)
        with lock:
            state = store.get(session_id)
            result = run_turn(state, prompt, backend,
                              executor_backend=executor_backend)
            if not result.ok:
                raise ApiError(422, "turn_rejected",
                               result.error or "turn failed",
                               details=[str(d) for d in result.diagnostics])
            store.replace(result.state)
        payload = session_payload(result.state)
        payload["diagnostics"] = [str(d) for d in result.diagnostics]
        return payload

    @app.get("/sessions/{session_id}/pid.xml")
    def get_xml(session_id: str):
        return Response(store.get(session_id).xml, media_type="application/xml")

    @app.get("/sessions/{session_id}/pid.svg")
    def get_svg(session_id: str):
        return Response(session_svg(store.get(session_id)),
                        media_type="image/svg+xml")

    @app.get("/sessions/{session_id}/description")
    def get_description(session_id: str):
        return Response(store.get(session_id).description,
                        media_type="text/plain; charset=utf-8")

    @app.get("/sessions/{session_id}/dsl")
    def get_dsl(session_id: str):
        return Response(serialize_dsl(store.get(session_id).dsl),
                        media_type="application/json")

    @app.delete("/sessions/{session_id}", status_code=204)
    def delete_session(session_id: str):
        store.delete(session_id)
        return Response(status_code=204)

    return app
