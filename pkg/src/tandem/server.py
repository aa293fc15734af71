"""HTTP surface: sessions, dataset upload, streamed turns, intervention,
knowledge CRUD, artifacts and reports.

Turn progress streams as server-sent events; one event per observable loop
step, strictly increasing ``seq``, exactly one terminal event per stream.
"""

from __future__ import annotations

import email
import json
import logging
import mimetypes
import queue
import threading
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse, StreamingResponse
from pydantic import BaseModel

from . import profiling
from .errors import (
    ConflictError,
    EmptyHistoryError,
    IngestError,
    NotFoundError,
    PreconditionError,
    ReportError,
)
from .knowledge import HashEmbedder, KnowledgeStore
from .llm import ModelBackend
from .orchestrator import LoopConfig, Orchestrator
from .report import generate_report, load_report_template
from .store import SessionStore

logger = logging.getLogger(__name__)

DEFAULT_UPLOAD_LIMIT = profiling.DEFAULT_SIZE_LIMIT_BYTES
TERMINAL_EVENT_KINDS = {"final_response", "needs_intervention", "error"}


@dataclass
class ApiConfig:
    storage_root: str
    knowledge_dir: str
    bind_address: str = "127.0.0.1:8080"
    loop: LoopConfig = field(default_factory=LoopConfig)
    upload_limit: int = DEFAULT_UPLOAD_LIMIT
    theta: float = 0.5

    def __post_init__(self) -> None:
        if not -1.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [-1, 1]")


class MessageBody(BaseModel):
    text: str


class InterventionBody(BaseModel):
    code: str


class ReportBody(BaseModel):
    template: str = "standard_analysis"


class KnowledgeBody(BaseModel):
    description: str
    code: str


def _sse(event: dict) -> str:
    return f"data: {json.dumps(event, ensure_ascii=False)}\n\n"


def _parse_multipart_file(content_type: str, body: bytes) -> tuple[str, bytes]:
    """Extract the first file part of a multipart/form-data body."""
    if "multipart/form-data" not in content_type:
        raise IngestError("expected a multipart/form-data upload")
    raw = b"Content-Type: " + content_type.encode() + b"\r\n\r\n" + body
    msg = email.message_from_bytes(raw)
    if not msg.is_multipart():
        raise IngestError("malformed multipart body")
    for part in msg.get_payload():
        filename = part.get_filename()
        if filename:
            payload = part.get_payload(decode=True) or b""
            return filename, payload
    raise IngestError("no file part in upload")


def create_app(config: ApiConfig, backend: ModelBackend,
               embedder=None) -> FastAPI:
    store = SessionStore(config.storage_root)
    knowledge = KnowledgeStore(config.knowledge_dir)
    orch = Orchestrator(store=store, backend=backend, knowledge=knowledge,
                        embedder=embedder or HashEmbedder(), theta=config.theta)
    app = FastAPI(title="tandem")
    app.state.orchestrator = orch
    app.state.store = store
    app.state.knowledge = knowledge
    in_flight: set[str] = set()
    in_flight_lock = threading.Lock()

    def _begin(session_id: str) -> bool:
        with in_flight_lock:
            if session_id in in_flight:
                return False
            in_flight.add(session_id)
            return True

    def _end(session_id: str) -> None:
        with in_flight_lock:
            in_flight.discard(session_id)

    def _stream_turn(session_id: str, runner) -> StreamingResponse:
        events: "queue.Queue[Optional[dict]]" = queue.Queue()
        seq = 0
        terminal_seen = False

        def on_event(kind: str, payload: dict) -> None:
            nonlocal seq, terminal_seen
            events.put({"kind": kind, "payload": payload, "seq": seq})
            seq += 1
            if kind in TERMINAL_EVENT_KINDS:
                terminal_seen = True

        def work() -> None:
            nonlocal seq
            try:
                runner(on_event)
            except Exception as exc:  # terminal error event if none was emitted
                logger.exception("turn failed for %s", session_id)
                if not terminal_seen:
                    events.put({"kind": "error", "payload": {"error": str(exc)},
                                "seq": seq})
            finally:
                _end(session_id)
                events.put(None)

        threading.Thread(target=work, daemon=True).start()

        def generate():
            while True:
                item = events.get()
                if item is None:
                    break
                yield _sse(item)

        return StreamingResponse(generate(), media_type="text/event-stream")

    # -- sessions -------------------------------------------------------------

    @app.post("/sessions", status_code=201)
    def create_session() -> dict:
        return {"id": store.create_session()}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        try:
            record = store.load_session(session_id)
        except NotFoundError:
            return JSONResponse({"error": "unknown session"}, status_code=404)
        return {
            "id": record.id,
            "created_at": record.created_at,
            "dataset_path": record.dataset_path,
            "messages": record.messages,
            "turns": record.turns,
            "artifacts": record.artifacts,
        }

    @app.post("/sessions/{session_id}/data")
    async def upload_data(session_id: str, request: Request):
        try:
            store._require(session_id)
        except NotFoundError:
            return JSONResponse({"error": "unknown session"}, status_code=404)
        body = await request.body()
        if len(body) > config.upload_limit:
            return JSONResponse({"error": "upload exceeds size limit"}, status_code=413)
        try:
            filename, data = _parse_multipart_file(
                request.headers.get("content-type", ""), body)
            target = store.workspace_dir(session_id) / Path(filename).name
            target.write_bytes(data)
            table = profiling.ingest_csv(target, size_limit=config.upload_limit)
            profile = profiling.profile(table)
        except IngestError as exc:
            return JSONResponse({"error": f"ingest_error: {exc}"}, status_code=422)
        profile_dict = asdict(profile)
        store.append_event(session_id, {"kind": "dataset", "path": str(target),
                                        "profile": profile_dict})
        return profile_dict

    @app.post("/sessions/{session_id}/messages")
    def post_message(session_id: str, body: MessageBody):
        try:
            store._require(session_id)
        except NotFoundError:
            return JSONResponse({"error": "unknown session"}, status_code=404)
        if not _begin(session_id):
            return JSONResponse({"error": "turn already in flight"}, status_code=409)
        return _stream_turn(
            session_id,
            lambda on_event: orch.run_turn(session_id, body.text, config.loop, on_event))

    @app.post("/sessions/{session_id}/intervention")
    def post_intervention(session_id: str, body: InterventionBody):
        try:
            record = store.load_session(session_id)
        except NotFoundError:
            return JSONResponse({"error": "unknown session"}, status_code=404)
        if not record.turns or record.turns[-1]["status"] != "needs_intervention":
            return JSONResponse({"error": "last turn does not await intervention"},
                                status_code=409)
        if not _begin(session_id):
            return JSONResponse({"error": "turn already in flight"}, status_code=409)
        return _stream_turn(
            session_id,
            lambda on_event: orch.apply_human_intervention(
                session_id, body.code, config.loop, on_event))

    # -- artifacts and reports ---------------------------------------------------

    @app.get("/sessions/{session_id}/artifacts/{name}")
    def get_artifact(session_id: str, name: str):
        try:
            data = store.load_artifact(session_id, name)
        except NotFoundError:
            return JSONResponse({"error": "unknown artifact"}, status_code=404)
        media = mimetypes.guess_type(name)[0] or "application/octet-stream"
        return Response(content=data, media_type=media)

    @app.post("/sessions/{session_id}/report")
    def post_report(session_id: str, body: ReportBody):
        try:
            record = store.load_session(session_id)
            template = load_report_template(body.template)
            document = generate_report(record, template, backend, store)
        except NotFoundError as exc:
            return JSONResponse({"error": str(exc)}, status_code=404)
        except EmptyHistoryError:
            return JSONResponse({"error": "empty_history"}, status_code=422)
        except ReportError as exc:
            return JSONResponse({"error": str(exc)}, status_code=502)
        return {
            "markdown_text": document.markdown_text,
            "referenced_artifacts": document.referenced_artifacts,
            "template_name": document.template_name,
            "artifact_name": document.artifact_name,
        }

    # -- knowledge CRUD ------------------------------------------------------------

    @app.get("/knowledge")
    def list_knowledge() -> list[dict]:
        return [{"id": e.id, "description": e.description, "code": e.code}
                for e in knowledge.list_entries()]

    @app.post("/knowledge", status_code=201)
    def add_knowledge(body: KnowledgeBody):
        try:
            entry_id = knowledge.add_entry(body.description, body.code)
        except ValueError as exc:
            return JSONResponse({"error": str(exc)}, status_code=422)
        return {"id": entry_id}

    @app.delete("/knowledge/{entry_id}", status_code=204)
    def delete_knowledge(entry_id: str):
        try:
            knowledge.remove_entry(entry_id)
        except NotFoundError:
            return JSONResponse({"error": "unknown entry"}, status_code=404)
        return Response(status_code=204)

    @app.exception_handler(ConflictError)
    def conflict_handler(_request, exc):
        return JSONResponse({"error": str(exc)}, status_code=409)

    @app.exception_handler(PreconditionError)
    def precondition_handler(_request, exc):
        return JSONResponse({"error": str(exc)}, status_code=409)

    return app
