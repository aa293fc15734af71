"""Filesystem-backed persistence for sessions, artifacts and turn traces.

Layout: one directory per session holding an append-only event log
(newline-delimited JSON, schema version in each line), a kernel workspace,
and an artifacts subdirectory. Human-inspectable and trivially portable to
object storage later.
"""

from __future__ import annotations

import json
import logging
import os
import secrets
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from .errors import ConflictError, NotFoundError
from .kernel import artifact_kind

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
EVENT_LOG_NAME = "events.jsonl"
WORKSPACE_DIR = "workspace"
ARTIFACTS_DIR = "artifacts"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class SessionRecord:
    id: str
    created_at: str
    dataset_path: Optional[str] = None
    messages: list[dict] = field(default_factory=list)
    turns: list[dict] = field(default_factory=list)
    artifacts: list[dict] = field(default_factory=list)
    events: list[dict] = field(default_factory=list)


class SessionStore:
    """Per-session single writer; concurrent readers are safe."""

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    # -- paths ------------------------------------------------------------

    def session_dir(self, session_id: str) -> Path:
        return self.root / session_id

    def workspace_dir(self, session_id: str) -> Path:
        return self.session_dir(session_id) / WORKSPACE_DIR

    def _log_path(self, session_id: str) -> Path:
        return self.session_dir(session_id) / EVENT_LOG_NAME

    def _require(self, session_id: str) -> Path:
        d = self.session_dir(session_id)
        if not d.is_dir():
            raise NotFoundError(f"unknown session {session_id!r}")
        return d

    # -- lifecycle ---------------------------------------------------------

    def create_session(self) -> str:
        with self._lock:
            session_id = secrets.token_hex(16)
            d = self.session_dir(session_id)
            d.mkdir(parents=True)
            (d / WORKSPACE_DIR).mkdir()
            (d / ARTIFACTS_DIR).mkdir()
            self._log_path(session_id).touch()
        self.append_event(session_id, {"kind": "created"})
        return session_id

    def list_sessions(self) -> list[str]:
        return sorted(p.name for p in self.root.iterdir()
                      if p.is_dir() and (p / EVENT_LOG_NAME).is_file())

    # -- event log ----------------------------------------------------------

    def append_event(self, session_id: str, event: dict) -> None:
        """Append one event durably (flush + fsync before returning)."""
        self._require(session_id)
        record = {"v": SCHEMA_VERSION, "ts": _now(), **event}
        line = json.dumps(record, ensure_ascii=False)
        with open(self._log_path(session_id), "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def load_session(self, session_id: str) -> SessionRecord:
        self._require(session_id)
        events: list[dict] = []
        with open(self._log_path(session_id), encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    events.append(json.loads(line))
                except ValueError:
                    # A torn final line means a crash mid-append; ignore it.
                    logger.warning("dropping torn event line in %s", session_id)
        created_at = events[0]["ts"] if events else _now()
        record = SessionRecord(id=session_id, created_at=created_at, events=events)
        for ev in events:
            kind = ev.get("kind")
            if kind == "message":
                record.messages.append(
                    {"role": ev["role"], "text": ev["text"], "ts": ev["ts"]})
            elif kind == "turn":
                record.turns.append(ev["turn"])
            elif kind == "artifact":
                record.artifacts.append(ev["artifact"])
            elif kind == "dataset":
                record.dataset_path = ev["path"]
        return record

    def append_message(self, session_id: str, role: str, text: str) -> None:
        self.append_event(session_id, {"kind": "message", "role": role, "text": text})

    def set_dataset(self, session_id: str, path: str) -> None:
        self.append_event(session_id, {"kind": "dataset", "path": path})

    # -- artifacts ----------------------------------------------------------

    def artifact_path(self, session_id: str, name: str) -> Path:
        d = self._require(session_id)
        p = (d / ARTIFACTS_DIR / name).resolve()
        if not str(p).startswith(str((d / ARTIFACTS_DIR).resolve())):
            raise NotFoundError(f"artifact name escapes store: {name!r}")
        return p

    def save_artifact(self, session_id: str, name: str, data: bytes,
                      kind: Optional[str] = None) -> dict:
        """Persist artifact bytes (write-then-rename; duplicate names conflict)."""
        target = self.artifact_path(session_id, name)
        if target.exists():
            raise ConflictError(f"artifact {name!r} already exists in {session_id}")
        target.parent.mkdir(parents=True, exist_ok=True)
        tmp = target.with_name(target.name + ".tmp")
        tmp.write_bytes(data)
        os.replace(tmp, target)
        artifact = {
            "name": name,
            "kind": kind or artifact_kind(name),
            "path": str(target),
            "created_at": _now(),
        }
        self.append_event(session_id, {"kind": "artifact", "artifact": artifact})
        return artifact

    def load_artifact(self, session_id: str, name: str) -> bytes:
        p = self.artifact_path(session_id, name)
        if not p.is_file():
            raise NotFoundError(f"no artifact {name!r} in session {session_id}")
        return p.read_bytes()

    def has_artifact(self, session_id: str, name: str) -> bool:
        try:
            return self.artifact_path(session_id, name).is_file()
        except NotFoundError:
            return False
