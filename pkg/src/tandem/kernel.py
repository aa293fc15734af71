"""Lifecycle and wire protocol of the per-session execution kernel.

The kernel is a child process (the shim) that keeps one long-lived namespace
per session. The manager talks newline-delimited UTF-8 JSON over the child's
stdin/stdout; the child's stderr is reserved for diagnostics.
"""

from __future__ import annotations

import importlib.util
import json
import logging
import queue
import subprocess
import sys
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from .errors import KernelProtocolError, KernelStartError, PreconditionError

logger = logging.getLogger(__name__)

PROTOCOL_VERSION = 1
HANDSHAKE_TIMEOUT = 10.0
SHUTDOWN_GRACE = 5.0
STREAM_CAP_BYTES = 64 * 1024
TRUNCATION_MARKER = "\n...[truncated]"

ARTIFACT_KIND_BY_EXTENSION = {
    ".png": "figure", ".jpg": "figure", ".jpeg": "figure", ".svg": "figure",
    ".csv": "data", ".parquet": "data",
    ".pkl": "model", ".joblib": "model", ".onnx": "model",
}


@dataclass
class Artifact:
    name: str
    kind: str  # figure | model | data | other
    path: str
    created_at: str


@dataclass
class ExecuteResult:
    status: str  # success | error
    stdout: str
    stderr: str
    traceback: Optional[str]
    wall_time: float
    new_artifacts: list[Artifact] = field(default_factory=list)
    state_reset: bool = False  # true when a timeout forced a kernel restart


@dataclass
class KernelHandle:
    session_id: str
    working_dir: str
    process: subprocess.Popen = field(repr=False)
    state: str = "starting"  # starting | ready | busy | dead
    closing: bool = False  # set by shutdown so a crash is not "repaired"
    shim_cmd: list[str] = field(default_factory=list)
    _lines: "queue.Queue[Optional[str]]" = field(default_factory=queue.Queue, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)
    _next_id: int = 0


_live_sessions: dict[str, KernelHandle] = {}
_live_lock = threading.Lock()


def default_shim_cmd() -> list[str]:
    if importlib.util.find_spec("tandem_shim") is None:
        raise KernelStartError("kernel shim not installed (module tandem_shim missing)")
    return [sys.executable, "-u", "-m", "tandem_shim"]


def artifact_kind(name: str) -> str:
    return ARTIFACT_KIND_BY_EXTENSION.get(Path(name).suffix.lower(), "other")


def _pump_stdout(proc: subprocess.Popen, out: "queue.Queue[Optional[str]]") -> None:
    assert proc.stdout is not None
    for line in proc.stdout:
        out.put(line)
    out.put(None)


def _pump_stderr(proc: subprocess.Popen, session_id: str) -> None:
    assert proc.stderr is not None
    for line in proc.stderr:
        logger.debug("shim[%s] stderr: %s", session_id, line.rstrip())


def _spawn(session_id: str, working_dir: str, shim_cmd: list[str]) -> KernelHandle:
    try:
        proc = subprocess.Popen(
            shim_cmd,
            cwd=working_dir,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
    except OSError as exc:
        raise KernelStartError(f"cannot spawn shim {shim_cmd}: {exc}") from exc
    handle = KernelHandle(session_id=session_id, working_dir=working_dir,
                          process=proc, shim_cmd=list(shim_cmd))
    threading.Thread(target=_pump_stdout, args=(proc, handle._lines), daemon=True).start()
    threading.Thread(target=_pump_stderr, args=(proc, session_id), daemon=True).start()
    _handshake(handle)
    handle.state = "ready"
    return handle


def _handshake(handle: KernelHandle) -> None:
    try:
        line = handle._lines.get(timeout=HANDSHAKE_TIMEOUT)
    except queue.Empty:
        _kill(handle)
        raise KernelStartError("handshake timeout: no hello from shim") from None
    if line is None:
        _kill(handle)
        raise KernelStartError("shim exited before handshake")
    try:
        msg = json.loads(line)
    except ValueError:
        _kill(handle)
        raise KernelStartError(f"malformed hello line: {line[:200]!r}") from None
    if msg.get("type") != "hello" or msg.get("version") != PROTOCOL_VERSION:
        _kill(handle)
        raise KernelStartError(f"unexpected hello message: {msg!r}")


def start_kernel(session_id: str, working_dir: str,
                 shim_cmd: Optional[list[str]] = None) -> KernelHandle:
    """Spawn a session-private kernel and complete the hello handshake."""
    wd = Path(working_dir)
    if not wd.is_dir():
        raise PreconditionError(f"working_dir does not exist: {working_dir}")
    with _live_lock:
        existing = _live_sessions.get(session_id)
        if existing is not None and existing.state != "dead":
            raise PreconditionError(f"session {session_id} already has a live kernel")
        handle = _spawn(session_id, str(wd), shim_cmd or default_shim_cmd())
        _live_sessions[session_id] = handle
        return handle


def _truncate(text: str) -> str:
    if len(text.encode("utf-8", "replace")) <= STREAM_CAP_BYTES:
        return text
    return text.encode("utf-8", "replace")[:STREAM_CAP_BYTES].decode("utf-8", "replace") + TRUNCATION_MARKER


def _kill(handle: KernelHandle) -> None:
    proc = handle.process
    if proc.poll() is None:
        proc.kill()
        try:
            proc.wait(timeout=SHUTDOWN_GRACE)
        except subprocess.TimeoutExpired:
            pass
    handle.state = "dead"


def _restart(handle: KernelHandle) -> None:
    """Replace the dead process in place; the namespace is lost."""
    _kill(handle)
    if handle.closing:
        return
    fresh = _spawn(handle.session_id, handle.working_dir, handle.shim_cmd)
    handle.process = fresh.process
    handle._lines = fresh._lines
    handle.state = "ready"
    logger.warning("kernel for session %s restarted; namespace reset", handle.session_id)


def execute(handle: KernelHandle, code: str, timeout: float = 120.0) -> ExecuteResult:
    """Run one cell in the persistent namespace and collect its outcome.

    A timeout kills and restarts the kernel; the result reports the reset so
    the next programmer prompt can mention the lost state.
    """
    with handle._lock:
        if handle.state != "ready":
            raise PreconditionError(f"kernel not ready (state={handle.state})")
        handle.state = "busy"
        started = time.monotonic()
        try:
            return _execute_locked(handle, code, timeout, started)
        finally:
            if handle.state == "busy":
                handle.state = "ready"


def _execute_locked(handle: KernelHandle, code: str, timeout: float,
                    started: float) -> ExecuteResult:
    msg_id = handle._next_id
    handle._next_id += 1
    request = json.dumps({"type": "execute", "id": msg_id, "code": code})
    try:
        assert handle.process.stdin is not None
        handle.process.stdin.write(request + "\n")
        handle.process.stdin.flush()
    except (OSError, ValueError):
        _restart(handle)
        return ExecuteResult(status="error", stdout="", stderr="",
                             traceback="KernelCrashed: stdin closed",
                             wall_time=time.monotonic() - started, state_reset=True)
    deadline = started + timeout
    while True:
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            _restart(handle)
            return ExecuteResult(status="error", stdout="", stderr="",
                                 traceback="ExecutionTimeout",
                                 wall_time=time.monotonic() - started, state_reset=True)
        try:
            line = handle._lines.get(timeout=remaining)
        except queue.Empty:
            continue
        if line is None:  # child exited mid-execute
            _restart(handle)
            return ExecuteResult(status="error", stdout="", stderr="",
                                 traceback="KernelCrashed: process exited",
                                 wall_time=time.monotonic() - started, state_reset=True)
        try:
            msg = json.loads(line)
        except ValueError:
            _restart(handle)
            raise KernelProtocolError(f"non-JSON line from shim: {line[:200]!r}") from None
        if msg.get("type") != "result":
            _restart(handle)
            raise KernelProtocolError(f"unexpected message type: {msg.get('type')!r}")
        if msg.get("id") != msg_id:
            logger.warning("dropping stale result id=%r (want %d)", msg.get("id"), msg_id)
            continue
        now = datetime.now(timezone.utc).isoformat()
        artifacts = [
            Artifact(name=name, kind=artifact_kind(name),
                     path=str(Path(handle.working_dir) / name), created_at=now)
            for name in msg.get("new_files", [])
        ]
        return ExecuteResult(
            status=msg.get("status", "error"),
            stdout=_truncate(msg.get("stdout", "")),
            stderr=_truncate(msg.get("stderr", "")),
            traceback=msg.get("traceback"),
            wall_time=time.monotonic() - started,
            new_artifacts=artifacts,
        )


def shutdown(handle: KernelHandle) -> None:
    """Terminate the kernel, politely first. Idempotent."""
    handle.closing = True
    proc = handle.process
    if handle.state == "dead" and proc.poll() is not None:
        return
    if proc.poll() is None:
        proc.terminate()
        try:
            proc.wait(timeout=SHUTDOWN_GRACE)
        except subprocess.TimeoutExpired:
            proc.kill()
            try:
                proc.wait(timeout=SHUTDOWN_GRACE)
            except subprocess.TimeoutExpired:
                logger.error("kernel for %s refused to die", handle.session_id)
    handle.state = "dead"
    with _live_lock:
        if _live_sessions.get(handle.session_id) is handle:
            del _live_sessions[handle.session_id]
