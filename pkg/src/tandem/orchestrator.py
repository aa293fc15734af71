"""The programmer/inspector collaboration loop.

One turn: the programmer answers the instruction; extracted code runs in the
session kernel; on error the inspector suggests a fix and the programmer
revises, up to a configurable attempt cap. When the cap is exhausted the
turn parks in needs_intervention and a human may submit replacement code.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

from . import kernel as kernel_mod
from .errors import ConflictError, ModelError, PreconditionError
from .kernel import ExecuteResult, KernelHandle
from .knowledge import Embedder, KnowledgeStore, match
from .llm import ChatMessage, ModelBackend
from .profiling import DatasetProfile
from .prompts import (
    PromptContext,
    TemplateSet,
    build_inspector_prompt,
    build_knowledge_prompt,
    build_programmer_system_prompt,
    build_repair_prompt,
    extract_code_blocks,
)
from .store import SessionStore

logger = logging.getLogger(__name__)

DEFAULT_MAX_ATTEMPTS = 5
FALLBACK_FRAMING = "The code ran successfully. Raw output:\n"
NO_CODE_ERROR = "NoCodeInReply: the revised reply contained no fenced code block"

EventCallback = Callable[[str, dict], None]


@dataclass
class LoopConfig:
    max_attempts: int = DEFAULT_MAX_ATTEMPTS
    execute_timeout: float = 120.0
    return_raw_reply_when_no_code: bool = True

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.execute_timeout <= 0:
            raise ValueError("execute_timeout must be > 0")


@dataclass
class AttemptTrace:
    iteration: int
    code: str
    error: Optional[str] = None
    suggestion: Optional[str] = None

    def to_dict(self) -> dict:
        return {"iteration": self.iteration, "code": self.code,
                "error": self.error, "suggestion": self.suggestion}


@dataclass
class TurnOutcome:
    status: str  # ok | needs_intervention | plain_reply
    attempts_used: int
    response_text: str
    final_code: Optional[str] = None
    execution: Optional[ExecuteResult] = None
    trace: list[AttemptTrace] = field(default_factory=list)
    artifact_names: list[str] = field(default_factory=list)

    def to_dict(self, instruction: str = "") -> dict:
        return {
            "status": self.status,
            "attempts_used": self.attempts_used,
            "final_code": self.final_code,
            "response_text": self.response_text,
            "instruction": instruction,
            "trace": [t.to_dict() for t in self.trace],
            "artifacts": self.artifact_names,
        }


def compose_final_response(code: str, result: ExecuteResult,
                           backend: ModelBackend,
                           templates: TemplateSet | None = None) -> str:
    """Summarize a successful execution; fall back to raw stdout if the
    backend is down so the user always sees the execution evidence."""
    if result.status != "success":
        raise PreconditionError("compose_final_response requires a successful result")
    templates = templates or TemplateSet()
    stdout = result.stdout if result.stdout.strip() else "(execution succeeded, no output)"
    prompt = templates.render("summary", code=code, stdout=stdout)
    try:
        return backend.complete([ChatMessage("user", prompt)])
    except ModelError:
        logger.warning("summary backend failed; returning raw stdout")
        return FALLBACK_FRAMING + result.stdout


class Orchestrator:
    """Drives turns for many sessions; one in-flight turn per session."""

    def __init__(
        self,
        store: SessionStore,
        backend: ModelBackend,
        templates: TemplateSet | None = None,
        knowledge: KnowledgeStore | None = None,
        embedder: Embedder | None = None,
        theta: float = 0.5,
        shim_cmd: Optional[list[str]] = None,
        role_preamble: str = "",
        io_format_rules: str = "",
    ) -> None:
        self.store = store
        self.backend = backend
        self.templates = templates or TemplateSet()
        self.knowledge = knowledge
        self.embedder = embedder
        self.theta = theta
        self.shim_cmd = shim_cmd
        self.role_preamble = role_preamble
        self.io_format_rules = io_format_rules
        self.demos = self.templates.load_demos()
        self._kernels: dict[str, KernelHandle] = {}
        self._turn_locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    # -- kernels -------------------------------------------------------------

    def kernel_for(self, session_id: str) -> KernelHandle:
        with self._registry_lock:
            handle = self._kernels.get(session_id)
            if handle is None or handle.state == "dead":
                workspace = self.store.workspace_dir(session_id)
                handle = kernel_mod.start_kernel(session_id, str(workspace), self.shim_cmd)
                self._kernels[session_id] = handle
            return handle

    def shutdown(self) -> None:
        with self._registry_lock:
            for handle in self._kernels.values():
                kernel_mod.shutdown(handle)
            self._kernels.clear()

    def _turn_lock(self, session_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._turn_locks.setdefault(session_id, threading.Lock())

    # -- prompt context --------------------------------------------------------

    def _system_prompt(self, session_id: str) -> str:
        record = self.store.load_session(session_id)
        profile = None
        for ev in record.events:
            if ev.get("kind") == "dataset" and ev.get("profile"):
                profile = DatasetProfile(
                    path=ev["profile"]["path"],
                    n_rows=ev["profile"]["n_rows"],
                    n_cols=ev["profile"]["n_cols"],
                    columns=[_column_from_dict(c) for c in ev["profile"]["columns"]],
                )
        ctx = PromptContext(
            working_dir=str(self.store.workspace_dir(session_id)),
            dataset_profile=profile,
            role_preamble=self.role_preamble,
            io_format_rules=self.io_format_rules,
            few_shot_demos=self.demos,
            templates=self.templates,
        )
        return build_programmer_system_prompt(ctx)

    def _user_content(self, instruction: str) -> str:
        if self.knowledge is None or self.embedder is None:
            return instruction
        result = match(self.knowledge, instruction, self.theta, self.embedder)
        if result.matched is None:
            return instruction
        entry, score = result.matched
        logger.info("knowledge entry %s matched (score %.3f)", entry.id, score)
        return build_knowledge_prompt(instruction, entry.code, self.demos, self.templates)

    # -- the loop ----------------------------------------------------------------

    def run_turn(self, session_id: str, instruction: str,
                 cfg: LoopConfig | None = None,
                 on_event: EventCallback | None = None) -> TurnOutcome:
        cfg = cfg or LoopConfig()
        if not instruction.strip():
            raise PreconditionError("instruction must be non-empty")
        emit = on_event or (lambda kind, payload: None)
        lock = self._turn_lock(session_id)
        if not lock.acquire(blocking=False):
            raise ConflictError(f"a turn is already in flight for {session_id}")
        try:
            return self._run_turn_locked(session_id, instruction, cfg, emit)
        finally:
            lock.release()

    def _programmer(self, messages: list[ChatMessage], session_id: str,
                    emit: EventCallback) -> str:
        try:
            return self.backend.complete(messages)
        except ModelError as exc:
            self.store.append_event(session_id, {"kind": "turn_aborted",
                                                 "reason": f"model_error: {exc}"})
            emit("error", {"error": f"model_error: {exc}"})
            raise

    def _persist_artifacts(self, session_id: str, result: ExecuteResult) -> list[str]:
        names = []
        for art in result.new_artifacts:
            try:
                data = open(art.path, "rb").read()
            except OSError:
                continue
            try:
                self.store.save_artifact(session_id, art.name, data, art.kind)
            except ConflictError:
                pass  # same file touched again in a later cell
            names.append(art.name)
        return names

    def _run_turn_locked(self, session_id: str, instruction: str,
                         cfg: LoopConfig, emit: EventCallback) -> TurnOutcome:
        record = self.store.load_session(session_id)
        system_prompt = self._system_prompt(session_id)
        history = [ChatMessage(m["role"], m["text"]) for m in record.messages
                   if m["role"] in ("user", "assistant")]
        user_content = self._user_content(instruction)
        messages = [ChatMessage("system", system_prompt), *history,
                    ChatMessage("user", user_content)]

        reply = self._programmer(messages, session_id, emit)
        self.store.append_message(session_id, "user", instruction)
        emit("agent_text", {"text": reply})
        parsed = extract_code_blocks(reply)

        if not parsed.has_code:
            outcome = TurnOutcome(status="plain_reply", attempts_used=0,
                                  response_text=reply)
            self.store.append_message(session_id, "assistant", reply)
            self.store.append_event(session_id,
                                    {"kind": "turn", "turn": outcome.to_dict(instruction)})
            emit("final_response", {"text": reply, "status": "plain_reply"})
            return outcome

        handle = self.kernel_for(session_id)
        code = "\n\n".join(parsed.code_blocks)
        emit("code", {"code": code})
        result = kernel_mod.execute(handle, code, cfg.execute_timeout)
        emit("execution_result", _execution_payload(result))
        trace = [AttemptTrace(0, code, error=result.traceback)]
        artifact_names = self._persist_artifacts(session_id, result)
        if result.state_reset:
            self.store.append_event(session_id, {"kind": "kernel_reset"})

        n = 0
        while result.status == "error" and n < cfg.max_attempts:
            n += 1
            suggestion = self._programmer(
                [ChatMessage("user", build_inspector_prompt(
                    code, result.traceback or result.stderr, self.templates))],
                session_id, emit)
            emit("suggestion", {"suggestion": suggestion, "iteration": n})
            repair_reply = self._programmer(
                [ChatMessage("system", system_prompt),
                 ChatMessage("user", build_repair_prompt(
                     code, suggestion, result.traceback or result.stderr, self.templates))],
                session_id, emit)
            emit("agent_text", {"text": repair_reply})
            revised = extract_code_blocks(repair_reply)
            if revised.has_code:
                code = "\n\n".join(revised.code_blocks)
                emit("code", {"code": code})
                result = kernel_mod.execute(handle, code, cfg.execute_timeout)
                emit("execution_result", _execution_payload(result))
                artifact_names += self._persist_artifacts(session_id, result)
                if result.state_reset:
                    self.store.append_event(session_id, {"kind": "kernel_reset"})
                trace.append(AttemptTrace(n, code, error=result.traceback,
                                          suggestion=suggestion))
            else:
                trace.append(AttemptTrace(n, code, error=NO_CODE_ERROR,
                                          suggestion=suggestion))

        if result.status == "success":
            response = compose_final_response(code, result, self.backend, self.templates)
            outcome = TurnOutcome(status="ok", attempts_used=n, response_text=response,
                                  final_code=code, execution=result, trace=trace,
                                  artifact_names=artifact_names)
            self.store.append_message(session_id, "assistant", response)
            self.store.append_event(session_id,
                                    {"kind": "turn", "turn": outcome.to_dict(instruction)})
            emit("final_response", {"text": response, "status": "ok"})
            return outcome

        response = (f"The code still fails after {n} correction attempts. "
                    f"Last error:\n{result.traceback or result.stderr}")
        outcome = TurnOutcome(status="needs_intervention", attempts_used=n,
                              response_text=response, final_code=code,
                              execution=result, trace=trace,
                              artifact_names=artifact_names)
        self.store.append_message(session_id, "assistant", response)
        self.store.append_event(session_id,
                                {"kind": "turn", "turn": outcome.to_dict(instruction)})
        emit("needs_intervention", {"text": response, "code": code,
                                    "error": result.traceback})
        return outcome

    # -- human escape hatch ---------------------------------------------------

    def apply_human_intervention(self, session_id: str, human_code: str,
                                 cfg: LoopConfig | None = None,
                                 on_event: EventCallback | None = None) -> TurnOutcome:
        cfg = cfg or LoopConfig()
        if not human_code.strip():
            raise PreconditionError("human code must be non-empty")
        record = self.store.load_session(session_id)
        if not record.turns or record.turns[-1]["status"] != "needs_intervention":
            raise PreconditionError("last turn is not awaiting intervention")
        emit = on_event or (lambda kind, payload: None)
        lock = self._turn_lock(session_id)
        if not lock.acquire(blocking=False):
            raise ConflictError(f"a turn is already in flight for {session_id}")
        try:
            failed = record.turns[-1]
            handle = self.kernel_for(session_id)
            emit("code", {"code": human_code})
            result = kernel_mod.execute(handle, human_code, cfg.execute_timeout)
            emit("execution_result", _execution_payload(result))
            artifact_names = self._persist_artifacts(session_id, result)
            trace = [AttemptTrace(0, human_code, error=result.traceback)]
            if result.status == "success":
                response = compose_final_response(human_code, result, self.backend,
                                                  self.templates)
                outcome = TurnOutcome(status="ok",
                                      attempts_used=failed["attempts_used"],
                                      response_text=response, final_code=human_code,
                                      execution=result, trace=trace,
                                      artifact_names=artifact_names)
                self.store.append_message(session_id, "assistant", response)
                emit("final_response", {"text": response, "status": "ok"})
            else:
                response = f"The human-provided code also failed:\n{result.traceback}"
                outcome = TurnOutcome(status="needs_intervention",
                                      attempts_used=failed["attempts_used"],
                                      response_text=response, final_code=human_code,
                                      execution=result, trace=trace,
                                      artifact_names=artifact_names)
                self.store.append_message(session_id, "assistant", response)
                emit("needs_intervention", {"text": response, "code": human_code,
                                            "error": result.traceback})
            turn_dict = outcome.to_dict(failed.get("instruction", ""))
            turn_dict["continuation"] = True
            self.store.append_event(session_id, {"kind": "turn", "turn": turn_dict})
            return outcome
        finally:
            lock.release()


def _execution_payload(result: ExecuteResult) -> dict:
    return {
        "status": result.status,
        "stdout": result.stdout,
        "stderr": result.stderr,
        "traceback": result.traceback,
        "wall_time": result.wall_time,
        "artifacts": [{"name": a.name, "kind": a.kind} for a in result.new_artifacts],
        "state_reset": result.state_reset,
    }


def _column_from_dict(d: dict):
    from .profiling import ColumnProfile, ColumnStats

    stats = d.get("stats") or {}
    categorical = stats.get("categorical")
    if categorical is not None:
        categorical = [tuple(pair) for pair in categorical]
    return ColumnProfile(
        name=d["name"],
        inferred_type=d["inferred_type"],
        missing_count=d["missing_count"],
        stats=ColumnStats(numeric=stats.get("numeric"), categorical=categorical),
    )
