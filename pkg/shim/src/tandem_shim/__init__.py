"""Persistent code-execution child process.

Reads `{"type":"execute","id":N,"code":...}` lines on stdin, runs the code
in one long-lived namespace, and answers each request with exactly one
`{"type":"result",...}` line on stdout. stderr carries diagnostics only;
no protocol bytes ever go there and no diagnostics ever go to stdout.
"""

from __future__ import annotations

import contextlib
import io
import json
import os
import sys
import traceback

PROTOCOL_VERSION = 1


def _snapshot(root: str) -> dict[str, tuple[int, int]]:
    """Map of relative file path -> (mtime_ns, size) under the working dir."""
    snap: dict[str, tuple[int, int]] = {}
    for dirpath, _dirnames, filenames in os.walk(root):
        for name in filenames:
            full = os.path.join(dirpath, name)
            try:
                st = os.stat(full)
            except OSError:
                continue
            rel = os.path.relpath(full, root)
            snap[rel] = (st.st_mtime_ns, st.st_size)
    return snap


def _changed_files(before: dict, after: dict) -> list[str]:
    return sorted(rel for rel, sig in after.items() if before.get(rel) != sig)


def _emit(channel, obj: dict) -> None:
    channel.write(json.dumps(obj) + "\n")
    channel.flush()


def serve(stdin=None, stdout=None) -> None:
    stdin = stdin or sys.stdin
    protocol_out = stdout or sys.stdout
    # Generated plotting code must never try to open a display.
    os.environ.setdefault("MPLBACKEND", "Agg")
    workdir = os.getcwd()
    namespace: dict = {"__name__": "__main__"}
    _emit(protocol_out, {"type": "hello", "version": PROTOCOL_VERSION})

    for line in stdin:
        if not line.strip():
            continue
        try:
            msg = json.loads(line)
            msg_type = msg.get("type")
            msg_id = msg.get("id", -1)
            if msg_type != "execute" or not isinstance(msg.get("code"), str):
                raise ValueError(f"unsupported message: type={msg_type!r}")
        except ValueError as exc:
            _emit(protocol_out, {
                "type": "result", "id": -1, "status": "error",
                "stdout": "", "stderr": "",
                "traceback": f"ProtocolError: {exc}", "new_files": [],
            })
            continue

        before = _snapshot(workdir)
        out_buf, err_buf = io.StringIO(), io.StringIO()
        tb: str | None = None
        try:
            with contextlib.redirect_stdout(out_buf), contextlib.redirect_stderr(err_buf):
                exec(compile(msg["code"], "<cell>", "exec"), namespace)
        except BaseException:
            # Partial state from the failed cell stays in the namespace,
            # matching interactive-kernel convention.
            tb = traceback.format_exc()
        _emit(protocol_out, {
            "type": "result",
            "id": msg_id,
            "status": "success" if tb is None else "error",
            "stdout": out_buf.getvalue(),
            "stderr": err_buf.getvalue(),
            "traceback": tb,
            "new_files": _changed_files(before, _snapshot(workdir)),
        })
