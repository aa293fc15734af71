import uuid

import pytest

ACCEPTANCE_MODULE = "test_acceptance.py"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One verdict line per acceptance test, whatever else the run printed."""
    lines = []
    for bucket, verdict in (("passed", "PASS"), ("failed", "FAIL"),
                            ("error", "FAIL")):
        for report in terminalreporter.stats.get(bucket, []):
            if ACCEPTANCE_MODULE not in report.nodeid:
                continue
            if getattr(report, "when", "call") != "call" and verdict == "PASS":
                continue
            name = report.nodeid.split("::")[-1]
            name = name.removeprefix("test_").replace("_", "-")
            lines.append(f"acceptance {name}: {verdict}")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(set(lines)):
            terminalreporter.write_line(line)

from tandem.llm import ScriptedBackend
from tandem.store import SessionStore


@pytest.fixture
def store(tmp_path):
    return SessionStore(tmp_path / "sessions")


@pytest.fixture
def session_id(store):
    return store.create_session()


@pytest.fixture
def unique_id():
    """Session id generator for tests that talk to the kernel registry."""
    return lambda: f"test-{uuid.uuid4().hex[:12]}"


def scripted(*steps, strict=True):
    return ScriptedBackend(steps=list(steps), strict=strict)


TOY_CSV = "a,b\n1,2\n3,\n"


@pytest.fixture
def toy_csv(tmp_path):
    p = tmp_path / "toy.csv"
    p.write_text(TOY_CSV, encoding="utf-8")
    return p
