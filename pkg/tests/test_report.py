import pytest

from tandem.errors import EmptyHistoryError, NotFoundError, ReportError
from tandem.llm import FailingBackend, ScriptedBackend
from tandem.report import (
    MISSING_SECTION_NOTICE,
    ReportTemplate,
    generate_report,
    history_digest,
    list_report_templates,
    load_report_template,
)

STANDARD_HEADERS = ["Data", "Processing", "Visualization", "Model",
                    "Evaluation", "Conclusions"]


def seed_turn(store, session_id, *, artifacts=(), instruction="analyze",
              code="print(1)", summary="done"):
    for name in artifacts:
        store.save_artifact(session_id, name, b"payload")
    store.append_event(session_id, {"kind": "turn", "turn": {
        "status": "ok", "attempts_used": 0, "final_code": code,
        "response_text": summary, "instruction": instruction,
        "trace": [], "artifacts": list(artifacts)}})


class TestTemplates:
    def test_standard_template_ships(self):
        assert "standard_analysis" in list_report_templates()
        template = load_report_template("standard_analysis")
        assert [h for h, _ in template.sections] == STANDARD_HEADERS
        assert all(guidance for _, guidance in template.sections)

    def test_unknown_template(self):
        with pytest.raises(NotFoundError):
            load_report_template("no_such_template")

    def test_custom_directory(self, tmp_path):
        (tmp_path / "brief.txt").write_text("Overview: one paragraph\n")
        template = load_report_template("brief", tmp_path)
        assert template.sections == [("Overview", "one paragraph")]

    def test_duplicate_headers_rejected(self):
        with pytest.raises(ValueError):
            ReportTemplate("bad", [("Data", "a"), ("Data", "b")])

    def test_empty_template_rejected(self):
        with pytest.raises(ValueError):
            ReportTemplate("empty", [])


class TestHistoryDigest:
    def test_digest_shape(self, store, session_id):
        seed_turn(store, session_id, instruction="plot it", code="plt.show()",
                  summary="plotted", artifacts=("fig.png",))
        record = store.load_session(session_id)
        assert history_digest(record) == [{
            "instruction": "plot it", "code": "plt.show()",
            "summary": "plotted", "artifacts": ["fig.png"]}]

    def test_plain_reply_turn_has_empty_code(self, store, session_id):
        store.append_event(session_id, {"kind": "turn", "turn": {
            "status": "plain_reply", "attempts_used": 0, "final_code": None,
            "response_text": "hello", "instruction": "hi", "trace": [],
            "artifacts": []}})
        digest = history_digest(store.load_session(session_id))
        assert digest[0]["code"] == ""


class TestGenerateReport:
    TEMPLATE = ReportTemplate("mini", [("Data", "describe it"),
                                       ("Conclusions", "wrap up")])

    def test_full_generation(self, store, session_id):
        seed_turn(store, session_id, artifacts=("hist.png",))
        backend = ScriptedBackend(steps=[
            ("mini", "# Data\n\nSee ![hist](hist.png)\n\n# Conclusions\n\nDone.")])
        record = store.load_session(session_id)
        doc = generate_report(record, self.TEMPLATE, backend, store)
        assert doc.referenced_artifacts == ["hist.png"]
        assert "](artifacts/hist.png)" in doc.markdown_text
        assert doc.artifact_name == "report-mini.md"
        saved = store.load_artifact(session_id, "report-mini.md")
        assert saved.decode() == doc.markdown_text

    def test_missing_sections_appended(self, store, session_id):
        seed_turn(store, session_id)
        backend = ScriptedBackend(steps=[("mini", "# Data\n\nOnly data here.")])
        doc = generate_report(store.load_session(session_id), self.TEMPLATE,
                              backend, store)
        assert "## Conclusions" in doc.markdown_text
        assert MISSING_SECTION_NOTICE in doc.markdown_text

    def test_unknown_artifact_reference_ignored(self, store, session_id):
        seed_turn(store, session_id)
        backend = ScriptedBackend(steps=[
            ("mini", "# Data\n\n![ghost](ghost.png)\n\n# Conclusions\n\nok")])
        doc = generate_report(store.load_session(session_id), self.TEMPLATE,
                              backend, store)
        assert doc.referenced_artifacts == []
        assert "](ghost.png)" in doc.markdown_text  # left untouched

    def test_second_report_gets_fresh_name(self, store, session_id):
        seed_turn(store, session_id)
        backend = ScriptedBackend(steps=[
            ("mini", "# Data\n\na\n\n# Conclusions\n\nb"),
            ("mini", "# Data\n\nc\n\n# Conclusions\n\nd")], )
        record = store.load_session(session_id)
        first = generate_report(record, self.TEMPLATE, backend, store)
        second = generate_report(record, self.TEMPLATE, backend, store)
        assert first.artifact_name == "report-mini.md"
        assert second.artifact_name == "report-mini-2.md"

    def test_empty_history_rejected(self, store, session_id):
        with pytest.raises(EmptyHistoryError):
            generate_report(store.load_session(session_id), self.TEMPLATE,
                            ScriptedBackend(steps=[]), store)

    def test_backend_failure_wrapped(self, store, session_id):
        seed_turn(store, session_id)
        with pytest.raises(ReportError):
            generate_report(store.load_session(session_id), self.TEMPLATE,
                            FailingBackend(), store)
