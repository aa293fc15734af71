"""Analysis-report generation from the dialogue history.

Reports are markdown with relative artifact links; the chosen template fixes
the section headers and per-section guidance.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import EmptyHistoryError, ModelError, NotFoundError, ReportError
from .llm import ChatMessage, ModelBackend
from .prompts import TemplateSet, build_report_prompt
from .store import SessionRecord, SessionStore

logger = logging.getLogger(__name__)

MISSING_SECTION_NOTICE = "_(no content was generated for this section)_"


@dataclass
class ReportTemplate:
    name: str
    sections: list[tuple[str, str]]  # (header, guidance)

    def __post_init__(self) -> None:
        if not self.sections:
            raise ValueError("a report template needs at least one section")
        headers = [h for h, _ in self.sections]
        if len(set(headers)) != len(headers):
            raise ValueError("section headers must be unique")


@dataclass
class ReportDocument:
    markdown_text: str
    referenced_artifacts: list[str]
    template_name: str
    artifact_name: str  # where the document itself was saved


def default_report_template_dir() -> Path:
    return Path(str(resources.files("tandem").joinpath("report_templates")))


def load_report_template(name: str, directory: str | Path | None = None) -> ReportTemplate:
    """Parse a template file: one ``Header: guidance`` pair per line."""
    d = Path(directory) if directory else default_report_template_dir()
    path = d / f"{name}.txt"
    if not path.is_file():
        raise NotFoundError(f"no report template named {name!r}")
    sections = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        header, _, guidance = line.partition(":")
        sections.append((header.strip(), guidance.strip()))
    return ReportTemplate(name=name, sections=sections)


def list_report_templates(directory: str | Path | None = None) -> list[str]:
    d = Path(directory) if directory else default_report_template_dir()
    return sorted(p.stem for p in d.glob("*.txt"))


def history_digest(record: SessionRecord) -> list[dict]:
    """Condense stored turns into the shape the report prompt expects."""
    digest = []
    for turn in record.turns:
        digest.append({
            "instruction": turn.get("instruction", ""),
            "code": turn.get("final_code") or "",
            "summary": turn.get("response_text", ""),
            "artifacts": turn.get("artifacts", []),
        })
    return digest


def _ensure_headers(markdown: str, template: ReportTemplate) -> str:
    for header, _guidance in template.sections:
        if not re.search(rf"^#+\s*{re.escape(header)}\s*$", markdown, re.MULTILINE):
            markdown += f"\n\n## {header}\n\n{MISSING_SECTION_NOTICE}"
    return markdown


def _resolve_artifact_links(markdown: str, store: SessionStore, session_id: str,
                            candidates: list[str]) -> tuple[str, list[str]]:
    referenced = []
    for name in candidates:
        if name in markdown and store.has_artifact(session_id, name):
            referenced.append(name)
            # normalize bare link targets to the artifacts route
            markdown = markdown.replace(f"]({name})", f"](artifacts/{name})")
    return markdown, referenced


def generate_report(record: SessionRecord, template: ReportTemplate,
                    backend: ModelBackend, store: SessionStore,
                    templates: TemplateSet | None = None) -> ReportDocument:
    """Produce, post-process and persist a report for one session."""
    digest = history_digest(record)
    if not digest:
        raise EmptyHistoryError("session has no completed turns")
    prompt = build_report_prompt(digest, template, templates)
    try:
        markdown = backend.complete([ChatMessage("user", prompt)])
    except ModelError as exc:
        raise ReportError(f"report backend failed: {exc}") from exc
    markdown = _ensure_headers(markdown, template)
    candidates = sorted({a["name"] for a in record.artifacts})
    markdown, referenced = _resolve_artifact_links(markdown, store, record.id, candidates)

    base = f"report-{template.name}"
    name = f"{base}.md"
    counter = 2
    while store.has_artifact(record.id, name):
        name = f"{base}-{counter}.md"
        counter += 1
    store.save_artifact(record.id, name, markdown.encode("utf-8"), kind="other")
    return ReportDocument(markdown_text=markdown, referenced_artifacts=referenced,
                          template_name=template.name, artifact_name=name)
