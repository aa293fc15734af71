"""Prompt assembly for the programmer, inspector, knowledge and report roles.

Every builder is a pure function of its inputs. Templates live in a plain
text directory with ``{{name}}`` placeholders so deployments can rewrite
them without touching code.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence, TYPE_CHECKING

from .errors import EmptyHistoryError
from .profiling import DatasetProfile, render_profile_text

if TYPE_CHECKING:
    from .report import ReportTemplate

ERROR_TAIL_CHARS = 4000

_PLACEHOLDER_RE = re.compile(r"\{\{(\w+)\}\}")


def default_template_dir() -> Path:
    return Path(str(resources.files("tandem").joinpath("templates")))


class TemplateSet:
    """Named prompt templates loaded from a directory of ``.txt`` files."""

    def __init__(self, directory: str | Path | None = None) -> None:
        self.directory = Path(directory) if directory else default_template_dir()

    def render(self, name: str, **values: str) -> str:
        text = (self.directory / f"{name}.txt").read_text(encoding="utf-8")
        return _PLACEHOLDER_RE.sub(lambda m: values.get(m.group(1), m.group(0)), text)

    def load_demos(self) -> list[dict]:
        path = self.directory / "demos.json"
        if not path.is_file():
            return []
        return json.loads(path.read_text(encoding="utf-8"))


@dataclass
class PromptContext:
    working_dir: str
    dataset_profile: Optional[DatasetProfile] = None
    role_preamble: str = ""
    io_format_rules: str = ""
    few_shot_demos: list[dict] = field(default_factory=list)
    templates: TemplateSet = field(default_factory=TemplateSet)


@dataclass
class ParsedReply:
    full_text: str
    code_blocks: list[str]

    @property
    def has_code(self) -> bool:
        return bool(self.code_blocks)


def extract_code_blocks(reply_text: str) -> ParsedReply:
    """Pull fenced code regions out of a model reply, in order.

    Fences are triple backticks at line start with an optional language tag.
    An unterminated final fence extends to the end of the text.
    """
    blocks: list[str] = []
    current: list[str] | None = None
    for line in reply_text.splitlines():
        if line.startswith("```"):
            if current is None:
                current = []
            else:
                blocks.append("\n".join(current))
                current = None
            continue
        if current is not None:
            current.append(line)
    if current is not None:
        blocks.append("\n".join(current))
    return ParsedReply(full_text=reply_text, code_blocks=blocks)


def _render_demos(demos: Sequence[dict]) -> str:
    parts = []
    for i, demo in enumerate(demos, start=1):
        part = [f"### Example {i}", f"User request: {demo['query']}"]
        if demo.get("knowledge"):
            part.append(f"Reference code:\n{demo['knowledge']}")
        part.append(f"Answer:\n{demo['answer']}")
        parts.append("\n".join(part))
    return "\n\n".join(parts)


def truncate_error(error: str, tail: int = ERROR_TAIL_CHARS) -> str:
    """Keep the last ``tail`` characters: the most recent frames carry the signal."""
    return error if len(error) <= tail else error[-tail:]


def build_programmer_system_prompt(ctx: PromptContext) -> str:
    if ctx.dataset_profile is not None:
        dataset_section = render_profile_text(ctx.dataset_profile)
    else:
        dataset_section = "No dataset has been uploaded yet."
    demo_section = ""
    if ctx.few_shot_demos:
        demo_section = "## Examples\n\n" + _render_demos(ctx.few_shot_demos)
    return ctx.templates.render(
        "programmer_system",
        role_preamble=ctx.role_preamble or "",
        working_dir=ctx.working_dir,
        dataset_section=dataset_section,
        io_format_rules=ctx.io_format_rules or "",
        demo_section=demo_section,
    ).strip() + "\n"


def build_inspector_prompt(code: str, error: str,
                           templates: TemplateSet | None = None) -> str:
    if not error:
        raise ValueError("error must be non-empty")
    templates = templates or TemplateSet()
    return templates.render("inspector", code=code, error=truncate_error(error))


def build_repair_prompt(prev_code: str, suggestion: str, error: str,
                        templates: TemplateSet | None = None) -> str:
    if not (prev_code and suggestion and error):
        raise ValueError("prev_code, suggestion and error must be non-empty")
    templates = templates or TemplateSet()
    return templates.render(
        "repair", prev_code=prev_code, suggestion=suggestion, error=truncate_error(error)
    )


def build_knowledge_prompt(query: str, knowledge_code: str,
                           demos: Sequence[dict] = (),
                           templates: TemplateSet | None = None) -> str:
    if not knowledge_code:
        raise ValueError("knowledge_code must be non-empty")
    templates = templates or TemplateSet()
    demo_section = _render_demos(demos) if demos else ""
    return templates.render(
        "knowledge", demo_section=demo_section, knowledge_code=knowledge_code, query=query
    )


def build_report_prompt(history: Sequence[dict], template: "ReportTemplate",
                        templates: TemplateSet | None = None) -> str:
    """Serialize the dialogue history against a report template's sections.

    History entries carry: instruction, code, summary, artifacts (names).
    """
    if not history:
        raise EmptyHistoryError("report needs at least one completed turn")
    templates = templates or TemplateSet()
    section_lines = [f"## {header}\n{guidance}" for header, guidance in template.sections]
    turn_lines = []
    for i, turn in enumerate(history, start=1):
        lines = [f"### Turn {i}", f"Instruction: {turn.get('instruction', '')}"]
        if turn.get("code"):
            lines.append(f"Code:\n```python\n{turn['code']}\n```")
        if turn.get("summary"):
            lines.append(f"Result summary: {turn['summary']}")
        for name in turn.get("artifacts", []):
            lines.append(f"Artifact: {name}")
        turn_lines.append("\n".join(lines))
    return templates.render(
        "report",
        template_name=template.name,
        sections="\n\n".join(section_lines),
        history="\n\n".join(turn_lines),
    )
