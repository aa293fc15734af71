"""Delimited-dataset ingestion and profiling.

The profile feeds the programmer's system prompt: dimensions, column names,
inferred types, missing counts, and a plain-text statistical description.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import IngestError, ProfileError

logger = logging.getLogger(__name__)

DEFAULT_SIZE_LIMIT_BYTES = 200 * 1024 * 1024
CANDIDATE_DELIMITERS = (",", ";", "\t")
MISSING_TOKENS = {"", "na", "nan", "null"}  # compared case-insensitively
CATEGORICAL_MIN_DISTINCT = 20
CATEGORICAL_ROW_FRACTION = 0.05
TOP_K_CATEGORIES = 5


@dataclass
class Table:
    path: str
    header: list[str]
    # cell = None marks a missing value
    rows: list[list[Optional[str]]]

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def n_cols(self) -> int:
        return len(self.header)

    def column(self, idx: int) -> list[Optional[str]]:
        return [row[idx] for row in self.rows]


@dataclass
class ColumnStats:
    numeric: Optional[dict] = None  # count/mean/std/min/q25/median/q75/max
    categorical: Optional[list[tuple[str, int]]] = None  # top-5 (value, freq)


@dataclass
class ColumnProfile:
    name: str
    inferred_type: str  # integer | real | categorical | boolean | text | unknown
    missing_count: int
    stats: ColumnStats = field(default_factory=ColumnStats)


@dataclass
class DatasetProfile:
    path: str
    n_rows: int
    n_cols: int
    columns: list[ColumnProfile]


def _is_missing(cell: str) -> bool:
    return cell.strip().lower() in MISSING_TOKENS


def _detect_delimiter(sample: str) -> str:
    header_line = sample.splitlines()[0] if sample else ""
    counts = {d: header_line.count(d) for d in CANDIDATE_DELIMITERS}
    best = max(CANDIDATE_DELIMITERS, key=lambda d: counts[d])
    return best if counts[best] > 0 else ","


def ingest_csv(path: str | Path, size_limit: int = DEFAULT_SIZE_LIMIT_BYTES) -> Table:
    """Parse a delimited text file with a header row.

    Delimiter is auto-detected among comma, semicolon and tab. Empty strings
    and "NA"/"NaN"/"null" (case-insensitive) are read as missing. Ragged rows
    abort ingestion with the offending line number.
    """
    p = Path(path)
    if not p.is_file():
        raise IngestError(f"not a readable file: {p}")
    if p.stat().st_size > size_limit:
        raise IngestError(f"file exceeds size limit ({p.stat().st_size} > {size_limit})")
    try:
        text = p.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise IngestError(f"cannot read {p}: {exc}") from exc
    return parse_delimited(text, path=str(p))


def parse_delimited(text: str, path: str = "<memory>") -> Table:
    if not text.strip():
        raise IngestError("empty file")
    delimiter = _detect_delimiter(text)
    reader = csv.reader(io.StringIO(text), delimiter=delimiter)
    try:
        header = next(reader)
    except StopIteration:
        raise IngestError("missing header row") from None
    rows: list[list[Optional[str]]] = []
    for lineno, raw in enumerate(reader, start=2):
        if not raw:  # blank trailing line
            continue
        if len(raw) != len(header):
            raise IngestError(
                f"ragged row at line {lineno}: expected {len(header)} fields, got {len(raw)}"
            )
        rows.append([None if _is_missing(c) else c for c in raw])
    return Table(path=path, header=header, rows=rows)


def _parses_as_int(value: str) -> bool:
    try:
        int(value)
        return True
    except ValueError:
        return False


def _parses_as_float(value: str) -> bool:
    try:
        float(value)
        return True
    except ValueError:
        return False


def _infer_type(values: Sequence[str], n_rows: int,
                min_distinct: int = CATEGORICAL_MIN_DISTINCT,
                row_fraction: float = CATEGORICAL_ROW_FRACTION) -> str:
    if not values:
        return "unknown"
    lowered = {v.strip().lower() for v in values}
    if lowered <= {"true", "false"}:
        return "boolean"
    if all(_parses_as_int(v) for v in values):
        return "integer"
    if all(_parses_as_float(v) for v in values):
        return "real"
    threshold = max(min_distinct, int(row_fraction * n_rows))
    if len(set(values)) <= threshold:
        return "categorical"
    return "text"


def _numeric_stats(values: Sequence[str]) -> dict:
    arr = np.array([float(v) for v in values], dtype=float)
    q25, median, q75 = np.quantile(arr, [0.25, 0.5, 0.75])  # linear interpolation
    return {
        "count": int(arr.size),
        "mean": float(arr.mean()),
        "std": float(arr.std(ddof=1)) if arr.size > 1 else 0.0,
        "min": float(arr.min()),
        "q25": float(q25),
        "median": float(median),
        "q75": float(q75),
        "max": float(arr.max()),
    }


def _categorical_stats(values: Sequence[str]) -> list[tuple[str, int]]:
    freq: dict[str, int] = {}
    for v in values:
        freq[v] = freq.get(v, 0) + 1
    ranked = sorted(freq.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:TOP_K_CATEGORIES]


def profile(table: Table,
            min_distinct: int = CATEGORICAL_MIN_DISTINCT,
            row_fraction: float = CATEGORICAL_ROW_FRACTION) -> DatasetProfile:
    """Compute the per-column profile of a parsed table."""
    if table.n_cols == 0:
        raise ProfileError("table has no columns")
    columns: list[ColumnProfile] = []
    for idx, name in enumerate(table.header):
        cells = table.column(idx)
        present = [c for c in cells if c is not None]
        missing = len(cells) - len(present)
        inferred = _infer_type(present, table.n_rows, min_distinct, row_fraction)
        stats = ColumnStats()
        if inferred in ("integer", "real") and present:
            stats.numeric = _numeric_stats(present)
        elif present:
            stats.categorical = _categorical_stats(present)
        columns.append(ColumnProfile(name=name, inferred_type=inferred,
                                     missing_count=missing, stats=stats))
    return DatasetProfile(path=table.path, n_rows=table.n_rows,
                          n_cols=table.n_cols, columns=columns)


def render_profile_text(prof: DatasetProfile) -> str:
    """Deterministic plain-text rendering embedded in the programmer prompt."""
    lines = [
        f"dataset path: {prof.path}",
        f"rows: {prof.n_rows}",
        f"columns: {prof.n_cols}",
        "",
        "column summary:",
    ]
    for col in prof.columns:
        lines.append(f"  - {col.name} ({col.inferred_type}), missing: {col.missing_count}")
    lines.append("")
    lines.append("statistical description:")
    for col in prof.columns:
        if col.stats.numeric:
            s = col.stats.numeric
            lines.append(f"  {col.name}:")
            for key in ("count", "mean", "std", "min", "q25", "median", "q75", "max"):
                lines.append(f"    {key:<8}{s[key]:.6g}")
        elif col.stats.categorical:
            lines.append(f"  {col.name}: top values")
            for value, freq in col.stats.categorical:
                lines.append(f"    {value!r}: {freq}")
        else:
            lines.append(f"  {col.name}: no non-missing values")
    return "\n".join(lines)


def write_delimited(table: Table, path: str | Path, delimiter: str = ",") -> None:
    """Serialize a table back to disk (round-trip tests and fixtures)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        # QUOTE_ALL so a lone missing cell never serializes to a blank line
        writer = csv.writer(fh, delimiter=delimiter, quoting=csv.QUOTE_ALL)
        writer.writerow(table.header)
        for row in table.rows:
            writer.writerow(["" if c is None else c for c in row])
