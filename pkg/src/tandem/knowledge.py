"""Key-value knowledge base: (description, code) pairs matched to user
instructions by embedding cosine similarity with a strict threshold.

The store is a human-editable directory, one file per entry with a
front-matter description block followed by the code body, so analysts can
author knowledge packs with any text editor.
"""

from __future__ import annotations

import hashlib
import logging
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol, Sequence

import httpx
import numpy as np

from .errors import (
    DegenerateVectorError,
    DimensionError,
    EmbedError,
    ModelError,
    NotFoundError,
)
from .llm import ChatMessage, ModelBackend
from .prompts import TemplateSet, build_knowledge_prompt

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.5
ENTRY_SUFFIX = ".md"
_FRONT_MATTER_RE = re.compile(
    r"\A---\nid: (?P<id>[^\n]+)\ndescription: (?P<description>[^\n]+)\n---\n",
)


@dataclass(frozen=True)
class KnowledgeEntry:
    id: str
    description: str
    code: str


@dataclass
class MatchResult:
    matched: Optional[tuple[KnowledgeEntry, float]]
    all_scores: list[tuple[str, float]]


class Embedder(Protocol):
    dimension: int

    def embed(self, text: str) -> np.ndarray: ...


class HashEmbedder:
    """Seeded deterministic hash-projection embedder (test/default adapter).

    Same text always maps to the same vector; non-empty text never maps to
    the zero vector. Not a semantic embedding: production deployments plug
    a real embeddings endpoint in behind the same protocol.
    """

    def __init__(self, dimension: int = 64, seed: int = 0) -> None:
        self.dimension = dimension
        self.seed = seed

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dimension, dtype=float)
        tokens = re.findall(r"\w+", text.lower()) or [text]
        for token in tokens:
            digest = hashlib.sha256(f"{self.seed}:{token}".encode()).digest()
            idx = int.from_bytes(digest[:4], "big") % self.dimension
            sign = 1.0 if digest[4] % 2 == 0 else -1.0
            vec[idx] += sign
        if not vec.any():
            fallback = hashlib.sha256(f"{self.seed}::{text}".encode()).digest()
            vec[int.from_bytes(fallback[:4], "big") % self.dimension] = 1.0
        return vec


class HttpEmbedder:
    """Adapter for an OpenAI-style /embeddings endpoint."""

    def __init__(self, base_url: str, model_name: str, dimension: int,
                 timeout: float = 30.0,
                 transport: httpx.BaseTransport | None = None) -> None:
        self.dimension = dimension
        self.model_name = model_name
        self._client = httpx.Client(base_url=base_url.rstrip("/"), timeout=timeout,
                                    transport=transport)

    def embed(self, text: str) -> np.ndarray:
        try:
            resp = self._client.post("/embeddings",
                                     json={"model": self.model_name, "input": text})
            resp.raise_for_status()
            values = resp.json()["data"][0]["embedding"]
        except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
            raise EmbedError(f"embedding request failed: {exc}") from exc
        vec = np.asarray(values, dtype=float)
        if vec.shape != (self.dimension,):
            raise EmbedError(f"embedding has shape {vec.shape}, expected ({self.dimension},)")
        return vec


def cosine_similarity(a: Sequence[float], b: Sequence[float]) -> float:
    va = np.asarray(a, dtype=float)
    vb = np.asarray(b, dtype=float)
    if va.shape != vb.shape or va.ndim != 1:
        raise DimensionError(f"vector shapes differ: {va.shape} vs {vb.shape}")
    norm_a = float(np.linalg.norm(va))
    norm_b = float(np.linalg.norm(vb))
    if norm_a == 0.0 or norm_b == 0.0:
        raise DegenerateVectorError("cosine similarity undefined for zero vector")
    return float(np.dot(va, vb) / (norm_a * norm_b))


class KnowledgeStore:
    """Directory-backed store of knowledge entries, insertion-ordered.

    Entry files are named ``<index>.md`` so the on-disk order matches the
    tie-break order of :func:`match`.
    """

    def __init__(self, directory: str | Path) -> None:
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()
        self._entries: list[KnowledgeEntry] = []
        self._embedding_cache: dict[str, np.ndarray] = {}
        self._next_seq = 0
        self._load()

    def _load(self) -> None:
        for path in sorted(self.directory.glob(f"*{ENTRY_SUFFIX}")):
            text = path.read_text(encoding="utf-8")
            m = _FRONT_MATTER_RE.match(text)
            if not m:
                logger.warning("skipping malformed knowledge file %s", path)
                continue
            self._entries.append(KnowledgeEntry(
                id=m.group("id").strip(),
                description=m.group("description").strip(),
                code=text[m.end():].rstrip("\n"),
            ))
        if self._entries:
            self._next_seq = max(int(e.id) for e in self._entries if e.id.isdigit()) + 1

    def _path_for(self, entry_id: str) -> Path:
        return self.directory / f"{entry_id}{ENTRY_SUFFIX}"

    def add_entry(self, description: str, code: str) -> str:
        if not description.strip() or not code.strip():
            raise ValueError("description and code must be non-empty")
        with self._lock:
            entry_id = f"{self._next_seq:04d}"
            self._next_seq += 1
            one_line = " ".join(description.split())
            entry = KnowledgeEntry(id=entry_id, description=one_line, code=code)
            self._path_for(entry_id).write_text(
                f"---\nid: {entry_id}\ndescription: {one_line}\n---\n{code}\n",
                encoding="utf-8",
            )
            self._entries.append(entry)
            self._embedding_cache.pop(entry_id, None)
            return entry_id

    def remove_entry(self, entry_id: str) -> None:
        with self._lock:
            for i, entry in enumerate(self._entries):
                if entry.id == entry_id:
                    del self._entries[i]
                    self._embedding_cache.pop(entry_id, None)
                    self._path_for(entry_id).unlink(missing_ok=True)
                    return
            raise NotFoundError(f"no knowledge entry with id {entry_id!r}")

    def list_entries(self) -> list[KnowledgeEntry]:
        with self._lock:
            return list(self._entries)

    def get_entry(self, entry_id: str) -> KnowledgeEntry:
        for entry in self.list_entries():
            if entry.id == entry_id:
                return entry
        raise NotFoundError(f"no knowledge entry with id {entry_id!r}")

    def _description_embedding(self, entry: KnowledgeEntry, embedder: Embedder) -> np.ndarray:
        cached = self._embedding_cache.get(entry.id)
        if cached is not None:
            return cached
        vec = embedder.embed(entry.description)
        self._embedding_cache[entry.id] = vec
        return vec


def match(store: KnowledgeStore, instruction: str, theta: float,
          embedder: Embedder) -> MatchResult:
    """Select the entry with the highest cosine similarity strictly above theta.

    Ties break to the lowest insertion index. An empty store or all scores
    at or below theta yield no match (scores are still reported).
    """
    if not -1.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [-1, 1], got {theta}")
    entries = store.list_entries()
    try:
        instruction_vec = embedder.embed(instruction)
        with store._lock:
            scored = [
                (entry, cosine_similarity(store._description_embedding(entry, embedder),
                                          instruction_vec))
                for entry in entries
            ]
    except (DimensionError, DegenerateVectorError):
        raise
    except Exception as exc:
        raise EmbedError(f"embedder failed: {exc}") from exc
    best: Optional[tuple[KnowledgeEntry, float]] = None
    for entry, score in scored:
        if score > theta and (best is None or score > best[1]):
            best = (entry, score)
    return MatchResult(matched=best, all_scores=[(e.id, s) for e, s in scored])


def answer_with_knowledge(query: str, match_result: MatchResult,
                          demos: Sequence[dict], backend: ModelBackend,
                          templates: TemplateSet | None = None) -> str:
    """Answer a query by in-context learning over the matched code, if any."""
    if match_result.matched is not None:
        entry, _score = match_result.matched
        prompt = build_knowledge_prompt(query, entry.code, demos, templates)
    else:
        prompt = query
    try:
        return backend.complete([ChatMessage("user", prompt)])
    except ModelError:
        raise
