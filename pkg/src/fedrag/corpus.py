"""Plain-text corpus ingestion and overlapping character chunking."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Document:
    """One source text with a corpus-unique id."""

    doc_id: str
    text: str
    source_path: str = ""


@dataclass(frozen=True)
class Chunk:
    """Contiguous span of a document: ``text == parent[start:start+len(text)]``."""

    chunk_id: str
    doc_id: str
    start: int
    text: str


@dataclass(frozen=True)
class ChunkingConfig:
    """Chunk geometry. ``strategy`` is "fixed" (pure character stride,
    the default and the one with exact coverage guarantees) or
    "separator" (prefers paragraph/line/word boundaries)."""

    chunk_size: int = 1000
    overlap: int = 50
    strategy: str = "fixed"

    def __post_init__(self) -> None:
        if self.chunk_size < 1:
            raise ValueError(f"chunk_size must be >= 1, got {self.chunk_size}")
        if not 0 <= self.overlap < self.chunk_size:
            raise ValueError(
                f"overlap must satisfy 0 <= overlap < chunk_size, "
                f"got overlap={self.overlap}, chunk_size={self.chunk_size}"
            )
        if self.strategy not in ("fixed", "separator"):
            raise ValueError(f"unknown chunking strategy {self.strategy!r}")


def load_corpus(directory: str | Path) -> list[Document]:
    """Load every ``.txt`` file under ``directory`` as one Document.

    Files are ordered lexicographically by name and the doc_id is the
    file stem. Empty or whitespace-only files are skipped with a
    warning; undecodable files are reported and skipped, the rest of
    the directory still loads.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"corpus directory not found: {directory}")

    documents: list[Document] = []
    for path in sorted(directory.glob("*.txt"), key=lambda p: p.name):
        try:
            text = path.read_text(encoding="utf-8")
        except UnicodeDecodeError as err:
            logger.warning("skipping %s: not valid UTF-8 (%s)", path, err)
            continue
        if not text.strip():
            logger.warning("skipping %s: empty after whitespace trim", path)
            continue
        documents.append(Document(doc_id=path.stem, text=text, source_path=str(path)))

    seen: set[str] = set()
    for doc in documents:
        if doc.doc_id in seen:
            raise ValueError(f"duplicate doc_id {doc.doc_id!r} in {directory}")
        seen.add(doc.doc_id)
    return documents


def chunk_document(doc: Document, cfg: ChunkingConfig | None = None) -> list[Chunk]:
    """Segment a document into overlapping character chunks.

    With the fixed strategy, chunks start at offsets 0, s, 2s, ... where
    s = chunk_size - overlap; all chunks except possibly the last are
    exactly chunk_size characters, every character is covered, and no
    chunk lies fully inside the previous one.
    """
    cfg = cfg or ChunkingConfig()
    if cfg.strategy == "separator":
        spans = _separator_spans(doc.text, cfg)
    else:
        spans = _fixed_spans(doc.text, cfg)
    return [
        Chunk(
            chunk_id=f"{doc.doc_id}:{i:04d}",
            doc_id=doc.doc_id,
            start=start,
            text=doc.text[start:end],
        )
        for i, (start, end) in enumerate(spans)
    ]


def _fixed_spans(text: str, cfg: ChunkingConfig) -> list[tuple[int, int]]:
    length = len(text)
    if length == 0:
        return []
    stride = cfg.chunk_size - cfg.overlap
    spans = []
    start = 0
    while True:
        end = min(start + cfg.chunk_size, length)
        spans.append((start, end))
        if end == length:
            return spans
        start += stride


def _best_cut(text: str, lo: int, hi: int) -> int:
    """Largest boundary in (lo, hi] preferring paragraph, line, then word."""
    for sep in ("\n\n", "\n", " "):
        idx = text.rfind(sep, lo, hi)
        if idx > lo:
            return idx + len(sep)
    return hi


def _separator_spans(text: str, cfg: ChunkingConfig) -> list[tuple[int, int]]:
    length = len(text)
    if length == 0:
        return []
    spans = []
    start = 0
    while True:
        if length - start <= cfg.chunk_size:
            spans.append((start, length))
            return spans
        end = _best_cut(text, start, start + cfg.chunk_size)
        spans.append((start, end))
        nxt = end - cfg.overlap
        start = nxt if nxt > start else end


def chunk_corpus(documents: list[Document], cfg: ChunkingConfig | None = None) -> list[Chunk]:
    """Chunk every document, preserving document order."""
    cfg = cfg or ChunkingConfig()
    chunks: list[Chunk] = []
    for doc in documents:
        chunks.extend(chunk_document(doc, cfg))
    return chunks


def write_chunk_manifest(chunks: list[Chunk], path: str | Path) -> None:
    """Export chunk provenance as CSV: chunk_id,doc_id,start,length."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["chunk_id", "doc_id", "start", "length"])
        for chunk in chunks:
            writer.writerow([chunk.chunk_id, chunk.doc_id, chunk.start, len(chunk.text)])
