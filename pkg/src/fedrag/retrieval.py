"""Sparse (BM25), dense (cosine kNN), and rank-fused hybrid retrieval.

The hybrid ranking is weighted reciprocal-rank fusion: each retriever
contributes ``weight / (rrf_k + rank)`` for the chunks it ranked, with
the sparse side weighted 0.8 and the dense side 0.2 by default.
"""

from __future__ import annotations

import base64
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import Chunk
from .textutil import tokenize

INDEX_FORMAT_VERSION = 1


@dataclass(frozen=True)
class EnsembleConfig:
    """Fusion weights and depth for the hybrid retriever."""

    w_sparse: float = 0.8
    w_dense: float = 0.2
    rrf_k: float = 60.0
    top_k: int = 4

    def __post_init__(self) -> None:
        if self.w_sparse < 0 or self.w_dense < 0:
            raise ValueError("ensemble weights must be >= 0")
        if abs(self.w_sparse + self.w_dense - 1.0) > 1e-9:
            raise ValueError(
                f"ensemble weights must sum to 1, got {self.w_sparse} + {self.w_dense}"
            )
        if self.rrf_k <= 0:
            raise ValueError("rrf_k must be > 0")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")


@dataclass
class RetrievalResult:
    """Ranked (chunk_id, score) pairs, scores non-increasing, ids distinct."""

    query: str
    ranked: list[tuple[str, float]] = field(default_factory=list)

    def chunk_ids(self) -> list[str]:
        return [cid for cid, _ in self.ranked]


def _ranked_list(scores: dict[str, float], top_k: int, query: str) -> RetrievalResult:
    ordered = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    return RetrievalResult(query=query, ranked=ordered[:top_k])


class Bm25Index:
    """Okapi BM25 inverted index over chunks.

    IDF uses the always-positive variant ln(1 + (N - df + 0.5) / (df + 0.5)).
    """

    def __init__(self, chunks: list[Chunk], k1: float = 1.5, b: float = 0.75):
        if not chunks:
            raise ValueError("cannot build a BM25 index over zero chunks")
        if k1 <= 0:
            raise ValueError("k1 must be > 0")
        if not 0.0 <= b <= 1.0:
            raise ValueError("b must be in [0, 1]")
        self.k1 = k1
        self.b = b
        self.postings: dict[str, list[tuple[str, int]]] = {}
        self.doc_lengths: dict[str, int] = {}
        for chunk in sorted(chunks, key=lambda c: c.chunk_id):
            if chunk.chunk_id in self.doc_lengths:
                raise ValueError(f"duplicate chunk_id {chunk.chunk_id!r}")
            tokens = tokenize(chunk.text)
            self.doc_lengths[chunk.chunk_id] = len(tokens)
            freqs: dict[str, int] = {}
            for token in tokens:
                freqs[token] = freqs.get(token, 0) + 1
            for term, tf in freqs.items():
                self.postings.setdefault(term, []).append((chunk.chunk_id, tf))
        self.doc_count = len(self.doc_lengths)
        self.avg_doc_length = sum(self.doc_lengths.values()) / self.doc_count

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        return math.log(1.0 + (self.doc_count - df + 0.5) / (df + 0.5))

    def chunk_ids(self) -> list[str]:
        return sorted(self.doc_lengths)


def build_bm25(chunks: list[Chunk], k1: float = 1.5, b: float = 0.75) -> Bm25Index:
    """Build the sparse index; raises ValueError on an empty chunk list."""
    return Bm25Index(chunks, k1=k1, b=b)


def bm25_query(index: Bm25Index, query: str, top_k: int) -> RetrievalResult:
    """Score the query against the index; zero-score chunks are excluded.

    Query tokens contribute once per occurrence. Ties break by ascending
    chunk_id.
    """
    scores: dict[str, float] = {}
    for term in tokenize(query):
        postings = index.postings.get(term)
        if not postings:
            continue
        idf = index.idf(term)
        for chunk_id, tf in postings:
            norm = index.k1 * (1.0 - index.b + index.b * index.doc_lengths[chunk_id] / index.avg_doc_length)
            contribution = idf * tf * (index.k1 + 1.0) / (tf + norm)
            scores[chunk_id] = scores.get(chunk_id, 0.0) + contribution
    scores = {cid: s for cid, s in scores.items() if s != 0.0}
    return _ranked_list(scores, top_k, query)


class DenseIndex:
    """Exact cosine-similarity index over L2-normalized chunk embeddings.

    Chunks whose embedding is the zero vector are stored but never ranked.
    """

    def __init__(self, ids: list[str], vectors: np.ndarray):
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2 or len(ids) != vectors.shape[0]:
            raise ValueError("ids and vectors disagree on the number of chunks")
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate chunk ids")
        self.ids = list(ids)
        self.dimension = int(vectors.shape[1])
        norms = np.linalg.norm(vectors, axis=1)
        self.rankable = norms > 0.0
        safe = np.where(self.rankable, norms, 1.0)
        self.vectors = vectors / safe[:, None]

    def vector(self, chunk_id: str) -> np.ndarray:
        return self.vectors[self.ids.index(chunk_id)]

    @classmethod
    def _from_normalized(cls, ids: list[str], vectors: np.ndarray) -> "DenseIndex":
        # Bypasses re-normalization so persisted vectors reload bit-exactly.
        index = cls.__new__(cls)
        index.ids = list(ids)
        index.vectors = np.asarray(vectors, dtype=np.float64)
        index.dimension = int(index.vectors.shape[1])
        index.rankable = np.linalg.norm(index.vectors, axis=1) > 0.0
        return index


def build_dense(chunks: list[Chunk], embedder) -> DenseIndex:
    """Embed and L2-normalize every chunk; dimension mismatches raise."""
    if not chunks:
        raise ValueError("cannot build a dense index over zero chunks")
    ordered = sorted(chunks, key=lambda c: c.chunk_id)
    vectors = np.zeros((len(ordered), embedder.dimension), dtype=np.float64)
    for i, chunk in enumerate(ordered):
        vec = np.asarray(embedder.embed(chunk.text), dtype=np.float64)
        if vec.shape != (embedder.dimension,):
            raise ValueError(
                f"embedder produced shape {vec.shape} for chunk {chunk.chunk_id!r}, "
                f"expected ({embedder.dimension},)"
            )
        vectors[i] = vec
    return DenseIndex([c.chunk_id for c in ordered], vectors)


def dense_query(index: DenseIndex, query: str, embedder, top_k: int) -> RetrievalResult:
    """Exact kNN by cosine over all rankable vectors, descending score."""
    qvec = np.asarray(embedder.embed(query), dtype=np.float64)
    if qvec.shape != (index.dimension,):
        raise ValueError(f"query embedding dimension {qvec.shape} != {index.dimension}")
    qnorm = np.linalg.norm(qvec)
    if qnorm == 0.0:
        return RetrievalResult(query=query, ranked=[])
    qvec = qvec / qnorm
    sims = index.vectors @ qvec
    scores = {
        cid: float(sims[i]) for i, cid in enumerate(index.ids) if index.rankable[i]
    }
    return _ranked_list(scores, top_k, query)


def ensemble_query(
    bm25: Bm25Index,
    dense: DenseIndex,
    query: str,
    cfg: EnsembleConfig,
    embedder,
) -> RetrievalResult:
    """Weighted reciprocal-rank fusion of the sparse and dense rankings.

    fused(c) = w_sparse / (rrf_k + rank_sparse(c)) + w_dense / (rrf_k + rank_dense(c))
    with 1-based ranks; a chunk missing from one ranking contributes 0
    from that side. Chunks with fused score 0 are dropped.
    """
    sparse = bm25_query(bm25, query, top_k=bm25.doc_count)
    dense_res = dense_query(dense, query, embedder, top_k=len(dense.ids))
    fused: dict[str, float] = {}
    for rank, (chunk_id, _) in enumerate(sparse.ranked, start=1):
        fused[chunk_id] = fused.get(chunk_id, 0.0) + cfg.w_sparse / (cfg.rrf_k + rank)
    for rank, (chunk_id, _) in enumerate(dense_res.ranked, start=1):
        fused[chunk_id] = fused.get(chunk_id, 0.0) + cfg.w_dense / (cfg.rrf_k + rank)
    fused = {cid: s for cid, s in fused.items() if s != 0.0}
    return _ranked_list(fused, cfg.top_k, query)


def save_indices(bm25: Bm25Index, dense: DenseIndex, directory: str | Path) -> None:
    """Persist both indices; load_indices round-trips to identical rankings."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    payload = {
        "version": INDEX_FORMAT_VERSION,
        "k1": bm25.k1,
        "b": bm25.b,
        "doc_lengths": bm25.doc_lengths,
        "postings": {term: [[cid, tf] for cid, tf in plist] for term, plist in bm25.postings.items()},
    }
    (directory / "bm25.json").write_text(
        json.dumps(payload, sort_keys=True), encoding="utf-8"
    )
    blob = {
        "version": INDEX_FORMAT_VERSION,
        "dimension": dense.dimension,
        "ids": dense.ids,
        "vectors": base64.b64encode(np.ascontiguousarray(dense.vectors).tobytes()).decode("ascii"),
    }
    (directory / "dense.json").write_text(json.dumps(blob, sort_keys=True), encoding="utf-8")


def load_indices(directory: str | Path) -> tuple[Bm25Index, DenseIndex]:
    """Load indices written by save_indices."""
    directory = Path(directory)
    payload = json.loads((directory / "bm25.json").read_text(encoding="utf-8"))
    if payload.get("version") != INDEX_FORMAT_VERSION:
        raise ValueError(f"unsupported bm25 index version {payload.get('version')!r}")
    bm25 = Bm25Index.__new__(Bm25Index)
    bm25.k1 = payload["k1"]
    bm25.b = payload["b"]
    bm25.doc_lengths = {cid: int(n) for cid, n in payload["doc_lengths"].items()}
    bm25.postings = {
        term: [(cid, int(tf)) for cid, tf in plist] for term, plist in payload["postings"].items()
    }
    bm25.doc_count = len(bm25.doc_lengths)
    bm25.avg_doc_length = sum(bm25.doc_lengths.values()) / bm25.doc_count
    blob = json.loads((directory / "dense.json").read_text(encoding="utf-8"))
    if blob.get("version") != INDEX_FORMAT_VERSION:
        raise ValueError(f"unsupported dense index version {blob.get('version')!r}")
    raw = base64.b64decode(blob["vectors"])
    vectors = np.frombuffer(raw, dtype=np.float64).reshape(len(blob["ids"]), blob["dimension"])
    return bm25, DenseIndex._from_normalized(blob["ids"], vectors.copy())
