"""Retrieval-augmented answering and its no-retrieval ablation twin."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .corpus import Chunk
from .modelkit import Embedder, Generator
from .retrieval import (
    Bm25Index,
    DenseIndex,
    EnsembleConfig,
    RetrievalResult,
    build_bm25,
    build_dense,
    ensemble_query,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RagConfig:
    """Generation-side contract: deterministic (temperature 0), answers
    capped at 512 tokens, contexts joined in fused-rank order under a
    total token budget."""

    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    max_tokens: int = 512
    temperature: float = 0.0
    context_token_cap: int = 3500

    def __post_init__(self) -> None:
        if self.temperature != 0.0:
            raise ValueError("the pipeline contract requires temperature 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if self.context_token_cap < 1:
            raise ValueError("context_token_cap must be >= 1")


@dataclass(frozen=True)
class QaSample:
    """One evaluation item: a question and its reference answer."""

    sample_id: str
    question: str
    ground_truth: str

    def __post_init__(self) -> None:
        if not self.question or not self.ground_truth:
            raise ValueError(f"sample {self.sample_id!r}: question and ground_truth must be non-empty")


@dataclass
class RagOutput:
    """Answer plus the evidence that produced it. ``contexts`` is empty and
    ``retrieval`` is None on the no-RAG path."""

    sample_id: str
    answer: str
    contexts: list[str] = field(default_factory=list)
    retrieval: RetrievalResult | None = None
    error: str | None = None


@dataclass
class RagIndices:
    """Both retrieval indices plus the chunk texts they rank."""

    bm25: Bm25Index
    dense: DenseIndex
    embedder: Embedder
    texts: dict[str, str]


def build_rag_indices(
    chunks: Sequence[Chunk], embedder: Embedder, k1: float = 1.5, b: float = 0.75
) -> RagIndices:
    """Index one chunk collection for hybrid retrieval."""
    chunk_list = list(chunks)
    return RagIndices(
        bm25=build_bm25(chunk_list, k1=k1, b=b),
        dense=build_dense(chunk_list, embedder),
        embedder=embedder,
        texts={chunk.chunk_id: chunk.text for chunk in chunk_list},
    )


def _budgeted_contexts(texts: list[str], token_cap: int) -> list[str]:
    """Apply the context token budget, dropping lowest-ranked contexts first."""
    kept: list[str] = []
    used = 0
    for text in texts:
        count = len(text.split())
        if used + count > token_cap:
            if not kept:
                # A lone over-budget context is hard-truncated instead.
                kept.append(" ".join(text.split()[:token_cap]))
            break
        kept.append(text)
        used += count
    return kept


def answer_with_rag(
    sample: QaSample, indices: RagIndices, generator: Generator, cfg: RagConfig
) -> RagOutput:
    """Retrieve with the hybrid ensemble, then generate over the contexts
    in fused-rank order."""
    result = ensemble_query(
        indices.bm25, indices.dense, sample.question, cfg.ensemble, indices.embedder
    )
    ranked_texts = [indices.texts[cid] for cid, _ in result.ranked]
    contexts = _budgeted_contexts(ranked_texts, cfg.context_token_cap)
    answer = generator.generate(
        sample.question, contexts, max_tokens=cfg.max_tokens, temperature=cfg.temperature
    )
    return RagOutput(
        sample_id=sample.sample_id, answer=answer, contexts=contexts, retrieval=result
    )


def answer_without_rag(
    sample: QaSample, generator: Generator, cfg: RagConfig | None = None
) -> RagOutput:
    """Ablation path: the generator sees no contexts and nothing is retrieved."""
    cfg = cfg or RagConfig()
    answer = generator.generate(
        sample.question, [], max_tokens=cfg.max_tokens, temperature=cfg.temperature
    )
    return RagOutput(sample_id=sample.sample_id, answer=answer, contexts=[], retrieval=None)


def answer_batch(
    samples: Sequence[QaSample],
    generator: Generator,
    cfg: RagConfig,
    indices: RagIndices | None = None,
    indices_for: "Sequence[RagIndices] | None" = None,
) -> list[RagOutput]:
    """Answer a batch; per-sample failures are captured in the output
    stream (empty answer + error message) and the run continues.

    Retrieval is enabled when indices are given: either one shared
    ``indices`` or a per-sample ``indices_for`` sequence.
    """
    outputs: list[RagOutput] = []
    for position, sample in enumerate(samples):
        try:
            if indices_for is not None:
                outputs.append(
                    answer_with_rag(sample, indices_for[position], generator, cfg)
                )
            elif indices is not None:
                outputs.append(answer_with_rag(sample, indices, generator, cfg))
            else:
                outputs.append(answer_without_rag(sample, generator, cfg))
        except Exception as err:
            logger.warning("sample %s failed: %s", sample.sample_id, err)
            outputs.append(
                RagOutput(sample_id=sample.sample_id, answer="", error=str(err))
            )
    return outputs


def read_qa_jsonl(path: str | Path) -> list[QaSample]:
    """Load QA samples from JSON-lines with fields sample_id/question/ground_truth."""
    samples = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            samples.append(
                QaSample(
                    sample_id=str(record.get("sample_id", f"s{line_no:05d}")),
                    question=record["question"],
                    ground_truth=record["ground_truth"],
                )
            )
    return samples


def write_outputs_jsonl(outputs: Sequence[RagOutput], path: str | Path) -> None:
    """Write RagOutput records as JSON-lines with stable field names."""
    with open(path, "w", encoding="utf-8") as fh:
        for output in outputs:
            record = {
                "sample_id": output.sample_id,
                "answer": output.answer,
                "contexts": output.contexts,
                "ranking": (
                    [[cid, score] for cid, score in output.retrieval.ranked]
                    if output.retrieval is not None
                    else None
                ),
            }
            if output.error is not None:
                record["error"] = output.error
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def read_outputs_jsonl(path: str | Path) -> list[RagOutput]:
    """Load RagOutput records written by write_outputs_jsonl."""
    outputs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            ranking = record.get("ranking")
            retrieval = (
                RetrievalResult(query="", ranked=[(cid, score) for cid, score in ranking])
                if ranking is not None
                else None
            )
            outputs.append(
                RagOutput(
                    sample_id=record["sample_id"],
                    answer=record["answer"],
                    contexts=list(record.get("contexts", [])),
                    retrieval=retrieval,
                    error=record.get("error"),
                )
            )
    return outputs
