"""Five-metric evaluation of RAG outputs and the scenario-matrix rollup.

Claim-based metrics (context recall, factual correctness, faithfulness)
decompose texts into sentence claims and count entailments; similarity
metrics (semantic similarity, answer relevancy) compare embeddings.
Context recall and faithfulness are blank exactly when no context was
retrieved.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .modelkit import Embedder, Generator, Judge
from .ragpipe import QaSample, RagOutput

logger = logging.getLogger(__name__)

METRIC_NAMES = (
    "context_recall",
    "factual_correctness",
    "faithfulness",
    "semantic_similarity",
    "answer_relevancy",
)

SCENARIO_ORDER = ("2", "4", "6", "Centralized Learning")
SETTING_ORDER = ("w/o RAG", "w/ RAG")


@dataclass
class MetricScores:
    """One sample's scores; None marks a blank (not-applicable) metric."""

    context_recall: float | None
    factual_correctness: float
    faithfulness: float | None
    semantic_similarity: float
    answer_relevancy: float

    def as_dict(self) -> dict[str, float | None]:
        return {name: getattr(self, name) for name in METRIC_NAMES}


@dataclass
class EvalRecord:
    """Scores plus the evidence and answer that produced them."""

    sample_id: str
    scenario: str
    setting: str
    scores: MetricScores
    answer: str = ""
    contexts: list[str] = field(default_factory=list)


@dataclass
class ScenarioReport:
    """Per-cell metric means over the evaluation set (blanks ignored)."""

    scenario: str
    setting: str
    means: dict[str, float | None]
    samples: int


def _joined(contexts: Sequence[str]) -> str:
    return "\n".join(contexts)


def context_recall(ground_truth: str, contexts: Sequence[str], judge: Judge) -> float | None:
    """Fraction of ground-truth claims entailed by the retrieved contexts."""
    if not contexts:
        raise ValueError("context_recall needs at least one context")
    claims = judge.extract_claims(ground_truth)
    if not claims:
        logger.warning("no extractable claims in ground truth; score is blank")
        return None
    joined = _joined(contexts)
    supported = sum(1 for claim in claims if judge.entails(joined, claim))
    return supported / len(claims)


def factual_correctness(
    answer: str, ground_truth: str, judge: Judge, mode: str = "f1"
) -> float:
    """Claim overlap between answer and ground truth.

    precision = answer claims entailed by the ground truth / answer claims;
    recall = ground-truth claims entailed by the answer / ground-truth
    claims; the default score is their F1 (0 when both are 0).
    """
    if mode not in ("f1", "precision", "recall"):
        raise ValueError(f"unknown factual-correctness mode {mode!r}")
    answer_claims = judge.extract_claims(answer)
    truth_claims = judge.extract_claims(ground_truth)
    if not answer_claims:
        return 0.0
    precision = sum(1 for c in answer_claims if judge.entails(ground_truth, c)) / len(answer_claims)
    recall = (
        sum(1 for c in truth_claims if judge.entails(answer, c)) / len(truth_claims)
        if truth_claims
        else 0.0
    )
    if mode == "precision":
        return precision
    if mode == "recall":
        return recall
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def faithfulness(answer: str, contexts: Sequence[str], judge: Judge) -> float:
    """Fraction of answer claims entailed by the retrieved contexts."""
    if not contexts:
        raise ValueError("faithfulness needs at least one context")
    claims = judge.extract_claims(answer)
    if not claims:
        return 0.0
    joined = _joined(contexts)
    return sum(1 for claim in claims if judge.entails(joined, claim)) / len(claims)


def _cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


def semantic_similarity(answer: str, ground_truth: str, embedder: Embedder) -> float:
    """Embedding cosine between answer and ground truth, clamped at 0."""
    if not answer or not ground_truth:
        raise ValueError("semantic_similarity needs non-empty texts")
    u = np.asarray(embedder.embed(answer))
    v = np.asarray(embedder.embed(ground_truth))
    if not np.any(u) or not np.any(v):
        logger.warning("zero-vector embedding in semantic_similarity; score is 0")
        return 0.0
    return max(0.0, _cosine(u, v))


def answer_relevancy(
    question: str,
    answer: str,
    generator: Generator,
    embedder: Embedder,
    n: int = 3,
) -> float:
    """Mean cosine between the question and n questions regenerated from
    the answer, clamped at 0. An empty answer scores 0."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not answer.strip():
        return 0.0
    qvec = np.asarray(embedder.embed(question))
    sims = [
        _cosine(qvec, np.asarray(embedder.embed(query)))
        for query in generator.reverse_queries(answer, n)
    ]
    return max(0.0, float(np.mean(sims)))


def score_output(
    output: RagOutput,
    sample: QaSample,
    judge: Judge,
    embedder: Embedder,
    generator: Generator,
    relevancy_n: int = 3,
) -> MetricScores:
    """All five metrics for one sample, honoring the blank discipline."""
    has_contexts = bool(output.contexts)
    answer = output.answer
    return MetricScores(
        context_recall=(
            context_recall(sample.ground_truth, output.contexts, judge) if has_contexts else None
        ),
        factual_correctness=factual_correctness(answer, sample.ground_truth, judge),
        faithfulness=(
            faithfulness(answer, output.contexts, judge) if has_contexts else None
        ),
        semantic_similarity=(
            semantic_similarity(answer, sample.ground_truth, embedder) if answer else 0.0
        ),
        answer_relevancy=answer_relevancy(sample.question, answer, generator, embedder, relevancy_n),
    )


def aggregate_report(
    records: Iterable[tuple[str, str, MetricScores]],
) -> list[ScenarioReport]:
    """Per-(scenario, setting) arithmetic means, blanks ignored.

    Cells are ordered scenarios (2, 4, 6, Centralized) x settings
    (w/o, w/); unknown scenarios follow in first-seen order.
    """
    cells: dict[tuple[str, str], list[MetricScores]] = {}
    for scenario, setting, scores in records:
        cells.setdefault((scenario, setting), []).append(scores)

    def scenario_rank(name: str) -> tuple[int, str]:
        if name in SCENARIO_ORDER:
            return (SCENARIO_ORDER.index(name), "")
        return (len(SCENARIO_ORDER), name)

    def setting_rank(name: str) -> int:
        return SETTING_ORDER.index(name) if name in SETTING_ORDER else len(SETTING_ORDER)

    reports = []
    for scenario, setting in sorted(
        cells, key=lambda key: (scenario_rank(key[0]), setting_rank(key[1]))
    ):
        bucket = cells[(scenario, setting)]
        if not bucket:
            logger.warning("empty report cell (%s, %s)", scenario, setting)
            continue
        means: dict[str, float | None] = {}
        for name in METRIC_NAMES:
            values = [
                value for scores in bucket if (value := getattr(scores, name)) is not None
            ]
            means[name] = float(np.mean(values)) if values else None
        reports.append(
            ScenarioReport(scenario=scenario, setting=setting, means=means, samples=len(bucket))
        )
    return reports


SCORES_CSV_HEADER = (
    "sample_id",
    "scenario",
    "setting",
    "context_recall",
    "factual_correctness",
    "faithfulness",
    "semantic_similarity",
    "answer_relevancy",
)


def write_scores_csv(records: Sequence[EvalRecord], path: str | Path) -> None:
    """Per-sample scores; blank metrics are empty fields."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SCORES_CSV_HEADER)
        for record in records:
            row = [record.sample_id, record.scenario, record.setting]
            for name in METRIC_NAMES:
                value = getattr(record.scores, name)
                row.append("" if value is None else repr(value))
            writer.writerow(row)


def read_scores_csv(path: str | Path) -> list[tuple[str, str, MetricScores]]:
    """Read (scenario, setting, scores) triples back from a scores CSV."""
    triples = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            scores = MetricScores(
                context_recall=float(row["context_recall"]) if row["context_recall"] else None,
                factual_correctness=float(row["factual_correctness"]),
                faithfulness=float(row["faithfulness"]) if row["faithfulness"] else None,
                semantic_similarity=float(row["semantic_similarity"]),
                answer_relevancy=float(row["answer_relevancy"]),
            )
            triples.append((row["scenario"], row["setting"], scores))
    return triples
