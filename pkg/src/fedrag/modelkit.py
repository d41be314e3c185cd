"""Pluggable model interfaces and their deterministic desk-scale stand-ins.

The GPU-scale components live behind three small protocols (Embedder,
Generator, Judge) plus a trainable model family. The reference
implementations here are exact and seed-deterministic so every
downstream number is reproducible: a signed feature-hashing embedder, an
extractive generator, a token-Jaccard entailment judge, and a hashed
bag-of-words multinomial logistic classifier trained by mini-batch
gradient descent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence, runtime_checkable

import numpy as np

from .textutil import content_tokens, fnv1a64, split_sentences, tokenize

ParamVector = np.ndarray

DEFAULT_EMBED_DIM = 256
DEFAULT_MAX_TOKENS = 512


class TrainingError(RuntimeError):
    """Raised when training produces a non-finite loss."""

    def __init__(self, step: int, message: str):
        super().__init__(f"step {step}: {message}")
        self.step = step


@runtime_checkable
class Embedder(Protocol):
    dimension: int

    def embed(self, text: str) -> np.ndarray: ...


@runtime_checkable
class Generator(Protocol):
    def generate(
        self,
        question: str,
        contexts: Sequence[str],
        max_tokens: int = DEFAULT_MAX_TOKENS,
        temperature: float = 0.0,
    ) -> str: ...

    def reverse_queries(self, answer: str, n: int) -> list[str]: ...


@runtime_checkable
class Judge(Protocol):
    def extract_claims(self, text: str) -> list[str]: ...

    def entails(self, context: str, claim: str) -> bool: ...


def hashed_bow(text: str, dimension: int) -> np.ndarray:
    """Signed hashed bag-of-words counts.

    Each token is FNV-1a-64 hashed; the low bits pick the bucket and the
    top bit picks the sign. No tokens -> zero vector.
    """
    vec = np.zeros(dimension, dtype=np.float64)
    for token in tokenize(text):
        h = fnv1a64(token)
        sign = -1.0 if h >> 63 else 1.0
        vec[h % dimension] += sign
    return vec


class HashedEmbedder:
    """Deterministic embedding: signed hashed bag-of-words, L2-normalized."""

    deterministic = True

    def __init__(self, dimension: int = DEFAULT_EMBED_DIM):
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        self.dimension = dimension

    def embed(self, text: str) -> np.ndarray:
        vec = hashed_bow(text, self.dimension)
        norm = np.linalg.norm(vec)
        return vec / norm if norm > 0.0 else vec


class ExtractiveGenerator:
    """Answers by quoting context sentences that overlap the question.

    Sentences are scored by content-token overlap with the question; the
    ``max_sentences`` best ones are emitted in context order and the
    result is capped at ``max_tokens`` whitespace tokens. With no
    contexts a fixed fallback string is returned, so output is a pure
    function of (question, contexts).
    """

    deterministic = True
    fallback = "No supporting context was retrieved."

    def __init__(self, max_sentences: int = 3):
        if max_sentences < 1:
            raise ValueError("max_sentences must be >= 1")
        self.max_sentences = max_sentences

    def generate(
        self,
        question: str,
        contexts: Sequence[str],
        max_tokens: int = DEFAULT_MAX_TOKENS,
        temperature: float = 0.0,
    ) -> str:
        if temperature != 0.0:
            raise ValueError("the extractive generator only supports temperature 0")
        if not contexts:
            return self.fallback
        question_tokens = content_tokens(question)
        scored: list[tuple[int, int, int, str]] = []
        for ctx_idx, context in enumerate(contexts):
            for sent_idx, sentence in enumerate(split_sentences(context)):
                overlap = len(question_tokens & content_tokens(sentence))
                scored.append((overlap, ctx_idx, sent_idx, sentence))
        hits = [entry for entry in scored if entry[0] > 0]
        if hits:
            hits.sort(key=lambda e: (-e[0], e[1], e[2]))
            chosen = sorted(hits[: self.max_sentences], key=lambda e: (e[1], e[2]))
            answer = " ".join(sentence for _, _, _, sentence in chosen)
        elif scored:
            answer = scored[0][3]
        else:
            answer = contexts[0]
        return truncate_tokens(answer, max_tokens)

    def reverse_queries(self, answer: str, n: int) -> list[str]:
        """n interrogative reformulations, cycling over the answer's sentences."""
        if n < 1:
            raise ValueError("n must be >= 1")
        sentences = split_sentences(answer) or [answer.strip()]
        return [
            f"What does it mean that {sentences[i % len(sentences)]}"
            for i in range(n)
        ]


def truncate_tokens(text: str, max_tokens: int) -> str:
    """Cap a string at max_tokens whitespace-delimited tokens."""
    tokens = text.split()
    if len(tokens) <= max_tokens:
        return text
    return " ".join(tokens[:max_tokens])


class JaccardJudge:
    """Entailment proxy: claims are sentences; a claim is entailed when it
    appears verbatim in the context or its content tokens reach Jaccard
    >= threshold against the best-matching context sentence."""

    deterministic = True

    def __init__(self, threshold: float = 0.5):
        if not 0.0 < threshold <= 1.0:
            raise ValueError("threshold must be in (0, 1]")
        self.threshold = threshold

    def extract_claims(self, text: str) -> list[str]:
        return split_sentences(text)

    def entails(self, context: str, claim: str) -> bool:
        claim = claim.strip()
        if not claim:
            return False
        if claim in context:
            return True
        claim_tokens = content_tokens(claim)
        if not claim_tokens:
            return False
        for sentence in split_sentences(context):
            sent_tokens = content_tokens(sentence)
            union = claim_tokens | sent_tokens
            if not union:
                continue
            if len(claim_tokens & sent_tokens) / len(union) >= self.threshold:
                return True
        return False


_default_embedder = HashedEmbedder()
_default_generator = ExtractiveGenerator()
_default_judge = JaccardJudge()


def reference_embed(text: str) -> np.ndarray:
    """Embed with the default 256-dimensional hashed embedder."""
    return _default_embedder.embed(text)


def reference_generate(question: str, contexts: Sequence[str]) -> str:
    """Generate with the default extractive generator (512-token cap)."""
    return _default_generator.generate(question, contexts)


def reference_judge_entails(context: str, claim: str) -> bool:
    """Entailment check with the default Jaccard judge (threshold 0.5)."""
    return _default_judge.entails(context, claim)


@dataclass(frozen=True)
class TrainExample:
    """One supervised example: text in, class label or target text out."""

    input_text: str
    target: int | str

    def __post_init__(self) -> None:
        if not self.input_text:
            raise ValueError("input_text must be non-empty")


@dataclass
class TrainReport:
    """Outcome of one local training call."""

    mean_loss: float
    steps: int
    final_params: ParamVector


@dataclass(frozen=True)
class ModelFamily:
    """Hashed bag-of-words multinomial logistic classifier.

    Parameters are the flattened (n_features, n_classes) weight matrix.
    String targets map to classes by stable hash, so free-text targets
    (flashcard answers) train without a label map.
    """

    n_features: int = 256
    n_classes: int = 4

    def __post_init__(self) -> None:
        if self.n_features < 1 or self.n_classes < 2:
            raise ValueError("need n_features >= 1 and n_classes >= 2")

    @property
    def param_length(self) -> int:
        return self.n_features * self.n_classes

    def init_params(self) -> ParamVector:
        return np.zeros(self.param_length, dtype=np.float64)

    def featurize(self, text: str) -> np.ndarray:
        vec = hashed_bow(text, self.n_features)
        norm = np.linalg.norm(vec)
        return vec / norm if norm > 0.0 else vec

    def label_of(self, target: int | str) -> int:
        if isinstance(target, (int, np.integer)):
            if not 0 <= int(target) < self.n_classes:
                raise ValueError(f"label {target} outside [0, {self.n_classes})")
            return int(target)
        return fnv1a64(str(target)) % self.n_classes

    def encode(self, examples: Sequence[TrainExample]) -> tuple[np.ndarray, np.ndarray]:
        """Featurize a dataset once: (n, n_features) X and (n,) labels."""
        X = np.zeros((len(examples), self.n_features), dtype=np.float64)
        y = np.zeros(len(examples), dtype=np.int64)
        for i, example in enumerate(examples):
            X[i] = self.featurize(example.input_text)
            y[i] = self.label_of(example.target)
        return X, y


DEFAULT_FAMILY = ModelFamily()


def loss_and_gradient(
    params: ParamVector, X: np.ndarray, y: np.ndarray, n_classes: int
) -> tuple[float, np.ndarray]:
    """Mean softmax cross-entropy over a batch and its flat gradient."""
    n_features = X.shape[1]
    W = params.reshape(n_features, n_classes)
    logits = X @ W
    logits = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(logits)
    probs = exp / exp.sum(axis=1, keepdims=True)
    batch = np.arange(len(y))
    loss = float(-np.log(probs[batch, y]).mean())
    delta = probs
    delta[batch, y] -= 1.0
    grad = (X.T @ delta) / len(y)
    return loss, grad.reshape(-1)


def train_features(
    params: ParamVector,
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    schedule: Callable[[int], float],
    batch_size: int,
    epochs: int,
    seed: int,
) -> tuple[ParamVector, list[float]]:
    """Mini-batch gradient descent over pre-featurized data.

    Batches come from a fresh seeded shuffle each epoch; the loss of
    every step (measured before its update) is returned. The input
    params are not mutated.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    rng = np.random.default_rng(seed)
    weights = np.array(params, dtype=np.float64, copy=True)
    losses: list[float] = []
    step = 0
    for _ in range(epochs):
        order = rng.permutation(len(y))
        for lo in range(0, len(y), batch_size):
            idx = order[lo : lo + batch_size]
            loss, grad = loss_and_gradient(weights, X[idx], y[idx], n_classes)
            if not math.isfinite(loss):
                raise TrainingError(step, f"non-finite loss {loss!r}")
            losses.append(loss)
            weights -= schedule(step) * grad
            step += 1
    return weights, losses


def reference_model_train(
    params: ParamVector,
    data: Sequence[TrainExample],
    lrate: float,
    batch_size: int,
    local_epochs: int,
    seed: int,
    family: ModelFamily = DEFAULT_FAMILY,
) -> TrainReport:
    """Train the reference classifier at a fixed learning rate.

    steps = ceil(len(data) / batch_size) * local_epochs, and mean_loss
    averages the per-step losses.
    """
    if not data:
        raise ValueError("data must be non-empty")
    if lrate < 0:
        raise ValueError("lrate must be >= 0")
    params = np.asarray(params, dtype=np.float64)
    if params.shape != (family.param_length,):
        raise ValueError(
            f"params length {params.shape} does not match family ({family.param_length},)"
        )
    X, y = family.encode(data)
    final, losses = train_features(
        params, X, y, family.n_classes, lambda _: lrate, batch_size, local_epochs, seed
    )
    return TrainReport(
        mean_loss=float(np.mean(losses)), steps=len(losses), final_params=final
    )


def verify_embedder(embedder, probe_texts: Sequence[str] | None = None) -> list[str]:
    """Contract probes for an Embedder adapter; returns violation messages."""
    probes = list(probe_texts or ("alpha beta", "gamma", "shared words shared twice"))
    failures: list[str] = []
    dim = getattr(embedder, "dimension", None)
    if not isinstance(dim, int) or dim < 1:
        return [f"dimension must be a positive int, got {dim!r}"]
    deterministic = getattr(embedder, "deterministic", True)
    for text in probes:
        try:
            vec = np.asarray(embedder.embed(text))
        except Exception as err:  # adapter must be total over non-empty strings
            failures.append(f"embed({text!r}) raised {err!r}")
            continue
        if vec.shape != (dim,):
            failures.append(f"embed({text!r}) has shape {vec.shape}, expected ({dim},)")
        if deterministic and not np.array_equal(vec, np.asarray(embedder.embed(text))):
            failures.append(f"embed({text!r}) is not deterministic")
    return failures


def verify_generator(generator, max_tokens: int = 16) -> list[str]:
    """Contract probes for a Generator adapter; returns violation messages."""
    failures: list[str] = []
    question = "What connects the probe terms?"
    contexts = ["Probe terms connect through the harness. " * 40]
    deterministic = getattr(generator, "deterministic", True)
    first = generator.generate(question, contexts, max_tokens=max_tokens, temperature=0.0)
    if deterministic:
        again = generator.generate(question, contexts, max_tokens=max_tokens, temperature=0.0)
        if first != again:
            failures.append("generate is not deterministic at temperature 0")
    if len(first.split()) > max_tokens:
        failures.append(
            f"generate exceeded max_tokens: {len(first.split())} > {max_tokens}"
        )
    queries = generator.reverse_queries("The probe is answered.", 3)
    if len(queries) != 3 or not all(isinstance(q, str) for q in queries):
        failures.append("reverse_queries must return n strings")
    elif deterministic and queries != generator.reverse_queries("The probe is answered.", 3):
        failures.append("reverse_queries is not deterministic")
    return failures


def verify_judge(judge) -> list[str]:
    """Contract probes for a Judge adapter; returns violation messages."""
    failures: list[str] = []
    text = "Alpha binds beta. Gamma blocks delta."
    deterministic = getattr(judge, "deterministic", True)
    claims = judge.extract_claims(text)
    if deterministic and claims != judge.extract_claims(text):
        failures.append("extract_claims is not deterministic")
    if not judge.entails(text, "Gamma blocks delta."):
        failures.append("verbatim claim was not entailed")
    return failures


def verify_adapters(embedder=None, generator=None, judge=None) -> dict[str, list[str]]:
    """Run the conformance suite on any provided adapters."""
    report: dict[str, list[str]] = {}
    if embedder is not None:
        report["embedder"] = verify_embedder(embedder)
    if generator is not None:
        report["generator"] = verify_generator(generator)
    if judge is not None:
        report["judge"] = verify_judge(judge)
    return report
