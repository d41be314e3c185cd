"""Deterministic synthetic data: flashcard-style QA sets, retrieval
corpora that embed the ground-truth sentences, and class-token
classification sets for the federated loop. Everything is a pure
function of its seed."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .modelkit import TrainExample

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"

_FILLER_WORDS = (
    "records clinics archive notes registry cohort panels survey baseline "
    "follow up visits charts intake forms ledger summary appendix tables"
).split()


def _pseudo_word(rng: np.random.Generator, syllables: int = 3) -> str:
    return "".join(
        _CONSONANTS[rng.integers(len(_CONSONANTS))] + _VOWELS[rng.integers(len(_VOWELS))]
        for _ in range(syllables)
    )


def _unique_words(rng: np.random.Generator, count: int) -> list[str]:
    words: list[str] = []
    seen: set[str] = set()
    while len(words) < count:
        word = _pseudo_word(rng, syllables=int(rng.integers(3, 5)))
        if word not in seen and word not in _FILLER_WORDS:
            seen.add(word)
            words.append(word)
    return words


def make_flashcards(n_samples: int, seed: int) -> list[dict[str, str]]:
    """Question/answer pairs whose answers are single unique fact sentences.

    Each fact uses three words that occur nowhere else in the set, so a
    lexical retriever can pin the right chunk and the question shares
    content tokens with exactly its own fact.
    """
    rng = np.random.default_rng([seed, 101])
    words = _unique_words(rng, 3 * n_samples)
    records = []
    for i in range(n_samples):
        agent, target, route = words[3 * i : 3 * i + 3]
        fact = f"{agent.capitalize()} treats {target} by {route}."
        question = f"How does {agent} act on {target}?"
        records.append({"input": question, "output": fact})
    return records


def make_corpus_files(
    records: list[dict[str, str]],
    directory: str | Path,
    n_docs: int = 8,
    seed: int = 0,
    filler_sentences: int = 2,
) -> list[Path]:
    """Write a .txt corpus embedding every record's answer sentence.

    Facts are dealt round-robin into n_docs files with filler sentences
    between them, so retrieval has to find the right chunk.
    """
    rng = np.random.default_rng([seed, 202])
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    docs: list[list[str]] = [[] for _ in range(n_docs)]
    for i, record in enumerate(records):
        bucket = docs[i % n_docs]
        for _ in range(filler_sentences):
            chosen = rng.choice(_FILLER_WORDS, size=5, replace=True)
            bucket.append("The " + " ".join(chosen) + " were reviewed.")
        bucket.append(record["output"])
    paths = []
    for d, sentences in enumerate(docs):
        path = directory / f"doc{d:03d}.txt"
        path.write_text(" ".join(sentences) + "\n", encoding="utf-8")
        paths.append(path)
    return paths


def make_classification_examples(
    n_samples: int,
    n_classes: int = 4,
    seed: int = 0,
    tokens_per_class: int = 30,
    tokens_per_example: int = 8,
    noise_tokens: int = 2,
) -> list[TrainExample]:
    """Classification set where each class owns a token pool.

    Examples draw most tokens from their class pool plus a few from a
    shared noise pool; integer targets keep the label map exact.
    """
    rng = np.random.default_rng([seed, 303])
    pools = [
        [f"c{c}tok{j}" for j in range(tokens_per_class)] for c in range(n_classes)
    ]
    noise = [f"noise{j}" for j in range(tokens_per_class)]
    examples = []
    for _ in range(n_samples):
        label = int(rng.integers(n_classes))
        tokens = list(rng.choice(pools[label], size=tokens_per_example, replace=True))
        tokens += list(rng.choice(noise, size=noise_tokens, replace=True))
        rng.shuffle(tokens)
        examples.append(TrainExample(input_text=" ".join(tokens), target=label))
    return examples


def write_dataset_jsonl(records: list[dict[str, str]], path: str | Path) -> None:
    """JSON-lines dataset with the instruction-style input/output fields."""
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


DEMO_CONFIG_TEMPLATE = """\
schema_version = 1
seed = {seed}

[paths]
dataset = "dataset.jsonl"
rag_corpus = "corpus"
output_dir = "out"

[grid]
scenarios = ["fed2", "fed4", "fed6", "central"]
rag_settings = ["without", "with"]

[federation]
total_clients = 20
rounds = {rounds}
batch_size = 16

[evaluation]
eval_set_size = {eval_set_size}
"""


def make_demo_workspace(
    directory: str | Path,
    n_samples: int = 600,
    n_docs: int = 12,
    seed: int = 0,
    rounds: int = 20,
    eval_set_size: int = 100,
) -> Path:
    """Write dataset.jsonl, corpus/, and config.toml under ``directory``.

    Returns the config path; `fedrag run --config <it>` works as-is.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    records = make_flashcards(n_samples, seed)
    write_dataset_jsonl(records, directory / "dataset.jsonl")
    make_corpus_files(records, directory / "corpus", n_docs=n_docs, seed=seed)
    config_path = directory / "config.toml"
    config_path.write_text(
        DEMO_CONFIG_TEMPLATE.format(seed=seed, rounds=rounds, eval_set_size=eval_set_size),
        encoding="utf-8",
    )
    return config_path
