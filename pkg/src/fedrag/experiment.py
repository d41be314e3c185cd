"""Experiment orchestration: config parsing, the scenario x RAG grid,
artifact persistence, and report rendering.

A run trains one model per scenario (federated with 2/4/6 clients per
round, or the centralized baseline), evaluates the held-out QA set with
and without retrieval, and writes every artifact as CSV so a rerun with
the same config and seed reproduces the files byte-for-byte.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import __version__
from .corpus import ChunkingConfig, chunk_corpus, load_corpus
from .evalkit import (
    EvalRecord,
    aggregate_report,
    read_scores_csv,
    score_output,
    write_scores_csv,
)
from .fedcore import (
    FederationConfig,
    cosine_schedule,
    derive_shard_sizes,
    partition_explicit,
    read_loss_series,
    run_centralized,
    run_federated,
    summarize_losses,
    write_round_logs,
    write_step_losses,
)
from .modelkit import (
    ExtractiveGenerator,
    HashedEmbedder,
    JaccardJudge,
    ModelFamily,
    TrainExample,
)
from .ragpipe import QaSample, RagConfig, RagIndices, answer_batch, build_rag_indices
from .reports import (
    LOSS_TABLE_HEADER,
    LOSS_TABLE_TITLES,
    METRIC_TABLE_HEADER,
    METRIC_TABLE_TITLES,
    loss_table_rows,
    metric_table_rows,
    write_table,
)
from .retrieval import EnsembleConfig

logger = logging.getLogger(__name__)

CONFIG_SCHEMA_VERSION = 1
OUTPUT_DIR_ENV = "FEDRAG_OUT"

SCENARIOS = ("fed2", "fed4", "fed6", "central")
SCENARIO_LABELS = {
    "fed2": "2",
    "fed4": "4",
    "fed6": "6",
    "central": "Centralized Learning",
}
SETTINGS = ("without", "with")
SETTING_LABELS = {"without": "w/o RAG", "with": "w/ RAG"}
CLIENTS_PER_SCENARIO = {"fed2": 2, "fed4": 4, "fed6": 6}


class ConfigError(ValueError):
    """Config validation failure carrying the itemized error list."""

    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("invalid config:\n" + "\n".join(f"- {e}" for e in self.errors))


class ReportError(RuntimeError):
    """A report artifact named in the manifest is missing or unreadable."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved experiment description (paths absolute)."""

    dataset_path: Path
    rag_corpus_path: Path
    output_dir: Path
    scenarios: tuple[str, ...] = SCENARIOS
    rag_settings: tuple[str, ...] = SETTINGS
    federation: FederationConfig = field(default_factory=FederationConfig)
    central_epochs: int = 3
    central_lrate: float = 5e-5
    model: ModelFamily = field(default_factory=ModelFamily)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    rag: RagConfig = field(default_factory=RagConfig)
    chunking: ChunkingConfig = field(default_factory=ChunkingConfig)
    bm25_k1: float = 1.5
    bm25_b: float = 0.75
    eval_set_size: int = 200
    relevancy_n: int = 3
    per_client_corpora: bool = False
    partition_sizes: tuple[int, ...] | None = None
    seed: int = 0
    lora: dict[str, Any] = field(default_factory=dict)

    def snapshot(self) -> dict[str, Any]:
        """JSON-able view of the config, embedded in the manifest."""

        def convert(value):
            if isinstance(value, Path):
                return str(value)
            if isinstance(value, tuple):
                return list(value)
            if dataclasses.is_dataclass(value):
                return {k: convert(v) for k, v in dataclasses.asdict(value).items()}
            return value

        return {k: convert(v) for k, v in dataclasses.asdict(self).items()}

    def digest(self) -> str:
        return hashlib.sha256(
            json.dumps(self.snapshot(), sort_keys=True).encode("utf-8")
        ).hexdigest()


# Known config sections/keys; anything else is an itemized error.
_SCHEMA: dict[str, tuple[str, ...]] = {
    "paths": ("dataset", "rag_corpus", "output_dir"),
    "grid": ("scenarios", "rag_settings"),
    "federation": (
        "total_clients",
        "rounds",
        "batch_size",
        "local_epochs",
        "lrate_max",
        "lrate_min",
        "weighting",
        "partition_sizes",
    ),
    "centralized": ("epochs", "lrate"),
    "model": ("n_features", "n_classes"),
    "retrieval": ("w_sparse", "w_dense", "rrf_k", "top_k", "k1", "b", "per_client_corpora"),
    "generation": ("max_tokens", "temperature", "context_token_cap"),
    "chunking": ("chunk_size", "overlap", "strategy"),
    "evaluation": ("eval_set_size", "answer_relevancy_n"),
    "lora": ("r", "alpha", "quantization"),
}
_TOP_LEVEL = ("schema_version", "seed") + tuple(_SCHEMA)

# Carried as inert metadata so configs mirror the GPU-scale setup.
DEFAULT_LORA = {"r": 16, "alpha": 64, "quantization": "4bit"}


def parse_config_text(text: str) -> dict[str, Any]:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        raise ConfigError([f"TOML parse error: {err}"]) from err


def _count_jsonl(path: Path) -> int:
    with open(path, encoding="utf-8") as fh:
        return sum(1 for line in fh if line.strip())


def build_config(
    raw: dict[str, Any], base_dir: Path
) -> tuple[ExperimentConfig, list[str]]:
    """Validate the raw mapping and resolve it into an ExperimentConfig.

    Collects every problem before failing; warnings (an lrate_min above
    lrate_max, notably) do not block the run.
    """
    errors: list[str] = []
    warnings: list[str] = []

    version = raw.get("schema_version", CONFIG_SCHEMA_VERSION)
    if version != CONFIG_SCHEMA_VERSION:
        errors.append(f"unsupported schema_version {version!r} (expected {CONFIG_SCHEMA_VERSION})")
    for key in raw:
        if key not in _TOP_LEVEL:
            errors.append(f"unknown top-level key {key!r}")
    for section, keys in _SCHEMA.items():
        table = raw.get(section, {})
        if not isinstance(table, dict):
            errors.append(f"section [{section}] must be a table")
            continue
        for key in table:
            if key not in keys:
                errors.append(f"unknown key {key!r} in [{section}]")

    def section(name: str) -> dict[str, Any]:
        table = raw.get(name, {})
        return table if isinstance(table, dict) else {}

    paths = section("paths")
    if "dataset" not in paths:
        errors.append("missing required key paths.dataset")
    if "rag_corpus" not in paths:
        errors.append("missing required key paths.rag_corpus")
    dataset_path = (base_dir / paths.get("dataset", "dataset.jsonl")).resolve()
    rag_corpus_path = (base_dir / paths.get("rag_corpus", "corpus")).resolve()
    output_override = os.environ.get(OUTPUT_DIR_ENV)
    output_dir = (
        Path(output_override).resolve()
        if output_override
        else (base_dir / paths.get("output_dir", "out")).resolve()
    )

    grid = section("grid")
    scenarios = tuple(grid.get("scenarios", list(SCENARIOS)))
    rag_settings = tuple(grid.get("rag_settings", list(SETTINGS)))
    for name in scenarios:
        if name not in SCENARIOS:
            errors.append(f"unknown scenario {name!r} (expected subset of {list(SCENARIOS)})")
    for name in rag_settings:
        if name not in SETTINGS:
            errors.append(f"unknown rag setting {name!r} (expected subset of {list(SETTINGS)})")
    if not scenarios:
        errors.append("grid.scenarios must select at least one scenario")
    if not rag_settings:
        errors.append("grid.rag_settings must select at least one setting")
    scenarios = tuple(s for s in SCENARIOS if s in scenarios)
    rag_settings = tuple(s for s in SETTINGS if s in rag_settings)

    seed = raw.get("seed", 0)
    fed = section("federation")
    partition_sizes = fed.get("partition_sizes")
    federation: FederationConfig | None = None
    try:
        federation = FederationConfig(
            total_clients=fed.get("total_clients", 20),
            clients_per_round=1,  # per-scenario value substituted at run time
            rounds=fed.get("rounds", 100),
            batch_size=fed.get("batch_size", 16),
            local_epochs=fed.get("local_epochs", 1),
            lrate_max=fed.get("lrate_max", 1e-4),
            lrate_min=fed.get("lrate_min", 5e-5),
            seed=seed,
            weighting=fed.get("weighting", "samples"),
        )
    except ValueError as err:
        errors.append(f"[federation] {err}")
    if federation is not None and federation.lrate_min > federation.lrate_max:
        warnings.append(
            f"lrate_min {federation.lrate_min} exceeds lrate_max {federation.lrate_max}; "
            "the published setup lists the same inversion, so the run proceeds "
            "with the annealing direction reversed"
        )

    central = section("centralized")
    central_epochs = central.get("epochs", 3)
    central_lrate = central.get("lrate", 5e-5)
    if central_epochs < 1:
        errors.append("[centralized] epochs must be >= 1")
    if central_lrate <= 0:
        errors.append("[centralized] lrate must be > 0")

    model_cfg = section("model")
    model = ModelFamily()
    try:
        model = ModelFamily(
            n_features=model_cfg.get("n_features", 256),
            n_classes=model_cfg.get("n_classes", 4),
        )
    except ValueError as err:
        errors.append(f"[model] {err}")

    retrieval_cfg = section("retrieval")
    ensemble = EnsembleConfig()
    try:
        ensemble = EnsembleConfig(
            w_sparse=retrieval_cfg.get("w_sparse", 0.8),
            w_dense=retrieval_cfg.get("w_dense", 0.2),
            rrf_k=retrieval_cfg.get("rrf_k", 60.0),
            top_k=retrieval_cfg.get("top_k", 4),
        )
    except ValueError as err:
        errors.append(f"[retrieval] {err}")
    bm25_k1 = retrieval_cfg.get("k1", 1.5)
    bm25_b = retrieval_cfg.get("b", 0.75)
    per_client = bool(retrieval_cfg.get("per_client_corpora", False))

    generation = section("generation")
    rag = RagConfig(ensemble=ensemble)
    try:
        rag = RagConfig(
            ensemble=ensemble,
            max_tokens=generation.get("max_tokens", 512),
            temperature=generation.get("temperature", 0.0),
            context_token_cap=generation.get("context_token_cap", 3500),
        )
    except ValueError as err:
        errors.append(f"[generation] {err}")

    chunk_cfg = section("chunking")
    chunking = ChunkingConfig()
    try:
        chunking = ChunkingConfig(
            chunk_size=chunk_cfg.get("chunk_size", 1000),
            overlap=chunk_cfg.get("overlap", 50),
            strategy=chunk_cfg.get("strategy", "fixed"),
        )
    except ValueError as err:
        errors.append(f"[chunking] {err}")

    evaluation = section("evaluation")
    eval_set_size = evaluation.get("eval_set_size", 200)
    relevancy_n = evaluation.get("answer_relevancy_n", 3)
    if eval_set_size < 1:
        errors.append("[evaluation] eval_set_size must be >= 1")
    if relevancy_n < 1:
        errors.append("[evaluation] answer_relevancy_n must be >= 1")

    lora = {**DEFAULT_LORA, **section("lora")}

    if not dataset_path.is_file():
        errors.append(f"dataset not found: {dataset_path}")
    if not rag_corpus_path.is_dir():
        errors.append(f"rag_corpus directory not found: {rag_corpus_path}")

    if dataset_path.is_file() and federation is not None:
        n_records = _count_jsonl(dataset_path)
        n_train = n_records - eval_set_size
        if n_train < federation.total_clients:
            errors.append(
                f"dataset has {n_records} records; after holding out "
                f"{eval_set_size} for evaluation, {n_train} remain, fewer than "
                f"{federation.total_clients} clients"
            )
        if partition_sizes is not None:
            if len(partition_sizes) != federation.total_clients:
                errors.append(
                    f"partition_sizes has {len(partition_sizes)} entries for "
                    f"{federation.total_clients} clients"
                )
            total = sum(partition_sizes)
            if total != n_train:
                errors.append(
                    f"partition_sizes sum to {total} but the training split has "
                    f"{n_train} examples ({n_records} records minus "
                    f"{eval_set_size} held out)"
                )
            if any(size < 1 for size in partition_sizes):
                errors.append("partition_sizes entries must all be >= 1")

    if errors:
        raise ConfigError(errors)
    assert federation is not None
    config = ExperimentConfig(
        dataset_path=dataset_path,
        rag_corpus_path=rag_corpus_path,
        output_dir=output_dir,
        scenarios=scenarios,
        rag_settings=rag_settings,
        federation=federation,
        central_epochs=central_epochs,
        central_lrate=central_lrate,
        model=model,
        ensemble=ensemble,
        rag=rag,
        chunking=chunking,
        bm25_k1=bm25_k1,
        bm25_b=bm25_b,
        eval_set_size=eval_set_size,
        relevancy_n=relevancy_n,
        per_client_corpora=per_client,
        partition_sizes=tuple(partition_sizes) if partition_sizes is not None else None,
        seed=seed,
        lora=lora,
    )
    return config, warnings


def load_config(path: str | Path) -> tuple[ExperimentConfig, list[str]]:
    """Parse and validate a TOML config file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError([f"config file not found: {path}"])
    raw = parse_config_text(path.read_text(encoding="utf-8"))
    return build_config(raw, path.parent)


def validate_config(path: str | Path) -> ExperimentConfig:
    """load_config with warnings routed to the log."""
    config, warnings = load_config(path)
    for message in warnings:
        logger.warning("%s", message)
    return config


@dataclass
class RunManifest:
    """Run record: config snapshot, cell states, and artifact paths
    (relative to the output directory)."""

    config: dict[str, Any]
    config_digest: str
    output_dir: Path
    code_version: str = __version__
    started_at: str = ""
    finished_at: str = ""
    eval_set_size: int = 0
    cells: dict[str, dict[str, Any]] = field(default_factory=dict)
    artifacts: dict[str, str] = field(default_factory=dict)

    def path(self) -> Path:
        return self.output_dir / "manifest.json"

    def save(self) -> None:
        payload = {
            "schema_version": 1,
            "config": self.config,
            "config_digest": self.config_digest,
            "code_version": self.code_version,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "eval_set_size": self.eval_set_size,
            "cells": self.cells,
            "artifacts": self.artifacts,
        }
        self.path().write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "RunManifest":
        path = Path(path)
        payload = json.loads(path.read_text(encoding="utf-8"))
        return cls(
            config=payload["config"],
            config_digest=payload["config_digest"],
            output_dir=path.parent,
            code_version=payload.get("code_version", ""),
            started_at=payload.get("started_at", ""),
            finished_at=payload.get("finished_at", ""),
            eval_set_size=payload.get("eval_set_size", 0),
            cells=payload.get("cells", {}),
            artifacts=payload.get("artifacts", {}),
        )

    def cell_done(self, key: str) -> bool:
        return self.cells.get(key, {}).get("status") == "done"


def load_dataset(path: str | Path) -> list[dict[str, str]]:
    """Instruction-format JSON-lines: one {"input", "output"} per line."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            if "input" not in record or "output" not in record:
                raise ValueError(f"{path}:{line_no + 1}: expected fields 'input' and 'output'")
            records.append({"input": record["input"], "output": record["output"]})
    return records


def split_dataset(
    records: Sequence[dict[str, str]], eval_set_size: int, seed: int
) -> tuple[list[TrainExample], list[QaSample]]:
    """Seeded shuffle, then hold the first eval_set_size records out of
    training entirely (sample ids keep the original file order)."""
    if eval_set_size >= len(records):
        raise ValueError(
            f"eval_set_size {eval_set_size} must be smaller than the dataset ({len(records)})"
        )
    order = np.random.default_rng([seed, 7]).permutation(len(records))
    eval_samples = [
        QaSample(
            sample_id=f"s{int(i):05d}",
            question=records[i]["input"],
            ground_truth=records[i]["output"],
        )
        for i in sorted(order[:eval_set_size])
    ]
    train_examples = [
        TrainExample(input_text=records[i]["input"], target=records[i]["output"])
        for i in order[eval_set_size:]
    ]
    return train_examples, eval_samples


def _build_indices(config: ExperimentConfig) -> tuple[RagIndices | None, list[RagIndices] | None]:
    """Shared indices, or one index set per client in per-client mode."""
    embedder = HashedEmbedder()
    documents = load_corpus(config.rag_corpus_path)
    if not documents:
        raise ConfigError([f"rag_corpus {config.rag_corpus_path} holds no usable .txt documents"])
    if not config.per_client_corpora:
        chunks = chunk_corpus(documents, config.chunking)
        return build_rag_indices(chunks, embedder, k1=config.bm25_k1, b=config.bm25_b), None
    n_clients = config.federation.total_clients
    if len(documents) < n_clients:
        raise ConfigError(
            [
                f"per-client corpora need at least {n_clients} documents, "
                f"found {len(documents)}"
            ]
        )
    per_client = []
    for cid in range(n_clients):
        subset = [doc for i, doc in enumerate(documents) if i % n_clients == cid]
        chunks = chunk_corpus(subset, config.chunking)
        per_client.append(
            build_rag_indices(chunks, embedder, k1=config.bm25_k1, b=config.bm25_b)
        )
    return None, per_client


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def run_experiment(config: ExperimentConfig, resume: bool = False) -> RunManifest:
    """Execute the selected grid and write all artifacts.

    With resume=True, cells marked done in an existing manifest for the
    same config digest are not recomputed. A failing cell is recorded in
    the manifest and the remaining cells still run.
    """
    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    digest = config.digest()

    manifest = RunManifest(config=config.snapshot(), config_digest=digest, output_dir=out)
    manifest_path = out / "manifest.json"
    if resume and manifest_path.exists():
        previous = RunManifest.load(manifest_path)
        if previous.config_digest != digest:
            raise ConfigError(
                ["cannot resume: manifest was produced by a different config"]
            )
        manifest = previous
    manifest.started_at = manifest.started_at or _now()
    manifest.eval_set_size = config.eval_set_size

    records = load_dataset(config.dataset_path)
    train_examples, eval_samples = split_dataset(records, config.eval_set_size, config.seed)
    sizes = (
        list(config.partition_sizes)
        if config.partition_sizes is not None
        else derive_shard_sizes(len(train_examples), config.federation.total_clients)
    )
    shards = partition_explicit(train_examples, sizes, config.seed)

    shared_indices, per_client_indices = _build_indices(config)
    embedder = HashedEmbedder()
    generator = ExtractiveGenerator()
    judge = JaccardJudge()

    indices_for = None
    if per_client_indices is not None:
        n_clients = config.federation.total_clients
        indices_for = [per_client_indices[i % n_clients] for i in range(len(eval_samples))]

    loss_entries: list[tuple[str, Any]] = []
    all_records: list[EvalRecord] = []

    for scenario in config.scenarios:
        label = SCENARIO_LABELS[scenario]
        rounds_name = f"rounds_{scenario}.csv"
        params_name = f"params_{scenario}.npy"
        train_key = f"train:{scenario}"
        try:
            if resume and manifest.cell_done(train_key):
                losses = read_loss_series(out / rounds_name)
            elif scenario == "central":
                params, losses = run_centralized(
                    train_examples,
                    config.central_epochs,
                    config.federation.batch_size,
                    config.central_lrate,
                    config.model,
                    seed=config.seed,
                )
                schedule = [
                    cosine_schedule(step, len(losses), config.central_lrate, 0.0)
                    for step in range(len(losses))
                ]
                n = len(train_examples)
                batch = config.federation.batch_size
                per_epoch = -(-n // batch)
                counts = [
                    min(batch, n - (step % per_epoch) * batch) for step in range(len(losses))
                ]
                write_step_losses(losses, schedule, counts, out / rounds_name)
                np.save(out / params_name, params)
            else:
                fed_cfg = dataclasses.replace(
                    config.federation,
                    clients_per_round=CLIENTS_PER_SCENARIO[scenario],
                    seed=config.seed,
                )
                params, logs = run_federated(shards, fed_cfg, config.model)
                write_round_logs(logs, out / rounds_name)
                np.save(out / params_name, params)
                losses = [log.aggregated_loss for log in logs]
            manifest.cells[train_key] = {
                "status": "done",
                "artifacts": {"rounds": rounds_name, "params": params_name},
            }
            if losses:
                loss_entries.append((label, summarize_losses(losses)))
        except Exception as err:
            logger.error("training cell %s failed: %s", train_key, err)
            manifest.cells[train_key] = {"status": "failed", "error": str(err)}
            manifest.save()
            continue
        manifest.save()

        for setting in config.rag_settings:
            cell_key = f"eval:{scenario}:{setting}"
            scores_name = f"scores_{scenario}_{setting}.csv"
            setting_label = SETTING_LABELS[setting]
            try:
                if resume and manifest.cell_done(cell_key):
                    for sce, sett, scores in read_scores_csv(out / scores_name):
                        all_records.append(
                            EvalRecord(sample_id="", scenario=sce, setting=sett, scores=scores)
                        )
                    continue
                if setting == "with":
                    outputs = answer_batch(
                        eval_samples,
                        generator,
                        config.rag,
                        indices=shared_indices,
                        indices_for=indices_for,
                    )
                else:
                    outputs = answer_batch(eval_samples, generator, config.rag)
                cell_records = []
                for sample, output in zip(eval_samples, outputs):
                    scores = score_output(
                        output, sample, judge, embedder, generator, config.relevancy_n
                    )
                    cell_records.append(
                        EvalRecord(
                            sample_id=sample.sample_id,
                            scenario=label,
                            setting=setting_label,
                            scores=scores,
                            answer=output.answer,
                            contexts=output.contexts,
                        )
                    )
                write_scores_csv(cell_records, out / scores_name)
                all_records.extend(cell_records)
                manifest.cells[cell_key] = {
                    "status": "done",
                    "artifacts": {"scores": scores_name},
                }
            except Exception as err:
                logger.error("evaluation cell %s failed: %s", cell_key, err)
                manifest.cells[cell_key] = {"status": "failed", "error": str(err)}
            manifest.save()

    loss_csv, loss_txt = write_table(
        out / "loss_table", LOSS_TABLE_HEADER, LOSS_TABLE_TITLES, loss_table_rows(loss_entries)
    )
    reports = aggregate_report(
        (record.scenario, record.setting, record.scores) for record in all_records
    )
    metric_csv, metric_txt = write_table(
        out / "metric_table", METRIC_TABLE_HEADER, METRIC_TABLE_TITLES, metric_table_rows(reports)
    )
    manifest.artifacts.update(
        {
            "loss_table_csv": loss_csv.name,
            "loss_table_txt": loss_txt.name,
            "metric_table_csv": metric_csv.name,
            "metric_table_txt": metric_txt.name,
        }
    )
    manifest.finished_at = _now()
    manifest.save()
    return manifest


def render_reports(manifest: RunManifest | str | Path) -> tuple[str, str]:
    """Re-render the loss and metric tables from a manifest's artifacts.

    Returns (loss_table_text, metric_table_text) and rewrites the table
    files next to the other artifacts. Missing inputs raise ReportError
    naming the file.
    """
    if not isinstance(manifest, RunManifest):
        path = Path(manifest)
        if not path.exists():
            raise ReportError(f"manifest not found: {path}")
        manifest = RunManifest.load(path)
    out = manifest.output_dir

    loss_entries = []
    triples = []
    for key, cell in sorted(manifest.cells.items()):
        if cell.get("status") != "done":
            continue
        artifacts = cell.get("artifacts", {})
        if key.startswith("train:"):
            scenario = key.split(":", 1)[1]
            rounds_path = out / artifacts.get("rounds", f"rounds_{scenario}.csv")
            if not rounds_path.exists():
                raise ReportError(f"missing round log: {rounds_path}")
            series = read_loss_series(rounds_path)
            if series:
                loss_entries.append((SCENARIO_LABELS[scenario], summarize_losses(series)))
        elif key.startswith("eval:"):
            _, scenario, setting = key.split(":")
            scores_path = out / artifacts.get("scores", f"scores_{scenario}_{setting}.csv")
            if not scores_path.exists():
                raise ReportError(f"missing scores file: {scores_path}")
            triples.extend(read_scores_csv(scores_path))

    order = {SCENARIO_LABELS[s]: i for i, s in enumerate(SCENARIOS)}
    loss_entries.sort(key=lambda entry: order.get(entry[0], len(order)))
    loss_rows = loss_table_rows(loss_entries)
    metric_rows = metric_table_rows(aggregate_report(triples))
    write_table(out / "loss_table", LOSS_TABLE_HEADER, LOSS_TABLE_TITLES, loss_rows)
    write_table(out / "metric_table", METRIC_TABLE_HEADER, METRIC_TABLE_TITLES, metric_rows)
    from .reports import render_text_table

    return (
        render_text_table(LOSS_TABLE_TITLES, loss_rows),
        render_text_table(METRIC_TABLE_TITLES, metric_rows),
    )


def partition_preview(config: ExperimentConfig) -> dict[str, Any]:
    """Shard sizes the run would use, without training anything."""
    records = load_dataset(config.dataset_path)
    n_train = len(records) - config.eval_set_size
    sizes = (
        list(config.partition_sizes)
        if config.partition_sizes is not None
        else derive_shard_sizes(n_train, config.federation.total_clients)
    )
    return {
        "total_records": len(records),
        "eval_set_size": config.eval_set_size,
        "train_size": n_train,
        "sizes": sizes,
    }
