"""FastAPI service exposing the experiment runner and a corpus/QA surface.

The four CLI verbs (validate, partition, run, report) are backed by the
endpoints here; in addition, corpora can be registered once and then
queried or asked questions by any number of clients.
"""

from __future__ import annotations

import dataclasses
import itertools
import json
import threading
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field, model_validator

from . import __version__
from .corpus import ChunkingConfig, chunk_corpus, load_corpus
from .evalkit import score_output
from .experiment import (
    ConfigError,
    ExperimentConfig,
    ReportError,
    RunManifest,
    build_config,
    load_config,
    parse_config_text,
    partition_preview,
    render_reports,
    run_experiment,
)
from .modelkit import ExtractiveGenerator, HashedEmbedder, JaccardJudge
from .ragpipe import QaSample, RagConfig, RagIndices, answer_with_rag, answer_without_rag, build_rag_indices
from .retrieval import EnsembleConfig, bm25_query, dense_query, ensemble_query


class HealthResponse(BaseModel):
    status: str
    version: str


class ConfigSource(BaseModel):
    """A config referenced by path (shared filesystem) or sent inline."""

    config_path: str | None = None
    config_text: str | None = None

    @model_validator(mode="after")
    def _exactly_one(self) -> "ConfigSource":
        if (self.config_path is None) == (self.config_text is None):
            raise ValueError("provide exactly one of config_path or config_text")
        return self


class ValidateResponse(BaseModel):
    valid: bool
    errors: list[str] = Field(default_factory=list)
    warnings: list[str] = Field(default_factory=list)
    config: dict | None = None


class PartitionResponse(BaseModel):
    total_records: int
    eval_set_size: int
    train_size: int
    sizes: list[int]


class RunRequest(ConfigSource):
    seed: int | None = None
    output_dir: str | None = None
    scenarios: list[str] | None = None
    rag_settings: list[str] | None = None
    resume: bool = False


class RunResponse(BaseModel):
    manifest_path: str
    manifest: dict


class ReportRequest(BaseModel):
    manifest_path: str


class ReportResponse(BaseModel):
    loss_table: str
    metric_table: str


class CorpusRequest(BaseModel):
    directory: str
    chunk_size: int = 1000
    overlap: int = 50


class CorpusInfo(BaseModel):
    corpus_id: str
    documents: int
    chunks: int
    embedding_dimension: int


class QueryRequest(BaseModel):
    query: str
    top_k: int = 4
    mode: str = "ensemble"  # ensemble | bm25 | dense


class RankedChunk(BaseModel):
    chunk_id: str
    score: float
    text: str


class QueryResponse(BaseModel):
    results: list[RankedChunk]


class AnswerRequest(BaseModel):
    question: str
    ground_truth: str | None = None
    with_rag: bool = True
    top_k: int = 4


class AnswerResponse(BaseModel):
    answer: str
    contexts: list[str]
    ranking: list[RankedChunk]
    scores: dict[str, float | None] | None = None


@dataclass
class _Registry:
    """In-memory corpus registry; safe for concurrent requests."""

    lock: threading.Lock
    corpora: dict[str, RagIndices]
    counter: "itertools.count[int]"


def _load_request_config(request: ConfigSource) -> tuple[ExperimentConfig, list[str]]:
    if request.config_path is not None:
        return load_config(request.config_path)
    raw = parse_config_text(request.config_text or "")
    return build_config(raw, Path.cwd())


def create_app() -> FastAPI:
    app = FastAPI(title="fedrag", version=__version__)
    registry = _Registry(lock=threading.Lock(), corpora={}, counter=itertools.count(1))
    embedder = HashedEmbedder()
    generator = ExtractiveGenerator()
    judge = JaccardJudge()

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/config/validate", response_model=ValidateResponse)
    def validate(request: ConfigSource) -> ValidateResponse:
        try:
            config, warnings = _load_request_config(request)
        except ConfigError as err:
            return ValidateResponse(valid=False, errors=err.errors)
        return ValidateResponse(valid=True, warnings=warnings, config=config.snapshot())

    @app.post("/partition/preview", response_model=PartitionResponse)
    def partition(request: ConfigSource) -> PartitionResponse:
        try:
            config, _ = _load_request_config(request)
            preview = partition_preview(config)
        except ConfigError as err:
            raise HTTPException(status_code=400, detail=err.errors)
        return PartitionResponse(**preview)

    @app.post("/experiments/run", response_model=RunResponse)
    def run(request: RunRequest) -> RunResponse:
        try:
            config, _ = _load_request_config(request)
            overrides = {}
            if request.seed is not None:
                overrides["seed"] = request.seed
                overrides["federation"] = dataclasses.replace(
                    config.federation, seed=request.seed
                )
            if request.output_dir is not None:
                overrides["output_dir"] = Path(request.output_dir).resolve()
            if request.scenarios:
                unknown = set(request.scenarios) - {"fed2", "fed4", "fed6", "central"}
                if unknown:
                    raise ConfigError([f"unknown scenario {name!r}" for name in sorted(unknown)])
                overrides["scenarios"] = tuple(
                    s for s in ("fed2", "fed4", "fed6", "central") if s in request.scenarios
                )
            if request.rag_settings:
                unknown = set(request.rag_settings) - {"without", "with"}
                if unknown:
                    raise ConfigError([f"unknown rag setting {name!r}" for name in sorted(unknown)])
                overrides["rag_settings"] = tuple(
                    s for s in ("without", "with") if s in request.rag_settings
                )
            if overrides:
                config = dataclasses.replace(config, **overrides)
            manifest = run_experiment(config, resume=request.resume)
        except ConfigError as err:
            raise HTTPException(status_code=400, detail=err.errors)
        return RunResponse(
            manifest_path=str(manifest.path()),
            manifest=json.loads(manifest.path().read_text(encoding="utf-8")),
        )

    @app.post("/reports/render", response_model=ReportResponse)
    def report(request: ReportRequest) -> ReportResponse:
        try:
            loss_table, metric_table = render_reports(request.manifest_path)
        except ReportError as err:
            raise HTTPException(status_code=404, detail=str(err))
        return ReportResponse(loss_table=loss_table, metric_table=metric_table)

    @app.post("/corpora", response_model=CorpusInfo)
    def register_corpus(request: CorpusRequest) -> CorpusInfo:
        try:
            documents = load_corpus(request.directory)
            if not documents:
                raise ValueError(f"no usable .txt documents in {request.directory}")
            chunks = chunk_corpus(
                documents, ChunkingConfig(chunk_size=request.chunk_size, overlap=request.overlap)
            )
            indices = build_rag_indices(chunks, embedder)
        except (FileNotFoundError, ValueError) as err:
            raise HTTPException(status_code=400, detail=str(err))
        with registry.lock:
            corpus_id = f"corpus-{next(registry.counter)}"
            registry.corpora[corpus_id] = indices
        return CorpusInfo(
            corpus_id=corpus_id,
            documents=len(documents),
            chunks=len(chunks),
            embedding_dimension=embedder.dimension,
        )

    @app.get("/corpora", response_model=list[CorpusInfo])
    def list_corpora() -> list[CorpusInfo]:
        with registry.lock:
            return [
                CorpusInfo(
                    corpus_id=corpus_id,
                    documents=len({c.split(":")[0] for c in indices.texts}),
                    chunks=len(indices.texts),
                    embedding_dimension=indices.embedder.dimension,
                )
                for corpus_id, indices in registry.corpora.items()
            ]

    def _indices(corpus_id: str) -> RagIndices:
        with registry.lock:
            indices = registry.corpora.get(corpus_id)
        if indices is None:
            raise HTTPException(status_code=404, detail=f"unknown corpus {corpus_id!r}")
        return indices

    @app.post("/corpora/{corpus_id}/query", response_model=QueryResponse)
    def query_corpus(corpus_id: str, request: QueryRequest) -> QueryResponse:
        indices = _indices(corpus_id)
        if request.mode == "bm25":
            result = bm25_query(indices.bm25, request.query, request.top_k)
        elif request.mode == "dense":
            result = dense_query(indices.dense, request.query, indices.embedder, request.top_k)
        elif request.mode == "ensemble":
            cfg = EnsembleConfig(top_k=request.top_k)
            result = ensemble_query(indices.bm25, indices.dense, request.query, cfg, indices.embedder)
        else:
            raise HTTPException(status_code=422, detail=f"unknown mode {request.mode!r}")
        return QueryResponse(
            results=[
                RankedChunk(chunk_id=cid, score=score, text=indices.texts[cid])
                for cid, score in result.ranked
            ]
        )

    @app.post("/corpora/{corpus_id}/answer", response_model=AnswerResponse)
    def answer(corpus_id: str, request: AnswerRequest) -> AnswerResponse:
        indices = _indices(corpus_id)
        sample = QaSample(
            sample_id="adhoc",
            question=request.question,
            ground_truth=request.ground_truth or request.question,
        )
        cfg = RagConfig(ensemble=EnsembleConfig(top_k=request.top_k))
        if request.with_rag:
            output = answer_with_rag(sample, indices, generator, cfg)
        else:
            output = answer_without_rag(sample, generator, cfg)
        scores = None
        if request.ground_truth:
            scores = score_output(output, sample, judge, embedder, generator).as_dict()
        ranking = (
            [
                RankedChunk(chunk_id=cid, score=score, text=indices.texts[cid])
                for cid, score in output.retrieval.ranked
            ]
            if output.retrieval is not None
            else []
        )
        return AnswerResponse(
            answer=output.answer, contexts=output.contexts, ranking=ranking, scores=scores
        )

    return app


app = create_app()
