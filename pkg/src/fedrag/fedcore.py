"""Federated training protocol and the centralized baseline.

One round: compute the annealed learning rate, select clients, train
each selected client locally from the current global parameters, then
aggregate with sample-count-weighted FedAvg. Every round is logged and
the whole loop is bit-reproducible from (shards, config).
"""

from __future__ import annotations

import base64
import csv
import json
import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .modelkit import ModelFamily, ParamVector, TrainExample, train_features

AGGREGATE_ROW_ID = "aggregate"

# Reference 20-client Non-IID allocation (sums to 33955); also the shape
# used when deriving shard sizes for other dataset sizes.
DEFAULT_SHARD_SIZES = (
    900, 926, 1052, 1064, 1136, 1250, 1319, 1328, 1448, 1524,
    1659, 1675, 1877, 1924, 2089, 2144, 2350, 2515, 2627, 3148,
)


def derive_shard_sizes(n_examples: int, total_clients: int) -> list[int]:
    """Uneven shard sizes for any dataset size, largest-remainder scaled.

    For 20 clients the reference allocation provides the proportions;
    otherwise a 1..N ramp keeps the split Non-IID in size. Every shard
    gets at least one example, so n_examples must be >= total_clients.
    """
    if n_examples < total_clients:
        raise ValueError(
            f"cannot split {n_examples} examples across {total_clients} clients"
        )
    if total_clients == len(DEFAULT_SHARD_SIZES):
        weights = [float(w) for w in DEFAULT_SHARD_SIZES]
    else:
        weights = [float(i + 1) for i in range(total_clients)]
    scale = n_examples / sum(weights)
    quotas = [w * scale for w in weights]
    sizes = [int(q) for q in quotas]
    remainders = sorted(
        range(total_clients), key=lambda i: (-(quotas[i] - sizes[i]), i)
    )
    for i in remainders[: n_examples - sum(sizes)]:
        sizes[i] += 1
    for i in range(total_clients):
        if sizes[i] == 0:
            donor = max(range(total_clients), key=lambda j: sizes[j])
            sizes[donor] -= 1
            sizes[i] += 1
    return sizes


class AggregationError(ValueError):
    """FedAvg input is empty or shape-inconsistent."""


class FederatedRunError(RuntimeError):
    """A client failed during a round; identifies round and client."""

    def __init__(self, round_index: int, client_id: int, cause: Exception):
        super().__init__(f"round {round_index}, client {client_id}: {cause}")
        self.round_index = round_index
        self.client_id = client_id


@dataclass(frozen=True)
class FederationConfig:
    """Knobs of the federated run. Defaults follow the experiment setup:
    20 clients, batch 16, 100 rounds, cosine-annealed learning rate."""

    total_clients: int = 20
    clients_per_round: int = 2
    rounds: int = 100
    batch_size: int = 16
    local_epochs: int = 1
    lrate_max: float = 1e-4
    lrate_min: float = 5e-5
    seed: int = 0
    weighting: str = "samples"  # or "uniform"

    def __post_init__(self) -> None:
        if not 1 <= self.clients_per_round <= self.total_clients:
            raise ValueError(
                f"clients_per_round must be in [1, {self.total_clients}], "
                f"got {self.clients_per_round}"
            )
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")
        if self.batch_size < 1 or self.local_epochs < 1:
            raise ValueError("batch_size and local_epochs must be >= 1")
        if self.lrate_max <= 0 or self.lrate_min < 0:
            raise ValueError("need lrate_max > 0 and lrate_min >= 0")
        if self.weighting not in ("samples", "uniform"):
            raise ValueError(f"unknown weighting {self.weighting!r}")


@dataclass
class ClientShard:
    """One client's private slice of the dataset."""

    client_id: int
    examples: list[TrainExample]


@dataclass
class RoundLog:
    """Everything observed in one round."""

    round: int
    selected: list[int]
    client_losses: dict[int, float]
    client_sizes: dict[int, int]
    aggregated_loss: float
    lrate: float


@dataclass(frozen=True)
class LossSummary:
    maximum: float
    minimum: float
    mean: float
    median: float


def partition_explicit(
    data: Sequence[TrainExample], sizes: Sequence[int], seed: int
) -> list[ClientShard]:
    """Shuffle with the seed, then split contiguously by the size list.

    Shards are disjoint and cover the dataset exactly; a size-sum
    mismatch is a configuration error reporting both totals.
    """
    if any(size < 1 for size in sizes):
        raise ValueError(f"all shard sizes must be >= 1, got {list(sizes)}")
    total = sum(sizes)
    if total != len(data):
        raise ValueError(
            f"shard sizes sum to {total} but the dataset has {len(data)} examples"
        )
    order = np.random.default_rng(seed).permutation(len(data))
    shards = []
    cursor = 0
    for client_id, size in enumerate(sizes):
        indices = order[cursor : cursor + size]
        shards.append(
            ClientShard(client_id=client_id, examples=[data[i] for i in indices])
        )
        cursor += size
    return shards


def select_clients(round_index: int, cfg: FederationConfig) -> list[int]:
    """Uniform draw without replacement, keyed by (seed, round), sorted."""
    rng = np.random.default_rng([cfg.seed, round_index])
    picked = rng.choice(cfg.total_clients, size=cfg.clients_per_round, replace=False)
    return sorted(int(c) for c in picked)


def cosine_lrate(round_index: int, cfg: FederationConfig) -> float:
    """Cosine annealing from lrate_max at round 0 to lrate_min at the last."""
    return cosine_schedule(round_index, cfg.rounds, cfg.lrate_max, cfg.lrate_min)


def cosine_schedule(t: int, total: int, lr_max: float, lr_min: float) -> float:
    """lr(t) = lr_min + (lr_max - lr_min) * (1 + cos(pi * t / total)) / 2."""
    if total <= 0:
        return lr_max
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + math.cos(math.pi * t / total))


def fedavg(updates: Sequence[tuple[ParamVector, int]]) -> ParamVector:
    """Sample-count-weighted elementwise mean of parameter vectors."""
    if not updates:
        raise AggregationError("no updates to aggregate")
    vectors = [np.asarray(params, dtype=np.float64) for params, _ in updates]
    counts = [count for _, count in updates]
    if any(count < 1 for count in counts):
        raise AggregationError(f"sample counts must be >= 1, got {counts}")
    length = vectors[0].shape
    for vec in vectors[1:]:
        if vec.shape != length:
            raise AggregationError(
                f"parameter length mismatch: {vec.shape} vs {length}"
            )
    total = float(sum(counts))
    aggregate = np.zeros_like(vectors[0])
    for vec, count in zip(vectors, counts):
        aggregate += (count / total) * vec
    return aggregate


def round_seed(seed: int, round_index: int) -> int:
    """Deterministic per-round training seed, shared by the round's clients."""
    return int(np.random.SeedSequence([seed, round_index]).generate_state(1, np.uint64)[0])


class LoopbackCodec:
    """Serializes the round protocol so distribute/update cross an explicit
    message boundary. Parameters travel as base64 little-endian float64,
    which round-trips bit-exactly."""

    @staticmethod
    def _pack(params: ParamVector) -> str:
        data = np.ascontiguousarray(params, dtype="<f8").tobytes()
        return base64.b64encode(data).decode("ascii")

    @staticmethod
    def _unpack(blob: str) -> ParamVector:
        return np.frombuffer(base64.b64decode(blob), dtype="<f8").copy()

    def encode_distribute(self, round_index: int, lrate: float, params: ParamVector) -> bytes:
        return json.dumps(
            {"type": "distribute", "round": round_index, "lrate": lrate, "params": self._pack(params)}
        ).encode("utf-8")

    def decode_distribute(self, message: bytes) -> tuple[int, float, ParamVector]:
        payload = json.loads(message.decode("utf-8"))
        if payload.get("type") != "distribute":
            raise ValueError(f"expected distribute message, got {payload.get('type')!r}")
        return payload["round"], payload["lrate"], self._unpack(payload["params"])

    def encode_update(
        self, round_index: int, client_id: int, samples: int, loss: float, params: ParamVector
    ) -> bytes:
        return json.dumps(
            {
                "type": "update",
                "round": round_index,
                "client": client_id,
                "samples": samples,
                "loss": loss,
                "params": self._pack(params),
            }
        ).encode("utf-8")

    def decode_update(self, message: bytes) -> tuple[int, int, int, float, ParamVector]:
        payload = json.loads(message.decode("utf-8"))
        if payload.get("type") != "update":
            raise ValueError(f"expected update message, got {payload.get('type')!r}")
        return (
            payload["round"],
            payload["client"],
            payload["samples"],
            payload["loss"],
            self._unpack(payload["params"]),
        )


def run_federated(
    shards: Sequence[ClientShard],
    cfg: FederationConfig,
    family: ModelFamily,
    initial_params: ParamVector | None = None,
    codec: LoopbackCodec | None = None,
    max_workers: int = 1,
) -> tuple[ParamVector, list[RoundLog]]:
    """Run the full round loop and return (final params, per-round logs).

    Shards are featurized once up front. Selected clients within a round
    are independent and may run on a thread pool; aggregation is the
    round barrier. Results are identical for any max_workers.
    """
    if len(shards) != cfg.total_clients:
        raise ValueError(
            f"config expects {cfg.total_clients} clients but got {len(shards)} shards"
        )
    by_id = {shard.client_id: shard for shard in shards}
    if sorted(by_id) != list(range(cfg.total_clients)):
        raise ValueError("shard client_ids must be exactly 0..total_clients-1")
    features = {cid: family.encode(shard.examples) for cid, shard in by_id.items()}

    params = family.init_params() if initial_params is None else np.asarray(
        initial_params, dtype=np.float64
    )
    if params.shape != (family.param_length,):
        raise ValueError("initial params do not match the model family")

    def client_round(round_index: int, client_id: int, lrate: float) -> tuple[np.ndarray, int, float]:
        local_params, local_lrate = params, lrate
        if codec is not None:
            _, local_lrate, local_params = codec.decode_distribute(
                codec.encode_distribute(round_index, lrate, params)
            )
        X, y = features[client_id]
        try:
            final, losses = train_features(
                local_params,
                X,
                y,
                family.n_classes,
                lambda _: local_lrate,
                cfg.batch_size,
                cfg.local_epochs,
                round_seed(cfg.seed, round_index),
            )
        except Exception as err:
            raise FederatedRunError(round_index, client_id, err) from err
        loss = float(np.mean(losses))
        if codec is not None:
            _, _, samples, loss, final = codec.decode_update(
                codec.encode_update(round_index, client_id, len(y), loss, final)
            )
        return final, len(y), loss

    logs: list[RoundLog] = []
    for round_index in range(cfg.rounds):
        lrate = cosine_lrate(round_index, cfg)
        selected = select_clients(round_index, cfg)
        if max_workers > 1:
            with ThreadPoolExecutor(max_workers=max_workers) as pool:
                results = list(
                    pool.map(lambda cid: client_round(round_index, cid, lrate), selected)
                )
        else:
            results = [client_round(round_index, cid, lrate) for cid in selected]

        sizes = {cid: size for cid, (_, size, _) in zip(selected, results)}
        losses = {cid: loss for cid, (_, _, loss) in zip(selected, results)}
        if cfg.weighting == "uniform":
            updates = [(final, 1) for final, _, _ in results]
        else:
            updates = [(final, size) for final, size, _ in results]
        params = fedavg(updates)
        total = sum(sizes.values())
        aggregated_loss = sum(losses[cid] * sizes[cid] for cid in selected) / total
        logs.append(
            RoundLog(
                round=round_index,
                selected=selected,
                client_losses=losses,
                client_sizes=sizes,
                aggregated_loss=aggregated_loss,
                lrate=lrate,
            )
        )
    return params, logs


def run_centralized(
    data: Sequence[TrainExample],
    epochs: int,
    batch_size: int,
    lrate: float,
    family: ModelFamily,
    seed: int = 0,
    lrate_min: float = 0.0,
) -> tuple[ParamVector, list[float]]:
    """Single-site baseline: ceil(n / batch) * epochs steps with per-step
    cosine annealing from lrate down to lrate_min."""
    if not data:
        raise ValueError("data must be non-empty")
    X, y = family.encode(data)
    total_steps = math.ceil(len(data) / batch_size) * epochs
    return train_features(
        family.init_params(),
        X,
        y,
        family.n_classes,
        lambda step: cosine_schedule(step, total_steps, lrate, lrate_min),
        batch_size,
        epochs,
        seed,
    )


def summarize_losses(losses: Sequence[float]) -> LossSummary:
    """Max, min, arithmetic mean, and textbook median of a loss series."""
    if not losses:
        raise ValueError("cannot summarize an empty loss series")
    return LossSummary(
        maximum=max(losses),
        minimum=min(losses),
        mean=statistics.fmean(losses),
        median=statistics.median(losses),
    )


def write_round_logs(logs: Sequence[RoundLog], path: str | Path) -> None:
    """CSV export: one row per (round, client) plus an aggregate row per round."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["round", "client_id", "samples", "loss", "lrate"])
        for log in logs:
            for cid in log.selected:
                writer.writerow(
                    [log.round, cid, log.client_sizes[cid], repr(log.client_losses[cid]), repr(log.lrate)]
                )
            writer.writerow(
                [
                    log.round,
                    AGGREGATE_ROW_ID,
                    sum(log.client_sizes.values()),
                    repr(log.aggregated_loss),
                    repr(log.lrate),
                ]
            )


def write_step_losses(
    losses: Sequence[float],
    schedule: Sequence[float],
    samples: Sequence[int],
    path: str | Path,
) -> None:
    """CSV export for the centralized baseline, one row per step."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["round", "client_id", "samples", "loss", "lrate"])
        for step, (loss, lrate, count) in enumerate(zip(losses, schedule, samples)):
            writer.writerow([step, "central", count, repr(loss), repr(lrate)])


def read_loss_series(path: str | Path) -> list[float]:
    """Aggregate/central loss series back out of a round-log CSV."""
    series: list[float] = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            if row["client_id"] in (AGGREGATE_ROW_ID, "central"):
                series.append(float(row["loss"]))
    return series
