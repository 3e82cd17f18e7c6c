"""Experiment runner: chronological slot evaluation of adaptation methods.

Four methods share one trained checkpoint and one stream of test slots:

- ``frozen``: score every slot with the trained model, never adapt.
- ``incremental``: after each slot, one in-order gradient pass over it.
- ``compensated``: correct each score with the error memory, writing every
  slot's revealed (hidden, label, base prediction) records back.
- ``incremental+compensated``: both; memory writes use the predictions
  made before that slot's gradient pass, matching serving reality.

Per slot the runner scores first, then computes metrics, then reveals
labels to the memory and the incremental pass, then applies the memory
refresh policy. Labels are never visible to the scoring phase.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .compensation import predict_batch
from .config import ExperimentConfig, SWEEP_PARAMS, config_from_dict
from .datastream import (
    DriftScenario, SYNTHETIC_KINDS, generate, load_csv, load_schema_sidecar, make_slots,
)
from .errors import ConfigError, DegenerateLabelsError, DriftcompError, EmptyNeighborhoodError
from .exact_memory import ExactMemory
from .lsh import SrpHashBank
from .metrics import auc, gauc, log_loss
from .model import BaseModel, FeatureSchema
from .records import MemoryRecord
from .sketch import ErrorSketch


@dataclass
class SlotMetrics:
    slot: str
    method: str
    auc: float
    gauc: float
    logloss: float

    def csv_row(self) -> str:
        return f"{self.slot},{self.method},{_fmt(self.auc)},{_fmt(self.gauc)},{_fmt(self.logloss)}"


@dataclass
class MethodResult:
    method: str
    per_slot: list
    overall: SlotMetrics
    scores: list                      # per-slot prediction arrays
    base_scores: list                 # per-slot uncompensated arrays
    memory: object = None             # final memory state, when the method has one


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    methods: dict                     # name -> MethodResult
    model: BaseModel
    slots: list

    def results_csv(self) -> str:
        lines = ["slot,method,auc,gauc,logloss"]
        for name in self.config.methods:
            run = self.methods[name]
            lines.extend(m.csv_row() for m in run.per_slot)
            lines.append(run.overall.csv_row())
        return "\n".join(lines) + "\n"


def _fmt(x: float) -> str:
    return repr(float(x))


# ------------------------------------------------------------------- data prep

@dataclass
class PreparedData:
    train_rows: list
    slots: list
    schema: FeatureSchema
    enc_train: object
    enc_slots: list


def prepare_data(config: ExperimentConfig) -> PreparedData:
    """Load or generate the stream and encode it against a fitted schema."""
    d = config.data
    if d.source == "synthetic":
        scenario = DriftScenario(
            kind=d.kind, n_slots=d.n_slots, rows_per_slot=d.rows_per_slot,
            train_rows=d.train_rows, magnitude=d.magnitude, seed=config.seed,
            flip_slot=d.flip_slot, base_rate=d.base_rate,
            n_users=d.n_users, n_items=d.n_items, n_categories=d.n_categories,
        )
        train_rows, slots = generate(scenario)
        kinds = dict(SYNTHETIC_KINDS)
    else:
        if not d.schema_path:
            raise ConfigError("data.schema_path is required when data.source = 'csv'")
        kinds = load_schema_sidecar(d.schema_path)
        loaded = load_csv(d.path, kinds, split_ts=d.split_ts)
        train_rows = loaded.train_rows
        slots = make_slots(loaded.test_rows, d.n_slots)
    schema = FeatureSchema.from_kinds(kinds, n_buckets=config.model.n_buckets).fit(train_rows)
    enc_train = schema.encode(train_rows)
    enc_slots = [schema.encode(slot.rows) for slot in slots]
    return PreparedData(train_rows, slots, schema, enc_train, enc_slots)


def train_base_model(config: ExperimentConfig, prepared: PreparedData) -> BaseModel:
    """Fit the shared checkpoint on the training rows."""
    m = config.model
    model = BaseModel(prepared.schema, embed_dim=m.embed_dim, hidden_sizes=tuple(m.hidden),
                      key_layer=m.key_layer, seed=config.seed)
    for epoch in range(m.epochs):
        model.train_epoch(prepared.enc_train.X, prepared.enc_train.y,
                          lr=m.lr, batch_size=m.batch_size, seed=config.seed + epoch)
    return model


def build_memory(config: ExperimentConfig, dim: int):
    """Instantiate the configured error-memory backend for key dimension dim."""
    m = config.memory
    if m.backend == "sketch":
        bank = SrpHashBank(dim, m.bits_per_hash, m.num_hashes, seed=config.seed)
        return ErrorSketch(bank, readout=m.readout)
    k = m.top_k if m.top_k is not None else m.num_hashes
    return ExactMemory(dim, capacity=m.capacity, default_k=k,
                       keep_prob=m.keep_prob, seed=config.seed)


# ------------------------------------------------------------------ experiment

def run_experiment(config: ExperimentConfig, prepared: PreparedData | None = None,
                   model: BaseModel | None = None) -> ExperimentResult:
    """Run every configured method over the chronological slots.

    ``prepared`` and ``model`` allow sweeps to reuse work; passing them is
    equivalent to recomputing them here because both are fully determined
    by the config and seed.
    """
    config.validate()
    if prepared is None:
        prepared = prepare_data(config)
    if model is None:
        model = train_base_model(config, prepared)

    trace_sink = _TraceSink(config)
    try:
        runs = {}
        for method in config.methods:
            runs[method] = _run_method(method, config, prepared, model, trace_sink)
    finally:
        trace_sink.close()

    result = ExperimentResult(config, runs, model, prepared.slots)
    _write_outputs(config, result)
    return result


def _run_method(method: str, config: ExperimentConfig, prepared: PreparedData,
                base_model: BaseModel, trace_sink) -> MethodResult:
    compensates = method in ("compensated", "incremental+compensated")
    increments = method in ("incremental", "incremental+compensated")
    model = base_model.copy() if increments else base_model
    memory = build_memory(config, base_model.hidden_dim) if compensates else None

    per_slot, scores, base_scores = [], [], []
    pooled_scores, pooled_labels, pooled_users = [], [], []
    slots_since_refresh = 0
    for t, enc in enumerate(prepared.enc_slots):
        try:
            # Scoring phase: labels stay out of reach of the predictor.
            y_base, hidden = model.score(enc.X)
            if compensates:
                y_pred, diag = predict_batch(y_base, hidden, memory, config.compensation)
            else:
                y_pred, diag = y_base, None
            trace_sink.emit(method, t, y_base, y_pred, diag)

            # Labels are revealed only after predictions are fixed.
            y = enc.y
            per_slot.append(_slot_metrics(str(t), method, y_pred, y, enc.users))
            scores.append(y_pred)
            base_scores.append(y_base)
            pooled_scores.append(y_pred)
            pooled_labels.append(y)
            if enc.users is not None:
                pooled_users.append(enc.users)

            if compensates:
                _write_records(memory, hidden, y, y_base, config.memory.sigma)
            updated = False
            if increments:
                model.incremental_update(enc.X, y, lr=config.model.lr,
                                         batch_size=config.model.batch_size)
                updated = True
            if compensates:
                slots_since_refresh += 1
                if _should_refresh(config.memory, updated, slots_since_refresh):
                    memory.reset()
                    slots_since_refresh = 0
        except DriftcompError as exc:
            raise type(exc)(f"slot {t} ({method}): {exc}") from exc

    overall = _slot_metrics(
        "overall", method,
        np.concatenate(pooled_scores), np.concatenate(pooled_labels),
        np.concatenate(pooled_users) if pooled_users else None,
    )
    return MethodResult(method, per_slot, overall, scores, base_scores, memory)


def _slot_metrics(slot, method, y_pred, y, users) -> SlotMetrics:
    a = auc(y_pred, y)
    if users is None:
        g = float("nan")
    else:
        try:
            g = gauc(y_pred, y, users)
        except DegenerateLabelsError:
            g = float("nan")
    return SlotMetrics(slot, method, a, g, log_loss(y_pred, y))


def _write_records(memory, hidden, labels, base_preds, sigma):
    if isinstance(memory, ErrorSketch):
        memory.write_batch(hidden, labels, base_preds, filter_threshold=sigma)
    else:
        memory.store_batch(hidden, labels, base_preds, filter_threshold=sigma)


def _should_refresh(mem_config, updated: bool, slots_since_refresh: int) -> bool:
    if mem_config.refresh == "never":
        return False
    if mem_config.refresh == "on_model_update":
        return updated
    return slots_since_refresh >= mem_config.refresh_every


class _TraceSink:
    """JSON-lines diagnostics stream, active when the config asks for it."""

    def __init__(self, config: ExperimentConfig):
        self._file = None
        if config.output.dir and config.output.trace:
            os.makedirs(config.output.dir, exist_ok=True)
            path = os.path.join(config.output.dir, config.output.trace_file)
            self._file = open(path, "w", encoding="utf-8")

    def emit(self, method, slot, y_base, y_pred, diag):
        if self._file is None:
            return
        if diag is None:
            for i in range(y_base.shape[0]):
                self._file.write(json.dumps({
                    "method": method, "slot": slot, "y_base": float(y_base[i]),
                    "y_err": 0.0, "y_pred": float(y_pred[i]),
                    "n_neighbors": 0, "fallback": True,
                }) + "\n")
            return
        for i, line_fields in enumerate(zip(y_base, y_pred, diag.y_err,
                                            diag.n_neighbors, diag.fallback)):
            yb, yp, ye, nn, fb = line_fields
            self._file.write(json.dumps({
                "method": method, "slot": slot, "y_base": float(yb), "y_err": float(ye),
                "y_pred": float(yp), "n_neighbors": int(nn), "fallback": bool(fb),
            }) + "\n")

    def close(self):
        if self._file is not None:
            self._file.close()
            self._file = None


def _write_outputs(config: ExperimentConfig, result: ExperimentResult):
    out = config.output
    if not out.dir:
        return
    os.makedirs(out.dir, exist_ok=True)
    if out.results_csv:
        with open(os.path.join(out.dir, out.results_csv), "w", encoding="utf-8",
                  newline="") as f:
            f.write(result.results_csv())
    if out.checkpoint:
        result.model.save(os.path.join(out.dir, out.checkpoint))
    if out.sketch_snapshot:
        for name in reversed(config.methods):
            memory = result.methods[name].memory
            if isinstance(memory, ErrorSketch):
                with open(os.path.join(out.dir, out.sketch_snapshot), "wb") as f:
                    f.write(memory.snapshot())
                break


# ----------------------------------------------------------------------- sweep

def sweep(config: ExperimentConfig, param: str, values) -> list[dict]:
    """Re-run the compensated method for each hyperparameter value.

    All sweepable parameters live on the memory/compensation side, so the
    data and the trained checkpoint are shared across points (bitwise
    identical to retraining, since both are seed-determined). Returns one
    {value, gauc, auc} row per value, computed over the pooled stream.
    """
    if param not in SWEEP_PARAMS:
        raise ConfigError(f"unknown sweep parameter {param!r}; choose from {sorted(SWEEP_PARAMS)}")
    values = list(values)
    if not values:
        raise ConfigError("sweep needs at least one value")
    prepared = prepare_data(config)
    model = train_base_model(config, prepared)

    rows = []
    for v in values:
        cfg = config.replace_param(param, v)
        cfg = _silence_outputs(cfg)
        cfg.methods = ["compensated"]
        result = run_experiment(cfg, prepared=prepared, model=model)
        overall = result.methods["compensated"].overall
        rows.append({"value": v, "gauc": overall.gauc, "auc": overall.auc})

    if config.output.dir:
        os.makedirs(config.output.dir, exist_ok=True)
        path = os.path.join(config.output.dir, f"sweep_{param}.csv")
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(sweep_csv(rows))
    return rows


def sweep_csv(rows) -> str:
    lines = ["value,gauc,auc"]
    lines.extend(f"{_fmt(r['value'])},{_fmt(r['gauc'])},{_fmt(r['auc'])}" for r in rows)
    return "\n".join(lines) + "\n"


def _silence_outputs(cfg: ExperimentConfig) -> ExperimentConfig:
    payload = cfg.to_dict()
    payload["output"]["dir"] = ""
    return config_from_dict(payload)


# ----------------------------------------------------------------------- bench

@dataclass
class BenchReport:
    """Throughput and footprint of the sketch at increasing fill levels."""

    fill_levels: list
    writes_per_sec: dict
    reads_per_sec: dict
    sketch_bytes: dict
    write_ratio: float = field(init=False)
    read_ratio: float = field(init=False)

    def __post_init__(self):
        lo, hi = self.fill_levels[0], self.fill_levels[-1]
        self.write_ratio = self.writes_per_sec[lo] / self.writes_per_sec[hi]
        self.read_ratio = self.reads_per_sec[lo] / self.reads_per_sec[hi]

    def to_text(self) -> str:
        lines = ["fill_level,writes_per_sec,reads_per_sec,sketch_bytes"]
        for level in self.fill_levels:
            lines.append(f"{level},{self.writes_per_sec[level]:.0f},"
                         f"{self.reads_per_sec[level]:.0f},{self.sketch_bytes[level]}")
        lines.append(f"write slowdown at max fill: {self.write_ratio:.3f}x")
        lines.append(f"read slowdown at max fill: {self.read_ratio:.3f}x")
        return "\n".join(lines) + "\n"


def bench(config: ExperimentConfig, fill_levels=(1_000, 100_000, 1_000_000),
          ops: int = 2000, repeats: int = 3, dim: int = 16) -> BenchReport:
    """Measure single-record write/read cost against sketch fill level.

    Constant-time access means the rates should not depend on how much the
    sketch already holds; the report's ratios make that checkable.
    """
    m = config.memory
    bank = SrpHashBank(dim, m.bits_per_hash, m.num_hashes, seed=config.seed)
    sketch = ErrorSketch(bank, readout=m.readout)
    rng = np.random.default_rng(config.seed)

    write_records = [
        MemoryRecord(rng.normal(size=dim), int(rng.integers(0, 2)), float(rng.random()))
        for _ in range(ops)
    ]
    read_queries = rng.normal(size=(ops, dim))

    writes_per_sec, reads_per_sec, sketch_bytes = {}, {}, {}
    filled = 0
    for level in sorted(fill_levels):
        _fill_sketch(sketch, rng, level - filled, dim)
        filled = level
        best_write = min(_time_writes(sketch, write_records) for _ in range(repeats))
        best_read = min(_time_reads(sketch, read_queries) for _ in range(repeats))
        writes_per_sec[level] = ops / best_write
        reads_per_sec[level] = ops / best_read
        sketch_bytes[level] = sketch.nbytes
    return BenchReport(sorted(fill_levels), writes_per_sec, reads_per_sec, sketch_bytes)


def _fill_sketch(sketch, rng, count, dim, chunk=100_000):
    remaining = count
    while remaining > 0:
        n = min(chunk, remaining)
        sketch.write_batch(rng.normal(size=(n, dim)), rng.integers(0, 2, n).astype(float),
                           rng.random(n))
        remaining -= n


def _time_writes(sketch, records) -> float:
    start = time.perf_counter()
    for record in records:
        sketch.write(record)
    return time.perf_counter() - start


def _time_reads(sketch, queries) -> float:
    misses = 0
    start = time.perf_counter()
    for q in queries:
        try:
            sketch.read(q)
        except EmptyNeighborhoodError:
            misses += 1
    return time.perf_counter() - start
