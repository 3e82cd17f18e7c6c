"""Data ingestion, chronological slotting and synthetic drifting streams.

The synthetic generator produces click-style rows with a known ground
truth: categorical ids drawn from slot-dependent Zipf distributions,
numerical features from slot-dependent Gaussians, and labels sampled
Bernoulli from a logistic model whose weights, feature distributions or
base rate move across slots according to the drift kind. Because the true
click probability of every row is known (stored under ``p_true``), the
generator doubles as a calibration oracle for the whole pipeline.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import ParameterError, SchemaError

DRIFT_KINDS = ("covariate", "label", "concept", "abrupt_concept")

#: Field kinds of the synthetic rows, usable directly as a schema declaration.
SYNTHETIC_KINDS = {
    "user_id": "user_id",
    "item_id": "categorical",
    "category": "categorical",
    "x0": "numerical",
    "x1": "numerical",
    "label": "label",
    "ts": "timestamp",
}


@dataclass
class Slot:
    """One chronological partition of the test stream."""

    index: int
    rows: list
    ts_min: float | None = None
    ts_max: float | None = None

    def __len__(self) -> int:
        return len(self.rows)


@dataclass
class DriftScenario:
    """Fully seeded description of a synthetic drifting stream.

    ``magnitude`` scales how hard the chosen drift kind moves per slot;
    0 gives an i.i.d. stream for every kind. ``slot_base_rates``
    optionally pins the per-slot click rate (label drift), overriding the
    ramp derived from ``magnitude``.
    """

    kind: str = "abrupt_concept"
    n_slots: int = 10
    rows_per_slot: int = 5000
    train_rows: int = 50000
    magnitude: float = 1.0
    seed: int = 0
    flip_slot: int = 5
    base_rate: float = 0.5
    slot_base_rates: list | None = None
    n_users: int = 400
    n_items: int = 300
    n_categories: int = 12
    zipf_exponent: float = 1.3

    def __post_init__(self):
        if self.kind not in DRIFT_KINDS:
            raise ParameterError(f"kind must be one of {DRIFT_KINDS}, got {self.kind!r}")
        if self.magnitude < 0.0:
            raise ParameterError(f"magnitude must be >= 0, got {self.magnitude}")
        if self.n_slots < 1 or self.rows_per_slot < 1 or self.train_rows < 1:
            raise ParameterError("n_slots, rows_per_slot and train_rows must be >= 1")
        if not 0.0 < self.base_rate < 1.0:
            raise ParameterError(f"base_rate must lie in (0, 1), got {self.base_rate}")
        if self.slot_base_rates is not None and len(self.slot_base_rates) != self.n_slots:
            raise ParameterError("slot_base_rates must have one entry per slot")


class _TruthModel:
    """Latent logistic ground truth with two weight sets for rotation."""

    N_NUMERIC = 2

    def __init__(self, scenario: DriftScenario, rng):
        s = scenario
        self.user_a = rng.normal(0.0, 0.4, s.n_users)
        self.user_b = rng.normal(0.0, 0.4, s.n_users)
        self.item_a = rng.normal(0.0, 0.4, s.n_items)
        self.item_b = rng.normal(0.0, 0.4, s.n_items)
        self.cat_a = rng.normal(0.0, 0.9, s.n_categories)
        self.cat_b = rng.normal(0.0, 0.9, s.n_categories)
        self.num_a = rng.normal(0.0, 1.0, self.N_NUMERIC)
        self.num_b = rng.normal(0.0, 1.0, self.N_NUMERIC)
        self.item_category = rng.integers(0, s.n_categories, s.n_items)

    def structural_logits(self, users, items, x, angle: float, flipped: bool):
        """Logits before the per-slot bias, under the given concept state."""
        c, s = np.cos(angle), np.sin(angle)
        user_w = c * self.user_a + s * self.user_b
        item_w = c * self.item_a + s * self.item_b
        cat_w = c * self.cat_a + s * self.cat_b
        num_w = c * self.num_a + s * self.num_b
        logits = (user_w[users] + item_w[items]
                  + cat_w[self.item_category[items]] + x @ num_w)
        return -logits if flipped else logits


def _zipf_probs(n: int, exponent: float) -> np.ndarray:
    p = 1.0 / np.arange(1, n + 1) ** exponent
    return p / p.sum()


def _calibrate_bias(struct: np.ndarray, target: float) -> float:
    """Bias b with mean(sigmoid(struct + b)) == target, by bisection."""
    lo, hi = -30.0, 30.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if float(expit(struct + mid).mean()) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def generate(scenario: DriftScenario):
    """Sample (train_rows, slots) for the scenario.

    Training rows follow the slot-0 distribution and concept. Per slot,
    the drift kind moves exactly one thing: feature distributions
    (covariate), the target click rate (label), the true weight vector
    gradually (concept) or its sign at ``flip_slot`` (abrupt_concept).
    Every row records its true probability under ``p_true``.
    """
    s = scenario
    rng = np.random.default_rng(s.seed)
    truth = _TruthModel(s, rng)

    def slot_params(t: int):
        """(zipf_offset, numeric_shift, angle, flipped, target_rate) for slot t."""
        frac = t / max(1, s.n_slots - 1)
        offset = 0
        shift = 0.0
        angle = 0.0
        flipped = False
        target = s.base_rate
        if s.kind == "covariate" and t >= 0:
            offset = int(round(s.magnitude * frac * s.n_users / 3))
            shift = s.magnitude * frac * 1.5
        elif s.kind == "label":
            if s.slot_base_rates is not None:
                target = float(s.slot_base_rates[t])
            else:
                target = float(np.clip(s.base_rate + 0.3 * s.magnitude * frac, 0.02, 0.98))
        elif s.kind == "concept":
            angle = 0.5 * np.pi * s.magnitude * frac
        elif s.kind == "abrupt_concept":
            flipped = s.magnitude > 0.0 and t >= s.flip_slot
        return offset, shift, angle, flipped, target

    ts_counter = 0

    def sample_rows(n: int, t: int):
        nonlocal ts_counter
        offset, shift, angle, flipped, target = slot_params(t)
        user_probs = np.roll(_zipf_probs(s.n_users, s.zipf_exponent), offset)
        item_probs = np.roll(_zipf_probs(s.n_items, s.zipf_exponent), offset % s.n_items)
        users = rng.choice(s.n_users, size=n, p=user_probs)
        items = rng.choice(s.n_items, size=n, p=item_probs)
        x = rng.normal(shift, 1.0, (n, _TruthModel.N_NUMERIC))
        struct = truth.structural_logits(users, items, x, angle, flipped)
        bias = _calibrate_bias(struct, target)
        p = expit(struct + bias)
        labels = (rng.random(n) < p).astype(int)
        rows = []
        for i in range(n):
            rows.append({
                "user_id": f"u{users[i]}",
                "item_id": f"i{items[i]}",
                "category": f"c{truth.item_category[items[i]]}",
                "x0": float(x[i, 0]),
                "x1": float(x[i, 1]),
                "label": int(labels[i]),
                "ts": ts_counter + i,
                "p_true": float(p[i]),
            })
        ts_counter += n
        return rows

    train_rows = sample_rows(s.train_rows, 0)
    slots = []
    for t in range(s.n_slots):
        rows = sample_rows(s.rows_per_slot, t)
        slots.append(Slot(t, rows, rows[0]["ts"], rows[-1]["ts"]))
    return train_rows, slots


def make_slots(test_rows, n_slots: int) -> list[Slot]:
    """Evenly partition an already time-ordered stream into slots.

    The first ``n_slots - 1`` slots get ``len // n_slots`` rows each and
    the remainder goes to the last slot.
    """
    if n_slots < 1:
        raise ParameterError(f"n_slots must be >= 1, got {n_slots}")
    n = len(test_rows)
    if n < n_slots:
        raise ParameterError(f"cannot split {n} rows into {n_slots} slots")
    base = n // n_slots
    slots = []
    start = 0
    for t in range(n_slots):
        size = base if t < n_slots - 1 else n - base * (n_slots - 1)
        rows = list(test_rows[start:start + size])
        ts_min = rows[0].get("ts") if isinstance(rows[0], dict) else None
        ts_max = rows[-1].get("ts") if isinstance(rows[-1], dict) else None
        slots.append(Slot(t, rows, ts_min, ts_max))
        start += size
    return slots


# ----------------------------------------------------------------- CSV loading

@dataclass
class LoadResult:
    """Parsed CSV stream split at a timestamp boundary."""

    train_rows: list
    test_rows: list
    skipped: int


def load_schema_sidecar(path) -> dict:
    """Read the JSON sidecar mapping field names to kinds."""
    with open(path, encoding="utf-8") as f:
        payload = json.load(f)
    if "fields" not in payload or not isinstance(payload["fields"], dict):
        raise SchemaError("schema sidecar must contain a 'fields' name->kind mapping")
    return payload["fields"]


def save_schema_sidecar(kinds: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump({"fields": kinds}, f, indent=2)
        f.write("\n")


def save_csv(rows, path, fieldnames=None) -> None:
    """Write rows to CSV (deterministic column order: first row's keys)."""
    if not rows:
        raise ParameterError("cannot save zero rows")
    names = fieldnames or list(rows[0].keys())
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=names)
        writer.writeheader()
        writer.writerows(rows)


def load_csv(path, field_kinds: dict, split_ts: float | None = None) -> LoadResult:
    """Parse a CSV stream and split train/test at a timestamp boundary.

    ``field_kinds`` maps column names to kinds (see the schema sidecar).
    Rows with a missing or unparseable label, timestamp or numerical value
    are skipped and counted. The stream is ordered by timestamp; rows at
    or before ``split_ts`` (default: the median timestamp) become training
    rows.
    """
    label_cols = [n for n, k in field_kinds.items() if k == "label"]
    ts_cols = [n for n, k in field_kinds.items() if k == "timestamp"]
    if len(label_cols) != 1:
        raise SchemaError("field kinds must declare exactly one label column")
    if len(ts_cols) != 1:
        raise SchemaError("field kinds must declare exactly one timestamp column")
    label_col, ts_col = label_cols[0], ts_cols[0]
    numeric_cols = [n for n, k in field_kinds.items() if k == "numerical"]

    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        header = reader.fieldnames
        if header is None:
            raise SchemaError(f"{path}: empty file or unparseable header")
        missing = [n for n in field_kinds if n not in header]
        if missing:
            raise SchemaError(f"{path}: header is missing declared columns {missing}")

        rows = []
        skipped = 0
        for raw in reader:
            try:
                row = dict(raw)
                label = row[label_col]
                if label is None:
                    raise ValueError("missing label")
                row[label_col] = int(label)
                if row[label_col] not in (0, 1):
                    raise ValueError("label not in {0, 1}")
                row[ts_col] = float(row[ts_col])
                for c in numeric_cols:
                    row[c] = float(row[c])
            except (TypeError, ValueError, KeyError):
                skipped += 1
                continue
            rows.append(row)

    rows.sort(key=lambda r: r[ts_col])
    if not rows:
        return LoadResult([], [], skipped)
    boundary = split_ts if split_ts is not None else float(np.median([r[ts_col] for r in rows]))
    train = [r for r in rows if r[ts_col] <= boundary]
    test = [r for r in rows if r[ts_col] > boundary]
    return LoadResult(train, test, skipped)


# ---------------------------------------------------------------- drift report

def drift_report(slots, embed_fn, user_field: str = "user_id",
                 item_field: str = "item_id", category_field: str = "category",
                 label_field: str = "label") -> list[dict]:
    """Per-slot distribution diagnostics.

    For each slot: embedding variance (mean squared distance to the slot's
    embedding centroid), distinct user and item counts, mean label rate,
    and the per-category label rate. One output row per (slot, category),
    with the slot-level columns repeated.
    """
    if not slots:
        raise ParameterError("drift_report needs at least one slot")
    out = []
    for slot in slots:
        E = np.stack([np.asarray(embed_fn(row), dtype=np.float64) for row in slot.rows])
        centroid = E.mean(axis=0)
        variance = float(((E - centroid) ** 2).sum(axis=1).mean())
        users = {row[user_field] for row in slot.rows}
        items = {row[item_field] for row in slot.rows}
        labels = np.array([row[label_field] for row in slot.rows], dtype=np.float64)
        ctr = float(labels.mean())

        by_category: dict = {}
        for row in slot.rows:
            by_category.setdefault(row[category_field], []).append(float(row[label_field]))
        for cat in sorted(by_category):
            out.append({
                "slot": slot.index,
                "variance": variance,
                "n_users": len(users),
                "n_items": len(items),
                "ctr": ctr,
                "category": cat,
                "category_ctr": float(np.mean(by_category[cat])),
            })
    return out


def write_drift_report_csv(report_rows, path) -> None:
    save_csv(report_rows, path,
             fieldnames=["slot", "variance", "n_users", "n_items", "ctr",
                         "category", "category_ctr"])
