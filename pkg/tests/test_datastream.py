"""Slotting, CSV ingestion, synthetic drift generation and diagnostics."""

import numpy as np
import pytest

from driftcomp.datastream import (
    SYNTHETIC_KINDS,
    DriftScenario,
    drift_report,
    generate,
    load_csv,
    load_schema_sidecar,
    make_slots,
    save_csv,
    save_schema_sidecar,
)
from driftcomp.errors import ParameterError, SchemaError
from driftcomp.metrics import auc, log_loss
from driftcomp.model import BaseModel, FeatureSchema


def small_scenario(**overrides):
    params = dict(kind="covariate", n_slots=4, rows_per_slot=400, train_rows=800,
                  magnitude=1.0, seed=42)
    params.update(overrides)
    return DriftScenario(**params)


class TestMakeSlots:
    def test_even_partition(self):
        rows = [{"ts": i} for i in range(100)]
        slots = make_slots(rows, 10)
        assert [len(s) for s in slots] == [10] * 10

    def test_remainder_goes_to_last_slot(self):
        rows = [{"ts": i} for i in range(101)]
        slots = make_slots(rows, 10)
        assert [len(s) for s in slots] == [10] * 9 + [11]

    def test_too_few_rows(self):
        with pytest.raises(ParameterError):
            make_slots([{"ts": 0}] * 5, 10)

    def test_concatenation_reproduces_stream(self):
        rows = [{"ts": i, "v": i * i} for i in range(57)]
        slots = make_slots(rows, 7)
        flattened = [r for s in slots for r in s.rows]
        assert flattened == rows

    def test_time_ranges(self):
        rows = [{"ts": 100 + i} for i in range(20)]
        slots = make_slots(rows, 2)
        assert (slots[0].ts_min, slots[0].ts_max) == (100, 109)
        assert (slots[1].ts_min, slots[1].ts_max) == (110, 119)


class TestLoadCsv:
    KINDS = {"user_id": "user_id", "x": "numerical", "label": "label", "ts": "timestamp"}

    def write_file(self, tmp_path, text, name="data.csv"):
        path = tmp_path / name
        path.write_text(text)
        return path

    def test_well_formed_rows(self, tmp_path):
        path = self.write_file(tmp_path, "user_id,x,label,ts\nu1,0.5,1,0\nu2,0.1,0,1\nu3,0.9,1,2\n")
        result = load_csv(path, self.KINDS)
        assert result.skipped == 0
        assert len(result.train_rows) + len(result.test_rows) == 3

    def test_missing_label_value_skipped(self, tmp_path):
        path = self.write_file(tmp_path, "user_id,x,label,ts\nu1,0.5,,0\nu2,0.1,0,1\nu3,0.2,1,2\n")
        result = load_csv(path, self.KINDS)
        assert result.skipped == 1
        assert len(result.train_rows) + len(result.test_rows) == 2

    def test_median_split_partitions(self, tmp_path):
        lines = ["user_id,x,label,ts"] + [f"u{i},{i / 10},{i % 2},{i}" for i in range(9)]
        path = self.write_file(tmp_path, "\n".join(lines) + "\n")
        result = load_csv(path, self.KINDS)
        assert len(result.train_rows) + len(result.test_rows) == 9
        assert all(r["ts"] <= 4 for r in result.train_rows)
        assert all(r["ts"] > 4 for r in result.test_rows)

    def test_explicit_boundary(self, tmp_path):
        lines = ["user_id,x,label,ts"] + [f"u{i},0.5,1,{i}" for i in range(10)]
        path = self.write_file(tmp_path, "\n".join(lines) + "\n")
        result = load_csv(path, self.KINDS, split_ts=2.0)
        assert len(result.train_rows) == 3

    def test_missing_label_column(self, tmp_path):
        path = self.write_file(tmp_path, "user_id,x,ts\nu1,0.5,0\n")
        with pytest.raises(SchemaError):
            load_csv(path, self.KINDS)

    def test_empty_file_header_error(self, tmp_path):
        path = self.write_file(tmp_path, "")
        with pytest.raises(SchemaError):
            load_csv(path, self.KINDS)

    def test_sidecar_round_trip(self, tmp_path):
        sidecar = tmp_path / "schema.json"
        save_schema_sidecar(self.KINDS, sidecar)
        assert load_schema_sidecar(sidecar) == self.KINDS

    def test_save_csv_round_trip(self, tmp_path):
        rows = [{"user_id": f"u{i}", "x": i / 7, "label": i % 2, "ts": i} for i in range(14)]
        path = tmp_path / "round.csv"
        save_csv(rows, path)
        result = load_csv(path, self.KINDS)
        assert result.skipped == 0
        assert len(result.train_rows) + len(result.test_rows) == 14


class TestGenerate:
    def test_deterministic_for_equal_seeds(self):
        a_train, a_slots = generate(small_scenario())
        b_train, b_slots = generate(small_scenario())
        assert a_train == b_train
        assert all(x.rows == y.rows for x, y in zip(a_slots, b_slots))

    def test_different_seeds_differ(self):
        a_train, _ = generate(small_scenario())
        b_train, _ = generate(small_scenario(seed=43))
        assert a_train != b_train

    def test_invalid_magnitude(self):
        with pytest.raises(ParameterError):
            small_scenario(magnitude=-1.0)

    def test_rows_carry_required_fields(self):
        _, slots = generate(small_scenario())
        row = slots[0].rows[0]
        assert set(SYNTHETIC_KINDS) <= set(row)
        assert 0.0 <= row["p_true"] <= 1.0

    def test_label_shift_hits_target_rates(self):
        scenario = small_scenario(kind="label", n_slots=2, rows_per_slot=10_000,
                                  train_rows=1000, slot_base_rates=[0.2, 0.4])
        _, slots = generate(scenario)
        for slot, target in zip(slots, [0.2, 0.4]):
            ctr = np.mean([r["label"] for r in slot.rows])
            assert ctr == pytest.approx(target, abs=0.03)

    def test_null_drift_gives_stable_ctr(self):
        scenario = small_scenario(kind="covariate", magnitude=0.0, n_slots=5,
                                  rows_per_slot=4000)
        _, slots = generate(scenario)
        ctrs = [np.mean([r["label"] for r in s.rows]) for s in slots]
        assert max(ctrs) - min(ctrs) < 0.04

    def test_true_probabilities_are_bayes_optimal(self):
        _, slots = generate(small_scenario(rows_per_slot=4000, n_slots=2))
        rows = slots[0].rows + slots[1].rows
        y = np.array([r["label"] for r in rows], dtype=float)
        p_true = np.array([r["p_true"] for r in rows])
        truth_loss = log_loss(p_true, y)
        rate = float(y.mean())
        assert truth_loss <= log_loss(np.full(len(y), rate), y) + 1e-9
        rng = np.random.default_rng(0)
        noisy = np.clip(p_true + rng.normal(0, 0.1, len(y)), 1e-6, 1 - 1e-6)
        assert truth_loss <= log_loss(noisy, y) + 1e-9

    def test_abrupt_flip_degrades_a_frozen_model(self):
        scenario = small_scenario(kind="abrupt_concept", n_slots=6, rows_per_slot=800,
                                  train_rows=4000, flip_slot=3, seed=7)
        train_rows, slots = generate(scenario)
        schema = FeatureSchema.from_kinds(SYNTHETIC_KINDS, n_buckets=8).fit(train_rows)
        enc = schema.encode(train_rows)
        model = BaseModel(schema, embed_dim=4, hidden_sizes=(32, 16), seed=7)
        for epoch in range(20):
            model.train_epoch(enc.X, enc.y, lr=2.0, batch_size=128, seed=epoch)
        aucs = []
        for slot in slots:
            enc_slot = schema.encode(slot.rows)
            p, _ = model.score(enc_slot.X)
            aucs.append(auc(p, enc_slot.y))
        pre = np.mean(aucs[:3])
        post = np.mean(aucs[3:])
        assert pre - post > 0.05


class TestDriftReport:
    def embed(self, row):
        return np.array([row["x0"], row["x1"]])

    def test_identical_rows_have_zero_variance(self):
        row = {"user_id": "u1", "item_id": "i1", "category": "c1",
               "x0": 0.5, "x1": -0.5, "label": 1, "ts": 0}
        slots = make_slots([dict(row, ts=i) for i in range(10)], 2)
        report = drift_report(slots, self.embed)
        assert all(r["variance"] == 0.0 for r in report)

    def test_all_positive_labels_give_unit_ctr(self):
        rows = [{"user_id": f"u{i}", "item_id": "i1", "category": "c1",
                 "x0": float(i), "x1": 0.0, "label": 1, "ts": i} for i in range(8)]
        report = drift_report(make_slots(rows, 1), self.embed)
        assert report[0]["ctr"] == 1.0

    def test_disjoint_users_are_additive(self):
        rows = [{"user_id": f"u{i}", "item_id": "i1", "category": "c1",
                 "x0": 0.0, "x1": 0.0, "label": 0, "ts": i} for i in range(10)]
        report = drift_report(make_slots(rows, 2), self.embed)
        by_slot = {r["slot"]: r for r in report}
        assert by_slot[0]["n_users"] + by_slot[1]["n_users"] == 10

    def test_per_category_rates(self):
        rows = [
            {"user_id": "u1", "item_id": "i1", "category": "a", "x0": 0.0, "x1": 0.0,
             "label": 1, "ts": 0},
            {"user_id": "u2", "item_id": "i2", "category": "a", "x0": 0.0, "x1": 0.0,
             "label": 0, "ts": 1},
            {"user_id": "u3", "item_id": "i3", "category": "b", "x0": 0.0, "x1": 0.0,
             "label": 1, "ts": 2},
        ]
        report = drift_report(make_slots(rows, 1), self.embed)
        rates = {r["category"]: r["category_ctr"] for r in report}
        assert rates == {"a": 0.5, "b": 1.0}
