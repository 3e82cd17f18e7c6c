"""Command-line entry points.

Subcommands: ``train`` (fit and checkpoint the base model), ``run`` (full
slot-by-slot experiment), ``sweep`` (hyperparameter curve), ``bench``
(sketch throughput/footprint), ``drift-report`` (per-slot distribution
diagnostics) and ``snapshot`` (inspect a sketch snapshot file). All but
``snapshot`` take a TOML config, overridable via DRIFTCOMP_* environment
variables.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import harness
from .config import SWEEP_PARAMS, load_config
from .datastream import drift_report, write_drift_report_csv
from .errors import DriftcompError
from .sketch import snapshot_info


def _load(args):
    cfg = load_config(args.config)
    if getattr(args, "output_dir", None):
        cfg.output.dir = args.output_dir
    return cfg


def _cmd_train(args) -> int:
    cfg = _load(args)
    prepared = harness.prepare_data(cfg)
    model = harness.train_base_model(cfg, prepared)
    out_dir = cfg.output.dir or "."
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, cfg.output.checkpoint)
    model.save(path)
    print(f"trained on {len(prepared.train_rows)} rows; checkpoint: {path}")
    return 0


def _cmd_run(args) -> int:
    cfg = _load(args)
    result = harness.run_experiment(cfg)
    sys.stdout.write(result.results_csv())
    if cfg.output.dir:
        print(f"# outputs written to {cfg.output.dir}", file=sys.stderr)
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load(args)
    values = [float(v) if "." in v or "e" in v.lower() else int(v)
              for v in args.values.split(",") if v != ""]
    rows = harness.sweep(cfg, args.param, values)
    sys.stdout.write(harness.sweep_csv(rows))
    return 0


def _cmd_bench(args) -> int:
    cfg = _load(args)
    levels = tuple(int(v) for v in args.fill_levels.split(","))
    report = harness.bench(cfg, fill_levels=levels, ops=args.ops)
    sys.stdout.write(report.to_text())
    return 0


def _cmd_drift_report(args) -> int:
    cfg = _load(args)
    prepared = harness.prepare_data(cfg)
    model = harness.train_base_model(cfg, prepared)
    rows = drift_report(prepared.slots, model.embed_row)
    if cfg.output.dir:
        os.makedirs(cfg.output.dir, exist_ok=True)
        path = os.path.join(cfg.output.dir, "drift_report.csv")
        write_drift_report_csv(rows, path)
        print(f"# drift report written to {path}", file=sys.stderr)
    header = ["slot", "variance", "n_users", "n_items", "ctr", "category", "category_ctr"]
    print(",".join(header))
    for r in rows:
        print(",".join(str(r[h]) for h in header))
    return 0


def _cmd_snapshot(args) -> int:
    with open(args.file, "rb") as f:
        info = snapshot_info(f.read())
    print(json.dumps(info, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driftcomp",
        description="Streaming error compensation experiments under distribution shift.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("--config", "-c", required=True, help="TOML experiment file")
        p.add_argument("--output-dir", "-o", help="override [output].dir")
        return p

    with_config(sub.add_parser("train", help="fit the base model and save a checkpoint")) \
        .set_defaults(fn=_cmd_train)
    with_config(sub.add_parser("run", help="run the slot-by-slot experiment")) \
        .set_defaults(fn=_cmd_run)
    p = with_config(sub.add_parser("sweep", help="hyperparameter curve"))
    p.add_argument("--param", required=True, choices=sorted(SWEEP_PARAMS))
    p.add_argument("--values", required=True, help="comma-separated values")
    p.set_defaults(fn=_cmd_sweep)
    p = with_config(sub.add_parser("bench", help="sketch throughput and footprint"))
    p.add_argument("--ops", type=int, default=2000, help="timed ops per fill level")
    p.add_argument("--fill-levels", default="1000,100000,1000000",
                   help="comma-separated sketch fill levels")
    p.set_defaults(fn=_cmd_bench)
    with_config(sub.add_parser("drift-report", help="per-slot distribution diagnostics")) \
        .set_defaults(fn=_cmd_drift_report)
    p = sub.add_parser("snapshot", help="inspect a sketch snapshot file")
    p.add_argument("file")
    p.set_defaults(fn=_cmd_snapshot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except DriftcompError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
