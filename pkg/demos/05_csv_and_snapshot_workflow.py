# File-based workflow: CSV stream in, results and snapshots out.
#
# Everything the library does from memory also works from files: a CSV
# stream with a JSON sidecar declaring field kinds, a TOML experiment
# config, and on the way out a results CSV, a model checkpoint and a
# byte-exact sketch snapshot that restores against a bank rebuilt from
# the same seed.

import json
import tempfile
from pathlib import Path

from driftcomp import DriftScenario, ErrorSketch, generate, load_config, run_experiment
from driftcomp.datastream import SYNTHETIC_KINDS, save_csv, save_schema_sidecar
from driftcomp.harness import build_memory
from driftcomp.sketch import snapshot_info

workdir = Path(tempfile.mkdtemp(prefix="driftcomp_demo_"))
print(f"working in {workdir}")

# --- Materialize a synthetic stream as CSV + schema sidecar.
scenario = DriftScenario(kind="concept", n_slots=5, rows_per_slot=600,
                         train_rows=3000, magnitude=1.0, seed=9,
                         n_users=60, n_items=40)
train_rows, slots = generate(scenario)
stream = train_rows + [row for slot in slots for row in slot.rows]
save_csv(stream, workdir / "stream.csv")
save_schema_sidecar(SYNTHETIC_KINDS, workdir / "stream.schema.json")
split_ts = train_rows[-1]["ts"]
print(f"wrote {len(stream)} rows; training ends at ts={split_ts}")

# --- Point a config file at it.
(workdir / "experiment.toml").write_text(f"""
seed = 9

[data]
source = "csv"
path = "{workdir / 'stream.csv'}"
schema_path = "{workdir / 'stream.schema.json'}"
split_ts = {split_ts}
n_slots = 5

[model]
embed_dim = 4
hidden = [32, 16]
lr = 1.5
epochs = 12
batch_size = 128

[memory]
bits_per_hash = 8
num_hashes = 16
refresh = "every_n_slots"
refresh_every = 2

[compensation]
lambda = 0.6

[methods]
run = ["frozen", "compensated"]

[output]
dir = "{workdir / 'out'}"
trace = true
""")

config = load_config(workdir / "experiment.toml")
result = run_experiment(config)
print("\nresults.csv:")
print((workdir / "out" / "results.csv").read_text())

# --- The sketch snapshot round-trips against a bank rebuilt from the seed.
data = (workdir / "out" / "sketch.snap").read_bytes()
print("snapshot header:", json.dumps(snapshot_info(data)))
fresh = build_memory(config, dim=16)  # key layer of [32, 16] is 16 wide
restored = ErrorSketch.restore(data, fresh.bank)
print(f"restored sketch holds {restored.writes_accepted} accepted writes")

# --- The trace stream records one JSON line per prediction.
first = (workdir / "out" / "trace.jsonl").read_text().splitlines()[0]
print("first trace line:", first)
