# The headline experiment: recovering from an abrupt concept flip.
#
# A synthetic click stream trains a base model, then the relationship
# between features and labels is negated at slot 5 of 10. Four serving
# strategies face the same stream chronologically:
#
#   frozen                   score with the trained model, never adapt
#   incremental              one gradient pass over each finished slot
#   compensated              correct scores with the error memory
#   incremental+compensated  both
#
# The memory is refreshed every second slot, so after the flip it holds
# only fresh post-flip samples and the compensation pulls predictions
# toward the new concept without touching a single weight.

import numpy as np

from driftcomp import run_experiment
from driftcomp.config import config_from_dict

config = config_from_dict({
    "seed": 0,
    "data": {"source": "synthetic", "kind": "abrupt_concept", "n_slots": 10,
             "rows_per_slot": 5000, "train_rows": 50_000, "flip_slot": 5},
    "model": {"embed_dim": 8, "hidden": [64, 32], "lr": 1.0, "batch_size": 256,
              "epochs": 8},
    "memory": {"backend": "sketch", "bits_per_hash": 12, "num_hashes": 32,
               "refresh": "every_n_slots", "refresh_every": 2},
    "compensation": {"lambda": 0.9, "gamma": 1.0, "tau": 0.1},
    "methods": {"run": ["frozen", "incremental", "compensated",
                        "incremental+compensated"]},
})

result = run_experiment(config)

print("per-slot AUC (concept flips at slot 5)")
header = f"{'slot':>4} " + " ".join(f"{name:>24}" for name in config.methods)
print(header)
for t in range(10):
    cells = " ".join(f"{result.methods[name].per_slot[t].auc:24.3f}"
                     for name in config.methods)
    print(f"{t:>4} {cells}")

print("\nmean post-flip AUC (slots 5-9)")
for name in config.methods:
    post = np.mean([m.auc for m in result.methods[name].per_slot][5:])
    print(f"  {name:26s} {post:.3f}")

print("\nreading the table: the frozen model inverts after the flip; the")
print("compensated variant recovers on every slot where the memory holds")
print("post-flip samples (7 and 9 under the every-2-slots refresh), with")
print("zero gradient steps.")
