"""Streaming error compensation for probability models under drift.

A trained base model is paired with a constant-memory error memory: recent
(hidden vector, label, base prediction) samples are folded into a hashed
sketch, retrieved by similarity at prediction time, and used to correct
the model's raw output while the data distribution moves. The package also
ships an exact raw-sample memory (the brute-force reference), a minimal
embedding + MLP base model, synthetic drifting-stream generators, ranking
metrics and a chronological experiment harness.
"""

from .compensation import (
    BatchDiagnostics,
    CompensationConfig,
    PredictionDiagnostics,
    attention_summary,
    attention_weights,
    compensate,
    estimate_error,
    predict,
    predict_batch,
)
from .config import ExperimentConfig, load_config
from .datastream import (
    DriftScenario,
    LoadResult,
    Slot,
    drift_report,
    generate,
    load_csv,
    make_slots,
)
from .errors import (
    ConfigError,
    DegenerateLabelsError,
    DimensionMismatchError,
    DriftcompError,
    EmptyMemoryError,
    EmptyNeighborhoodError,
    OutOfRangeError,
    ParameterError,
    SchemaError,
    SnapshotFormatError,
    TrainingDivergedError,
)
from .exact_memory import ExactMemory
from .harness import BenchReport, ExperimentResult, bench, run_experiment, sweep
from .lsh import SrpHashBank, ZeroVectorWarning, collision_probability, hash_bit
from .metrics import auc, gauc, log_loss, rel_imp
from .model import BaseModel, FeatureSchema, FieldSpec
from .records import MemoryRecord, Neighborhood
from .sketch import ErrorSketch, snapshot_info

__version__ = "0.1.0"

__all__ = [
    "BaseModel",
    "BatchDiagnostics",
    "BenchReport",
    "CompensationConfig",
    "ConfigError",
    "DegenerateLabelsError",
    "DimensionMismatchError",
    "DriftScenario",
    "DriftcompError",
    "EmptyMemoryError",
    "EmptyNeighborhoodError",
    "ErrorSketch",
    "ExactMemory",
    "ExperimentConfig",
    "ExperimentResult",
    "FeatureSchema",
    "FieldSpec",
    "LoadResult",
    "MemoryRecord",
    "Neighborhood",
    "OutOfRangeError",
    "ParameterError",
    "PredictionDiagnostics",
    "SchemaError",
    "Slot",
    "SnapshotFormatError",
    "SrpHashBank",
    "TrainingDivergedError",
    "ZeroVectorWarning",
    "attention_summary",
    "attention_weights",
    "auc",
    "bench",
    "collision_probability",
    "compensate",
    "drift_report",
    "estimate_error",
    "gauc",
    "generate",
    "hash_bit",
    "load_config",
    "load_csv",
    "log_loss",
    "make_slots",
    "predict",
    "predict_batch",
    "rel_imp",
    "run_experiment",
    "snapshot_info",
    "sweep",
]
