"""Experiment configuration: one TOML file, env-var overrides, validation.

The file has a top-level ``seed`` plus sections [data], [model], [memory],
[compensation], [methods] and [output]; every key has a default, so an
empty file is a valid experiment. Any key can be overridden through the
environment with the prefix ``DRIFTCOMP_``: section and key joined by a
double underscore, e.g. ``DRIFTCOMP_COMPENSATION__LAMBDA=0.9`` or
``DRIFTCOMP_SEED=7``. Override values are parsed as TOML literals, so
strings need quotes only when they could parse as something else.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .compensation import CompensationConfig
from .datastream import DRIFT_KINDS
from .errors import ConfigError
from .sketch import READOUT_MODES

ENV_PREFIX = "DRIFTCOMP_"

METHODS = ("frozen", "incremental", "compensated", "incremental+compensated")

REFRESH_POLICIES = ("never", "every_n_slots", "on_model_update")

MEMORY_BACKENDS = ("sketch", "oracle")

#: Sweepable hyperparameters -> (section, key) they live at.
SWEEP_PARAMS = {
    "lambda": ("compensation", "lambda"),
    "K_arrays": ("memory", "num_hashes"),
    "L_bits": ("memory", "bits_per_hash"),
    "tau": ("compensation", "tau"),
    "gamma": ("compensation", "gamma"),
    "sigma": ("memory", "sigma"),
}


@dataclass
class DataConfig:
    source: str = "synthetic"          # "synthetic" | "csv"
    kind: str = "abrupt_concept"
    n_slots: int = 10
    rows_per_slot: int = 5000
    train_rows: int = 50000
    magnitude: float = 1.0
    flip_slot: int = 5
    base_rate: float = 0.5
    n_users: int = 400
    n_items: int = 300
    n_categories: int = 12
    path: str = ""                     # csv mode
    schema_path: str = ""              # csv mode sidecar
    split_ts: float | None = None      # csv mode; None = median


@dataclass
class ModelConfig:
    embed_dim: int = 8
    hidden: list = field(default_factory=lambda: [64, 32])
    key_layer: int = -1
    lr: float = 0.05
    batch_size: int = 256
    epochs: int = 3
    n_buckets: int = 16


@dataclass
class MemoryConfig:
    backend: str = "sketch"
    bits_per_hash: int = 12
    num_hashes: int = 32
    sigma: float | None = None         # write filter; None stores everything
    readout: str = "bucket_mean"
    refresh: str = "on_model_update"
    refresh_every: int = 1             # used by every_n_slots
    capacity: int = 100_000            # oracle backend
    top_k: int | None = None           # oracle backend; None = num_hashes
    keep_prob: float = 1.0             # oracle backend down-sampling


@dataclass
class OutputConfig:
    dir: str = ""                      # empty = write nothing
    results_csv: str = "results.csv"
    trace: bool = False
    trace_file: str = "trace.jsonl"
    checkpoint: str = "model.npz"
    sketch_snapshot: str = "sketch.snap"


@dataclass
class ExperimentConfig:
    seed: int = 0
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    memory: MemoryConfig = field(default_factory=MemoryConfig)
    compensation: CompensationConfig = field(default_factory=CompensationConfig)
    methods: list = field(default_factory=lambda: ["frozen", "compensated"])
    output: OutputConfig = field(default_factory=OutputConfig)

    def validate(self) -> "ExperimentConfig":
        d, m = self.data, self.memory
        if d.source not in ("synthetic", "csv"):
            raise ConfigError(f"data.source must be 'synthetic' or 'csv', got {d.source!r}")
        if d.source == "synthetic" and d.kind not in DRIFT_KINDS:
            raise ConfigError(f"data.kind must be one of {DRIFT_KINDS}, got {d.kind!r}")
        if d.source == "csv" and not d.path:
            raise ConfigError("data.path is required when data.source = 'csv'")
        if m.backend not in MEMORY_BACKENDS:
            raise ConfigError(f"memory.backend must be one of {MEMORY_BACKENDS}")
        if m.readout not in READOUT_MODES:
            raise ConfigError(f"memory.readout must be one of {READOUT_MODES}")
        if m.refresh not in REFRESH_POLICIES:
            raise ConfigError(f"memory.refresh must be one of {REFRESH_POLICIES}")
        if m.refresh == "every_n_slots" and m.refresh_every < 1:
            raise ConfigError("memory.refresh_every must be >= 1")
        if m.sigma is not None and not 0.0 <= m.sigma <= 1.0:
            raise ConfigError(f"memory.sigma must lie in [0, 1], got {m.sigma}")
        for method in self.methods:
            if method not in METHODS:
                raise ConfigError(f"unknown method {method!r}; choose from {METHODS}")
        if not self.methods:
            raise ConfigError("methods.run must name at least one method")
        return self

    def to_dict(self) -> dict:
        payload = {
            "seed": self.seed,
            "data": asdict(self.data),
            "model": asdict(self.model),
            "memory": asdict(self.memory),
            "compensation": {
                "lambda": self.compensation.lam,
                "gamma": self.compensation.gamma,
                "tau": self.compensation.tau,
            },
            "methods": {"run": list(self.methods)},
            "output": asdict(self.output),
        }
        return payload

    def replace_param(self, param: str, value) -> "ExperimentConfig":
        """New config with one sweepable hyperparameter replaced."""
        if param not in SWEEP_PARAMS:
            raise ConfigError(f"unknown sweep parameter {param!r}; choose from {sorted(SWEEP_PARAMS)}")
        section, key = SWEEP_PARAMS[param]
        payload = self.to_dict()
        payload[section][key] = value
        return config_from_dict(payload)


def _coerce(value: str):
    """Parse an env-override string as a TOML literal, else keep it as text."""
    try:
        return tomllib.loads(f"v = {value}")["v"]
    except tomllib.TOMLDecodeError:
        return value


def _apply_env_overrides(payload: dict, environ) -> dict:
    sections = {"data", "model", "memory", "compensation", "methods", "output"}
    for name, raw in sorted(environ.items()):
        if not name.startswith(ENV_PREFIX):
            continue
        spec = name[len(ENV_PREFIX):].lower()
        if "__" in spec:
            section, key = spec.split("__", 1)
            if section not in sections:
                raise ConfigError(f"env override {name}: unknown section {section!r}")
            payload.setdefault(section, {})[key] = _coerce(raw)
        else:
            if spec != "seed":
                raise ConfigError(f"env override {name}: only top-level key is 'seed'")
            payload["seed"] = _coerce(raw)
    return payload


def _build_section(cls, payload: dict, section: str):
    given = dict(payload.get(section, {}))
    fields = {f.name for f in cls.__dataclass_fields__.values()}
    unknown = set(given) - fields
    if unknown:
        raise ConfigError(f"[{section}] has unknown keys {sorted(unknown)}")
    try:
        return cls(**given)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}]: {exc}") from exc


def config_from_dict(payload: dict) -> ExperimentConfig:
    payload = dict(payload)
    comp_given = dict(payload.get("compensation", {}))
    unknown = set(comp_given) - {"lambda", "gamma", "tau"}
    if unknown:
        raise ConfigError(f"[compensation] has unknown keys {sorted(unknown)}")
    try:
        comp = CompensationConfig(
            lam=comp_given.get("lambda", 0.5),
            gamma=comp_given.get("gamma", 1.0),
            tau=comp_given.get("tau", 0.1),
        )
    except ValueError as exc:
        raise ConfigError(f"[compensation]: {exc}") from exc

    methods_given = dict(payload.get("methods", {}))
    unknown = set(methods_given) - {"run"}
    if unknown:
        raise ConfigError(f"[methods] has unknown keys {sorted(unknown)}")
    methods = list(methods_given.get("run", ["frozen", "compensated"]))

    known_top = {"seed", "data", "model", "memory", "compensation", "methods", "output"}
    unknown = set(payload) - known_top
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")

    cfg = ExperimentConfig(
        seed=int(payload.get("seed", 0)),
        data=_build_section(DataConfig, payload, "data"),
        model=_build_section(ModelConfig, payload, "model"),
        memory=_build_section(MemoryConfig, payload, "memory"),
        compensation=comp,
        methods=methods,
        output=_build_section(OutputConfig, payload, "output"),
    )
    return cfg.validate()


def load_config(path, environ=None) -> ExperimentConfig:
    """Load a TOML experiment file and apply environment overrides."""
    with open(path, "rb") as f:
        try:
            payload = tomllib.load(f)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    payload = _apply_env_overrides(payload, os.environ if environ is None else environ)
    return config_from_dict(payload)
