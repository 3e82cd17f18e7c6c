"""Embedding + feed-forward probability model trained by minibatch SGD.

The model is the slow half of the adaptation loop: categorical and
bucketized numerical fields are embedded, concatenated and passed through
rectifier hidden layers to a sigmoid output. Besides the predicted
probability, the forward pass exposes one hidden layer's activations as
the key vector that the error memories hash and retrieve by.

Everything is float64 numpy. Training is plain SGD on binary
cross-entropy, deterministic for a fixed seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import ParameterError, SchemaError, TrainingDivergedError

FIELD_KINDS = ("categorical", "numerical", "label", "user_id", "timestamp")

#: Kinds that receive an embedding table (user ids embed like categoricals).
EMBEDDED_KINDS = ("categorical", "user_id", "numerical")

OOV_INDEX = 0


@dataclass
class FieldSpec:
    """One schema field: its name, kind and fitted encoding state."""

    name: str
    kind: str
    vocab: dict | None = None
    boundaries: np.ndarray | None = None

    @property
    def table_rows(self) -> int:
        """Embedding-table rows this field needs (index 0 is out-of-vocabulary)."""
        if self.kind == "numerical":
            return len(self.boundaries) + 1
        return len(self.vocab) + 1


@dataclass
class EncodedRows:
    """Dense encoding of raw rows: per-field indices plus side channels."""

    X: np.ndarray                    # (n, n_embedded_fields) int64
    y: np.ndarray | None             # (n,) float64 labels, when requested
    users: np.ndarray | None         # raw user tokens for grouped metrics
    ts: np.ndarray | None            # timestamps, when the schema has them

    def __len__(self) -> int:
        return self.X.shape[0]


class FeatureSchema:
    """Ordered field declaration plus fitted vocabularies and bucket edges.

    Build one from ``{name: kind}`` declarations, then :meth:`fit` it on
    training rows only: categorical vocabularies are assigned in first-seen
    order (index 0 stays reserved for unseen tokens) and numerical fields
    get strictly increasing quantile boundaries.
    """

    def __init__(self, fields: list[FieldSpec], n_buckets: int = 16):
        kinds = [f.kind for f in fields]
        for k in kinds:
            if k not in FIELD_KINDS:
                raise SchemaError(f"unknown field kind {k!r}")
        if kinds.count("label") != 1:
            raise SchemaError("schema must declare exactly one label field")
        if n_buckets < 2:
            raise ParameterError(f"n_buckets must be >= 2, got {n_buckets}")
        self.fields = fields
        self.n_buckets = int(n_buckets)
        self.label_field = next(f.name for f in fields if f.kind == "label")
        self.user_field = next((f.name for f in fields if f.kind == "user_id"), None)
        self.ts_field = next((f.name for f in fields if f.kind == "timestamp"), None)

    @classmethod
    def from_kinds(cls, kinds: dict, n_buckets: int = 16) -> "FeatureSchema":
        return cls([FieldSpec(name, kind) for name, kind in kinds.items()], n_buckets)

    @property
    def embedded_fields(self) -> list[FieldSpec]:
        return [f for f in self.fields if f.kind in EMBEDDED_KINDS]

    def fit(self, rows) -> "FeatureSchema":
        """Learn vocabularies and bucket boundaries from training rows."""
        if not rows:
            raise SchemaError("cannot fit a schema on zero rows")
        for f in self.embedded_fields:
            if f.kind == "numerical":
                values = np.array([self._numeric(row, f.name) for row in rows])
                qs = np.arange(1, self.n_buckets) / self.n_buckets
                f.boundaries = np.unique(np.quantile(values, qs))
            else:
                vocab = {}
                for row in rows:
                    token = self._token(row, f.name)
                    if token not in vocab:
                        vocab[token] = len(vocab) + 1
                f.vocab = vocab
        return self

    def encode(self, rows, require_label: bool = True) -> EncodedRows:
        """Encode raw rows into per-field integer indices.

        Unseen categorical tokens map to the reserved index 0; numerical
        values below the first boundary map to bucket 0.
        """
        n = len(rows)
        embedded = self.embedded_fields
        X = np.zeros((n, len(embedded)), dtype=np.int64)
        for j, f in enumerate(embedded):
            if f.kind == "numerical":
                if f.boundaries is None:
                    raise SchemaError(f"field {f.name!r} has no fitted boundaries")
                vals = np.array([self._numeric(row, f.name) for row in rows])
                X[:, j] = np.searchsorted(f.boundaries, vals, side="right")
            else:
                if f.vocab is None:
                    raise SchemaError(f"field {f.name!r} has no fitted vocabulary")
                X[:, j] = [f.vocab.get(self._token(row, f.name), OOV_INDEX) for row in rows]

        y = None
        if require_label:
            y = np.empty(n, dtype=np.float64)
            for i, row in enumerate(rows):
                label = row.get(self.label_field)
                if label not in (0, 1, 0.0, 1.0):
                    raise SchemaError(f"row {i} has invalid label {label!r}")
                y[i] = float(label)
        users = None
        if self.user_field is not None:
            users = np.array([self._token(row, self.user_field) for row in rows], dtype=object)
        ts = None
        if self.ts_field is not None:
            ts = np.array([self._numeric(row, self.ts_field) for row in rows])
        return EncodedRows(X, y, users, ts)

    def _token(self, row, name):
        if name not in row:
            raise SchemaError(f"row is missing field {name!r}")
        return str(row[name])

    def _numeric(self, row, name):
        if name not in row:
            raise SchemaError(f"row is missing field {name!r}")
        try:
            return float(row[name])
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"field {name!r} value {row[name]!r} is not numeric") from exc

    # -------------------------------------------------------------- round-trip

    def to_dict(self) -> dict:
        return {
            "n_buckets": self.n_buckets,
            "fields": [
                {
                    "name": f.name,
                    "kind": f.kind,
                    "vocab": f.vocab,
                    "boundaries": None if f.boundaries is None else list(map(float, f.boundaries)),
                }
                for f in self.fields
            ],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "FeatureSchema":
        fields = [
            FieldSpec(
                d["name"], d["kind"], d["vocab"],
                None if d["boundaries"] is None else np.asarray(d["boundaries"], dtype=np.float64),
            )
            for d in payload["fields"]
        ]
        return cls(fields, payload["n_buckets"])


class BaseModel:
    """Embeddings -> rectifier MLP -> sigmoid, with an exposed key layer.

    Parameters
    ----------
    schema : fitted :class:`FeatureSchema`.
    embed_dim : embedding width per field.
    hidden_sizes : widths of the rectifier hidden layers.
    key_layer : which hidden layer's activations to expose as the key
        vector (-1 = last).
    seed : initialization seed; weights start uniform in [-0.05, 0.05].
    """

    CHECKPOINT_VERSION = 1

    def __init__(self, schema: FeatureSchema, embed_dim: int = 8,
                 hidden_sizes=(64, 32), key_layer: int = -1, seed: int = 0):
        if embed_dim < 1:
            raise ParameterError(f"embed_dim must be >= 1, got {embed_dim}")
        if not hidden_sizes:
            raise ParameterError("at least one hidden layer is required")
        self.schema = schema
        self.embed_dim = int(embed_dim)
        self.hidden_sizes = tuple(int(h) for h in hidden_sizes)
        self.key_layer = int(key_layer)
        self.seed = int(seed)
        self.step_count = 0

        rng = np.random.default_rng(seed)
        u = lambda shape: rng.uniform(-0.05, 0.05, shape)
        self.tables = [u((f.table_rows, self.embed_dim)) for f in schema.embedded_fields]
        sizes = [len(self.tables) * self.embed_dim, *self.hidden_sizes]
        self.weights = [u((sizes[i], sizes[i + 1])) for i in range(len(self.hidden_sizes))]
        self.biases = [u((sizes[i + 1],)) for i in range(len(self.hidden_sizes))]
        self.w_out = u((sizes[-1],))
        self.b_out = float(u(()))

    @property
    def input_dim(self) -> int:
        return len(self.tables) * self.embed_dim

    @property
    def hidden_dim(self) -> int:
        """Width of the exposed key layer."""
        return self.hidden_sizes[self.key_layer]

    # ---------------------------------------------------------------- forward

    def embed_encoded(self, X: np.ndarray) -> np.ndarray:
        """Concatenated per-field embeddings for encoded rows, (n, input_dim)."""
        return np.concatenate([t[X[:, j]] for j, t in enumerate(self.tables)], axis=1)

    def embed_row(self, row) -> np.ndarray:
        """Embedding vector for one raw row."""
        enc = self.schema.encode([row], require_label=False)
        return self.embed_encoded(enc.X)[0]

    def forward(self, embedded: np.ndarray):
        """(probability, key-layer activations) for embedded inputs.

        Accepts one embedding vector or an (n, input_dim) batch.
        Probabilities are clipped into the open interval (0, 1).
        """
        e = np.asarray(embedded, dtype=np.float64)
        squeeze = e.ndim == 1
        if squeeze:
            e = e[None, :]
        _, activations, z = self._forward_full(e)
        p = np.clip(expit(z), 1e-12, 1.0 - 1e-12)
        hidden = activations[self.key_layer]
        if squeeze:
            return float(p[0]), hidden[0]
        return p, hidden

    def score(self, X: np.ndarray):
        """Forward pass straight from encoded rows."""
        return self.forward(self.embed_encoded(X))

    def _forward_full(self, e):
        pre = []
        activations = []
        a = e
        for W, b in zip(self.weights, self.biases):
            z = a @ W + b
            a = np.maximum(z, 0.0)
            pre.append(z)
            activations.append(a)
        logit = a @ self.w_out + self.b_out
        return pre, activations, logit

    # --------------------------------------------------------------- training

    def loss_and_grads(self, X: np.ndarray, y: np.ndarray):
        """Mean BCE over the batch and gradients for every parameter."""
        e = self.embed_encoded(X)
        pre, activations, z = self._forward_full(e)
        n = X.shape[0]
        # softplus(z) - y*z == -[y log p + (1-y) log (1-p)], stable in z.
        loss = float(np.mean(np.logaddexp(0.0, z) - y * z))

        dz = (expit(z) - y) / n
        grads = {
            "w_out": activations[-1].T @ dz,
            "b_out": float(dz.sum()),
            "W": [None] * len(self.weights),
            "b": [None] * len(self.biases),
            "emb": [np.zeros_like(t) for t in self.tables],
        }
        da = np.outer(dz, self.w_out)
        for l in range(len(self.weights) - 1, -1, -1):
            dzl = da * (pre[l] > 0.0)
            prev = activations[l - 1] if l > 0 else e
            grads["W"][l] = prev.T @ dzl
            grads["b"][l] = dzl.sum(axis=0)
            da = dzl @ self.weights[l].T
        for j, table in enumerate(self.tables):
            sl = da[:, j * self.embed_dim:(j + 1) * self.embed_dim]
            np.add.at(grads["emb"][j], X[:, j], sl)
        return loss, grads

    def _sgd_step(self, X, y, lr):
        loss, grads = self.loss_and_grads(X, y)
        if not np.isfinite(loss):
            raise TrainingDivergedError(
                f"non-finite loss {loss} at step {self.step_count}",
                step=self.step_count, loss=loss,
            )
        for j, g in enumerate(grads["emb"]):
            self.tables[j] -= lr * g
        for l in range(len(self.weights)):
            self.weights[l] -= lr * grads["W"][l]
            self.biases[l] -= lr * grads["b"][l]
        self.w_out -= lr * grads["w_out"]
        self.b_out -= lr * grads["b_out"]
        self.step_count += 1
        return loss

    def train_epoch(self, X: np.ndarray, y: np.ndarray, lr: float,
                    batch_size: int = 256, seed: int = 0) -> float:
        """One shuffled pass of minibatch SGD; returns the epoch's mean loss."""
        n = X.shape[0]
        if n == 0:
            raise ParameterError("train_epoch needs a non-empty dataset")
        order = np.random.default_rng(seed).permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            total += self._sgd_step(X[idx], y[idx], lr) * idx.shape[0]
        return total / n

    def incremental_update(self, X: np.ndarray, y: np.ndarray, lr: float,
                           batch_size: int = 256):
        """Single in-order pass over newly observed rows.

        The current weights are the initialization; the data is seen once,
        in stream order. Returns the mean loss, or None for an empty slot.
        """
        n = X.shape[0]
        if n == 0:
            return None
        total = 0.0
        for start in range(0, n, batch_size):
            sl = slice(start, start + batch_size)
            total += self._sgd_step(X[sl], y[sl], lr) * min(batch_size, n - start)
        return total / n

    # ------------------------------------------------------------ persistence

    def copy(self) -> "BaseModel":
        """Independent deep copy (weights diverge freely afterwards)."""
        clone = BaseModel(self.schema, self.embed_dim, self.hidden_sizes,
                          self.key_layer, self.seed)
        clone.tables = [t.copy() for t in self.tables]
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        clone.w_out = self.w_out.copy()
        clone.b_out = self.b_out
        clone.step_count = self.step_count
        return clone

    def save(self, path) -> None:
        """Checkpoint schema, shapes and weights; load restores forward bit-exact."""
        meta = {
            "version": self.CHECKPOINT_VERSION,
            "embed_dim": self.embed_dim,
            "hidden_sizes": list(self.hidden_sizes),
            "key_layer": self.key_layer,
            "seed": self.seed,
            "step_count": self.step_count,
            "schema": self.schema.to_dict(),
        }
        arrays = {f"emb_{j}": t for j, t in enumerate(self.tables)}
        arrays.update({f"W_{l}": w for l, w in enumerate(self.weights)})
        arrays.update({f"b_{l}": b for l, b in enumerate(self.biases)})
        np.savez(path, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
                 w_out=self.w_out, b_out=np.float64(self.b_out), **arrays)

    @classmethod
    def load(cls, path) -> "BaseModel":
        with np.load(path) as payload:
            meta = json.loads(bytes(payload["meta"]).decode())
            if meta["version"] != cls.CHECKPOINT_VERSION:
                raise ParameterError(f"unsupported checkpoint version {meta['version']}")
            schema = FeatureSchema.from_dict(meta["schema"])
            model = cls(schema, meta["embed_dim"], meta["hidden_sizes"],
                        meta["key_layer"], meta["seed"])
            model.tables = [payload[f"emb_{j}"] for j in range(len(model.tables))]
            model.weights = [payload[f"W_{l}"] for l in range(len(model.weights))]
            model.biases = [payload[f"b_{l}"] for l in range(len(model.biases))]
            model.w_out = payload["w_out"]
            model.b_out = float(payload["b_out"])
            model.step_count = meta["step_count"]
        return model
