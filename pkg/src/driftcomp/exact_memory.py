"""Exact raw-sample memory: FIFO record store with brute-force cosine top-k.

This is the uncompressed alternative to the sketch and the test oracle for
it: records are kept verbatim in a bounded ring buffer and retrieval scans
them all. Search cost grows with the number of stored records, which is
precisely the burden the sketch removes.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .errors import DimensionMismatchError, EmptyMemoryError, ParameterError
from .records import MemoryRecord, Neighborhood


class ExactMemory:
    """Bounded FIFO store of records with exact cosine-similarity retrieval.

    Parameters
    ----------
    dim : hidden-vector dimension.
    capacity : maximum records held; the oldest is evicted first.
    default_k : neighbor count used by :meth:`retrieve`.
    keep_prob : optional random down-sampling applied at store time.
    seed : seeds the down-sampling draws only.
    """

    def __init__(self, dim: int, capacity: int = 100_000, default_k: int = 32,
                 keep_prob: float = 1.0, seed: int = 0):
        if capacity < 1:
            raise ParameterError(f"capacity must be >= 1, got {capacity}")
        if default_k < 1:
            raise ParameterError(f"default_k must be >= 1, got {default_k}")
        if not 0.0 < keep_prob <= 1.0:
            raise ParameterError(f"keep_prob must lie in (0, 1], got {keep_prob}")
        self.dim = int(dim)
        self.capacity = int(capacity)
        self.default_k = int(default_k)
        self.keep_prob = float(keep_prob)
        self._rng = np.random.default_rng(seed)
        self._records: deque = deque(maxlen=self.capacity)
        self._matrix_cache = None  # (hiddens, norms, labels, base_preds)

    def __len__(self) -> int:
        return len(self._records)

    # ------------------------------------------------------------------ writes

    def store(self, record: MemoryRecord, filter_threshold: float | None = None) -> bool:
        """Append a record, subject to the error filter and down-sampling.

        Returns True when the record was kept. At capacity the oldest
        record is evicted (FIFO, matching recent-sample semantics).
        """
        if record.hidden.shape != (self.dim,):
            raise DimensionMismatchError(
                f"record hidden dimension {record.hidden.shape} != memory dim {self.dim}"
            )
        if filter_threshold is not None:
            if not 0.0 <= filter_threshold <= 1.0:
                raise ParameterError(f"filter threshold must lie in [0, 1], got {filter_threshold}")
            if record.abs_error <= filter_threshold:
                return False
        if self.keep_prob < 1.0 and self._rng.random() >= self.keep_prob:
            return False
        self._records.append(
            (record.hidden, float(record.label), float(record.base_pred))
        )
        self._matrix_cache = None
        return True

    def store_batch(self, hiddens, labels, base_preds,
                    filter_threshold: float | None = None) -> int:
        """Store n records; returns how many passed the filters."""
        h = np.asarray(hiddens, dtype=np.float64)
        accepted = 0
        for i in range(h.shape[0]):
            record = MemoryRecord(h[i], float(labels[i]), float(base_preds[i]))
            accepted += self.store(record, filter_threshold)
        return accepted

    def reset(self) -> None:
        self._records.clear()
        self._matrix_cache = None

    # ------------------------------------------------------------------- reads

    def _stacked(self):
        if self._matrix_cache is None:
            hiddens = np.stack([r[0] for r in self._records])
            norms = np.linalg.norm(hiddens, axis=1)
            labels = np.array([r[1] for r in self._records])
            base_preds = np.array([r[2] for r in self._records])
            self._matrix_cache = (hiddens, norms, labels, base_preds)
        return self._matrix_cache

    def _cosines(self, hiddens, norms, query):
        q = np.asarray(query, dtype=np.float64)
        if q.shape != (self.dim,):
            raise DimensionMismatchError(f"query shape {q.shape} != (dim,) = ({self.dim},)")
        qn = np.linalg.norm(q)
        denom = norms * qn
        with np.errstate(invalid="ignore", divide="ignore"):
            sims = np.where(denom > 0.0, hiddens @ q / denom, 0.0)
        return sims

    def top_k(self, query, k: int | None = None) -> Neighborhood:
        """Exact top-k records by cosine similarity to the query.

        Returns min(k, size) entries sorted by descending similarity; exact
        ties keep insertion order (older record first). Raises
        :class:`EmptyMemoryError` on an empty store.
        """
        if len(self._records) == 0:
            raise EmptyMemoryError("no records stored")
        k = self.default_k if k is None else int(k)
        if k < 1:
            raise ParameterError(f"k must be >= 1, got {k}")
        hiddens, norms, labels, base_preds = self._stacked()
        sims = self._cosines(hiddens, norms, query)
        order = np.argsort(-sims, kind="stable")[:k]
        return Neighborhood(sims[order], labels[order], base_preds[order], source="oracle")

    def retrieve(self, query) -> Neighborhood:
        """Uniform retrieval surface shared with the sketch backend."""
        return self.top_k(query, self.default_k)

    def top_k_many(self, queries, k: int | None = None, chunk: int = 512):
        """Batched top-k for an (n, dim) query block.

        Returns (similarities, labels, base_preds) arrays of shape
        (n, min(k, size)). Uses a partial sort per chunk, so ordering among
        exactly tied similarities at the cut boundary may differ from the
        single-query path; values are exact.
        """
        if len(self._records) == 0:
            raise EmptyMemoryError("no records stored")
        k = self.default_k if k is None else int(k)
        qs = np.asarray(queries, dtype=np.float64)
        if qs.ndim != 2 or qs.shape[1] != self.dim:
            raise DimensionMismatchError(f"expected queries of shape (n, {self.dim}), got {qs.shape}")
        hiddens, norms, labels, base_preds = self._stacked()
        size = hiddens.shape[0]
        kk = min(k, size)
        qnorms = np.linalg.norm(qs, axis=1)

        out_s = np.empty((qs.shape[0], kk))
        out_y = np.empty_like(out_s)
        out_b = np.empty_like(out_s)
        for start in range(0, qs.shape[0], chunk):
            block = qs[start:start + chunk]
            denom = norms[None, :] * qnorms[start:start + chunk, None]
            with np.errstate(invalid="ignore", divide="ignore"):
                sims = np.where(denom > 0.0, block @ hiddens.T / denom, 0.0)
            if kk < size:
                part = np.argpartition(-sims, kk - 1, axis=1)[:, :kk]
            else:
                part = np.broadcast_to(np.arange(size), (block.shape[0], size))
            psims = np.take_along_axis(sims, part, axis=1)
            order = np.argsort(-psims, axis=1, kind="stable")
            idx = np.take_along_axis(part, order, axis=1)
            sl = slice(start, start + block.shape[0])
            out_s[sl] = np.take_along_axis(sims, idx, axis=1)
            out_y[sl] = labels[idx]
            out_b[sl] = base_preds[idx]
        return out_s, out_y, out_b
