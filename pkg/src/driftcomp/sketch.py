"""Constant-memory error sketch: repeated hashed arrays of accumulator triples.

The sketch summarizes a stream of (hidden vector, label, base prediction)
records in ``num_hashes`` arrays of ``2**bits_per_hash`` buckets. Each
bucket holds three accumulators: ``sum_x`` (record count), ``sum_y``
(label sum) and ``sum_ybase`` (base-prediction sum). Writing a record
touches one bucket per array; reading a query vector returns, per array
that has mass in the query's bucket, a similarity estimate and the bucket's
label / base-prediction summaries. Storage never grows with the stream:
exactly ``2**bits_per_hash x num_hashes x 3`` float64 accumulators plus
per-array totals.

Concurrency: single writer, any number of concurrent readers. The arrays
are independent, so one write may be parallelized across arrays provided
each array's total is updated atomically with its bucket.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptyNeighborhoodError,
    OutOfRangeError,
    ParameterError,
    SnapshotFormatError,
)
from .lsh import SrpHashBank
from .records import MemoryRecord, Neighborhood

#: Readout conventions for the per-bucket label / base-prediction summaries.
#: "bucket_mean" divides sum_y and sum_ybase by the bucket's own count, so
#: label estimates stay in [0, 1]. "global_total" divides all three
#: accumulators by the array's grand total, which couples the estimates to
#: bucket occupancy; it is kept for comparison experiments.
READOUT_MODES = ("bucket_mean", "global_total")

_MAGIC = b"DCSKETCH"
_VERSION = 1
# Header layout, little-endian: magic, version, dim, bits_per_hash,
# num_hashes, seed (signed 64-bit), writes_accepted, writes_filtered.
_HEADER = struct.Struct("<8sIIIIqQQ")


class ErrorSketch:
    """Streaming sketch of recent error samples keyed by an SRP hash bank.

    Parameters
    ----------
    bank : the hash bank; fixes dimension, bucket space and seeds.
    readout : default readout convention, one of :data:`READOUT_MODES`.
    """

    def __init__(self, bank: SrpHashBank, readout: str = "bucket_mean"):
        if readout not in READOUT_MODES:
            raise ParameterError(f"readout must be one of {READOUT_MODES}, got {readout!r}")
        self.bank = bank
        self.readout = readout
        self.cells = np.zeros((bank.num_hashes, bank.num_buckets, 3), dtype=np.float64)
        self.totals = np.zeros(bank.num_hashes, dtype=np.float64)
        self.writes_accepted = 0
        self.writes_filtered = 0

    # ------------------------------------------------------------------ sizing

    @property
    def nbytes(self) -> int:
        """Bytes held by the accumulator array (constant for the sketch's life)."""
        return self.cells.nbytes

    def __len__(self) -> int:
        return self.writes_accepted

    # ------------------------------------------------------------------ writes

    def write(self, record: MemoryRecord, filter_threshold: float | None = None) -> bool:
        """Fold one record into every array.

        When ``filter_threshold`` (sigma) is given, records whose absolute
        error |label - base_pred| is <= sigma are skipped and counted in
        ``writes_filtered``. Returns True when the record was accepted.
        """
        if record.hidden.shape != (self.bank.dim,):
            raise DimensionMismatchError(
                f"record hidden dimension {record.hidden.shape} != bank dim {self.bank.dim}"
            )
        if filter_threshold is not None:
            if not 0.0 <= filter_threshold <= 1.0:
                raise ParameterError(f"filter threshold must lie in [0, 1], got {filter_threshold}")
            if record.abs_error <= filter_threshold:
                self.writes_filtered += 1
                return False
        buckets = self.bank.bucket_indices(record.hidden)
        rows = np.arange(self.bank.num_hashes)
        self.cells[rows, buckets, 0] += 1.0
        self.cells[rows, buckets, 1] += float(record.label)
        self.cells[rows, buckets, 2] += float(record.base_pred)
        self.totals += 1.0
        self.writes_accepted += 1
        return True

    def write_batch(self, hiddens, labels, base_preds,
                    filter_threshold: float | None = None) -> int:
        """Vectorized write of n records; returns how many were accepted.

        Semantically identical to n sequential :meth:`write` calls.
        """
        h = np.asarray(hiddens, dtype=np.float64)
        y = np.asarray(labels, dtype=np.float64).ravel()
        yb = np.asarray(base_preds, dtype=np.float64).ravel()
        if h.ndim != 2 or h.shape[1] != self.bank.dim:
            raise DimensionMismatchError(
                f"expected hiddens of shape (n, {self.bank.dim}), got {h.shape}"
            )
        if not (h.shape[0] == y.shape[0] == yb.shape[0]):
            raise ParameterError("hiddens, labels and base_preds must have equal length")
        if not np.isin(y, (0.0, 1.0)).all():
            raise OutOfRangeError("labels must be 0 or 1")
        if ((yb < 0.0) | (yb > 1.0)).any():
            raise OutOfRangeError("base predictions must lie in [0, 1]")

        if filter_threshold is not None:
            if not 0.0 <= filter_threshold <= 1.0:
                raise ParameterError(f"filter threshold must lie in [0, 1], got {filter_threshold}")
            keep = np.abs(y - yb) > filter_threshold
            self.writes_filtered += int((~keep).sum())
            h, y, yb = h[keep], y[keep], yb[keep]
        n = h.shape[0]
        if n == 0:
            return 0

        buckets = self.bank.bucket_indices_many(h)  # (n, K)
        for k in range(self.bank.num_hashes):
            np.add.at(self.cells[k, :, 0], buckets[:, k], 1.0)
            np.add.at(self.cells[k, :, 1], buckets[:, k], y)
            np.add.at(self.cells[k, :, 2], buckets[:, k], yb)
        self.totals += float(n)
        self.writes_accepted += n
        return n

    # ------------------------------------------------------------------- reads

    def read(self, query, readout: str | None = None) -> Neighborhood:
        """Read the query's bucket in every array that has mass there.

        Per hit array k: similarity = bucket count / array total, and the
        bucket's label / base-prediction summaries under the readout
        convention. Arrays whose bucket is empty contribute nothing; when
        all of them miss an :class:`EmptyNeighborhoodError` is raised and
        the caller must fall back to zero compensation. Reading mutates
        nothing.
        """
        q = np.asarray(query, dtype=np.float64)
        sims, ys, ybs, hit = self.read_arrays(q[None, :], readout=readout)
        if not hit[0].any():
            raise EmptyNeighborhoodError(
                "every array's bucket for this query is empty; fall back to zero compensation"
            )
        m = hit[0]
        return Neighborhood(sims[0][m], ys[0][m], ybs[0][m], source="sketch")

    def retrieve(self, query) -> Neighborhood:
        """Uniform retrieval surface shared with the exact memory backend."""
        return self.read(query)

    def read_arrays(self, queries, readout: str | None = None):
        """Vectorized readout for a (n, dim) query batch.

        Returns ``(similarity, label_est, base_est, hit)``, each of shape
        (n, num_hashes); positions with ``hit == False`` carry zeros.
        """
        mode = self.readout if readout is None else readout
        if mode not in READOUT_MODES:
            raise ParameterError(f"readout must be one of {READOUT_MODES}, got {mode!r}")
        buckets = self.bank.bucket_indices_many(queries)  # (n, K)
        rows = np.arange(self.bank.num_hashes)
        triples = self.cells[rows, buckets, :]  # (n, K, 3)
        sum_x = triples[:, :, 0]
        hit = sum_x > 0.0

        with np.errstate(invalid="ignore", divide="ignore"):
            sim = np.where(self.totals > 0.0, sum_x / self.totals, 0.0)
            denom = sum_x if mode == "bucket_mean" else self.totals[None, :]
            label_est = np.where(hit, triples[:, :, 1] / denom, 0.0)
            base_est = np.where(hit, triples[:, :, 2] / denom, 0.0)
        return sim, label_est, base_est, hit

    # ------------------------------------------------------------ maintenance

    def reset(self) -> None:
        """Zero all accumulators, totals and counters; the bank is untouched."""
        self.cells.fill(0.0)
        self.totals.fill(0.0)
        self.writes_accepted = 0
        self.writes_filtered = 0

    def audit(self) -> bool:
        """Exact check that per-array totals equal a full accumulator rescan.

        Unit-mass writes keep both sides integer-valued in float64, so the
        comparison is exact, not approximate.
        """
        return bool(np.array_equal(self.cells[:, :, 0].sum(axis=1), self.totals))

    # -------------------------------------------------------------- snapshots

    def snapshot(self) -> bytes:
        """Serialize to bytes.

        Layout (all little-endian): the header ``magic "DCSKETCH", version
        u32, dim u32, bits_per_hash u32, num_hashes u32, seed i64,
        writes_accepted u64, writes_filtered u64`` followed by the
        accumulators as float64 triples in row-major order (array index,
        then bucket, then count / label-sum / base-prediction-sum).
        Hyperplanes are never stored; they regenerate from the seed.
        """
        header = _HEADER.pack(
            _MAGIC, _VERSION, self.bank.dim, self.bank.bits_per_hash,
            self.bank.num_hashes, self.bank.seed,
            self.writes_accepted, self.writes_filtered,
        )
        body = np.ascontiguousarray(self.cells, dtype="<f8").tobytes()
        return header + body

    @classmethod
    def restore(cls, data: bytes, bank: SrpHashBank, readout: str = "bucket_mean") -> "ErrorSketch":
        """Rebuild a sketch from :meth:`snapshot` output."""
        return _restore(cls, data, bank, readout)


def snapshot_info(data: bytes) -> dict:
    """Decode a snapshot's header and occupancy without needing its bank."""
    if len(data) < _HEADER.size:
        raise SnapshotFormatError("snapshot shorter than its fixed header")
    magic, version, dim, bits, num, seed, accepted, filtered = _HEADER.unpack_from(data, 0)
    if magic != _MAGIC:
        raise SnapshotFormatError(f"bad magic {magic!r}")
    expected = _HEADER.size + num * (1 << bits) * 3 * 8
    if len(data) != expected:
        raise SnapshotFormatError(f"snapshot length {len(data)} != expected {expected}")
    cells = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(num, 1 << bits, 3)
    return {
        "version": version,
        "dim": dim,
        "bits_per_hash": bits,
        "num_hashes": num,
        "seed": seed,
        "writes_accepted": accepted,
        "writes_filtered": filtered,
        "buckets_per_array": 1 << bits,
        "occupied_buckets": int((cells[:, :, 0] > 0).sum()),
        "accumulator_bytes": cells.nbytes,
    }


def _restore(cls, data: bytes, bank: SrpHashBank, readout: str) -> "ErrorSketch":
    """Restore body: the bank must match the snapshot's (dim, bits, num, seed)
    exactly; reads on the restored sketch reproduce the original's bit for bit."""
    if len(data) < _HEADER.size:
        raise SnapshotFormatError("snapshot shorter than its fixed header")
    magic, version, dim, bits, num, seed, accepted, filtered = _HEADER.unpack_from(data, 0)
    if magic != _MAGIC:
        raise SnapshotFormatError(f"bad magic {magic!r}")
    if version != _VERSION:
        raise SnapshotFormatError(f"unsupported snapshot version {version}")
    if (dim, bits, num, seed) != (bank.dim, bank.bits_per_hash, bank.num_hashes, bank.seed):
        raise SnapshotFormatError(
            "bank parameters do not match snapshot header: "
            f"snapshot has (dim={dim}, bits={bits}, num={num}, seed={seed})"
        )
    expected = _HEADER.size + num * (1 << bits) * 3 * 8
    if len(data) != expected:
        raise SnapshotFormatError(f"snapshot length {len(data)} != expected {expected}")
    sketch = cls(bank, readout=readout)
    cells = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    sketch.cells = cells.reshape(num, 1 << bits, 3).astype(np.float64)
    sketch.totals = sketch.cells[:, :, 0].sum(axis=1)
    sketch.writes_accepted = int(accepted)
    sketch.writes_filtered = int(filtered)
    return sketch
