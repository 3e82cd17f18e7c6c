"""Signed random projection (SimHash) bucket hashing for real vectors.

A hash bank holds ``num_hashes`` independent sets of ``bits_per_hash``
random hyperplanes. Each set maps a d-dimensional vector to one bucket
index in ``[0, 2**bits_per_hash - 1]`` by concatenating the signs of the
projections. Two vectors land in the same bucket of one set with
probability ``(1 - theta/pi) ** bits_per_hash`` where theta is the angle
between them, which makes bucket collisions a monotone proxy for cosine
similarity.

Reproducibility: hyperplane components are i.i.d. standard normal drawn
from numpy's PCG64 generator (ziggurat sampling, stream-stable across
platforms for a fixed numpy version). Set ``k`` uses the stream seeded
with ``(seed XOR k) & (2**64 - 1)``, so banks are fully determined by
``(dim, bits_per_hash, num_hashes, seed)`` and the sets are independent.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from .errors import DimensionMismatchError, ParameterError

MAX_BITS_PER_HASH = 30

_SEED_MASK = (1 << 64) - 1


class ZeroVectorWarning(UserWarning):
    """A zero vector was hashed; every bit fell on the tie rule (bit 0)."""


class SrpHashBank:
    """Immutable bank of ``num_hashes`` x ``bits_per_hash`` hyperplanes.

    Parameters
    ----------
    dim : input vector dimension, >= 1.
    bits_per_hash : bits per bucket index (bucket space ``2**bits``), 1..30.
    num_hashes : number of independent hash sets, >= 1.
    seed : 64-bit integer controlling every hyperplane.

    The bank is read-only after construction and safe for concurrent use.
    """

    def __init__(self, dim: int, bits_per_hash: int, num_hashes: int, seed: int = 0):
        if dim < 1:
            raise ParameterError(f"dim must be >= 1, got {dim}")
        if not 1 <= bits_per_hash <= MAX_BITS_PER_HASH:
            raise ParameterError(
                f"bits_per_hash must be in [1, {MAX_BITS_PER_HASH}], got {bits_per_hash}"
            )
        if num_hashes < 1:
            raise ParameterError(f"num_hashes must be >= 1, got {num_hashes}")
        self.dim = int(dim)
        self.bits_per_hash = int(bits_per_hash)
        self.num_hashes = int(num_hashes)
        self.seed = int(seed)

        planes = np.empty((self.num_hashes, self.bits_per_hash, self.dim), dtype=np.float64)
        for k in range(self.num_hashes):
            stream = np.random.default_rng((self.seed ^ k) & _SEED_MASK)
            planes[k] = stream.standard_normal((self.bits_per_hash, self.dim))
        planes.setflags(write=False)
        self.hyperplanes = planes

        # MSB-first bit weights: bit j of a set is the j-th most significant bit.
        weights = 1 << np.arange(self.bits_per_hash - 1, -1, -1, dtype=np.int64)
        weights.setflags(write=False)
        self._bit_weights = weights

    @classmethod
    def from_hyperplanes(cls, hyperplanes, seed: int = 0) -> "SrpHashBank":
        """Build a bank around explicitly chosen hyperplanes (tests, demos).

        ``hyperplanes`` must have shape (num_hashes, bits_per_hash, dim).
        """
        planes = np.asarray(hyperplanes, dtype=np.float64)
        if planes.ndim != 3:
            raise ParameterError("hyperplanes must have shape (num_hashes, bits, dim)")
        bank = cls(planes.shape[2], planes.shape[1], planes.shape[0], seed)
        fixed = planes.copy()
        fixed.setflags(write=False)
        bank.hyperplanes = fixed
        return bank

    @property
    def num_buckets(self) -> int:
        """Size of each set's bucket space, ``2**bits_per_hash``."""
        return 1 << self.bits_per_hash

    def bucket_indices(self, x) -> np.ndarray:
        """Hash one vector to ``num_hashes`` bucket indices.

        Index k is the ``bits_per_hash``-bit integer formed by the sign bits
        of set k's projections, most significant bit first. Scale-invariant
        for nonzero inputs; a zero vector is accepted (all bits 0) but
        triggers a :class:`ZeroVectorWarning`.
        """
        return self.bucket_indices_many(np.asarray(x, dtype=np.float64)[None, :])[0]

    def bucket_indices_many(self, xs) -> np.ndarray:
        """Vectorized :meth:`bucket_indices` for a (n, dim) batch.

        Returns an (n, num_hashes) int64 array.
        """
        arr = np.asarray(xs, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != self.dim:
            raise DimensionMismatchError(
                f"expected vectors of dimension {self.dim}, got array of shape {arr.shape}"
            )
        if not arr.any(axis=1).all():
            warnings.warn(
                "zero vector hashed: all bits fall on the tie rule", ZeroVectorWarning,
                stacklevel=2,
            )
        flat = self.hyperplanes.reshape(self.num_hashes * self.bits_per_hash, self.dim)
        # (n, K*L) sign bits -> (n, K, L) -> MSB-first integer per set.
        bits = (arr @ flat.T) > 0.0
        bits = bits.reshape(arr.shape[0], self.num_hashes, self.bits_per_hash)
        return bits.astype(np.int64) @ self._bit_weights


def hash_bit(plane, x) -> int:
    """Single SRP bit: 1 if the projection of ``x`` on ``plane`` is > 0, else 0.

    A zero projection maps to 0 (ties go to the low bit).
    """
    p = np.asarray(plane, dtype=np.float64)
    v = np.asarray(x, dtype=np.float64)
    if p.shape != v.shape or p.ndim != 1:
        raise DimensionMismatchError(
            f"plane shape {p.shape} does not match vector shape {v.shape}"
        )
    return int(float(p @ v) > 0.0)


def collision_probability(cosine: float, bits: int) -> float:
    """Chance that two vectors at the given cosine share one bucket index.

    Computes ``(1 - arccos(cosine)/pi) ** bits``. Analytic reference used
    by tests and diagnostics, not by the hashing hot path. Cosines slightly
    outside [-1, 1] from floating point roundoff are clamped.
    """
    if bits < 1:
        raise ParameterError(f"bits must be >= 1, got {bits}")
    c = min(1.0, max(-1.0, float(cosine)))
    return (1.0 - math.acos(c) / math.pi) ** bits
