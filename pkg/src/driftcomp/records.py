"""Record and retrieval-result types shared by the two memory backends."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import OutOfRangeError, ParameterError


@dataclass(frozen=True)
class MemoryRecord:
    """One observed sample: hidden key vector, true label, base prediction."""

    hidden: np.ndarray
    label: float
    base_pred: float

    def __post_init__(self):
        object.__setattr__(self, "hidden", np.asarray(self.hidden, dtype=np.float64))
        if self.label not in (0, 1):
            raise OutOfRangeError(f"label must be 0 or 1, got {self.label}")
        if not 0.0 <= self.base_pred <= 1.0:
            raise OutOfRangeError(f"base_pred must lie in [0, 1], got {self.base_pred}")

    @property
    def abs_error(self) -> float:
        """|label - base_pred|, the quantity the write filter thresholds."""
        return abs(float(self.label) - float(self.base_pred))


@dataclass
class Neighborhood:
    """Retrieved evidence for one query: parallel arrays of
    (similarity, label estimate, base-prediction estimate), plus which
    backend produced it ("sketch" or "oracle").

    Always non-empty; retrieval surfaces an explicit error instead of
    returning an empty neighborhood.
    """

    similarities: np.ndarray
    label_estimates: np.ndarray
    base_estimates: np.ndarray
    source: str = field(default="sketch")

    def __post_init__(self):
        self.similarities = np.asarray(self.similarities, dtype=np.float64)
        self.label_estimates = np.asarray(self.label_estimates, dtype=np.float64)
        self.base_estimates = np.asarray(self.base_estimates, dtype=np.float64)
        n = self.similarities.shape[0]
        if n == 0:
            raise ParameterError("a Neighborhood must contain at least one entry")
        if self.label_estimates.shape[0] != n or self.base_estimates.shape[0] != n:
            raise ParameterError("neighborhood arrays must have equal length")

    def __len__(self) -> int:
        return self.similarities.shape[0]

    @property
    def entries(self) -> list[tuple[float, float, float]]:
        """Entries as (similarity, label_estimate, base_estimate) tuples."""
        return [
            (float(s), float(y), float(b))
            for s, y, b in zip(self.similarities, self.label_estimates, self.base_estimates)
        ]
