"""Ranking and calibration metrics: AUC, user-grouped AUC, log loss, RelImp."""

from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from .errors import DegenerateLabelsError, ParameterError


def auc(scores, labels) -> float:
    """Probability that a random positive outranks a random negative.

    Rank-sum (Mann-Whitney) computation with average ranks, so exactly tied
    scores count half a win. Requires both classes present.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ParameterError("scores and labels must be 1-d arrays of equal length")
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = s.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabelsError("AUC needs at least one positive and one negative label")
    ranks = rankdata(s, method="average")
    pos_rank_sum = ranks[pos].sum()
    return float((pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def gauc(scores, labels, user_ids) -> float:
    """Impression-weighted mean of per-user AUC.

    Users whose impressions are all one class cannot be ranked and are
    excluded from both numerator and denominator. Raises when no user has
    both classes.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    u = np.asarray(user_ids)
    if not (s.shape == y.shape == u.shape):
        raise ParameterError("scores, labels and user_ids must have equal length")
    order = np.argsort(u, kind="stable")
    s, y, u = s[order], y[order], u[order]
    boundaries = np.flatnonzero(np.r_[True, u[1:] != u[:-1], True])

    weighted = 0.0
    weight = 0.0
    for start, stop in zip(boundaries[:-1], boundaries[1:]):
        group_y = y[start:stop]
        if group_y.min() == group_y.max():
            continue
        n = stop - start
        weighted += n * auc(s[start:stop], group_y)
        weight += n
    if weight == 0.0:
        raise DegenerateLabelsError("no user has impressions of both classes")
    return float(weighted / weight)


def log_loss(scores, labels, eps: float = 1e-15) -> float:
    """Mean binary cross-entropy; scores are clipped away from {0, 1}."""
    p = np.clip(np.asarray(scores, dtype=np.float64), eps, 1.0 - eps)
    y = np.asarray(labels, dtype=np.float64)
    if p.shape != y.shape:
        raise ParameterError("scores and labels must have equal length")
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def rel_imp(metric: float, reference: float) -> float:
    """Relative improvement over a reference value, in percent."""
    if reference <= 0.0:
        raise ParameterError(f"reference must be > 0, got {reference}")
    return (metric - reference) / reference * 100.0
