"""Collision-based testers for the l2 norm and l2 distance of distributions.

All testers consume :class:`~kcluster.walks.SampleCounts`.  Counts are kept
as exact integers; statistics are formed in double precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.sparse import csr_matrix

from .errors import InputError
from .walks import SampleCounts

#: Upper bound on samples per distribution; keeps r^2 well inside int64.
MAX_SAMPLES = 10**9


@dataclass(frozen=True)
class TesterVerdict:
    accepted: bool
    statistic: float
    threshold: float
    r: int

    def to_dict(self) -> dict:
        return {"accepted": self.accepted, "statistic": self.statistic,
                "threshold": self.threshold, "r": self.r}


def _pairs(r: int) -> int:
    return r * (r - 1) // 2


def _check_r(r: int, minimum: int = 2) -> None:
    if r < minimum:
        raise InputError(f"need at least {minimum} samples, got r={r}")
    if r > MAX_SAMPLES:
        raise InputError(f"r={r} exceeds the sample cap {MAX_SAMPLES}")


def collision_count(c: SampleCounts) -> int:
    """Number of colliding sample pairs, ``sum_i C(count_i, 2)``."""
    return sum(x * (x - 1) // 2 for x in c.counts.values())


def l2_norm_estimate(c: SampleCounts) -> float:
    """Unbiased estimate of ``||p||_2^2``: collisions over ``C(r, 2)``."""
    _check_r(c.r)
    return collision_count(c) / _pairs(c.r)


def norm_threshold(r: int, sigma: float) -> float:
    """Collision count at or above which the norm tester rejects."""
    return 0.5 * _pairs(r) * sigma


def l2_norm_test(c: SampleCounts, sigma: float) -> TesterVerdict:
    """Accept iff the collision count is strictly below ``C(r,2) * sigma / 2``."""
    _check_r(c.r)
    if sigma <= 0:
        raise InputError(f"sigma must be positive, got {sigma}")
    z = collision_count(c)
    thr = norm_threshold(c.r, sigma)
    return TesterVerdict(bool(z < thr), float(z), thr, c.r)


def l2_distance_estimate(cp: SampleCounts, cq: SampleCounts) -> float:
    """Unbiased estimate of ``||p - q||_2^2`` from two equal-size sample sets.

    ``T = (Z_p + Z_q) / C(r, 2) - 2 * sum_i X_i Y_i / r^2`` where ``Z`` are the
    self-collision counts and ``X, Y`` the per-element counts.
    """
    if cp.r != cq.r:
        raise InputError(f"sample sizes differ: {cp.r} vs {cq.r}")
    _check_r(cp.r)
    r = cp.r
    small, big = (cp.counts, cq.counts) if len(cp.counts) <= len(cq.counts) else (cq.counts, cp.counts)
    cross = sum(x * big.get(v, 0) for v, x in small.items())
    return (collision_count(cp) + collision_count(cq)) / _pairs(r) - 2.0 * cross / (r * r)


def closeness_threshold(xi: float) -> float:
    """Midpoint ``5 xi / 2`` of the promise gap ``[xi, 4 xi]``."""
    return 2.5 * xi


def median_batches(delta: float, c_median: float = 24.0) -> int:
    """Batch count ``ceil(c_median * ln(1/delta))`` for median amplification (at least 1)."""
    if not 0 < delta < 1:
        raise InputError(f"delta must lie in (0,1), got {delta}")
    return max(1, math.ceil(c_median * math.log(1.0 / delta)))


def median_verdict(estimates: Sequence[float], xi: float, r: int) -> TesterVerdict:
    """Accept iff the median estimate is strictly below ``5 xi / 2`` (a tie rejects)."""
    stat = float(np.median(np.asarray(estimates, dtype=float)))
    thr = closeness_threshold(xi)
    return TesterVerdict(bool(stat < thr), stat, thr, r)


def l2_closeness_test(
    cp_list: Sequence[SampleCounts], cq_list: Sequence[SampleCounts], xi: float, delta: float,
    c_median: float | None = None,
) -> TesterVerdict:
    """Median-of-batches closeness tester.

    When ``c_median`` is given, the batch count must equal
    :func:`median_batches` for ``delta``; otherwise any positive number of
    equally sized batches is accepted.
    """
    if len(cp_list) != len(cq_list) or not cp_list:
        raise InputError(f"batch count mismatch: {len(cp_list)} vs {len(cq_list)}")
    if xi <= 0:
        raise InputError(f"xi must be positive, got {xi}")
    if c_median is not None and len(cp_list) != median_batches(delta, c_median):
        raise InputError(
            f"expected {median_batches(delta, c_median)} batches for delta={delta}, got {len(cp_list)}"
        )
    r = cp_list[0].r
    if any(c.r != r for c in list(cp_list) + list(cq_list)):
        raise InputError("all batches must have the same sample size")
    ests = [l2_distance_estimate(a, b) for a, b in zip(cp_list, cq_list)]
    return median_verdict(ests, xi, r)


# ---------------------------------------------------------------------------
# vectorised forms used by the cluster tester


def count_matrix(endpoints: np.ndarray, n: int) -> csr_matrix:
    """Sparse ``(rows, n)`` count matrix from a ``(rows, r)`` endpoint array."""
    rows, r = endpoints.shape
    data = np.ones(rows * r, dtype=np.int64)
    row_idx = np.repeat(np.arange(rows), r)
    X = csr_matrix((data, (row_idx, endpoints.ravel())), shape=(rows, n))
    X.sum_duplicates()
    return X


def collision_counts(X: csr_matrix) -> np.ndarray:
    """Row-wise collision counts of a count matrix."""
    sq = X.multiply(X).sum(axis=1).A1
    tot = X.sum(axis=1).A1
    return (sq - tot) // 2


def pairwise_distance_estimates(X: csr_matrix, r: int) -> np.ndarray:
    """All-pairs ``l2_distance_estimate`` for the rows of a count matrix."""
    _check_r(r)
    z = collision_counts(X).astype(float) / _pairs(r)
    G = (X @ X.T).toarray().astype(float)
    return z[:, None] + z[None, :] - 2.0 * G / (r * r)
