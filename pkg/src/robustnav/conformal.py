"""Split-conformal calibration of the score threshold and coverage checks.

The threshold q is the ceil((N+1)(1-alpha))-th smallest calibration score
(or +inf when that index exceeds N), which yields marginal coverage in
[1-alpha, 1-alpha + 1/(N+1)] for exchangeable, tie-free scores.  Score
ties are taken as-is from the stable sort, which only makes the coverage
more conservative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .picnn import PicnnParams, matrix_score, picnn_forward


class InvalidAlpha(ValueError):
    """coverage_alpha outside the open interval (0, 1)."""


@dataclass(frozen=True)
class CalibrationSet:
    scores: np.ndarray
    coverage_alpha: float

    def __post_init__(self):
        object.__setattr__(self, "scores", np.asarray(self.scores, dtype=float))
        if self.scores.ndim != 1 or len(self.scores) < 1:
            raise ValueError("scores must be a nonempty vector")
        if not np.all(np.isfinite(self.scores)):
            raise ValueError("scores must be finite")
        if not 0.0 < self.coverage_alpha < 1.0:
            raise InvalidAlpha(f"coverage_alpha must lie in (0,1), got {self.coverage_alpha}")


@dataclass(frozen=True)
class UncertaintySet:
    """Sublevel set of the score at threshold q for a fixed context x.

    anchor, when given, is a known member matrix used as a bisection target
    by samplers; it is advisory and not part of the membership test.
    """

    picnn: PicnnParams
    x: np.ndarray
    q: float
    anchor: np.ndarray = None


def calibrate(cal: CalibrationSet) -> float:
    """Quantile threshold; +inf when ceil((N+1)(1-alpha)) exceeds N."""
    n = len(cal.scores)
    idx = math.ceil((n + 1) * (1.0 - cal.coverage_alpha))
    if idx > n:
        return math.inf
    return float(np.sort(cal.scores, kind="stable")[idx - 1])


def membership(uset: UncertaintySet, M_flat: np.ndarray) -> bool:
    """True iff the score of one convex-input vector is at most q."""
    if np.isinf(uset.q):
        return True
    score = picnn_forward(uset.picnn, uset.x, M_flat).score
    return bool(score <= uset.q)


def matrix_membership(uset: UncertaintySet, M: np.ndarray) -> bool:
    """True iff every column of the transition matrix scores at most q."""
    if np.isinf(uset.q):
        return True
    return matrix_score(uset.picnn, uset.x, M) <= uset.q


def score_samples(picnn: PicnnParams, X: np.ndarray, Ms: np.ndarray) -> np.ndarray:
    """Batched scores; matrices of shape (B, V, V) score as column maxima."""
    Ms = np.asarray(Ms, dtype=float)
    if Ms.ndim == 3:
        B, V, _ = Ms.shape
        cols = Ms.transpose(0, 2, 1).reshape(B * V, V)
        ctx = np.repeat(np.asarray(X, dtype=float), V, axis=0)
        scores = picnn_forward(picnn, ctx, cols).score.reshape(B, V)
        return scores.max(axis=1)
    return picnn_forward(picnn, X, Ms).score


def empirical_coverage(
    picnn: PicnnParams,
    sampler,
    coverage_alpha: float,
    n_calib: int,
    n_test: int,
    n_trials: int,
    seed: int = 0,
) -> float:
    """Mean fraction of fresh test pairs inside the calibrated set.

    sampler(rng, size) must return (X, Ms) drawn i.i.d.; each trial uses an
    independently derived seed and trials are reduced in index order.
    """
    if not 0.0 < coverage_alpha < 1.0:
        raise InvalidAlpha(f"coverage_alpha must lie in (0,1), got {coverage_alpha}")
    seeds = np.random.SeedSequence(seed).spawn(n_trials)
    coverages = np.empty(n_trials)
    for t in range(n_trials):
        rng = np.random.default_rng(seeds[t])
        Xc, Mc = sampler(rng, n_calib)
        q = calibrate(CalibrationSet(score_samples(picnn, Xc, Mc), coverage_alpha))
        Xt, Mt = sampler(rng, n_test)
        if np.isinf(q):
            coverages[t] = 1.0
        else:
            coverages[t] = float(np.mean(score_samples(picnn, Xt, Mt) <= q))
    return float(coverages.mean())
