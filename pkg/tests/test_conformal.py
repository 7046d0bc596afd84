import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from robustnav.conformal import (
    CalibrationSet,
    InvalidAlpha,
    UncertaintySet,
    calibrate,
    empirical_coverage,
    matrix_membership,
    membership,
)
from robustnav.picnn import picnn_score, random_params

from test_picnn import constant_params


def gaussian_sampler(dim_x=3, V=4):
    def draw(rng, size):
        X = rng.normal(size=(size, dim_x))
        Ms = rng.uniform(size=(size, V))
        return X, Ms

    return draw


def test_quantile_index_hand_examples():
    assert calibrate(CalibrationSet(np.arange(1.0, 10.0), 0.1)) == 9.0
    assert calibrate(CalibrationSet(np.array([5.0, 2.0, 8.0]), 0.5)) == 5.0


def test_small_sample_returns_infinity():
    assert math.isinf(calibrate(CalibrationSet(np.array([1.0, 2.0, 3.0]), 0.01)))


def test_invalid_alpha():
    with pytest.raises(InvalidAlpha):
        CalibrationSet(np.array([1.0]), 0.0)
    with pytest.raises(InvalidAlpha):
        CalibrationSet(np.array([1.0]), 1.0)


def test_membership_infinite_threshold():
    p = random_params(1, 2, 3, 4, seed=0)
    uset = UncertaintySet(picnn=p, x=np.zeros(3), q=math.inf)
    assert membership(uset, np.ones(4))
    assert matrix_membership(uset, np.eye(4))


def test_membership_constant_network_above_threshold():
    p = constant_params(3.0)
    uset = UncertaintySet(picnn=p, x=np.zeros(3), q=2.0)
    assert not membership(uset, np.zeros(4))


def test_membership_reuses_calibration_point():
    p = random_params(1, 2, 3, 4, seed=1)
    rng = np.random.default_rng(0)
    X, Ms = gaussian_sampler()(rng, 50)
    scores = np.array([picnn_score(p, X[i], Ms[i]) for i in range(50)])
    q = calibrate(CalibrationSet(scores, 0.2))
    inside = np.flatnonzero(scores <= q)
    i = inside[0]
    assert membership(UncertaintySet(picnn=p, x=X[i], q=q), Ms[i])


def test_monotone_in_coverage_level():
    scores = np.random.default_rng(2).normal(size=40)
    qs = [calibrate(CalibrationSet(scores, a)) for a in (0.5, 0.3, 0.2, 0.1, 0.02)]
    assert all(q2 >= q1 for q1, q2 in zip(qs, qs[1:]))


@settings(max_examples=50, deadline=None, derandomize=True)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=60), st.integers(0, 2**32 - 1))
def test_permutation_invariance(scores, perm_seed):
    scores = np.asarray(scores)
    rng = np.random.default_rng(perm_seed)
    q1 = calibrate(CalibrationSet(scores, 0.25))
    q2 = calibrate(CalibrationSet(rng.permutation(scores), 0.25))
    assert q1 == q2 or (math.isinf(q1) and math.isinf(q2))


def test_coverage_sandwich_random_score():
    p = random_params(2, 4, 3, 4, seed=7)
    cov = empirical_coverage(
        p, gaussian_sampler(), coverage_alpha=0.1,
        n_calib=200, n_test=500, n_trials=60, seed=3,
    )
    n = 200
    lo, hi = 0.9, 0.9 + 1.0 / (n + 1)
    assert lo - 0.02 <= cov <= hi + 0.02


def test_coverage_with_infinite_threshold():
    p = random_params(1, 2, 3, 4, seed=0)
    cov = empirical_coverage(
        p, gaussian_sampler(), coverage_alpha=0.01,
        n_calib=5, n_test=50, n_trials=10, seed=0,
    )
    assert cov == 1.0


def test_degenerate_point_mass_sampler():
    p = random_params(1, 2, 3, 4, seed=0)

    def atom(rng, size):
        return np.zeros((size, 3)), np.full((size, 4), 0.5)

    cov = empirical_coverage(p, atom, 0.2, n_calib=20, n_test=20, n_trials=5, seed=1)
    assert cov == 1.0


def test_coverage_deterministic_given_seed():
    p = random_params(1, 3, 3, 4, seed=4)
    kw = dict(coverage_alpha=0.15, n_calib=40, n_test=100, n_trials=8, seed=9)
    assert empirical_coverage(p, gaussian_sampler(), **kw) == empirical_coverage(
        p, gaussian_sampler(), **kw
    )
