import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mortemu import NotPositiveDefiniteError, RngStream, SingularMatrixError
from mortemu.numcore import (
    cholesky,
    log_det_from_factor,
    sample_normal,
    sample_zero_modified_normal,
    solve_spd,
)


def random_spd(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n))
    return a @ a.T + n * np.eye(n)


def test_cholesky_hand_example():
    L, delta = cholesky(np.array([[4.0, 2.0], [2.0, 3.0]]))
    assert delta == 0.0
    np.testing.assert_allclose(L, [[2.0, 0.0], [1.0, np.sqrt(2.0)]], atol=1e-15)


def test_cholesky_identity():
    L, delta = cholesky(np.eye(5))
    assert delta == 0.0
    np.testing.assert_array_equal(L, np.eye(5))


def test_cholesky_rank_one_needs_jitter():
    a = np.ones((2, 2))
    L, delta = cholesky(a)
    assert delta > 0
    assert np.max(np.abs(L @ L.T - (a + delta * np.eye(2)))) < 1e-10


def test_cholesky_rejects_bad_input():
    with pytest.raises(ValueError):
        cholesky(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        cholesky(np.ones((2, 3)))
    with pytest.raises(NotPositiveDefiniteError):
        cholesky(np.array([[1.0, 0.0], [0.0, -1.0]]))


def test_solve_spd_examples():
    np.testing.assert_array_equal(solve_spd(np.eye(2), np.array([3.0, 7.0])), [3.0, 7.0])
    L = np.array([[2.0, 0.0], [1.0, np.sqrt(2.0)]])
    np.testing.assert_allclose(solve_spd(L, np.array([8.0, 7.0])), [1.25, 1.5], atol=1e-14)


def test_solve_spd_errors():
    with pytest.raises(ValueError):
        solve_spd(np.eye(3), np.ones(2))
    with pytest.raises(SingularMatrixError):
        solve_spd(np.diag([1.0, 0.0]), np.ones(2))


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 12), seed=st.integers(0, 2**32 - 1))
def test_factor_and_solve_properties(n, seed):
    a = random_spd(n, seed)
    L, delta = cholesky(a)
    assert delta == 0.0
    norm = np.max(np.abs(a))
    assert np.max(np.abs(L @ L.T - a)) <= 1e-9 * norm
    b = np.random.default_rng(seed + 1).normal(size=n)
    x = solve_spd(L, b)
    resid = np.max(np.abs(a @ x - b))
    assert resid <= 1e-8 * (np.max(np.abs(a).sum(axis=1)) * np.max(np.abs(x)) + np.max(np.abs(b)))
    assert log_det_from_factor(L) == pytest.approx(np.linalg.slogdet(a)[1], rel=1e-10, abs=1e-10)


def test_solve_spd_matrix_rhs():
    a = random_spd(6, 3)
    b = np.random.default_rng(4).normal(size=(6, 3))
    L, _ = cholesky(a)
    assert np.max(np.abs(a @ solve_spd(L, b) - b)) < 1e-9


def test_streams_reproducible_and_independent():
    a = RngStream(7, 3).normal(1000)
    b = RngStream(7, 3).normal(1000)
    np.testing.assert_array_equal(a, b)
    c = RngStream(7, 4).normal(100_000)
    d = RngStream(7, 3).normal(100_000)
    assert abs(np.corrcoef(c, d)[0, 1]) < 0.01
    np.testing.assert_array_equal(RngStream(7, 3).spawn(2).uniform(5),
                                  RngStream(7, (3, 2)).uniform(5))
    with pytest.raises(ValueError):
        RngStream(-1)


def test_sample_normal():
    assert sample_normal(RngStream(1), 5.0, 0.0) == 5.0
    z = sample_normal(RngStream(1), 0.0, 1.0, 1_000_000)
    assert abs(z.mean()) < 0.005
    assert abs(z.var() - 1.0) < 0.01
    with pytest.raises(ValueError):
        sample_normal(RngStream(1), 0.0, -1.0)


def test_zero_modified_normal():
    assert np.all(sample_zero_modified_normal(RngStream(2), 0.0, 1.0, 1.0, 1000) == 0.0)
    plain = sample_zero_modified_normal(RngStream(2), 1.0, 0.0, 1.0, 1000)
    assert np.all(plain != 0.0)
    x = sample_zero_modified_normal(RngStream(2), 0.0436, 0.8393, 1.4316, 1_000_000)
    se = x.std(ddof=1) / 1000.0
    assert abs(x.mean() - 0.0436 * 0.8393) < 3 * se
    with pytest.raises(ValueError):
        sample_zero_modified_normal(RngStream(2), 1.5, 0.0, 1.0)
