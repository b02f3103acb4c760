import math

import numpy as np
import pytest

from dddopt import (
    DataGrid,
    LossModel,
    SubsetError,
    estimate_constants,
    loss_value,
    masked_gradient,
    per_obs_gradient,
    subblock_gradient,
)

SMOOTH = ("least_squares", "logistic", "smoothed_hinge")


def _rand_grid(rng, N=12, M=7, labels="pm1"):
    X = rng.normal(size=(N, M))
    if labels == "pm1":
        y = np.where(rng.random(N) < 0.5, -1.0, 1.0)
    else:
        y = rng.normal(size=N)
    return DataGrid(X, y)


# scalar loss values and derivatives at hand-computed points


def test_least_squares_scalar():
    m = LossModel("least_squares")
    assert m.value(3.0, 1.0) == 2.0          # 0.5 * (3-1)^2
    assert m.deriv(3.0, 1.0) == 2.0


def test_hinge_scalar():
    m = LossModel("hinge")
    assert m.value(0.2, 1.0) == pytest.approx(0.8)
    assert m.deriv(0.2, 1.0) == -1.0
    assert m.value(2.0, 1.0) == 0.0
    assert m.deriv(2.0, 1.0) == 0.0
    # margin exactly at the kink counts as flat
    assert m.deriv(1.0, 1.0) == 0.0


def test_smoothed_hinge_scalar():
    m = LossModel("smoothed_hinge")
    assert m.value(0.5, 1.0) == pytest.approx(0.125)   # 0.5*(0.5)^2
    assert m.deriv(0.5, 1.0) == pytest.approx(-0.5)
    assert m.deriv(1.5, 1.0) == 0.0


def test_logistic_scalar():
    m = LossModel("logistic")
    assert m.value(0.0, 1.0) == pytest.approx(math.log(2.0))
    assert m.deriv(0.0, 1.0) == pytest.approx(-0.5)
    assert m.deriv(0.0, -1.0) == pytest.approx(0.5)


def test_unknown_kind_rejected():
    with pytest.raises(ValueError):
        LossModel("huber")


# full-objective values


def test_loss_value_perfect_fit_is_zero():
    X = np.array([[1.0, 2.0], [0.0, 1.0], [3.0, -1.0]])
    w = np.array([0.5, -0.25])
    g = DataGrid(X, X @ w)
    assert loss_value(LossModel("least_squares"), g, w) == 0.0


def test_loss_value_hinge_at_origin_is_one():
    g = _rand_grid(np.random.default_rng(0))
    assert loss_value(LossModel("hinge"), g, np.zeros(g.M)) == 1.0


def test_loss_value_logistic_single_row():
    g = DataGrid(np.array([[1.0]]), np.array([1.0]))
    assert loss_value(LossModel("logistic"), g, np.zeros(1)) == pytest.approx(math.log(2.0))


def test_loss_value_l2_term():
    g = _rand_grid(np.random.default_rng(1))
    w = np.ones(g.M)
    base = loss_value(LossModel("hinge"), g, w)
    reg = loss_value(LossModel("hinge", l2_reg=0.5), g, w)
    assert reg == pytest.approx(base + 0.25 * g.M)


def test_loss_value_mean_matches_hand_sum():
    rng = np.random.default_rng(2)
    g = _rand_grid(rng, labels="reg")
    w = rng.normal(size=g.M)
    m = LossModel("least_squares")
    hand = sum(0.5 * (g.X[j] @ w - g.y[j]) ** 2 for j in range(g.N)) / g.N
    assert loss_value(m, g, w) == pytest.approx(hand, rel=1e-14)


# per-observation gradients


def test_per_obs_gradient_worked():
    g = DataGrid(np.array([[1.0, 2.0]]), np.array([1.0]))
    out = per_obs_gradient(LossModel("least_squares"), g, 0, np.array([1.0, 1.0]))
    np.testing.assert_allclose(out, [2.0, 4.0])


def test_per_obs_gradient_hinge_flat_region():
    g = DataGrid(np.array([[1.0, 2.0]]), np.array([1.0]))
    out = per_obs_gradient(LossModel("hinge"), g, 0, np.array([1.0, 1.0]))
    np.testing.assert_array_equal(out, [0.0, 0.0])


def test_per_obs_gradient_regularized_mode():
    g = DataGrid(np.array([[1.0, 2.0]]), np.array([1.0]))
    w = np.array([1.0, 1.0])
    m = LossModel("least_squares", l2_reg=0.1)
    plain = per_obs_gradient(m, g, 0, w)
    reg = per_obs_gradient(m, g, 0, w, regularized=True)
    np.testing.assert_allclose(reg, plain + 0.1 * w)


def test_per_obs_gradient_bad_row():
    g = _rand_grid(np.random.default_rng(3))
    with pytest.raises(IndexError):
        per_obs_gradient(LossModel("hinge"), g, g.N, np.zeros(g.M))


@pytest.mark.parametrize("kind", SMOOTH)
def test_per_obs_gradient_finite_differences(kind):
    # central differences at step 1e-6, relative 1e-5, 50 random cases
    rng = np.random.default_rng(11)
    m = LossModel(kind)
    labels = "reg" if kind == "least_squares" else "pm1"
    for _ in range(50):
        g = _rand_grid(rng, N=6, M=5, labels=labels)
        w = rng.normal(size=5)
        j = int(rng.integers(6))
        grad = per_obs_gradient(m, g, j, w)
        h = 1e-6
        for k in range(5):
            e = np.zeros(5)
            e[k] = h
            zp = g.X[j] @ (w + e)
            zm = g.X[j] @ (w - e)
            fd = (m.value(zp, g.y[j]) - m.value(zm, g.y[j])) / (2 * h)
            assert grad[k] == pytest.approx(fd, rel=1e-5, abs=1e-9)


# masked gradients


def test_masked_full_sets_equal_per_obs():
    rng = np.random.default_rng(4)
    g = _rand_grid(rng)
    w = rng.normal(size=g.M)
    m = LossModel("logistic")
    full = np.arange(g.M)
    np.testing.assert_array_equal(
        masked_gradient(m, g, 3, w, full, full), per_obs_gradient(m, g, 3, w)
    )


def test_masked_worked_example():
    g = DataGrid(np.array([[1.0, 2.0]]), np.array([1.0]))
    out = masked_gradient(
        LossModel("least_squares"), g, 0, np.array([1.0, 1.0]), np.array([0, 1]), np.array([0])
    )
    np.testing.assert_allclose(out, [2.0, 0.0])


def test_masked_margin_uses_b_only():
    # dropping feature 1 from B changes the margin, not just the output mask
    g = DataGrid(np.array([[1.0, 2.0]]), np.array([1.0]))
    out = masked_gradient(
        LossModel("least_squares"), g, 0, np.array([1.0, 1.0]), np.array([0]), np.array([0])
    )
    # z over B is 1.0, residual 0, so the gradient vanishes
    np.testing.assert_array_equal(out, [0.0, 0.0])


def test_masked_empty_c_gives_zero():
    rng = np.random.default_rng(5)
    g = _rand_grid(rng)
    out = masked_gradient(
        LossModel("hinge"), g, 0, np.zeros(g.M), np.arange(g.M), np.array([], dtype=int)
    )
    np.testing.assert_array_equal(out, np.zeros(g.M))


def test_masked_support_inside_c():
    rng = np.random.default_rng(6)
    g = _rand_grid(rng)
    w = rng.normal(size=g.M)
    B = np.array([0, 2, 3, 5, 6])
    C = np.array([2, 5])
    out = masked_gradient(LossModel("logistic"), g, 1, w, B, C)
    outside = np.setdiff1d(np.arange(g.M), C)
    np.testing.assert_array_equal(out[outside], 0.0)


def test_masked_rejects_c_outside_b():
    g = _rand_grid(np.random.default_rng(7))
    with pytest.raises(SubsetError):
        masked_gradient(
            LossModel("hinge"), g, 0, np.zeros(g.M), np.array([0, 1]), np.array([2])
        )


def test_masked_brute_force_oracle():
    rng = np.random.default_rng(8)
    g = _rand_grid(rng, N=5, M=6)
    w = rng.normal(size=6)
    m = LossModel("smoothed_hinge")
    B = np.array([0, 1, 3, 4])
    C = np.array([1, 4])
    out = masked_gradient(m, g, 2, w, B, C)
    z = sum(g.X[2, k] * w[k] for k in B)
    expect = np.zeros(6)
    for k in C:
        expect[k] = m.deriv(z, g.y[2]) * g.X[2, k]
    np.testing.assert_allclose(out, expect, rtol=1e-14)


# sub-block gradients


def test_subblock_worked_example():
    g = DataGrid(np.array([[2.0]]), np.array([1.0])).with_scheme(1, 1)
    out = subblock_gradient(
        LossModel("least_squares"), g, 1, 1, 1, 0, np.array([1.0])
    )
    np.testing.assert_allclose(out, [2.0])


def test_subblock_zero_residual():
    g = DataGrid(np.array([[2.0]]), np.array([0.0])).with_scheme(1, 1)
    out = subblock_gradient(
        LossModel("least_squares"), g, 1, 1, 1, 0, np.array([0.0])
    )
    np.testing.assert_array_equal(out, [0.0])


def test_subblock_hinge_flat():
    g = DataGrid(np.array([[2.0]]), np.array([1.0])).with_scheme(1, 1)
    out = subblock_gradient(LossModel("hinge"), g, 1, 1, 1, 0, np.array([1.0]))
    np.testing.assert_array_equal(out, [0.0])


def test_subblock_brute_force_oracle():
    rng = np.random.default_rng(9)
    N, M, P, Q = 8, 12, 2, 3
    g = DataGrid(rng.normal(size=(N, M)), np.where(rng.random(N) < 0.5, -1.0, 1.0))
    g = g.with_scheme(P, Q)
    m = LossModel("logistic")
    s = g.scheme
    for p in range(1, P + 1):
        for q in range(1, Q + 1):
            for k in range(1, P + 1):
                lo = (q - 1) * s.m + (k - 1) * s.mt
                hi = lo + s.mt
                j_local = int(rng.integers(s.n))
                j = (p - 1) * s.n + j_local
                w_sub = rng.normal(size=s.mt)
                z = g.X[j, lo:hi] @ w_sub
                expect = m.deriv(z, g.y[j]) * g.X[j, lo:hi]
                got = subblock_gradient(m, g, p, q, k, j_local, w_sub)
                np.testing.assert_allclose(got, expect, rtol=1e-14)


# measured constants


def test_m3_least_squares_single_row():
    g = DataGrid(np.array([[1.0, 0.0]]), np.array([1.0]))
    tc = estimate_constants(LossModel("least_squares"), g)
    assert tc.m3 == 1.0


def test_m3_logistic_quarter_curvature():
    g = DataGrid(np.array([[2.0, 0.0], [1.0, 1.0]]), np.array([1.0, -1.0]))
    tc = estimate_constants(LossModel("logistic"), g)
    assert tc.m3 == 1.0  # max ||x||^2 = 4 times 1/4


def test_m3_hinge_warns_and_borrows_smoothed_curvature():
    g = DataGrid(np.array([[2.0, 0.0]]), np.array([1.0]))
    with pytest.warns(RuntimeWarning):
        hinge_tc = estimate_constants(LossModel("hinge"), g)
    smooth_tc = estimate_constants(LossModel("smoothed_hinge"), g)
    assert hinge_tc.m3 == smooth_tc.m3


def test_m4_singleton_is_zero():
    g = DataGrid(np.array([[1.0, 2.0]]), np.array([1.0]))
    tc = estimate_constants(LossModel("least_squares"), g)
    assert tc.m4 == 0.0


def test_m4_matches_hand_formula():
    rng = np.random.default_rng(10)
    g = _rand_grid(rng, N=9, M=4, labels="reg")
    m = LossModel("least_squares")
    w = np.zeros(4)
    tc = estimate_constants(m, g, w)
    grads = [per_obs_gradient(m, g, j, w) for j in range(9)]
    full = np.mean(grads, axis=0)
    m4_sq = sum(gv @ gv - full @ full for gv in grads) / (9 - 1)
    assert tc.m4 == pytest.approx(math.sqrt(m4_sq), rel=1e-12)


def test_constants_marked_measured():
    g = _rand_grid(np.random.default_rng(12))
    tc = estimate_constants(LossModel("logistic"), g)
    assert tc.provenance["m3"] == "measured"
    assert tc.provenance["m4"] == "measured"
