"""Convolution quadrature and the two effective source models.

Oracles used here:

  * interval integrals of C/sqrt(t_n - u) have the primitive closed form
    2C(sqrt(t_n - t_{k-1}) - sqrt(t_n - t_k)), and telescope so that step
    data yields -dp * 2C (sqrt(t_{n+1}) - sqrt(t_n))/dt exactly;
  * the history weights D^n_k are positive and sum to 2C sqrt(dt^n) on
    any strictly increasing grid;
  * the scheme form assembled from history_sum must reproduce the direct
    evaluation of the source (two independent routes to Q^{n+1/2});
  * with constant alpha the warped model collapses to the fixed model
    with constant C sqrt(alpha); with variable alpha it equals the fixed
    model evaluated on the rescaled grid tau = cumsum(alpha dt), scaled
    back by alpha per interval (exact discrete change of variables).
"""
import numpy as np
import pytest

from dualporo.effective import (QuadratureTable, exchange_fixed_kernel,
                                exchange_warped_kernel, fixed_kernel_constant,
                                history_sum, running_range_alpha,
                                warped_kernel_constant)
from dualporo.timegrid import blocked_geometric_times


def random_grid(rng, n=50, lo=0.01, hi=1.0):
    return np.concatenate(([0.0], np.cumsum(rng.uniform(lo, hi, n))))


# ----------------------------------------------------------- constants

def test_kernel_constants_closed_forms():
    c_fixed = fixed_kernel_constant(2, 0.35, 1e-13, 5e6)
    assert c_fixed == pytest.approx(4.0 * np.sqrt(0.35 * 1e-13 * 5e6 / np.pi),
                                    rel=1e-15)
    c_warp = warped_kernel_constant(2, 0.35, 1e-13)
    assert c_fixed == pytest.approx(c_warp * np.sqrt(5e6), rel=1e-14)
    assert warped_kernel_constant(2, 0.35, 1e-13, dimension_factor=False) \
        == pytest.approx(c_warp / 2.0, rel=1e-15)


# ----------------------------------------------------------- quadrature

def test_equidistant_weights_frozen_values():
    table = QuadratureTable(np.arange(4.0), 1.0)
    j = table.equidistant_weights(2, 1.0)
    assert j[0] == pytest.approx(2.0, rel=1e-15)
    assert j[1] == pytest.approx(0.8284271247461902, rel=1e-14)
    assert float(table.row(3)[0]) == pytest.approx(
        2.0 * (np.sqrt(3.0) - np.sqrt(2.0)), rel=1e-12)


def test_row_matches_primitive_difference_form():
    rng = np.random.default_rng(101)
    for _ in range(20):
        t = random_grid(rng, n=40)
        table = QuadratureTable(t, 0.7)
        n = rng.integers(1, 41)
        back = t[n] - t[: n + 1]
        naive = 2.0 * 0.7 * (np.sqrt(back[:-1]) - np.sqrt(back[1:]))
        assert np.allclose(table.row(n), naive, rtol=1e-11, atol=0.0)


def test_history_weights_positive_and_sum_identity():
    rng = np.random.default_rng(202)
    for _ in range(30):
        t = random_grid(rng, n=30)
        table = QuadratureTable(t, 1.3)
        for n in (0, 5, 17, 29):
            d = table.d_row(n)
            assert (d[1:] > 0.0).all()
            total = 2.0 * 1.3 * np.sqrt(t[n + 1] - t[n])
            assert d.sum() == pytest.approx(total, rel=1e-12)


def test_uniform_grid_shift_invariance():
    t = np.linspace(0.0, 7.0, 36)
    dt = t[1] - t[0]
    table = QuadratureTable(t, 0.9)
    for n in (1, 10, 34):
        row = table.row(n)
        row_next = table.row(n + 1)
        assert np.allclose(row_next[1:], row, rtol=1e-12, atol=0.0)
        assert np.allclose(row, table.equidistant_weights(n, dt)[::-1],
                           rtol=1e-12, atol=0.0)


def test_validate_accepts_arbitrary_monotone_grids():
    # D^n_0 equals 2C(sqrt(t_{n+1}-t_0) - sqrt(t_n-t_0)) by telescoping,
    # so the scheme is sign-stable on every strictly increasing grid
    rng = np.random.default_rng(303)
    QuadratureTable(np.linspace(0.0, 10.0, 21), 1.0).validate()
    QuadratureTable(blocked_geometric_times(100.0, 0.5, 8, 1.3), 1.0).validate()
    for _ in range(10):
        QuadratureTable(random_grid(rng, n=40), 0.7).validate()


def test_table_validation_errors():
    with pytest.raises(ValueError):
        QuadratureTable(np.array([0.0, 1.0, 1.0]), 1.0)
    table = QuadratureTable(np.array([0.0, 1.0, 2.0]), 1.0)
    with pytest.raises(ValueError):
        table.row(0)
    with pytest.raises(ValueError):
        table.row(3)
    with pytest.raises(ValueError):
        history_sum(np.zeros(2), table, 2)


# ------------------------------------------------------- fixed kernel

def test_fixed_kernel_constant_data_is_exactly_zero():
    t = np.linspace(0.0, 5.0, 11)
    q = exchange_fixed_kernel(np.full(11, 0.37), t, 2.0)
    assert np.all(q == 0.0)


def test_fixed_kernel_step_data_closed_form():
    rng = np.random.default_rng(404)
    t = random_grid(rng, n=30)
    wall = np.full(len(t), 0.8)
    wall[0] = 0.3
    c = 1.7
    q = exchange_fixed_kernel(wall, t, c)
    expected = -0.5 * 2.0 * c * np.diff(np.sqrt(t)) / np.diff(t)
    assert np.allclose(q, expected, rtol=1e-12, atol=0.0)


def test_fixed_kernel_scheme_form_agrees_with_direct_evaluation():
    # dual route: the direct I-form against the D-form used by the
    # implicit solver, Q = -(p^{n+1} sum(D) - history_sum)/dt
    rng = np.random.default_rng(505)
    t = random_grid(rng, n=25)
    wall = rng.uniform(0.1, 0.9, len(t))
    c = 0.6
    q = exchange_fixed_kernel(wall, t, c)
    table = QuadratureTable(t, c)
    for n in range(table.n_steps):
        d = table.d_row(n)
        scheme = -(wall[n + 1] * d.sum()
                   - float(history_sum(wall, table, n))) / (t[n + 1] - t[n])
        assert q[n] == pytest.approx(scheme, rel=1e-10, abs=1e-14)


def test_history_sum_broadcasts_over_columns():
    rng = np.random.default_rng(606)
    t = random_grid(rng, n=10)
    table = QuadratureTable(t, 1.0)
    p = rng.uniform(0.0, 1.0, (len(t), 3))
    full = history_sum(p, table, 6)
    for j in range(3):
        assert full[j] == pytest.approx(float(history_sum(p[:, j], table, 6)),
                                        rel=1e-14)


def test_fixed_kernel_validates_sampling():
    with pytest.raises(ValueError):
        exchange_fixed_kernel(np.zeros(3), np.linspace(0.0, 1.0, 5), 1.0)


# ------------------------------------------------------- warped kernel

def test_warped_kernel_reduces_to_fixed_for_constant_alpha():
    rng = np.random.default_rng(707)
    t = random_grid(rng, n=30)
    wall = rng.uniform(0.1, 0.9, len(t))
    a = 3.7e6
    c = 4.2e-7
    q_warp = exchange_warped_kernel(wall, np.full(len(t), a), t, c)
    q_fixed = exchange_fixed_kernel(wall, t, c * np.sqrt(a))
    scale = np.abs(q_fixed).max()
    assert np.abs(q_warp - q_fixed).max() <= 1e-10 * scale


def test_warped_kernel_is_fixed_kernel_in_rescaled_time():
    # exact discrete change of variables: with tau = cumsum(alpha dt),
    # Q_warped(t) = alpha * Q_fixed evaluated on the tau grid
    rng = np.random.default_rng(808)
    t = random_grid(rng, n=30)
    wall = rng.uniform(0.1, 0.9, len(t))
    alpha = rng.uniform(0.5, 4.0, len(t))
    c = 0.9
    q_warp = exchange_warped_kernel(wall, alpha, t, c)
    tau = np.concatenate(([0.0], np.cumsum(alpha[1:] * np.diff(t))))
    q_fixed = exchange_fixed_kernel(wall, tau, c)
    scale = np.abs(q_warp).max()
    assert np.abs(q_warp - alpha[1:] * q_fixed).max() <= 1e-12 * scale


def test_warped_kernel_constant_data_is_exactly_zero():
    t = np.linspace(0.0, 5.0, 11)
    q = exchange_warped_kernel(np.full(11, 0.4), np.full(11, 2.0), t, 1.0)
    assert np.all(q == 0.0)


def test_warped_kernel_validation():
    t = np.linspace(0.0, 1.0, 5)
    with pytest.raises(ValueError):
        exchange_warped_kernel(np.zeros(4), np.ones(5), t, 1.0)
    with pytest.raises(ValueError):
        exchange_warped_kernel(np.zeros(5), np.ones(4), t, 1.0)
    bad = np.ones(5)
    bad[2] = -1.0
    with pytest.raises(ValueError):
        exchange_warped_kernel(np.zeros(5), bad, t, 1.0)


# ------------------------------------------------- running range alpha

def test_running_range_alpha_matches_manual_accumulation(sim1_cset):
    rng = np.random.default_rng(909)
    wall = rng.uniform(0.1, 0.9, 24)
    vg = sim1_cset.matrix.vg
    got = running_range_alpha(wall, vg, sim1_cset.fluids)
    beta = sim1_cset.matrix_beta
    assert got[0] == pytest.approx(float(sim1_cset.matrix_alpha(wall[0])),
                                   rel=1e-12)
    for k in range(1, len(wall)):
        lo = wall[: k + 1].min()
        hi = wall[: k + 1].max()
        expected = (beta(hi) - beta(lo)) / (hi - lo)
        assert got[k] == pytest.approx(float(expected), rel=1e-12)
