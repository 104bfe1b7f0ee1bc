import numpy as np
import pytest

from expander_lab import (DriftedOperator, barrier_radius, extend_asymptotic,
                          plane, solve_decaying, solve_dirichlet_ball,
                          sphere_cap, trace_at_infinity)
from expander_lab._numerics import apply_stencil, smooth_bump, smooth_step
from expander_lab._numerics import eigs_sym_tridiag


def test_mode_validation(flat):
    with pytest.raises(ValueError, match="nonnegative"):
        DriftedOperator(flat, mode=-1)
    with pytest.raises(ValueError, match="nonnegative"):
        DriftedOperator(flat, mode=0.5)


def test_constant_function_mode0(flat):
    # L 1 = -1/2 at every node, axis and end rows included
    op = DriftedOperator(flat, mode=0)
    out = op.apply(np.ones(flat.rho.size))
    np.testing.assert_allclose(out, -0.5, rtol=0, atol=1e-11)


def test_gaussian_eigenfunction_on_plane(flat):
    # on the flat plane, exp(-rho^2/4) is an exact eigenfunction with
    # eigenvalue -(n+1)/2
    op = DriftedOperator(flat, mode=0)
    u0 = np.exp(-flat.rho**2 / 4.0)
    resid = op.apply(u0) + 0.5 * (flat.n + 1) * u0
    assert np.max(np.abs(resid[:-1])) < 5e-5


def test_symmetric_system_plane_ladder(flat):
    # self-adjoint realization in the Gaussian-weighted space: eigenvalues
    # -(n+1)/2 - j, j = 0, 1, 2, ...
    op = DriftedOperator(flat, mode=0)
    diag, off, log_cell = op.symmetric_system(0, flat.rho.size - 1)
    eigs = np.sort(np.abs(eigs_sym_tridiag(diag, off, k=4)))
    np.testing.assert_allclose(eigs, [1.5, 2.5, 3.5, 4.5], atol=1e-4)
    assert log_cell.size == flat.rho.size - 1


def test_symmetric_system_needs_limit_row(flat):
    # modes >= 1 hold node 0 as a Dirichlet boundary
    op = DriftedOperator(flat, mode=1)
    with pytest.raises(ValueError, match="node 0 is a boundary"):
        op.tridiagonal_rows(0, 100)


def test_grouped_and_raw_coefficients_agree(flat):
    # for modes >= 1 the singular pair is regrouped through (phi/rho)';
    # both discretizations are second order, so they agree to stencil level
    op = DriftedOperator(flat, mode=2)
    phi = smooth_bump(flat.rho, 3.0, 9.0)
    W1, W2 = flat.stencils()
    sl = slice(2, -2)
    raw = (op.c2[sl] * apply_stencil(W2, phi)[sl]
           + op.c1[sl] * apply_stencil(W1, phi)[sl]
           + op.c0[sl] * phi[sl])
    grouped = op.apply(phi)[sl]
    assert np.max(np.abs(raw - grouped)) < 5e-5


def test_rows_reproduce_apply(flat):
    op = DriftedOperator(flat, mode=0)
    size = flat.rho.size
    lower, diag, upper = op.tridiagonal_rows(2, size - 2)
    v = np.sin(flat.rho)
    act = (lower * v[1:size - 3] + diag * v[2:size - 2]
           + upper * v[3:size - 1])
    np.testing.assert_allclose(act, op.apply(v)[2:size - 2],
                               rtol=0, atol=1e-11)


def test_dirichlet_ball_recovers_manufactured(flat):
    # f built by the same discrete operator: the ball solve inverts exactly
    op = DriftedOperator(flat, mode=0)
    u_true = smooth_bump(flat.rho, 1.0, 4.0)
    f = op.apply(u_true)
    sol = solve_dirichlet_ball(op, f, 8.0)
    assert np.max(np.abs(sol.values - u_true[:sol.values.size])) < 1e-12


def test_dirichlet_ball_boundary_value(flat):
    op = DriftedOperator(flat, mode=0)
    sol = solve_dirichlet_ball(op, np.zeros(flat.rho.size), 10.0,
                               boundary=0.7)
    assert sol.values[-1] == 0.7
    assert sol.axis[-1] <= 10.0 < sol.axis[-1] + 0.02


def test_dirichlet_ball_too_small(flat):
    op = DriftedOperator(flat, mode=0)
    with pytest.raises(ValueError, match="ball too small"):
        solve_dirichlet_ball(op, np.zeros(flat.rho.size), 0.02)


def test_dirichlet_ball_bound_random_sources(trio, rng):
    # |u| <= 2 sup|f| + sup boundary |u| with the barrier constant 2 = 1/inf(-c0)
    for curve in trio:
        op = DriftedOperator(curve, mode=0)
        for _ in range(5):
            f = rng.uniform(-1.0, 1.0, curve.rho.size)
            sol = solve_dirichlet_ball(op, f, 12.0)
            bound = 2.0 * np.max(np.abs(f)) + abs(sol.values[-1])
            assert np.max(np.abs(sol.values)) <= bound


def test_solve_decaying_settles(flat):
    op = DriftedOperator(flat, mode=0)
    u_true = smooth_bump(flat.rho, 1.0, 4.0)
    f = op.apply(u_true)
    fld, report = solve_decaying(op, f)
    assert np.max(np.abs(fld.values - u_true)) < 1e-12
    assert len(report["radii"]) == 4
    assert report["diffs"][-1] < 1e-12
    assert report["gate_slope"] is None or report["gate_slope"] <= 0.25


def test_solve_decaying_rejects_growing_source(flat):
    op = DriftedOperator(flat, mode=0)
    with pytest.raises(ValueError, match="not in the decaying class"):
        solve_decaying(op, flat.rho**2)


def test_barrier_radius_plane_crossover(flat):
    # flat case closed form: margin flips sign at r^2 = 2 d (d + n - 2),
    # which is sqrt(2) for |d| = 1, n = 2
    op = DriftedOperator(flat, mode=0)
    h = flat.rho[1] - flat.rho[0]
    for d in (1.0, -1.0):
        r0 = barrier_radius(op, d)
        assert abs(r0 - np.sqrt(2.0)) <= 2.0 * h


def test_barrier_radius_finite_on_expanders(trio):
    for curve in trio:
        op = DriftedOperator(curve, mode=0)
        for d in (1.0, -1.0):
            r0 = barrier_radius(op, d)
            assert np.isfinite(r0)
            assert 0.0 < r0 < curve.span()


def test_extend_asymptotic_zero_trace(expander_half):
    op = DriftedOperator(expander_half, mode=0)
    fld, report = extend_asymptotic(op, 0.0)
    assert np.all(fld.values == 0.0)
    assert report["radii"] == []


def test_extend_asymptotic_needs_cone():
    cap = sphere_cap(2.0, n=2, frac=0.25, nodes=400)
    op = DriftedOperator(cap, mode=0)
    with pytest.raises(ValueError, match="conical"):
        extend_asymptotic(op, 1.0)


def test_extend_asymptotic_needs_room_for_the_cutoff(expander_half):
    # on a span-20 surface the smallest exhaustion ball lands inside the
    # cutoff band, so the Cauchy contract is honestly unmeetable
    op = DriftedOperator(expander_half, mode=0)
    with pytest.raises(RuntimeError, match="not Cauchy"):
        extend_asymptotic(op, 1.0)


def test_extend_asymptotic_prescribes_trace(long_half):
    op = DriftedOperator(long_half, mode=0)
    fld, report = extend_asymptotic(op, 1.0)
    tr = trace_at_infinity(fld, 1)
    assert tr.value == pytest.approx(1.0, rel=0.02)
    assert all(q >= 2.0 for q in report["ratios"])
    # interior discrete residual of the extension vanishes
    resid = op.apply(fld.values)
    r = long_half.radius()
    inner = (r > 0.1) & (r < report["radii"][-1] / 2.0)
    assert np.max(np.abs(resid[inner])) < 1e-9
    # the correction beyond the cutoff decays
    chi = smooth_step((r - 4.0) / 4.0)
    v = fld.values - chi * r
    tail = np.abs(v[(r > 16.0) & (r < 48.0)])
    assert np.max(tail) < 0.1 * np.max(np.abs(v))
