import numpy as np
import pytest

from expander_lab._numerics import (apply_stencil, derivative_weights,
                                    eigs_sym_tridiag,
                                    inverse_iteration_tridiag,
                                    logsum_quadrature, singular_values_tridiag,
                                    smooth_bump, smooth_step, solve_tridiag,
                                    trapezoid_weights)


def test_stencils_exact_on_quadratics(rng):
    # 3-point weights must reproduce polynomials of degree 2 everywhere,
    # one-sided end rows included
    x = np.sort(rng.uniform(0.0, 10.0, 40))
    f = 3.0 * x**2 - 2.0 * x + 1.0
    W1, W2 = derivative_weights(x)
    np.testing.assert_allclose(apply_stencil(W1, f), 6.0 * x - 2.0,
                               rtol=0, atol=1e-10)
    np.testing.assert_allclose(apply_stencil(W2, f), 6.0, rtol=0, atol=1e-9)


def test_stencils_second_order_interior():
    errs = []
    for nodes in (100, 200):
        x = np.linspace(0.0, np.pi, nodes)
        d = apply_stencil(derivative_weights(x)[0], np.sin(x))
        errs.append(np.max(np.abs(d - np.cos(x))[1:-1]))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def test_trapezoid_weights_integrate_linear(rng):
    x = np.sort(rng.uniform(0.0, 5.0, 30))
    w = trapezoid_weights(x)
    assert np.sum(w) == pytest.approx(x[-1] - x[0], rel=1e-14)
    assert np.sum(w * x) == pytest.approx((x[-1]**2 - x[0]**2) / 2.0,
                                          rel=1e-13)


def test_smooth_step_clamps_and_increases():
    s = np.linspace(-0.5, 1.5, 101)
    y = smooth_step(s)
    assert y[0] == 0.0 and y[-1] == 1.0
    assert np.all(np.diff(y) >= 0.0)
    assert smooth_step(0.5) == pytest.approx(0.5)


def test_smooth_bump_support_and_peak():
    x = np.linspace(0.0, 10.0, 2001)
    b = smooth_bump(x, 3.0, 7.0)
    assert np.all(b[(x <= 3.0) | (x >= 7.0)] == 0.0)
    assert b[x == 5.0] == pytest.approx(1.0)
    # flat contact at the edges: values near the boundary are already tiny
    assert np.max(b[(x > 3.0) & (x < 3.05)]) < 1e-8


def test_solve_tridiag_matches_dense(rng):
    n = 60
    lower = rng.normal(size=n)
    upper = rng.normal(size=n)
    diag = 4.0 + rng.random(n)
    rhs = rng.normal(size=n)
    A = np.diag(diag) + np.diag(lower[1:], -1) + np.diag(upper[:-1], 1)
    np.testing.assert_allclose(solve_tridiag(lower, diag, upper, rhs),
                               np.linalg.solve(A, rhs), rtol=1e-10)


def test_singular_values_match_dense_svd(rng):
    n = 40
    lower = rng.normal(size=n)
    upper = rng.normal(size=n)
    diag = rng.normal(size=n)
    A = np.diag(diag) + np.diag(lower[1:], -1) + np.diag(upper[:-1], 1)
    got = singular_values_tridiag(lower, diag, upper, k=5)
    want = np.sort(np.linalg.svd(A, compute_uv=False))[:5]
    np.testing.assert_allclose(got, want, rtol=1e-8, atol=1e-10)


def test_eigs_sym_tridiag_near_zero(rng):
    n = 50
    diag = rng.normal(size=n)
    off = rng.normal(size=n - 1)
    A = np.diag(diag) + np.diag(off, -1) + np.diag(off, 1)
    want = np.linalg.eigvalsh(A)
    want = want[np.argsort(np.abs(want))][:4]
    got = eigs_sym_tridiag(diag, off, k=4)
    np.testing.assert_allclose(np.sort(np.abs(got)), np.sort(np.abs(want)),
                               rtol=1e-10)


def test_inverse_iteration_finds_planted_kernel(rng):
    # plant an exact null vector: pick w > 0, random off-diagonals, then
    # solve each diagonal entry from (A w)[i] = 0
    n = 80
    i = np.arange(n)
    w = np.exp(-((i - 50.0) / 10.0) ** 2 / 2.0)
    lower = np.concatenate(([0.0], -rng.random(n - 1) - 0.5))
    upper = np.concatenate((-rng.random(n - 1) - 0.5, [0.0]))
    wl = np.concatenate(([0.0], w[:-1]))
    wr = np.concatenate((w[1:], [0.0]))
    d = -(lower * wl + upper * wr) / w
    got = inverse_iteration_tridiag(lower, d, upper)
    got = got / np.linalg.norm(got)
    align = abs(np.dot(got, w / np.linalg.norm(w)))
    assert align > 1.0 - 1e-10
    A = np.diag(d) + np.diag(lower[1:], -1) + np.diag(upper[:-1], 1)
    assert np.linalg.norm(A @ got) < 1e-10


def test_logsum_quadrature_scale_invariance(rng):
    logs = rng.uniform(-2.0, 2.0, 25)
    w = rng.random(25)
    mant, scale = logsum_quadrature(logs, w)
    direct = np.sum(w * np.exp(logs))
    assert mant * np.exp(scale) == pytest.approx(direct, rel=1e-13)
    # shifting all exponents by 700 (overflow range) only moves the scale
    mant2, scale2 = logsum_quadrature(logs + 700.0, w)
    assert mant2 == pytest.approx(mant, rel=1e-13)
    assert scale2 - scale == pytest.approx(700.0, abs=1e-9)


def test_logsum_quadrature_all_masked():
    assert logsum_quadrature(np.full(3, -np.inf), np.ones(3)) == (0.0, 0.0)
