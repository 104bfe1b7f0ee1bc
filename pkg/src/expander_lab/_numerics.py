"""Shared low-level numerics: nonuniform stencils, quadrature, banded spectra.

Everything in the package that differentiates a sampled profile goes through
`derivative_weights` so that geometry, operator assembly, and residual checks
agree to rounding, not just to truncation order.
"""

import numpy as np
from scipy.linalg import eig_banded, solve_banded


def derivative_weights(x):
    """3-point first/second derivative weights on a nonuniform grid.

    Returns (W1, W2), each of shape (n, 3): weights for nodes (i-1, i, i+1)
    at interior i. End rows hold one-sided 3-point weights (nodes 0,1,2 and
    n-3,n-2,n-1 respectively), second order for W1, first for W2.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 3:
        raise ValueError("need at least 3 nodes")
    W1 = np.zeros((n, 3))
    W2 = np.zeros((n, 3))
    hm = x[1:-1] - x[:-2]
    hp = x[2:] - x[1:-1]
    # interior: standard nonuniform central weights
    W1[1:-1, 0] = -hp / (hm * (hm + hp))
    W1[1:-1, 1] = (hp - hm) / (hm * hp)
    W1[1:-1, 2] = hm / (hp * (hm + hp))
    W2[1:-1, 0] = 2.0 / (hm * (hm + hp))
    W2[1:-1, 1] = -2.0 / (hm * hp)
    W2[1:-1, 2] = 2.0 / (hp * (hm + hp))
    # one-sided rows (columns refer to the three nearest nodes, see apply_stencil)
    h1, h2 = x[1] - x[0], x[2] - x[1]
    W1[0] = [-(2 * h1 + h2) / (h1 * (h1 + h2)), (h1 + h2) / (h1 * h2),
             -h1 / (h2 * (h1 + h2))]
    W2[0] = [2.0 / (h1 * (h1 + h2)), -2.0 / (h1 * h2), 2.0 / (h2 * (h1 + h2))]
    g1, g2 = x[-2] - x[-3], x[-1] - x[-2]
    W1[-1] = [g2 / (g1 * (g1 + g2)), -(g1 + g2) / (g1 * g2),
              (g1 + 2 * g2) / (g2 * (g1 + g2))]
    W2[-1] = [2.0 / (g1 * (g1 + g2)), -2.0 / (g1 * g2), 2.0 / (g2 * (g1 + g2))]
    return W1, W2


def apply_stencil(W, f):
    """Apply 3-point weights from `derivative_weights` to samples f."""
    f = np.asarray(f, dtype=float)
    out = np.empty_like(f)
    out[1:-1] = W[1:-1, 0] * f[:-2] + W[1:-1, 1] * f[1:-1] + W[1:-1, 2] * f[2:]
    out[0] = W[0, 0] * f[0] + W[0, 1] * f[1] + W[0, 2] * f[2]
    out[-1] = W[-1, 0] * f[-3] + W[-1, 1] * f[-2] + W[-1, 2] * f[-1]
    return out


def trapezoid_weights(x):
    x = np.asarray(x, dtype=float)
    w = np.zeros_like(x)
    dx = np.diff(x)
    w[:-1] += 0.5 * dx
    w[1:] += 0.5 * dx
    return w


def smooth_step(s):
    """C^inf transition 0 -> 1 on [0, 1] (exp-based partition of unity)."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(s > 0, np.exp(-1.0 / np.maximum(s, 1e-300)), 0.0)
        b = np.where(s < 1, np.exp(-1.0 / np.maximum(1.0 - s, 1e-300)), 0.0)
    return a / (a + b)


def smooth_bump(x, lo, hi):
    """C^inf bump: 0 outside (lo, hi), 1 at the center plateau-free."""
    x = np.asarray(x, dtype=float)
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    s = 1.0 - ((x - mid) / half) ** 2
    out = np.zeros_like(x)
    inside = s > 0
    out[inside] = np.exp(1.0 - 1.0 / s[inside])
    return out


def tridiag_to_banded(lower, diag, upper):
    """Pack tridiagonal arrays into the (2,2)-free LAPACK banded layout (1,1)."""
    n = diag.size
    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[1, :] = diag
    ab[2, :-1] = lower[1:]
    return ab


def solve_tridiag(lower, diag, upper, rhs):
    ab = tridiag_to_banded(lower, diag, upper)
    return solve_banded((1, 1), ab, rhs)


def singular_values_tridiag(lower, diag, upper, k=6):
    """Smallest k singular values of the tridiagonal matrix A.

    Forms the pentadiagonal symmetric A^T A and calls the banded symmetric
    eigensolver; exact full spectrum, O(n^2) work, no dense SVD.
    """
    n = diag.size
    # rows of A: A[i, i-1] = lower[i], A[i, i] = diag[i], A[i, i+1] = upper[i]
    lo = np.zeros(n)
    lo[1:] = lower[1:]
    up = np.zeros(n)
    up[:-1] = upper[:-1]
    d0 = lo**2 + diag**2 + up**2
    d1 = np.zeros(n - 1)
    d1 = diag[:-1] * lo[1:] + up[:-1] * diag[1:]
    d2 = up[:-2] * lo[2:]
    band = np.zeros((3, n))
    band[0, :] = d0
    band[1, :-1] = d1
    band[2, :-2] = d2
    vals = eig_banded(band, lower=True, eigvals_only=True,
                      select="i", select_range=(0, min(k, n) - 1))
    return np.sqrt(np.maximum(vals, 0.0))


def eigs_sym_tridiag(diag, off, k=6):
    """Smallest-|lambda| eigenvalues of a symmetric tridiagonal matrix."""
    from scipy.linalg import eigvalsh_tridiagonal
    vals = eigvalsh_tridiagonal(diag, off)
    order = np.argsort(np.abs(vals))
    return vals[order[:k]]


def inverse_iteration_tridiag(lower, diag, upper, shift=0.0, iters=50, seed=0):
    """Kernel-direction estimate for a near-singular tridiagonal matrix."""
    n = diag.size
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    d = diag - shift
    for _ in range(iters):
        try:
            w = solve_tridiag(lower, d, upper, v)
        except np.linalg.LinAlgError:
            d = d + 1e-14 * np.max(np.abs(diag))
            w = solve_tridiag(lower, d, upper, v)
        nw = np.linalg.norm(w)
        if not np.isfinite(nw) or nw == 0:
            break
        v = w / nw
    return v


def logsum_quadrature(log_terms, weights):
    """sum_i weights_i * exp(log_terms_i), computed with a max shift.

    Returns (mantissa, log_scale): value = mantissa * exp(log_scale).
    """
    log_terms = np.asarray(log_terms, dtype=float)
    finite = np.isfinite(log_terms)
    if not np.any(finite):
        return 0.0, 0.0
    m = np.max(log_terms[finite])
    s = float(np.sum(np.where(finite, weights * np.exp(log_terms - m), 0.0)))
    return s, m
