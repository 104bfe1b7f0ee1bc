"""Drifted elliptic solves on rotational profiles.

The scalar operator on a profile curve, acting on the coefficient of a fixed
spherical harmonic of band l (eigenvalue lam = l(l+n-2)), is

    L phi = phi''/W^2
            + [ (n-1)/(rho W^2) - u'u''/W^4 + (rho + u u')/(2 W^2) ] phi'
            - [ lam/rho^2 + 1/2 - V ] phi

with W^2 = 1 + u'^2 and V an optional potential. The first-order coefficient
is exactly m'/(mu) for m = rho^{n-1} e^{r^2/4}/W and mu = rho^{n-1} e^{r^2/4} W,
so the same operator has the flux form (m phi')'/mu - (lam/rho^2 + 1/2 - V) phi.
Direct finite differences realize the first form; `symmetric_system` realizes
the second in log space, which keeps the huge Gaussian weights as exponent
bookkeeping only.

Axis rows use the even-reflection limit n phi''(0) for mode 0 and a Dirichlet
zero for modes l >= 1, matching the regularity of separated solutions.
"""

import numpy as np

from ._numerics import (apply_stencil, smooth_step, solve_tridiag,
                        trapezoid_weights)
from .weighted_spaces import ScalarField, _dyadic_annuli

EXHAUSTION_BALLS = 4
GATE_SLOPE = 0.25     # log2-slope of (1+r)|f| beyond which the source is rejected


class DriftedOperator:
    """Mode-l drifted operator on a profile curve, optional potential."""

    def __init__(self, curve, mode=0, potential=None):
        if mode < 0 or mode != int(mode):
            raise ValueError("mode must be a nonnegative integer")
        self.curve = curve
        self.mode = int(mode)
        n = curve.n
        self.eigenvalue = self.mode * (self.mode + n - 2)
        up, upp = curve.derivatives()
        rho, u = curve.rho, curve.u
        W = curve.metric_factor()
        self.c2 = 1.0 / W**2
        with np.errstate(divide="ignore", invalid="ignore"):
            self.c1 = ((n - 1) / (rho * W**2) - up * upp / W**4
                       + (rho + u * up) / (2.0 * W**2))
            lam_term = np.where(rho > 0, self.eigenvalue / rho**2, np.inf)
        if self.eigenvalue == 0:
            lam_term = np.zeros_like(rho)
        if potential is None:
            self.potential = np.zeros_like(rho)
        else:
            self.potential = np.asarray(potential, dtype=float) + np.zeros_like(rho)
        self.c0 = -lam_term - 0.5 + self.potential
        # grouped form for modes >= 1: the pair (n-1) phi'/(rho W^2) - lam phi/rho^2
        # is rewritten as sing1 * (phi/rho)' + sing0 * phi, which stays second
        # order at the node next to the axis where the raw pair loses an order
        self.c1reg = -up * upp / W**4 + (rho + u * up) / (2.0 * W**2)
        self.c0reg = -0.5 + self.potential
        self.sing1 = (n - 1) / W**2
        numer = -(n - 1) * up**2 / W**2 - (self.eigenvalue - (n - 1))
        self.sing0 = np.where(rho > 0, numer / np.where(rho > 0, rho, 1.0)**2, 0.0)
        if not np.all(self.c2[1:-1] > 0):
            raise ValueError("second-order coefficient must stay positive")
        self.axis_bc = ("limit" if self.mode == 0 else "dirichlet") \
            if curve.meets_axis else "dirichlet"
        self.outer_bc = "dirichlet"
        # axis limit row: axis_c2 * n * phi''(0) + axis_c0 * phi(0);
        # conjugated operators rescale these alongside the bulk coefficients
        self.axis_c2 = 1.0
        self.axis_c0 = -0.5 + self.potential[0]
        self.conjugation = None

    # -- pointwise application ------------------------------------------------

    def _ratio_to_rho(self, phi):
        """phi / rho with the axis value filled by parity.

        Only meaningful for mode >= 1 fields, which vanish like rho^mode: the
        ratio is even in rho for odd modes (quadratic extrapolation) and odd
        for even modes (exact zero).
        """
        rho = self.curve.rho
        psi = np.empty_like(phi)
        psi[1:] = phi[1:] / rho[1:]
        if self.curve.meets_axis:
            psi[0] = 0.0 if self.mode % 2 == 0 else (4.0 * psi[1] - psi[2]) / 3.0
        else:
            psi[0] = phi[0] / rho[0]
        return psi

    def apply(self, values):
        """L phi at every node; end rows one-sided, axis row by its limit."""
        phi = np.asarray(getattr(values, "values", values), dtype=float)
        curve = self.curve
        W1, W2 = curve.stencils()
        dp = apply_stencil(W1, phi)
        dpp = apply_stencil(W2, phi)
        with np.errstate(invalid="ignore"):
            # nonfinite input nodes propagate; callers mask those rows
            if self.eigenvalue == 0:
                out = self.c2 * dpp + self.c1 * dp + self.c0 * phi
            else:
                dpsi = apply_stencil(W1, self._ratio_to_rho(phi))
                out = (self.c2 * dpp + self.c1reg * dp + self.sing1 * dpsi
                       + (self.c0reg + self.sing0) * phi)
        if curve.meets_axis:
            h0 = curve.rho[1] - curve.rho[0]
            if self.mode == 0:
                dpp0 = 2.0 * (phi[1] - phi[0]) / h0**2
                out[0] = self.axis_c2 * curve.n * dpp0 + self.axis_c0 * phi[0]
            else:
                out[0] = 0.0
        return out

    def as_field(self, values, lo=0, hi=None):
        return self.curve.field(values if hi is None else values[lo:hi],
                                lo=lo, hi=hi)

    # -- direct tridiagonal assembly -------------------------------------------

    def first_unknown(self):
        return 0 if self.axis_bc == "limit" else 1

    def tridiagonal_rows(self, lo, hi):
        """Row coefficients for unknown nodes lo..hi-1, centered stencils.

        Returns (lower, diag, upper) indexed by unknown; couplings to nodes
        outside [lo, hi) stay in the bands and are the caller's business to
        move to the right-hand side.
        """
        curve = self.curve
        W1, W2 = curve.stencils()
        idx = np.arange(lo, hi)
        if self.eigenvalue == 0:
            lower = self.c2[idx] * W2[idx, 0] + self.c1[idx] * W1[idx, 0]
            diag = (self.c2[idx] * W2[idx, 1] + self.c1[idx] * W1[idx, 1]
                    + self.c0[idx])
            upper = self.c2[idx] * W2[idx, 2] + self.c1[idx] * W1[idx, 2]
        else:
            rho = curve.rho
            lower = self.c2[idx] * W2[idx, 0] + self.c1reg[idx] * W1[idx, 0]
            diag = (self.c2[idx] * W2[idx, 1] + self.c1reg[idx] * W1[idx, 1]
                    + self.c0reg[idx] + self.sing0[idx])
            upper = self.c2[idx] * W2[idx, 2] + self.c1reg[idx] * W1[idx, 2]
            # sing1 * (phi/rho)' folded onto the neighbor columns
            with np.errstate(divide="ignore"):
                lower += self.sing1[idx] * W1[idx, 0] / rho[np.maximum(idx - 1, 0)]
                diag += self.sing1[idx] * W1[idx, 1] / rho[idx]
                upper += (self.sing1[idx] * W1[idx, 2]
                          / rho[np.minimum(idx + 1, rho.size - 1)])
            if curve.meets_axis and idx[0] <= 1 <= idx[-1]:
                # the row next to the axis sees the parity fill of phi/rho
                k = 1 - lo
                lower[k] = self.c2[1] * W2[1, 0] + self.c1reg[1] * W1[1, 0]
                if self.mode % 2 == 1:
                    diag[k] += self.sing1[1] * W1[1, 0] * (4.0 / 3.0) / rho[1]
                    upper[k] -= self.sing1[1] * W1[1, 0] / 3.0 / rho[2]
        if lo == 0:
            if self.axis_bc != "limit":
                raise ValueError("node 0 is a boundary for this operator")
            h0 = curve.rho[1] - curve.rho[0]
            diag[0] = -2.0 * self.axis_c2 * curve.n / h0**2 + self.axis_c0
            upper[0] = 2.0 * self.axis_c2 * curve.n / h0**2
            lower[0] = 0.0
        return lower, diag, upper

    # -- symmetric flux-form assembly ------------------------------------------

    def log_weights(self):
        """(log m, log mu) at the nodes; axis entries are -inf for n >= 2."""
        curve = self.curve
        rho, u = curve.rho, curve.u
        W = curve.metric_factor()
        r2 = rho**2 + u**2
        with np.errstate(divide="ignore"):
            base = (curve.n - 1) * np.log(rho) + r2 / 4.0
        return base - np.log(W), base + np.log(W)

    def log_measure(self):
        """log of the node quadrature weights for the mu-inner product."""
        _, lmu = self.log_weights()
        with np.errstate(divide="ignore"):
            return lmu + np.log(trapezoid_weights(self.curve.rho))

    def symmetric_system(self, lo, hi):
        """Symmetric tridiagonal realization on unknown nodes lo..hi-1.

        Finite-volume fluxes through half nodes; the returned (diag, off)
        matrix is D^{-1/2} K D^{-1/2} with D the cell masses, so it is the
        operator conjugated by sqrt(mu). `log_cell` maps eigenvectors back:
        phi = psi * exp(-log_cell / 2). The axis cell (lo == 0, mode 0)
        carries the vanishing-flux row, which reproduces the n phi''(0) limit.
        """
        if self.conjugation is not None:
            raise ValueError("the flux form is only defined for unconjugated "
                             "operators; work with the base operator instead")
        curve = self.curve
        n = curve.n
        rho, u = curve.rho, curve.u
        W = curve.metric_factor()
        h = np.diff(rho)
        # half-node log m evaluated at midpoints, finite even next to the axis
        rho_h = 0.5 * (rho[:-1] + rho[1:])
        u_h = 0.5 * (u[:-1] + u[1:])
        lm_half = ((n - 1) * np.log(rho_h) + (rho_h**2 + u_h**2) / 4.0
                   - 0.5 * (np.log(W[:-1]) + np.log(W[1:])))
        _, lmu = self.log_weights()
        log_cell = np.empty(rho.size)
        log_cell[1:-1] = lmu[1:-1] + np.log(0.5 * (h[:-1] + h[1:]))
        log_cell[-1] = lmu[-1] + np.log(0.5 * h[-1])
        if curve.meets_axis:
            # int_0^{h/2} mu ~ e^{u0^2/4} (h/2)^n / n near the axis
            log_cell[0] = (u[0]**2 / 4.0 + n * np.log(h[0] / 2.0) - np.log(n))
        else:
            log_cell[0] = lmu[0] + np.log(0.5 * h[0])

        idx = np.arange(lo, hi)
        fr = np.zeros(idx.size)
        mask = idx < rho.size - 1
        fr[mask] = np.exp(lm_half[idx[mask]] - log_cell[idx[mask]]) / h[idx[mask]]
        fl = np.zeros(idx.size)
        mask = idx > 0
        fl[mask] = (np.exp(lm_half[idx[mask] - 1] - log_cell[idx[mask]])
                    / h[idx[mask] - 1])
        if lo == 0 and curve.meets_axis:
            fl[0] = 0.0   # no flux through the axis
        diag = -(fl + fr) + self.c0[idx]
        off_idx = idx[:-1]
        off = (np.exp(lm_half[off_idx]
                      - 0.5 * (log_cell[off_idx] + log_cell[off_idx + 1]))
               / h[off_idx])
        return diag, off, log_cell[idx]


def _field_values(f, size):
    vals = np.asarray(getattr(f, "values", f), dtype=float)
    if vals.ndim == 0:
        vals = np.full(size, float(vals))
    if vals.size != size:
        raise ValueError("source length does not match the surface grid")
    return vals


def solve_dirichlet_ball(op, f, R, boundary=0.0):
    """One exhaustion step: L u = f on the ball r <= R, u = boundary outside.

    The boundary node is the last grid node with rho <= R. Mode and axis
    boundary handling follow the operator's descriptors.
    """
    curve = op.curve
    rho = curve.rho
    vals = _field_values(f, rho.size)
    b = int(np.searchsorted(rho, R * (1.0 + 1e-12), side="right") - 1)
    lo = op.first_unknown()
    if b - lo < 3:
        raise ValueError("ball too small for this grid")
    lower, diag, upper = op.tridiagonal_rows(lo, b)
    rhs = vals[lo:b].copy()
    rhs[-1] -= upper[-1] * boundary
    # couplings past the cut nodes leave the system: inner boundary is zero,
    # outer boundary has moved to the right-hand side
    try:
        sol = solve_tridiag(np.concatenate(([0.0], lower[1:])),
                            diag, np.concatenate((upper[:-1], [0.0])), rhs)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError("singular exhaustion system; the discretization "
                           "is at fault, the continuous problem is not") from exc
    full = np.zeros(rho.size)
    full[lo:b] = sol
    full[b] = boundary
    return curve.field(full[: b + 1], lo=0, hi=b + 1)


def _gate_slope(radius, vals):
    """log2-slope of the dyadic annulus sups of (1+r)|f|; None if too sparse."""
    weighted = (1.0 + radius) * np.abs(vals)
    sups, ks = [], []
    for k, (a, b, mask) in enumerate(_dyadic_annuli(radius)):
        s = float(np.max(weighted[mask]))
        if s > 0:
            sups.append(np.log2(s))
            ks.append(float(k))
    if len(sups) < 4:
        return None
    ks = np.asarray(ks)
    sups = np.asarray(sups)
    A = np.vstack([ks, np.ones_like(ks)]).T
    coef, *_ = np.linalg.lstsq(A, sups, rcond=None)
    return float(coef[0])


def solve_decaying(op, f, tol=1e-8, balls=EXHAUSTION_BALLS):
    """Exhaustion limit of Dirichlet balls at doubling radii.

    The source must already decay like 1/r; a growing weighted annulus
    profile is rejected before any solve. Returns (field, report) where the
    report carries radii, successive sup-differences on the half balls, and
    their decrease ratios.
    """
    curve = op.curve
    rho = curve.rho
    vals = _field_values(f, rho.size)
    span = curve.span()
    slope = _gate_slope(curve.radius(), vals)
    if slope is not None and slope > GATE_SLOPE:
        raise ValueError("source is not in the decaying class: weighted "
                         f"annulus sups grow with log2-slope {slope:.2f}")
    radii = [span / 2.0**k for k in range(balls - 1, -1, -1)]
    solutions = []
    for R in radii:
        solutions.append(solve_dirichlet_ball(op, vals, R))
    diffs = []
    for prev, nxt, R in zip(solutions, solutions[1:], radii):
        m = rho <= R / 2.0
        a = np.zeros(rho.size)
        a[: prev.values.size] = prev.values
        bfull = np.zeros(rho.size)
        bfull[: nxt.values.size] = nxt.values
        diffs.append(float(np.max(np.abs((a - bfull)[m]))))
    ratios = [d0 / d1 if d1 > 0 else np.inf for d0, d1 in zip(diffs, diffs[1:])]
    final = solutions[-1]
    scale = max(1.0, float(np.max(np.abs(final.values))))
    settled = (not diffs) or diffs[-1] <= max(tol * scale,
                                              64 * np.finfo(float).eps * scale)
    cauchy = bool(ratios) and all(q >= 2.0 for q in ratios)
    if not (settled or cauchy):
        raise RuntimeError("exhaustion is not Cauchy under radius doubling: "
                           f"diffs {['%.3g' % d for d in diffs]}")
    report = {"radii": radii, "diffs": diffs, "ratios": ratios,
              "gate_slope": slope}
    return final, report


def barrier_radius(op, d):
    """First grid radius past which L r^d < (d/2) r^d at every node.

    Scans interior nodes outward; nodes within stencil reach of the ends are
    skipped. Margins smaller than rounding noise of the stencil count as
    satisfied, which also covers exactly-zero analytic margins.
    """
    curve = op.curve
    r = curve.radius()
    with np.errstate(divide="ignore", invalid="ignore"):
        g = r**float(d)
        Lg = op.apply(g)
        margin = Lg - 0.5 * d * g
    idx = np.arange(2, r.size - 1)
    finite = np.isfinite(margin[idx]) & np.isfinite(g[idx])
    idx = idx[finite]
    h = float(np.min(np.diff(curve.rho)))
    noise = 64 * np.finfo(float).eps * (np.abs(g[idx]) / h**2 + np.abs(Lg[idx]))
    bad = margin[idx] > noise
    if not np.any(bad):
        return float(r[idx[0]])
    last = idx[np.nonzero(bad)[0][-1]]
    if last >= r.size - 3:
        worst = float(np.max(margin[idx] / np.maximum(np.abs(g[idx]), 1e-300)))
        raise RuntimeError("barrier inequality not achieved within the span; "
                           f"worst relative margin {worst:.3g}")
    return float(r[last + 1])


CUTOFF_INNER = 4.0   # chi rises smoothly on [4, 8], fixed for reproducibility


def extend_asymptotic(op, phi):
    """Solution with prescribed degree-1 trace phi at infinity.

    Builds g = phi * chi(r) * r, cancels its residual with a decaying
    correction, and returns u = g + v together with the exhaustion report.
    By construction the discrete residual of u vanishes to rounding at every
    interior solved node.
    """
    curve = op.curve
    if not curve.conical and float(phi) != 0.0:
        raise ValueError("asymptotic extension needs a conical surface")
    r = curve.radius()
    if float(phi) == 0.0:
        zero = curve.field(np.zeros(r.size))
        return zero, {"radii": [], "diffs": [], "ratios": [], "gate_slope": None}
    chi = smooth_step((r - CUTOFF_INNER) / CUTOFF_INNER)
    g = float(phi) * chi * r
    resid = op.apply(g)
    v, report = solve_decaying(op, -resid)
    full_v = np.zeros(r.size)
    full_v[: v.values.size] = v.values
    u = g + full_v
    return curve.field(u), report
