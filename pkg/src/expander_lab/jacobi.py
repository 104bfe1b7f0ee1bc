"""Jacobi operator, kernel extraction, and index diagnostics.

The stability operator of an expander adds the potential |A|^2 to the drift
operator. Its kernel elements that fix the asymptotic cone decay like the
recessive branch r^{-n-1} e^{-r^2/4}; the growing branch goes like r, which a
Dirichlet condition at the outer grid node excludes.

Kernel and cokernel dimensions come from genuinely different discretizations:
the direct finite-difference matrix (singular values via its normal equations)
against the symmetric flux-form matrix, whose kernel realizes the adjoint in
the e^{r^2/4}-weighted pairing. A square matrix always has equal left and
right null dimensions, so agreement between two *independent* assemblies is
the meaningful index-zero diagnostic, and the obstruction solve provides a
third route.
"""

import math
from dataclasses import dataclass, field as dataclass_field

import numpy as np
from scipy.integrate import solve_ivp

from ._numerics import (apply_stencil, eigs_sym_tridiag, logsum_quadrature,
                        singular_values_tridiag, solve_tridiag)
from .drift_elliptic import DriftedOperator, solve_decaying
from .geometry import _curvature_arrays, expander_residual
from .weighted_spaces import trace_at_infinity

KERNEL_TOL_FACTOR = 1e-8
SPECTRAL_GAP = 1e3
RESIDUAL_GATE = 1e-4
NOISE_FLOOR = 1e-12      # relative level below which grid values are noise


def link_area(n):
    """Area of the unit (n-1)-sphere."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def assemble_jacobi(curve, mode=0, section=None):
    """Stability operator at mode l; conjugated by v.n when a section is given.

    The plain assembly installs the potential |A|^2. With a section, the
    returned operator realizes g -> (v.n)^2 L g + a_v g + b_v . grad g, whose
    kernel is {u : (v.n) u in ker L}; its split coefficients are stored as
    `split_a` and `split_b` (the radial component of grad (v.n)^2).
    """
    if not curve.conical:
        raise ValueError("stability analysis needs a conical surface")
    resid = expander_residual(curve)
    sup = float(np.max(np.abs(resid.values)))
    if sup > RESIDUAL_GATE:
        raise ValueError(f"surface residual {sup:.3g} is not converged")
    _, A2, _, W, _, _ = _curvature_arrays(curve)
    op = DriftedOperator(curve, mode, potential=A2)
    if section is None:
        return op
    phi = section.normal_component(curve)
    drift = DriftedOperator(curve, mode)
    lphi = drift.apply(phi)
    a_v = phi * lphi + 0.5 * phi**2 + phi**2 * A2
    W1, _ = curve.stencils()
    b_rad = apply_stencil(W1, phi**2)
    if curve.meets_axis:
        b_rad[0] = 0.0
    op.split_a = a_v
    op.split_b = b_rad
    op.c2 = phi**2 * op.c2
    op.c1 = phi**2 * op.c1 + b_rad / W**2
    op.c0 = phi**2 * (op.c0 - A2) + a_v
    op.c1reg = phi**2 * op.c1reg + b_rad / W**2
    op.c0reg = phi**2 * (op.c0reg - A2) + a_v
    op.sing1 = phi**2 * op.sing1
    op.sing0 = phi**2 * op.sing0
    op.axis_c2 = phi[0] ** 2 * op.axis_c2
    op.axis_c0 = -0.5 * phi[0] ** 2 + a_v[0] if curve.meets_axis else op.axis_c0
    op.conjugation = phi
    return op


def check_normal_identity(curve, include_end=False):
    """sup |L n + n/2| over components of the unit normal.

    The vertical component 1/W lives in mode 0, the horizontal ones share the
    profile -u'/W in mode 1. Exact zero on the plane; O(grid^2) on solved
    expanders. The last two rows are excluded unless asked for: the end node
    carries a one-sided slope whose truncation error has the opposite sign of
    the centered rows, and re-differencing that kink does not refine away.
    The mode-1 row next to the axis is excluded for the same reason: its
    parity fill of the phi/rho ratio compounds the stencil slope error to
    first order at that one node, while every other row quarters under grid
    halving.
    """
    up, _ = curve.derivatives()
    W = curve.metric_factor()
    hi = curve.rho.size - (0 if include_end else 2)
    sup = 0.0
    for mode, comp in ((0, 1.0 / W), (1, -up / W)):
        op = assemble_jacobi(curve, mode)
        resid = op.apply(comp) + 0.5 * comp
        lo = 0 if mode == 0 else (1 if include_end else 2)
        sup = max(sup, float(np.max(np.abs(resid[lo:hi]))))
    return sup


def tilt_field(curve):
    """Mode-1 Jacobi field generated by tilting the rotation axis.

    Exactly -(rho + u u')/W; annihilated by the mode-1 stability operator in
    the continuum but carries a nonzero degree-1 trace, so it never belongs
    to the cone-fixing kernel.
    """
    up, _ = curve.derivatives()
    W = curve.metric_factor()
    return curve.field(-(curve.rho + curve.u * up) / W)


@dataclass
class KernelBasis:
    host: object
    mode: int
    fields: list
    sigmas: np.ndarray
    sigma_max: float
    sigma_gap: float
    traces: list = dataclass_field(default_factory=list)
    decay_coefficients: list = dataclass_field(default_factory=list)
    reports: list = dataclass_field(default_factory=list)

    @property
    def dim(self):
        return len(self.fields)


def _boundary_rows(op, far_bc="decaying"):
    """Square system for the homogeneous problem with the chosen far field.

    decaying: Dirichlet 0 at the outer node (kills the r-growing branch).
    growing: a discrete Robin row u' = u/rho at the outer node, which admits
    the growing branch instead; used as a negative control.
    """
    curve = op.curve
    N = curve.rho.size
    lo = op.first_unknown()
    if far_bc == "decaying":
        lower, diag, upper = op.tridiagonal_rows(lo, N - 1)
    elif far_bc == "growing":
        lower, diag, upper = op.tridiagonal_rows(lo, N)
        h = curve.rho[-1] - curve.rho[-2]
        lower[-1] = -1.0 / h
        diag[-1] = 1.0 / h - 1.0 / curve.rho[-1]
        upper[-1] = 0.0
    else:
        raise ValueError("far_bc must be 'decaying' or 'growing'")
    lower = lower.copy()
    upper = upper.copy()
    lower[0] = 0.0
    upper[-1] = 0.0
    return lo, lower, diag, upper


def _direct_sigmas(op, far_bc="decaying", k=6):
    lo, lower, diag, upper = _boundary_rows(op, far_bc)
    sig = singular_values_tridiag(lower, diag, upper, k=k)
    smax = float(np.max(np.abs(lower) + np.abs(diag) + np.abs(upper)))
    return lo, lower, diag, upper, sig, smax

def _count_small(values, vmax, label):
    tol = KERNEL_TOL_FACTOR * vmax
    small = np.abs(values) < tol
    dim = int(np.count_nonzero(small))
    if dim and dim < values.size:
        kept = float(np.max(np.abs(values[small])))
        rejected = float(np.min(np.abs(values[~small])))
        if rejected < SPECTRAL_GAP * max(kept, 1e-300):
            raise RuntimeError(
                f"indeterminate kernel: {label} spectrum has no 1e3 gap "
                f"between {kept:.3e} and {rejected:.3e}")
    return dim


def kernel_basis(op):
    """Cone-fixing kernel of the discretized operator.

    Small singular values below 1e-8 of the largest, demanded to sit a factor
    1e3 below everything rejected; vectors by blocked inverse iteration,
    orthonormalized in the e^{r^2/4}-weighted product on a fixed ball and
    sign-fixed for determinism. Each element carries its degree-1 trace and
    its recessive decay coefficient.
    """
    curve = op.curve
    lo, lower, diag, upper, sig, smax = _direct_sigmas(op)
    dim = _count_small(sig, smax, "singular")
    gap = float(sig[dim] / max(sig[dim - 1], 1e-300)) if 0 < dim < sig.size \
        else float("inf")
    basis = KernelBasis(host=curve, mode=op.mode, fields=[], sigmas=sig,
                        sigma_max=smax, sigma_gap=gap)
    if dim == 0:
        return basis
    vecs = _inverse_block(lower, diag, upper, dim)
    vecs = _weighted_orthonormalize(op, vecs, lo)
    for col in range(vecs.shape[1]):
        full = np.zeros(curve.rho.size)
        full[lo:lo + vecs.shape[0]] = vecs[:, col]
        fld = curve.field(full)
        basis.fields.append(fld)
        basis.traces.append(float(trace_at_infinity(fld, 1).value))
        try:
            a_u, report = asymptotic_trace(fld)
        except RuntimeError as exc:
            a_u, report = float("nan"), {"error": str(exc)}
        basis.decay_coefficients.append(a_u)
        basis.reports.append(report)
    return basis


def _inverse_block(lower, diag, upper, k, iters=80, seed=11):
    n = diag.size
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, k))
    X, _ = np.linalg.qr(X)
    shift = 0.0
    for _ in range(iters):
        Y = np.empty_like(X)
        for j in range(k):
            try:
                Y[:, j] = solve_tridiag(lower, diag - shift, upper, X[:, j])
            except np.linalg.LinAlgError:
                shift = 1e-14 * float(np.max(np.abs(diag)))
                Y[:, j] = solve_tridiag(lower, diag - shift, upper, X[:, j])
        X, _ = np.linalg.qr(Y)
    return X


def _weighted_orthonormalize(op, vecs, lo):
    """Gram-Schmidt in the weighted product on the ball r <= min(span/2, 10)."""
    curve = op.curve
    r = curve.radius()
    cut = min(curve.span() / 2.0, 10.0)
    logw = op.log_measure() if op.conjugation is None else \
        DriftedOperator(curve, op.mode).log_measure()
    hi = lo + vecs.shape[0]
    mask = (r >= r[lo]) & (r <= cut)
    w = np.zeros(r.size)
    w[mask] = np.exp(logw[mask] - np.max(logw[mask]))
    w = w[lo:hi]
    out = []
    for j in range(vecs.shape[1]):
        v = vecs[:, j].copy()
        for u in out:
            v -= np.sum(w * v * u) * u
        norm = math.sqrt(float(np.sum(w * v * v)))
        if norm == 0.0:
            continue
        v /= norm
        peak = np.argmax(np.abs(v))
        if v[peak] < 0:
            v = -v
        out.append(v)
    return np.column_stack(out)


@dataclass
class FredholmReport:
    dim_ker: int
    dim_coker: int
    sigmas: np.ndarray
    adjoint_eigs: np.ndarray
    obstructed: int = None

    def __iter__(self):
        return iter((self.dim_ker, self.dim_coker))


def fredholm_index(op, far_bc="decaying", obstruction=True):
    """(dim ker, dim coker) from two independent assemblies.

    dim_ker: singular values of the direct finite-difference matrix.
    dim_coker: near-zero eigenvalues of the symmetric flux-form matrix, whose
    null space is the weighted-adjoint kernel. With `obstruction`, every
    kernel element is fed back as a right-hand side; those solves must fail
    the exhaustion contract, and the failure count is reported.

    far_bc='growing' swaps the direct route's outer row for one admitting the
    r-growing branch: a deliberate mismatch that should break index zero.
    """
    curve = op.curve
    N = curve.rho.size
    _, _, _, _, sig, smax = _direct_sigmas(op, far_bc)
    dim_ker = _count_small(sig, smax, "singular")
    base = op if op.conjugation is None else DriftedOperator(
        curve, op.mode, potential=op.potential)
    lo = base.first_unknown()
    diag_s, off_s, _ = base.symmetric_system(lo, N - 1)
    eigs = eigs_sym_tridiag(diag_s, off_s, k=6)
    emax = float(np.max(np.abs(diag_s)) + 2.0 * np.max(np.abs(off_s)))
    dim_coker = _count_small(eigs, emax, "adjoint eigenvalue")
    obstructed = None
    if obstruction:
        obstructed = 0
        if dim_ker > 0:
            for fld in kernel_basis(op).fields:
                try:
                    solve_decaying(op, fld.values)
                except (RuntimeError, ValueError):
                    obstructed += 1
    return FredholmReport(dim_ker=dim_ker, dim_coker=dim_coker, sigmas=sig,
                          adjoint_eigs=eigs, obstructed=obstructed)


def wronskian_discriminant(op, rho_match=None):
    """Log-derivative mismatch of the two-end homogeneous solutions.

    Integrates the regular solution outward from the axis and the recessive
    log-derivative inward from the far end (Riccati form, so the e^{-r^2/4}
    scale never underflows); a kernel element exists exactly when the two
    log-derivatives meet. Returns the normalized mismatch at the matching
    radius: near zero means kernel.
    """
    curve = op.curve
    rho = curve.rho
    lo = 1 if curve.meets_axis else 0
    grid = rho[lo:]
    c2 = op.c2[lo:]
    c1 = op.c1[lo:]
    c0 = op.c0[lo:]
    if rho_match is None:
        # match near the axis: the outward sweep is only well conditioned
        # while the dominant/recessive amplification over (0, rho_match)
        # stays modest, and for peaked potentials that window closes fast.
        # 8 cells keeps the interpolated coefficients resolved on coarse
        # grids.
        h = rho[1] - rho[0]
        rho_match = max(8.0 * h, min(0.2, 0.4 * rho[-1]))

    def coeffs(x):
        return (np.interp(x, grid, c2), np.interp(x, grid, c1),
                np.interp(x, grid, c0))

    def outward(x, y):
        a2, a1, a0 = coeffs(x)
        return [y[1], -(a1 * y[1] + a0 * y[0]) / a2]

    l = op.mode
    x0 = grid[0] if curve.meets_axis else rho[0]
    if curve.meets_axis and l == 0:
        # axis series y = 1 + y2 rho^2/2 kills the log-branch contamination
        # that a flat [1, 0] start would inject at O(x0)
        y2 = -op.c0[0] / (curve.n * op.c2[0])
        y0 = [1.0 + 0.5 * y2 * x0**2, y2 * x0]
    else:
        y0 = [x0**l, l * x0 ** max(l - 1, 0) if l else 0.0]
    out = solve_ivp(outward, (x0, rho_match), y0, method="DOP853",
                    rtol=1e-10, atol=1e-12, dense_output=True)
    if not out.success:
        raise RuntimeError("outward sweep failed: " + out.message)
    y, yp = out.sol(rho_match)
    s_out = yp / y if y != 0 else np.inf

    up, _ = curve.derivatives()
    r = curve.radius()
    drdrho = (rho[-1] + curve.u[-1] * up[-1]) / r[-1]
    s_far = (-(curve.n + 1) / r[-1] - r[-1] / 2.0) * drdrho

    def riccati(x, s):
        a2, a1, a0 = coeffs(x)
        return [-(a1 * s[0] + a0) / a2 - s[0] ** 2]

    inw = solve_ivp(riccati, (rho[-1], rho_match), [s_far], method="DOP853",
                    rtol=1e-10, atol=1e-12)
    if not inw.success or inw.t[-1] != rho_match:
        raise RuntimeError("recessive log-derivative blew up before the "
                           "matching radius; pick a larger rho_match")
    s_in = inw.y[0, -1]
    return float((s_out - s_in) / (1.0 + abs(s_out) + abs(s_in)))


def asymptotic_trace(fld, r_floor=1.0):
    """Recessive decay coefficient and its stabilization diagnostics.

    Samples the link integral of u^2 at dyadic ambient radii inside the
    resolvable window (the discrete tail below the noise floor is excluded)
    and forms S = r^{n+3} e^{r^2/2} * (link integral), entirely in logs.
    S stabilizes at a[u]^2 for the recessive rate and diverges for any slower
    rate; the companion series log(u r^{n+1} e^{r^2/4}) must flatten.
    """
    u = fld.values
    r = fld.radius
    n = fld.dim
    scale = float(np.max(np.abs(u)))
    if scale == 0.0:
        raise RuntimeError("zero field has no decay coefficient")
    usable = np.abs(u) > NOISE_FLOOR * scale
    r_hi = float(np.max(r[usable]))
    if r_hi < 4.0 * r_floor:
        raise RuntimeError("span too short: the field underflows before the "
                           "asymptotic regime")
    radii = [r_hi / 2.0**j for j in range(4) if r_hi / 2.0**j >= r_floor]
    radii = radii[::-1]
    m = usable & (r > 0)
    logu = np.interp(radii, r[m], np.log(np.abs(u[m])))
    sign = np.sign(np.interp(radii, r[m], u[m]))
    rho_at = np.interp(radii, r[m], fld.axis[m])
    radii = np.asarray(radii)
    logS = ((n + 3) * np.log(radii) + radii**2 / 2.0 + 2.0 * logu
            + math.log(link_area(n)) + (n - 1) * np.log(rho_at))
    flat = logu + (n + 1) * np.log(radii) + radii**2 / 4.0
    steps = np.diff(logS)
    diverges = bool(steps.size >= 2 and np.all(steps > math.log(3.0)))
    stabilization = float(abs(math.expm1(logS[-1] - logS[-2])))
    flatness = float(abs(math.expm1(flat[-1] - flat[-2])))
    a_sq = float(np.exp(logS[-1]))
    a_u = float(sign[-1] * math.sqrt(max(a_sq, 0.0)))
    report = {"radii": [float(x) for x in radii],
              "log_sequence": [float(x) for x in logS],
              "stabilization": stabilization,
              "flatness": flatness,
              "diverges": diverges,
              "a_squared": a_sq}
    return a_u, report


def weighted_energy(op, values, m=0, r_cut=None, fractions=(0.5, 0.75, 1.0)):
    """Partial weighted energies int (|grad u|^2 + u^2) r^m e^{r^2/4}.

    Returned at increasing radius cutoffs to exhibit stabilization. The cutoff
    defaults to the resolvable window of the field, since the true integrand
    decays like e^{-r^2/4} while squared grid noise would blow up instead.
    """
    curve = op.curve
    u = np.asarray(getattr(values, "values", values), dtype=float)
    r = curve.radius()
    W1, _ = curve.stencils()
    W = curve.metric_factor()
    grad = apply_stencil(W1, u) / W
    scale = float(np.max(np.abs(u)))
    if r_cut is None:
        usable = np.abs(u) > NOISE_FLOOR * scale
        r_cut = float(np.max(r[usable]))
    dens = grad**2 + u**2
    with np.errstate(divide="ignore"):
        log_terms = np.log(dens)
        if m:
            log_terms = log_terms + m * np.log(r)
        logw = op.log_measure() if op.conjugation is None else \
            DriftedOperator(curve, op.mode).log_measure()
    outs = []
    for frac in fractions:
        mask = r <= frac * r_cut
        terms = log_terms[mask] + logw[mask]
        mant, log_scale = logsum_quadrature(terms, np.ones(int(mask.sum())))
        outs.append(float(mant * np.exp(log_scale)))
    return outs


def manufactured_kernel_operator(curve, mode=0, core=0.1):
    """Operator with a planted kernel element of the exact recessive shape.

    u0 = (core + r^2)^{-(n+1)/2} e^{-r^2/4} is smooth, positive, and matches
    the recessive profile to O(core/r^2); installing the potential
    V = -(L u0)/u0 on top of the drift operator makes u0 a kernel vector of
    the *discrete* operator to rounding, with the correct asymptotics. This
    keeps the decay and obstruction diagnostics non-vacuous even when the
    surface's own Jacobi kernel is empty.
    """
    r = curve.radius()
    n = curve.n
    u0 = (core + r**2) ** (-(n + 1) / 2.0) * np.exp(-r**2 / 4.0)
    drift = DriftedOperator(curve, mode)
    Lu0 = drift.apply(u0)
    V = -Lu0 / u0
    V[-1] = V[-2]   # one-sided end row would pollute the potential
    op = DriftedOperator(curve, mode, potential=V)
    return op, curve.field(u0)


def index_sweep(slopes=None, modes=(0, 1, 2, 3), n=2, rho_max=16.0,
                nodes=1200, solver=None):
    """dim_ker/dim_coker table over (slope, mode); default 76 points.

    Returns a list of row dicts `slope, mode, dim_ker, dim_coker, a_u` with
    a_u the decay coefficient of the first kernel element, 0.0 when empty.
    """
    from .expander_solve import solve_for_cone
    if slopes is None:
        slopes = [round(0.2 + 0.1 * k, 1) for k in range(19)]
    rows = []
    for a in slopes:
        curve = (solver or solve_for_cone)(a, n, rho_max=rho_max, nodes=nodes)
        for l in modes:
            op = assemble_jacobi(curve, l)
            rep = fredholm_index(op, obstruction=False)
            a_u = 0.0
            if rep.dim_ker > 0:
                basis = kernel_basis(op)
                if basis.dim > 0 and np.isfinite(basis.decay_coefficients[0]):
                    a_u = basis.decay_coefficients[0]
            rows.append({"slope": float(a), "mode": int(l),
                         "dim_ker": rep.dim_ker, "dim_coker": rep.dim_coker,
                         "a_u": float(a_u)})
    return rows
