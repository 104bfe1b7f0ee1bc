"""Finite-difference verification of the weighted-area variation formulas.

Deformations act on the profile as (rho, u) -> (rho + dr, u + dz) and the
functional is the e^{r^2/4}-weighted area of the revolved graph, integrated
only over the support window so the far cone never enters. First and second
derivatives in the deformation parameter are compared against the stationary
and Jacobi-form expressions assembled from the same curvature stencils.
"""

import math

import numpy as np
from dataclasses import dataclass

from ._numerics import smooth_bump, trapezoid_weights
from .geometry import _curvature_arrays, expander_residual, residual_node_range

# e^{r^2/4} reaches ~6e8 at the cap; doubles hold that with room to spare,
# and fsum compensates the window sums, so no log-space evaluation is needed
# below it.
R_SUPP_CAP = 8.0
MIN_WINDOW_NODES = 9


def sphere_area(k):
    """Area of the unit k-sphere."""
    return 2.0 * math.pi ** ((k + 1) / 2.0) / math.gamma((k + 1) / 2.0)


def _ambient_radius(curve):
    return np.hypot(curve.rho, curve.u)


def _deriv4(a, h):
    # 4th-order interior stencil; the 2nd-order edge fallback never matters
    # because window integrand differences vanish near the edges.
    d = np.gradient(a, h)
    if a.size >= 5:
        d[2:-2] = (a[:-4] - 8.0 * a[1:-3] + 8.0 * a[3:-1] - a[4:]) / (12.0 * h)
    return d


@dataclass
class VariationSpec:
    """Compactly supported deformation field of a profile surface.

    v_rho, v_z are per-node displacement components; the field must vanish
    at ambient radius beyond r_supp. step is the default centered-difference
    parameter, s_max the largest deformation energy_window accepts.
    """

    surface: object
    v_rho: np.ndarray
    v_z: np.ndarray
    r_supp: float
    step: float = 1e-3
    s_max: float = 2e-2

    def __post_init__(self):
        self.v_rho = np.asarray(self.v_rho, dtype=float)
        self.v_z = np.asarray(self.v_z, dtype=float)
        nn = self.surface.rho.size
        if self.v_rho.shape != (nn,) or self.v_z.shape != (nn,):
            raise ValueError("variation field must be sampled on the nodes")
        if self.r_supp > R_SUPP_CAP:
            raise ValueError(
                "support radius %.3g exceeds the weighted-area cap %.3g"
                % (self.r_supp, R_SUPP_CAP))
        r = _ambient_radius(self.surface)
        outside = r > self.r_supp
        leak = 0.0
        if np.any(outside):
            leak = max(np.max(np.abs(self.v_rho[outside])),
                       np.max(np.abs(self.v_z[outside])))
        if leak != 0.0:
            raise ValueError(
                "field does not vanish beyond r_supp (leak %.3e)" % leak)

    def window(self):
        """Node slice covering ambient radius r_supp + 1."""
        r = _ambient_radius(self.surface)
        idx = np.flatnonzero(r <= self.r_supp + 1.0)
        if idx.size < MIN_WINDOW_NODES:
            raise ValueError("support window resolves too few nodes")
        return slice(int(idx[0]), int(idx[-1]) + 1)


def _supported_radius(curve, f_rho, f_z):
    r = _ambient_radius(curve)
    live = (np.abs(f_rho) > 0) | (np.abs(f_z) > 0)
    if not np.any(live):
        raise ValueError("variation field vanishes identically")
    return float(np.max(r[live])) + 1e-9


def normal_field(curve, f, step=1e-3):
    """V = f * (unit upward normal)."""
    f = np.asarray(f, dtype=float)
    up, _ = curve.derivatives()
    W = np.sqrt(1.0 + up**2)
    vr, vz = -f * up / W, f / W
    return VariationSpec(curve, vr, vz, _supported_radius(curve, vr, vz),
                         step=step)


def section_field(curve, f, section, step=1e-3):
    """V = f * v for a constant transverse section direction v."""
    f = np.asarray(f, dtype=float)
    vr, vz = f * section.v_rho, f * section.v_z
    return VariationSpec(curve, vr, vz, _supported_radius(curve, vr, vz),
                         step=step)


def tangent_field(curve, psi, step=1e-3):
    """V = psi * (1, u'), the straight-line push along the tangent."""
    psi = np.asarray(psi, dtype=float)
    up, _ = curve.derivatives()
    vr, vz = psi, psi * up
    return VariationSpec(curve, vr, vz, _supported_radius(curve, vr, vz),
                         step=step)


def _window_energy_difference(curve, d_rho, d_z, win):
    """Weighted-area difference over the window for total displacement d.

    Pointwise integrand differences vanish identically where d = 0, so the
    value is exactly zero at d = 0 and the window boundary contributes
    nothing.
    """
    rho = curve.rho[win]
    u = curve.u[win]
    h = curve.rho[1] - curve.rho[0]
    tr = rho + d_rho[win]
    tu = u + d_z[win]
    if np.any(np.diff(tr) <= 0.0):
        raise ValueError("graph condition lost: deformed rho not increasing")
    n = curve.n

    def integrand(a, b):
        da = _deriv4(a, h)
        db = _deriv4(b, h)
        return a ** (n - 1) * np.exp((a**2 + b**2) / 4.0) * np.hypot(da, db)

    diff = integrand(tr, tu) - integrand(rho, u)
    w = trapezoid_weights(rho)
    return sphere_area(n - 1) * math.fsum(w * diff)


def energy_window(curve, spec, s):
    """E[deformed] - E[base] at parameter s, over the support window."""
    if abs(s) > spec.s_max:
        raise ValueError("parameter %.3g exceeds s_max %.3g"
                         % (s, spec.s_max))
    if s == 0.0:
        return 0.0
    return _window_energy_difference(curve, s * spec.v_rho, s * spec.v_z,
                                     spec.window())


def _node_residual(curve):
    lo, hi = residual_node_range(curve)
    fld = expander_residual(curve)
    res = np.zeros(curve.rho.size)
    res[lo:hi] = fld.values
    if lo > 0:
        res[:lo] = res[lo]
    res[hi:] = res[hi - 1]
    return res


def first_variation_check(curve, spec, s=None):
    """Centered dE/ds against the stationarity integrand.

    The analytic side integrates -(V . n) (H_vec - x_perp/2) . n against the
    weighted area element; its sign is pinned by the round-sphere test.
    Richardson extrapolation of the two centered differences removes the
    leading s^2 truncation.
    """
    s = spec.step if s is None else float(s)
    d_full = (energy_window(curve, spec, s)
              - energy_window(curve, spec, -s)) / (2.0 * s)
    d_half = (energy_window(curve, spec, 0.5 * s)
              - energy_window(curve, spec, -0.5 * s)) / s
    d_rich = (4.0 * d_half - d_full) / 3.0

    win = spec.window()
    up, _ = curve.derivatives()
    W = np.sqrt(1.0 + up**2)
    vdotn = (spec.v_z - spec.v_rho * up) / W
    res = _node_residual(curve)
    r2 = curve.rho**2 + curve.u**2
    dens = (vdotn * res * np.exp(r2 / 4.0)
            * curve.rho ** (curve.n - 1) * W)[win]
    w = trapezoid_weights(curve.rho[win])
    analytic = -sphere_area(curve.n - 1) * math.fsum(w * dens)
    return {
        "derivative": d_full,
        "derivative_richardson": d_rich,
        "analytic": analytic,
        "discrepancy": abs(d_rich - analytic),
    }


def _as_node_values(curve, f):
    if callable(f):
        return np.asarray(f(curve.rho), dtype=float)
    return np.asarray(f, dtype=float)


def mixed_second_difference(curve, spec_a, spec_b, s=None, t=None,
                            richardson=True):
    """Mixed centered second difference of E along two deformation fields."""
    s = spec_a.step if s is None else float(s)
    t = spec_b.step if t is None else float(t)
    win_a = spec_a.window()
    win_b = spec_b.window()
    win = slice(min(win_a.start, win_b.start), max(win_a.stop, win_b.stop))

    def mixed(ds, dt):
        def e(sig_s, sig_t):
            return _window_energy_difference(
                curve,
                sig_s * ds * spec_a.v_rho + sig_t * dt * spec_b.v_rho,
                sig_s * ds * spec_a.v_z + sig_t * dt * spec_b.v_z,
                win)
        return (e(1, 1) - e(1, -1) - e(-1, 1) + e(-1, -1)) / (4.0 * ds * dt)

    m_full = mixed(s, t)
    if not richardson:
        return m_full
    m_half = mixed(0.5 * s, 0.5 * t)
    return (4.0 * m_half - m_full) / 3.0


def bilinear_form(curve, f, g, section=None, window=None):
    """Jacobi quadratic form Q(f, g) = -int f L_v g e^{r^2/4} in flux form.

    Assembled after integration by parts, so the expression is symmetric in
    (f, g) by construction: int m (pf)'(pg)' + (1/2 - |A|^2)(pf)(pg) mu with
    p = v . n and m, mu the conformal area factors.
    """
    f = _as_node_values(curve, f)
    g = _as_node_values(curve, g)
    up, _ = curve.derivatives()
    _, A2, _, W, _, _ = _curvature_arrays(curve)
    if section is None:
        phi = np.ones_like(curve.rho)
    else:
        phi = (section.v_z - section.v_rho * up) / W
    F = phi * f
    G = phi * g
    h = curve.rho[1] - curve.rho[0]
    r2 = curve.rho**2 + curve.u**2
    e = np.exp(r2 / 4.0)
    rn = curve.rho ** (curve.n - 1)
    dF = _deriv4(F, h)
    dG = _deriv4(G, h)
    dens = rn * e * (dF * dG / W + (0.5 - A2) * F * G * W)
    if window is None:
        live = np.flatnonzero((np.abs(F) > 0) | (np.abs(G) > 0))
        if live.size == 0:
            return 0.0
        window = slice(max(0, live[0] - 2),
                       min(curve.rho.size, live[-1] + 3))
    w = trapezoid_weights(curve.rho[window])
    return sphere_area(curve.n - 1) * math.fsum(w * dens[window])


def second_variation_check(curve, f, g, section=None, s=1e-3, t=1e-3,
                           residual_tol=1e-6):
    """Mixed difference of E under s f v + t g v against the Jacobi form.

    Only valid at critical points; a surface whose expander residual exceeds
    residual_tol on the support is rejected with the measured magnitude.
    """
    f = _as_node_values(curve, f)
    g = _as_node_values(curve, g)
    if section is None:
        from .geometry import TransverseSection
        slope = getattr(curve, "slope", 0.0)
        section = TransverseSection(curve.n, slope)
    spec_a = section_field(curve, f, section, step=s)
    spec_b = section_field(curve, g, section, step=t)
    win = spec_a.window()
    res = np.max(np.abs(_node_residual(curve)[win]))
    if res > residual_tol:
        raise ValueError(
            "surface is not an expander: residual %.3e" % res)
    mixed = mixed_second_difference(curve, spec_a, spec_b, s=s, t=t)
    q_fg = bilinear_form(curve, f, g, section)
    q_gf = bilinear_form(curve, g, f, section)
    return {
        "mixed": mixed,
        "bilinear": q_fg,
        "bilinear_swapped": q_gf,
        "discrepancy": abs(mixed - q_fg),
        "symmetry": abs(q_fg - q_gf),
    }


def decoupling_check(curve, psi, g, s=3e-3, t=3e-3):
    """Mixed derivative of E along a tangential and a normal field.

    Vanishes at critical points: the tangential direction generates a
    reparametrization, which the weighted functional cannot see to first
    order. The analytic value is exactly zero, so the measurement is pure
    truncation + roundoff; the step is kept a little larger than elsewhere
    and Richardson is skipped because extrapolation only amplifies the
    roundoff of a zero signal.
    """
    spec_t = tangent_field(curve, _as_node_values(curve, psi), step=s)
    spec_n = normal_field(curve, _as_node_values(curve, g), step=t)
    return mixed_second_difference(curve, spec_t, spec_n, s=s, t=t,
                                   richardson=False)


def bump_profile(curve, lo, hi, amplitude=0.05):
    """Amplitude-scaled C^inf bump in the profile parameter."""
    return amplitude * smooth_bump(curve.rho, lo, hi)
