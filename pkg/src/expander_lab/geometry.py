"""Sampled rotationally symmetric hypersurfaces and their curvature.

A surface in R^{n+1} is the rotation of a profile graph u(rho) about the
vertical axis: points (rho*omega, u(rho)), omega in S^{n-1}. The unit normal
is the upward one, n = (-u' omega, 1)/W with W = sqrt(1+u'^2), the scalar mean
curvature is H = div(n) (so H = n/R on a sphere with outward normal), and the
self-expanding residual is (H_vec - x_perp/2) . n = -H - (x.n)/2.

All discrete derivatives of a profile come from the shared 3-point stencils in
`_numerics`; every consumer (curvature, residuals, operator coefficients, the
v-graph map) therefore sees the same numbers per node, which is what makes the
cross-route identity checks exact to rounding rather than to truncation order.
"""

import json
from dataclasses import dataclass

import numpy as np

from ._numerics import apply_stencil, derivative_weights
from .weighted_spaces import ScalarField

MIN_NODES = 16
TRANSVERSALITY_MARGIN = 0.05


class ProfileCurve:
    """Immutable sampled profile of a rotationally symmetric hypersurface.

    Parameters
    ----------
    n : surface dimension (the ambient space is R^{n+1})
    rho : strictly increasing node radii (axis distance); rho[0] == 0 means
        the curve closes smoothly on the axis
    u : heights
    uprime : slopes as recorded by the producer (integrator or stencil)
    slope : asymptotic cone slope a (meaningful when `conical`)
    conical : whether the curve is asymptotic to the cone u = a*rho
    """

    def __init__(self, n, rho, u, uprime, slope=0.0, conical=False):
        rho = np.array(rho, dtype=float)
        u = np.array(u, dtype=float)
        uprime = np.array(uprime, dtype=float)
        if rho.ndim != 1 or rho.size < MIN_NODES:
            raise ValueError(f"need at least {MIN_NODES} nodes")
        if not (rho.shape == u.shape == uprime.shape):
            raise ValueError("rho, u, uprime must share one shape")
        if np.any(np.diff(rho) <= 0):
            raise ValueError("rho must be strictly increasing")
        if rho[0] < 0:
            raise ValueError("rho must be nonnegative")
        if rho[0] == 0.0 and abs(uprime[0]) > 1e-10:
            raise ValueError("a curve meeting the axis needs zero slope there")
        if conical:
            tail = np.abs(uprime[rho >= 0.75 * rho[-1]] - slope)
            if tail.size >= 3 and np.any(np.diff(tail) > 1e-9 + 0.05 * tail[:-1]):
                raise ValueError("conical flag set but |u' - a| is not "
                                 "settling on the final quartile")
        for a in (rho, u, uprime):
            a.flags.writeable = False
        self.n = int(n)
        self.rho = rho
        self.u = u
        self.uprime = uprime
        self.slope = float(slope)
        self.conical = bool(conical)
        self._cache = {}

    # -- discrete differential data ------------------------------------

    @property
    def meets_axis(self):
        return self.rho[0] == 0.0

    def stencils(self):
        if "stencils" not in self._cache:
            self._cache["stencils"] = derivative_weights(self.rho)
        return self._cache["stencils"]

    def derivatives(self):
        """Stencil slopes and curvatures (up, upp) of the height samples.

        At an axis node the symmetric extension u(-rho) = u(rho) replaces the
        one-sided rows: u'(0) = 0, u''(0) = 2(u1-u0)/h^2.
        """
        if "derivs" not in self._cache:
            W1, W2 = self.stencils()
            up = apply_stencil(W1, self.u)
            upp = apply_stencil(W2, self.u)
            if self.meets_axis:
                h = self.rho[1] - self.rho[0]
                up[0] = 0.0
                upp[0] = 2.0 * (self.u[1] - self.u[0]) / h**2
            self._cache["derivs"] = (up, upp)
        return self._cache["derivs"]

    def metric_factor(self):
        """W = sqrt(1 + u'^2) from the stencil slopes."""
        up, _ = self.derivatives()
        return np.sqrt(1.0 + up**2)

    def radius(self):
        """Ambient radius |x| per node."""
        return np.hypot(self.rho, self.u)

    def span(self):
        return float(self.radius().max())

    # -- constructors ----------------------------------------------------

    def rescaled(self, factor):
        """The parabolically rescaled surface factor * Sigma."""
        return ProfileCurve(self.n, factor * self.rho, factor * self.u,
                            self.uprime.copy(), slope=self.slope,
                            conical=self.conical)

    def field(self, values, lo=0, hi=None):
        """Wrap nodal values (on rho[lo:hi]) as a ScalarField on this surface."""
        sl = slice(lo, hi)
        return ScalarField(values=np.asarray(values, dtype=float),
                           radius=self.radius()[sl], axis=self.rho[sl],
                           metric=self.metric_factor()[sl], dim=self.n,
                           host=self)


def plane(n=2, span=20.0, nodes=2000):
    rho = np.linspace(0.0, span, nodes)
    z = np.zeros_like(rho)
    return ProfileCurve(n, rho, z, z, slope=0.0, conical=True)


def sphere_cap(radius, n=2, frac=0.125, nodes=1000):
    """Polar cap of the radius-R sphere as a profile graph."""
    rho = np.linspace(0.0, frac * radius, nodes)
    u = np.sqrt(radius**2 - rho**2)
    return ProfileCurve(n, rho, u, -rho / u, slope=0.0, conical=False)


def cone(n, slope, rho_min=1.0, span=20.0, nodes=2000):
    """Exact cone u = a*rho, sampled away from its vertex."""
    rho = np.linspace(rho_min, span, nodes)
    return ProfileCurve(n, rho, slope * rho, np.full_like(rho, slope),
                        slope=slope, conical=True)


@dataclass
class CurvatureSample:
    """Pointwise curvature data at one node (representative omega = e1)."""

    index: int
    position: np.ndarray
    normal: np.ndarray
    mean_curvature: float           # H = div(n), upward normal
    second_fundamental_norm2: float  # |A|^2
    position_normal: float           # x . n
    kappa_profile: float
    kappa_rotational: float

    def expander_defect(self):
        return -self.mean_curvature - 0.5 * self.position_normal


def _curvature_arrays(curve):
    if "curv" in curve._cache:
        return curve._cache["curv"]
    rho, u = curve.rho, curve.u
    up, upp = curve.derivatives()
    W = np.sqrt(1.0 + up**2)
    with np.errstate(divide="ignore", invalid="ignore"):
        k_rot = -up / (rho * W)
    k_prof = -upp / W**3
    xn = (u - rho * up) / W
    if curve.meets_axis:
        k_rot[0] = -upp[0]
    H = k_prof + (curve.n - 1) * k_rot
    A2 = k_prof**2 + (curve.n - 1) * k_rot**2
    curve._cache["curv"] = (H, A2, xn, W, k_prof, k_rot)
    return curve._cache["curv"]


def curvature_at(curve, index):
    """Curvature sample at one node, from the shared profile stencils."""
    i = int(index)
    n = curve.n
    H, A2, xn, W, kp, kr = _curvature_arrays(curve)
    up, _ = curve.derivatives()
    pos = np.zeros(n + 1)
    pos[0] = curve.rho[i]
    pos[-1] = curve.u[i]
    nor = np.zeros(n + 1)
    nor[0] = -up[i] / W[i]
    nor[-1] = 1.0 / W[i]
    return CurvatureSample(index=i, position=pos, normal=nor,
                           mean_curvature=float(H[i]),
                           second_fundamental_norm2=float(A2[i]),
                           position_normal=float(xn[i]),
                           kappa_profile=float(kp[i]),
                           kappa_rotational=float(kr[i]))


def residual_node_range(curve):
    """Nodes where the expander residual is a centered (or axis) stencil."""
    lo = 0 if curve.meets_axis else 1
    return lo, curve.rho.size - 1


def expander_residual(curve):
    """(H_vec - x_perp/2) . n as a ScalarField on the stencil-complete nodes."""
    H, _, xn, _, _, _ = _curvature_arrays(curve)
    lo, hi = residual_node_range(curve)
    vals = -H[lo:hi] - 0.5 * xn[lo:hi]
    return curve.field(vals, lo, hi)


def cone_correction(curve):
    """Deviation u - a*rho from the asymptotic cone as a ScalarField."""
    return curve.field(curve.u - curve.slope * curve.rho)


class TransverseSection:
    """Homogeneous degree-zero unit section over a rotationally symmetric cone.

    The section is v = v_rho * (radial direction) + v_z * vertical, constant
    on rays, with v_rho^2 + v_z^2 = 1. It must stay uniformly transverse to
    the cone u = slope * rho.
    """

    def __init__(self, n, slope, rho=None, v_rho=0.0, v_z=1.0):
        if rho is not None:
            rho = np.array(rho, dtype=float)
            if rho.ndim != 1 or rho.size < MIN_NODES:
                raise ValueError(f"need at least {MIN_NODES} cone nodes")
            if rho[0] <= 0:
                raise ValueError("cone samples must stay away from the vertex")
            rho.flags.writeable = False
        norm = np.hypot(v_rho, v_z)
        if norm == 0:
            raise ValueError("zero section")
        self.n = int(n)
        self.slope = float(slope)
        self.rho = rho
        self.v_rho = float(v_rho / norm)
        self.v_z = float(v_z / norm)
        w = np.sqrt(1.0 + self.slope**2)
        self.cone_margin = (self.v_z - self.v_rho * self.slope) / w
        if self.cone_margin < TRANSVERSALITY_MARGIN:
            raise ValueError("section nearly tangent: margin %.3g < %.3g"
                             % (self.cone_margin, TRANSVERSALITY_MARGIN))

    def normal_component(self, curve):
        """v . n along a profile curve (sampled on the curve's own grid)."""
        up, _ = curve.derivatives()
        W = curve.metric_factor()
        return (self.v_z - self.v_rho * up) / W

    def cone_curve(self):
        if self.rho is None:
            raise ValueError("this section carries no cone grid")
        return ProfileCurve(self.n, self.rho, self.slope * self.rho,
                            np.full_like(self.rho, self.slope),
                            slope=self.slope, conical=True)

    def graph_curve(self, graph_fn):
        """The section graph {x + f v} as a ProfileCurve on its own radii."""
        if self.rho is None:
            raise ValueError("this section carries no cone grid")
        f = np.asarray(graph_fn, dtype=float)
        P = self.rho + f * self.v_rho
        Z = self.slope * self.rho + f * self.v_z
        if np.any(np.diff(P) <= 0):
            raise ValueError("graph leaves the section's graphical range")
        W1, _ = derivative_weights(self.rho)
        dP = apply_stencil(W1, P)
        dZ = apply_stencil(W1, Z)
        return ProfileCurve(self.n, P, Z, dZ / dP, slope=self.slope,
                            conical=False)


def vgraph_residual(section, graph_fn):
    """Expander residual of the section graph {x + f(x) v : x in cone}.

    Computed in the cone parametrization through the graphical identity
        v.(H - x_perp/2)[h] = (v.n[h]) (L_cone h + (g_h^{-1} - g^{-1})
                                         : Hess_cone h) . n[h],
    and returned in normal form, i.e. divided by v.n[h], so that f == 0
    reproduces `expander_residual` of the cone verbatim. Values are reported
    on the interior (stencil-complete) cone nodes.
    """
    f = np.asarray(graph_fn, dtype=float)
    if f.shape != section.rho.shape:
        raise ValueError("graph_fn must be sampled on the section's nodes")
    n, a = section.n, section.slope
    rho = section.rho
    Wc2 = 1.0 + a * a
    W1, W2 = derivative_weights(rho)

    P = rho + f * section.v_rho
    Z = a * rho + f * section.v_z
    dP, d2P = apply_stencil(W1, P), apply_stencil(W2, P)
    dZ, d2Z = apply_stencil(W1, Z), apply_stencil(W2, Z)
    if np.any(dP <= 0):
        raise ValueError("graph leaves the section's graphical range")

    # base (cone) drifted operator on mode-0 / mode-1 profiles
    drift = (n - 1) / (rho * Wc2) + 0.5 * rho

    def op(mode, val, dval, d2val):
        lam = mode * (mode + n - 2)
        return d2val / Wc2 + drift * dval - lam * val / rho**2 - 0.5 * val

    LZ = op(0, Z, dZ, d2Z)
    LP = op(1, P, dP, d2P)

    gh_rr = dP**2 + dZ**2
    d_inv_rr = 1.0 / gh_rr - 1.0 / Wc2
    d_inv_ang = 1.0 / P**2 - 1.0 / rho**2
    corr_Z = d_inv_rr * d2Z + (n - 1) * d_inv_ang * (rho / Wc2) * dZ
    corr_P = d_inv_rr * d2P + (n - 1) * d_inv_ang * ((rho / Wc2) * dP - P)

    Wh = np.sqrt(gh_rr)
    resid = (-(LP + corr_P) * dZ + (LZ + corr_Z) * dP) / Wh

    vals = resid[1:-1]
    r_amb = np.hypot(P, Z)
    W_im = Wh / dP  # arclength density of the image in its own radial param
    return ScalarField(values=vals, radius=r_amb[1:-1], axis=P[1:-1],
                       metric=W_im[1:-1], dim=n, host=section)


def save_profile(curve, path):
    """CSV (rho,u,uprime) plus a JSON sidecar with the scalar metadata."""
    lines = ["rho,u,uprime"]
    for r, z, p in zip(curve.rho, curve.u, curve.uprime):
        lines.append(f"{float(r)!r},{float(z)!r},{float(p)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    meta = {"dimension": curve.n, "slope": curve.slope,
            "rho_max": float(curve.rho[-1]), "conical": curve.conical}
    with open(str(path) + ".meta.json", "w") as fh:
        json.dump(meta, fh, sort_keys=True)
        fh.write("\n")


def load_profile(path):
    with open(path) as fh:
        header = fh.readline().strip()
        while header.startswith("#"):
            header = fh.readline().strip()
        if header != "rho,u,uprime":
            raise ValueError(f"unexpected profile header: {header!r}")
        data = np.array([[float(tok) for tok in line.split(",")]
                         for line in fh if line.strip()])
    with open(str(path) + ".meta.json") as fh:
        meta = json.load(fh)
    return ProfileCurve(meta["dimension"], data[:, 0], data[:, 1], data[:, 2],
                        slope=meta["slope"], conical=meta["conical"])
