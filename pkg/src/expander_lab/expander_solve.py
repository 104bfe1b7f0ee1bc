"""Rotationally symmetric self-expander profiles.

The profile of an expanding rotational graph satisfies

    u''/(1+u'^2) + (n-1) u'/rho = (u - rho u')/2,   u'(0) = 0, u(0) = h,

which is the normal expander equation H = -(x.n)/2 written for the upward
normal. Solutions leave the axis with u''(0) = h/(2n) and approach a cone
u ~ a(h) rho + (n-1) a(h)/rho; a(h) is increasing, so a target slope is hit
by bracketing in h and bisecting. A Newton collocation pass on the delivery
grid then drives the *discrete* residual (the same stencils `expander_residual`
evaluates) to rounding level.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import solve_banded
from scipy.optimize import brentq

from ._numerics import apply_stencil, derivative_weights
from .geometry import ProfileCurve, expander_residual, plane

SLOPE_LIMIT = 100.0     # |u'| beyond this counts as a non-graphical turn
HEIGHT_LIMIT = 1.0e6
MAX_DOUBLINGS = 60


@dataclass
class ShootingResult:
    height: float
    dim: int
    rho_max: float
    far_slope: float          # slope estimate corrected for the 1/rho tail
    slope_drift: float        # |u'(rho_max) - u'(rho_max/2)|, tail settling
    turned: bool              # |u'| exceeded SLOPE_LIMIT before rho_max
    blew_up: bool
    sol: object               # dense solution handle (None if h == 0)

    @property
    def reached_far_field(self):
        return not (self.turned or self.blew_up)

    def resample(self, grid):
        """(u, u') on the requested nodes, series-continued under rho_start."""
        grid = np.asarray(grid, dtype=float)
        if self.sol is None:
            return np.zeros_like(grid), np.zeros_like(grid)
        lo = self.sol.t_min
        u = np.empty_like(grid)
        p = np.empty_like(grid)
        near = grid < lo
        h, n = self.height, self.dim
        u[near] = h + h * grid[near] ** 2 / (4 * n)
        p[near] = h * grid[near] / (2 * n)
        vals = self.sol(np.clip(grid[~near], lo, self.sol.t_max))
        u[~near], p[~near] = vals[0], vals[1]
        return u, p


def _rhs(rho, y, n):
    u, p = y
    curv = (u - rho * p) / 2.0 - (n - 1) * p / rho
    return [p, (1.0 + p * p) * curv]


def shoot_profile(height, n, rho_max=20.0, rtol=1e-11):
    """Integrate the profile ODE from the axis with u(0)=h, u'(0)=0."""
    h = float(height)
    if h == 0.0:
        return ShootingResult(height=0.0, dim=n, rho_max=rho_max,
                              far_slope=0.0, slope_drift=0.0,
                              turned=False, blew_up=False, sol=None)
    rho0 = 1e-6
    y0 = [h + h * rho0**2 / (4 * n), h * rho0 / (2 * n)]

    def turn(rho, y, n):
        return abs(y[1]) - SLOPE_LIMIT
    turn.terminal = True

    def blow(rho, y, n):
        return abs(y[0]) - HEIGHT_LIMIT * max(1.0, abs(h))
    blow.terminal = True

    out = solve_ivp(_rhs, (rho0, rho_max), y0, args=(n,), method="DOP853",
                    rtol=rtol, atol=rtol * 1e-2, dense_output=True,
                    events=(turn, blow))
    turned = len(out.t_events[0]) > 0
    blew = len(out.t_events[1]) > 0
    if turned or blew or not out.success:
        return ShootingResult(height=h, dim=n, rho_max=rho_max,
                              far_slope=float("inf"), slope_drift=float("inf"),
                              turned=turned, blew_up=blew or not out.success,
                              sol=out.sol)
    p_far = out.sol(rho_max)[1]
    p_mid = out.sol(rho_max / 2.0)[1]
    far_slope = p_far / (1.0 - (n - 1) / rho_max**2)
    return ShootingResult(height=h, dim=n, rho_max=rho_max,
                          far_slope=float(far_slope),
                          slope_drift=float(abs(p_far - p_mid)),
                          turned=False, blew_up=False, sol=out.sol)


def _discrete_residual_rows(n, rho, u, a_target):
    """(residual, Jacobian bands) of the collocated expander system.

    Rows: axis limit at node 0, centered residual at 1..N-2, slope condition
    u'(rho_max) = a (1 - (n-1)/rho_max^2) at the last node. Uses exactly the
    stencils of `ProfileCurve.derivatives`, so a converged solve makes
    `expander_residual` vanish to rounding on the same grid.
    """
    N = rho.size
    W1, W2 = derivative_weights(rho)
    up = apply_stencil(W1, u)
    upp = apply_stencil(W2, u)
    h0 = rho[1] - rho[0]
    up[0] = 0.0
    upp[0] = 2.0 * (u[1] - u[0]) / h0**2

    W = np.sqrt(1.0 + up**2)
    R = np.empty(N)
    R[0] = n * upp[0] - 0.5 * u[0]
    xi = u - rho * up
    R[1:-1] = (upp[1:-1] / W[1:-1] ** 3
               + (n - 1) * up[1:-1] / (rho[1:-1] * W[1:-1])
               - xi[1:-1] / (2.0 * W[1:-1]))
    a_row = a_target * (1.0 - (n - 1) / rho[-1] ** 2)
    R[-1] = up[-1] - a_row

    # pointwise partials; rows 0 and N-1 are replaced, axis division is moot
    dR_dupp = 1.0 / W**3
    with np.errstate(divide="ignore", invalid="ignore"):
        dR_dup = (-3.0 * upp * up / W**5 + (n - 1) / (rho * W**3)
                  + rho / (2.0 * W) + xi * up / (2.0 * W**3))
    dR_du = -1.0 / (2.0 * W)

    # banded Jacobian, bandwidth 2 for the one-sided end rows
    ab = np.zeros((5, N))  # diagonals +2, +1, 0, -1, -2

    def add(i, j, val):
        ab[2 + i - j, j] += val

    add(0, 0, -2.0 * n / h0**2 - 0.5)
    add(0, 1, 2.0 * n / h0**2)
    for k in range(3):
        cols = np.arange(1, N - 1) + (k - 1)
        vals = dR_dupp[1:-1] * W2[1:-1, k] + dR_dup[1:-1] * W1[1:-1, k]
        if k == 1:
            vals = vals + dR_du[1:-1]
        ab[3 - k, cols] += vals   # row i, col i+k-1 lives on diagonal 1-k
    for k in range(3):
        add(N - 1, N - 3 + k, W1[-1, k])
    return R, ab


def refine_collocation(curve, a_target=None, tol=1e-12, max_iter=30):
    """Newton-polish a nearby profile so the discrete residual vanishes.

    Unknowns are the heights; the slopes of the returned curve are the shared
    stencil slopes of the refined heights. Requires the grid to meet the axis.
    """
    if not curve.meets_axis:
        raise ValueError("collocation grid must start on the axis")
    a = curve.slope if a_target is None else float(a_target)
    n, rho = curve.n, curve.rho
    u = curve.u.copy()
    sup_prev = np.inf
    for _ in range(max_iter):
        R, ab = _discrete_residual_rows(n, rho, u, a)
        sup = float(np.max(np.abs(R)))
        if sup < tol or sup > 0.25 * sup_prev:
            break   # converged, or hit the stencil rounding floor
        sup_prev = sup
        du = solve_banded((2, 2), ab, -R)
        u = u + du
        if not np.all(np.isfinite(u)):
            raise RuntimeError("collocation diverged")
    # rounding floor of the second-difference stencil on this grid
    h_min = float(np.min(np.diff(rho)))
    floor = 64.0 * np.finfo(float).eps * (1.0 + float(np.max(np.abs(u)))) / h_min**2
    if sup > max(1e3 * tol, floor):
        raise RuntimeError(f"collocation stalled at residual {sup:.3g}")
    W1, _ = derivative_weights(rho)
    up = apply_stencil(W1, u)
    up[0] = 0.0
    out = ProfileCurve(n, rho, u, up, slope=a, conical=True)
    out._cache["collocation_residual"] = sup
    return out


def solve_for_cone(a_target, n, rho_max=20.0, nodes=2000, tol=1e-8):
    """Expander profile asymptotic to the cone u = a_target * rho.

    Shooting + bracketing in the axis height h (a(h) is increasing from
    a(0) = 0), then collocation refinement on the uniform delivery grid.
    """
    a_target = float(a_target)
    if a_target < 0:
        raise ValueError("target slope must be nonnegative")
    grid = np.linspace(0.0, rho_max, nodes)
    if a_target == 0.0:
        out = plane(n, span=rho_max, nodes=nodes)
        out.solve_info = {"height": 0.0, "shots": 0, "slope": 0.0}
        return out

    shots = {"count": 0}

    def slope_of(h):
        shots["count"] += 1
        res = shoot_profile(h, n, rho_max=rho_max)
        return res.far_slope if res.reached_far_field else 1e9

    h_hi = 1.0
    doublings = 0
    while slope_of(h_hi) <= a_target:
        h_hi *= 2.0
        doublings += 1
        if doublings > MAX_DOUBLINGS:
            raise RuntimeError("target slope not bracketed after "
                               f"{MAX_DOUBLINGS} height doublings")
    h_star = brentq(lambda h: slope_of(h) - a_target, 0.0, h_hi,
                    xtol=1e-13, rtol=8.9e-16)
    final = shoot_profile(h_star, n, rho_max=rho_max, rtol=1e-12)
    if not final.reached_far_field:
        raise RuntimeError("converged height no longer reaches the far field")
    achieved = final.far_slope
    if abs(achieved - a_target) > tol * max(1.0, a_target):
        raise RuntimeError("bracketed height misses the target slope: "
                           f"{achieved!r} vs {a_target!r}")
    u, up = final.resample(grid)
    rough = ProfileCurve(n, grid, u, up, slope=a_target, conical=True)
    out = refine_collocation(rough, a_target=a_target, tol=max(1e-13, tol * 1e-4))
    resid = expander_residual(out)
    sup = float(np.max(np.abs(resid.values)))
    if sup > 10.0 * tol:
        raise RuntimeError(f"refined residual {sup:.3g} exceeds 10*tol")
    out.solve_info = {"height": h_star, "shots": shots["count"],
                      "slope": achieved, "residual_sup": sup,
                      "slope_drift": final.slope_drift}
    return out
