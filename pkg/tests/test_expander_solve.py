import numpy as np
import pytest

from expander_lab import expander_residual, shoot_profile, solve_for_cone

from conftest import CASES

# shooting heights h(a, n) for the reference cones; grid independent, so
# they double as cross-machine regression anchors
KNOWN_HEIGHTS = {
    (2, 0.5): 0.8762846454453669,
    (2, 1.0): 1.7090957966527587,
    (3, 0.5): 1.120252011987651,
}


def test_reference_heights(trio):
    for curve, (n, a) in zip(trio, ((2, 0.5), (2, 1.0), (3, 0.5))):
        assert curve.solve_info["height"] == pytest.approx(
            KNOWN_HEIGHTS[(n, a)], abs=1e-9)


def test_residual_driven_to_rounding(trio):
    for curve in trio:
        sup = float(np.max(np.abs(expander_residual(curve).values)))
        assert sup < 1e-9
        assert curve.solve_info["residual_sup"] == pytest.approx(sup, rel=1e-6)


def test_collocation_slopes_satisfy_far_bc(trio):
    # the delivery far slope is the cone slope with its 1/rho^2 correction
    for curve in trio:
        n, a = curve.n, curve.slope
        factor = 1.0 - (n - 1) / curve.rho[-1] ** 2
        assert curve.uprime[-1] == pytest.approx(a * factor, rel=1e-12)
        assert curve.uprime[0] == 0.0


def test_achieved_slope_and_metadata(trio):
    for curve, (n, a) in zip(trio, CASES):
        assert curve.n == n
        assert curve.conical
        assert curve.slope == a
        assert curve.solve_info["slope"] == pytest.approx(a, abs=1e-8)
        assert curve.solve_info["shots"] > 5
        assert curve.solve_info["slope_drift"] < 1e-2
        assert curve.meets_axis


def test_far_field_tail_shape(expander_half):
    # u - a rho ~ (n-1) a / rho far out
    rho = expander_half.rho
    i = np.searchsorted(rho, 15.0)
    corr = expander_half.u[i] - 0.5 * rho[i]
    want = (expander_half.n - 1) * 0.5 / rho[i]
    assert corr == pytest.approx(want, rel=0.01)


def test_zero_slope_returns_plane():
    out = solve_for_cone(0.0, 2, rho_max=16.0, nodes=400)
    assert np.all(out.u == 0.0)
    assert out.conical
    assert out.solve_info == {"height": 0.0, "shots": 0, "slope": 0.0}


def test_negative_slope_rejected():
    with pytest.raises(ValueError, match="nonnegative"):
        solve_for_cone(-0.25, 2)


def test_shoot_zero_height_is_plane():
    res = shoot_profile(0.0, 2)
    assert res.reached_far_field
    u, p = res.resample(np.linspace(0.0, 5.0, 50))
    assert np.all(u == 0.0) and np.all(p == 0.0)


def test_shoot_resample_series_continuation():
    res = shoot_profile(1.0, 2)
    grid = np.array([0.0, 1e-8, 1e-4, 0.5, 3.0])
    u, p = res.resample(grid)
    assert u[0] == pytest.approx(1.0, abs=1e-12)
    assert p[0] == 0.0
    # the near-axis series and the integrator agree across the seam
    seam = res.sol.t_min
    us, ps = res.resample(np.array([seam * 0.999, seam * 1.001, seam]))
    assert abs(us[0] - us[1]) < 1e-10
    assert np.all(np.isfinite(u)) and np.all(np.isfinite(p))


def test_far_slope_increases_with_height():
    slopes = [shoot_profile(h, 2).far_slope for h in (0.5, 1.0, 2.0, 4.0)]
    assert np.all(np.diff(slopes) > 0)
