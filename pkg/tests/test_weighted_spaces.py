import numpy as np
import pytest

from expander_lab import (ScalarField, decay_fit, plane, trace_at_infinity,
                          weighted_norm)


def flat_field(values, span=20.0):
    values = np.asarray(values, dtype=float)
    r = np.linspace(0.0, span, values.size)
    return ScalarField(values=values, radius=r, axis=r,
                       metric=np.ones_like(r), dim=2)


def test_field_validation():
    r = np.linspace(0.0, 1.0, 8)
    with pytest.raises(ValueError, match="share one shape"):
        ScalarField(values=r[:-1], radius=r, axis=r, metric=r, dim=2)
    with pytest.raises(ValueError, match="at least 3"):
        ScalarField(values=r[:2], radius=r[:2], axis=r[:2],
                    metric=r[:2], dim=2)


def test_arclength_flat_is_axis():
    r = np.linspace(0.0, 10.0, 400)
    fld = flat_field(np.ones_like(r), span=10.0)
    np.testing.assert_allclose(fld.arclength, r, atol=1e-12)


def test_derivative_and_hessian_on_quadratic():
    # 3-point stencils are exact on quadratics, including the axis fill
    r = np.linspace(0.0, 10.0, 300)
    fld = flat_field(r**2, span=10.0)
    np.testing.assert_allclose(fld.derivative(), 2.0 * r, atol=1e-10)
    fss, ang = fld.hessian_eigs()
    np.testing.assert_allclose(fss, 2.0, atol=1e-10)
    np.testing.assert_allclose(ang, 2.0, atol=1e-10)


def test_derivative_on_smooth_field(flat):
    f = np.sin(flat.rho)
    fld = flat.field(f)
    err = np.abs(fld.derivative() - np.cos(flat.rho))
    assert np.max(err[1:-1]) < 5e-5


def test_decay_fit_recovers_power_law():
    # log2-uniform grid hits every dyadic boundary, so the per-annulus sup
    # of r^-2 sits exactly at lo and the log-log data is exactly affine
    r = 2.0 ** np.linspace(-1.0, 6.0, 225)
    fld = ScalarField(values=r**-2.0, radius=r, axis=r,
                      metric=np.ones_like(r), dim=2)
    slope, resid = decay_fit(fld)
    assert slope == pytest.approx(-2.0, abs=1e-12)
    assert resid < 1e-12
    # scale invariance
    slope2, resid2 = decay_fit(ScalarField(values=1e8 * r**-2.0, radius=r,
                                           axis=r, metric=np.ones_like(r),
                                           dim=2))
    assert slope2 == pytest.approx(slope, abs=1e-12)


def test_decay_fit_needs_four_annuli():
    r = np.linspace(0.5, 6.0, 200)
    fld = ScalarField(values=1.0 / r, radius=r, axis=r,
                      metric=np.ones_like(r), dim=2)
    with pytest.raises(ValueError, match="at least 4"):
        decay_fit(fld)


def test_weighted_norm_validation(flat):
    fld = flat.field(np.ones_like(flat.rho))
    with pytest.raises(ValueError, match="order"):
        weighted_norm(fld, 3, 0.5, 1.0)
    with pytest.raises(ValueError, match="beta"):
        weighted_norm(fld, 0, 1.5, 1.0)


def test_weighted_norm_constant_field(flat):
    c = 2.5
    fld = flat.field(np.full_like(flat.rho, c))
    rep = weighted_norm(fld, 1, 0.5, 1.0)
    # sup (1+r)^{-1} |f| peaks at the axis; derivative and Holder part vanish
    assert rep.sup_parts[0] == pytest.approx(c, rel=1e-12)
    assert rep.sup_parts[1] == pytest.approx(0.0, abs=1e-12)
    assert rep.holder_part == pytest.approx(0.0, abs=1e-11)
    assert rep.value == pytest.approx(c, rel=1e-10)
    assert rep.finite


def test_weighted_norm_report_roundtrip(flat):
    fld = flat.field(1.0 / (1.0 + flat.rho**2))
    rep = weighted_norm(fld, 0, 0.25, -1.0)
    back = type(rep).from_json(rep.to_json())
    assert back.value == rep.value
    assert back.annuli == rep.annuli
    assert back.decay_slope == rep.decay_slope
    assert "norm[" in rep.summary()


def test_weighted_norm_tracks_decay(flat):
    fld = flat.field((1.0 + flat.rho) ** -2.0)
    rep = weighted_norm(fld, 0, 0.5, -2.0)
    # (1+r)^-2 is not homogeneous on the first annuli, so the dyadic fit
    # lands above -2; it must still be clearly decaying and well resolved
    assert -2.0 < rep.decay_slope < -1.4
    assert np.isfinite(rep.decay_residual)
    # with the matching weight the weighted sup is exactly 1
    assert rep.sup_parts[0] == pytest.approx(1.0, rel=1e-12)


def test_trace_extrapolation_kills_first_order_tail():
    r = np.linspace(0.25, 64.0, 6000)
    fld = ScalarField(values=3.0 * r + 5.0, radius=r, axis=r,
                      metric=np.ones_like(r), dim=2)
    tr = trace_at_infinity(fld, 1)
    assert tr.value == pytest.approx(3.0, rel=1e-9)
    assert tr.homogeneous
    val, hom = tr
    assert (val, hom) == (tr.value, tr.homogeneous)


def test_trace_flags_inhomogeneous_field():
    # r^{-1} f alternates sign on dyadic radii, so the Cauchy differences
    # never settle
    r = np.linspace(0.25, 64.0, 6000)
    fld = ScalarField(values=r * np.cos(np.pi * np.log2(r)), radius=r,
                      axis=r, metric=np.ones_like(r), dim=2)
    tr = trace_at_infinity(fld, 1)
    assert not tr.homogeneous


def test_trace_needs_two_dyadic_radii():
    r = np.linspace(0.25, 1.5, 50)
    fld = ScalarField(values=r, radius=r, axis=r,
                      metric=np.ones_like(r), dim=2)
    with pytest.raises(ValueError, match="span too short"):
        trace_at_infinity(fld, 1)
