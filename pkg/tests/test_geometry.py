import json

import numpy as np
import pytest

from expander_lab import (ProfileCurve, TransverseSection, cone,
                          cone_correction, curvature_at, expander_residual,
                          load_profile, plane, save_profile, sphere_cap,
                          vgraph_residual)


def test_plane_residual_vanishes(flat):
    res = expander_residual(flat)
    assert np.max(np.abs(res.values)) == 0.0


def test_sphere_cap_residual_is_constant():
    """Radius-2 sphere: H = 1 with the upward normal, x.n = 2."""
    cap = sphere_cap(2.0, n=2, frac=0.5, nodes=2000)
    res = expander_residual(cap)
    np.testing.assert_allclose(res.values, -2.0, rtol=0, atol=2e-7)


def test_sphere_curvature_sample():
    cap = sphere_cap(2.0, n=2, frac=0.5, nodes=2000)
    s = curvature_at(cap, 700)
    assert s.mean_curvature == pytest.approx(1.0, abs=1e-7)
    assert s.second_fundamental_norm2 == pytest.approx(0.5, abs=1e-7)
    assert s.position_normal == pytest.approx(2.0, abs=1e-9)
    assert np.linalg.norm(s.normal) == pytest.approx(1.0, rel=1e-12)
    assert s.expander_defect() == pytest.approx(-2.0, abs=1e-7)


def test_cone_residual_closed_form():
    # exact cone u = a rho: x.n = 0, so the defect is (n-1) a / (rho W)
    a = 0.7
    c = cone(3, a, rho_min=1.0, span=20.0, nodes=2000)
    res = expander_residual(c)
    W = np.sqrt(1.0 + a**2)
    want = 2.0 * a / (res.axis * W)
    np.testing.assert_allclose(res.values, want, rtol=1e-7)


def test_residual_matches_pointwise_samples(expander_half):
    res = expander_residual(expander_half)
    for i in (5, 200, 1000, 1500):
        s = curvature_at(expander_half, i)
        assert res.values[i] == pytest.approx(s.expander_defect(), abs=1e-14)


def test_cone_correction_values(expander_one):
    corr = cone_correction(expander_one)
    want = expander_one.u - expander_one.rho
    np.testing.assert_array_equal(corr.values, want)
    assert corr.values[0] > 1.0          # axis height
    assert abs(corr.values[-1]) < 0.1    # tail has flattened


def test_profile_curve_validation():
    rho = np.linspace(0.0, 1.0, 20)
    flat_u = np.zeros_like(rho)
    with pytest.raises(ValueError, match="at least"):
        ProfileCurve(2, rho[:10], flat_u[:10], flat_u[:10])
    with pytest.raises(ValueError, match="shape"):
        ProfileCurve(2, rho, flat_u[:-1], flat_u)
    with pytest.raises(ValueError, match="increasing"):
        ProfileCurve(2, rho[::-1].copy(), flat_u, flat_u)
    with pytest.raises(ValueError, match="zero slope"):
        ProfileCurve(2, rho, rho.copy(), np.ones_like(rho))


def test_rescaled_curve_scales_radius(expander_half):
    big = expander_half.rescaled(2.0)
    assert big.span() == pytest.approx(2.0 * expander_half.span(), rel=1e-12)
    np.testing.assert_allclose(big.u, 2.0 * expander_half.u)


def test_save_load_roundtrip(tmp_path, expander_half):
    path = tmp_path / "prof.csv"
    save_profile(expander_half, path)
    back = load_profile(path)
    np.testing.assert_array_equal(back.rho, expander_half.rho)
    np.testing.assert_array_equal(back.u, expander_half.u)
    np.testing.assert_array_equal(back.uprime, expander_half.uprime)
    assert back.n == expander_half.n
    assert back.slope == expander_half.slope
    assert back.conical


def test_load_profile_skips_comment_preamble(tmp_path, flat):
    path = tmp_path / "prof.csv"
    save_profile(flat, path)
    body = path.read_text()
    path.write_text("# seed: 11\n# extra note\n" + body)
    back = load_profile(path)
    np.testing.assert_array_equal(back.u, flat.u)


def test_load_profile_rejects_alien_header(tmp_path):
    path = tmp_path / "prof.csv"
    path.write_text("x,y\n0,0\n")
    (tmp_path / "prof.csv.meta.json").write_text(
        json.dumps({"dimension": 2, "slope": 0.0, "conical": True}))
    with pytest.raises(ValueError, match="header"):
        load_profile(path)


def test_transverse_section_unit_and_transverse():
    sec = TransverseSection(2, 0.5, v_rho=0.3, v_z=np.sqrt(0.91))
    assert sec.v_rho**2 + sec.v_z**2 == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(ValueError):
        # parallel to the cone direction: not transverse
        a = 0.5
        W = np.hypot(1.0, a)
        TransverseSection(2, a, v_rho=1.0 / W, v_z=a / W)


def test_vgraph_residual_zero_graph_matches_cone():
    """The graph of 0 over the cone is the cone itself, node for node."""
    rho = np.linspace(1.0, 16.0, 800)
    sec = TransverseSection(2, 0.5, rho=rho)
    res = vgraph_residual(sec, np.zeros_like(rho))
    base = expander_residual(sec.cone_curve())
    np.testing.assert_allclose(res.values, base.values, rtol=0, atol=1e-11)


def test_vgraph_residual_recovers_tilted_graph():
    """Residual of a graph over the cone agrees with the residual of the
    same surface re-sampled as a plain profile curve."""
    rho = np.linspace(1.0, 16.0, 4000)
    sec = TransverseSection(2, 0.5, rho=rho, v_rho=0.3, v_z=np.sqrt(0.91))
    f = 0.05 * np.exp(-((rho - 6.0) / 1.5) ** 2)
    res = vgraph_residual(sec, f)
    direct = expander_residual(sec.graph_curve(f))
    inner = np.interp(res.axis[50:-50], direct.axis, direct.values)
    assert np.max(np.abs(res.values[50:-50] - inner)) < 1e-6
