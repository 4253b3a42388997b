import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from zonalmc.errors import ArgumentError, CapabilityError
from zonalmc.geometry import Evaluation, killing_residual, metric_values
from zonalmc.invariants import run_suite
from zonalmc.manifolds import (ArclengthProfile, Ellipsoid2DChart, Ellipsoid3DChart, FlatTorusChart,
                               Sphere2Chart, killing_basis, killing_combination, make_chart)
from zonalmc.profiles import Profile


@given(st.floats(0.2, 4.0))
def test_arclength_profile_has_unit_speed(a):
    prof = ArclengthProfile(a)
    r = np.linspace(-prof.d * 0.999, prof.d * 0.999, 101)
    _, d1, _ = prof.c1(r)
    _, e1, _ = prof.c2(r)
    assert np.allclose(d1 * d1 + e1 * e1, 1.0, atol=1e-12)


def test_arclength_half_length_matches_quadrature():
    for a in (0.5, 2.0):
        prof = ArclengthProfile(a)
        ref, _ = integrate.quad(lambda t: np.sqrt(a * a * np.sin(t) ** 2 + np.cos(t) ** 2), 0, np.pi / 2)
        assert prof.d == pytest.approx(ref, rel=1e-12)


def test_arclength_profile_traces_the_ellipse(rng):
    prof = ArclengthProfile(2.0)
    r = rng.uniform(-prof.d, prof.d, 50)
    x, z = prof.c1(r)[0], prof.c2(r)[0]
    assert np.allclose(x * x / 4.0 + z * z, 1.0)


def test_sphere_profile_is_cosine():
    ch = Sphere2Chart()
    r = np.linspace(-1.5, 1.5, 31)
    c, d1, d2 = ch.profile.c1(r)
    assert np.allclose(c, np.cos(r), atol=1e-13)
    assert np.allclose(d1, -np.sin(r), atol=1e-12)
    assert np.allclose(d2, -np.cos(r), atol=1e-11)
    assert ch.d == pytest.approx(np.pi / 2)


def test_second_derivatives_match_differences():
    prof = ArclengthProfile(0.6)
    r = np.linspace(-0.5, 0.5, 11)
    h = 1e-5
    for fn in (prof.c1, prof.c2):
        assert np.allclose(fn(r)[2], (fn(r + h)[1] - fn(r - h)[1]) / (2 * h), atol=1e-7)


def test_density_closed_form(rng):
    ch = Ellipsoid3DChart(0.7)
    pts = ch.sample(50, rng, 1e-2)
    assert np.allclose(Evaluation(ch, pts).density.val, ch.density_closed_form(pts[:, 2]), rtol=1e-12)


def test_metric_is_the_pullback_of_the_embedding(rng):
    a = 2.0
    ch = Ellipsoid3DChart(a)

    def embed(x):
        xi, mu, chi = x
        return np.array([a * np.cos(xi) * np.sin(chi), a * np.sin(xi) * np.sin(chi),
                         np.cos(mu) * np.cos(chi), np.sin(mu) * np.cos(chi)])

    for x in ch.sample(5, rng, 0.05):
        J = np.stack([(embed(x + h) - embed(x - h)) / 2e-6 for h in np.eye(3) * 1e-6], 1)
        assert np.allclose(J.T @ J, metric_values(ch, x[None])[0], atol=1e-8)
        p = embed(x)
        assert (p[0] ** 2 + p[1] ** 2) / a**2 + p[2] ** 2 + p[3] ** 2 == pytest.approx(1.0)


def test_invalid_aspect_ratio():
    with pytest.raises(ArgumentError):
        Ellipsoid3DChart(0.0)
    with pytest.raises(ArgumentError):
        Ellipsoid2DChart(-1.0)
    with pytest.raises(ArgumentError):
        make_chart("hyperboloid")


def test_make_chart_kinds():
    assert isinstance(make_chart("sphere2"), Sphere2Chart)
    assert make_chart("ellipsoid2d", 3.0).a == 3.0
    assert make_chart("ellipsoid3d", 0.5).dim == 3
    assert make_chart("flat-torus").dim == 2


@pytest.mark.parametrize("chart,size", [(Sphere2Chart(), 3), (Ellipsoid2DChart(2.0), 1),
                                        (Ellipsoid3DChart(2.0), 2), (FlatTorusChart(3), 3)])
def test_killing_basis(chart, size, rng):
    basis = killing_basis(chart)
    assert len(basis) == size
    pts = chart.sample(200, rng, 1e-2)
    for X in basis:
        assert killing_residual(X, pts) < 1e-10


def test_killing_basis_refuses_round_three_sphere():
    with pytest.raises(CapabilityError):
        killing_basis(Ellipsoid3DChart(1.0))


def test_killing_combination(chart3, rng):
    X = killing_combination(chart3, [2.0, -3.0])
    pts = chart3.sample(10, rng, 1e-2)
    assert np.allclose(X.values(pts), [2.0, -3.0, 0.0])
    with pytest.raises(ArgumentError):
        killing_combination(chart3, [1.0])


@pytest.mark.parametrize("chart", [Sphere2Chart(), Ellipsoid2DChart(2.0), Ellipsoid3DChart(2.0),
                                   Ellipsoid3DChart(0.5), FlatTorusChart(2)])
def test_identity_suite_passes(chart):
    failed = [c for c in run_suite(chart, n_samples=100, grid_n=8) if not c.passed]
    assert failed == []


def test_profile_families(rng):
    u = rng.uniform(0.0, 1.5, 200)
    bump = Profile.bump(0.7, 0.2, amplitude=2.0)
    v = bump.derivs(u)[0]
    assert np.all(v[np.abs(u - 0.7) >= 0.2] == 0.0)
    assert bump.derivs(np.array([0.7]))[0][0] == pytest.approx(2.0)
    flip = bump.flipped()
    assert np.allclose(flip.derivs(u)[0] ** 2 + v**2, 8.0)
    with pytest.raises(ArgumentError):
        bump.flipped(level=1.0)
    poly = Profile.poly_cos2([1.0, 2.0])
    assert np.allclose(poly.derivs(u)[0], 1.0 + 2.0 * np.cos(u) ** 2)
    table = Profile.table([0.0, 0.5, 1.0, 1.5], [0.0, 1.0, 4.0, 9.0], degree=2)
    assert table.derivs(np.array([0.75]))[0][0] == pytest.approx(0.75**2 * 4)
    with pytest.raises(ArgumentError):
        Profile.table([0.0, 0.0, 1.0, 2.0], [0, 1, 2, 3])
    with pytest.raises(ArgumentError):
        Profile("wavelet")


@pytest.mark.parametrize("profile", [Profile.bump(0.7, 0.3), Profile.raised_cosine(0.6, 0.4),
                                     Profile.poly_cos2([0.5, -1.0, 2.0]), Profile.bump(0.7, 0.3).flipped()])
def test_profile_derivatives_match_differences(profile):
    u = np.linspace(0.45, 0.95, 21)
    h = 1e-6
    f0, f1, f2 = profile.derivs(u)
    assert np.allclose(f1, (profile.derivs(u + h)[0] - profile.derivs(u - h)[0]) / (2 * h), atol=1e-6)
    assert np.allclose(f2, (profile.derivs(u + h)[1] - profile.derivs(u - h)[1]) / (2 * h), atol=1e-5)


def test_profile_round_trip():
    for prof in (Profile.bump(0.7, 0.3), Profile.bump(0.7, 0.3).flipped(), Profile.constant(2.0)):
        assert Profile.from_dict(prof.to_dict()) == prof


def test_worked_chart_examples():
    sphere = Ellipsoid2DChart(1.0)
    c, _, _ = sphere.profile.c1(np.array([0.0, np.pi / 4]))
    s, _, _ = sphere.profile.c2(np.array([0.0]))
    assert c == pytest.approx([1.0, 0.70711], abs=1e-5) and s[0] == pytest.approx(0.0, abs=1e-15)
    assert metric_values(Ellipsoid2DChart(2.0), np.array([[0.0, 0.3]]))[0][1, 1] == pytest.approx(4.0)
    round3 = Ellipsoid3DChart(1.0)
    x = np.array([[0.2, -0.4, 0.7]])
    assert np.allclose(metric_values(round3, x)[0], np.diag([np.sin(0.7) ** 2, np.cos(0.7) ** 2, 1.0]))
    from zonalmc.geometry import christoffel
    assert christoffel(round3, x[0])[2, 2, 2] == pytest.approx(0.0, abs=1e-15)
    dens = Evaluation(Ellipsoid3DChart(2.0), np.array([[0.0, 0.0, np.pi / 4]])).density.val[0]
    assert dens == pytest.approx(1.58114, abs=1e-5)
