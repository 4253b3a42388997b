import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import CERT_PROFILE
from zonalmc import jets
from zonalmc.errors import ArgumentError, CapabilityError, DomainError, PreconditionError
from zonalmc.geometry import ScalarField, VectorField
from zonalmc.manifolds import Ellipsoid3DChart
from zonalmc.profiles import Profile
from zonalmc.zonal import (ClassificationReport, ZonalFlow, check_zonal, classify, classify_3d, extract_F,
                           geodesic_test, hopf_killing, intrinsic_sign_residual, reduce_pair, sgn_Z,
                           u_plus_intervals, zonal_flow_2d, zonal_flow_3d, zonal_flow_torus)


def test_F_for_sine_profile_is_a_quarter(chart3, rng):
    # |d_xi|^2 = 4 sin^2 chi and f^2 = sin^2 chi
    f = ScalarField(chart3, lambda ev: jets.sin(ev[2]), "f")
    flow = ZonalFlow(chart3, hopf_killing(chart3, 1, 0), f)
    pts = chart3.sample(100, rng, 1e-2)
    assert np.allclose(extract_F(flow).values(pts), 0.25, rtol=1e-12)
    assert check_zonal(flow, pts).is_zonal


def test_certified_flow_classification(cert_flow):
    rep = classify(cert_flow)
    assert rep.is_zonal and rep.zonal_verdict == "zonal"
    assert rep.is_geodesic is False
    assert rep.is_S1 and rep.s1_witness == "q/p = 0"
    assert rep.is_positive
    # f^2 rises on (0.35, 0.65) while |X|^2 = 4 sin^2 chi rises everywhere; the scan
    # drops the flat tail where F is below 1e-12 of its maximum
    (lo, hi), = rep.u_plus
    assert 0.35 <= lo < 0.37 and hi == pytest.approx(0.65, abs=1e-3)


def test_geodesic_flow(chart3):
    flow = zonal_flow_3d(chart3, 1, 2, CERT_PROFILE)
    rep = classify(flow)
    assert rep.is_zonal and rep.is_geodesic and rep.is_positive is False
    with pytest.raises(DomainError):
        extract_F(flow)
    assert sgn_Z(flow, [0.0, 0.0, 0.6]) == 0


def test_non_zonal_flows(chart3):
    X = hopf_killing(chart3, 1, 0)
    f_xi = ScalarField(chart3, lambda ev: jets.cos(ev[0]) * jets.sin(ev[2]) + 2.0)
    rep = check_zonal(ZonalFlow(chart3, X, f_xi))
    assert rep.zonal_verdict == "not-zonal"
    assert any("X(f)" in r for r in rep.rejects)
    # X = d_xi + d_mu and f depending on mu - xi: divergence-free but grad f^2 is not collinear
    X2 = hopf_killing(chart3, 1, 1)
    f_t = ScalarField(chart3, lambda ev: jets.cos(ev[1] - ev[0]) * jets.sin(ev[2]) + 2.0)
    rep2 = check_zonal(ZonalFlow(chart3, X2, f_t))
    assert rep2.residuals["X(f)"] < 1e-12
    assert rep2.zonal_verdict == "not-zonal"


def test_non_killing_factor_is_a_precondition_error(chart3):
    chi = chart3.coordinate_function(2)
    X = chart3.coordinate_field(0).scale(chi)
    with pytest.raises(PreconditionError) as info:
        check_zonal(ZonalFlow(chart3, X, chi))
    assert info.value.residuals["killing"] > 1e-8


def test_a_equal_one_is_refused():
    with pytest.raises(CapabilityError):
        classify_3d(1, 0, 1.0, CERT_PROFILE)
    with pytest.raises(ArgumentError):
        classify_3d(1, 0, -1.0, CERT_PROFILE)


def test_s1_witnesses():
    assert classify_3d(2, 4, 2.0, CERT_PROFILE).s1_witness == "q/p = 2"
    assert classify_3d(0, 1, 2.0, CERT_PROFILE).is_S1
    irr = classify_3d(1.0, np.sqrt(2.0), 2.0, CERT_PROFILE, rational=False)
    assert irr.is_S1 is False and irr.is_zonal


def test_reduce_pair():
    assert reduce_pair(4, 6) == (2, 3, 2)
    assert reduce_pair(-2, 0) == (-1, 0, 2)
    with pytest.raises(ArgumentError):
        reduce_pair(0, 0)
    with pytest.raises(ArgumentError):
        reduce_pair(1.5, 1)


def test_gcd_is_absorbed_into_f(chart3, rng):
    a = zonal_flow_3d(chart3, 2, 0, CERT_PROFILE)
    b = zonal_flow_3d(chart3, 1, 0, CERT_PROFILE)
    pts = chart3.sample(20, rng, 1e-2)
    assert (a.p, a.q) == (1, 0)
    assert np.allclose(a.Z.values(pts), 2.0 * b.Z.values(pts))


def test_two_dimensional_flows(chart2, torus):
    flow = zonal_flow_2d(chart2, Profile.bump(0.3, 0.8))
    rep = classify(flow)
    assert rep.is_zonal and not rep.is_geodesic and rep.is_S1
    tflow = zonal_flow_torus(torus, Profile.raised_cosine(0.0, 1.0))
    trep = classify(tflow)
    assert trep.is_zonal and trep.is_geodesic and trep.is_positive is False


@given(st.floats(0.2, 5.0))
def test_scaling_leaves_sign_and_residuals(c):
    chart = Ellipsoid3DChart(2.0)
    flow = zonal_flow_3d(chart, 1, 0, CERT_PROFILE)
    scaled = flow.scaled(c)
    pts = chart.sample(50, np.random.default_rng(0), 1e-2)
    pts[:, 2] = np.linspace(0.36, 0.94, 50)
    F0, F1 = flow.F.values(pts), scaled.F.values(pts)
    assert np.allclose(F1, F0 / c**4, rtol=1e-10, atol=1e-300)
    assert [sgn_Z(flow, x) for x in pts] == [sgn_Z(scaled, x) for x in pts]
    r0, r1 = check_zonal(flow, pts).residuals, check_zonal(scaled, pts).residuals
    assert r1["collinearity"] == pytest.approx(r0["collinearity"], abs=1e-12)


def test_intrinsic_sign_identity(cert_flow, chart2, rng):
    pts = cert_flow.chart.sample(200, rng, 1e-2)
    assert intrinsic_sign_residual(cert_flow, pts) < 1e-9
    flow2 = zonal_flow_2d(chart2, Profile.bump(0.3, 0.8))
    assert intrinsic_sign_residual(flow2, chart2.sample(200, rng, 1e-2)) < 1e-9


def test_u_plus_of_the_flipped_profile(chart3):
    flow = zonal_flow_3d(chart3, 1, 0, CERT_PROFILE.flipped())
    (lo, hi), = u_plus_intervals(flow)
    assert lo == pytest.approx(0.65, abs=1e-3) and 0.93 < hi <= 0.95


def test_geodesic_test_needs_one_variable_scan(torus):
    flow = ZonalFlow(torus, torus.coordinate_field(0), torus.coordinate_function(1))
    assert geodesic_test(flow)
    with pytest.raises(CapabilityError):
        u_plus_intervals(flow)


def test_report_round_trip(cert_flow):
    rep = classify(cert_flow)
    again = ClassificationReport.from_dict(rep.to_dict())
    assert again == rep
    assert again.recompute_verdict() == "zonal"
    again.thresholds["accept"] = -1.0
    assert again.recompute_verdict() == "indeterminate"


def test_verdict_bands(chart3):
    # a small xi-dependence lands between the thresholds
    X = hopf_killing(chart3, 1, 0)
    for eps, verdict in ((1e-9, "zonal"), (1e-6, "indeterminate"), (1e-2, "not-zonal")):
        f = ScalarField(chart3, lambda ev, e=eps: jets.sin(ev[2]) + jets.cos(ev[0]) * e)
        assert check_zonal(ZonalFlow(chart3, X, f)).zonal_verdict == verdict


def test_vector_field_factor_must_be_killing_for_classify(torus):
    V = VectorField(torus, lambda ev: [jets.sin(ev[1]), ev.const(0.0)])
    with pytest.raises(PreconditionError):
        classify(ZonalFlow(torus, V, torus.coordinate_function(1)))


def test_F_is_invariant_along_X(cert_flow, chart3, rng):
    from zonalmc.zonal import invariance_residual
    pts = chart3.sample(200, rng, 1e-2)
    pts[:, 2] = rng.uniform(0.36, 0.94, 200)
    assert invariance_residual(cert_flow, pts) < 1e-12
    assert check_zonal(cert_flow, pts).residuals["X(F)"] < 1e-12
    # F = (f^2)_chi / (|X|^2)_chi picks up the xi-dependence of f
    X = hopf_killing(chart3, 1, 0)
    f = ScalarField(chart3, lambda ev: jets.sin(ev[2]) * (2.0 + jets.cos(ev[0])))
    assert invariance_residual(ZonalFlow(chart3, X, f), pts) > 1e-3
