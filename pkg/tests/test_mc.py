import warnings

import numpy as np
import pytest

from zonalmc.errors import PreconditionError
from zonalmc.geometry import VectorField, zero_field
from zonalmc.mc import (McEngine, McReport, McWarning, check_commuting, decide, mc_commuting, mc_direct,
                        mc_direct_detail, mc_zonal)
from zonalmc.perturbation import BumpProfile, build_commuting_bump, rotational_bump
from zonalmc.quadrature import QuadratureRule
from zonalmc.zonal import extract_F


@pytest.fixture(scope="module")
def coarse(chart3, cert_Y):
    return cert_Y.window(QuadratureRule(chart3, (8, 16, 32)))


@pytest.fixture(scope="module")
def rot_Y(chart3):
    # divergence-free, not commuting with d_xi
    return rotational_bump(chart3, (0, 2), (0.0, 0.6), 0.15, cutoff_axis=1, cutoff_radius=1.0)


@pytest.fixture(scope="module")
def rot_rule(chart3):
    return QuadratureRule(chart3, (16, 16, 32)).with_window(0, -0.15, 0.15).with_window(
        2, 0.45, 0.75).with_window(1, -1.0, 1.0)


def test_three_formulas_agree_on_coarse_rule(cert_flow, cert_Y, coarse):
    d = mc_direct_detail(cert_flow.Z, cert_Y.field, coarse)["value"]
    z = mc_zonal(cert_flow.f, cert_flow.X, cert_Y.field, coarse)
    c = mc_commuting(extract_F(cert_flow), cert_flow.X, cert_Y.field, coarse)
    assert z == pytest.approx(d, rel=1e-12)
    assert c == pytest.approx(d, rel=1e-3)
    assert d > 0


def test_zonal_formula_holds_without_commuting(cert_flow, rot_Y, rot_rule):
    vals = McEngine(rot_Y, cert_flow).evaluate(rot_rule)
    assert vals["zonal"] == pytest.approx(vals["direct"], rel=1e-12)
    assert "commuting" not in vals
    assert vals["term_bracket"] < 0


def test_mc_is_quadratic_in_Y(cert_flow, rot_Y, rot_rule):
    lam = 3.0
    base = mc_direct_detail(cert_flow.Z, rot_Y, rot_rule)["value"]
    scaled = mc_direct_detail(cert_flow.Z, rot_Y.scale(lam), rot_rule)["value"]
    assert scaled == pytest.approx(lam * lam * base, rel=1e-12)


def test_amplitude_enters_squared(chart3, cert_flow, coarse):
    vals = []
    for amp in (1.0, 2.0):
        Y = build_commuting_bump(chart3, cert_flow, BumpProfile(0.0, 0.5, 0.12, amp, 2.5))
        vals.append(mc_commuting(extract_F(cert_flow), cert_flow.X, Y.field, coarse))
    assert vals[1] == pytest.approx(4.0 * vals[0], rel=1e-12)


def test_trivial_pairs(cert_flow, coarse, chart3):
    Z = cert_flow.Z
    assert mc_direct(Z, Z, coarse) == 0.0
    assert mc_direct(Z, zero_field(chart3), coarse) == 0.0


def test_commuting_preconditions(cert_flow, rot_Y, rot_rule):
    with pytest.raises(PreconditionError) as info:
        check_commuting(cert_flow.X, rot_Y, rot_rule.nodes()[0])
    assert info.value.residuals["commutator"] > 1e-8
    with pytest.raises(PreconditionError):
        McEngine(rot_Y, cert_flow, commuting=True).report(rot_rule, richardson=False)


def test_unweighted_bump_is_indeterminate(chart3, cert_flow, coarse):
    Y = build_commuting_bump(chart3, cert_flow, BumpProfile(0.0, 0.5, 0.12, 1.0, 2.5), weighted=False)
    rep = McEngine(Y.field, cert_flow).report(coarse, richardson=False)
    assert rep.verdict == "indeterminate"
    assert rep.residuals["divergence_Y"] > 1e-3
    assert rep.mc_zonal is None and rep.mc_commuting is None
    assert any("not divergence-free" in w for w in rep.warnings)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        mc_direct(cert_flow.Z, Y.field, coarse)
    assert any(issubclass(w.category, McWarning) for w in caught)


def test_report_fields_and_round_trip(cert_flow, cert_Y, coarse, tmp_path):
    csv_path = tmp_path / "integrand.csv"
    rep = McEngine(cert_Y.field, cert_flow).report(coarse, csv_path=csv_path)
    assert set(rep.values()) == {"direct", "zonal", "commuting"}
    assert rep.richardson_error == pytest.approx(abs(rep.doubled["direct"] - rep.mc_direct))
    assert rep.verdict == "positive"
    assert McReport.from_dict(rep.to_dict()) == rep
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "xi,mu,chi,integrand,weight"
    assert len(lines) == 1 + 8 * 16 * 32
    rows = np.loadtxt(csv_path, delimiter=",", skiprows=1)
    assert np.sum(rows[:, 3] * rows[:, 4]) == pytest.approx(rep.mc_direct, rel=1e-12)


def test_plain_field_Z_without_flow(chart3, rot_Y, rot_rule):
    Z = VectorField(chart3, lambda ev: [ev.const(1.0), ev.const(0.0), ev.const(0.0)])
    rep = McEngine(rot_Y, Z=Z).report(rot_rule, richardson=False)
    assert set(rep.values()) == {"direct"}
    with pytest.raises(ValueError):
        McEngine(rot_Y)


@pytest.mark.parametrize("values,err,verdict", [
    ({"direct": 1.0, "zonal": 1.0 + 1e-8}, 1e-9, "positive"),
    ({"direct": -1.0, "zonal": -1.0}, 1e-9, "nonpositive"),
    ({"direct": 0.0}, 0.0, "nonpositive"),
    ({"direct": 1e-10}, 1e-9, "indeterminate"),
    ({"direct": 1.0, "zonal": 1.1}, 1e-9, "indeterminate"),
    ({"direct": 1.0, "zonal": 1.001}, 1e-2, "positive"),
])
def test_decide(values, err, verdict):
    got, disc = decide(values, err)
    assert got == verdict
    assert len(disc) == len(values) * (len(values) - 1) // 2
