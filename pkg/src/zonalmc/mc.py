"""Misiolek curvature mc(Z, Y) by three independent formulas.

* direct:     mc = -int |[Z,Y]|^2 - int g(Z, [[Z,Y],Y])
* zonal:      for Z = f X with X Killing,
              mc = -int f^2 |[X,Y]|^2 - int f^2 g(X, [[X,Y],Y])
                   + int 2 Y(f^2) g(X, [X,Y]) - 1/2 int Y^2(f^2) |X|^2
* commuting:  for [X,Y] = 0 and div Y = 0, mc = 1/2 int_{U0} F Y(|X|^2)^2

The direct value is cross-checked against ``int g(nabla_Z W + nabla_W Z, Y)``
with ``W = [Z, Y]``, an integration-by-parts rewriting valid when Z and Y are
divergence-free and Y has compact support in the chart.
"""

from __future__ import annotations

import csv
import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import PreconditionError
from .geometry import (Evaluation, ScalarField, VectorField, covariant_derivative, divergence, inner,
                       lie_bracket, norm2)
from .quadrature import QuadratureRule, integrate_many
from .zonal import ZonalFlow, extract_F

REPORT_SCHEMA = "zonalmc.mc/1"
AGREEMENT_REL = 1e-6
FIELD_TOL = 1e-8


class McWarning(UserWarning):
    pass


# -- residuals ---------------------------------------------------------------


def _max_norm(V: VectorField, ev: Evaluation) -> float:
    return float(np.sqrt(np.max(norm2(V)(ev).val, initial=0.0)))


def divergence_residual(Y: VectorField, points) -> float:
    """max |div Y| / max(1, max |Y|): scale-free for large amplitudes."""
    ev = Evaluation(Y.chart, points)
    d = float(np.max(np.abs(divergence(Y)(ev).val), initial=0.0))
    return d / max(1.0, _max_norm(Y, ev))


def commutator_residual(X: VectorField, Y: VectorField, points) -> float:
    """max |[X,Y]| / max(1, max|X| max|Y|)."""
    ev = Evaluation(X.chart, points)
    b = _max_norm(lie_bracket(X, Y), ev)
    return b / max(1.0, _max_norm(X, ev) * _max_norm(Y, ev))


# -- integrand builders ------------------------------------------------------


def direct_integrands(Z: VectorField, Y: VectorField):
    """Closures for the two terms of the definition and the cross form."""
    W = lie_bracket(Z, Y)
    WY = lie_bracket(W, Y)
    t1 = -norm2(W)
    t2 = -inner(Z, WY)
    cross = inner(covariant_derivative(Z, W) + covariant_derivative(W, Z), Y)
    return t1, t2, cross


def zonal_integrands(f: ScalarField, X: VectorField, Y: VectorField):
    f2 = f * f
    XY = lie_bracket(X, Y)
    XYY = lie_bracket(XY, Y)
    Yf2 = Y.apply(f2)
    YYf2 = Y.apply(Yf2)
    n2X = norm2(X)
    return [-(f2 * norm2(XY)),
            -(f2 * inner(X, XYY)),
            2.0 * Yf2 * inner(X, XY),
            -0.5 * YYf2 * n2X]


def commuting_integrand(F: ScalarField, X: VectorField, Y: VectorField) -> ScalarField:
    YX = Y.apply(norm2(X))
    return 0.5 * F * YX * YX


# -- single-formula entry points --------------------------------------------


def mc_direct_detail(Z: VectorField, Y: VectorField, rule: QuadratureRule) -> dict:
    t1, t2, cross = direct_integrands(Z, Y)
    a, b, c = integrate_many(lambda ev: [t1(ev).val, t2(ev).val, cross(ev).val], rule)
    value = float(a + b)
    disc = abs(value - c)
    scale = max(abs(value), abs(c))
    rel = 0.0 if disc <= 1e-14 else disc / scale
    return {"value": value, "term_bracket": float(a), "term_double_bracket": float(b),
            "cross_form": float(c), "cross_discrepancy": rel}


def mc_direct(Z: VectorField, Y: VectorField, rule: QuadratureRule) -> float:
    """mc(Z, Y) from the definition; warns if the cross form disagrees."""
    d = mc_direct_detail(Z, Y, rule)
    if d["cross_discrepancy"] > AGREEMENT_REL:
        warnings.warn(f"cross-form disagreement {d['cross_discrepancy']:.2e}: Z or Y may fail to be "
                      "divergence-free or compactly supported", McWarning, stacklevel=2)
    return d["value"]


def mc_zonal(f: ScalarField, X: VectorField, Y: VectorField, rule: QuadratureRule) -> float:
    terms = zonal_integrands(f, X, Y)
    return float(np.sum(integrate_many(lambda ev: [t(ev).val for t in terms], rule)))


def check_commuting(X: VectorField, Y: VectorField, points, tol: float = FIELD_TOL) -> dict:
    res = {"commutator": commutator_residual(X, Y, points), "divergence": divergence_residual(Y, points)}
    failed = {k: v for k, v in res.items() if v > tol}
    if failed:
        raise PreconditionError("commuting formula preconditions violated: "
                                + ", ".join(f"{k} residual {v:.3e} > {tol:.0e}" for k, v in failed.items()),
                                res)
    return res


def mc_commuting(F: ScalarField, X: VectorField, Y: VectorField, rule: QuadratureRule,
                 tol: float = FIELD_TOL) -> float:
    """1/2 int F Y(|X|^2)^2 over U0 (F is zero off U0 by construction)."""
    check_commuting(X, Y, rule.nodes()[0], tol)
    h = commuting_integrand(F, X, Y)
    return float(integrate_many(lambda ev: [h(ev).val], rule)[0])


# -- combined report ---------------------------------------------------------


@dataclass
class McReport:
    mc_direct: float
    mc_zonal: float | None
    mc_commuting: float | None
    discrepancies: dict
    richardson_error: float | None
    verdict: str
    cross_form: float
    cross_discrepancy: float
    terms: dict = field(default_factory=dict)
    doubled: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    quadrature: dict = field(default_factory=dict)
    seconds: float = 0.0

    def to_dict(self) -> dict:
        return {"schema": REPORT_SCHEMA, **asdict(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "McReport":
        return cls(**{k: v for k, v in d.items() if k != "schema"})

    def values(self) -> dict:
        out = {"direct": self.mc_direct}
        if self.mc_zonal is not None:
            out["zonal"] = self.mc_zonal
        if self.mc_commuting is not None:
            out["commuting"] = self.mc_commuting
        return out


def _relative(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0.0 or abs(a - b) <= 1e-300 else abs(a - b) / scale


def decide(values: dict, richardson_error: float | None, rel: float = AGREEMENT_REL) -> tuple[str, dict]:
    """Verdict plus pairwise relative discrepancies for a dict of mc values."""
    names = sorted(values)
    disc = {f"{a}-{b}": _relative(values[a], values[b])
            for i, a in enumerate(names) for b in names[i + 1:]}
    direct = values["direct"]
    err = 0.0 if richardson_error is None else richardson_error
    allowed = max(rel * abs(direct), err)
    agree = all(abs(values[k] - direct) <= allowed for k in names)
    if not agree:
        return "indeterminate", disc
    if direct - err > 0:
        return "positive", disc
    if direct + err <= 0 and abs(direct) > err:
        return "nonpositive", disc
    if direct == 0.0 and err == 0.0:
        return "nonpositive", disc
    return "indeterminate", disc


class McEngine:
    """Evaluates every applicable formula for one (Z, Y) pair on one rule."""

    def __init__(self, Y: VectorField, flow: ZonalFlow | None = None, Z: VectorField | None = None,
                 commuting: bool | None = None, tol: float = FIELD_TOL):
        if flow is None and Z is None:
            raise ValueError("need a zonal flow or a field Z")
        self.flow = flow
        self.Y = Y
        self.Z = Z if Z is not None else flow.Z
        self.tol = tol
        self.commuting = commuting
        self._direct = direct_integrands(self.Z, Y)
        self._zonal = zonal_integrands(flow.f, flow.X, Y) if flow is not None else None
        self._comm = None
        if flow is not None:
            self._comm = commuting_integrand(extract_F(flow, check=False), flow.X, Y)

    def residuals(self, rule: QuadratureRule) -> dict:
        pts = rule.nodes()[0]
        res = {"divergence_Y": divergence_residual(self.Y, pts)}
        if self.flow is not None:
            res["commutator_XY"] = commutator_residual(self.flow.X, self.Y, pts)
        return res

    def evaluate(self, rule: QuadratureRule, with_samples: bool = False):
        t1, t2, cross = self._direct
        parts = [t1, t2, cross]
        if self._zonal is not None:
            parts += self._zonal
        if self._comm is not None:
            parts.append(self._comm)
        out = integrate_many(lambda ev: [p(ev).val for p in parts], rule, with_samples)
        totals = out[0] if with_samples else out
        vals = {"direct": float(totals[0] + totals[1]), "cross": float(totals[2]),
                "term_bracket": float(totals[0]), "term_double_bracket": float(totals[1])}
        if self._zonal is not None:
            vals["zonal"] = float(np.sum(totals[3:7]))
        if self._comm is not None and self.commuting:
            vals["commuting"] = float(totals[-1])
        if with_samples:
            _, pts, w, samples = out
            return vals, (pts, w, samples[0] + samples[1])
        return vals

    def report(self, rule: QuadratureRule, richardson: bool = True, csv_path=None) -> McReport:
        start = time.perf_counter()
        notes = []
        res = self.residuals(rule)
        if res["divergence_Y"] > self.tol:
            notes.append(f"Y is not divergence-free (residual {res['divergence_Y']:.3e}); "
                         "the zonal and commuting formulas do not apply")
        if self.commuting is None:
            self.commuting = (self.flow is not None and res["divergence_Y"] <= self.tol
                              and res.get("commutator_XY", np.inf) <= self.tol)
        elif self.commuting:
            bad = {k: v for k, v in res.items() if v > self.tol}
            if bad:
                raise PreconditionError("commuting formula preconditions violated", res)
        vals, samples = self.evaluate(rule, with_samples=csv_path is not None) if csv_path \
            else (self.evaluate(rule), None)
        if samples is not None:
            write_integrand_csv(csv_path, rule, *samples)
        doubled = {}
        err = None
        if richardson:
            doubled = self.evaluate(rule.doubled())
            err = abs(doubled["direct"] - vals["direct"])
        values = {k: vals[k] for k in ("direct", "zonal", "commuting") if k in vals}
        if res["divergence_Y"] > self.tol:
            values = {"direct": vals["direct"]}
        verdict, disc = decide(values, err)
        if res["divergence_Y"] > self.tol:
            verdict = "indeterminate"
        cross_disc = _relative(vals["direct"], vals["cross"])
        if cross_disc > AGREEMENT_REL and abs(vals["direct"] - vals["cross"]) > max(err or 0.0, 1e-14):
            notes.append(f"cross-form disagreement {cross_disc:.2e}")
        return McReport(
            mc_direct=vals["direct"], mc_zonal=values.get("zonal"), mc_commuting=values.get("commuting"),
            discrepancies=disc, richardson_error=err, verdict=verdict,
            cross_form=vals["cross"], cross_discrepancy=cross_disc,
            terms={"bracket": vals["term_bracket"], "double_bracket": vals["term_double_bracket"]},
            doubled={k: doubled[k] for k in ("direct", "zonal", "commuting") if k in doubled},
            residuals=res, warnings=notes, quadrature=rule.describe(),
            seconds=time.perf_counter() - start)


def write_integrand_csv(path, rule: QuadratureRule, pts, weights, integrand):
    names = rule.chart.coord_names
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + ["integrand", "weight"])
        for row, val, wt in zip(pts, integrand, weights):
            w.writerow([f"{v:.17g}" for v in row] + [f"{val:.17g}", f"{wt:.17g}"])
