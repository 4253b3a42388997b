"""Zonal flows Z = f X: zonality checks, the collinearity factor F, sgn(Z), classification.

Zonality of ``f X`` with ``X`` Killing is decided through two residuals:
``X(f)`` (divergence-freeness) and the collinearity of ``grad(f^2)`` with
``grad(|X|^2)`` on ``U0 = {grad |X|^2 != 0}``, which is equivalent to
``nabla_Z Z`` being a gradient. Both residuals are normalised so that they
are invariant under ``(f, X) -> (f / c, c X)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from . import jets
from .errors import ArgumentError, CapabilityError, DomainError, PreconditionError
from .geometry import (Chart, Evaluation, ScalarField, VectorField, covariant_derivative, grad,
                       inner, killing_residual, norm2)
from .manifolds import Ellipsoid2DChart, Ellipsoid3DChart, FlatTorusChart
from .profiles import Profile

REPORT_SCHEMA = "zonalmc.classification/1"

ACCEPT = 1e-7
REJECT = 1e-4
KILLING_TOL = 1e-8
U0_TOL = 1e-12
GEODESIC_REL_STD = 1e-10


class ZonalFlow:
    """A candidate zonal flow ``Z = f X``.

    ``profile`` and ``axis`` are set when ``f`` is a one-variable profile of
    the chart coordinate ``axis`` (chi on the 3D ellipsoid, r in 2D); the U+
    scan uses them. ``p, q`` are the Killing coefficients on the 3D
    ellipsoid, with ``rational`` saying whether q/p is known to be rational.
    """

    def __init__(self, chart: Chart, X: VectorField, f: ScalarField, *, p=None, q=None,
                 rational: bool = True, profile: Profile | None = None, axis: int | None = None):
        self.chart = chart
        self.X = X
        self.f = f
        self.p, self.q = p, q
        self.rational = rational
        self.profile = profile
        self.axis = axis

    @property
    def Z(self) -> VectorField:
        return VectorField(self.chart, lambda ev: [self.f(ev) * c for c in self.X(ev)], "Z")

    @property
    def f2(self) -> ScalarField:
        return self.f * self.f

    @property
    def norm2_X(self) -> ScalarField:
        return norm2(self.X)

    @property
    def F(self) -> ScalarField:
        return extract_F(self, check=False)

    def scaled(self, c: float) -> "ZonalFlow":
        """Same Z written as (f / c) (c X)."""
        X = self.X.scale(float(c))
        f = self.f * (1.0 / c)
        return ZonalFlow(self.chart, X, f, p=None if self.p is None else self.p * c,
                         q=None if self.q is None else self.q * c, rational=self.rational,
                         profile=None, axis=self.axis)

    def describe(self) -> dict:
        out = {"chart": self.chart.describe()}
        if self.p is not None:
            out.update(p=self.p, q=self.q, rational=self.rational)
        if self.profile is not None:
            out["profile"] = self.profile.to_dict()
        return out


def reduce_pair(p, q):
    """Coprime integer pair with the sign of the first nonzero entry kept, and the gcd."""
    pi, qi = int(p), int(q)
    if pi != p or qi != q:
        raise ArgumentError(f"rational Killing coefficients must be integers, got ({p}, {q})")
    if pi == 0 and qi == 0:
        raise ArgumentError("p and q cannot both vanish")
    g = math.gcd(pi, qi)
    return pi // g, qi // g, g


def hopf_killing(chart: Ellipsoid3DChart, p: float, q: float) -> VectorField:
    """X = p d_xi + q d_mu (Killing for every a)."""
    p, q = float(p), float(q)
    return VectorField(chart, lambda ev: [ev.const(p), ev.const(q), ev.const(0.0)], "X")


def zonal_flow_3d(chart: Ellipsoid3DChart, p, q, profile: Profile, rational: bool = True) -> ZonalFlow:
    """Z = f(chi) (p d_xi + q d_mu); integer (p, q) are reduced to a coprime pair."""
    scale = 1.0
    if rational:
        p, q, g = reduce_pair(p, q)
        scale = float(g)
    X = hopf_killing(chart, p, q)
    if scale == 1.0:
        f = ScalarField(chart, lambda ev: profile(ev[2]), "f")
    else:
        f = ScalarField(chart, lambda ev: profile(ev[2]) * scale, "f")
    return ZonalFlow(chart, X, f, p=p, q=q, rational=rational, profile=profile, axis=2)


def zonal_flow_2d(chart: Ellipsoid2DChart, profile: Profile) -> ZonalFlow:
    """Z = f(r) d_theta."""
    f = ScalarField(chart, lambda ev: profile(ev[0]), "f")
    return ZonalFlow(chart, chart.coordinate_field(1), f, profile=profile, axis=0)


def zonal_flow_torus(chart: FlatTorusChart, profile: Profile) -> ZonalFlow:
    """Z = f(y) d_x on the flat torus (a geodesic flow)."""
    f = ScalarField(chart, lambda ev: profile(ev[1]), "f")
    return ZonalFlow(chart, chart.coordinate_field(0), f, profile=profile, axis=1)


# ---------------------------------------------------------------------------


@dataclass
class ClassificationReport:
    is_zonal: bool
    zonal_verdict: str
    residuals: dict
    thresholds: dict
    is_geodesic: bool | None = None
    is_S1: bool | None = None
    s1_witness: str | None = None
    is_positive: bool | None = None
    positive_witness: list | None = None
    u_plus: list = field(default_factory=list)
    rejects: list = field(default_factory=list)
    flow: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"schema": REPORT_SCHEMA, **asdict(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "ClassificationReport":
        d = {k: v for k, v in d.items() if k != "schema"}
        return cls(**d)

    def recompute_verdict(self) -> str:
        worst = max(self.residuals.get(k, 0.0) for k in ("X(f)", "collinearity", "X(F)"))
        return _verdict(worst, self.thresholds["accept"], self.thresholds["reject"])


def _verdict(residual, accept, reject):
    if residual <= accept:
        return "zonal"
    if residual >= reject:
        return "not-zonal"
    return "indeterminate"


def default_samples(chart: Chart, n: int = 400, seed: int = 0, collar: float = 1e-2) -> np.ndarray:
    return chart.sample(n, np.random.default_rng(seed), collar)


def divergence_residual(flow: ZonalFlow, points) -> float:
    """max |X(f)| / max(|X| |grad f|): zero exactly when div(f X) = 0."""
    ev = Evaluation(flow.chart, points)
    Xf = flow.X.apply(flow.f)(ev).val
    scale = np.sqrt(flow.norm2_X(ev).val * norm2(grad(flow.f))(ev).val)
    top = float(np.max(scale, initial=0.0))
    return 0.0 if top == 0.0 else float(np.max(np.abs(Xf)) / top)


def _F_jet(ev: Evaluation, flow: ZonalFlow) -> tuple[jets.Jet, np.ndarray]:
    gX = grad(flow.norm2_X)
    gf = grad(flow.f2)
    num = inner(gf, gX)(ev)
    den = norm2(gX)(ev)
    in_u0 = np.sqrt(np.abs(den.val)) > U0_TOL
    safe = jets.where(in_u0, den, ev.const(1.0).truncate(den.order))
    F = jets.where(in_u0, num / safe, ev.const(0.0).truncate(num.order))
    return F, in_u0


def collinearity_residual(flow: ZonalFlow, points) -> float:
    """max over U0 of |grad f^2 - F grad |X|^2| / max |grad f^2|."""
    ev = Evaluation(flow.chart, points)
    F, in_u0 = _F_jet(ev, flow)
    gX = grad(flow.norm2_X)(ev)
    gf = grad(flow.f2)(ev)
    g = ev.g
    d = flow.chart.dim
    diff = [gf[i].val - F.val * gX[i].val for i in range(d)]
    n_diff = sum(g[i][j].val * diff[i] * diff[j] for i in range(d) for j in range(d))
    n_gf = sum(g[i][j].val * gf[i].val * gf[j].val for i in range(d) for j in range(d))
    top = float(np.sqrt(np.max(n_gf, initial=0.0)))
    if top == 0.0 or not np.any(in_u0):
        return 0.0
    return float(np.sqrt(np.max(np.where(in_u0, n_diff, 0.0))) / top)


def invariance_residual(flow: ZonalFlow, points) -> float:
    """max over U0 of |X(F)| / (max |X| * max(|grad F|, |F|)).

    F is constant along X on a zonal flow. Including |F| in the scale keeps
    the residual small when F is nearly constant.
    """
    ev = Evaluation(flow.chart, points)
    F, in_u0 = _F_jet(ev, flow)
    comps = flow.X(ev)
    XF = sum(c.val * F.grad[..., i] for i, c in enumerate(comps))
    gF = ScalarField(flow.chart, lambda e: _F_jet(e, flow)[0])
    size = np.maximum(np.sqrt(norm2(grad(gF))(ev).val), np.abs(F.val))
    top = float(np.max(np.where(in_u0, np.sqrt(flow.norm2_X(ev).val), 0.0), initial=0.0)
                * np.max(np.where(in_u0, size, 0.0), initial=0.0))
    if top == 0.0:
        return 0.0
    return float(np.max(np.abs(np.where(in_u0, XF, 0.0))) / top)


def check_zonal(flow: ZonalFlow, samples=None, accept: float = ACCEPT, reject: float = REJECT,
                killing_tol: float = KILLING_TOL) -> ClassificationReport:
    """Decide whether ``flow.f * flow.X`` is a zonal flow on the sampled points."""
    pts = default_samples(flow.chart) if samples is None else samples
    kres = killing_residual(flow.X, pts)
    if kres > killing_tol:
        raise PreconditionError(f"X is not Killing (residual {kres:.3e} > {killing_tol:.0e})",
                                {"killing": kres})
    res = {"killing": kres,
           "X(f)": divergence_residual(flow, pts),
           "collinearity": collinearity_residual(flow, pts),
           "X(F)": invariance_residual(flow, pts)}
    worst = max(res["X(f)"], res["collinearity"], res["X(F)"])
    verdict = _verdict(worst, accept, reject)
    rejects = []
    if res["X(f)"] > accept:
        rejects.append("div(Z) != 0 (X(f) residual)")
    if res["collinearity"] > accept:
        rejects.append("nabla_Z Z is not a gradient (grad f^2 not collinear with grad |X|^2)")
    if res["X(F)"] > accept:
        rejects.append("F is not invariant along X")
    return ClassificationReport(is_zonal=verdict == "zonal", zonal_verdict=verdict, residuals=res,
                                thresholds={"accept": accept, "reject": reject, "killing": killing_tol},
                                rejects=rejects, flow=flow.describe())


def extract_F(flow: ZonalFlow, samples=None, check: bool = True) -> ScalarField:
    """F = g(grad f^2, grad |X|^2) / |grad |X|^2|^2 on U0, and 0 off U0."""
    if check:
        pts = default_samples(flow.chart) if samples is None else samples
        ev = Evaluation(flow.chart, pts)
        den = norm2(grad(flow.norm2_X))(ev).val
        if not np.any(np.sqrt(den) > U0_TOL):
            raise DomainError("F undefined: U0 is empty (grad |X|^2 vanishes, geodesic flow)")
    return ScalarField(flow.chart, lambda ev: _F_jet(ev, flow)[0], "F")


def sgn_Z(flow: ZonalFlow, point) -> int:
    pt = np.atleast_2d(np.asarray(point, dtype=float))
    ev = Evaluation(flow.chart, pt)
    F, in_u0 = _F_jet(ev, flow)
    if not in_u0[0]:
        return 0
    return int(np.sign(F.val[0]))


def intrinsic_sign_terms(flow: ZonalFlow, points):
    """Both sides of g(grad|Z|^2 + 2 nabla_Z Z, 2 nabla_Z Z) = -F f^2 |X|^2 |grad|X|^2|^2.

    Returns (lhs, rhs, in_u0) as arrays.
    """
    Z = flow.Z
    ev = Evaluation(flow.chart, points)
    nzz = covariant_derivative(Z, Z)
    two_nzz = nzz.scale(2.0)
    lhs = inner(grad(norm2(Z)) + two_nzz, two_nzz)(ev).val
    F, in_u0 = _F_jet(ev, flow)
    rhs = -(F.val * flow.f2(ev).val * flow.norm2_X(ev).val * norm2(grad(flow.norm2_X))(ev).val)
    return lhs, rhs, in_u0


def intrinsic_sign_residual(flow: ZonalFlow, points) -> float:
    lhs, rhs, in_u0 = intrinsic_sign_terms(flow, points)
    scale = np.max(np.abs(np.where(in_u0, rhs, 0.0)), initial=0.0)
    if scale == 0.0:
        scale = 1.0
    return float(np.max(np.abs(np.where(in_u0, lhs - rhs, 0.0)), initial=0.0) / scale)


def geodesic_test(flow: ZonalFlow, samples=None, rel_std: float = GEODESIC_REL_STD) -> bool:
    """True iff |X|^2 is constant on the samples; cross-checked against |nabla_X X|."""
    pts = default_samples(flow.chart) if samples is None else samples
    ev = Evaluation(flow.chart, pts)
    n2 = flow.norm2_X(ev).val
    mean = float(np.mean(np.abs(n2)))
    constant = mean == 0.0 or float(np.std(n2)) <= rel_std * mean
    nxx = norm2(covariant_derivative(flow.X, flow.X))(ev).val
    parallel = float(np.sqrt(np.max(nxx))) <= 1e-8 * max(1.0, mean)
    if constant != parallel:
        raise ArithmeticError("geodesic test inconsistent: |X|^2 variance and |nabla_X X| disagree")
    return constant


def u_plus_intervals(flow: ZonalFlow, n: int = 4001, collar: float = 1e-3):
    """U+ = {F > 0} along the profile axis, as a list of (lo, hi) intervals."""
    if flow.axis is None:
        raise CapabilityError("U+ scan needs a one-variable profile flow")
    chart = flow.chart
    ax = chart.axes[flow.axis]
    lo, hi = ax.trimmed(collar)
    u = np.linspace(lo, hi, n)
    pts = np.zeros((n, chart.dim))
    pts[:, flow.axis] = u
    ev = Evaluation(chart, pts)
    F, _ = _F_jet(ev, flow)
    Fv = F.val
    pos = Fv > 1e-12 * max(np.max(np.abs(Fv), initial=0.0), 1e-300)
    intervals = []
    start = None
    for k in range(n):
        if pos[k] and start is None:
            start = k
        if start is not None and (not pos[k] or k == n - 1):
            end = k if pos[k] else k - 1
            intervals.append((float(u[max(start - 1, 0)] if start > 0 else u[0]),
                              float(u[min(end + 1, n - 1)])))
            start = None
    # the stored endpoints bracket the sign change: F <= 0 there, F > 0 strictly inside
    return intervals


def classify_3d(p, q, a: float, profile: Profile, rational: bool = True, samples=None,
                chart: Ellipsoid3DChart | None = None) -> ClassificationReport:
    """Zonal / geodesic / S1 / positive classification of f(chi) (p d_xi + q d_mu)."""
    if not a > 0:
        raise ArgumentError("a must be positive")
    if a == 1.0:
        raise CapabilityError("classification undefined at a=1")
    chart = chart or Ellipsoid3DChart(a)
    flow = zonal_flow_3d(chart, p, q, profile, rational=rational)
    return classify(flow, samples)


def classify(flow: ZonalFlow, samples=None) -> ClassificationReport:
    chart = flow.chart
    if isinstance(chart, Ellipsoid3DChart) and chart.a == 1.0:
        raise CapabilityError("classification undefined at a=1")
    report = check_zonal(flow, samples)
    report.is_geodesic = geodesic_test(flow, samples)
    if isinstance(chart, Ellipsoid3DChart):
        if flow.p is None:
            report.is_S1, report.s1_witness = None, "Killing coefficients unknown"
        elif flow.p == 0:
            report.is_S1, report.s1_witness = True, "p = 0 (q/p = infinity)"
        elif flow.rational:
            report.is_S1 = True
            report.s1_witness = f"q/p = {Fraction(int(flow.q), int(flow.p))}"
        else:
            report.is_S1, report.s1_witness = False, "q/p flagged irrational"
    elif isinstance(chart, (Ellipsoid2DChart, FlatTorusChart)):
        report.is_S1, report.s1_witness = True, "coordinate rotation generates a circle action"
    if report.is_geodesic:
        report.is_positive = False
        report.rejects.append("geodesic: U0 is empty, sgn(Z) = 0")
    elif flow.axis is not None:
        report.u_plus = [list(iv) for iv in u_plus_intervals(flow)]
        report.is_positive = bool(report.u_plus)
        if report.u_plus:
            lo, hi = max(report.u_plus, key=lambda iv: iv[1] - iv[0])
            w = [0.0] * chart.dim
            w[flow.axis] = 0.5 * (lo + hi)
            report.positive_witness = w
        else:
            report.rejects.append("not positive: U+ is empty")
    return report
