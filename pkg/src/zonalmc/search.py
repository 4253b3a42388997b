"""Bounded pattern search for a positive mc and the resulting certificate.

The search moves the chi-center, chi-radius and amplitude of a commuting
bump inside the largest U+ interval, maximising the commuting-formula value
on a coarse rule. The best candidate is then validated on the full rule with
every formula plus a Richardson estimate.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .errors import PreconditionError
from .manifolds import Ellipsoid3DChart
from .mc import McEngine, McReport, commuting_integrand
from .perturbation import BumpProfile, build_commuting_bump, condition_report
from .quadrature import QuadratureRule, integrate_many
from .zonal import ZonalFlow, classify, extract_F, zonal_flow_3d
from .profiles import Profile

CERT_SCHEMA = "zonalmc.certificate/1"
DEFAULT_BUDGET = 200
DEFAULT_T_RADIUS = 2.5
AMPLITUDE_BOUNDS = (0.1, 10.0)
CONDITION_TOL = 1e-8


@dataclass
class SearchSettings:
    budget: int = DEFAULT_BUDGET
    t_radius: float = DEFAULT_T_RADIUS
    margin: float = 0.01
    search_resolution: tuple = (4, 16, 32)
    min_step: float = 1e-4
    amplitude_bounds: tuple = AMPLITUDE_BOUNDS


@dataclass
class Certificate:
    verdict: str
    bump: dict
    mc: dict
    conditions: dict
    chart: dict
    flow: dict
    quadrature: dict
    search: dict = field(default_factory=dict)
    tool_version: str = __version__
    schema: str = CERT_SCHEMA

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Certificate":
        if d.get("schema") != CERT_SCHEMA:
            raise ValueError(f"unsupported certificate schema {d.get('schema')!r}")
        return cls(**d)

    def digest(self) -> str:
        payload = json.dumps({k: self.to_dict()[k] for k in ("bump", "chart", "flow", "quadrature")},
                             sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()


def _require_certifiable(flow: ZonalFlow, collar: float):
    chart = flow.chart
    if not isinstance(chart, Ellipsoid3DChart):
        raise PreconditionError("certification runs on the 3D ellipsoid only")
    report = classify(flow)
    if not report.is_zonal:
        raise PreconditionError(f"flow is not zonal ({report.zonal_verdict})", report.residuals)
    if report.is_geodesic:
        raise PreconditionError("flow is geodesic (a^2 p^2 = q^2): no U+ to perturb in",
                                report.residuals)
    if not report.is_S1:
        raise PreconditionError("flow is not S1-zonal (q/p not rational)")
    if not report.is_positive:
        raise PreconditionError("flow is not positive: U+ is empty")
    sup = flow.profile.support() if flow.profile is not None else None
    lo, hi = chart.axes[2].trimmed(collar)
    if sup is None or not (lo < sup[0] and sup[1] < hi):
        raise PreconditionError(f"profile support {sup} is not inside the trimmed chi-interval "
                                f"({lo:.4g}, {hi:.4g})")
    return report


class _Objective:
    """Commuting-formula mc on a coarse rule, for bump parameters (chi0, radius, amplitude)."""

    def __init__(self, flow: ZonalFlow, interval, settings: SearchSettings, collar: float):
        self.flow = flow
        self.lo, self.hi = interval
        self.s = settings
        self.collar = collar
        self.F = extract_F(flow, check=False)
        self.base_rule = QuadratureRule(flow.chart, settings.search_resolution, collar)
        self.evaluations = 0
        self.cache: dict = {}

    def feasible(self, x) -> bool:
        chi0, r, amp = x
        m = self.s.margin
        a_lo, a_hi = self.s.amplitude_bounds
        return r > 0 and chi0 - r >= self.lo + m and chi0 + r <= self.hi - m and a_lo <= amp <= a_hi

    def bump(self, x) -> BumpProfile:
        chi0, r, amp = (float(v) for v in x)
        return BumpProfile(0.0, chi0, r, amp, self.s.t_radius)

    def __call__(self, x) -> float:
        key = tuple(round(float(v), 12) for v in x)
        if key in self.cache:
            return self.cache[key]
        if not self.feasible(x) or self.evaluations >= self.s.budget:
            return -np.inf
        Y = build_commuting_bump(self.flow.chart, self.flow, self.bump(x), self.collar)
        rule = Y.window(self.base_rule)
        h = commuting_integrand(self.F, self.flow.X, Y.field)
        val = float(integrate_many(lambda ev: [h(ev).val], rule)[0])
        self.evaluations += 1
        self.cache[key] = val
        return val


def pattern_search(objective: _Objective, x0, steps, min_step: float):
    """Compass search: poll +-step per coordinate in fixed order, halve steps on failure."""
    x = np.array(x0, dtype=float)
    fx = objective(x)
    steps = np.array(steps, dtype=float)
    history = [{"x": x.tolist(), "value": fx}]
    while objective.evaluations < objective.s.budget and np.max(steps) > min_step:
        improved = False
        for i in range(len(x)):
            for sign in (1.0, -1.0):
                cand = x.copy()
                cand[i] += sign * steps[i]
                fc = objective(cand)
                if fc > fx:
                    x, fx, improved = cand, fc, True
                    history.append({"x": x.tolist(), "value": fx})
                    break
            if objective.evaluations >= objective.s.budget:
                break
        if not improved:
            steps = steps * 0.5
    return x, fx, history


def certify_positive(chart: Ellipsoid3DChart, flow: ZonalFlow, search_budget: int = DEFAULT_BUDGET,
                     resolution=(32, 32, 96), collar: float = 1e-3,
                     settings: SearchSettings | None = None, richardson: bool = True) -> Certificate:
    """Search a commuting bump with positive mc and validate it with every formula."""
    start = time.perf_counter()
    settings = settings or SearchSettings()
    settings.budget = int(search_budget)
    report = _require_certifiable(flow, collar)
    lo, hi = max(report.u_plus, key=lambda iv: iv[1] - iv[0])
    half = 0.5 * (hi - lo)
    objective = _Objective(flow, (lo, hi), settings, collar)
    r0 = max(0.5 * (half - settings.margin), 1e-3)
    x0 = (0.5 * (lo + hi), r0, 1.0)
    steps = (0.25 * r0, 0.25 * r0, 1.0)
    x, fx, history = pattern_search(objective, x0, steps, settings.min_step)
    bump = objective.bump(x)
    rule = QuadratureRule(chart, resolution, collar)
    cert = evaluate_certificate(flow, bump, rule, (lo, hi), richardson)
    cert.search = {"budget": settings.budget, "evaluations": objective.evaluations,
                   "best_search_value": fx, "start": list(x0), "history": history[-20:],
                   "settings": {k: list(v) if isinstance(v, tuple) else v
                                for k, v in asdict(settings).items()},
                   "seconds": time.perf_counter() - start}
    return cert


def evaluate_certificate(flow: ZonalFlow, bump: BumpProfile, rule: QuadratureRule, u_plus_interval=None,
                         richardson: bool = True) -> Certificate:
    chart = flow.chart
    Y = build_commuting_bump(chart, flow, bump, rule.collar,
                             u_plus=None if u_plus_interval is None else [u_plus_interval])
    rule = Y.window(rule)
    cond = condition_report(Y, flow, collar=rule.collar)
    engine = McEngine(Y.field, flow, commuting=True)
    mc: McReport = engine.report(rule, richardson=richardson)
    ok = (cond["divergence"] <= CONDITION_TOL and cond["commutator"] <= CONDITION_TOL
          and cond["support_in_u_plus"] and cond["max_abs_Y_norm2X"] > 0)
    verdict = mc.verdict if ok else "indeterminate"
    return Certificate(verdict=verdict, bump=bump.to_dict(), mc=mc.to_dict(), conditions=cond,
                       chart=chart.describe(), flow=flow.describe(), quadrature=rule.describe())


def flow_from_descriptor(chart_desc: dict, flow_desc: dict) -> ZonalFlow:
    chart = Ellipsoid3DChart(chart_desc["a"])
    return zonal_flow_3d(chart, flow_desc["p"], flow_desc["q"], Profile.from_dict(flow_desc["profile"]),
                         rational=flow_desc.get("rational", True))


def replay(cert: Certificate) -> tuple[Certificate, float]:
    """Re-evaluate a stored certificate; returns the new one and |mc_new - mc_old|."""
    flow = flow_from_descriptor(cert.chart, cert.flow)
    q = cert.quadrature
    rule = QuadratureRule(flow.chart, q["resolution"], q["collar"])
    u_plus = cert.conditions.get("u_plus") or None
    interval = None
    if u_plus:
        lo, hi = _bump_interval(cert)
        interval = next((iv for iv in u_plus if iv[0] < lo and hi < iv[1]), None)
    new = evaluate_certificate(flow, BumpProfile.from_dict(cert.bump), rule, interval)
    new.search = dict(cert.search)
    return new, abs(new.mc["mc_direct"] - cert.mc["mc_direct"])


def _bump_interval(cert: Certificate):
    b = cert.bump
    return b["center_chi"] - b["radius"], b["center_chi"] + b["radius"]
