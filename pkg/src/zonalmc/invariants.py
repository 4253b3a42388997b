"""Identity checks shared by the ``verify`` command and the test-suite.

Each check returns a :class:`Check` with the measured residual and the
tolerance it was held to. Checks never raise for numerical failures: a
conditioning or domain error inside a check becomes a failed check with the
error message attached.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import jets
from .errors import ZonalMCError
from .geometry import (Chart, Evaluation, ScalarField, VectorField, christoffel, covariant_derivative,
                       divergence, grad, inner, killing_residual, lie_bracket, metric_values, norm2)
from .manifolds import Ellipsoid2DChart, Ellipsoid3DChart, killing_basis

IDENTITY_TOL = 1e-8
FD_STEP = 1e-5
FD_REL = 1e-6


@dataclass
class Check:
    name: str
    passed: bool
    residual: float | None
    tolerance: float | None
    detail: str = ""

    def to_dict(self):
        return asdict(self)


def _run(name, tol, fn) -> Check:
    try:
        res = float(fn())
    except ZonalMCError as exc:
        return Check(name, False, None, tol, f"{type(exc).__name__}: {exc}")
    return Check(name, bool(res <= tol), res, tol)


# -- individual residuals ----------------------------------------------------


def metric_definiteness(chart: Chart, points) -> float:
    """Negative of the smallest eigenvalue over samples (<= 0 means positive definite)."""
    g = metric_values(chart, points)
    return float(-np.min(np.linalg.eigvalsh(g)[..., 0]))


def metric_symmetry(chart: Chart, points) -> float:
    g = metric_values(chart, points)
    return float(np.max(np.abs(g - np.swapaxes(g, -1, -2))))


def periodic_agreement(chart: Chart, points) -> float:
    """Metric at a point versus the same point shifted by 2 pi along each periodic axis."""
    g0 = metric_values(chart, points)
    worst = 0.0
    for i, ax in enumerate(chart.axes):
        if ax.periodic:
            shifted = np.array(points, dtype=float)
            shifted[:, i] += 2.0 * np.pi
            worst = max(worst, float(np.max(np.abs(metric_values(chart, shifted) - g0))))
    return worst


def christoffel_agreement(chart: Chart, points) -> float:
    generic = christoffel(chart, points)
    closed = christoffel(chart, points, closed_form=True)
    return float(np.max(np.abs(generic - closed)))


def christoffel_symmetry(chart: Chart, points) -> float:
    G = christoffel(chart, points)
    return float(np.max(np.abs(G - np.swapaxes(G, -1, -2))))


def fd_jet_error(h: ScalarField, points, step: float = FD_STEP) -> float:
    """Largest relative gap between jet derivatives and central differences.

    First partials are differenced from values, second partials from the
    jet's first partials.
    """
    pts = np.asarray(points, dtype=float)
    j0 = h.jet(pts).require(2)
    worst = 0.0
    for i in range(h.chart.dim):
        e = np.zeros(h.chart.dim)
        e[i] = step
        jp, jm = h.jet(pts + e), h.jet(pts - e)
        d1 = (jp.val - jm.val) / (2 * step)
        worst = max(worst, float(np.max(np.abs(d1 - j0.grad[..., i]) / np.maximum(1.0, np.abs(d1)))))
        d2 = (jp.grad - jm.grad) / (2 * step)
        worst = max(worst, float(np.max(np.abs(d2 - j0.hess[..., i, :]) / np.maximum(1.0, np.abs(d2)))))
    return worst


def grad_duality(h: ScalarField, V: VectorField, points) -> float:
    """max |g(grad h, V) - V(h)| / max(1, |V(h)|)."""
    ev = Evaluation(h.chart, points)
    lhs = inner(grad(h), V)(ev).val
    rhs = V.apply(h)(ev).val
    return float(np.max(np.abs(lhs - rhs) / np.maximum(1.0, np.abs(rhs))))


def torsion_residual(V: VectorField, W: VectorField, points) -> float:
    ev = Evaluation(V.chart, points)
    a = (covariant_derivative(V, W) - covariant_derivative(W, V) - lie_bracket(V, W))(ev)
    return float(max(np.max(np.abs(c.val)) for c in a))


def compatibility_residual(V: VectorField, W: VectorField, U: VectorField, points) -> float:
    ev = Evaluation(V.chart, points)
    lhs = V.apply(inner(W, U))(ev).val
    rhs = (inner(covariant_derivative(V, W), U) + inner(W, covariant_derivative(V, U)))(ev).val
    return float(np.max(np.abs(lhs - rhs)))


def killing_identities(X: VectorField, points) -> tuple[float, float]:
    """(|2 nabla_X X + grad |X|^2|, |X(|X|^2)|) maxima over samples."""
    ev = Evaluation(X.chart, points)
    n2 = norm2(X)
    v = (covariant_derivative(X, X).scale(2.0) + grad(n2))(ev)
    a = float(max(np.max(np.abs(c.val)) for c in v))
    b = float(np.max(np.abs(X.apply(n2)(ev).val)))
    return a, b


def arclength_defect(chart: Ellipsoid2DChart, r) -> float:
    _, d1, _ = chart.profile.c1(r)
    _, e1, _ = chart.profile.c2(r)
    return float(np.max(np.abs(d1 * d1 + e1 * e1 - 1.0)))


def norm2_law(chart: Ellipsoid3DChart, p: float, q: float, points) -> float:
    X = VectorField(chart, lambda ev: [ev.const(p), ev.const(q), ev.const(0.0)])
    got = norm2(X).values(points)
    return float(np.max(np.abs(got - chart.norm2_closed_form(p, q, points[:, 2]))))


# -- test fields --------------------------------------------------------------


def smooth_test_scalar(chart: Chart, seed: int = 0) -> ScalarField:
    """A smooth, chart-periodic scalar built from random trigonometric terms."""
    rng = np.random.default_rng(seed)
    k = rng.integers(1, 3, size=(3, chart.dim)).astype(float)
    c = rng.normal(size=3)

    def fn(ev):
        acc = ev.const(0.0)
        for kk, cc in zip(k, c):
            phase = ev[0] * kk[0]
            for i in range(1, chart.dim):
                phase = phase + ev[i] * kk[i]
            acc = acc + jets.sin(phase) * cc
        return acc

    return ScalarField(chart, fn, "h")


def smooth_test_vector(chart: Chart, seed: int = 1) -> VectorField:
    rng = np.random.default_rng(seed)
    comps = [smooth_test_scalar(chart, int(s)) for s in rng.integers(0, 2**31, size=chart.dim)]
    return VectorField(chart, lambda ev: [h(ev) for h in comps], "V")


# -- suite --------------------------------------------------------------------


def run_suite(chart: Chart, seed: int = 0, n_samples: int = 200, grid_n: int = 20,
              collar: float = 1e-2, tol: float = IDENTITY_TOL) -> list[Check]:
    """All chart-level identities for a built-in chart."""
    rng = np.random.default_rng(seed)
    pts = chart.sample(n_samples, rng, collar)
    checks = [
        _run("metric symmetric", tol, lambda: metric_symmetry(chart, pts)),
        _run("metric positive definite (-min eigenvalue)", 0.0, lambda: metric_definiteness(chart, pts)),
        _run("volume density positive (-min det g)", 0.0,
             lambda: -float(np.min(Evaluation(chart, pts).det.val))),
        _run("periodic endpoints agree", tol, lambda: periodic_agreement(chart, pts)),
        _run("christoffel symmetric in lower indices", tol, lambda: christoffel_symmetry(chart, pts)),
    ]
    grid = chart.grid(grid_n, collar)
    if chart.christoffel_closed_form(Evaluation(chart, pts[:1]).x) is not None:
        checks.append(_run(f"closed-form vs generic christoffel ({grid_n}^{chart.dim} grid)", tol,
                           lambda: christoffel_agreement(chart, grid)))
    h = smooth_test_scalar(chart, seed)
    V = smooth_test_vector(chart, seed + 1)
    W = smooth_test_vector(chart, seed + 2)
    U = smooth_test_vector(chart, seed + 3)
    checks += [
        _run("jets vs central differences (relative)", FD_REL, lambda: fd_jet_error(h, pts[:50])),
        _run("g(grad h, V) = V(h) (relative)", 1e-9, lambda: grad_duality(h, V, pts)),
        _run("torsion-free", tol, lambda: torsion_residual(V, W, pts)),
        _run("metric compatibility", tol, lambda: compatibility_residual(V, W, U, pts)),
    ]
    try:
        basis = killing_basis(chart)
    except ZonalMCError as exc:
        checks.append(Check("killing basis available", False, None, None, str(exc)))
        basis = []
    for X in basis:
        checks.append(_run(f"killing residual {X.name}", tol, lambda X=X: killing_residual(X, pts)))
        checks.append(_run(f"divergence of {X.name}", tol,
                           lambda X=X: float(np.max(np.abs(divergence(X).values(pts))))))
        checks.append(_run(f"2 nabla_X X + grad |X|^2 = 0 for {X.name}", tol,
                           lambda X=X: killing_identities(X, pts)[0]))
        checks.append(_run(f"X(|X|^2) = 0 for {X.name}", tol, lambda X=X: killing_identities(X, pts)[1]))
    if isinstance(chart, Ellipsoid2DChart):
        checks.append(_run("arclength |c'|^2 = 1", tol, lambda: arclength_defect(chart, pts[:, 0])))
        checks.append(_run("|d_theta|^2 = c1^2 is non-constant (-std)", 0.0,
                           lambda: -float(np.std(chart.profile.c1(pts[:, 0])[0] ** 2))))
    if isinstance(chart, Ellipsoid3DChart):
        for p, q in rng.normal(size=(3, 2)):
            checks.append(_run(f"|p d_xi + q d_mu|^2 law (p={p:.3f}, q={q:.3f})", 1e-10,
                               lambda p=p, q=q: norm2_law(chart, p, q, pts)))
    return checks


def flow_checks(flow, seed: int = 0, n_samples: int = 200, collar: float = 1e-2) -> list[Check]:
    """Zonal-flow identities: nabla_Z Z = f^2 nabla_X X = -(f^2/2) grad |X|^2 and the sign identity."""
    from .zonal import intrinsic_sign_residual

    pts = flow.chart.sample(n_samples, np.random.default_rng(seed), collar)

    def nzz():
        ev = Evaluation(flow.chart, pts)
        Z = flow.Z
        a = covariant_derivative(Z, Z)(ev)
        f2 = flow.f2(ev)
        b = covariant_derivative(flow.X, flow.X)(ev)
        c = grad(flow.norm2_X)(ev)
        r1 = max(np.max(np.abs(a[k].val - f2.val * b[k].val)) for k in range(len(a)))
        r2 = max(np.max(np.abs(a[k].val + 0.5 * f2.val * c[k].val)) for k in range(len(a)))
        return max(r1, r2)

    return [_run("nabla_Z Z = f^2 nabla_X X = -(f^2/2) grad |X|^2", IDENTITY_TOL, nzz),
            _run("intrinsic sign identity (relative)", 1e-7, lambda: intrinsic_sign_residual(flow, pts))]
