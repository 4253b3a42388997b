"""Chart-based tensor calculus.

Everything here works on a single coordinate chart. Metric components are
closures over coordinate jets, so the metric, its inverse, the volume
density and the Christoffel symbols all come with exact partial derivatives.
Scalar and vector fields are closures too; operations such as
:func:`lie_bracket` or :func:`covariant_derivative` build new closures and
consume one derivative order of their inputs.

Fields are evaluated through an :class:`Evaluation`, a throwaway object bound
to one batch of points. It memoises the metric, Christoffel symbols and every
field evaluated on that batch, so nested expressions like ``[[Z, Y], Y]`` do
not recompute ``Z`` and ``Y``. An evaluation is never shared between calls,
which keeps concurrent use race-free.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import jets
from .errors import ArgumentError, CapabilityError, ConditioningError, DomainError
from .jets import Jet

TWO_PI = 2.0 * np.pi
CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class Axis:
    """One chart coordinate: its open interval and whether it is an angle."""

    name: str
    lo: float
    hi: float
    periodic: bool = False
    # True where the end of the interval is a coordinate singularity
    singular_lo: bool = False
    singular_hi: bool = False

    def trimmed(self, collar: float) -> tuple[float, float]:
        lo = self.lo + (collar if self.singular_lo else 0.0)
        hi = self.hi - (collar if self.singular_hi else 0.0)
        return lo, hi


MetricFn = Callable[[Sequence[Jet]], list]


class Chart:
    """A coordinate box with a metric given as a closure over coordinate jets.

    ``metric_fn(x)`` receives one jet per coordinate and returns a ``dim x dim``
    nested list of jets (or plain numbers for constant entries).
    """

    kind = "chart"

    def __init__(self, axes: Sequence[Axis], metric_fn: MetricFn, name: str = "chart"):
        self.axes = tuple(axes)
        self.dim = len(self.axes)
        if self.dim not in (2, 3):
            raise ArgumentError(f"charts of dimension {self.dim} are not supported")
        self._metric_fn = metric_fn
        self.name = name

    @property
    def coord_names(self) -> list[str]:
        return [ax.name for ax in self.axes]

    def metric(self, x: Sequence[Jet]) -> list[list[Jet]]:
        g = self._metric_fn(x)
        return [[jets.as_jet(g[i][j], x[0]) for j in range(self.dim)] for i in range(self.dim)]

    def christoffel_closed_form(self, x: Sequence[Jet]):
        """Closed-form symbols ``G[k][i][j]`` when the chart knows them, else None."""
        return None

    def describe(self) -> dict:
        return {"kind": self.kind, "name": self.name}

    # -- domain handling ------------------------------------------------

    def check_points(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[-1] != self.dim:
            raise ArgumentError(f"expected points with {self.dim} coordinates, got {points.shape[-1]}")
        if not np.all(np.isfinite(points)):
            raise DomainError("non-finite coordinates")
        for i, ax in enumerate(self.axes):
            if ax.periodic:
                continue
            c = points[..., i]
            bad = (c <= ax.lo) | (c >= ax.hi)
            if np.any(bad):
                where = points.reshape(-1, self.dim)[np.flatnonzero(bad)[0]]
                raise DomainError(
                    f"coordinate {ax.name} outside ({ax.lo}, {ax.hi}) at {where.tolist()}")
        return points

    def sample(self, n: int, rng: np.random.Generator, collar: float = 1e-3) -> np.ndarray:
        cols = []
        for ax in self.axes:
            lo, hi = ax.trimmed(collar)
            cols.append(rng.uniform(lo, hi, size=n))
        return np.stack(cols, axis=-1)

    def grid(self, n: int, collar: float = 1e-3) -> np.ndarray:
        """Tensor grid with ``n`` points per axis, flattened to (n**dim, dim)."""
        lines = []
        for ax in self.axes:
            lo, hi = ax.trimmed(collar)
            if ax.periodic:
                lines.append(lo + (hi - lo) * (np.arange(n) + 0.5) / n)
            else:
                lines.append(np.linspace(lo, hi, n))
        mesh = np.meshgrid(*lines, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=-1)

    def coordinate_field(self, i: int) -> "VectorField":
        name = f"d_{self.axes[i].name}"

        def fn(ev):
            return [ev.const(1.0 if k == i else 0.0) for k in range(self.dim)]

        return VectorField(self, fn, name=name)

    def coordinate_function(self, i: int) -> "ScalarField":
        return ScalarField(self, lambda ev: ev.x[i], name=self.axes[i].name)


class Evaluation:
    """Coordinates, metric data and memoised field values on one batch of points."""

    def __init__(self, chart: Chart, points, check: bool = True):
        self.chart = chart
        self.points = chart.check_points(points) if check else np.atleast_2d(points)
        self.x = jets.variables(self.points)
        self.shape = self.points.shape[:-1]
        self._memo: dict = {}

    def __getitem__(self, i) -> Jet:
        return self.x[i]

    def __len__(self):
        return len(self.x)

    def const(self, c) -> Jet:
        return jets.constant(c, self.shape, self.chart.dim)

    def memo(self, key, build):
        if key not in self._memo:
            self._memo[key] = build()
        return self._memo[key]

    @property
    def g(self) -> list[list[Jet]]:
        return self.memo("g", lambda: self.chart.metric(self.x))

    @property
    def det(self) -> Jet:
        return self.memo("det", lambda: _det(self.g))

    @property
    def ginv(self) -> list[list[Jet]]:
        return self.memo("ginv", self._inverse)

    @property
    def density(self) -> Jet:
        """Volume density sqrt(det g)."""
        return self.memo("density", lambda: jets.sqrt(self.det))

    @property
    def gamma(self) -> list:
        return self.memo("gamma", lambda: christoffel_jets(self.g, self.ginv))

    def _inverse(self):
        g = self.g
        d = len(g)
        gval = np.stack([np.stack([g[i][j].val for j in range(d)], -1) for i in range(d)], -2)
        sym = np.max(np.abs(gval - np.swapaxes(gval, -1, -2)), initial=0.0)
        if sym > 1e-10 * max(1.0, np.max(np.abs(gval), initial=0.0)):
            raise ConditioningError(f"metric is not symmetric (asymmetry {sym:.3e})")
        eig = np.linalg.eigvalsh(gval.reshape(-1, d, d))
        if np.any(eig[:, 0] <= 0):
            raise ConditioningError("metric is not positive definite at some points",
                                    condition_number=float("inf"))
        cond = float(np.max(eig[:, -1] / eig[:, 0]))
        if cond > CONDITION_LIMIT:
            raise ConditioningError(f"metric condition number {cond:.3e} exceeds {CONDITION_LIMIT:.0e}",
                                    condition_number=cond)
        det = self.det
        inv_det = det.reciprocal()
        cof = _cofactors(g)
        return [[cof[j][i] * inv_det for j in range(d)] for i in range(d)]


def _det(g):
    if len(g) == 2:
        return g[0][0] * g[1][1] - g[0][1] * g[1][0]
    return (g[0][0] * (g[1][1] * g[2][2] - g[1][2] * g[2][1])
            - g[0][1] * (g[1][0] * g[2][2] - g[1][2] * g[2][0])
            + g[0][2] * (g[1][0] * g[2][1] - g[1][1] * g[2][0]))


def _cofactors(g):
    if len(g) == 2:
        return [[g[1][1], -g[1][0]], [-g[0][1], g[0][0]]]
    c = [[None] * 3 for _ in range(3)]
    for i in range(3):
        for j in range(3):
            r = [k for k in range(3) if k != i]
            s = [k for k in range(3) if k != j]
            minor = g[r[0]][s[0]] * g[r[1]][s[1]] - g[r[0]][s[1]] * g[r[1]][s[0]]
            c[i][j] = minor if (i + j) % 2 == 0 else -minor
    return c


def christoffel_jets(g, ginv):
    """Generic Levi-Civita symbols G[k][i][j] from metric jets."""
    d = len(g)
    dg = [[[g[i][j].d(a) for a in range(d)] for j in range(d)] for i in range(d)]
    out = [[[None] * d for _ in range(d)] for _ in range(d)]
    for i in range(d):
        for j in range(i, d):
            lower = [dg[j][a][i] + dg[i][a][j] - dg[i][j][a] for a in range(d)]
            for k in range(d):
                acc = ginv[k][0] * lower[0]
                for a in range(1, d):
                    acc = acc + ginv[k][a] * lower[a]
                out[k][i][j] = out[k][j][i] = acc * 0.5
    return out


def _stack3(G, field="val"):
    d = len(G)
    return np.stack([np.stack([np.stack([getattr(G[k][i][j], field) for j in range(d)], -1)
                               for i in range(d)], -2) for k in range(d)], -3)


def christoffel(chart: Chart, point, closed_form: bool = False) -> np.ndarray:
    """Christoffel symbols at ``point`` as an array indexed ``[..., k, i, j]``.

    A single point gives a ``dim x dim x dim`` array; a batch gives a leading axis.
    """
    pts = np.asarray(point, dtype=float)
    single = pts.ndim == 1
    ev = Evaluation(chart, pts)
    if closed_form:
        G = chart.christoffel_closed_form(ev.x)
        if G is None:
            raise CapabilityError(f"{chart.name} has no closed-form Christoffel symbols")
        G = [[[jets.as_jet(G[k][i][j], ev.x[0]) for j in range(chart.dim)]
              for i in range(chart.dim)] for k in range(chart.dim)]
    else:
        G = ev.gamma
    out = _stack3(G)
    return out[0] if single else out


# ---------------------------------------------------------------------------
# fields


class ScalarField:
    """A function on a chart, as a closure ``fn(ev) -> Jet``.

    ``ev`` supports ``ev[i]`` for the i-th coordinate jet, so a plain
    ``lambda x: jets.sin(x[2])`` works as ``fn``.
    """

    def __init__(self, chart: Chart, fn, name: str | None = None):
        self.chart = chart
        self._fn = fn
        self.name = name or "h"

    def __call__(self, ev: Evaluation) -> Jet:
        return ev.memo(self, lambda: jets.as_jet(self._fn(ev), ev.x[0]))

    def jet(self, points) -> Jet:
        return self(Evaluation(self.chart, points))

    def values(self, points) -> np.ndarray:
        return self.jet(points).val

    def __add__(self, other):
        if isinstance(other, ScalarField):
            return ScalarField(self.chart, lambda ev: self(ev) + other(ev), f"({self.name}+{other.name})")
        return ScalarField(self.chart, lambda ev: self(ev) + other, self.name)

    __radd__ = __add__

    def __neg__(self):
        return ScalarField(self.chart, lambda ev: -self(ev), f"-{self.name}")

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, VectorField):
            return other.scale(self)
        if isinstance(other, ScalarField):
            return ScalarField(self.chart, lambda ev: self(ev) * other(ev), f"{self.name}*{other.name}")
        return ScalarField(self.chart, lambda ev: self(ev) * other, self.name)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, ScalarField):
            return ScalarField(self.chart, lambda ev: self(ev) / other(ev), f"{self.name}/{other.name}")
        return ScalarField(self.chart, lambda ev: self(ev) / other, self.name)

    def __pow__(self, n):
        return ScalarField(self.chart, lambda ev: self(ev) ** n, f"{self.name}^{n}")


class VectorField:
    """A vector field as a closure ``fn(ev) -> [Jet] * dim`` of chart components."""

    def __init__(self, chart: Chart, fn, name: str | None = None):
        self.chart = chart
        self._fn = fn
        self.name = name or "V"

    def __call__(self, ev: Evaluation) -> list[Jet]:
        def build():
            comps = self._fn(ev)
            if len(comps) != self.chart.dim:
                raise ArgumentError(f"{self.name}: expected {self.chart.dim} components")
            return [jets.as_jet(c, ev.x[0]) for c in comps]
        return ev.memo(self, build)

    def jet(self, points) -> list[Jet]:
        return self(Evaluation(self.chart, points))

    def values(self, points) -> np.ndarray:
        return np.stack([c.val for c in self.jet(points)], axis=-1)

    def apply(self, h: ScalarField) -> ScalarField:
        """The directional derivative V(h)."""
        def fn(ev):
            v, hj = self(ev), h(ev)
            return _sum(v[i] * hj.d(i) for i in range(self.chart.dim))
        return ScalarField(self.chart, fn, f"{self.name}({h.name})")

    def scale(self, s) -> "VectorField":
        if isinstance(s, ScalarField):
            return VectorField(self.chart, lambda ev: [s(ev) * c for c in self(ev)], f"{s.name}{self.name}")
        return VectorField(self.chart, lambda ev: [c * s for c in self(ev)], self.name)

    def __add__(self, other: "VectorField"):
        return VectorField(self.chart, lambda ev: [a + b for a, b in zip(self(ev), other(ev))],
                           f"({self.name}+{other.name})")

    def __neg__(self):
        return VectorField(self.chart, lambda ev: [-c for c in self(ev)], f"-{self.name}")

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, s):
        return self.scale(s)

    __rmul__ = __mul__


def _sum(terms):
    it = iter(terms)
    acc = next(it)
    for t in it:
        acc = acc + t
    return acc


def zero_field(chart: Chart) -> VectorField:
    return VectorField(chart, lambda ev: [ev.const(0.0)] * chart.dim, "0")


# ---------------------------------------------------------------------------
# operations


def inner(V: VectorField, W: VectorField) -> ScalarField:
    """Pointwise g(V, W)."""
    def fn(ev):
        g, v, w = ev.g, V(ev), W(ev)
        d = len(v)
        return _sum(g[i][j] * v[i] * w[j] for i in range(d) for j in range(d))
    return ScalarField(V.chart, fn, f"g({V.name},{W.name})")


def norm2(V: VectorField) -> ScalarField:
    return inner(V, V)


def grad(h: ScalarField) -> VectorField:
    """Gradient g^{ij} d_j h d_i."""
    def fn(ev):
        gi, hj = ev.ginv, h(ev)
        d = h.chart.dim
        dh = [hj.d(j) for j in range(d)]
        return [_sum(gi[i][j] * dh[j] for j in range(d)) for i in range(d)]
    return VectorField(h.chart, fn, f"grad({h.name})")


def divergence(V: VectorField) -> ScalarField:
    """(1/sqrt g) d_i(sqrt g V^i), computed as d_i V^i + V^i d_i log sqrt g."""
    def fn(ev):
        v = V(ev)
        dens = ev.density
        d = V.chart.dim
        return _sum(v[i].d(i) + v[i] * (dens.d(i) / dens) for i in range(d))
    return ScalarField(V.chart, fn, f"div({V.name})")


def lie_bracket(V: VectorField, W: VectorField) -> VectorField:
    """[V, W]^k = V^i d_i W^k - W^i d_i V^k, i.e. [V,W](h) = V(W(h)) - W(V(h))."""
    def fn(ev):
        v, w = V(ev), W(ev)
        d = V.chart.dim
        return [_sum(v[i] * w[k].d(i) - w[i] * v[k].d(i) for i in range(d)) for k in range(d)]
    return VectorField(V.chart, fn, f"[{V.name},{W.name}]")


def covariant_derivative(V: VectorField, W: VectorField) -> VectorField:
    """(nabla_V W)^k = V^i d_i W^k + G^k_ij V^i W^j."""
    def fn(ev):
        v, w, G = V(ev), W(ev), ev.gamma
        d = V.chart.dim
        out = []
        for k in range(d):
            acc = _sum(v[i] * w[k].d(i) for i in range(d))
            for i in range(d):
                for j in range(d):
                    acc = acc + G[k][i][j] * v[i] * w[j]
            out.append(acc)
        return out
    return VectorField(V.chart, fn, f"nabla_{V.name}{W.name}")


def hessian(h: ScalarField, points) -> np.ndarray:
    """Covariant Hessian d_i d_j h - G^k_ij d_k h at ``points``, shape (..., d, d)."""
    ev = Evaluation(h.chart, points)
    hj = h(ev).require(2)
    G = ev.gamma
    d = h.chart.dim
    out = np.empty(ev.shape + (d, d))
    for i in range(d):
        for j in range(d):
            acc = hj.hess[..., i, j]
            for k in range(d):
                acc = acc - G[k][i][j].val * hj.grad[..., k]
            out[..., i, j] = acc
    return out


def killing_residual(X: VectorField, sample_points) -> float:
    """max over samples and basis pairs of |g(nabla_i X, d_j) + g(nabla_j X, d_i)|."""
    pts = np.asarray(sample_points, dtype=float)
    if pts.size == 0:
        raise ArgumentError("killing_residual needs at least one sample point")
    ev = Evaluation(X.chart, pts)
    x, g, G = X(ev), ev.g, ev.gamma
    d = X.chart.dim
    # lowered[i][j] = g(nabla_i X, d_j)
    nab = [[x[k].d(i).val + sum(G[k][i][l].val * x[l].val for l in range(d)) for k in range(d)]
           for i in range(d)]
    lowered = [[sum(g[j][k].val * nab[i][k] for k in range(d)) for j in range(d)] for i in range(d)]
    worst = 0.0
    for i in range(d):
        for j in range(i, d):
            worst = max(worst, float(np.max(np.abs(lowered[i][j] + lowered[j][i]))))
    return worst


def metric_values(chart: Chart, points) -> np.ndarray:
    ev = Evaluation(chart, points)
    d = chart.dim
    return np.stack([np.stack([ev.g[i][j].val for j in range(d)], -1) for i in range(d)], -2)
