"""Tensor-product quadrature over a chart.

Periodic axes use the uniform (trapezoid) rule, which is spectrally accurate
for smooth periodic integrands. Bounded axes use Gauss-Legendre nodes on the
collar-trimmed interval. Any axis may be restricted to a *window* when the
integrand is known to vanish outside it (for instance the support of a
perturbation field); the window then carries Gauss-Legendre nodes.

Nodes are evaluated in fixed-size chunks and summed in a fixed order, so a
result is bit-stable for a given rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ArgumentError, EvaluationError
from .geometry import Chart, Evaluation

DEFAULT_COLLAR = 1e-3
CHUNK = 16384


@dataclass(frozen=True)
class QuadratureRule:
    """Resolution per axis, collar width and optional per-axis windows."""

    chart: Chart
    resolution: tuple
    collar: float = DEFAULT_COLLAR
    windows: dict = field(default_factory=dict)

    def __post_init__(self):
        res = tuple(int(n) for n in self.resolution)
        if len(res) != self.chart.dim:
            raise ArgumentError(f"resolution needs {self.chart.dim} entries, got {len(res)}")
        if any(n < 1 for n in res):
            raise ArgumentError("resolutions must be positive")
        if not 0 < self.collar < 0.5:
            raise ArgumentError("collar must lie in (0, 0.5)")
        object.__setattr__(self, "resolution", res)

    def with_window(self, axis: int, lo: float, hi: float) -> "QuadratureRule":
        windows = dict(self.windows)
        windows[int(axis)] = (float(lo), float(hi))
        return replace(self, windows=windows)

    def scaled(self, factor: float) -> "QuadratureRule":
        return replace(self, resolution=tuple(max(1, int(round(n * factor))) for n in self.resolution))

    def doubled(self) -> "QuadratureRule":
        return replace(self, resolution=tuple(2 * n for n in self.resolution))

    def axis_rule(self, i: int):
        """(nodes, weights) along axis ``i``."""
        ax = self.chart.axes[i]
        n = self.resolution[i]
        lo, hi = ax.trimmed(self.collar)
        if i in self.windows:
            wlo, whi = self.windows[i]
            if not ax.periodic:
                wlo, whi = max(wlo, lo), min(whi, hi)
            if not whi > wlo:
                raise ArgumentError(f"empty quadrature window on axis {ax.name}")
            lo, hi = wlo, whi
        elif ax.periodic:
            h = (hi - lo) / n
            return lo + h * np.arange(n), np.full(n, h)
        x, w = np.polynomial.legendre.leggauss(n)
        half = 0.5 * (hi - lo)
        return lo + half * (x + 1.0), half * w

    def nodes(self):
        """All nodes as (N, dim) and their product weights as (N,)."""
        rules = [self.axis_rule(i) for i in range(self.chart.dim)]
        pts = np.stack([m.reshape(-1) for m in np.meshgrid(*[r[0] for r in rules], indexing="ij")], -1)
        w = rules[0][1]
        for r in rules[1:]:
            w = np.multiply.outer(w, r[1])
        return pts, w.reshape(-1)

    def describe(self) -> dict:
        return {"resolution": list(self.resolution), "collar": self.collar,
                "windows": {self.chart.axes[k].name: list(v) for k, v in sorted(self.windows.items())}}


def integrate_many(integrands, rule: QuadratureRule, with_samples: bool = False):
    """Integrals of several pointwise quantities against the volume density.

    ``integrands(ev)`` returns a list of arrays (values at ``ev.points``).
    Returns a numpy array of integrals, plus the per-node values when
    ``with_samples`` is set.
    """
    pts, w = rule.nodes()
    totals = None
    samples, weights = [], []
    for start in range(0, len(w), CHUNK):
        chunk = pts[start:start + CHUNK]
        ev = Evaluation(rule.chart, chunk)
        vals = np.stack([np.asarray(v, dtype=float) * np.ones(len(chunk))
                         for v in integrands(ev)], 0)
        bad = ~np.isfinite(vals)
        if np.any(bad):
            k = np.flatnonzero(bad.any(axis=0))[0]
            raise EvaluationError(f"non-finite integrand at node {chunk[k].tolist()}",
                                  location=chunk[k].tolist())
        dens = ev.density.val
        wd = dens * w[start:start + CHUNK]
        part = (vals * wd).sum(axis=1)
        totals = part if totals is None else totals + part
        if with_samples:
            samples.append(vals)
            weights.append(wd)
    if with_samples:
        # these weights include the volume density
        return totals, pts, np.concatenate(weights), np.concatenate(samples, axis=1)
    return totals


def integrate(h, rule: QuadratureRule) -> float:
    """Integral of the scalar field ``h`` against the chart volume."""
    return float(integrate_many(lambda ev: [h(ev).val], rule)[0])


def volume(rule: QuadratureRule) -> float:
    return float(integrate_many(lambda ev: [np.ones(ev.shape)], rule)[0])
