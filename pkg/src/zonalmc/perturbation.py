"""Compactly supported divergence-free perturbations Y commuting with X.

On the 3D ellipsoid with ``X = p d_xi + q d_mu`` (p, q coprime integers) the
angle ``t = -q xi + p mu`` satisfies ``X(t) = 0``. Writing
``d_t = alpha d_xi + beta d_mu`` with ``(alpha, beta) = (-q, p) / (p^2 + q^2)``
keeps ``d_xi d_mu`` and ``d_t`` volume-compatible (``p beta - q alpha = 1``).

A rotational bump ``Y0`` in the (t, chi) plane is divergence-free for the flat
density ``dt dchi``. Dividing by the chart density ``H(chi)`` gives
``div(Y0 / H) = 0`` for the chart volume, and since every coefficient depends
on (t, chi) only, ``[X, Y] = 0``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np

from . import jets
from .errors import CapabilityError, ConstructionError
from .geometry import Evaluation, VectorField, norm2
from .manifolds import Ellipsoid3DChart
from .zonal import ZonalFlow

TWO_PI = 2.0 * np.pi


def _psi(u):
    # exp(-1/u) for u > 0, else 0, with two derivatives
    pos = u > 0
    us = np.where(pos, u, 1.0)
    e = np.where(pos, np.exp(-1.0 / us), 0.0)
    return e, e / us**2, e * (1.0 / us**4 - 2.0 / us**3)


def smooth_step(u: jets.Jet) -> jets.Jet:
    """C-infinity step: 0 for u <= 0, 1 for u >= 1."""
    a = jets.compose(u, *_psi(u.val))
    b = jets.compose(1.0 - u, *_psi(1.0 - u.val))
    return a / (a + b)


def mollifier(x):
    """Radial cutoff of ``x``: 1 on |x| <= 1/2, 0 on |x| >= 1 (numpy values)."""
    x = np.asarray(x, dtype=float)
    u = jets.Jet((1.0 - x * x) / 0.75)
    return smooth_step(u).val


def cutoff_sq(s: jets.Jet) -> jets.Jet:
    """The same cutoff written in terms of s = x^2, so it is smooth at x = 0."""
    return smooth_step((1.0 - s) * (1.0 / 0.75))


def wrap_angle(x):
    """Representative of x in [-pi, pi)."""
    return (x + np.pi) % TWO_PI - np.pi


@dataclass(frozen=True)
class BumpProfile:
    """Elliptic rotational bump in the (t, chi) plane.

    ``radius`` is the chi half-width of the support; ``t_radius`` the t
    half-width (defaults to ``radius``). The field is
    ``A m(R) ((chi - chi0) rt/rc d_t - (t - t0) rc/rt d_chi)`` with
    ``R^2 = ((t - t0)/rt)^2 + ((chi - chi0)/rc)^2``.
    """

    center_t: float
    center_chi: float
    radius: float
    amplitude: float = 1.0
    t_radius: float | None = None

    @property
    def rt(self) -> float:
        return self.radius if self.t_radius is None else self.t_radius

    def chi_support(self):
        return self.center_chi - self.radius, self.center_chi + self.radius

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def with_params(self, **kw) -> "BumpProfile":
        return replace(self, **kw)


@dataclass
class PerturbationField:
    """A constructed Y together with what is known about its support."""

    field: VectorField
    p: int
    q: int
    bump: BumpProfile | None
    chi_support: tuple
    kind: str = "commuting-bump"

    def describe(self) -> dict:
        return {"kind": self.kind, "p": self.p, "q": self.q,
                "bump": None if self.bump is None else self.bump.to_dict(),
                "chi_support": list(self.chi_support)}

    def window(self, rule):
        """Restrict ``rule`` to the chi-support (and the mu-support when t = mu)."""
        rule = rule.with_window(2, *self.chi_support)
        if self.bump is not None and self.q == 0 and abs(self.p) == 1:
            t0 = self.p * self.bump.center_t
            rt = self.bump.rt
            if rt < np.pi:
                rule = rule.with_window(1, t0 - rt, t0 + rt)
        return rule


def transverse_angle(p: int, q: int):
    n = p * p + q * q
    return (-q / n, p / n)


def _bump_components(ev: Evaluation, t: jets.Jet, chi: jets.Jet, bump: BumpProfile):
    rt, rc = bump.rt, bump.radius
    dt = t - bump.center_t
    dt = dt + (wrap_angle(dt.val) - dt.val)  # shift by multiples of 2 pi, derivatives unchanged
    dc = chi - bump.center_chi
    s = dt * dt * (1.0 / rt**2) + dc * dc * (1.0 / rc**2)
    m = cutoff_sq(s) * bump.amplitude
    return m * dc * (rt / rc), -(m * dt * (rc / rt))


def build_commuting_bump(chart: Ellipsoid3DChart, flow: ZonalFlow, bump: BumpProfile,
                         collar: float = 1e-3, u_plus=None, weighted: bool = True) -> PerturbationField:
    """Y = Y0 / H with Y0 the rotational bump around (t0, chi0), H the chart density.

    ``weighted=False`` skips the division by H; the result then fails to be
    divergence-free and only serves to exercise the diagnostics.
    """
    if not isinstance(chart, Ellipsoid3DChart):
        raise CapabilityError("commuting bumps are built on the 3D ellipsoid chart only")
    if chart.a == 1.0:
        raise CapabilityError("classification undefined at a=1")
    p, q = flow.p, flow.q
    if p is None or not flow.rational or int(p) != p or int(q) != q:
        raise CapabilityError("commuting bumps need integer Killing coefficients (p, q)")
    p, q = int(p), int(q)
    if not bump.radius > 0 or not bump.rt > 0:
        raise ConstructionError("bump radii must be positive")
    if bump.rt > np.pi:
        raise ConstructionError(f"t-radius {bump.rt:.4g} exceeds pi: the bump would overlap itself")
    lo, hi = bump.chi_support()
    clo, chi_hi = chart.axes[2].trimmed(collar)
    if lo <= clo:
        raise ConstructionError(f"bump support [{lo:.4g}, {hi:.4g}] leaves the trimmed chart "
                                f"at chi = {clo:.4g} (margin {lo - clo:.3g})")
    if hi >= chi_hi:
        raise ConstructionError(f"bump support [{lo:.4g}, {hi:.4g}] leaves the trimmed chart "
                                f"at chi = {chi_hi:.4g} (margin {chi_hi - hi:.3g})")
    if u_plus is not None:
        inside = [iv for iv in u_plus if iv[0] < lo and hi < iv[1]]
        if not inside:
            raise ConstructionError(f"bump support [{lo:.4g}, {hi:.4g}] is not inside U+ = {u_plus}")
    alpha, beta = transverse_angle(p, q)

    def fn(ev):
        t = ev[0] * float(-q) + ev[1] * float(p)
        at, ac = _bump_components(ev, t, ev[2], bump)
        if weighted:
            inv_h = ev.density.reciprocal()
            at, ac = at * inv_h, ac * inv_h
        return [at * alpha, at * beta, ac]

    kind = "commuting-bump" if weighted else "unweighted-bump"
    return PerturbationField(VectorField(chart, fn, "Y"), p, q, bump, (lo, hi), kind)


def rotational_bump(chart, axes: tuple, center, radius: float, amplitude: float = 1.0,
                    cutoff_axis: int | None = None, cutoff_center: float = 0.0,
                    cutoff_radius: float = 1.0) -> VectorField:
    """Chart-divergence-free rotational bump in the coordinate plane ``axes``.

    With ``cutoff_axis`` set the bump is multiplied by a cutoff in that
    third coordinate, which does not enter the flat divergence. The field is
    divided by the chart density, so it is divergence-free for the chart
    volume. In general it does not commute with X.
    """
    i, j = axes

    def fn(ev):
        di = ev[i] - center[0]
        di = di + (wrap_angle(di.val) - di.val) if chart.axes[i].periodic else di
        dj = ev[j] - center[1]
        dj = dj + (wrap_angle(dj.val) - dj.val) if chart.axes[j].periodic else dj
        m = cutoff_sq((di * di + dj * dj) * (1.0 / radius**2)) * amplitude
        if cutoff_axis is not None:
            dk = ev[cutoff_axis] - cutoff_center
            if chart.axes[cutoff_axis].periodic:
                dk = dk + (wrap_angle(dk.val) - dk.val)
            m = m * cutoff_sq(dk * dk * (1.0 / cutoff_radius**2))
        inv_h = ev.density.reciprocal()
        comps = [ev.const(0.0)] * chart.dim
        comps[i] = m * dj * inv_h
        comps[j] = -(m * di * inv_h)
        return comps

    return VectorField(chart, fn, "Y")


def condition_report(Y: PerturbationField, flow: ZonalFlow, n: int = 24, collar: float = 1e-3) -> dict:
    """Residuals for: (a) div Y = 0, (b) [X, Y] = 0, (c) supp Y inside U+, (d) Y(|X|^2) != 0.

    (a), (b) are evaluated on a grid covering Y's chi-support plus a margin
    and are normalised like :mod:`zonalmc.mc`. (c) reports the smallest
    distance between the chi-support and the complement of U+ (positive
    means inside) together with a sampled check that Y vanishes outside.
    """
    from .mc import commutator_residual, divergence_residual
    from .zonal import u_plus_intervals

    chart = flow.chart
    lo, hi = Y.chi_support
    pad = 0.25 * (hi - lo)
    c_lo, c_hi = chart.axes[2].trimmed(collar)
    g = chart.grid(n, collar)
    ang = -np.pi + TWO_PI * (np.arange(n) + 0.5) / n
    chi_in = np.linspace(max(lo - pad, c_lo), min(hi + pad, c_hi), n)
    pts = np.stack([m.reshape(-1) for m in np.meshgrid(ang, ang, chi_in, indexing="ij")], -1)
    res_a = divergence_residual(Y.field, pts)
    res_b = commutator_residual(flow.X, Y.field, pts)

    u_plus = u_plus_intervals(flow) if flow.axis is not None else []
    margins = [min(lo - a, b - hi) for a, b in u_plus]
    margin = max(margins) if margins else -np.inf
    outside = g[(g[:, 2] < lo) | (g[:, 2] > hi)]
    leak = float(np.max(np.abs(Y.field.values(outside)), initial=0.0)) if len(outside) else 0.0

    ev = Evaluation(chart, pts)
    yx = Y.field.apply(norm2(flow.X))(ev).val
    return {"divergence": res_a, "commutator": res_b,
            "support_in_u_plus": bool(margin > 0 and leak == 0.0),
            "support_margin": float(margin), "support_leak": leak,
            "u_plus": [list(iv) for iv in u_plus],
            "max_abs_Y_norm2X": float(np.max(np.abs(yx), initial=0.0))}
