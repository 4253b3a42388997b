"""Built-in charts: ellipsoids of revolution in 2D and 3D, the round sphere, a flat torus.

``Ellipsoid2DChart`` uses the arclength parametrisation ``r`` of the
generating half-ellipse ``(a cos phi, sin phi)`` together with the rotation
angle ``theta``. ``Ellipsoid3DChart`` is the Hopf-type chart
``(xi, mu, chi) -> (a cos xi sin chi, a sin xi sin chi, cos mu cos chi, sin mu cos chi)``.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ellipeinc

from . import jets
from .errors import ArgumentError, CapabilityError
from .geometry import Axis, Chart, VectorField

PI = np.pi


class ArclengthProfile:
    """Arclength reparametrisation of the half-ellipse ``phi -> (a cos phi, sin phi)``.

    Arclength from the equator is the incomplete elliptic integral
    ``E(phi | 1 - a^2)``. The inverse ``phi(r)`` starts from a monotone table
    with ``resolution`` nodes and is polished by Newton's method, so
    ``c1'^2 + c2'^2 = 1`` holds to rounding.
    """

    def __init__(self, a: float, resolution: int = 257):
        if not a > 0:
            raise ArgumentError(f"aspect ratio a must be positive, got {a}")
        if resolution < 3:
            raise ArgumentError("profile_resolution must be at least 3")
        self.a = float(a)
        self.m = 1.0 - self.a**2
        self.d = float(ellipeinc(PI / 2, self.m))
        self._phi_nodes = np.linspace(-PI / 2, PI / 2, resolution)
        self._r_nodes = ellipeinc(self._phi_nodes, self.m)

    def speed(self, phi):
        return np.sqrt(self.a**2 * np.sin(phi) ** 2 + np.cos(phi) ** 2)

    def phi(self, r):
        r = np.asarray(r, dtype=float)
        phi = np.interp(r, self._r_nodes, self._phi_nodes)
        for _ in range(8):
            step = (ellipeinc(phi, self.m) - r) / self.speed(phi)
            phi = phi - step
            if np.max(np.abs(step), initial=0.0) < 1e-15:
                break
        return phi

    def c1(self, r):
        """(c1, c1', c1'') at arclength ``r``."""
        phi = self.phi(r)
        a = self.a
        s, c = np.sin(phi), np.cos(phi)
        S = self.speed(phi)
        dS = (a**2 - 1.0) * s * c / S
        d1 = -a * s / S
        d2 = (-a * c / S + a * s * dS / S**2) / S
        return a * c, d1, d2

    def c2(self, r):
        phi = self.phi(r)
        a = self.a
        s, c = np.sin(phi), np.cos(phi)
        S = self.speed(phi)
        dS = (a**2 - 1.0) * s * c / S
        d1 = c / S
        d2 = (-s / S - c * dS / S**2) / S
        return s, d1, d2

    def c1_jet(self, r: jets.Jet) -> jets.Jet:
        return jets.compose(r, *self.c1(r.val))

    def c2_jet(self, r: jets.Jet) -> jets.Jet:
        return jets.compose(r, *self.c2(r.val))


class Ellipsoid2DChart(Chart):
    """Surface x^2 + y^2 = a^2 (1 - z^2) in coordinates (r, theta), g = diag(1, c1(r)^2)."""

    kind = "ellipsoid2d"

    def __init__(self, a: float, profile_resolution: int = 257):
        self.profile = ArclengthProfile(a, profile_resolution)
        self.a = self.profile.a
        self.d = self.profile.d
        prof = self.profile

        def metric(x):
            c1 = prof.c1_jet(x[0])
            return [[1.0, 0.0], [0.0, c1 * c1]]

        super().__init__(
            [Axis("r", -self.d, self.d, singular_lo=True, singular_hi=True),
             Axis("theta", -PI, PI, periodic=True)],
            metric, name=f"ellipsoid2d(a={self.a:g})")

    def christoffel_closed_form(self, x):
        c1 = self.profile.c1_jet(x[0])
        dc1 = c1.d(0)
        zero = 0.0 * dc1
        G = [[[zero, zero], [zero, -(c1.truncate(1) * dc1)]],
             [[zero, dc1 / c1.truncate(1)], [dc1 / c1.truncate(1), zero]]]
        return G

    def describe(self):
        return {"kind": self.kind, "a": self.a, "d": self.d}


class Sphere2Chart(Ellipsoid2DChart):
    """Unit sphere, the a = 1 member of the 2D family (c1 = cos r, d = pi/2)."""

    kind = "sphere2"

    def __init__(self, profile_resolution: int = 257):
        super().__init__(1.0, profile_resolution)
        self.name = "sphere2"


class Ellipsoid3DChart(Chart):
    """Hopf-type chart of x^2 + y^2 = a^2 (1 - z^2 - w^2).

    g = diag(a^2 sin^2 chi, cos^2 chi, a^2 cos^2 chi + sin^2 chi). The core
    circles N (chi -> pi/2) and S (chi -> 0) are the singular ends of the chi axis.
    """

    kind = "ellipsoid3d"

    def __init__(self, a: float):
        if not a > 0:
            raise ArgumentError(f"aspect ratio a must be positive, got {a}")
        self.a = float(a)
        a2 = self.a**2

        def metric(x):
            s, c = jets.sin(x[2]), jets.cos(x[2])
            return [[a2 * s * s, 0.0, 0.0],
                    [0.0, c * c, 0.0],
                    [0.0, 0.0, a2 * c * c + s * s]]

        super().__init__(
            [Axis("xi", -PI, PI, periodic=True),
             Axis("mu", -PI, PI, periodic=True),
             Axis("chi", 0.0, PI / 2, singular_lo=True, singular_hi=True)],
            metric, name=f"ellipsoid3d(a={self.a:g})")

    def density_closed_form(self, chi):
        s, c = np.sin(chi), np.cos(chi)
        return self.a * s * c * np.sqrt(self.a**2 * c * c + s * s)

    def christoffel_closed_form(self, x):
        a2 = self.a**2
        chi = x[2].truncate(1)
        s, c = jets.sin(chi), jets.cos(chi)
        den = a2 * c * c + s * s
        zero = 0.0 * s
        G = [[[zero] * 3 for _ in range(3)] for _ in range(3)]
        G[0][0][2] = G[0][2][0] = c / s
        G[1][1][2] = G[1][2][1] = -(s / c)
        G[2][0][0] = -a2 * s * c / den
        G[2][1][1] = s * c / den
        G[2][2][2] = (1.0 - a2) * s * c / den
        return G

    def norm2_closed_form(self, p, q, chi):
        """|p d_xi + q d_mu|^2 = a^2 p^2 sin^2 chi + q^2 cos^2 chi."""
        return self.a**2 * p**2 * np.sin(chi) ** 2 + q**2 * np.cos(chi) ** 2

    def describe(self):
        return {"kind": self.kind, "a": self.a}


class FlatTorusChart(Chart):
    """Flat torus with the identity metric; every coordinate is a periodic angle."""

    kind = "flat-torus"

    def __init__(self, dim: int = 2):
        names = ["x", "y", "z"][:dim]

        def metric(x):
            return [[1.0 if i == j else 0.0 for j in range(dim)] for i in range(dim)]

        super().__init__([Axis(n, -PI, PI, periodic=True) for n in names], metric,
                         name=f"flat-torus{dim}")

    def christoffel_closed_form(self, x):
        z = jets.constant(0.0, x[0].val.shape, self.dim).truncate(1)
        return [[[z] * self.dim for _ in range(self.dim)] for _ in range(self.dim)]

    def describe(self):
        return {"kind": self.kind, "dim": self.dim}


def make_ellipsoid_2d(a: float, profile_resolution: int = 257) -> Ellipsoid2DChart:
    return Ellipsoid2DChart(a, profile_resolution)


def make_ellipsoid_3d(a: float) -> Ellipsoid3DChart:
    return Ellipsoid3DChart(a)


def make_chart(kind: str, a: float = 1.0, **kw) -> Chart:
    """Chart from its configuration keyword."""
    if kind == "ellipsoid2d":
        return Ellipsoid2DChart(a, **kw)
    if kind == "sphere2":
        return Sphere2Chart(**kw)
    if kind == "ellipsoid3d":
        return Ellipsoid3DChart(a)
    if kind in ("flat-torus", "flat-torus2"):
        return FlatTorusChart(2)
    raise ArgumentError(f"unknown manifold kind {kind!r}")


def _sphere_rotation(chart: Chart, axis: str) -> VectorField:
    # chart components of P -> A P for the rotation generator about ``axis``
    def fn(ev):
        r, th = ev[0], ev[1]
        if axis == "x":
            return [jets.sin(th), -(jets.tan(r) * jets.cos(th))]
        return [-jets.cos(th), -(jets.tan(r) * jets.sin(th))]
    return VectorField(chart, fn, name=f"rot_{axis}")


def killing_basis(chart: Chart) -> list[VectorField]:
    """A basis of the Killing algebra of a built-in chart."""
    if isinstance(chart, Sphere2Chart) or (isinstance(chart, Ellipsoid2DChart) and chart.a == 1.0):
        return [chart.coordinate_field(1), _sphere_rotation(chart, "x"), _sphere_rotation(chart, "y")]
    if isinstance(chart, Ellipsoid2DChart):
        return [chart.coordinate_field(1)]
    if isinstance(chart, Ellipsoid3DChart):
        if chart.a == 1.0:
            raise CapabilityError("classification undefined at a=1: the round 3-sphere has a "
                                  "six-dimensional Killing algebra")
        return [chart.coordinate_field(0), chart.coordinate_field(1)]
    if isinstance(chart, FlatTorusChart):
        return [chart.coordinate_field(i) for i in range(chart.dim)]
    raise CapabilityError(f"no Killing basis known for {chart.name}")


def killing_combination(chart: Chart, coeffs) -> VectorField:
    """sum_i coeffs[i] * basis[i]; for the 3D ellipsoid this is p d_xi + q d_mu."""
    basis = killing_basis(chart)
    if len(coeffs) != len(basis):
        raise ArgumentError(f"expected {len(basis)} coefficients, got {len(coeffs)}")
    c = [float(v) for v in coeffs]

    def fn(ev):
        comps = [ev.const(0.0)] * chart.dim
        for ci, B in zip(c, basis):
            if ci != 0.0:
                comps = [u + ci * v for u, v in zip(comps, B(ev))]
        return comps

    return VectorField(chart, fn, name="X")
