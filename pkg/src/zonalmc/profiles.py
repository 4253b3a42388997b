"""One-variable profile functions f for zonal flows Z = f X.

Every family returns the value and the first two derivatives so it can be
lifted to a jet. Compactly supported families vanish identically outside
``center +- half_width``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import make_interp_spline

from . import jets
from .errors import ArgumentError

FAMILIES = ("bump", "raised-cosine", "poly-cos2", "table", "constant", "flipped")


def _bump(s):
    # exp(1 - 1/(1 - s^2)) on |s| < 1 with its s-derivatives; peak value 1 at s = 0
    inside = np.abs(s) < 1.0
    si = np.where(inside, s, 0.0)
    q = 1.0 - si * si
    phi = 1.0 - 1.0 / q
    e = np.where(inside, np.exp(phi), 0.0)
    p1 = -2.0 * si / q**2
    p2 = -2.0 / q**2 - 8.0 * si * si / q**3
    return e, e * p1, e * (p1 * p1 + p2)


def _raised_cosine(s):
    inside = np.abs(s) < 1.0
    h = np.where(inside, 0.5 * (1.0 + np.cos(np.pi * s)), 0.0)
    h1 = np.where(inside, -0.5 * np.pi * np.sin(np.pi * s), 0.0)
    h2 = np.where(inside, -0.5 * np.pi**2 * np.cos(np.pi * s), 0.0)
    return h * h, 2.0 * h * h1, 2.0 * (h1 * h1 + h * h2)


@dataclass(frozen=True)
class Profile:
    """A named smooth one-variable function and its parameters."""

    family: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ArgumentError(f"unknown profile family {self.family!r}; expected one of {FAMILIES}")
        if self.family in ("bump", "raised-cosine"):
            if not self.params.get("half_width", 0) > 0:
                raise ArgumentError(f"{self.family} profile needs a positive half_width")
        if self.family == "table":
            x = np.asarray(self.params["x"], dtype=float)
            if x.ndim != 1 or len(x) < 2 or np.any(np.diff(x) <= 0):
                raise ArgumentError("table profile needs strictly increasing x nodes")
            degree = int(self.params.get("degree", 3))
            if len(x) <= degree:
                raise ArgumentError(f"table profile needs more than {degree} nodes")
            object.__setattr__(self, "_spline",
                               make_interp_spline(x, np.asarray(self.params["y"], dtype=float), k=degree))

    # -- constructors -----------------------------------------------------

    @classmethod
    def bump(cls, center, half_width, amplitude=1.0):
        return cls("bump", {"center": float(center), "half_width": float(half_width),
                            "amplitude": float(amplitude)})

    @classmethod
    def raised_cosine(cls, center, half_width, amplitude=1.0):
        return cls("raised-cosine", {"center": float(center), "half_width": float(half_width),
                                     "amplitude": float(amplitude)})

    @classmethod
    def poly_cos2(cls, coeffs):
        return cls("poly-cos2", {"coeffs": [float(c) for c in coeffs]})

    @classmethod
    def table(cls, x, y, degree=3):
        return cls("table", {"x": [float(v) for v in x], "y": [float(v) for v in y],
                             "degree": int(degree)})

    @classmethod
    def constant(cls, value):
        return cls("constant", {"value": float(value)})

    def flipped(self, level=None):
        """Profile with f~^2 = level - f^2, so grad(f~^2) = -grad(f^2) everywhere."""
        if level is None:
            level = 2.0 * self.max_square()
        level = float(level)
        if not level > self.max_square():
            raise ArgumentError("flip level must exceed max f^2")
        return Profile("flipped", {"level": level, "base": self.to_dict()})

    # -- evaluation -----------------------------------------------------

    def derivs(self, u):
        """(f, f', f'') at the array ``u``."""
        u = np.asarray(u, dtype=float)
        p = self.params
        fam = self.family
        if fam in ("bump", "raised-cosine"):
            w, A = p["half_width"], p.get("amplitude", 1.0)
            s = (u - p["center"]) / w
            f0, f1, f2 = (_bump if fam == "bump" else _raised_cosine)(s)
            return A * f0, A * f1 / w, A * f2 / w**2
        if fam == "poly-cos2":
            P = np.polynomial.Polynomial(p["coeffs"])
            C = np.cos(u) ** 2
            C1, C2 = -np.sin(2 * u), -2.0 * np.cos(2 * u)
            return P(C), P.deriv()(C) * C1, P.deriv(2)(C) * C1**2 + P.deriv()(C) * C2
        if fam == "table":
            spl = self._spline
            x = np.asarray(p["x"])
            inside = (u >= x[0]) & (u <= x[-1])
            uc = np.clip(u, x[0], x[-1])
            return tuple(np.where(inside, spl(uc, nu=k), 0.0) for k in range(3))
        if fam == "constant":
            return np.full_like(u, p["value"]), np.zeros_like(u), np.zeros_like(u)
        base = Profile.from_dict(p["base"])
        b0, b1, b2 = base.derivs(u)
        sq0, sq1, sq2 = b0 * b0, 2 * b0 * b1, 2 * (b1 * b1 + b0 * b2)
        g = np.sqrt(p["level"] - sq0)
        return g, -sq1 / (2 * g), -sq2 / (2 * g) - sq1**2 / (4 * g**3)

    def __call__(self, u: jets.Jet) -> jets.Jet:
        return jets.compose(u, *self.derivs(u.val))

    def support(self):
        """Closed interval outside which f vanishes, or None if not compactly supported."""
        p = self.params
        if self.family in ("bump", "raised-cosine"):
            return (p["center"] - p["half_width"], p["center"] + p["half_width"])
        if self.family == "table":
            return (p["x"][0], p["x"][-1])
        return None

    def max_square(self, lo=0.0, hi=np.pi / 2, n=4001) -> float:
        if self.family in ("bump", "raised-cosine"):
            return self.params.get("amplitude", 1.0) ** 2
        u = np.linspace(lo, hi, n)
        return float(np.max(self.derivs(u)[0] ** 2))

    def to_dict(self) -> dict:
        return {"family": self.family, **self.params}

    @classmethod
    def from_dict(cls, d: dict) -> "Profile":
        d = dict(d)
        family = d.pop("family")
        return cls(family, d)
