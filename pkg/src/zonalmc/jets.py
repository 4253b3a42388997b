"""Truncated second-order Taylor jets over numpy arrays.

A :class:`Jet` carries the value of a scalar quantity at a batch of points
together with its first and second partial derivatives with respect to the
chart coordinates. Arithmetic propagates the derivatives (forward mode), so
any closure written in terms of jets yields exact derivatives up to order 2.

Differentiating a jet (:func:`Jet.d`) lowers its order by one. Binary
operations truncate to the smaller order of their operands, which is how
nested constructions (brackets of brackets) know how many derivatives
remain available.
"""

from __future__ import annotations

import numpy as np

from .errors import CapabilityError

__all__ = ["Jet", "variables", "constant", "sin", "cos", "tan", "exp", "log",
           "sqrt", "where", "compose", "as_jet"]


class Jet:
    __slots__ = ("val", "grad", "hess", "order", "const")

    def __init__(self, val, grad=None, hess=None, const=False):
        self.val = np.asarray(val, dtype=float)
        self.grad = grad
        self.hess = hess if grad is not None else None
        # const marks jets whose derivatives are known to vanish; arithmetic skips them
        self.const = const
        if grad is None:
            self.order = 0
        elif hess is None:
            self.order = 1
        else:
            self.order = 2

    @property
    def dim(self) -> int:
        if self.grad is None:
            raise CapabilityError("order-0 jet has no coordinate dimension")
        return self.grad.shape[-1]

    def truncate(self, order: int) -> "Jet":
        if order >= self.order:
            return self
        if order == 1:
            return Jet(self.val, self.grad, const=self.const)
        return Jet(self.val, const=self.const)

    def d(self, i: int) -> "Jet":
        """Partial derivative with respect to coordinate ``i``."""
        if self.order == 0:
            raise CapabilityError("cannot differentiate an order-0 jet")
        if self.order == 1:
            return Jet(self.grad[..., i], const=self.const)
        return Jet(self.grad[..., i], self.hess[..., i, :], const=self.const)

    def require(self, order: int) -> "Jet":
        if self.order < order:
            raise CapabilityError(
                f"order-{order} jet requested but only order {self.order} is available")
        return self

    # -- arithmetic -----------------------------------------------------

    def __neg__(self):
        return Jet(-self.val,
                   None if self.grad is None else -self.grad,
                   None if self.hess is None else -self.hess, const=self.const)

    def __add__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.val + other, self.grad, self.hess, const=self.const)
        order = min(self.order, other.order)
        val = self.val + other.val
        if other.const or self.const:
            base = (self if other.const else other).truncate(order)
            return Jet(val, base.grad, base.hess, const=self.const and other.const)
        if order == 0:
            return Jet(val)
        grad = self.grad + other.grad
        if order == 1:
            return Jet(val, grad)
        return Jet(val, grad, self.hess + other.hess)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            return Jet(self.val * other,
                       None if self.grad is None else self.grad * other[..., None],
                       None if self.hess is None else self.hess * other[..., None, None],
                       const=self.const)
        a, b = self, other
        order = min(a.order, b.order)
        if b.const:
            return a.truncate(order) * b.val
        if a.const:
            return b.truncate(order) * a.val
        val = a.val * b.val
        if order == 0:
            return Jet(val)
        grad = a.grad * b.val[..., None] + b.grad * a.val[..., None]
        if order == 1:
            return Jet(val, grad)
        cross = a.grad[..., :, None] * b.grad[..., None, :]
        hess = a.hess * b.val[..., None, None]
        hess += b.hess * a.val[..., None, None]
        hess += cross
        hess += np.swapaxes(cross, -1, -2)
        return Jet(val, grad, hess)

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet":
        v = self.val
        return compose(self, 1.0 / v, -1.0 / v**2, 2.0 / v**3)

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return self * (1.0 / np.asarray(other, dtype=float))
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, n):
        if isinstance(n, int) and n >= 0:
            if n == 0:
                return constant_like(self, 1.0)
            out = self
            for _ in range(n - 1):
                out = out * self
            return out
        v = self.val
        return compose(self, v**n, n * v**(n - 1), n * (n - 1) * v**(n - 2))

    def __repr__(self):
        return f"Jet(order={self.order}, shape={self.val.shape})"


def as_jet(x, like: Jet) -> Jet:
    if isinstance(x, Jet):
        return x
    return constant_like(like, x)


def constant_like(like: Jet, c) -> Jet:
    val = np.broadcast_to(np.asarray(c, dtype=float), like.val.shape).copy()
    if like.order == 0:
        return Jet(val, const=True)
    grad = np.zeros(like.val.shape + (like.dim,))
    if like.order == 1:
        return Jet(val, grad, const=True)
    return Jet(val, grad, np.zeros(like.val.shape + (like.dim, like.dim)), const=True)


def constant(c, shape, dim: int) -> Jet:
    val = np.broadcast_to(np.asarray(c, dtype=float), shape).copy()
    return Jet(val, np.zeros(shape + (dim,)), np.zeros(shape + (dim, dim)), const=True)


def variables(points) -> list[Jet]:
    """Seed one order-2 jet per coordinate column of ``points`` (shape (..., d))."""
    points = np.asarray(points, dtype=float)
    d = points.shape[-1]
    shape = points.shape[:-1]
    out = []
    for i in range(d):
        grad = np.zeros(shape + (d,))
        grad[..., i] = 1.0
        out.append(Jet(points[..., i], grad, np.zeros(shape + (d, d))))
    return out


def compose(u: Jet, f0, f1, f2) -> Jet:
    """Chain rule: jet of ``f(u)`` given f, f', f'' evaluated at ``u.val``."""
    f0 = np.asarray(f0, dtype=float)
    if u.order == 0:
        return Jet(f0)
    if u.const:
        return Jet(f0, np.zeros_like(u.grad), None if u.hess is None else np.zeros_like(u.hess), const=True)
    f1 = np.asarray(f1, dtype=float)
    grad = u.grad * f1[..., None]
    if u.order == 1:
        return Jet(f0, grad)
    f2 = np.asarray(f2, dtype=float)
    hess = (u.grad[..., :, None] * u.grad[..., None, :]) * f2[..., None, None] \
        + u.hess * f1[..., None, None]
    return Jet(f0, grad, hess)


def sin(u: Jet) -> Jet:
    s, c = np.sin(u.val), np.cos(u.val)
    return compose(u, s, c, -s)


def cos(u: Jet) -> Jet:
    s, c = np.sin(u.val), np.cos(u.val)
    return compose(u, c, -s, -c)


def tan(u: Jet) -> Jet:
    t = np.tan(u.val)
    sec2 = 1.0 + t * t
    return compose(u, t, sec2, 2.0 * t * sec2)


def exp(u: Jet) -> Jet:
    e = np.exp(u.val)
    return compose(u, e, e, e)


def log(u: Jet) -> Jet:
    v = u.val
    return compose(u, np.log(v), 1.0 / v, -1.0 / v**2)


def sqrt(u: Jet) -> Jet:
    s = np.sqrt(u.val)
    return compose(u, s, 0.5 / s, -0.25 / (s * u.val))


def where(mask, a: Jet, b: Jet) -> Jet:
    """Pointwise selection; derivatives are taken from the selected branch."""
    mask = np.asarray(mask, dtype=bool)
    order = min(a.order, b.order)
    val = np.where(mask, a.val, b.val)
    if order == 0:
        return Jet(val)
    grad = np.where(mask[..., None], a.grad, b.grad)
    if order == 1:
        return Jet(val, grad)
    return Jet(val, grad, np.where(mask[..., None, None], a.hess, b.hess))
