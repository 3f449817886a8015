"""Second-order jets over the three curvilinear parameters.

A :class:`Jet` carries a batch of values together with their exact
gradient and Hessian with respect to ``(k1, k2, k3)``. Maps are composed
through :func:`chain`, the second-order chain rule, so every derivative the
verifiers look at is analytic: symbolic where the user wrote a formula,
implicit-function derived where a root solve sits in between.

Shapes: ``val (N,)``, ``grad (N, 3)``, ``hess (N, 3, 3)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from . import expr as ex
from .errors import SceneError

NDIM = 3


@dataclass(frozen=True)
class Jet:
    val: np.ndarray
    grad: np.ndarray
    hess: np.ndarray

    @classmethod
    def variable(cls, values, index: int) -> "Jet":
        values = np.asarray(values, dtype=float)
        n = values.shape[0]
        grad = np.zeros((n, NDIM))
        grad[:, index] = 1.0
        return cls(values, grad, np.zeros((n, NDIM, NDIM)))

    @classmethod
    def constant(cls, value, n: int) -> "Jet":
        return cls(
            np.broadcast_to(np.asarray(value, dtype=float), (n,)).copy(),
            np.zeros((n, NDIM)),
            np.zeros((n, NDIM, NDIM)),
        )

    def __len__(self) -> int:
        return self.val.shape[0]

    def _lift(self, other) -> "Jet":
        if isinstance(other, Jet):
            return other
        return Jet.constant(other, len(self))

    def __add__(self, other):
        o = self._lift(other)
        return Jet(self.val + o.val, self.grad + o.grad, self.hess + o.hess)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.val, -self.grad, -self.hess)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, Jet):
            c = float(other)
            return Jet(c * self.val, c * self.grad, c * self.hess)
        a, b = self, other
        outer = np.einsum("ni,nj->nij", a.grad, b.grad)
        return Jet(
            a.val * b.val,
            a.grad * b.val[:, None] + a.val[:, None] * b.grad,
            a.hess * b.val[:, None, None]
            + a.val[:, None, None] * b.hess
            + outer
            + outer.transpose(0, 2, 1),
        )

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet":
        if np.any(self.val == 0):
            raise ZeroDivisionError("reciprocal of a jet with zero value")
        v = self.val
        g = self.grad
        r = 1.0 / v
        return Jet(
            r,
            -g * (r**2)[:, None],
            2.0 * np.einsum("ni,nj->nij", g, g) * (r**3)[:, None, None]
            - self.hess * (r**2)[:, None, None],
        )

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return self * (1.0 / float(other))
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other


def chain(val, grad, hess, inputs: Sequence[Jet]) -> Jet:
    """Compose an outer function of ``m`` arguments with ``m`` input jets.

    ``grad (N, m)`` and ``hess (N, m, m)`` are the outer derivatives
    evaluated at the input values.
    """
    n = len(inputs[0])
    val = np.broadcast_to(np.asarray(val, dtype=float), (n,))
    grad = np.broadcast_to(np.asarray(grad, dtype=float), (n, len(inputs)))
    hess = np.broadcast_to(np.asarray(hess, dtype=float), (n, len(inputs), len(inputs)))
    jac = np.stack([j.grad for j in inputs], axis=1)  # (N, m, 3)
    second = np.stack([j.hess for j in inputs], axis=1)  # (N, m, 3, 3)
    out_grad = np.einsum("nm,nmi->ni", grad, jac)
    out_hess = np.einsum("nm,nmij->nij", grad, second) + np.einsum(
        "nmi,nml,nlj->nij", jac, hess, jac
    )
    return Jet(val.copy(), out_grad, out_hess)


class ScalarFunction:
    """An expression over a fixed, ordered argument list, with cached
    symbolic first and second derivatives."""

    def __init__(self, e, variables: Sequence[str], label: str = "expression"):
        self.expr = ex.as_expr(e)
        self.variables = tuple(variables)
        self.label = label
        extra = ex.free_variables(self.expr) - set(self.variables)
        if extra:
            raise SceneError(
                f"{label} {ex.to_string(self.expr)!r} uses variable(s) "
                f"{sorted(extra)}; allowed: {list(self.variables)}"
            )

    def __repr__(self) -> str:
        return f"ScalarFunction({ex.to_string(self.expr)!r}, {self.variables})"

    @cached_property
    def gradient(self) -> tuple:
        return tuple(ex.differentiate(self.expr, v) for v in self.variables)

    @cached_property
    def hessian(self) -> tuple:
        m = len(self.variables)
        rows = [[None] * m for _ in range(m)]
        for i in range(m):
            for j in range(i, m):
                rows[i][j] = ex.differentiate(self.gradient[i], self.variables[j])
                rows[j][i] = rows[i][j]
        return tuple(tuple(r) for r in rows)

    def _bind(self, args) -> dict:
        if isinstance(args, Mapping):
            return dict(args)
        return dict(zip(self.variables, args))

    def value(self, *args, strict: bool = True):
        return ex.evaluate(self.expr, self._bind(args), strict=strict)

    def derivatives(self, args, n: int):
        """Value, gradient ``(n, m)`` and Hessian ``(n, m, m)`` at ``args``."""
        env = self._bind(args)
        m = len(self.variables)

        def ev(e):
            return np.broadcast_to(ex.evaluate(e, env), (n,))

        val = ev(self.expr)
        grad = np.empty((n, m))
        hess = np.empty((n, m, m))
        for i in range(m):
            grad[:, i] = ev(self.gradient[i])
            for j in range(i, m):
                hess[:, i, j] = ev(self.hessian[i][j])
                hess[:, j, i] = hess[:, i, j]
        return val, grad, hess

    def compose(self, *inputs: Jet) -> Jet:
        if len(inputs) != len(self.variables):
            raise ValueError(f"{self!r} expects {len(self.variables)} inputs")
        n = len(inputs[0])
        val, grad, hess = self.derivatives([j.val for j in inputs], n)
        return chain(val, grad, hess, inputs)


def single_variable(e, label: str, default: str) -> ScalarFunction:
    """A function of exactly one argument, whatever its variable is called."""
    e = ex.as_expr(e)
    names = sorted(ex.free_variables(e))
    if len(names) > 1:
        raise SceneError(
            f"{label} {ex.to_string(e)!r} must depend on one variable, got {names}"
        )
    return ScalarFunction(e, names or [default], label)
