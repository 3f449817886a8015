"""The curvilinear solution map ``x(k)`` and the plasma fields it carries.

The k1- and k2-coordinate lines of the map are the integral curves of the
commuting fields ``a = v - B`` and ``b = v + B``; hence

    a = dx/dk1,   b = dx/dk2,   v = (a + b) / 2,   B = (b - a) / 2.

Density is unity throughout. The total pressure ``P`` is a constant ``P0``
unless an explicit pressure function of ``k`` is supplied.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError, OutOfDomainError, SingularityError
from .jet import Jet, ScalarFunction

Range = Tuple[float, float]
K_VARS = ("k1", "k2", "k3")


@dataclass(frozen=True)
class Box:
    """Closed axis-aligned box in k-space."""

    k1: Range
    k2: Range
    k3: Range

    def __post_init__(self):
        for name in K_VARS:
            lo, hi = getattr(self, name)
            if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
                raise ValueError(f"invalid {name} range {(lo, hi)}")

    @classmethod
    def from_dict(cls, d) -> "Box":
        return cls(*(tuple(float(v) for v in d[name]) for name in K_VARS))

    def to_dict(self) -> dict:
        return {name: list(getattr(self, name)) for name in K_VARS}

    @property
    def lo(self) -> np.ndarray:
        return np.array([self.k1[0], self.k2[0], self.k3[0]])

    @property
    def hi(self) -> np.ndarray:
        return np.array([self.k1[1], self.k2[1], self.k3[1]])

    def contains(self, k, slack: float = 1e-12) -> np.ndarray:
        k = np.atleast_2d(k)
        pad = slack * np.maximum(1.0, np.abs(self.hi - self.lo))
        return np.all((k >= self.lo - pad) & (k <= self.hi + pad), axis=1)

    def grid(self, shape: Sequence[int], inset: float = 0.0) -> np.ndarray:
        """Uniform tensor grid (boundaries included), flattened to ``(N, 3)``."""
        axes = [
            np.linspace(lo + inset, hi - inset, n) if n > 1 else np.array([0.5 * (lo + hi)])
            for lo, hi, n in zip(self.lo, self.hi, shape)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass(frozen=True)
class MapJet:
    """Batch evaluation of ``x(k)``: ``x (N,3)``, ``d1[n,i,j] = dx^i/dk^j``
    and ``d2[n,i,j,l] = d2x^i/dk^j dk^l``."""

    k: np.ndarray
    x: np.ndarray
    d1: np.ndarray
    d2: np.ndarray

    @property
    def a(self) -> np.ndarray:
        return self.d1[:, :, 0]

    @property
    def b(self) -> np.ndarray:
        return self.d1[:, :, 1]


@dataclass(frozen=True)
class PlasmaState:
    v: np.ndarray
    B: np.ndarray
    P: np.ndarray
    p: np.ndarray


MapFunction = Callable[[List[Jet]], Sequence[Jet]]


class FlowMap:
    """A map ``k -> x`` with exact first and second derivatives.

    ``fn`` receives the three input jets ``[k1, k2, k3]`` and returns the
    three component jets of ``x``. Composition with parameter changes is
    therefore just function composition on jets.
    """

    def __init__(
        self,
        fn: MapFunction,
        domain: Box,
        family: str = "custom",
        P0: float = 0.0,
        pressure: Optional[ScalarFunction] = None,
        probe: int = 5,
    ):
        self._fn = fn
        self.domain = domain
        self.family = family
        self.P0 = float(P0)
        self.pressure = pressure
        if probe:
            self._probe(probe)

    def __repr__(self) -> str:
        return f"FlowMap(family={self.family!r}, domain={self.domain})"

    def _probe(self, n: int) -> None:
        k = self.domain.grid((n, n, n))
        try:
            mj = self.evaluate_unchecked(k)
        except (DomainError, ZeroDivisionError) as exc:
            raise SingularityError(f"scene domain touches a singularity: {exc}") from exc
        bad = ~(
            np.isfinite(mj.x).all(axis=1)
            & np.isfinite(mj.d1).all(axis=(1, 2))
            & np.isfinite(mj.d2).all(axis=(1, 2, 3))
        )
        det = np.linalg.det(mj.d1)
        bad |= ~(np.abs(det) > 1e-12)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise SingularityError(
                f"scene domain touches a singularity near k = {tuple(np.round(k[i], 12))}"
            )

    # -- evaluation ----------------------------------------------------------

    def component_jets(self, inputs: List[Jet]) -> List[Jet]:
        return list(self._fn(inputs))

    def evaluate_unchecked(self, k) -> MapJet:
        k = np.atleast_2d(np.asarray(k, dtype=float))
        inputs = [Jet.variable(k[:, i], i) for i in range(3)]
        with np.errstate(all="ignore"):
            comps = self.component_jets(inputs)
        n = k.shape[0]
        x = np.stack([np.broadcast_to(c.val, (n,)) for c in comps], axis=1)
        d1 = np.stack([c.grad for c in comps], axis=1)
        d2 = np.stack([c.hess for c in comps], axis=1)
        return MapJet(k, x, d1, d2)

    def check_domain(self, k) -> np.ndarray:
        k = np.atleast_2d(np.asarray(k, dtype=float))
        inside = self.domain.contains(k)
        if not inside.all():
            i = int(np.flatnonzero(~inside)[0])
            raise OutOfDomainError(f"point k = {tuple(k[i])} is outside the domain {self.domain}")
        return k

    def evaluate(self, k) -> MapJet:
        return self.evaluate_unchecked(self.check_domain(k))

    def __call__(self, k) -> np.ndarray:
        return self.evaluate(k).x

    def pressure_jet(self, inputs: List[Jet]) -> Jet:
        if self.pressure is None:
            return Jet.constant(self.P0, len(inputs[0]))
        return self.pressure.compose(*inputs)

    def total_pressure(self, k) -> Tuple[np.ndarray, np.ndarray]:
        """Total pressure and its k-gradient at ``k``."""
        k = np.atleast_2d(np.asarray(k, dtype=float))
        pj = self.pressure_jet([Jet.variable(k[:, i], i) for i in range(3)])
        return pj.val, pj.grad

    # -- derived quantities -------------------------------------------------------

    def basis_at(self, k):
        mj = self.evaluate(k)
        return _squeeze(mj.a, k), _squeeze(mj.b, k)

    def fields_at(self, k) -> PlasmaState:
        k = np.asarray(k, dtype=float)
        mj = self.evaluate(k)
        state = fields_from(mj, self.total_pressure(mj.k)[0])
        return PlasmaState(*(_squeeze(f, k) for f in (state.v, state.B, state.P, state.p)))

    def jacobian_det(self, k):
        return _squeeze(np.linalg.det(self.evaluate(k).d1), k)

    def alfven_discriminant(self, k):
        """``a . b = |v|^2 - |B|^2``; its sign gives the Alfven regime."""
        mj = self.evaluate(k)
        return _squeeze(np.einsum("ni,ni->n", mj.a, mj.b), k)


def fields_from(mj: MapJet, P: np.ndarray) -> PlasmaState:
    a, b = mj.a, mj.b
    v = 0.5 * (b + a)
    B = 0.5 * (b - a)
    P = np.broadcast_to(P, (a.shape[0],)).astype(float)
    p = P - 0.5 * np.einsum("ni,ni->n", B, B)
    return PlasmaState(v, B, P, p)


def _squeeze(arr, k):
    return arr[0] if np.ndim(k) == 1 else arr


def from_exprs(components, domain: Box, P0: float = 0.0, pressure=None,
               family: str = "custom", probe: int = 5) -> FlowMap:
    """A map given directly by three component formulas over ``k1, k2, k3``.

    Handy for non-constant pressure checks; ``pressure`` is an optional
    formula for ``P(k)``.
    """
    fns = [ScalarFunction(c, K_VARS, f"x{i + 1}") for i, c in enumerate(components)]
    pfn = None if pressure is None else ScalarFunction(pressure, K_VARS, "pressure")

    def fn(k):
        return [f.compose(*k) for f in fns]

    return FlowMap(fn, domain, family=family, P0=P0, pressure=pfn, probe=probe)

