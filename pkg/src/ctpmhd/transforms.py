"""Equivalence transformations and current sheets.

Both transformations act on the parameters only, so contact surfaces
``k3 = c`` keep their point sets:

* scaling (Bogoyavlenskij): ``k1 -> phi(k3) k1``, ``k2 -> k2 / phi(k3)``,
  giving ``a -> phi a`` and ``b -> b / phi`` with the total pressure unchanged;
* translation: ``k1 -> k1 + psi(k3)``, ``k2 -> k2 + chi(k3)``.

A scaling factor that jumps across ``k3 = c`` turns that surface into a
contact discontinuity carrying a surface current.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import SceneError, SingularityError
from .flowmap import FlowMap
from .jet import Jet, ScalarFunction

Range = Tuple[float, float]


def _k3_probe(m: FlowMap, n: int = 201) -> np.ndarray:
    return np.linspace(m.domain.k3[0], m.domain.k3[1], n)


class _ComposedPressure:
    """Pressure of a transformed map: ``P(T(k))``."""

    def __init__(self, pressure, transform):
        self.pressure = pressure
        self.transform = transform

    def compose(self, *inputs: Jet) -> Jet:
        return self.pressure.compose(*self.transform(list(inputs)))


def _derived(m: FlowMap, transform, tag: str) -> FlowMap:
    def fn(k):
        return m.component_jets(transform(k))

    pressure = None if m.pressure is None else _ComposedPressure(m.pressure, transform)
    return FlowMap(fn, m.domain, family=f"{m.family}+{tag}", P0=m.P0, pressure=pressure)


def bogoyavlenskij(m: FlowMap, phi) -> FlowMap:
    """``x~(k) = x(phi(k3) k1, k2 / phi(k3), k3)``."""
    phi_f = ScalarFunction(phi, ("k3",), "phi")
    values = np.broadcast_to(phi_f.value(_k3_probe(m)), _k3_probe(m).shape)
    if not np.all(np.isfinite(values)) or np.any(values == 0) or (
        values.min() < 0 < values.max()
    ):
        raise SceneError(
            f"scaling factor {phi_f.expr} must be finite and nonvanishing on "
            f"k3 in {m.domain.k3}"
        )

    def transform(k):
        k1, k2, k3 = k
        f = phi_f.compose(k3)
        return [f * k1, k2 / f, k3]

    return _derived(m, transform, f"bt[{phi_f.expr}]")


def translate(m: FlowMap, psi="0", chi="0") -> FlowMap:
    """``x~(k) = x(k1 + psi(k3), k2 + chi(k3), k3)``."""
    psi_f = ScalarFunction(psi, ("k3",), "psi")
    chi_f = ScalarFunction(chi, ("k3",), "chi")

    def transform(k):
        k1, k2, k3 = k
        return [k1 + psi_f.compose(k3), k2 + chi_f.compose(k3), k3]

    return _derived(m, transform, f"it[{psi_f.expr},{chi_f.expr}]")


# ---------------------------------------------------------------------------
# current sheets

@dataclass(frozen=True)
class CurrentSheetSpec:
    """Jump of the scaling factor across ``k3 = c`` and the (k1, k2) sampling.

    ``phi_minus`` is the limit from ``k3 < c`` (side 1), ``phi_plus`` the
    limit from ``k3 > c`` (side 2).
    """

    c: float
    phi_minus: float
    phi_plus: float
    k1: Optional[Range] = None
    k2: Optional[Range] = None
    shape: Tuple[int, int] = (32, 32)

    def validate(self, m: FlowMap) -> None:
        if self.phi_minus == 0 or self.phi_plus == 0:
            raise SceneError("limiting scaling factors must be nonzero")
        lo, hi = m.domain.k3
        if not lo < self.c < hi:
            raise SceneError(f"sheet location c={self.c} must lie strictly inside k3 in {(lo, hi)}")

    def samples(self, m: FlowMap) -> np.ndarray:
        k1 = self.k1 or m.domain.k1
        k2 = self.k2 or m.domain.k2
        g1, g2 = np.meshgrid(
            np.linspace(k1[0], k1[1], self.shape[0]),
            np.linspace(k2[0], k2[1], self.shape[1]),
            indexing="ij",
        )
        return np.stack([g1.ravel(), g2.ravel(), np.full(g1.size, float(self.c))], axis=1)


@dataclass(frozen=True)
class CurrentSheet:
    k: np.ndarray  # (N, 3), k3 == c
    x: np.ndarray
    n: np.ndarray
    J: np.ndarray

    def rows(self) -> np.ndarray:
        """``k1, k2, x(3), n(3), J(3)`` per sample."""
        return np.column_stack([self.k[:, 0], self.k[:, 1], self.x, self.n, self.J])


CSV_HEADER = "k1,k2,x1,x2,x3,n1,n2,n3,J1,J2,J3"


def _sheet_frame(m: FlowMap, spec: CurrentSheetSpec):
    spec.validate(m)
    k = spec.samples(m)
    mj = m.evaluate(k)
    x1, x2, x3 = mj.d1[:, :, 0], mj.d1[:, :, 1], mj.d1[:, :, 2]
    normal = np.cross(x1, x2)
    length = np.linalg.norm(normal, axis=1)
    if np.any(length < 1e-12):
        i = int(np.argmin(length))
        raise SingularityError(
            f"degenerate sheet parametrization |x1 x x2| < 1e-12 at k = {tuple(k[i])}"
        )
    n = normal / length[:, None]
    # orient towards side 2 (increasing k3)
    n *= np.where(np.einsum("ni,ni->n", n, x3) < 0, -1.0, 1.0)[:, None]
    return k, mj, x1, x2, n


def current_sheet(m: FlowMap, spec: CurrentSheetSpec) -> CurrentSheet:
    """Surface current from the closed-form jump expression."""
    k, mj, x1, x2, n = _sheet_frame(m, spec)
    f1, f2 = spec.phi_minus, spec.phi_plus
    J = 0.5 * (f1 - f2) * np.cross(n, x2 / (f1 * f2) + x1)
    return CurrentSheet(k, mj.x, n, J)


def current_sheet_oracle(m: FlowMap, spec: CurrentSheetSpec) -> CurrentSheet:
    """Surface current as ``n x (B2 - B1)`` from the limiting transformed fields."""
    k, mj, a, b, n = _sheet_frame(m, spec)

    def field(phi):
        return 0.5 * (b / phi - phi * a)

    J = np.cross(n, field(spec.phi_plus) - field(spec.phi_minus))
    return CurrentSheet(k, mj.x, n, J)

