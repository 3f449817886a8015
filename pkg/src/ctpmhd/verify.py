"""Residual checks for constructed flows.

Two independent routes:

``verify_reduced``
    the parametric system: ``x_i . x_12 + P_i = 0`` for ``i = 1, 2, 3``
    and ``det(dx/dk) = 1``;
``verify_physical``
    the stationary incompressible ideal-MHD equations in Cartesian form,
    with every x-derivative reconstructed through ``grad_x = J^-T grad_k``.
    It never looks at the parametric system.

``fd_crosscheck`` compares the analytic derivatives of ``x(k)`` with central
differences.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .flowmap import FlowMap, fields_from

DEFAULT_SHAPE = (21, 21, 21)
DEFAULT_TOL = 1e-8
DEFAULT_FD_TOL = 1e-5
SINGULAR_DET = 1e-8

GridLike = Union[Sequence[int], np.ndarray, None]


@dataclass
class ResidualEntry:
    name: str
    max_abs: float
    mean_abs: float
    argmax: Tuple[float, float, float]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "max_abs": self.max_abs,
            "mean_abs": self.mean_abs,
            "argmax": list(self.argmax),
        }


@dataclass
class ResidualReport:
    kind: str
    entries: List[ResidualEntry]
    grid: Tuple[int, ...]
    tolerance: float
    min_p: Optional[float] = None
    skipped: List[Tuple[float, float, float]] = field(default_factory=list)
    points: Optional[np.ndarray] = field(default=None, repr=False)
    per_point: Dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def max_residual(self) -> float:
        return max((e.max_abs for e in self.entries), default=0.0)

    @property
    def passed(self) -> bool:
        return all(e.max_abs <= self.tolerance for e in self.entries)

    def entry(self, name: str) -> ResidualEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "grid": list(self.grid),
            "tolerance": self.tolerance,
            "passed": self.passed,
            "max_residual": self.max_residual,
            "min_p": self.min_p,
            "skipped": [list(p) for p in self.skipped],
            "entries": [e.to_dict() for e in self.entries],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        lines = [f"{self.kind} residuals on grid {'x'.join(map(str, self.grid))} "
                 f"(tol {self.tolerance:.1e}): {'PASS' if self.passed else 'FAIL'}"]
        for e in self.entries:
            k = ", ".join(f"{v:.6g}" for v in e.argmax)
            lines.append(f"  {e.name:<16} max {e.max_abs:.3e}  mean {e.mean_abs:.3e}  at k=({k})")
        if self.min_p is not None:
            lines.append(f"  min p = {self.min_p:.6g}")
        if self.skipped:
            lines.append(f"  {len(self.skipped)} near-singular point(s) skipped")
        return "\n".join(lines)

    def write_csv(self, path) -> None:
        names = list(self.per_point)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k1", "k2", "k3", *names])
            for i, k in enumerate(self.points):
                w.writerow([repr(float(v)) for v in k] + [repr(float(self.per_point[n][i])) for n in names])


def grid_points(m: FlowMap, grid: GridLike = None, inset: float = 0.0):
    """Resolve a grid argument to ``(points, shape)``."""
    if grid is None:
        grid = DEFAULT_SHAPE
    arr = np.asarray(grid)
    if arr.ndim == 2:
        pts = m.check_domain(arr.astype(float))
        return pts, (pts.shape[0],)
    shape = tuple(int(n) for n in np.atleast_1d(arr))
    if len(shape) == 1:
        shape = shape * 3
    return m.domain.grid(shape, inset=inset), shape


def _entries(points, named: Dict[str, np.ndarray]) -> List[ResidualEntry]:
    out = []
    for name, vals in named.items():
        vals = np.abs(vals)
        if vals.size == 0:
            out.append(ResidualEntry(name, 0.0, 0.0, (np.nan, np.nan, np.nan)))
            continue
        i = int(np.argmax(vals))
        out.append(ResidualEntry(name, float(vals[i]), float(vals.mean()),
                                 tuple(float(v) for v in points[i])))
    return out


def verify_reduced(m: FlowMap, grid: GridLike = None, tol: float = DEFAULT_TOL) -> ResidualReport:
    pts, shape = grid_points(m, grid)
    mj = m.evaluate(pts)
    P, dP = m.total_pressure(pts)
    x12 = mj.d2[:, :, 0, 1]
    named = {
        f"reduced_{i + 1}": np.einsum("ni,ni->n", mj.d1[:, :, i], x12) + dP[:, i]
        for i in range(3)
    }
    named["det_minus_1"] = np.linalg.det(mj.d1) - 1.0
    state = fields_from(mj, P)
    return ResidualReport(
        "reduced", _entries(pts, named), shape, tol,
        min_p=float(state.p.min()), points=pts, per_point=named,
    )


def verify_physical(m: FlowMap, grid: GridLike = None, tol: float = DEFAULT_TOL) -> ResidualReport:
    pts, shape = grid_points(m, grid)
    mj = m.evaluate(pts)
    P, dPk = m.total_pressure(pts)
    state = fields_from(mj, P)
    det = np.linalg.det(mj.d1)
    ok = np.abs(det) > SINGULAR_DET
    skipped = [tuple(float(v) for v in p) for p in pts[~ok]]

    jinv = np.linalg.inv(mj.d1[ok])  # jinv[n, j, m] = dk^j/dx^m
    d2 = mj.d2[ok]
    dv_dk = 0.5 * (d2[:, :, 0, :] + d2[:, :, 1, :])
    dB_dk = 0.5 * (d2[:, :, 1, :] - d2[:, :, 0, :])
    grad_v = np.einsum("nij,njm->nim", dv_dk, jinv)
    grad_B = np.einsum("nij,njm->nim", dB_dk, jinv)
    grad_P = np.einsum("nj,njm->nm", dPk[ok], jinv)
    v, B = state.v[ok], state.B[ok]

    def along(g, w):
        return np.einsum("nim,nm->ni", g, w)

    momentum = along(grad_v, v) - along(grad_B, B) + grad_P
    induction = along(grad_v, B) - along(grad_B, v)
    named = {
        "momentum": np.linalg.norm(momentum, axis=1),
        "induction": np.linalg.norm(induction, axis=1),
        "div_v": np.trace(grad_v, axis1=1, axis2=2),
        "div_B": np.trace(grad_B, axis1=1, axis2=2),
    }
    return ResidualReport(
        "physical", _entries(pts[ok], named), shape, tol,
        min_p=float(state.p.min()), skipped=skipped, points=pts[ok], per_point=named,
    )


def fd_crosscheck(m: FlowMap, grid: GridLike = None, h: float = 1e-5,
                  tol: float = DEFAULT_FD_TOL) -> ResidualReport:
    """Relative deviation ``|analytic - fd| / max(1, |analytic|)`` of every
    first and second partial of ``x(k)``; second partials are checked
    against central differences of the analytic first partials."""
    if not h > 0:
        raise ValueError("finite-difference step must be positive")
    pts, shape = grid_points(m, grid, inset=h)
    n = pts.shape[0]
    stencil = [pts]
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        stencil += [pts + e, pts - e]
    mj = m.evaluate_unchecked(np.concatenate(stencil))
    x = mj.x.reshape(7, n, 3)
    d1 = mj.d1.reshape(7, n, 3, 3)
    d2 = mj.d2.reshape(7, n, 3, 3, 3)

    dev1 = np.zeros(n)
    dev2 = np.zeros(n)
    for j in range(3):
        fd1 = (x[1 + 2 * j] - x[2 + 2 * j]) / (2 * h)
        an1 = d1[0][:, :, j]
        dev1 = np.maximum(dev1, np.max(np.abs(an1 - fd1) / np.maximum(1.0, np.abs(an1)), axis=1))
        fd2 = (d1[1 + 2 * j] - d1[2 + 2 * j]) / (2 * h)
        an2 = d2[0][:, :, :, j]
        dev2 = np.maximum(
            dev2, np.max(np.abs(an2 - fd2) / np.maximum(1.0, np.abs(an2)), axis=(1, 2))
        )
    named = {"first_partials": dev1, "second_partials": dev2}
    return ResidualReport("fd", _entries(pts, named), shape, tol, points=pts, per_point=named)
