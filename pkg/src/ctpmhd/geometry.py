"""Streamlines, magnetic lines, contact surfaces and their export.

Lines are sampled from the closed-form parametrization rather than
integrated: a streamline through ``x(k0)`` is ``x(k0 + (s/2, s/2, 0))`` and a
magnetic line ``x(k0 + (-s/2, s/2, 0))``. :func:`trace_rk4` integrates the
same curves in Cartesian space and exists only as a cross-check.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ExportError, NumericalError, OutOfDomainError
from .flowmap import FlowMap, fields_from
from .verify import GridLike, grid_points

log = logging.getLogger(__name__)

Range = Tuple[float, float]

DIRECTIONS = {
    "streamline": np.array([0.5, 0.5, 0.0]),
    "magnetic": np.array([-0.5, 0.5, 0.0]),
}
ALFVEN_DEADBAND = 1e-12
REGIME_CODES = {"sub": -1, "alfvenic": 0, "super": 1}


@dataclass
class Polyline:
    kind: str
    seed: Tuple[float, float, float]
    s: np.ndarray
    k: np.ndarray
    points: np.ndarray
    truncated: bool = False

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass
class SurfaceMesh:
    c: float
    shape: Tuple[int, int]
    params: np.ndarray  # (nv, 2) of (k1, k2)
    vertices: np.ndarray  # (nv, 3)
    faces: np.ndarray  # (nf, 4), 0-based
    scalars: Dict[str, np.ndarray] = field(default_factory=dict)
    degenerate: list = field(default_factory=list)
    welded: Tuple[bool, bool] = (False, False)


@dataclass
class Classification:
    points: np.ndarray
    discriminant: np.ndarray
    labels: np.ndarray

    @property
    def codes(self) -> np.ndarray:
        return np.array([REGIME_CODES[lab] for lab in self.labels], dtype=int)


@dataclass
class FieldSamples:
    points: np.ndarray
    x: np.ndarray
    v: np.ndarray
    B: np.ndarray
    p: np.ndarray


# ---------------------------------------------------------------------------
# lines

def _line(m: FlowMap, kind: str, k0, s_range: Range, n_samples: int) -> Polyline:
    if n_samples < 2:
        raise ValueError("a line needs at least two samples")
    k0 = np.asarray(k0, dtype=float)
    s = np.linspace(s_range[0], s_range[1], n_samples)
    k = k0 + s[:, None] * DIRECTIONS[kind]
    inside = m.domain.contains(k)
    if not inside.any():
        raise OutOfDomainError(f"{kind} from k0 = {tuple(k0)} never enters the domain")
    first = int(np.argmax(inside))
    stop = first + int(np.argmin(inside[first:])) if not inside[first:].all() else len(s)
    truncated = first > 0 or stop < len(s)
    if truncated:
        log.warning("%s from k0=%s truncated to %d of %d samples", kind, tuple(k0),
                    stop - first, len(s))
    s, k = s[first:stop], k[first:stop]
    return Polyline(kind, tuple(float(v) for v in k0), s, k, m.evaluate(k).x, truncated)


def streamline(m: FlowMap, k0, s_range: Range = (0.0, 1.0), n_samples: int = 101) -> Polyline:
    return _line(m, "streamline", k0, s_range, n_samples)


def magnetic_line(m: FlowMap, k0, s_range: Range = (0.0, 1.0), n_samples: int = 101) -> Polyline:
    return _line(m, "magnetic", k0, s_range, n_samples)


def tangent_error(m: FlowMap, line: Polyline) -> float:
    """Max over interior samples of |central-difference tangent - field|."""
    if len(line) < 3:
        raise ValueError("tangent check needs at least three samples")
    ds = line.s[1] - line.s[0]
    fd = (line.points[2:] - line.points[:-2]) / (2.0 * ds)
    state = m.fields_at(line.k[1:-1])
    target = state.v if line.kind == "streamline" else state.B
    return float(np.max(np.linalg.norm(fd - target, axis=1)))


def _invert(m: FlowMap, x, k_guess, tol: float = 1e-13, max_iter: int = 30):
    k = np.array(k_guess, dtype=float)
    for _ in range(max_iter):
        mj = m.evaluate_unchecked(k)
        dk = np.linalg.solve(mj.d1[0], x - mj.x[0])
        k = k + dk
        if np.linalg.norm(dk) <= tol * max(1.0, np.linalg.norm(k)):
            return k
    raise NumericalError(f"local inversion of x(k) failed near k = {tuple(k)}")


def trace_rk4(m: FlowMap, k0, s_range: Range = (0.0, 1.0), n_samples: int = 101,
              kind: str = "streamline") -> Polyline:
    """Integrate ``dx/ds = v(x)`` (or ``B``) with classical RK4 in Cartesian space.

    The field at an arbitrary ``x`` is found by a local Newton inversion of
    the map seeded with the previous parameter value.
    """
    s = np.linspace(s_range[0], s_range[1], n_samples)
    k = np.asarray(k0, dtype=float) + s[0] * DIRECTIONS[kind]
    x = m.evaluate_unchecked(k).x[0]
    pick = 0 if kind == "streamline" else 1

    def rhs(xq, kq):
        kq = _invert(m, xq, kq)
        state = fields_from(m.evaluate_unchecked(kq), 0.0)
        return (state.v, state.B)[pick][0], kq

    xs, ks = [x], [k]
    for ds in np.diff(s):
        f1, k = rhs(x, k)
        f2, _ = rhs(x + 0.5 * ds * f1, k)
        f3, _ = rhs(x + 0.5 * ds * f2, k)
        f4, _ = rhs(x + ds * f3, k)
        x = x + ds / 6.0 * (f1 + 2 * f2 + 2 * f3 + f4)
        k = _invert(m, x, k)
        xs.append(x)
        ks.append(k)
    return Polyline(kind, tuple(float(v) for v in np.asarray(k0)), s, np.array(ks), np.array(xs))


# ---------------------------------------------------------------------------
# surfaces

def tessellate_surface(
    m: FlowMap,
    c: float,
    k1_range: Optional[Range] = None,
    k2_range: Optional[Range] = None,
    res: Tuple[int, int] = (32, 32),
    scalars: Sequence[str] = (),
    weld: bool = False,
    weld_tol: float = 1e-9,
) -> SurfaceMesh:
    """Structured quad mesh of the contact surface ``k3 = c``.

    Available scalars: ``discriminant`` (a . b), ``B`` (|B|), ``v`` (|v|), ``p``.
    With ``weld=True`` a parameter direction whose first and last vertex
    rows coincide is closed up instead of duplicated.
    """
    k1_range = k1_range or m.domain.k1
    k2_range = k2_range or m.domain.k2
    n1, n2 = res
    g1, g2 = np.meshgrid(
        np.linspace(k1_range[0], k1_range[1], n1),
        np.linspace(k2_range[0], k2_range[1], n2),
        indexing="ij",
    )
    k = np.stack([g1.ravel(), g2.ravel(), np.full(g1.size, float(c))], axis=1)
    mj = m.evaluate(k)
    state = fields_from(mj, m.total_pressure(k)[0])
    area = np.linalg.norm(np.cross(mj.a, mj.b), axis=1)
    degenerate = [tuple(float(v) for v in p) for p in k[area < 1e-12]]
    if degenerate:
        log.warning("%d degenerate surface vertices at k3=%g", len(degenerate), c)

    available = {
        "discriminant": np.einsum("ni,ni->n", mj.a, mj.b),
        "B": np.linalg.norm(state.B, axis=1),
        "v": np.linalg.norm(state.v, axis=1),
        "p": state.p,
    }
    unknown = set(scalars) - set(available)
    if unknown:
        raise ValueError(f"unknown surface scalar(s) {sorted(unknown)}")

    x = mj.x.reshape(n1, n2, 3)
    scale = max(1.0, float(np.max(np.abs(mj.x))))
    closed = (
        weld and n1 > 2 and bool(np.max(np.abs(x[0] - x[-1])) <= weld_tol * scale),
        weld and n2 > 2 and bool(np.max(np.abs(x[:, 0] - x[:, -1])) <= weld_tol * scale),
    )
    m1 = n1 - 1 if closed[0] else n1
    m2 = n2 - 1 if closed[1] else n2
    index = np.arange(n1 * n2).reshape(n1, n2)[:m1, :m2]
    keep = index.ravel()

    ii, jj = np.meshgrid(np.arange(n1 - 1), np.arange(n2 - 1), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()

    def vid(i, j):
        return (i % m1) * m2 + (j % m2)

    faces = np.stack([vid(ii, jj), vid(ii + 1, jj), vid(ii + 1, jj + 1), vid(ii, jj + 1)], axis=1)
    return SurfaceMesh(
        c=float(c),
        shape=(m1, m2),
        params=k[keep, :2],
        vertices=mj.x[keep],
        faces=faces,
        scalars={name: available[name][keep] for name in scalars},
        degenerate=degenerate,
        welded=closed,
    )


def classify_grid(m: FlowMap, grid: GridLike = None) -> Classification:
    pts, _ = grid_points(m, grid)
    mj = m.evaluate(pts)
    disc = np.einsum("ni,ni->n", mj.a, mj.b)
    labels = np.where(disc > ALFVEN_DEADBAND, "super",
                      np.where(disc < -ALFVEN_DEADBAND, "sub", "alfvenic"))
    return Classification(pts, disc, labels)


def sample_fields(m: FlowMap, grid: GridLike = None) -> FieldSamples:
    pts, _ = grid_points(m, grid)
    mj = m.evaluate(pts)
    state = fields_from(mj, m.total_pressure(pts)[0])
    return FieldSamples(pts, mj.x, state.v, state.B, state.p)


# ---------------------------------------------------------------------------
# export

Exportable = Union[Polyline, Sequence[Polyline], SurfaceMesh, Classification, FieldSamples]


def _num(v) -> str:
    return repr(float(v))


def _rows(arr) -> list:
    return [" ".join(_num(v) for v in row) for row in np.atleast_2d(arr)]


def _is_empty(obj) -> bool:
    if isinstance(obj, Polyline):
        return len(obj) == 0
    if isinstance(obj, SurfaceMesh):
        return obj.vertices.shape[0] == 0
    if isinstance(obj, (Classification, FieldSamples)):
        return obj.points.shape[0] == 0
    return len(obj) == 0 or all(len(p) == 0 for p in obj)


def _obj(obj) -> str:
    out = []
    if isinstance(obj, SurfaceMesh):
        out += [f"v {r}" for r in _rows(obj.vertices)]
        out += ["f " + " ".join(str(i + 1) for i in f) for f in obj.faces]
    elif isinstance(obj, (Classification, FieldSamples)):
        raise ExportError("OBJ export supports meshes and polylines only")
    else:
        offset = 0
        for line in _polylines(obj):
            out += [f"v {r}" for r in _rows(line.points)]
            out.append("l " + " ".join(str(offset + i + 1) for i in range(len(line))))
            offset += len(line)
    return "\n".join(out) + "\n"


def _polylines(obj) -> list:
    return [obj] if isinstance(obj, Polyline) else list(obj)


def _vtk(obj, title: str) -> str:
    out = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET POLYDATA"]
    point_data = []
    if isinstance(obj, SurfaceMesh):
        pts = obj.vertices
        nf = obj.faces.shape[0]
        cells = [f"POLYGONS {nf} {nf * 5}"] + ["4 " + " ".join(map(str, f)) for f in obj.faces]
        point_data = [("SCALARS", name, vals) for name, vals in obj.scalars.items()]
    elif isinstance(obj, Classification):
        pts = obj.points
        n = pts.shape[0]
        cells = [f"VERTICES {n} {2 * n}"] + [f"1 {i}" for i in range(n)]
        point_data = [("SCALARS", "discriminant", obj.discriminant),
                      ("SCALARS", "regime", obj.codes)]
    elif isinstance(obj, FieldSamples):
        pts = obj.x
        n = pts.shape[0]
        cells = [f"VERTICES {n} {2 * n}"] + [f"1 {i}" for i in range(n)]
        point_data = [("VECTORS", "v", obj.v), ("VECTORS", "B", obj.B), ("SCALARS", "p", obj.p)]
    else:
        lines = _polylines(obj)
        pts = np.concatenate([ln.points for ln in lines])
        total = sum(len(ln) + 1 for ln in lines)
        cells = [f"LINES {len(lines)} {total}"]
        offset = 0
        for ln in lines:
            cells.append(" ".join(map(str, [len(ln), *range(offset, offset + len(ln))])))
            offset += len(ln)
        point_data = [("SCALARS", "s", np.concatenate([ln.s for ln in lines]))]
    out += [f"POINTS {pts.shape[0]} double"] + _rows(pts) + cells
    if point_data:
        out.append(f"POINT_DATA {pts.shape[0]}")
        for kind, name, vals in point_data:
            if kind == "SCALARS":
                out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
                out += [_num(v) for v in vals]
            else:
                out.append(f"VECTORS {name} double")
                out += _rows(vals)
    return "\n".join(out) + "\n"


def _csv(obj) -> str:
    if isinstance(obj, SurfaceMesh):
        header = ["k1", "k2", "x1", "x2", "x3", *obj.scalars]
        cols = [obj.params, obj.vertices, *[v[:, None] for v in obj.scalars.values()]]
    elif isinstance(obj, Classification):
        header = ["k1", "k2", "k3", "discriminant", "label"]
        body = [
            ",".join([*(_num(v) for v in k), _num(d), lab])
            for k, d, lab in zip(obj.points, obj.discriminant, obj.labels)
        ]
        return ",".join(header) + "\n" + "\n".join(body) + "\n"
    elif isinstance(obj, FieldSamples):
        header = ["k1", "k2", "k3", "x1", "x2", "x3", "v1", "v2", "v3", "B1", "B2", "B3", "p"]
        cols = [obj.points, obj.x, obj.v, obj.B, obj.p[:, None]]
    else:
        body = [
            ",".join([str(i), *(_num(v) for v in (s, *k, *x))])
            for i, ln in enumerate(_polylines(obj))
            for s, k, x in zip(ln.s, ln.k, ln.points)
        ]
        return "line,s,k1,k2,k3,x1,x2,x3\n" + "\n".join(body) + "\n"
    table = np.column_stack(cols)
    body = [",".join(_num(v) for v in row) for row in table]
    return ",".join(header) + "\n" + "\n".join(body) + "\n"


def render(obj: Exportable, fmt: str) -> str:
    """Text of ``obj`` as ``obj``, ``vtk`` (legacy ASCII POLYDATA) or ``csv``."""
    if _is_empty(obj):
        raise ExportError("nothing to export")
    if fmt == "obj":
        return _obj(obj)
    if fmt == "vtk":
        kind = "Polylines" if isinstance(obj, (list, tuple)) else type(obj).__name__
        return _vtk(obj, f"ctpmhd {kind}")
    if fmt == "csv":
        return _csv(obj)
    raise ExportError(f"unknown export format {fmt!r}")


def export(obj: Exportable, fmt: str, path) -> Path:
    text = render(obj, fmt)
    path = Path(path)
    try:
        path.write_text(text)
    except OSError as exc:
        raise ExportError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path
