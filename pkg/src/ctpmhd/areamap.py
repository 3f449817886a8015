"""Area-preserving maps (k2, k3) -> (t2, t3) of the directrix plane.

Three ways to obtain one:

* :func:`from_pair`: both components written out explicitly;
* :func:`circular`: the closed-form map ``t2 = sqrt(2 k3) sin k2``,
  ``t3 = sqrt(2 k3) cos k2`` (nested circles of radius ``sqrt(2 k3)``);
* :func:`from_potential`: the implicit hodograph form. Given a potential
  ``Phi(k3, t2)``, ``t2`` solves ``k2 = dPhi/dk3`` and ``t3 = dPhi/dt2``.

:func:`modify_shear` composes any of them with a unit-Jacobian shear.

All maps expose exact first and second partials through :meth:`AreaMap.compose`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from . import expr as ex
from .errors import AreaMapError, DomainError, HodographError, NewtonError, SceneError
from .jet import Jet, ScalarFunction, chain, single_variable

log = logging.getLogger(__name__)

Range = Tuple[float, float]

DET_TOL = 1e-9
PROBE_N = 50


@dataclass(frozen=True)
class Box2:
    """Closed rectangle in the (k2, k3) plane."""

    k2: Range
    k3: Range

    def covers(self, k2: Range, k3: Range, slack: float = 1e-12) -> bool:
        return (
            self.k2[0] - slack <= k2[0]
            and k2[1] <= self.k2[1] + slack
            and self.k3[0] - slack <= k3[0]
            and k3[1] <= self.k3[1] + slack
        )

    def probe(self, n: int = PROBE_N):
        """Cell-centred ``n x n`` probe points (never on the boundary)."""
        f2 = (np.arange(n) + 0.5) / n
        k2 = self.k2[0] + f2 * (self.k2[1] - self.k2[0])
        k3 = self.k3[0] + f2 * (self.k3[1] - self.k3[0])
        g2, g3 = np.meshgrid(k2, k3, indexing="ij")
        return g2.ravel(), g3.ravel()


def _as_box(domain) -> Box2:
    if isinstance(domain, Box2):
        return domain
    if isinstance(domain, dict):
        return Box2(tuple(domain["k2"]), tuple(domain["k3"]))
    k2, k3 = domain
    return Box2(tuple(k2), tuple(k3))


class AreaMap:
    mode = "abstract"

    def __init__(self, domain):
        self.domain = _as_box(domain)

    def _local(self, k2: np.ndarray, k3: np.ndarray):
        """Return ``((val, grad, hess), (val, grad, hess))`` for t2 and t3,
        derivatives taken with respect to ``(k2, k3)``."""
        raise NotImplementedError

    def compose(self, k2: Jet, k3: Jet) -> Tuple[Jet, Jet]:
        t2, t3 = self._local(k2.val, k3.val)
        return chain(*t2, [k2, k3]), chain(*t3, [k2, k3])

    def evaluate(self, k2, k3):
        k2 = np.atleast_1d(np.asarray(k2, dtype=float))
        k3 = np.atleast_1d(np.asarray(k3, dtype=float))
        k2, k3 = np.broadcast_arrays(k2, k3)
        return self.compose(Jet.variable(k2, 1), Jet.variable(k3, 2))

    def partials(self, k2, k3):
        """``(t2, t3, t2_2, t2_3, t3_2, t3_3)`` at the given points."""
        t2, t3 = self.evaluate(k2, k3)
        return t2.val, t3.val, t2.grad[:, 1], t2.grad[:, 2], t3.grad[:, 1], t3.grad[:, 2]

    def det(self, k2, k3) -> np.ndarray:
        _, _, a, b, c, d = self.partials(k2, k3)
        return a * d - c * b

    def probe_det(self, n: int = PROBE_N):
        """Largest ``|det - 1|`` on the probe grid and where it occurs."""
        k2, k3 = self.domain.probe(n)
        dev = np.abs(self.det(k2, k3) - 1.0)
        i = int(np.argmax(dev))
        return float(dev[i]), (float(k2[i]), float(k3[i]))

    def check(self, tol: float = DET_TOL, n: int = PROBE_N) -> "AreaMap":
        worst, point = self.probe_det(n)
        if not worst <= tol:
            det = 1.0 + worst if np.isfinite(worst) else worst
            raise AreaMapError(
                f"{self.mode} area map is not area preserving: |det - 1| = {worst:.3e} "
                f"at (k2, k3) = ({point[0]:.6g}, {point[1]:.6g})",
                worst_point=point,
                worst_det=float(self.det(*point)[0]) if np.isfinite(det) else det,
            )
        return self


class PairAreaMap(AreaMap):
    mode = "pair"

    def __init__(self, t2, t3, domain):
        super().__init__(domain)
        self.t2 = ScalarFunction(t2, ("k2", "k3"), "t2")
        self.t3 = ScalarFunction(t3, ("k2", "k3"), "t3")

    def _local(self, k2, k3):
        n = k2.shape[0]
        return self.t2.derivatives((k2, k3), n), self.t3.derivatives((k2, k3), n)


class CircularAreaMap(AreaMap):
    """Closed-form ``t2 = r sin k2``, ``t3 = r cos k2`` with ``r = sqrt(2 k3)``."""

    mode = "circular"

    def _local(self, k2, k3):
        if np.any(k3 <= 0):
            raise DomainError("circular area map needs k3 > 0", "sqrt(2*k3)")
        n = k2.shape[0]
        r = np.sqrt(2.0 * k3)
        s, c = np.sin(k2), np.cos(k2)
        g2 = np.stack([r * c, s / r], axis=1)
        g3 = np.stack([-r * s, c / r], axis=1)
        h2 = np.empty((n, 2, 2))
        h3 = np.empty((n, 2, 2))
        h2[:, 0, 0] = -r * s
        h2[:, 0, 1] = h2[:, 1, 0] = c / r
        h2[:, 1, 1] = -s / r**3
        h3[:, 0, 0] = -r * c
        h3[:, 0, 1] = h3[:, 1, 0] = -s / r
        h3[:, 1, 1] = -c / r**3
        return (r * s, g2, h2), (r * c, g3, h3)


class PotentialAreaMap(AreaMap):
    """Hodograph construction from a potential ``Phi(k3, t2)``.

    ``t2`` is the root of ``K(k3, t2) = k2`` with ``K = dPhi/dk3``; then
    ``t3 = T(k3, t2)`` with ``T = dPhi/dt2``. Derivatives follow from the
    implicit function theorem, so the unit determinant holds analytically.
    """

    mode = "potential"

    def __init__(
        self,
        phi,
        domain,
        bracket: Optional[Range] = None,
        tol: float = 1e-13,
        max_iter: int = 50,
        degenerate: float = 1e-12,
    ):
        super().__init__(domain)
        self.phi = ScalarFunction(phi, ("k3", "t2"), "phi")
        self.K = ScalarFunction(ex.differentiate(self.phi.expr, "k3"), ("k3", "t2"), "dphi/dk3")
        self.T = ScalarFunction(ex.differentiate(self.phi.expr, "t2"), ("k3", "t2"), "dphi/dt2")
        self.bracket = None if bracket is None else (float(bracket[0]), float(bracket[1]))
        self.tol = tol
        self.max_iter = max_iter
        self.degenerate = degenerate

    @property
    def default_seed(self) -> float:
        if self.bracket is None:
            return 0.0
        return 0.5 * (self.bracket[0] + self.bracket[1])

    def _residual(self, k2, k3, t):
        return self.K.value(k3, t, strict=False) - k2

    def _newton(self, k2, k3, t0):
        t = np.array(t0, dtype=float)
        iters = np.zeros(t.shape, dtype=int)
        r = self._residual(k2, k3, t)
        kt_expr = self.K.gradient[1]
        stalled = np.zeros(t.shape, dtype=bool)
        for _ in range(self.max_iter):
            active = ~(np.abs(r) <= self.tol) & ~stalled
            if not active.any():
                break
            idx = np.flatnonzero(active & np.isfinite(r))
            if idx.size == 0:
                break
            kt = np.broadcast_to(
                ex.evaluate(kt_expr, {"k3": k3[idx], "t2": t[idx]}, strict=False), idx.shape
            )
            flat = ~(np.abs(kt) >= self.degenerate)
            if flat.any():
                seed_flat = flat & (iters[idx] == 0)
                if seed_flat.any():
                    j = idx[np.flatnonzero(seed_flat)[0]]
                    raise HodographError(
                        f"degenerate hodograph: |dK/dt2| < {self.degenerate:g} at "
                        f"(k2, k3) = ({k2[j]:.6g}, {k3[j]:.6g}), t2 = {t[j]:.6g}"
                    )
                # the iterate ran off to a flat region: treat as diverged
                stalled[idx[flat]] = True
                idx, kt = idx[~flat], kt[~flat]
                if idx.size == 0:
                    break
            step = -r[idx] / kt
            lam = np.ones(idx.size)
            trial = t[idx] + step
            rt = self._residual(k2[idx], k3[idx], trial)
            for _ in range(40):
                bad = ~np.isfinite(rt)
                if not bad.any():
                    break
                lam[bad] *= 0.5
                trial[bad] = t[idx][bad] + lam[bad] * step[bad]
                rt[bad] = self._residual(k2[idx][bad], k3[idx][bad], trial[bad])
            t[idx] = trial
            r[idx] = rt
            iters[idx] += 1
        converged = np.abs(r) <= self.tol
        return t, iters, converged

    def _bisect(self, k2, k3):
        lo = np.full(k2.shape, self.bracket[0])
        hi = np.full(k2.shape, self.bracket[1])
        flo = self._residual(k2, k3, lo)
        fhi = self._residual(k2, k3, hi)
        ok = np.isfinite(flo) & np.isfinite(fhi) & (np.sign(flo) != np.sign(fhi))
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            fm = self._residual(k2, k3, mid)
            left = np.sign(fm) == np.sign(flo)
            lo = np.where(left, mid, lo)
            flo = np.where(left, fm, flo)
            hi = np.where(left, hi, mid)
        t = 0.5 * (lo + hi)
        converged = ok & (np.abs(self._residual(k2, k3, t)) <= max(self.tol, 1e-12))
        return t, converged

    def solve(self, k2, k3):
        """Solve ``K(k3, t2) = k2`` for ``t2`` at every point.

        Points are swept by increasing ``k2`` along each line of constant
        ``k3``, each solve seeded with the previous root on the line.
        Returns ``(t2, iterations)``.
        """
        k2 = np.atleast_1d(np.asarray(k2, dtype=float))
        k3 = np.atleast_1d(np.asarray(k3, dtype=float))
        k2, k3 = np.broadcast_arrays(k2, k3)
        pairs, inverse = np.unique(np.stack([k3, k2], axis=1), axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        u3, u2 = pairs[:, 0], pairs[:, 1]
        # position of each unique point along its k3 line (already sorted)
        new_line = np.ones(u3.size, dtype=bool)
        new_line[1:] = u3[1:] != u3[:-1]
        line_start = np.maximum.accumulate(np.where(new_line, np.arange(u3.size), 0))
        pos = np.arange(u3.size) - line_start

        roots = np.full(u3.size, np.nan)
        iters = np.zeros(u3.size, dtype=int)
        for j in range(int(pos.max()) + 1):
            idx = np.flatnonzero(pos == j)
            seed = np.full(idx.size, self.default_seed)
            if j > 0:
                prev = roots[idx - 1]
                seed = np.where(np.isfinite(prev), prev, seed)
            t, it, ok = self._newton(u2[idx], u3[idx], seed)
            if not ok.all() and j > 0:
                bad = np.flatnonzero(~ok)
                t2, it2, ok2 = self._newton(
                    u2[idx[bad]], u3[idx[bad]], np.full(bad.size, self.default_seed)
                )
                t[bad], it[bad] = t2, it[bad] + it2
                ok[bad] = ok2
            if not ok.all() and self.bracket is not None:
                bad = np.flatnonzero(~ok)
                t3, ok3 = self._bisect(u2[idx[bad]], u3[idx[bad]])
                t[bad] = t3
                ok[bad] = ok3
            if not ok.all():
                b = idx[np.flatnonzero(~ok)[0]]
                raise NewtonError(
                    f"hodograph Newton solve did not converge in {self.max_iter} "
                    f"iterations at (k2, k3) = ({u2[b]:.6g}, {u3[b]:.6g})"
                )
            roots[idx] = t
            iters[idx] = it
        return roots[inverse], iters[inverse]

    def _local(self, k2, k3):
        t2, _ = self.solve(k2, k3)
        n = t2.shape[0]
        Kv, Kg, Kh = self.K.derivatives((k3, t2), n)
        Tv, Tg, Th = self.T.derivatives((k3, t2), n)
        Kk, Kt = Kg[:, 0], Kg[:, 1]
        if np.any(~(np.abs(Kt) >= self.degenerate)):
            j = int(np.flatnonzero(~(np.abs(Kt) >= self.degenerate))[0])
            raise HodographError(
                f"degenerate hodograph: |dK/dt2| < {self.degenerate:g} at "
                f"(k2, k3) = ({k2[j]:.6g}, {k3[j]:.6g})"
            )
        Kkk, Kkt, Ktt = Kh[:, 0, 0], Kh[:, 0, 1], Kh[:, 1, 1]
        Tk, Tt = Tg[:, 0], Tg[:, 1]
        Tkk, Tkt, Ttt = Th[:, 0, 0], Th[:, 0, 1], Th[:, 1, 1]

        a2 = 1.0 / Kt  # dt2/dk2
        a3 = -Kk / Kt  # dt2/dk3
        a22 = -Ktt * a2 / Kt**2
        a23 = -(Kkt + Ktt * a3) / Kt**2
        a33 = -((Kkk + Kkt * a3) * Kt - Kk * (Kkt + Ktt * a3)) / Kt**2

        b2 = Tt * a2
        b3 = Tk + Tt * a3
        b22 = Ttt * a2**2 + Tt * a22
        b23 = (Tkt + Ttt * a3) * a2 + Tt * a23
        b33 = Tkk + 2.0 * Tkt * a3 + Ttt * a3**2 + Tt * a33

        def pack(v, d2, d3, d22, d23, d33):
            h = np.empty((n, 2, 2))
            h[:, 0, 0], h[:, 0, 1], h[:, 1, 0], h[:, 1, 1] = d22, d23, d23, d33
            return v, np.stack([d2, d3], axis=1), h

        return pack(t2, a2, a3, a22, a23, a33), pack(Tv, b2, b3, b22, b23, b33)


class ShearedAreaMap(AreaMap):
    """``t2 + G(t3)`` (axis 2) or ``t3 + G(t2)`` (axis 3) on top of a base map."""

    def __init__(self, base: AreaMap, g, axis: int):
        super().__init__(base.domain)
        if axis not in (2, 3):
            raise SceneError(f"shear axis must be 2 or 3, got {axis!r}")
        self.base = base
        self.axis = axis
        self.g = single_variable(g, "shear function", "t3" if axis == 2 else "t2")
        self.mode = f"{base.mode}+shear{axis}"

    def compose(self, k2: Jet, k3: Jet):
        t2, t3 = self.base.compose(k2, k3)
        if self.axis == 2:
            return t2 + self.g.compose(t3), t3
        return t2, t3 + self.g.compose(t2)


def from_pair(t2, t3, domain, check: bool = True) -> AreaMap:
    m = PairAreaMap(t2, t3, domain)
    return m.check() if check else m


def circular(domain, check: bool = True) -> AreaMap:
    m = CircularAreaMap(domain)
    return m.check() if check else m


def from_potential(phi, domain, bracket: Optional[Sequence[float]] = None, check: bool = True,
                   **newton) -> AreaMap:
    m = PotentialAreaMap(phi, domain, bracket=bracket, **newton)
    return m.check() if check else m


def modify_shear(m: AreaMap, g, axis: int, check: bool = True) -> AreaMap:
    out = ShearedAreaMap(m, g, axis)
    return out.check() if check else out


def identity(domain) -> AreaMap:
    return from_pair("k2", "k3", domain)


# The potential whose hodograph solution is the circular map.
CIRCULAR_POTENTIAL = "0.5*t2*sqrt(2*k3 - t2^2) + k3*atan(t2/sqrt(2*k3 - t2^2))"
