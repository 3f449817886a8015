"""Constant-total-pressure solution families.

With ``P`` constant the momentum balance collapses to ``d2x/dk1dk2 = 0``,
so ``x = sigma(k1, k3) + tau(k2, k3)``: every contact surface ``k3 = c`` is a
translational surface, the generator ``sigma`` swept along the directrix
``tau``. The explicit families below take a generator independent of
``k3`` (normalized so that its e1 component is ``k1``) and a directrix
whose (e2, e3) part is an area-preserving map:

=====  =========================================================
s1     x = (k1 + t1(k2, k3),  t2,             t3)
s2     x = (k1 + F(t3),       beta(k1) + t2,  t3)
s3     x = (k1,               beta(k1) + t2,  gamma(k1) + t3)
=====  =========================================================
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .areamap import AreaMap
from .errors import SceneError
from .flowmap import Box, FlowMap
from .jet import ScalarFunction, single_variable


def _check_cover(am: AreaMap, domain: Box) -> None:
    if not am.domain.covers(domain.k2, domain.k3):
        raise SceneError(
            f"area map domain k2={am.domain.k2}, k3={am.domain.k3} does not cover "
            f"the scene domain k2={domain.k2}, k3={domain.k3}"
        )


def build_s1(t1, am: AreaMap, P0: float, domain: Box) -> FlowMap:
    _check_cover(am, domain)
    tau1 = ScalarFunction(t1, ("k2", "k3"), "t1")

    def fn(k):
        k1, k2, k3 = k
        t2, t3 = am.compose(k2, k3)
        return [k1 + tau1.compose(k2, k3), t2, t3]

    return FlowMap(fn, domain, family="s1", P0=P0)


def build_s2(beta, F, am: AreaMap, P0: float, domain: Box) -> FlowMap:
    _check_cover(am, domain)
    beta_f = ScalarFunction(beta, ("k1",), "beta")
    F_f = single_variable(F, "F", "t3")
    # t1 = F(t3) is only forced when t3 is not constant in (k2, k3)
    _, _, _, _, d32, d33 = am.partials(*am.domain.probe(10))
    if np.max(np.abs(d32) + np.abs(d33)) < 1e-12:
        raise SceneError("s2 scene with t3 constant in (k2, k3) is not supported")

    def fn(k):
        k1, k2, k3 = k
        t2, t3 = am.compose(k2, k3)
        return [k1 + F_f.compose(t3), beta_f.compose(k1) + t2, t3]

    return FlowMap(fn, domain, family="s2", P0=P0)


def build_s3(beta, gamma, am: AreaMap, P0: float, domain: Box) -> FlowMap:
    _check_cover(am, domain)
    beta_f = ScalarFunction(beta, ("k1",), "beta")
    gamma_f = ScalarFunction(gamma, ("k1",), "gamma")

    def fn(k):
        k1, k2, k3 = k
        t2, t3 = am.compose(k2, k3)
        return [k1, beta_f.compose(k1) + t2, gamma_f.compose(k1) + t3]

    return FlowMap(fn, domain, family="s3", P0=P0)


def build_translational(sigma: Sequence, tau: Sequence, P0: float, domain: Box,
                        probe: int = 5) -> FlowMap:
    """``x = sigma(k1, k3) + tau(k2, k3)``.

    The unit-determinant constraint is not enforced here; the reduced
    verifier reports any violation through its determinant residual.
    """
    if len(sigma) != 3 or len(tau) != 3:
        raise SceneError("sigma and tau need three components each")
    s = [ScalarFunction(c, ("k1", "k3"), f"sigma{i + 1}") for i, c in enumerate(sigma)]
    t = [ScalarFunction(c, ("k2", "k3"), f"tau{i + 1}") for i, c in enumerate(tau)]

    def fn(k):
        k1, k2, k3 = k
        return [si.compose(k1, k3) + ti.compose(k2, k3) for si, ti in zip(s, t)]

    return FlowMap(fn, domain, family="general", P0=P0, probe=probe)
