import math

import numpy as np
import pytest

from ctpmhd import areamap, families
from ctpmhd.errors import SceneError, SingularityError
from ctpmhd.flowmap import Box, from_exprs
from ctpmhd.transforms import (
    CurrentSheetSpec,
    bogoyavlenskij,
    current_sheet,
    current_sheet_oracle,
    translate,
)
from ctpmhd.verify import verify_physical, verify_reduced

from conftest import CYL_BOX, UNIT_BOX, random_points


def test_unit_scaling_is_identity(fig1_map, rng):
    m = bogoyavlenskij(fig1_map, "1")
    k = random_points(fig1_map.domain, 200, rng)
    a, b = m.evaluate(k), fig1_map.evaluate(k)
    assert np.max(np.abs(a.x - b.x)) <= 1e-15
    np.testing.assert_array_equal(a.d1, b.d1)


def test_constant_scaling_on_identity(identity_map):
    m = bogoyavlenskij(identity_map, "2")
    a, b = m.basis_at([0.2, 0.4, 0.6])
    np.testing.assert_allclose(a, [2, 0, 0])
    np.testing.assert_allclose(b, [0, 0.5, 0])
    assert m.alfven_discriminant([0.2, 0.4, 0.6]) == 0.0


def test_scaling_basis_rule(fig1_map, rng):
    m = bogoyavlenskij(fig1_map, "1 + k3")
    k = random_points(fig1_map.domain, 100, rng) * [0.3, 0.3, 1.0]
    phi = 1 + k[:, 2]
    pre = np.stack([phi * k[:, 0], k[:, 1] / phi, k[:, 2]], 1)
    t, o = m.evaluate(k), fig1_map.evaluate_unchecked(pre)
    np.testing.assert_allclose(t.x, o.x, atol=1e-14)
    np.testing.assert_allclose(t.a, phi[:, None] * o.a, atol=1e-13)
    np.testing.assert_allclose(t.b, o.b / phi[:, None], atol=1e-13)
    np.testing.assert_allclose(np.einsum("ni,ni->n", t.a, t.b), np.einsum("ni,ni->n", o.a, o.b),
                               atol=1e-12)


def test_scaling_preserves_verification(fig1_map):
    m = bogoyavlenskij(fig1_map, "1 + k3")
    assert verify_reduced(m).max_residual < 1e-9
    assert verify_physical(m).passed


@pytest.mark.parametrize("phi", ["k3 - 1", "0", "sin(4*k3)", "1/(k3 - 1)"])
def test_scaling_must_not_vanish(cylinder_map, phi):
    with pytest.raises(SceneError):
        bogoyavlenskij(cylinder_map, phi)


def test_negative_constant_scaling_allowed(cylinder_map):
    m = bogoyavlenskij(cylinder_map, "-2")
    assert verify_reduced(m, (5, 5, 5)).passed


def test_zero_translation_is_identity(fig1_map, rng):
    m = translate(fig1_map)
    k = random_points(fig1_map.domain, 100, rng)
    np.testing.assert_array_equal(m(k), fig1_map(k))


def test_translate_identity_map(identity_map, rng):
    m = translate(identity_map, "k3", "0")
    k = random_points(UNIT_BOX, 100, rng)
    x = m(k)
    np.testing.assert_allclose(x, np.stack([k[:, 0] + k[:, 2], k[:, 1], k[:, 2]], 1), atol=1e-15)
    np.testing.assert_allclose(m.jacobian_det(k), 1.0, atol=1e-15)


def test_translate_preserves_residuals(fig1_map):
    m = translate(fig1_map, "sin(k3)", "k3^2")
    assert verify_reduced(m).max_residual < 1e-9
    assert verify_physical(m).passed


def test_transforms_carry_nonconstant_pressure():
    # x = (k1, k2, k3 + k1 k2) with P = -k1 k2 - k3 solves the reduced system
    m = from_exprs(["k1", "k2", "k3 + k1*k2"], UNIT_BOX, pressure="-k1*k2 - k3")
    assert verify_reduced(m).passed
    assert verify_physical(m).passed
    # constant scaling and k3-dependent translations remain symmetries with varying P
    t = translate(bogoyavlenskij(m, "2"), "0.5*k3", "k3^2")
    k = UNIT_BOX.grid((4, 4, 4))
    P, _ = t.total_pressure(k)
    k1, k2 = 2 * (k[:, 0] + 0.5 * k[:, 2]), (k[:, 1] + k[:, 2] ** 2) / 2
    np.testing.assert_allclose(P, -k1 * k2 - k[:, 2], atol=1e-14)
    assert verify_reduced(t).passed
    assert verify_physical(t).passed


def test_surface_point_set_invariance(fig1_map, rng):
    m = translate(bogoyavlenskij(fig1_map, "1 + k3"), "sin(k3)", "0")
    c = 1.0
    k = random_points(fig1_map.domain, 100, rng) * [0.3, 0.3, 0.0] + [0, 0, c]
    phi = 1 + c
    pre = np.stack([phi * (k[:, 0] + math.sin(c)), k[:, 1] / phi, k[:, 2]], 1)
    np.testing.assert_allclose(m(k), fig1_map.evaluate_unchecked(pre).x, atol=1e-14)


# -- current sheets -------------------------------------------------------

def spec(**kw):
    base = dict(c=0.5, phi_minus=1.0, phi_plus=2.0)
    base.update(kw)
    return CurrentSheetSpec(**base)


def test_sheet_matches_oracle(cylinder_map):
    s = spec()
    cs, oracle = current_sheet(cylinder_map, s), current_sheet_oracle(cylinder_map, s)
    assert cs.k.shape == (1024, 3)
    assert np.max(np.abs(cs.J - oracle.J)) <= 1e-12
    assert np.max(np.abs(np.einsum("ni,ni->n", cs.J, cs.n))) <= 1e-12
    np.testing.assert_allclose(np.linalg.norm(cs.n, axis=1), 1.0, atol=1e-15)


def test_sheet_at_origin_by_hand(cylinder_map):
    # k = (0, 0, 0.5): x1 = e1, x2 = e2, n = e3 (x3 = (0, 0, 1) > 0)
    s = spec(k1=(0.0, 1.0), k2=(0.0, 1.0), shape=(2, 2))
    cs = current_sheet(cylinder_map, s)
    np.testing.assert_allclose(cs.n[0], [0, 0, 1], atol=1e-15)
    # J = (1 - 2)/2 * e3 x (e2/2 + e1) = -1/2 * (-1/2, 1, 0)
    np.testing.assert_allclose(cs.J[0], [0.25, -0.5, 0.0], atol=1e-15)


def test_sheet_oracle_through_transformed_maps(cylinder_map):
    """B on each side from actually transformed maps, evaluated at the same x."""
    s = spec(shape=(8, 8), k1=(0.5, 1.5), k2=(0.5, 1.5))
    cs = current_sheet(cylinder_map, s)
    fields = []
    for phi in (s.phi_minus, s.phi_plus):
        t = bogoyavlenskij(cylinder_map, repr(phi))
        pre = cs.k * [1 / phi, phi, 1]
        mj = t.evaluate_unchecked(pre)
        np.testing.assert_allclose(mj.x, cs.x, atol=1e-14)
        fields.append(0.5 * (mj.b - mj.a))
    J = np.cross(cs.n, fields[1] - fields[0])
    np.testing.assert_allclose(cs.J, J, atol=1e-13)


def test_no_jump_no_current(cylinder_map):
    cs = current_sheet(cylinder_map, spec(phi_plus=1.0))
    assert np.max(np.abs(cs.J)) == 0.0
    cs = current_sheet(cylinder_map, spec(phi_minus=1.7, phi_plus=1.7))
    assert np.max(np.abs(cs.J)) == 0.0


def test_current_vanishes_linearly(cylinder_map):
    eps = np.array([1e-1, 1e-2, 1e-3, 1e-4])
    jmax = np.array([np.max(np.linalg.norm(current_sheet(cylinder_map, spec(phi_plus=1 + e)).J, axis=1))
                     for e in eps])
    ratio = jmax / eps
    assert np.all(np.abs(ratio / ratio[-1] - 1) < 0.1)


def test_swapping_sides_flips_current(cylinder_map):
    a = current_sheet(cylinder_map, spec(phi_minus=1.0, phi_plus=2.0))
    b = current_sheet(cylinder_map, spec(phi_minus=2.0, phi_plus=1.0))
    np.testing.assert_allclose(a.J, -b.J, atol=1e-15)


@pytest.mark.parametrize("kw", [dict(phi_minus=0.0), dict(phi_plus=0.0), dict(c=0.2), dict(c=2.0)])
def test_invalid_sheet_spec(cylinder_map, kw):
    with pytest.raises(SceneError):
        current_sheet(cylinder_map, spec(**kw))


def test_degenerate_sheet_parametrization():
    # x1 = e1 and x2 = e1 + (k3 - 0.5) e2 are parallel on k3 = 0.5
    m = from_exprs(["k1 + k2", "(k3 - 0.5)*k2", "k3"], Box((0, 1), (0, 1), (0, 1)), probe=0)
    with pytest.raises(SingularityError):
        current_sheet(m, spec(c=0.5))
