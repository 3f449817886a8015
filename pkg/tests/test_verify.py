import json

import numpy as np
import pytest

from ctpmhd import areamap, families
from ctpmhd.flowmap import Box, from_exprs
from ctpmhd.verify import fd_crosscheck, grid_points, verify_physical, verify_reduced

from conftest import CYL_BOX, UNIT_BOX


ULP = np.finfo(float).eps


def test_identity_all_zero(identity_map):
    for r in (verify_reduced(identity_map), verify_physical(identity_map)):
        assert r.max_residual == 0.0
        assert r.passed
    # ((k + h) - (k - h)) / 2h is exact only up to the rounding of k +- h, i.e. ~eps/h
    assert fd_crosscheck(identity_map, h=1e-5).max_residual <= 2 * ULP / 1e-5
    assert [e.name for e in verify_reduced(identity_map).entries] == [
        "reduced_1", "reduced_2", "reduced_3", "det_minus_1"]
    assert [e.name for e in verify_physical(identity_map).entries] == [
        "momentum", "induction", "div_v", "div_B"]


@pytest.mark.parametrize("h", [1e-3, 1e-5, 0.1])
def test_identity_fd_any_step(identity_map, h):
    r = fd_crosscheck(identity_map, h=h)
    assert r.entry("first_partials").max_abs <= 2 * ULP / h
    assert r.entry("second_partials").max_abs == 0.0


def test_fig1_residuals(fig1_map):
    r = verify_reduced(fig1_map)
    assert r.grid == (21, 21, 21)
    assert r.max_residual < 1e-9
    p = verify_physical(fig1_map)
    assert p.max_residual < 1e-8
    assert not p.skipped


def test_fd_fig1_and_potential(fig1_map, potential_map):
    assert fd_crosscheck(fig1_map, h=1e-5).max_residual < 1e-7
    assert fd_crosscheck(potential_map, h=1e-5).max_residual < 1e-6


def test_broken_areamap_scene_det_residual():
    am = areamap.from_pair("k2", "2*k3", ((0, 1), (0, 1)), check=False)
    m = families.build_s1("0", am, 0.0, UNIT_BOX)
    r = verify_reduced(m)
    e = r.entry("det_minus_1")
    assert e.max_abs == 1.0 and e.mean_abs == 1.0
    assert not r.passed
    # x = (k1, k2, 2 k3) still carries constant v and B, a valid physical state:
    # a constant determinant only changes the k3 normalization
    assert verify_physical(m).passed


def test_nonconstant_pressure_map():
    m = from_exprs(["k1", "k2", "k3 + k1*k2"], UNIT_BOX, pressure="-k1*k2 - k3")
    r = verify_reduced(m)
    assert r.max_residual < 1e-14
    assert verify_physical(m).max_residual < 1e-14
    wrong = from_exprs(["k1", "k2", "k3 + k1*k2"], UNIT_BOX)
    assert not verify_reduced(wrong).passed
    assert not verify_physical(wrong).passed


def test_reduced_and_physical_agree_on_corpus():
    from ctpmhd.scene import Scene, bundled_scenes

    for name in bundled_scenes():
        m = Scene.load(name).flowmap
        assert verify_reduced(m).passed == verify_physical(m).passed, name


def test_induction_bounded_by_commutator():
    # a map violating x12 = 0 breaks momentum but not induction (mixed partials commute)
    m = from_exprs(["k1 + 0.1*k1*k2", "k2", "k3"], Box((0, 1), (0, 1), (0, 1)))
    p = verify_physical(m)
    assert p.entry("induction").max_abs < 1e-14
    assert p.entry("momentum").max_abs > 1e-3


def test_singular_points_skipped_and_flagged():
    # det = 3 k3^2 vanishes on k3 = 0; construction probe disabled on purpose
    m = from_exprs(["k1", "k2", "k3^3"], Box((0, 1), (0, 1), (0, 1)), probe=0)
    p = verify_physical(m, (3, 3, 3))
    assert len(p.skipped) == 9
    assert all(k[2] == 0.0 for k in p.skipped)


def test_report_invariants_and_serialization(fig1_map, tmp_path):
    r = verify_reduced(fig1_map, (5, 6, 7))
    assert r.points.shape == (210, 3)
    for e in r.entries:
        assert e.max_abs >= e.mean_abs >= 0
    d = json.loads(r.to_json())
    assert d["grid"] == [5, 6, 7] and d["passed"] is True
    assert "reduced residuals on grid 5x6x7" in r.to_text()
    r.write_csv(tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "k1,k2,k3,reduced_1,reduced_2,reduced_3,det_minus_1"
    assert len(lines) == 211


def test_reports_deterministic(fig1_map):
    assert verify_physical(fig1_map, 7).to_json() == verify_physical(fig1_map, 7).to_json()


def test_grid_points_variants(identity_map):
    pts, shape = grid_points(identity_map, 4)
    assert shape == (4, 4, 4) and pts.shape == (64, 3)
    pts, shape = grid_points(identity_map, np.array([[0.5, 0.5, 0.5]]))
    assert shape == (1,)


def test_min_p_reported():
    am = areamap.circular(((0, 7), (0.2, 1.5)))
    m = families.build_s1("k2", am, 0.0, CYL_BOX)
    r = verify_reduced(m)
    st = m.fields_at(r.points)
    assert r.min_p == pytest.approx(st.p.min())
    assert r.min_p < 0
