"""Exit criteria of the package, one test per criterion.

Each test prints a one-line PASS/FAIL summary; the terminal summary of the
run repeats them together under "acceptance criteria".

    pytest tests/test_acceptance.py
"""

import math
import time

import numpy as np
import pytest

from ctpmhd import areamap as am
from ctpmhd import families
from ctpmhd.errors import AreaMapError
from ctpmhd.geometry import classify_grid, export, magnetic_line, streamline, tangent_error, tessellate_surface
from ctpmhd.scene import Scene, bundled_scenes
from ctpmhd.transforms import CurrentSheetSpec, bogoyavlenskij, current_sheet, current_sheet_oracle, translate
from ctpmhd.verify import fd_crosscheck, verify_physical, verify_reduced

from conftest import CYL_BOX

pytestmark = pytest.mark.acceptance

HODO_BOX = ((-math.pi / 2, math.pi / 2), (0.1, 2.0))


def report(request, n, ok, detail):
    request.node.detail = detail
    print(f"criterion {n} [{'PASS' if ok else 'FAIL'}] {detail}")


def symmetry(m):
    """Scaling by 1 + k3 followed by translation of k1 by sin(k3)."""
    return translate(bogoyavlenskij(m, "1 + k3"), "sin(k3)", "0")


def preimage(k):
    phi = 1 + k[:, 2]
    return np.column_stack([phi * (k[:, 0] + np.sin(k[:, 2])), k[:, 1] / phi, k[:, 2]])


@pytest.mark.criterion(1, "trivial-scene exactness")
def test_criterion_1_identity(request):
    t0 = time.perf_counter()
    m = Scene.load("identity").flowmap
    red, phys = verify_reduced(m), verify_physical(m)
    det = np.linalg.det(m.evaluate(m.domain.grid((21, 21, 21))).d1)
    elapsed = time.perf_counter() - t0
    worst = max(red.max_residual, phys.max_residual)
    ok = worst <= 1e-14 and np.all(det == 1.0) and elapsed < 1.0
    report(request, 1, ok, f"max residual {worst:.1e}, det==1 exactly: {bool(np.all(det == 1.0))}, "
                           f"{elapsed:.2f} s")
    assert worst <= 1e-14
    assert np.all(det == 1.0)
    assert elapsed < 1.0


@pytest.mark.criterion(2, "s2 tube scene (fig1) reproduction")
def test_criterion_2_fig1(request, tmp_path):
    t0 = time.perf_counter()
    scene = Scene.load("fig1")
    m = scene.flowmap
    assert m.domain.k1 == (0.0, 2 * math.pi) and m.domain.k2 == (0.0, 2 * math.pi)
    assert m.domain.k3 == (0.2, 1.5)
    red, phys = verify_reduced(m, (21, 21, 21)), verify_physical(m, (21, 21, 21))
    worst = max(red.max_residual, phys.max_residual)

    mesh = tessellate_surface(m, 1.0, res=(64, 64), weld=True)
    path = export(mesh, "obj", tmp_path / "fig1_k3_1.obj")
    verts = np.array([[float(t) for t in ln.split()[1:]]
                      for ln in path.read_text().splitlines() if ln.startswith("v ")])
    k1, k2 = mesh.params[:, 0], mesh.params[:, 1]
    r = math.sqrt(2.0)
    prof2 = verts[:, 1] - np.sin(k1)  # remove the beta shift
    prof3 = verts[:, 2]
    dev = max(np.max(np.abs(prof2 - r * np.sin(k2))), np.max(np.abs(prof3 - r * np.cos(k2))),
              np.max(np.abs(verts[:, 0] - (k1 + np.cos(2 * prof3)))))
    # closed tube: the k2 seam closes up, every face references a vertex
    closed = mesh.welded[1] and mesh.faces.max() < len(verts)
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-8 and dev <= 1e-12 and closed and elapsed < 10
    report(request, 2, ok, f"max residual {worst:.1e}, profile deviation {dev:.1e}, "
                           f"closed seam {closed}, {elapsed:.2f} s")
    assert worst < 1e-8
    assert dev <= 1e-12
    assert closed
    assert elapsed < 10


@pytest.mark.criterion(3, "hodograph oracle")
def test_criterion_3_hodograph(request):
    pot = am.from_potential(am.CIRCULAR_POTENTIAL, HODO_BOX)
    ref = am.circular(HODO_BOX)
    k2, k3 = pot.domain.probe(50)
    dev = float(np.max(np.abs(np.array(pot.partials(k2, k3)) - np.array(ref.partials(k2, k3)))))
    _, iters = pot.solve(k2, k3)
    ok = k2.size == 2500 and dev <= 1e-10 and iters.max() <= 10
    report(request, 3, ok, f"{k2.size} points, max deviation {dev:.1e}, "
                           f"max Newton iterations {iters.max()}")
    assert k2.size == 2500
    assert dev <= 1e-10
    assert iters.max() <= 10


@pytest.mark.criterion(4, "area-preserving determinant")
def test_criterion_4_determinant(request):
    maps = {
        "pair identity": am.from_pair("k2", "k3", ((0, 1), (0, 1))),
        "pair circular": am.from_pair("sqrt(2*k3)*sin(k2)", "sqrt(2*k3)*cos(k2)", ((0, 7), (0.2, 1.5))),
        "builtin circular": am.circular(((0, 7), (0.2, 1.5))),
        "potential circular": am.from_potential(am.CIRCULAR_POTENTIAL, HODO_BOX),
        "potential identity": am.from_potential("k3*t2", ((0, 1), (0, 1))),
        "potential atan": am.from_potential("k3*atan(t2)", ((-1.2, 1.2), (0.1, 1))),
        "shear axis 2": am.modify_shear(am.circular(((0, 7), (0.2, 1.5))), "sin(t3)", 2),
        "shear axis 3": am.modify_shear(am.from_potential(am.CIRCULAR_POTENTIAL, HODO_BOX), "t2^3", 3),
        "double shear": am.modify_shear(am.modify_shear(am.identity(((-1, 1), (-1, 1))), "t3^2", 2),
                                        "cos(t2)", 3),
    }
    worst = max(m.probe_det()[0] for m in maps.values())
    try:
        am.from_pair("sqrt(2*k3)*sin(k2)", "2*k3*cos(k2)", ((0, 7), (0.2, 1.5)))
        rejected = False
    except AreaMapError:
        rejected = True
    ok = worst < 1e-9 and rejected
    report(request, 4, ok, f"{len(maps)} maps, max |det-1| {worst:.1e}, broken map rejected {rejected}")
    assert worst < 1e-9
    assert rejected


@pytest.mark.criterion(5, "symmetry preservation")
def test_criterion_5_symmetry(request):
    worst_res = worst_ab = worst_x = worst_P = 0.0
    all_pass = True
    for name in sorted(bundled_scenes()):
        m = Scene.load(name).flowmap
        if not (verify_reduced(m).passed and verify_physical(m).passed):
            continue
        t = symmetry(m)
        red, phys = verify_reduced(t), verify_physical(t)
        all_pass &= red.passed and phys.passed
        worst_res = max(worst_res, red.max_residual, phys.max_residual)

        k = m.domain.grid((9, 9, 9))
        P, dP = t.total_pressure(k)
        worst_P = max(worst_P, float(np.max(np.abs(P - m.P0))), float(np.max(np.abs(dP))))
        tj, oj = t.evaluate(k), m.evaluate_unchecked(preimage(k))
        ab_t = np.einsum("ni,ni->n", tj.a, tj.b)
        ab_o = np.einsum("ni,ni->n", oj.a, oj.b)
        worst_ab = max(worst_ab, float(np.max(np.abs(ab_t - ab_o))))
        for c in np.linspace(*m.domain.k3, 4):
            mesh = tessellate_surface(t, c, res=(12, 12))
            kk = np.column_stack([mesh.params, np.full(len(mesh.params), c)])
            worst_x = max(worst_x, float(np.max(np.abs(mesh.vertices - m.evaluate_unchecked(preimage(kk)).x))))
    ok = all_pass and worst_res < 1e-8 and worst_P == 0.0 and worst_ab <= 1e-12 and worst_x <= 1e-12
    report(request, 5, ok, f"max residual {worst_res:.1e}, P change {worst_P:.1e}, "
                           f"a.b change {worst_ab:.1e}, surface point change {worst_x:.1e}")
    assert all_pass and worst_res < 1e-8
    assert worst_P == 0.0
    assert worst_ab <= 1e-12
    assert worst_x <= 1e-12


@pytest.mark.criterion(6, "current-sheet identity")
def test_criterion_6_current_sheet(request):
    m = Scene.load("cylinder").flowmap
    spec = CurrentSheetSpec(c=0.5, phi_minus=1.0, phi_plus=2.0)
    cs, oracle = current_sheet(m, spec), current_sheet_oracle(m, spec)
    diff = float(np.max(np.linalg.norm(cs.J - oracle.J, axis=1)))
    jn = float(np.max(np.abs(np.einsum("ni,ni->n", cs.J, cs.n))))
    eps = np.array([1e-1, 1e-2, 1e-3, 1e-4, 1e-5])
    jmax = np.array([
        np.max(np.linalg.norm(current_sheet(m, CurrentSheetSpec(0.5, 1.0, 1.0 + e)).J, axis=1)) for e in eps
    ])
    slope = np.polyfit(np.log(eps), np.log(jmax), 1)[0]
    ok = cs.k.shape[0] == 1024 and diff <= 1e-12 and jn <= 1e-12 and abs(slope - 1) < 0.02
    report(request, 6, ok, f"{cs.k.shape[0]} samples, |J - oracle| {diff:.1e}, |J.n| {jn:.1e}, "
                           f"log-log slope of max|J| vs jump {slope:.4f}")
    assert cs.k.shape[0] == 1024
    assert diff <= 1e-12
    assert jn <= 1e-12
    assert abs(slope - 1) < 0.02


@pytest.mark.criterion(7, "line tangency")
def test_criterion_7_tangency(request):
    m = Scene.load("fig1").flowmap
    rng = np.random.default_rng(7)
    lo, hi = m.domain.lo + [0.3, 0.3, 0], m.domain.hi - [0.3, 0.3, 0]
    seeds = lo + (hi - lo) * rng.random((100, 3))
    worst_ratio = 1.0
    for seed in seeds:
        for fn in (streamline, magnetic_line):
            C = []
            for n in (21, 41):
                line = fn(m, seed, (-0.5, 0.5), n)
                ds = line.s[1] - line.s[0]
                C.append(tangent_error(m, line) / ds**2)
            r = C[1] / C[0]
            worst_ratio = max(worst_ratio, r, 1 / r)
    ok = worst_ratio < 4
    report(request, 7, ok, f"200 lines, worst C ratio under halving {worst_ratio:.3f} (< 4)")
    assert worst_ratio < 4


@pytest.mark.criterion(8, "Alfven classification")
def test_criterion_8_alfven(request):
    expected = {"0": "alfvenic", "k2": "super", "-k2": "sub"}
    ok = True
    for t1, label in expected.items():
        m = families.build_s1(t1, am.circular(((0, 7), (0.2, 1.5))), 0.0, CYL_BOX)
        for mm in (m, symmetry(m)):
            labels = set(classify_grid(mm, (21, 21, 21)).labels)
            ok &= labels == {label}
    report(request, 8, ok, "s1 with t1 = 0, k2, -k2 labelled alfvenic, super, sub everywhere, "
                           "also after scaling and translation")
    assert ok


@pytest.mark.criterion(9, "derivative integrity")
def test_criterion_9_fd(request):
    worst = {}
    for name in sorted(bundled_scenes()):
        worst[name] = fd_crosscheck(Scene.load(name).flowmap, h=1e-5).max_residual
    top = max(worst, key=worst.get)
    ok = all(v < 1e-6 for v in worst.values())
    report(request, 9, ok, f"{len(worst)} scenes, worst relative deviation {worst[top]:.1e} ({top})")
    assert ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
