"""Command line front end.

Exit codes: 0 pass, 1 verification failure, 2 usage or scene error,
3 numerical failure (Newton, singular parametrization, domain violation).

Output column orders:

  classify        k1,k2,k3,discriminant,label
  current-sheet   k1,k2,x1,x2,x3,n1,n2,n3,J1,J2,J3
  sample-fields   k1,k2,k3,x1,x2,x3,v1,v2,v3,B1,B2,B3,p
  trace           line,s,k1,k2,k3,x1,x2,x3
  export-surface  k1,k2,x1,x2,x3[,scalars...]   (csv format)
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import geometry, transforms, verify
from .errors import CtpError, SceneError
from .scene import Scene

log = logging.getLogger("ctpmhd")


def _grid(text: str):
    try:
        parts = [int(p) for p in text.lower().split("x")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}; use N or N1xN2xN3") from None
    if len(parts) == 1:
        parts *= 3
    if len(parts) != 3 or min(parts) < 1:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}; use N or N1xN2xN3")
    return tuple(parts)


def _res(text: str):
    try:
        parts = [int(p) for p in text.lower().split("x")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad resolution {text!r}; use N or N1xN2") from None
    if len(parts) == 1:
        parts *= 2
    if len(parts) != 2 or min(parts) < 2:
        raise argparse.ArgumentTypeError(f"bad resolution {text!r}; use N or N1xN2")
    return tuple(parts)


def _floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _emit(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text)
    except OSError as exc:
        raise SceneError(f"cannot write {out}: {exc.strerror or exc}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctpmhd", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--scene", required=True,
                       help="scene JSON path, or the name of a bundled scene")
        p.add_argument("--out", help="output path (default: stdout)")
        return p

    p = add("verify", "check reduced and full MHD residuals")
    p.add_argument("--grid", type=_grid, default=verify.DEFAULT_SHAPE)
    p.add_argument("--tol", type=float, default=verify.DEFAULT_TOL)
    p.add_argument("--fd-step", type=float, help="also cross-check derivatives with this step")
    p.add_argument("--fd-tol", type=float, default=verify.DEFAULT_FD_TOL)
    p.add_argument("--format", choices=("json", "text"), default="json")
    p.add_argument("--csv", help="dump per-point residuals to this CSV path")

    p = add("export-surface", "tessellate contact surfaces k3 = c")
    p.add_argument("--k3", type=_floats, required=True, help="comma-separated surface levels")
    p.add_argument("--res", type=_res, default=(32, 32))
    p.add_argument("--format", choices=("obj", "vtk", "csv"), default="obj")
    p.add_argument("--scalars", default="", help="comma list of discriminant,B,v,p")
    p.add_argument("--weld", action="store_true", help="close periodic seams")

    p = add("trace", "sample streamlines and magnetic lines")
    p.add_argument("--seeds", required=True, help="CSV (k1,k2,k3 per row) or JSON list of seeds")
    p.add_argument("--kind", choices=("streamline", "magnetic", "both"), default="both")
    p.add_argument("--s-range", type=_floats, default=[0.0, 1.0])
    p.add_argument("--samples", type=int, default=101)
    p.add_argument("--format", choices=("obj", "vtk", "csv"), default="csv")

    p = add("transform", "append equivalence transformations and write a new scene")
    p.add_argument("--phi", help="scaling factor phi(k3)")
    p.add_argument("--psi", help="k1 shift psi(k3)")
    p.add_argument("--chi", help="k2 shift chi(k3)")

    p = add("current-sheet", "surface current for a jump of the scaling factor")
    p.add_argument("--c", type=float)
    p.add_argument("--phi-minus", type=float)
    p.add_argument("--phi-plus", type=float)
    p.add_argument("--res", type=_res)
    p.add_argument("--tol", type=float, default=1e-12, help="oracle agreement tolerance")
    p.add_argument("--summary", help="write the agreement summary JSON here (default: stderr)")

    p = add("classify", "label grid points sub-, super- or alfvenic")
    p.add_argument("--grid", type=_grid, default=verify.DEFAULT_SHAPE)
    p.add_argument("--format", choices=("csv", "vtk"), default="csv")

    p = add("sample-fields", "v, B and p on a grid")
    p.add_argument("--grid", type=_grid, default=verify.DEFAULT_SHAPE)
    p.add_argument("--format", choices=("csv", "vtk"), default="csv")
    return parser


# ---------------------------------------------------------------------------
# subcommands

def cmd_verify(args, scene: Scene) -> int:
    m = scene.flowmap
    reports = {
        "reduced": verify.verify_reduced(m, args.grid, args.tol),
        "physical": verify.verify_physical(m, args.grid, args.tol),
    }
    if args.fd_step is not None:
        reports["fd"] = verify.fd_crosscheck(m, args.grid, args.fd_step, args.fd_tol)
    passed = all(r.passed for r in reports.values())
    if args.format == "json":
        doc = {
            "scene": scene.name,
            "passed": passed,
            "reports": {k: r.to_dict() for k, r in reports.items()},
        }
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    else:
        text = f"scene {scene.name}: {'PASS' if passed else 'FAIL'}\n"
        text += "\n".join(r.to_text() for r in reports.values()) + "\n"
    _emit(text, args.out)
    if args.csv:
        reports["reduced"].write_csv(args.csv)
    return 0 if passed else 1


def cmd_export_surface(args, scene: Scene) -> int:
    m = scene.flowmap
    scalars = [s for s in args.scalars.split(",") if s]
    meshes = [
        geometry.tessellate_surface(m, c, res=args.res, scalars=scalars, weld=args.weld)
        for c in args.k3
    ]
    if args.out is None:
        if len(meshes) != 1:
            raise SceneError("several surfaces need --out DIR")
        _emit(geometry.render(meshes[0], args.format), None)
        return 0
    out = Path(args.out)
    if len(meshes) == 1 and out.suffix:
        geometry.export(meshes[0], args.format, out)
        return 0
    out.mkdir(parents=True, exist_ok=True)
    for mesh in meshes:
        path = out / f"{scene.name}_k3_{mesh.c:g}.{args.format}"
        geometry.export(mesh, args.format, path)
        log.info("wrote %s", path)
    return 0


def _read_seeds(path: str) -> np.ndarray:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise SceneError(f"cannot read seeds {path}: {exc.strerror or exc}") from None
    try:
        if p.suffix == ".json":
            seeds = np.asarray(json.loads(text), dtype=float)
        else:
            rows = [r for r in csv.reader(text.splitlines()) if r and not r[0].startswith("#")]
            try:
                float(rows[0][0])
            except ValueError:
                rows = rows[1:]  # header
            seeds = np.asarray(rows, dtype=float)
    except (ValueError, IndexError, json.JSONDecodeError) as exc:
        raise SceneError(f"bad seeds file {path}: {exc}") from None
    if seeds.ndim != 2 or seeds.shape[1] != 3:
        raise SceneError(f"seeds must be rows of k1,k2,k3; got shape {seeds.shape}")
    return seeds


def cmd_trace(args, scene: Scene) -> int:
    m = scene.flowmap
    if len(args.s_range) != 2:
        raise SceneError("--s-range needs two numbers")
    kinds = ("streamline", "magnetic") if args.kind == "both" else (args.kind,)
    lines = []
    for seed in _read_seeds(args.seeds):
        for kind in kinds:
            fn = geometry.streamline if kind == "streamline" else geometry.magnetic_line
            lines.append(fn(m, seed, tuple(args.s_range), args.samples))
    truncated = sum(ln.truncated for ln in lines)
    if truncated:
        log.warning("%d of %d lines truncated at the domain boundary", truncated, len(lines))
    _emit(geometry.render(lines, args.format), args.out)
    return 0


def cmd_transform(args, scene: Scene) -> int:
    if args.phi is None and args.psi is None and args.chi is None:
        raise SceneError("transform needs at least one of --phi, --psi, --chi")
    new = scene
    if args.phi is not None:
        new = new.with_transform({"bogoyavlenskij": args.phi})
    if args.psi is not None or args.chi is not None:
        new = new.with_transform({"translate": [args.psi or "0", args.chi or "0"]})
    new.flowmap  # build now so that bad transforms fail here
    _emit(new.to_json() + "\n", args.out)
    return 0


def cmd_current_sheet(args, scene: Scene) -> int:
    m = scene.flowmap
    spec = scene.current_sheet_spec(
        c=args.c, phi_minus=args.phi_minus, phi_plus=args.phi_plus, res=args.res
    )
    sheet = transforms.current_sheet(m, spec)
    oracle = transforms.current_sheet_oracle(m, spec)
    diff = float(np.max(np.linalg.norm(sheet.J - oracle.J, axis=1)))
    summary = {
        "samples": int(sheet.k.shape[0]),
        "c": spec.c,
        "phi_minus": spec.phi_minus,
        "phi_plus": spec.phi_plus,
        "max_abs_J": float(np.max(np.linalg.norm(sheet.J, axis=1))),
        "max_abs_J_dot_n": float(np.max(np.abs(np.einsum("ni,ni->n", sheet.J, sheet.n)))),
        "max_oracle_difference": diff,
        "tolerance": args.tol,
        "agree": diff <= args.tol,
    }
    rows = sheet.rows()
    text = transforms.CSV_HEADER + "\n" + "\n".join(
        ",".join(repr(float(v)) for v in row) for row in rows
    ) + "\n"
    _emit(text, args.out)
    summary_text = json.dumps(summary, indent=2, sort_keys=True) + "\n"
    if args.summary:
        Path(args.summary).write_text(summary_text)
    else:
        sys.stderr.write(summary_text)
    return 0 if summary["agree"] else 1


def cmd_classify(args, scene: Scene) -> int:
    cls = geometry.classify_grid(scene.flowmap, args.grid)
    labels, counts = np.unique(cls.labels, return_counts=True)
    log.info("regimes: %s", dict(zip(labels.tolist(), counts.tolist())))
    _emit(geometry.render(cls, args.format), args.out)
    return 0


def cmd_sample_fields(args, scene: Scene) -> int:
    samples = geometry.sample_fields(scene.flowmap, args.grid)
    _emit(geometry.render(samples, args.format), args.out)
    return 0


COMMANDS = {
    "verify": cmd_verify,
    "export-surface": cmd_export_surface,
    "trace": cmd_trace,
    "transform": cmd_transform,
    "current-sheet": cmd_current_sheet,
    "classify": cmd_classify,
    "sample-fields": cmd_sample_fields,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        scene = Scene.load(args.scene)
        return COMMANDS[args.command](args, scene)
    except CtpError as exc:
        print(f"ctpmhd {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
