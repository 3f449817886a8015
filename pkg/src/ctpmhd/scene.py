"""Scene files: declarative JSON descriptions of a flow.

A scene names a family, its user functions, an area map, the total
pressure constant and a parameter box, optionally followed by a chain of
equivalence transformations. See ``scene.schema.json`` for the full format::

    {
      "family": "s2",
      "beta": "sin(k1)",
      "F": "cos(2*t3)",
      "areamap": {"mode": "circular"},
      "P0": 0.0,
      "domain": {"k1": [0, 6.283185307179586],
                 "k2": [0, 6.283185307179586],
                 "k3": [0.2, 1.5]}
    }
"""

from __future__ import annotations

import copy
import json
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Optional, Union

import jsonschema

from . import areamap as am
from . import families, transforms
from .errors import SceneError
from .flowmap import Box, FlowMap

FAMILY_FIELDS = {
    "s1": {"t1", "areamap"},
    "s2": {"beta", "F", "areamap"},
    "s3": {"beta", "gamma", "areamap"},
    "general": {"sigma", "tau"},
}
AREAMAP_FIELDS = {"pair": {"t2", "t3"}, "potential": {"phi"}, "circular": set()}
OPTIONAL_AREAMAP_FIELDS = {"pair": set(), "potential": {"bracket"}, "circular": set()}
FUNCTION_FIELDS = {"t1", "beta", "F", "gamma", "sigma", "tau", "areamap"}


def schema() -> dict:
    return json.loads(resources.files(__package__).joinpath("scene.schema.json").read_text())


def bundled_scenes() -> dict:
    """Name -> path of the scenes shipped with the package."""
    root = resources.files(__package__).joinpath("scenes")
    return {p.name[:-5]: Path(str(p)) for p in root.iterdir() if p.name.endswith(".json")}


def resolve_scene_path(name_or_path) -> Path:
    path = Path(name_or_path)
    if path.exists():
        return path
    scenes = bundled_scenes()
    if str(name_or_path) in scenes:
        return scenes[str(name_or_path)]
    raise SceneError(f"scene {name_or_path!r} is neither a file nor a bundled scene "
                     f"({', '.join(sorted(scenes))})")


def validate(data: dict) -> None:
    try:
        jsonschema.validate(data, schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SceneError(f"scene schema violation at {where}: {exc.message}") from None

    family = data["family"]
    present = FUNCTION_FIELDS & set(data)
    missing = FAMILY_FIELDS[family] - present
    extra = present - FAMILY_FIELDS[family]
    if missing:
        raise SceneError(f"family {family} requires field(s) {sorted(missing)}")
    if extra:
        raise SceneError(f"family {family} does not take field(s) {sorted(extra)}")

    spec = data.get("areamap")
    if spec is not None:
        mode = spec["mode"]
        fields = set(spec) - {"mode", "domain", "shear"}
        need = AREAMAP_FIELDS[mode]
        allowed = need | OPTIONAL_AREAMAP_FIELDS[mode]
        if need - fields:
            raise SceneError(f"areamap mode {mode} requires {sorted(need - fields)}")
        if fields - allowed:
            raise SceneError(f"areamap mode {mode} does not take {sorted(fields - allowed)}")


def build_areamap(spec: dict, domain: Box) -> am.AreaMap:
    box = spec.get("domain") or {"k2": domain.k2, "k3": domain.k3}
    box = ((float(box["k2"][0]), float(box["k2"][1])), (float(box["k3"][0]), float(box["k3"][1])))
    mode = spec["mode"]
    if mode == "pair":
        m = am.from_pair(str(spec["t2"]), str(spec["t3"]), box)
    elif mode == "potential":
        m = am.from_potential(str(spec["phi"]), box, bracket=spec.get("bracket"))
    else:
        m = am.circular(box)
    for shear in spec.get("shear", ()):
        m = am.modify_shear(m, str(shear["g"]), int(shear["axis"]))
    return m


def build_flowmap(data: dict) -> FlowMap:
    domain = Box.from_dict(data["domain"])
    P0 = float(data.get("P0", 0.0))
    family = data["family"]
    if family == "general":
        m = families.build_translational(
            [str(c) for c in data["sigma"]], [str(c) for c in data["tau"]], P0, domain
        )
    else:
        amap = build_areamap(data["areamap"], domain)
        if family == "s1":
            m = families.build_s1(str(data["t1"]), amap, P0, domain)
        elif family == "s2":
            m = families.build_s2(str(data["beta"]), str(data["F"]), amap, P0, domain)
        else:
            m = families.build_s3(str(data["beta"]), str(data["gamma"]), amap, P0, domain)
    for step in data.get("transforms", ()):
        if "bogoyavlenskij" in step:
            m = transforms.bogoyavlenskij(m, str(step["bogoyavlenskij"]))
        else:
            psi, chi = step["translate"]
            m = transforms.translate(m, str(psi), str(chi))
    return m


class Scene:
    def __init__(self, data: dict, path: Optional[Path] = None):
        validate(data)
        self.data = data
        self.path = path

    @classmethod
    def load(cls, name_or_path: Union[str, Path]) -> "Scene":
        path = resolve_scene_path(name_or_path)
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise SceneError(f"{path}: invalid JSON ({exc})") from None
        return cls(data, path)

    @property
    def name(self) -> str:
        if "name" in self.data:
            return self.data["name"]
        return self.path.stem if self.path else "scene"

    @cached_property
    def flowmap(self) -> FlowMap:
        return build_flowmap(self.data)

    def with_transform(self, step: dict) -> "Scene":
        data = copy.deepcopy(self.data)
        data.setdefault("transforms", []).append(step)
        return Scene(data)

    def current_sheet_spec(self, **overrides) -> transforms.CurrentSheetSpec:
        cs = dict(self.data.get("current_sheet", {}))
        cs.update({k: v for k, v in overrides.items() if v is not None})
        missing = {"c", "phi_minus", "phi_plus"} - set(cs)
        if missing:
            raise SceneError(f"current sheet needs {sorted(missing)}")
        return transforms.CurrentSheetSpec(
            c=float(cs["c"]),
            phi_minus=float(cs["phi_minus"]),
            phi_plus=float(cs["phi_plus"]),
            k1=tuple(cs["k1"]) if "k1" in cs else None,
            k2=tuple(cs["k2"]) if "k2" in cs else None,
            shape=tuple(cs.get("res", (32, 32))),
        )

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2)


def load_scene(name_or_path) -> Scene:
    return Scene.load(name_or_path)
