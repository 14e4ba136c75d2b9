"""Project configuration: one YAML or JSON document drives every stage.

Lengths follow the document's ``units`` (m or mm) and are converted to
meters on load. Moduli and densities are always SI (Pa, kg/m^3). Relative
paths resolve against the config file's directory.

Schema (all sections optional unless a stage needs them)::

    units: m | mm
    macro: {file: path} | {builtin: blade | unit_cube, <blade keyword lengths>}
    tile: {kind, arm_thickness, roundness, skin_thickness, attach_faces,
           strut_radius (length), reentrant_angle, include_vertical_strut}
    grid: [nu, nv, nw]
    growth_axis: 0
    grading: {coefficients: 3-d nested list, units: fraction | m}
           | {steps: {breaks, values, axis, units}} | {file: spline path, units}
    fit: {size, max_size, tolerance (length)}
    material: {E, nu, rho}
    load: {rpm | omega, axis_point (length), axis_dir, root_face}
    beam: {graph: path, clamped_nodes: [..], loads: [{node, force}]}
    analysis: {elements_per_strut, frequencies}
    optimizer: {bounds, shape, mass_budget (kg) | mass_budget_fraction,
                max_iterations, elements_per_strut}
    inspection: {measured: path | synthetic: {offset, noise}, density
                 (points per length), band (length or "40um"), bins,
                 required_fraction, resolution, transform: {rotation, translation}}
    export: {hex_resolution, surface_resolution}
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .beams import INCONEL_718, LoadCase, Material
from .inspection import parse_length
from .io import UNIT_SCALE
from .tiles import TileSpec

STAGES = ("tile", "lattice", "analyze", "optimize", "inspect", "export")


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  - " + "\n  - ".join(self.errors))


@dataclass
class ProjectConfig:
    path: Path | None
    raw: dict
    units: str
    macro: dict
    tile: TileSpec | None
    grid: tuple[int, int, int]
    growth_axis: int
    grading: dict | None
    fit: dict
    material: Material
    load: LoadCase
    root_face: str | None
    beam: dict | None
    analysis: dict
    optimizer: dict
    inspection: dict
    export: dict
    files: list[Path] = field(default_factory=list)

    def input_hashes(self) -> dict[str, str]:
        out = {}
        for p in ([self.path] if self.path else []) + self.files:
            out[str(p)] = hashlib.sha256(Path(p).read_bytes()).hexdigest()
        return out


def _len(value, scale):
    return None if value is None else float(value) * scale


def _vec(value, n=3):
    arr = np.asarray(value, dtype=float).reshape(-1)
    if arr.size != n:
        raise ValueError(f"expected {n} numbers, got {arr.size}")
    return arr


def load_config(path) -> ProjectConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError([f"config file not found: {path}"])
    text = path.read_text()
    try:
        raw = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise ConfigError([f"cannot parse {path}: {exc}"]) from exc
    return parse_config(raw or {}, base=path.parent, path=path)


def parse_config(raw: dict, base: Path | str = ".", path: Path | None = None) -> ProjectConfig:
    """Validate a config document, reporting every violation at once."""
    base = Path(base)
    errors: list[str] = []
    files: list[Path] = []
    if not isinstance(raw, dict):
        raise ConfigError(["config document must be a mapping"])

    units = raw.get("units", "m")
    if units not in UNIT_SCALE:
        errors.append(f"units must be one of {sorted(UNIT_SCALE)}, got {units!r}")
        units = "m"
    s = UNIT_SCALE[units]

    def resolve(p, what):
        q = Path(p)
        q = q if q.is_absolute() else base / q
        if not q.exists():
            errors.append(f"{what} file not found: {q}")
        else:
            files.append(q)
        return q

    macro = dict(raw.get("macro") or {"builtin": "blade"})
    if "file" in macro:
        macro["file"] = resolve(macro["file"], "macro")
    elif macro.get("builtin", "blade") not in ("blade", "unit_cube"):
        errors.append(f"unknown builtin macro {macro.get('builtin')!r}")
    else:
        for key in ("span", "chord", "thickness", "sweep"):
            if key in macro:
                macro[key] = _len(macro[key], s)

    tile = None
    if "tile" in raw:
        t = dict(raw["tile"])
        if "strut_radius" in t:
            t["strut_radius"] = _len(t["strut_radius"], s)
        try:
            tile = TileSpec.from_dict(t)
        except (ValueError, TypeError) as exc:
            errors.append(f"tile: {exc}")

    grid = raw.get("grid", [1, 1, 1])
    try:
        grid = tuple(int(g) for g in grid)
        if len(grid) != 3 or min(grid) < 1:
            raise ValueError
    except (TypeError, ValueError):
        errors.append(f"grid must be three integers >= 1, got {raw.get('grid')!r}")
        grid = (1, 1, 1)

    growth_axis = raw.get("growth_axis", 0)
    if growth_axis not in (0, 1, 2):
        errors.append(f"growth_axis must be 0, 1 or 2, got {growth_axis!r}")
        growth_axis = 0

    grading = raw.get("grading")
    if grading is not None:
        grading = dict(grading)
        g_units = grading.get("units", "fraction")
        if "coefficients" in grading:
            c = np.asarray(grading["coefficients"], dtype=float)
            if c.ndim != 3 or min(c.shape) < 2:
                errors.append("grading.coefficients must be a 3-d grid with at least 2 per direction")
            if g_units == "m":
                c = c * s
            grading["coefficients"] = c
        elif "steps" in grading:
            st = dict(grading["steps"])
            g_units = st.get("units", g_units)
            vals = np.asarray(st.get("values", []), dtype=float)
            st["values"] = tuple(vals * s if g_units == "m" else vals)
            st["breaks"] = tuple(float(b) for b in st.get("breaks", []))
            if len(st["values"]) != len(st["breaks"]) + 1:
                errors.append("grading.steps needs one more value than break")
            grading["steps"] = st
        elif "file" in grading:
            grading["file"] = resolve(grading["file"], "grading")
        else:
            errors.append("grading needs 'coefficients', 'steps' or 'file'")
        grading["units"] = g_units

    fit = dict(raw.get("fit") or {})
    if "tolerance" in fit:
        fit["tolerance"] = _len(fit["tolerance"], s)

    mat = dict(raw.get("material") or {})
    try:
        material = Material(
            float(mat.get("E", INCONEL_718.E)), float(mat.get("nu", INCONEL_718.nu)), float(mat.get("rho", INCONEL_718.rho))
        )
    except (ValueError, TypeError) as exc:
        errors.append(f"material: {exc}")
        material = INCONEL_718

    ld = dict(raw.get("load") or {})
    root_face = ld.get("root_face")
    try:
        if "rpm" in ld and "omega" in ld:
            raise ValueError("give either rpm or omega, not both")
        omega = LoadCase.rpm_to_rad(float(ld["rpm"])) if "rpm" in ld else float(ld.get("omega", 0.0))
        point = _vec(ld.get("axis_point", [0, 0, 0])) * s
        load = LoadCase(omega, tuple(point), tuple(_vec(ld.get("axis_dir", [0, 0, 1]))))
    except (ValueError, TypeError) as exc:
        errors.append(f"load: {exc}")
        load = LoadCase(0.0)

    beam = raw.get("beam")
    if beam is not None:
        beam = dict(beam)
        if "graph" not in beam:
            errors.append("beam section needs a 'graph' file")
        else:
            beam["graph"] = resolve(beam["graph"], "beam graph")
        beam["clamped_nodes"] = [int(n) for n in beam.get("clamped_nodes", [])]
        beam["loads"] = [{"node": int(l["node"]), "force": _vec(l["force"])} for l in beam.get("loads", [])]
        if not beam["clamped_nodes"]:
            errors.append("beam section needs clamped_nodes")

    analysis = {"elements_per_strut": 2, "frequencies": 0, **(raw.get("analysis") or {})}
    if int(analysis["elements_per_strut"]) < 1:
        errors.append("analysis.elements_per_strut must be >= 1")

    opt = {
        "bounds": [0.05, 0.45],
        "shape": [3, 2, 2],
        "mass_budget_fraction": 0.5,
        "max_iterations": 25,
        "elements_per_strut": 2,
        **(raw.get("optimizer") or {}),
    }
    b = opt["bounds"]
    if not (isinstance(b, (list, tuple)) and len(b) == 2 and 0 < b[0] < b[1]):
        errors.append(f"optimizer.bounds must be [min, max] with 0 < min < max, got {b!r}")

    insp = {"density": 2000.0, "band": 40e-6, "bins": 64, "required_fraction": 0.95, "resolution": 16, **(raw.get("inspection") or {})}
    try:
        insp["band"] = parse_length(insp["band"]) if isinstance(insp["band"], str) else float(insp["band"]) * s
        if insp["band"] <= 0:
            raise ValueError("band must be positive")
    except ValueError as exc:
        errors.append(f"inspection.band: {exc}")
    insp["density"] = float(insp["density"]) / s
    if "measured" in insp:
        insp["measured"] = resolve(insp["measured"], "measured point cloud")
    syn = insp.get("synthetic")
    if syn is not None:
        insp["synthetic"] = {"offset": _len(syn.get("offset", 0.0), s), "noise": _len(syn.get("noise", 0.0), s)}
    tr = insp.get("transform")
    if tr is not None:
        R = np.asarray(tr.get("rotation", np.eye(3)), dtype=float)
        if R.shape != (3, 3) or not np.allclose(R @ R.T, np.eye(3), atol=1e-9):
            errors.append("inspection.transform.rotation must be a 3x3 rotation matrix")
        insp["transform"] = {"rotation": R, "translation": _vec(tr.get("translation", [0, 0, 0])) * s}

    export = {"hex_resolution": list(grid), "surface_resolution": 6, **(raw.get("export") or {})}

    if errors:
        raise ConfigError(errors)
    return ProjectConfig(
        path, raw, units, macro, tile, grid, growth_axis, grading, fit, material, load, root_face,
        beam, analysis, opt, insp, export, files,
    )


def config_to_dict(cfg: ProjectConfig) -> dict[str, Any]:
    """Normalized SI view of the config (for manifests)."""

    def clean(v):
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [clean(x) for x in v]
        if isinstance(v, np.ndarray):
            return v.tolist()
        if isinstance(v, Path):
            return str(v)
        if isinstance(v, (np.floating, np.integer)):
            return v.item()
        return v

    return clean(
        {
            "units": "m",
            "macro": cfg.macro,
            "tile": cfg.tile.to_dict() if cfg.tile else None,
            "grid": cfg.grid,
            "growth_axis": cfg.growth_axis,
            "grading": cfg.grading,
            "material": {"E": cfg.material.E, "nu": cfg.material.nu, "rho": cfg.material.rho},
            "load": {"omega": cfg.load.omega, "axis_point": cfg.load.axis_point, "axis_dir": cfg.load.axis_dir},
        }
    )
