"""Stage runners behind the command line.

Each stage rebuilds what it needs from the one config document, writes its
artifacts under ``out`` and returns a flat summary dict. Artifacts are
deterministic for a fixed config and seed; the manifest carries timings.
"""

from __future__ import annotations

import hashlib
import time
from importlib import metadata
from pathlib import Path

import numpy as np

from . import io
from .beams import BeamModel, centrifugal_load, lowest_frequencies, solve_static
from .config import STAGES, ConfigError, ProjectConfig, config_to_dict
from .inspection import PointCloud, deviation, sample_nominal, tolerance_verdict
from .lattice import (
    LatticeModel,
    ParameterField,
    StepField,
    beam_layout,
    build_lattice,
    hex_mesh,
    lattice_surface,
    subdivide_graph,
)
from .optimize import DesignProblem, layer_means, optimize
from .splines import TensorSpline, blade_macro, unit_cube
from .tiles import BeamGraph, TileKind, check_interface_compatibility, check_printability, make_tile


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def load_macro(cfg: ProjectConfig) -> TensorSpline:
    m = cfg.macro
    if "file" in m:
        return io.read_spline(m["file"])
    if m.get("builtin", "blade") == "unit_cube":
        return unit_cube()
    keys = ("span", "chord", "thickness", "twist_deg", "taper", "thin", "sweep")
    return blade_macro(**{k: m[k] for k in keys if k in m})


def load_grading(cfg: ProjectConfig):
    g = cfg.grading
    if g is None:
        return None
    if "coefficients" in g:
        return ParameterField.from_coefficients(g["coefficients"], g["units"])
    if "steps" in g:
        st = g["steps"]
        return StepField(st["breaks"], st["values"], int(st.get("axis", 0)), g["units"])
    return ParameterField(io.read_spline(g["file"]), g["units"])


def _require(cfg: ProjectConfig, stage: str, *sections: str):
    missing = [s for s in sections if getattr(cfg, s) is None]
    if missing:
        raise ConfigError([f"stage {stage!r} needs a {s!r} section" for s in missing])


def _lattice(cfg: ProjectConfig, compose_solids: bool = True) -> LatticeModel:
    fit = cfg.fit
    return build_lattice(
        load_macro(cfg),
        cfg.grid,
        cfg.tile,
        load_grading(cfg),
        fit_size=int(fit.get("size", 4)),
        max_fit_size=int(fit.get("max_size", 16)),
        tolerance=fit.get("tolerance"),
        growth_axis=cfg.growth_axis,
        compose_solids=compose_solids,
    )


def _layout_radii(model: LatticeModel, layout, grading):
    return layout.radii(grading) if model.is_solid else layout.thickness(grading)


def _write(out: Path, name: str, writer, *args) -> Path:
    path = out / name
    path.parent.mkdir(parents=True, exist_ok=True)
    writer(path, *args)
    return path


# ---------------------------------------------------------------------------
# stages


def stage_tile(cfg: ProjectConfig, out: Path, seed: int) -> tuple[dict, list[Path]]:
    _require(cfg, "tile", "tile")
    geom = make_tile(cfg.tile)
    files = []
    for i, piece in enumerate(geom.spline_set or []):
        files.append(_write(out, f"tile/piece_{i:03d}.spl", io.write_spline, piece))
    if geom.cell_graph is not None:
        files.append(_write(out, "tile/cell.graph", io.write_graph, geom.cell_graph))
    summary = {
        "kind": cfg.tile.kind.value,
        "pieces": len(geom.spline_set or []),
        "struts": len(geom.struts) if geom.cell_graph is None else len(geom.cell_graph.edges),
        "volume": geom.volume(),
    }
    if geom.spline_set:
        summary["interface_passed"] = check_interface_compatibility(geom).passed
    if cfg.tile.kind is TileKind.AUXETIC_DOUBLE_V:
        rep = check_printability(geom.cell_graph)
        summary.update(printable=rep.passed, max_overhang_deg=rep.max_angle, hanging_nodes=len(rep.hanging_nodes))
    return summary, files


def stage_lattice(cfg: ProjectConfig, out: Path, seed: int) -> tuple[dict, list[Path]]:
    _require(cfg, "lattice", "tile")
    model = _lattice(cfg)
    mesh = hex_mesh(model.macro, cfg.grid)
    grid = io.hex_mesh_grid(mesh, cell_data={"jacobian_det": mesh.cell_jacobian_dets()})
    layout = beam_layout(model, int(cfg.analysis["elements_per_strut"]), cfg.root_face)
    radii = _layout_radii(model, layout, load_grading(cfg))
    files = [
        _write(out, "lattice/cells.vtk", io.write_vtk, grid),
        _write(out, "lattice/beams.graph", io.write_graph, BeamGraph(layout.nodes, layout.elements, radii)),
    ]
    for i, piece in enumerate(model.pieces()):
        files.append(_write(out, f"lattice/pieces/piece_{i:04d}.spl", io.write_spline, piece))
    summary = {
        "cells": len(model.cells),
        "pieces": len(model.pieces()),
        "fit_size": model.fit_size,
        "max_deviation": model.max_deviation,
        "beam_nodes": len(layout.nodes),
        "beam_elements": len(layout.elements),
        "volume": model.volume(),
    }
    return summary, files


def analysis_model(cfg: ProjectConfig) -> tuple[BeamModel, np.ndarray]:
    """Beam model and total nodal load (centrifugal plus fixed nodal forces)."""
    n = int(cfg.analysis["elements_per_strut"])
    if cfg.beam is not None:
        graph = io.read_graph(cfg.beam["graph"])
        nodes, elems, radii = subdivide_graph(graph, n)
        model = BeamModel(nodes, elems, radii, cfg.material, cfg.beam["clamped_nodes"])
        f = np.zeros((len(nodes), 6))
        for ld in cfg.beam["loads"]:
            f[ld["node"], :3] += ld["force"]
        f = f.ravel()
    else:
        _require(cfg, "analyze", "tile")
        lat = _lattice(cfg, compose_solids=False)
        layout = beam_layout(lat, n, cfg.root_face)
        model = layout.model(cfg.material, _layout_radii(lat, layout, load_grading(cfg)))
        f = np.zeros(model.n_dofs)
    if cfg.load.omega:
        f = f + centrifugal_load(model, cfg.load)
    return model, f


def stage_analyze(cfg: ProjectConfig, out: Path, seed: int) -> tuple[dict, list[Path]]:
    model, f = analysis_model(cfg)
    res = solve_static(model, f)
    grid = io.beam_grid(
        model.nodes,
        model.elements,
        point_data={"displacement": res.displacements[:, :3]},
        cell_data={"radius": model.radii, "von_mises": res.von_mises},
    )
    files = [_write(out, "analysis/result.vtk", io.write_vtk, grid)]
    summary = {
        "nodes": len(model.nodes),
        "elements": len(model.elements),
        "mass": model.mass(),
        **res.summary(),
        "residual": res.residual,
    }
    count = int(cfg.analysis.get("frequencies", 0))
    if count:
        summary["frequencies"] = lowest_frequencies(model, count).tolist()
    return summary, files


def stage_optimize(cfg: ProjectConfig, out: Path, seed: int) -> tuple[dict, list[Path]]:
    _require(cfg, "optimize", "tile")
    o = cfg.optimizer
    lat = _lattice(cfg, compose_solids=False)
    layout = beam_layout(lat, int(o["elements_per_strut"]), cfg.root_face)
    lo, hi = (float(b) for b in o["bounds"])
    units = "fraction" if lat.is_solid else "m"
    field = ParameterField.constant(hi, tuple(o["shape"]), units)
    problem = DesignProblem(layout, field, cfg.load, cfg.material, (lo, hi))
    start = np.full(problem.n, hi)
    problem.mass_budget = float(o["mass_budget"]) if "mass_budget" in o else float(o["mass_budget_fraction"]) * problem.mass(start)
    c, trace = optimize(problem, start, max_iterations=int(o["max_iterations"]))
    final = field.with_coefficients(c)
    files = [
        _write(out, "optimize/trace.csv", lambda p, t: Path(p).write_text(t), trace.to_table()),
        _write(out, "optimize/field.spl", io.write_spline, final.spline),
    ]
    objectives = trace.objectives()
    summary = {
        "status": trace.status,
        "iterations": trace.iterations,
        "compliance_initial": float(objectives[0]),
        "compliance_final": float(objectives[-1]),
        "mass_budget": problem.mass_budget,
        "mass_final": problem.mass(c),
        "layer_means": layer_means(final, cfg.grid, cfg.growth_axis).tolist(),
    }
    return summary, files


def stage_inspect(cfg: ProjectConfig, out: Path, seed: int) -> tuple[dict, list[Path]]:
    ins = cfg.inspection
    macro = load_macro(cfg)
    mesh, nominal = sample_nominal(macro, ins["density"], seed=seed, resolution=int(ins["resolution"]))
    files = []
    if "measured" in ins:
        pts, nrm = io.read_cloud(ins["measured"])
        measured = PointCloud(pts, nrm)
    else:
        syn = ins.get("synthetic") or {"offset": 0.0, "noise": 0.0}
        rng = np.random.default_rng(seed + 1)
        pts = nominal.points + syn["offset"] * nominal.normals
        if syn["noise"]:
            pts = pts + syn["noise"] * rng.standard_normal(pts.shape)
        measured = PointCloud(pts, nominal.normals)
        files.append(_write(out, "inspect/measured.xyz", io.write_cloud, measured.points, measured.normals))
    tr = ins.get("transform")
    if tr is not None:
        measured = measured.transformed(tr["rotation"], tr["translation"])
    report = deviation(measured, mesh, bins=int(ins["bins"]))
    verdict = tolerance_verdict(report, ins["band"], float(ins["required_fraction"]))
    files.append(_write(out, "inspect/deviation.json", io.write_json, report.to_dict()))
    files.append(_write(out, "inspect/histogram.csv", lambda p, t: Path(p).write_text(t), report.histogram_table()))
    summary = {
        **report.stats(),
        "band": verdict.band,
        "fraction_within": verdict.fraction,
        "passed": verdict.passed,
    }
    return summary, files


def stage_export(cfg: ProjectConfig, out: Path, seed: int) -> tuple[dict, list[Path]]:
    macro = load_macro(cfg)
    ex = cfg.export
    mesh = hex_mesh(macro, tuple(int(r) for r in ex["hex_resolution"]))
    files = [
        _write(out, "export/macro.spl", io.write_spline, macro),
        _write(out, "export/hex.vtk", io.write_vtk, io.hex_mesh_grid(mesh, cell_data={"jacobian_det": mesh.cell_jacobian_dets()})),
    ]
    summary = {"hex_cells": len(mesh.cells), "hex_vertices": len(mesh.vertices)}
    if cfg.tile is not None:
        model = _lattice(cfg)
        if model.is_solid:
            v, f = lattice_surface(model, int(ex["surface_resolution"]))
            files.append(_write(out, "export/lattice.obj", io.write_obj, v, f))
            for i, piece in enumerate(model.pieces()):
                files.append(_write(out, f"export/iga/piece_{i:04d}.spl", io.write_spline, piece))
            summary.update(iga_patches=len(model.pieces()), surface_triangles=len(f))
        else:
            files.append(_write(out, "export/lattice.graph", io.write_graph, model.beam_graph))
            summary.update(struts=len(model.beam_graph.edges))
    return summary, files


RUNNERS = {
    "tile": stage_tile,
    "lattice": stage_lattice,
    "analyze": stage_analyze,
    "optimize": stage_optimize,
    "inspect": stage_inspect,
    "export": stage_export,
}


def _plain(v):
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_plain(x) for x in v]
    if isinstance(v, np.generic):
        return v.item()
    return v


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_pipeline(cfg: ProjectConfig, stage: str, out, seed: int = 0, threads: int | None = None) -> dict:
    """Run one stage, write its artifacts and ``manifest.json`` under ``out``."""
    if stage not in STAGES:
        raise ConfigError([f"unknown stage {stage!r}; expected one of {', '.join(STAGES)}"])
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    summary, files = RUNNERS[stage](cfg, out, seed)
    summary = _plain(summary)
    elapsed = time.perf_counter() - t0
    manifest = {
        "tool": "bladelattice",
        "version": tool_version(),
        "stage": stage,
        "seed": seed,
        "threads": threads,
        "inputs": cfg.input_hashes(),
        "config": config_to_dict(cfg),
        "outputs": {str(p.relative_to(out)): _sha256(p) for p in files},
        "timings": {"total_s": elapsed},
        "summary": summary,
    }
    io.write_json(out / "manifest.json", manifest)
    return summary
