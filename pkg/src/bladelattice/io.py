"""Plain-text file formats.

Floats are written with 17 significant digits, so SI data round-trips bit
for bit and write -> read -> write is byte-identical.

Spline format::

    spline <d> <deg_1 .. deg_k> <n_1 .. n_k>
    units m|mm                      (optional, default m; scales points only)
    knots <t_0 t_1 ...>             (one line per parametric direction)
    points
    <x y z>                         (n_1*...*n_k lines, first direction fastest)
    weights                         (optional block, same order)
    <w>

Beam graph format: optional ``units`` line, then ``node x y z`` lines and
``edge i j r`` lines (0-based node indices).
"""

from __future__ import annotations

import io as _io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np

from .splines import KnotVector, TensorSpline, make_spline
from .tiles import BeamGraph

UNIT_SCALE = {"m": 1.0, "mm": 1e-3}


class FormatError(ValueError):
    pass


def fmt(x: float) -> str:
    return "%.17g" % x


def _join(values: Iterable[float]) -> str:
    return " ".join(fmt(v) for v in values)


def _open_text(target, mode):
    if isinstance(target, (str, Path)):
        return open(target, mode, encoding="ascii", newline="\n")
    return target


def _write_text(target, text: str):
    if isinstance(target, (str, Path)):
        with _open_text(target, "w") as fh:
            fh.write(text)
    else:
        target.write(text)


def _read_text(source) -> str:
    if isinstance(source, (str, Path)):
        with _open_text(source, "r") as fh:
            return fh.read()
    return source.read()


def _unit(name: str) -> float:
    if name not in UNIT_SCALE:
        raise FormatError(f"unknown unit {name!r}; expected one of {sorted(UNIT_SCALE)}")
    return UNIT_SCALE[name]


# ---------------------------------------------------------------------------
# splines


def spline_to_text(spline: TensorSpline, units: str = "m") -> str:
    s = _unit(units)
    k = len(spline.knots)
    lines = [f"spline {spline.dim} " + " ".join(str(d) for d in spline.degrees) + " " + " ".join(str(n) for n in spline.shape)]
    lines.append(f"units {units}")
    for kv in spline.knots:
        lines.append("knots " + _join(kv.knots))
    lines.append("points")
    order = tuple(range(k - 1, -1, -1))
    pts = np.transpose(spline.control, order + (k,)).reshape(-1, spline.dim) / s
    lines.extend(_join(p) for p in pts)
    if spline.weights is not None:
        lines.append("weights")
        lines.extend(fmt(w) for w in np.transpose(spline.weights, order).ravel())
    return "\n".join(lines) + "\n"


def spline_from_text(text: str) -> TensorSpline:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines or not lines[0].startswith("spline"):
        raise FormatError("missing 'spline' header")
    head = lines[0].split()[1:]
    if len(head) < 3 or (len(head) - 1) % 2:
        raise FormatError("header must be 'spline <d> <degrees...> <sizes...>'")
    d = int(head[0])
    k = (len(head) - 1) // 2
    degrees = [int(x) for x in head[1 : 1 + k]]
    sizes = [int(x) for x in head[1 + k :]]
    pos = 1
    scale = 1.0
    if lines[pos].startswith("units"):
        scale = _unit(lines[pos].split()[1])
        pos += 1
    knots = []
    for a in range(k):
        if not lines[pos].startswith("knots"):
            raise FormatError(f"expected knot vector {a}")
        knots.append(KnotVector(degrees[a], [float(x) for x in lines[pos].split()[1:]]))
        pos += 1
    if lines[pos] != "points":
        raise FormatError("expected 'points'")
    pos += 1
    count = int(np.prod(sizes))
    rows = lines[pos : pos + count]
    if len(rows) != count:
        raise FormatError(f"expected {count} control points, found {len(rows)}")
    pts = np.array([[float(x) for x in r.split()] for r in rows])
    if pts.shape[1] != d:
        raise FormatError(f"control points must have {d} coordinates")
    pos += count
    order = tuple(range(k - 1, -1, -1))
    ctrl = np.transpose(pts.reshape(tuple(sizes[::-1]) + (d,)), order + (k,)) * scale
    weights = None
    if pos < len(lines):
        if lines[pos] != "weights":
            raise FormatError(f"unexpected line {lines[pos]!r}")
        w = np.array([float(x) for x in lines[pos + 1 : pos + 1 + count]])
        if w.size != count:
            raise FormatError("weights block is incomplete")
        weights = np.transpose(w.reshape(tuple(sizes[::-1])), order)
    for kv, n in zip(knots, sizes):
        if kv.n != n:
            raise FormatError("knot vector length does not match control-grid size")
    return make_spline(knots, np.ascontiguousarray(ctrl), None if weights is None else np.ascontiguousarray(weights))


def write_spline(target, spline: TensorSpline, units: str = "m"):
    _write_text(target, spline_to_text(spline, units))


def read_spline(source) -> TensorSpline:
    return spline_from_text(_read_text(source))


# ---------------------------------------------------------------------------
# beam graphs


def graph_to_text(graph: BeamGraph, units: str = "m") -> str:
    s = _unit(units)
    lines = [f"units {units}"]
    lines.extend("node " + _join(p / s) for p in graph.nodes)
    lines.extend(f"edge {i} {j} {fmt(r / s)}" for (i, j), r in zip(graph.edges, graph.radii))
    return "\n".join(lines) + "\n"


def graph_from_text(text: str) -> BeamGraph:
    scale = 1.0
    nodes, edges, radii = [], [], []
    for n, line in enumerate(text.splitlines(), 1):
        tok = line.split()
        if not tok or tok[0].startswith("#"):
            continue
        if tok[0] == "units":
            scale = _unit(tok[1])
        elif tok[0] == "node" and len(tok) == 4:
            nodes.append([float(x) for x in tok[1:]])
        elif tok[0] == "edge" and len(tok) == 4:
            edges.append((int(tok[1]), int(tok[2])))
            radii.append(float(tok[3]))
        else:
            raise FormatError(f"line {n}: cannot parse {line!r}")
    return BeamGraph(np.array(nodes).reshape(-1, 3) * scale, np.array(edges, dtype=int).reshape(-1, 2), np.array(radii) * scale)


def write_graph(target, graph: BeamGraph, units: str = "m"):
    _write_text(target, graph_to_text(graph, units))


def read_graph(source) -> BeamGraph:
    return graph_from_text(_read_text(source))


# ---------------------------------------------------------------------------
# legacy VTK unstructured grids


VTK_LINE = 3
VTK_HEXAHEDRON = 12


@dataclass
class UnstructuredGrid:
    points: np.ndarray
    cells: list[np.ndarray]
    cell_types: np.ndarray
    point_data: dict = field(default_factory=dict)  # name -> (n,) or (n, 3)
    cell_data: dict = field(default_factory=dict)
    title: str = "bladelattice"


def _data_block(kind: str, count: int, data: dict) -> list[str]:
    if not data:
        return []
    lines = [f"{kind} {count}"]
    for name, arr in data.items():
        arr = np.asarray(arr, dtype=float)
        if arr.ndim == 1:
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [fmt(v) for v in arr]
        else:
            lines.append(f"VECTORS {name} double")
            lines += [_join(v) for v in arr]
    return lines


def grid_to_vtk(grid: UnstructuredGrid) -> str:
    lines = ["# vtk DataFile Version 3.0", grid.title, "ASCII", "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {len(grid.points)} double")
    lines += [_join(p) for p in grid.points]
    size = sum(len(c) + 1 for c in grid.cells)
    lines.append(f"CELLS {len(grid.cells)} {size}")
    lines += [" ".join(str(x) for x in [len(c), *c]) for c in grid.cells]
    lines.append(f"CELL_TYPES {len(grid.cells)}")
    lines += [str(int(t)) for t in grid.cell_types]
    lines += _data_block("CELL_DATA", len(grid.cells), grid.cell_data)
    lines += _data_block("POINT_DATA", len(grid.points), grid.point_data)
    return "\n".join(lines) + "\n"


def vtk_to_grid(text: str) -> UnstructuredGrid:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# vtk"):
        raise FormatError("not a legacy VTK file")
    title = lines[1]
    if lines[2].strip() != "ASCII" or lines[3].strip() != "DATASET UNSTRUCTURED_GRID":
        raise FormatError("only ASCII unstructured grids are supported")
    pos = 4
    n = int(lines[pos].split()[1])
    pts = np.array([[float(x) for x in ln.split()] for ln in lines[pos + 1 : pos + 1 + n]]).reshape(-1, 3)
    pos += 1 + n
    nc = int(lines[pos].split()[1])
    cells = [np.array([int(x) for x in ln.split()[1:]]) for ln in lines[pos + 1 : pos + 1 + nc]]
    pos += 1 + nc
    types = np.array([int(x) for x in lines[pos + 1 : pos + 1 + nc]])
    pos += 1 + nc
    point_data, cell_data = {}, {}
    target, count = None, 0
    while pos < len(lines):
        tok = lines[pos].split()
        if not tok:
            pos += 1
            continue
        if tok[0] in ("POINT_DATA", "CELL_DATA"):
            target = point_data if tok[0] == "POINT_DATA" else cell_data
            count = int(tok[1])
            pos += 1
        elif tok[0] == "SCALARS":
            vals = np.array([float(x) for x in lines[pos + 2 : pos + 2 + count]])
            target[tok[1]] = vals
            pos += 2 + count
        elif tok[0] == "VECTORS":
            vals = np.array([[float(x) for x in ln.split()] for ln in lines[pos + 1 : pos + 1 + count]]).reshape(-1, 3)
            target[tok[1]] = vals
            pos += 1 + count
        else:
            raise FormatError(f"unexpected VTK line {lines[pos]!r}")
    return UnstructuredGrid(pts, cells, types, point_data, cell_data, title)


def hex_mesh_grid(mesh, point_data=None, cell_data=None) -> UnstructuredGrid:
    return UnstructuredGrid(
        mesh.vertices, list(mesh.cells), np.full(len(mesh.cells), VTK_HEXAHEDRON), point_data or {}, cell_data or {}
    )


def beam_grid(nodes, elements, point_data=None, cell_data=None) -> UnstructuredGrid:
    elements = np.asarray(elements)
    return UnstructuredGrid(np.asarray(nodes), list(elements), np.full(len(elements), VTK_LINE), point_data or {}, cell_data or {})


def write_vtk(target, grid: UnstructuredGrid):
    _write_text(target, grid_to_vtk(grid))


def read_vtk(source) -> UnstructuredGrid:
    return vtk_to_grid(_read_text(source))


# ---------------------------------------------------------------------------
# triangle meshes and point clouds


def obj_to_text(vertices, faces) -> str:
    lines = ["v " + _join(v) for v in np.asarray(vertices)]
    lines += ["f " + " ".join(str(int(i) + 1) for i in f) for f in np.asarray(faces)]
    return "\n".join(lines) + "\n"


def obj_from_text(text: str) -> tuple[np.ndarray, np.ndarray]:
    verts, faces = [], []
    for line in text.splitlines():
        tok = line.split()
        if not tok or tok[0].startswith("#"):
            continue
        if tok[0] == "v":
            verts.append([float(x) for x in tok[1:4]])
        elif tok[0] == "f":
            faces.append([int(x.split("/")[0]) - 1 for x in tok[1:4]])
    return np.array(verts).reshape(-1, 3), np.array(faces, dtype=int).reshape(-1, 3)


def write_obj(target, vertices, faces):
    _write_text(target, obj_to_text(vertices, faces))


def read_obj(source):
    return obj_from_text(_read_text(source))


def cloud_to_text(points, normals=None) -> str:
    pts = np.asarray(points)
    if normals is None:
        return "".join(_join(p) + "\n" for p in pts)
    return "".join(_join(np.r_[p, n]) + "\n" for p, n in zip(pts, np.asarray(normals)))


def cloud_from_text(text: str) -> tuple[np.ndarray, np.ndarray | None]:
    rows = [[float(x) for x in ln.split()] for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not rows:
        return np.zeros((0, 3)), None
    widths = {len(r) for r in rows}
    if widths == {3}:
        return np.array(rows), None
    if widths == {6}:
        arr = np.array(rows)
        return arr[:, :3], arr[:, 3:]
    raise FormatError("point cloud lines must all have 3 or 6 values")


def write_cloud(target, points, normals=None):
    _write_text(target, cloud_to_text(points, normals))


def read_cloud(source):
    return cloud_from_text(_read_text(source))


def write_json(target, data: dict):
    _write_text(target, json.dumps(data, indent=2, sort_keys=True) + "\n")


def read_json(source) -> dict:
    return json.loads(_read_text(source))


def text_buffer(text: str = "") -> TextIO:
    return _io.StringIO(text)
