"""Graded lattices inside a macro volume.

Solid tiles are scaled into their parametric cell box and composed with the
macro; beam cells are embedded in the macro's hex cells by the trilinear map
of the cell corners. Both routes can be reduced to a beam model.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .beams import BeamModel, Material
from .splines import (
    ApproximationError,
    DegeneracyError,
    KnotVector,
    SplineSurface,
    SplineVolume,
    TensorSpline,
    approximate_offset,
    compose,
    trilinear_from_corners,
)
from .tiles import (
    FACES,
    BeamGraph,
    TileGeometry,
    TileKind,
    TileSpec,
    face_axis_side,
    make_tile,
)

# VTK hexahedron vertex order as (i, j, k) offsets
HEX_CORNERS = np.array(
    [(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0), (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)]
)


class LatticeError(ValueError):
    pass


# ---------------------------------------------------------------------------
# grading


@dataclass(frozen=True)
class ParameterField:
    """Scalar quadratic spline over [0,1]^3 grading thickness or radius.

    A direction with only two coefficients is linear.

    ``units`` is ``"fraction"`` (arm thickness as a fraction of the cell) or
    ``"m"`` (strut radius in meters).
    """

    spline: TensorSpline
    units: str = "fraction"

    def __post_init__(self):
        if self.spline.dim != 1 or len(self.spline.knots) != 3:
            raise ValueError("a parameter field is a scalar trivariate")
        if any(kv.degree != min(2, kv.n - 1) for kv in self.spline.knots):
            raise ValueError("a parameter field is quadratic (linear with two coefficients)")
        if self.units not in ("fraction", "m"):
            raise ValueError(f"unknown parameter-field units {self.units!r}")

    @classmethod
    def from_coefficients(cls, coefficients, units: str = "fraction") -> "ParameterField":
        c = np.asarray(coefficients, dtype=float)
        if c.ndim != 3 or min(c.shape) < 2:
            raise ValueError("coefficients must form a grid of at least 2 per direction")
        knots = tuple(KnotVector.clamped_uniform(n, min(2, n - 1)) for n in c.shape)
        return cls(SplineVolume(knots, c[..., None]), units)

    @classmethod
    def constant(cls, value: float, shape=(3, 3, 3), units: str = "fraction") -> "ParameterField":
        return cls.from_coefficients(np.full(shape, float(value)), units)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.spline.shape

    @property
    def coefficients(self) -> np.ndarray:
        return self.spline.control[..., 0].copy()

    def with_coefficients(self, coefficients) -> "ParameterField":
        c = np.asarray(coefficients, dtype=float).reshape(self.shape)
        return ParameterField(SplineVolume(self.spline.knots, c[..., None]), self.units)

    def __call__(self, params) -> np.ndarray:
        p = np.atleast_2d(np.asarray(params, dtype=float))
        return self.spline.evaluate(p)[:, 0]

    def basis(self, params) -> np.ndarray:
        """Matrix B with field(params) = B @ coefficients.ravel()."""
        p = np.atleast_2d(np.asarray(params, dtype=float))
        mats = [kv.basis_matrix(p[:, a]) for a, kv in enumerate(self.spline.knots)]
        return np.einsum("pi,pj,pk->pijk", *mats).reshape(len(p), -1)


@dataclass(frozen=True)
class StepField:
    """Piecewise-constant grading in bands along one parametric direction."""

    breaks: tuple
    values: tuple
    axis: int = 0
    units: str = "m"

    def __post_init__(self):
        if len(self.values) != len(self.breaks) + 1:
            raise ValueError("need one more value than break")
        if list(self.breaks) != sorted(self.breaks):
            raise ValueError("breaks must be increasing")

    def __call__(self, params) -> np.ndarray:
        p = np.atleast_2d(np.asarray(params, dtype=float))
        idx = np.searchsorted(np.asarray(self.breaks), p[:, self.axis], side="right")
        return np.asarray(self.values, dtype=float)[idx]


Grading = Callable[[np.ndarray], np.ndarray]


# ---------------------------------------------------------------------------
# hex mesh and cell boxes


@dataclass
class HexMesh:
    vertices: np.ndarray
    cells: np.ndarray  # (n, 8) in HEX_CORNERS order

    def cell_jacobian_dets(self) -> np.ndarray:
        """Determinant of each cell's trilinear map at its centre."""
        v = self.vertices[self.cells]
        dx = 0.25 * (v[:, 1] + v[:, 2] + v[:, 5] + v[:, 6] - v[:, 0] - v[:, 3] - v[:, 4] - v[:, 7])
        dy = 0.25 * (v[:, 2] + v[:, 3] + v[:, 6] + v[:, 7] - v[:, 0] - v[:, 1] - v[:, 4] - v[:, 5])
        dz = 0.25 * (v[:, 4] + v[:, 5] + v[:, 6] + v[:, 7] - v[:, 0] - v[:, 1] - v[:, 2] - v[:, 3])
        return np.einsum("ij,ij->i", dx, np.cross(dy, dz))


def _grid(resolution) -> tuple[int, int, int]:
    res = (int(resolution),) * 3 if np.isscalar(resolution) else tuple(int(r) for r in resolution)
    if len(res) != 3 or any(r < 1 for r in res):
        raise LatticeError(f"resolution must be three integers >= 1, got {resolution}")
    return res


def grid_params(grid) -> list[np.ndarray]:
    return [np.linspace(0.0, 1.0, n + 1) for n in _grid(grid)]


def hex_mesh(macro: TensorSpline, resolution) -> HexMesh:
    """Hexahedral mesh with vertices at a uniform parametric grid of the macro."""
    res = _grid(resolution)
    axes = [lo + (hi - lo) * t for (lo, hi), t in zip(macro.domain, grid_params(res))]
    # pointwise evaluation, not the grid contraction: vertices must equal eval_volume bitwise
    params = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    verts = macro.evaluate(params)
    shape = tuple(r + 1 for r in res)
    ii, jj, kk = np.meshgrid(*[np.arange(r) for r in res], indexing="ij")
    base = np.stack([ii.ravel(), jj.ravel(), kk.ravel()], axis=1)
    cells = np.zeros((len(base), 8), dtype=int)
    for c, off in enumerate(HEX_CORNERS):
        ijk = base + off
        cells[:, c] = np.ravel_multi_index(ijk.T, shape)
    mesh = HexMesh(verts, cells)
    centres = np.stack(
        [(ax[:-1] + ax[1:])[idx] / 2 for ax, idx in zip(axes, base.T)], axis=1
    )
    macro_det = np.linalg.det(macro.jacobian(centres))
    cell_det = mesh.cell_jacobian_dets()
    bad = np.flatnonzero((macro_det <= 0) | (cell_det <= 0))
    if bad.size:
        raise DegeneracyError(f"{bad.size} inverted hex cells, first at cell {tuple(base[bad[0]])}")
    return mesh


def cell_corners(mesh: HexMesh, cell: int) -> np.ndarray:
    """Corners of a hex cell in the i + 2j + 4k order."""
    v = mesh.vertices[mesh.cells[cell]]
    return v[[0, 1, 3, 2, 4, 5, 7, 6]]


def embed_beam_cell(corners, cell_graph: BeamGraph) -> BeamGraph:
    """Map a unit-cube beam graph into a cell by the trilinear corner map.

    Corners are ordered with index i + 2j + 4k for corner (i, j, k).
    """
    corners = np.asarray(corners, dtype=float).reshape(8, 3)
    vol = trilinear_from_corners(corners)
    det = np.linalg.det(vol.jacobian(np.array([0.5, 0.5, 0.5])))
    scale = np.ptp(corners, axis=0).max()
    if not det > 1e-12 * max(scale, 1e-300) ** 3:
        raise DegeneracyError("degenerate hex cell")
    return BeamGraph(vol.evaluate(cell_graph.nodes), cell_graph.edges.copy(), cell_graph.radii.copy())


# ---------------------------------------------------------------------------
# graph welding


class _UnionFind:
    def __init__(self, n):
        self.parent = np.arange(n)

    def find(self, i):
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, i, j):
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            self.parent[max(ri, rj)] = min(ri, rj)


@dataclass
class MergeResult:
    graph: BeamGraph
    dropped: list[tuple[int, int]]  # input edges (global input numbering) collapsed to a point
    node_map: np.ndarray  # input node -> merged node


def merge_graphs(graphs: Sequence[BeamGraph], weld_tolerance: float = 0.0) -> MergeResult:
    """Weld nodes closer than ``weld_tolerance`` and collapse duplicate edges.

    Merged nodes sit at the centroid of their cluster; duplicate edges keep
    the largest radius. Output nodes are sorted lexicographically and edges
    by node pair, so the result does not depend on input order.
    """
    if weld_tolerance < 0:
        raise ValueError("weld tolerance must be non-negative")
    graphs = [g for g in graphs if len(g.nodes)]
    if not graphs:
        return MergeResult(BeamGraph(np.zeros((0, 3)), np.zeros((0, 2), int), np.zeros(0)), [], np.zeros(0, int))
    nodes = np.concatenate([g.nodes for g in graphs])
    offsets = np.cumsum([0] + [len(g.nodes) for g in graphs])
    edges = np.concatenate([g.edges + o for g, o in zip(graphs, offsets[:-1])])
    radii = np.concatenate([g.radii for g in graphs])

    uf = _UnionFind(len(nodes))
    for i, j in cKDTree(nodes).query_pairs(weld_tolerance, output_type="ndarray"):
        uf.union(int(i), int(j))
    roots = np.array([uf.find(i) for i in range(len(nodes))])
    uniq, cluster = np.unique(roots, return_inverse=True)
    centroid = np.zeros((len(uniq), 3))
    np.add.at(centroid, cluster, nodes)
    centroid /= np.bincount(cluster)[:, None]

    order = np.lexsort(centroid.T[::-1])
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    node_map = rank[cluster]
    merged_nodes = centroid[order]

    e = node_map[edges]
    dropped = [tuple(int(x) for x in edges[k]) for k in np.flatnonzero(e[:, 0] == e[:, 1])]
    if dropped:
        warnings.warn(f"merge dropped {len(dropped)} edges that collapsed to a point")
    keep = e[:, 0] != e[:, 1]
    e = np.sort(e[keep], axis=1)
    r = radii[keep]
    if len(e):
        pairs, inv = np.unique(e, axis=0, return_inverse=True)
        rmax = np.zeros(len(pairs))
        np.maximum.at(rmax, inv.ravel(), r)
    else:
        pairs, rmax = np.zeros((0, 2), int), np.zeros(0)
    return MergeResult(BeamGraph(merged_nodes, pairs, rmax), dropped, node_map)


def canonical_graph(graph: BeamGraph) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Relabel-independent form: sorted nodes, sorted edges with radii."""
    res = merge_graphs([graph], 0.0)
    return res.graph.nodes, res.graph.edges, res.graph.radii


# ---------------------------------------------------------------------------
# lattice model


@dataclass
class Cell:
    index: tuple[int, int, int]
    lo: np.ndarray
    hi: np.ndarray
    spec: TileSpec
    tile: TileGeometry  # in the cell's parametric box
    composed: list[TensorSpline] | None = None
    graph: BeamGraph | None = None


@dataclass
class LatticeModel:
    macro: TensorSpline
    grid: tuple[int, int, int]
    spec: TileSpec
    cells: list[Cell]
    growth_axis: int = 0
    fit_size: int | None = None
    max_deviation: float = 0.0
    weld_tolerance: float = 0.0
    shell: tuple[SplineSurface, SplineSurface] | None = None
    beam_graph: BeamGraph | None = None

    @property
    def is_solid(self) -> bool:
        return self.spec.kind is not TileKind.AUXETIC_DOUBLE_V

    def cell(self, i, j, k) -> Cell:
        return self.cells[(i * self.grid[1] + j) * self.grid[2] + k]

    def pieces(self) -> list[TensorSpline]:
        return [p for c in self.cells for p in (c.composed or [])]

    def volume(self, order: int = 4) -> float:
        if self.is_solid:
            from .tiles import spline_volume

            return sum(spline_volume(p, order) for p in self.pieces())
        return self.beam_graph.volume()


def _cell_boxes(grid):
    edges = grid_params(grid)
    for i in range(grid[0]):
        for j in range(grid[1]):
            for k in range(grid[2]):
                idx = (i, j, k)
                lo = np.array([edges[a][idx[a]] for a in range(3)])
                hi = np.array([edges[a][idx[a] + 1] for a in range(3)])
                yield idx, lo, hi


def _check_macro(macro: TensorSpline, grid):
    centres = np.array([(lo + hi) / 2 for _, lo, hi in _cell_boxes(grid)])
    dom = np.array(macro.domain)
    params = dom[:, 0] + centres * (dom[:, 1] - dom[:, 0])
    det = np.linalg.det(macro.jacobian(params))
    if np.any(det <= 0):
        raise DegeneracyError(f"macro Jacobian non-positive at {np.count_nonzero(det <= 0)} cell centres")


def _to_macro_params(macro: TensorSpline, p: np.ndarray) -> np.ndarray:
    dom = np.array(macro.domain)
    return dom[:, 0] + np.asarray(p) * (dom[:, 1] - dom[:, 0])


def _cell_spec(spec: TileSpec, grading, lo, hi, grid_index, grid) -> TileSpec:
    """Per-cell tile spec: hub thickness at the centre, arms at face midpoints."""
    centre = (lo + hi) / 2
    boundary = set()
    for face in FACES:
        axis, side = face_axis_side(face)
        if grid_index[axis] == (0 if side == 0 else grid[axis] - 1):
            boundary.add(face)
    attach = frozenset(f for f in spec.attach_faces if f in boundary)
    if grading is None:
        return TileSpec(**{**spec.to_dict(), "attach_faces": attach})
    mids = []
    for face in FACES:
        axis, side = face_axis_side(face)
        m = centre.copy()
        m[axis] = hi[axis] if side else lo[axis]
        mids.append(m)
    vals = grading(np.vstack([centre] + mids))
    data = spec.to_dict()
    data.update(
        attach_faces=attach,
        arm_thickness=float(vals[0]),
        face_thickness={f: float(v) for f, v in zip(FACES, vals[1:])},
    )
    return TileSpec.from_dict(data)


def _box_map(lo, hi):
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    return lambda p: lo + np.asarray(p) * (hi - lo)


# beam cells: unit-cell axes (a, b, c) with c the growth axis, mapped onto macro axes
def _growth_permutation(growth_axis: int) -> list[int]:
    """Macro parametric axis receiving each unit-cell axis (cyclic, orientation preserving)."""
    return [(growth_axis + 1) % 3, (growth_axis + 2) % 3, growth_axis]


def _permute_unit(points: np.ndarray, growth_axis: int) -> np.ndarray:
    out = np.empty_like(points)
    out[:, _growth_permutation(growth_axis)] = points
    return out


def build_lattice(
    macro: TensorSpline,
    grid,
    tile_spec: TileSpec,
    grading: Grading | None = None,
    *,
    fit_size: int = 4,
    max_fit_size: int = 16,
    tolerance: float | None = None,
    growth_axis: int = 0,
    shell_face: str | None = None,
    shell_offset: float | None = None,
    compose_solids: bool = True,
    angle_tolerance: float = 1e-4,
) -> LatticeModel:
    """Fill the macro's parametric domain with graded tiles.

    Solid tiles are composed with the macro using one tri-cubic fit size for
    every piece so that shared faces of neighbouring cells match; the size
    grows for all pieces at once until every piece meets ``tolerance``
    (default 1e-3 of the macro bounding-box diagonal) and, for cross tiles,
    arm tangents across shared faces agree within ``angle_tolerance``
    radians. Beam cells are
    embedded in hex cells with the unit-cell growth axis along macro
    direction ``growth_axis``.
    """
    grid = _grid(grid)
    if macro.dim != 3 or len(macro.knots) != 3:
        raise LatticeError("macro must be a trivariate in 3-space")
    _check_macro(macro, grid)
    if tolerance is None:
        tolerance = 1e-3 * macro.bbox_diagonal()
    weld = 1e-6 * macro.bbox_diagonal()

    cells = []
    for idx, lo, hi in _cell_boxes(grid):
        if tile_spec.kind is TileKind.AUXETIC_DOUBLE_V:
            spec = tile_spec
            tile = make_tile(spec)
        else:
            spec = _cell_spec(tile_spec, grading, lo, hi, idx, grid)
            tile = make_tile(spec)
        cells.append(Cell(idx, lo, hi, spec, tile.mapped(_box_map(lo, hi))))

    model = LatticeModel(macro, grid, tile_spec, cells, growth_axis=growth_axis, weld_tolerance=weld)

    if tile_spec.kind is TileKind.AUXETIC_DOUBLE_V:
        mesh = hex_mesh(macro, grid)
        graphs = []
        for c, cell in enumerate(cells):
            unit = make_tile(cell.spec).cell_graph
            pnodes = _permute_unit(unit.nodes, growth_axis)
            radii = unit.radii.copy()
            if grading is not None:
                mids = 0.5 * (pnodes[unit.edges[:, 0]] + pnodes[unit.edges[:, 1]])
                radii = np.asarray(grading(cell.lo + mids * (cell.hi - cell.lo)), dtype=float)
                if np.any(radii <= 0):
                    raise LatticeError("grading produced a non-positive strut radius")
            unit = BeamGraph(pnodes, unit.edges, radii)
            cell.graph = embed_beam_cell(cell_corners(mesh, c), unit)
            graphs.append(cell.graph)
        merged = merge_graphs(graphs, weld)
        model.beam_graph = merged.graph
    elif compose_solids:
        size = fit_size
        while True:
            try:
                worst = 0.0
                for cell in cells:
                    cell.composed = []
                    for piece in cell.tile.spline_set:
                        inner = piece.map_control(lambda p: _to_macro_params(macro, p))
                        fitted, dev = compose(macro, inner, size, tolerance, max_size=size)
                        cell.composed.append(fitted)
                        worst = max(worst, dev)
                model.fit_size, model.max_deviation = size, worst
                if tile_spec.kind is not TileKind.CROSS_AXIS or size >= max_fit_size:
                    break
                if max((g.angle_gap for g in interface_gaps(model)), default=0.0) <= angle_tolerance:
                    break
            except ApproximationError:
                if size >= max_fit_size:
                    raise
            size = min(max_fit_size, size + max(1, size // 2))

    if shell_face is not None:
        model.shell = shell_surfaces(macro, shell_face, shell_offset or 0.0)
    return model


def boundary_surface(vol: TensorSpline, face: str) -> SplineSurface:
    """Boundary face of a trivariate as a surface, oriented with outward normal."""
    axis, side = face_axis_side(face)
    ctrl = np.take(vol.control, 0 if side == 0 else -1, axis=axis)
    w = None if vol.weights is None else np.take(vol.weights, 0 if side == 0 else -1, axis=axis)
    knots = [kv for a, kv in enumerate(vol.knots) if a != axis]
    # (b, c) cyclic after axis gives an outward normal on side 1
    if axis == 1:
        knots = knots[::-1]
        ctrl = np.swapaxes(ctrl, 0, 1)
        w = None if w is None else w.T
    if side == 0:
        knots = knots[::-1]
        ctrl = np.swapaxes(ctrl, 0, 1)
        w = None if w is None else w.T
    return SplineSurface(tuple(knots), ctrl, w)


def shell_surfaces(macro: TensorSpline, face: str, distance: float) -> tuple[SplineSurface, SplineSurface]:
    """Outer surface of the macro on ``face`` and its inward offset."""
    outer = boundary_surface(macro, face)
    if distance <= 0:
        return outer, outer
    inner, _ = approximate_offset(outer, -distance)
    return outer, inner


# ---------------------------------------------------------------------------
# interface checks on composed solids


@dataclass
class InterfaceGap:
    cells: tuple[tuple[int, int, int], tuple[int, int, int]]
    axis: int
    position_gap: float
    angle_gap: float


def _arm_index(cell: Cell, face: str) -> int:
    return cell.tile.labels.index(f"arm:{face}")


def interface_gaps(model: LatticeModel, samples: int = 7) -> list[InterfaceGap]:
    """Position and tangent mismatch across every shared face of a cross lattice.

    Position gap: largest distance between the two composed arm end faces at
    matching section parameters. Angle gap: largest angle among the two arm
    axis tangents and the image of the face normal under the macro, at the
    section centre.
    """
    if model.spec.kind is not TileKind.CROSS_AXIS or not model.cells[0].composed:
        raise LatticeError("interface gaps are defined for composed cross-tile lattices")
    g = np.linspace(0, 1, samples)
    uu, vv = np.meshgrid(g, g, indexing="ij")
    out = []
    for cell in model.cells:
        for axis in range(3):
            if cell.index[axis] + 1 >= model.grid[axis]:
                continue
            nidx = list(cell.index)
            nidx[axis] += 1
            other = model.cell(*nidx)
            face_a, face_b = "xyz"[axis] + "1", "xyz"[axis] + "0"
            A = cell.composed[_arm_index(cell, face_a)]
            B = other.composed[_arm_index(other, face_b)]
            # both arms run hub -> face; section frames of opposite faces are swapped
            pa = np.c_[np.ones(uu.size), uu.ravel(), vv.ravel()]
            pb = np.c_[np.ones(uu.size), vv.ravel(), uu.ravel()]
            gap = float(np.linalg.norm(A.evaluate(pa) - B.evaluate(pb), axis=1).max())
            ta = A.jacobian(np.array([1.0, 0.5, 0.5]))[:, 0]
            tb = -B.jacobian(np.array([1.0, 0.5, 0.5]))[:, 0]
            centre = (cell.lo + cell.hi) / 2
            centre[axis] = cell.hi[axis]
            normal = model.macro.jacobian(_to_macro_params(model.macro, centre))[:, axis]
            out.append(
                InterfaceGap(
                    (cell.index, tuple(nidx)),
                    axis,
                    gap,
                    max(_angle(ta, tb), _angle(ta, normal), _angle(tb, normal)),
                )
            )
    return out


def _angle(a, b) -> float:
    c = np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b))
    return float(np.arctan2(np.linalg.norm(np.cross(a, b)), np.dot(a, b))) if c < 1 else 0.0


# ---------------------------------------------------------------------------
# reduction to beams


@dataclass
class BeamLayout:
    """Strut-level beam discretisation of a lattice, independent of radii.

    Element e has thickness ``(1 - s_e) t(p0_e) + s_e t(p1_e)`` where ``t`` is
    the grading at the strut's two end parameters, and radius
    ``scale_e * thickness / sqrt(pi)`` (equal-area circle of a square arm).
    For beam cells the thickness columns hold radii and ``scale_e`` is
    ``sqrt(pi)``.
    """

    nodes: np.ndarray
    node_params: np.ndarray
    elements: np.ndarray
    p0: np.ndarray
    p1: np.ndarray
    s: np.ndarray
    scale: np.ndarray
    t0: np.ndarray  # ungraded end thicknesses
    t1: np.ndarray
    root: np.ndarray  # nodes on the clamped parametric face

    def thickness(self, grading: Grading | None = None) -> np.ndarray:
        if grading is None:
            t0, t1 = self.t0, self.t1
        else:
            t0, t1 = np.asarray(grading(self.p0)), np.asarray(grading(self.p1))
        return (1 - self.s) * t0 + self.s * t1

    def radii(self, grading: Grading | None = None) -> np.ndarray:
        return self.scale * self.thickness(grading) / np.sqrt(np.pi)

    def radius_matrix(self, field: ParameterField) -> np.ndarray:
        """Matrix D with radii = D @ field coefficients (linear in coefficients)."""
        B = (1 - self.s)[:, None] * field.basis(self.p0) + self.s[:, None] * field.basis(self.p1)
        return (self.scale / np.sqrt(np.pi))[:, None] * B

    def model(self, material: Material, radii=None, grading: Grading | None = None) -> BeamModel:
        r = self.radii(grading) if radii is None else radii
        return BeamModel(self.nodes, self.elements, r, material, self.root)


def _perpendicular_scale(jac_cell: np.ndarray, direction: np.ndarray) -> float:
    d = direction / np.linalg.norm(direction)
    a = np.eye(3)[np.argmin(np.abs(d))]
    p1 = np.cross(d, a)
    p1 /= np.linalg.norm(p1)
    p2 = np.cross(d, p1)
    return 0.5 * (np.linalg.norm(jac_cell @ p1) + np.linalg.norm(jac_cell @ p2))


def beam_layout(model: LatticeModel, elements_per_strut: int = 2, root_face: str | None = None) -> BeamLayout:
    """Subdivide every strut into beam elements with nodes on the macro image."""
    if elements_per_strut < 1:
        raise LatticeError("elements_per_strut must be at least 1")
    if not model.cells:
        raise LatticeError("empty lattice")
    if root_face is None:
        root_face = "xyz"[model.growth_axis] + "0"
    raxis, rside = face_axis_side(root_face)
    n = elements_per_strut
    s_nodes = np.linspace(0, 1, n + 1)
    s_mid = 0.5 * (s_nodes[:-1] + s_nodes[1:])
    params, elems, p0, p1, s_el, scale, t0, t1 = [], [], [], [], [], [], [], []
    count = 0
    for cell in model.cells:
        size = cell.hi - cell.lo
        if model.is_solid:
            struts = [(st.start, st.end, st.t_start, st.t_end) for st in cell.tile.struts]
        else:
            unit = make_tile(cell.spec).cell_graph
            pn = cell.lo + _permute_unit(unit.nodes, model.growth_axis) * size
            struts = [(pn[i], pn[j], r, r) for (i, j), r in zip(unit.edges, unit.radii)]
        for a, b, ta, tb in struts:
            pts = a + s_nodes[:, None] * (b - a)
            params.append(pts)
            local = np.arange(count, count + n + 1)
            elems.append(np.c_[local[:-1], local[1:]])
            count += n + 1
            p0.append(np.repeat(a[None], n, axis=0))
            p1.append(np.repeat(b[None], n, axis=0))
            s_el.append(s_mid)
            t0.append(np.full(n, ta))
            t1.append(np.full(n, tb))
            if model.is_solid:
                mids = a + s_mid[:, None] * (b - a)
                jac = model.macro.jacobian(_to_macro_params(model.macro, mids))
                dom = np.array(model.macro.domain)
                cell_jac = jac * (size * (dom[:, 1] - dom[:, 0]))[None, None, :]
                scale.append([_perpendicular_scale(J, b - a) for J in cell_jac])
            else:
                scale.append(np.full(n, np.sqrt(np.pi)))
    params = np.concatenate(params)
    elements = np.concatenate(elems)
    if model.is_solid:
        world = model.macro.evaluate(_to_macro_params(model.macro, params))
    else:
        world = _embed_params(model, params)
    weld = model.weld_tolerance
    merged = merge_graphs([BeamGraph(world, elements, np.ones(len(elements)))], weld)
    node_map = merged.node_map
    e = node_map[elements]
    keep = e[:, 0] != e[:, 1]
    nodes = merged.graph.nodes
    node_params = np.zeros((len(nodes), 3))
    node_params[node_map] = params
    on_root = np.isclose(node_params[:, raxis], float(rside), atol=1e-12)
    cat = np.concatenate
    return BeamLayout(
        nodes,
        node_params,
        e[keep],
        cat(p0)[keep],
        cat(p1)[keep],
        cat(s_el)[keep],
        cat(scale)[keep],
        cat(t0)[keep],
        cat(t1)[keep],
        np.flatnonzero(on_root),
    )


def _embed_params(model: LatticeModel, params: np.ndarray) -> np.ndarray:
    """World position of lattice-parameter points for beam cells (per-cell trilinear)."""
    grid = np.array(model.grid)
    idx = np.minimum((params * grid).astype(int), grid - 1)
    out = np.zeros_like(params)
    mesh = hex_mesh(model.macro, model.grid)
    flat = (idx[:, 0] * grid[1] + idx[:, 1]) * grid[2] + idx[:, 2]
    for c in np.unique(flat):
        sel = flat == c
        cell = model.cells[c]
        vol = trilinear_from_corners(cell_corners(mesh, c))
        out[sel] = vol.evaluate(np.clip((params[sel] - cell.lo) / (cell.hi - cell.lo), 0, 1))
    return out


def subdivide_graph(graph: BeamGraph, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split every edge into ``n`` elements; original node ids are kept.

    Returns nodes, elements and per-element radii.
    """
    if n < 1:
        raise LatticeError("elements per strut must be at least 1")
    nodes = [graph.nodes]
    elems, radii = [], []
    count = len(graph.nodes)
    s = np.linspace(0, 1, n + 1)[1:-1]
    for (i, j), r in zip(graph.edges, graph.radii):
        inner = graph.nodes[i] + s[:, None] * (graph.nodes[j] - graph.nodes[i])
        ids = np.r_[i, np.arange(count, count + len(inner)), j]
        nodes.append(inner)
        count += len(inner)
        elems.append(np.c_[ids[:-1], ids[1:]])
        radii.append(np.full(n, r))
    return np.concatenate(nodes), np.concatenate(elems), np.concatenate(radii)


def extract_beam_model(
    model: LatticeModel,
    elements_per_strut: int = 2,
    material: Material | None = None,
    grading: Grading | None = None,
    root_face: str | None = None,
) -> BeamModel:
    """Beam model of the lattice, clamped on the root parametric face.

    Solid arms become centre-line struts with equal-area circular sections;
    beam-cell edges keep their radii.
    """
    from .beams import INCONEL_718

    layout = beam_layout(model, elements_per_strut, root_face)
    if model.is_solid:
        radii = layout.radii(grading)
    else:
        radii = layout.thickness(grading)
    return layout.model(material or INCONEL_718, radii)


# ---------------------------------------------------------------------------
# tessellation


def tessellate_boundary(vol: TensorSpline, resolution: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Triangles on the six boundary faces of a trivariate, normals outward."""
    verts, faces = [], []
    base = 0
    g = np.linspace(0, 1, resolution + 1)
    for face in FACES:
        surf = boundary_surface(vol, face)
        axes = [lo + (hi - lo) * g for lo, hi in surf.domain]
        pts = surf.evaluate_grid(axes).reshape(-1, 3)
        tris = _grid_triangles(resolution, resolution) + base
        verts.append(pts)
        faces.append(tris)
        base += len(pts)
    return np.concatenate(verts), np.concatenate(faces)


def _grid_triangles(nu: int, nv: int) -> np.ndarray:
    i, j = np.meshgrid(np.arange(nu), np.arange(nv), indexing="ij")
    a = (i * (nv + 1) + j).ravel()
    b = a + nv + 1
    return np.concatenate([np.c_[a, b, b + 1], np.c_[a, b + 1, a + 1]])


def tessellate_surface(surf: TensorSpline, resolution: int = 16) -> tuple[np.ndarray, np.ndarray]:
    g = np.linspace(0, 1, resolution + 1)
    axes = [lo + (hi - lo) * g for lo, hi in surf.domain]
    return surf.evaluate_grid(axes).reshape(-1, 3), _grid_triangles(resolution, resolution)


def lattice_surface(model: LatticeModel, resolution: int = 6) -> tuple[np.ndarray, np.ndarray]:
    """Triangle soup of every composed piece's boundary."""
    verts, faces, base = [], [], 0
    for piece in model.pieces():
        v, f = tessellate_boundary(piece, resolution)
        verts.append(v)
        faces.append(f + base)
        base += len(v)
    if not verts:
        raise LatticeError("lattice has no composed solid pieces")
    return np.concatenate(verts), np.concatenate(faces)
