"""Parametric micro-tiles in the unit cube.

Solid tiles (axis cross, diagonal cross) are unions of spline volumes that map
[0,1]^3 into the unit cube. The auxetic double-V cell is a beam graph.
Arms that reach a cube face do so at the face centre and along the face
normal, so neighbouring tiles join with matching position and tangent after
any smooth deformation.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

import numpy as np

from .splines import KnotVector, SplineVolume, TensorSpline, trilinear_box

FACES = ("x0", "x1", "y0", "y1", "z0", "z1")
FACE_ALIASES = {
    "left": "x0", "right": "x1", "front": "y0", "back": "y1", "bottom": "z0", "top": "z1",
}

# conventional thicknesses for the thin (MS1*) and thick (MS2*) diagonal tiles
THIN = 0.15
THICK = 0.30
DIAGONAL_STUB = 0.3


class TileKind(str, enum.Enum):
    CROSS_AXIS = "cross_axis"
    CROSS_DIAGONAL = "cross_diagonal"
    AUXETIC_DOUBLE_V = "auxetic_double_v"


class TileParameterError(ValueError):
    pass


def face_axis_side(face: str) -> tuple[int, int]:
    face = FACE_ALIASES.get(face, face)
    if face not in FACES:
        raise TileParameterError(f"unknown face {face!r}")
    return "xyz".index(face[0]), int(face[1])


def face_normal(face: str) -> np.ndarray:
    """Inward unit normal of a cube face."""
    axis, side = face_axis_side(face)
    n = np.zeros(3)
    n[axis] = 1.0 if side == 0 else -1.0
    return n


def face_center(face: str) -> np.ndarray:
    axis, side = face_axis_side(face)
    c = np.full(3, 0.5)
    c[axis] = float(side)
    return c


@dataclass(frozen=True)
class TileSpec:
    kind: TileKind
    arm_thickness: float = THIN
    roundness: float = 0.0
    skin_thickness: float = 0.0
    attach_faces: frozenset = frozenset()
    strut_radius: float = 0.2e-3
    reentrant_angle: float = 60.0
    include_vertical_strut: bool = True
    # per-face arm thickness overrides, used by grading
    face_thickness: Mapping[str, float] | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", TileKind(self.kind))
        faces = frozenset(FACE_ALIASES.get(f, f) for f in self.attach_faces)
        for f in faces:
            face_axis_side(f)
        object.__setattr__(self, "attach_faces", faces)
        self.validate()

    def validate(self):
        errors = []
        if not 0.0 < self.arm_thickness < 0.5:
            errors.append(f"arm_thickness {self.arm_thickness} outside (0, 0.5)")
        if not 0.0 <= self.roundness <= 1.0:
            errors.append(f"roundness {self.roundness} outside [0, 1]")
        if not 0.0 <= self.skin_thickness <= 0.25:
            errors.append(f"skin_thickness {self.skin_thickness} outside [0, 0.25]")
        if not 0.0 < self.reentrant_angle < 90.0:
            errors.append(f"reentrant_angle {self.reentrant_angle} outside (0, 90)")
        if self.kind is TileKind.AUXETIC_DOUBLE_V:
            if not self.strut_radius > 0:
                errors.append("strut_radius must be positive")
            if 0.5 * np.tan(np.radians(self.reentrant_angle)) >= 0.95:
                errors.append(f"reentrant_angle {self.reentrant_angle} too steep for a unit cell")
        for f, t in (self.face_thickness or {}).items():
            face_axis_side(f)
            if not 0.0 < t < 0.5:
                errors.append(f"face thickness {t} on {f} outside (0, 0.5)")
        if errors:
            raise TileParameterError("; ".join(errors))

    def thickness_on(self, face: str) -> float:
        ft = self.face_thickness or {}
        return ft.get(face, self.arm_thickness)

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind.value,
            "arm_thickness": self.arm_thickness,
            "roundness": self.roundness,
            "skin_thickness": self.skin_thickness,
            "attach_faces": sorted(self.attach_faces),
            "strut_radius": self.strut_radius,
            "reentrant_angle": self.reentrant_angle,
            "include_vertical_strut": self.include_vertical_strut,
        }
        if self.face_thickness:
            out["face_thickness"] = dict(sorted(self.face_thickness.items()))
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "TileSpec":
        data = dict(data)
        if "attach_faces" in data:
            data["attach_faces"] = frozenset(data["attach_faces"])
        return cls(**data)


@dataclass
class BeamGraph:
    nodes: np.ndarray
    edges: np.ndarray
    radii: np.ndarray

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float).reshape(-1, 3)
        self.edges = np.asarray(self.edges, dtype=int).reshape(-1, 2)
        self.radii = np.asarray(self.radii, dtype=float).reshape(-1)
        if self.radii.size != len(self.edges):
            raise ValueError("one radius per edge is required")
        if self.edges.size:
            if self.edges.min() < 0 or self.edges.max() >= len(self.nodes):
                raise ValueError("edge references a missing node")
            if np.any(self.edges[:, 0] == self.edges[:, 1]):
                raise ValueError("self-loop edge")
            if np.any(self.lengths() <= 0):
                raise ValueError("zero-length edge")
        if np.any(self.radii <= 0):
            raise ValueError("edge radii must be positive")

    def lengths(self) -> np.ndarray:
        return np.linalg.norm(self.nodes[self.edges[:, 1]] - self.nodes[self.edges[:, 0]], axis=1)

    def volume(self) -> float:
        return float(np.sum(np.pi * self.radii**2 * self.lengths()))

    def mapped(self, fn) -> "BeamGraph":
        return BeamGraph(fn(self.nodes), self.edges.copy(), self.radii.copy())


@dataclass
class Strut:
    """Centre line of a solid-tile arm, for reduction to beams."""

    start: np.ndarray
    end: np.ndarray
    t_start: float
    t_end: float


@dataclass
class TileGeometry:
    spline_set: list[TensorSpline] | None = None
    cell_graph: BeamGraph | None = None
    labels: list[str] = field(default_factory=list)
    struts: list[Strut] = field(default_factory=list)
    spec: TileSpec | None = None

    def volume(self, order: int = 6) -> float:
        if self.cell_graph is not None:
            return self.cell_graph.volume()
        return sum(spline_volume(s, order) for s in self.spline_set)

    def mapped(self, fn) -> "TileGeometry":
        """Apply an affine map to every piece (exact on control points)."""
        return TileGeometry(
            spline_set=None if self.spline_set is None else [s.map_control(fn) for s in self.spline_set],
            cell_graph=None if self.cell_graph is None else self.cell_graph.mapped(fn),
            labels=list(self.labels),
            struts=[Strut(fn(s.start[None])[0], fn(s.end[None])[0], s.t_start, s.t_end) for s in self.struts],
            spec=self.spec,
        )


def spline_volume(vol: TensorSpline, order: int = 6) -> float:
    """Volume of the image of a trivariate by Gauss-Legendre on each knot span."""
    axes, wts = [], []
    g, gw = np.polynomial.legendre.leggauss(order)
    for kv in vol.knots:
        brk = np.unique(kv.knots)
        a, b = brk[:-1, None], brk[1:, None]
        axes.append((0.5 * (b - a) * g + 0.5 * (a + b)).ravel())
        wts.append((0.5 * (b - a) * gw).ravel())
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    w = np.einsum("i,j,k->ijk", *wts).ravel()
    det = np.linalg.det(vol.jacobian(grid))
    return float(np.sum(np.abs(det) * w))


# ---------------------------------------------------------------------------
# cross-section of arms

_LIN = KnotVector(1, [0, 0, 1, 1])
_QUAD = KnotVector(2, [0, 0, 0, 1, 1, 1])


def _section_net(half: float, roundness: float) -> tuple[np.ndarray, np.ndarray]:
    """3x3 rational net of a square of half-size ``half`` with rounded corners.

    roundness 0 gives the exact square, 1 the inscribed disk (exact circle).
    Returns in-plane coordinates (3, 3, 2) and weights (3, 3).
    """
    s2 = np.sqrt(2.0)
    corner = 1 - roundness + roundness / s2
    mid = 1 - roundness + roundness * s2
    w_mid = 1 - roundness + roundness / s2
    xs = np.array([-1.0, 0.0, 1.0])
    pts = np.zeros((3, 3, 2))
    for i in range(3):
        for j in range(3):
            if i != 1 and j != 1:
                pts[i, j] = corner * np.array([xs[i], xs[j]])
            elif i != 1:
                pts[i, j] = (mid * xs[i], 0.0)
            elif j != 1:
                pts[i, j] = (0.0, mid * xs[j])
    w1 = np.array([1.0, w_mid, 1.0])
    return half * pts, np.outer(w1, w1)


def _arm(start: np.ndarray, end: np.ndarray, e1: np.ndarray, e2: np.ndarray,
         t_start: float, t_end: float, roundness: float) -> SplineVolume:
    """Straight arm, linear along its axis, rounded-square section."""
    ctrl = np.zeros((2, 3, 3, 3))
    weights = None
    for a, (c, t) in enumerate(((start, t_start), (end, t_end))):
        sec, w = _section_net(0.5 * t, roundness)
        ctrl[a] = c + sec[..., :1] * e1 + sec[..., 1:] * e2
        weights = w
    if roundness == 0.0:
        return SplineVolume((_LIN, _QUAD, _QUAD), ctrl)
    return SplineVolume((_LIN, _QUAD, _QUAD), ctrl, np.stack([weights, weights]))


def _skin(face: str, thickness: float) -> SplineVolume:
    axis, side = face_axis_side(face)
    lo, hi = np.zeros(3), np.ones(3)
    if side == 0:
        hi[axis] = thickness
    else:
        lo[axis] = 1.0 - thickness
    return trilinear_box(lo, hi)


def _frame(axis: int) -> tuple[np.ndarray, np.ndarray]:
    e = np.eye(3)
    return e[(axis + 1) % 3], e[(axis + 2) % 3]


def make_cross_tile(spec: TileSpec) -> TileGeometry:
    """Hub cube plus six axis-parallel arms, each ending at a face centre."""
    if spec.kind is not TileKind.CROSS_AXIS:
        raise TileParameterError("make_cross_tile needs a CrossAxis spec")
    t_hub = spec.arm_thickness
    h = 0.5 * t_hub
    centre = np.full(3, 0.5)
    pieces = [trilinear_box(centre - h, centre + h)]
    labels = ["hub"]
    struts = []
    for face in FACES:
        axis, side = face_axis_side(face)
        n = -face_normal(face)  # outward
        e1, e2 = _frame(axis)
        start = centre + h * n
        end = face_center(face)
        if face in spec.attach_faces and spec.skin_thickness > 0:
            end = end - spec.skin_thickness * n
        t_face = spec.thickness_on(face)
        # orient so the arm parameter runs hub -> face and the map stays right-handed
        if side == 0:
            e1, e2 = e2, e1
        pieces.append(_arm(start, end, e1, e2, t_hub, t_face, spec.roundness))
        labels.append(f"arm:{face}")
        struts.append(Strut(centre.copy(), face_center(face), t_hub, t_face))
    for face in sorted(spec.attach_faces):
        if spec.skin_thickness > 0:
            pieces.append(_skin(face, spec.skin_thickness))
            labels.append(f"skin:{face}")
    return TileGeometry(spline_set=pieces, labels=labels, struts=struts, spec=spec)


# ---------------------------------------------------------------------------
# diagonal tile


def _adjacent_pairs() -> list[tuple[str, str]]:
    pairs = []
    for i, a in enumerate(FACES):
        for b in FACES[i + 1 :]:
            if a[0] != b[0]:
                pairs.append((a, b))
    return pairs


def _sweep(axis_pts: np.ndarray, frames: np.ndarray, knots: KnotVector, half: float) -> SplineVolume:
    """Square-section sweep: axis control points with in-plane frames (n, 2, 3)."""
    ctrl = np.zeros((len(axis_pts), 2, 2, 3))
    for i, p in enumerate(axis_pts):
        for j, a in enumerate((-half, half)):
            for k, b in enumerate((-half, half)):
                ctrl[i, j, k] = p + a * frames[i, 0] + b * frames[i, 1]
    return SplineVolume((knots, _LIN, _LIN), ctrl)


def _section_frame(tangent: np.ndarray, binormal: np.ndarray) -> np.ndarray:
    a = np.cross(binormal, tangent)
    return np.stack([a / np.linalg.norm(a), binormal])


def diagonal_blend_length(spec: TileSpec) -> float:
    diag = (0.5 - DIAGONAL_STUB) * np.sqrt(2.0)
    return min(spec.roundness * spec.arm_thickness, 0.9 * DIAGONAL_STUB - spec.skin_thickness, 0.45 * diag)


def make_diagonal_tile(spec: TileSpec) -> TileGeometry:
    """Six face stubs joined pairwise by diagonal struts.

    Each face gets a short arm along its normal ending at a kink point; the
    kink points of every two adjacent faces are joined by a straight strut.
    With ``roundness > 0`` each kink is replaced by a quadratic arc of extent
    ``roundness * arm_thickness`` (capped to fit), leaving the straight parts
    of every axis unchanged.
    """
    if spec.kind is not TileKind.CROSS_DIAGONAL:
        raise TileParameterError("make_diagonal_tile needs a CrossDiagonal spec")
    if spec.skin_thickness >= 0.9 * DIAGONAL_STUB:
        raise TileParameterError("skin too thick for the diagonal tile stubs")
    t = spec.arm_thickness
    half = 0.5 * t
    ell = diagonal_blend_length(spec) if spec.roundness > 0 else 0.0
    pieces, labels, struts = [], [], []
    kink = {f: face_center(f) + DIAGONAL_STUB * face_normal(f) for f in FACES}

    for face in FACES:
        axis, side = face_axis_side(face)
        n = face_normal(face)
        start = face_center(face)
        if face in spec.attach_faces and spec.skin_thickness > 0:
            start = start + spec.skin_thickness * n
        e1, e2 = _frame(axis)
        if side == 1:
            e1, e2 = e2, e1
        end = kink[face] - ell * n
        pieces.append(_arm(start, end, e1, e2, t, t, 0.0))
        labels.append(f"stub:{face}")
        if ell == 0.0:
            c = kink[face]
            pieces.append(trilinear_box(c - half, c + half))
            labels.append(f"joint:{face}")
        struts.append(Strut(face_center(face), kink[face].copy(), t, t))

    for a, b in _adjacent_pairs():
        na, nb = face_normal(a), face_normal(b)
        Sa, Sb = kink[a], kink[b]
        d = (Sb - Sa) / np.linalg.norm(Sb - Sa)
        binormal = np.cross(na, nb)
        if ell == 0.0:
            pts = np.array([Sa + (Sb - Sa) * s for s in (0.0, 1 / 3, 2 / 3, 1.0)])
            frames = np.array([_section_frame(d, binormal)] * 4)
            kv = KnotVector(2, [0, 0, 0, 0.5, 1, 1, 1])
        else:
            Q0, Q2 = Sa - ell * na, Sa + ell * d
            Q3, Q5 = Sb - ell * d, Sb - ell * nb
            pts = np.array([Q0, Sa, Q2, 0.5 * (Q2 + Q3), Q3, Sb, Q5])
            fa, fd, fb = (_section_frame(v, binormal) for v in (na, d, -nb))
            mitre_a = _mitre(fa, fd)
            mitre_b = _mitre(fd, fb)
            frames = np.array([fa, mitre_a, fd, fd, fd, mitre_b, fb])
            L = np.linalg.norm(Q3 - Q2)
            arc = ell * np.sqrt(2.0)
            total = 2 * arc + L
            k1, k2 = arc / total, (arc + L) / total
            kv = KnotVector(2, [0, 0, 0, k1, k1, k2, k2, 1, 1, 1])
        pieces.append(_sweep(pts, frames, kv, half))
        labels.append(f"diagonal:{a}-{b}")
        struts.append(Strut(Sa.copy(), Sb.copy(), t, t))

    for face in sorted(spec.attach_faces):
        if spec.skin_thickness > 0:
            pieces.append(_skin(face, spec.skin_thickness))
            labels.append(f"skin:{face}")
    return TileGeometry(spline_set=pieces, labels=labels, struts=struts, spec=spec)


def _mitre(f_in: np.ndarray, f_out: np.ndarray) -> np.ndarray:
    a = f_in[0] + f_out[0]
    a /= np.linalg.norm(a)
    scale = 1.0 / np.dot(a, f_in[0])
    return np.stack([a * scale, f_in[1]])


def diagonal_axis_points(geom: TileGeometry, samples: int = 200) -> np.ndarray:
    """Sampled centre lines of a diagonal tile's stubs and struts."""
    out = []
    s = np.linspace(0, 1, samples)
    for piece, label in zip(geom.spline_set, geom.labels):
        if label.startswith("stub"):
            out.append(piece.evaluate(np.c_[s, np.full_like(s, 0.5), np.full_like(s, 0.5)]))
        elif label.startswith("diagonal"):
            out.append(piece.evaluate(np.c_[s, np.full_like(s, 0.5), np.full_like(s, 0.5)]))
    return np.concatenate(out)


# ---------------------------------------------------------------------------
# auxetic double-V cell


def double_v_heights(reentrant_angle: float) -> tuple[float, float]:
    """Heights of the side nodes and the inner V vertex in the unit cell."""
    z_side = 0.5 * np.tan(np.radians(reentrant_angle))
    return z_side, 0.5 * z_side


def make_auxetic_cell(spec: TileSpec) -> TileGeometry:
    """Re-entrant double-V cell as a beam graph in the unit cube (z = growth).

    Four outer V struts rise from the bottom-face centre to nodes on the four
    side faces; four inner V struts come back down from those side nodes to an
    inner vertex above the bottom node. A vertical tie joins the inner vertex
    to the top-face centre, which is the next cell's bottom node. The inner
    vertex is a hanging node (nothing below it); ``include_vertical_strut``
    adds a two-edge strut from the bottom node through a central node up to
    it.
    """
    if spec.kind is not TileKind.AUXETIC_DOUBLE_V:
        raise TileParameterError("make_auxetic_cell needs an AuxeticDoubleV spec")
    z_side, z_inner = double_v_heights(spec.reentrant_angle)
    nodes = [
        (0.5, 0.5, 0.0),  # 0 bottom (outer vertex)
        (0.5, 0.5, z_inner),  # 1 inner vertex
        (0.5, 0.5, 1.0),  # 2 top
        (0.0, 0.5, z_side),  # 3..6 side nodes
        (1.0, 0.5, z_side),
        (0.5, 0.0, z_side),
        (0.5, 1.0, z_side),
    ]
    edges = []
    for s in range(3, 7):
        edges.append((0, s))
        edges.append((s, 1))
    edges.append((1, 2))
    if spec.include_vertical_strut:
        nodes.append((0.5, 0.5, 0.5 * z_inner))
        edges += [(0, 7), (7, 1)]
    graph = BeamGraph(np.array(nodes), np.array(edges), np.full(len(edges), spec.strut_radius))
    return TileGeometry(cell_graph=graph, spec=spec)


def make_tile(spec: TileSpec) -> TileGeometry:
    return {
        TileKind.CROSS_AXIS: make_cross_tile,
        TileKind.CROSS_DIAGONAL: make_diagonal_tile,
        TileKind.AUXETIC_DOUBLE_V: make_auxetic_cell,
    }[spec.kind](spec)


# ---------------------------------------------------------------------------
# checks


@dataclass
class FaceCheck:
    face: str
    passed: bool
    contact: str  # "arm", "full", or "none"
    centroid_error: float = np.nan
    angle_error: float = np.nan


@dataclass
class InterfaceReport:
    faces: list[FaceCheck]

    @property
    def passed(self) -> bool:
        return all(f.passed for f in self.faces)

    def by_face(self) -> dict[str, FaceCheck]:
        return {f.face: f for f in self.faces}

    @property
    def max_centroid_error(self) -> float:
        errs = [f.centroid_error for f in self.faces if np.isfinite(f.centroid_error)]
        return max(errs) if errs else 0.0


def _boundary_patches(vol: TensorSpline):
    """Yield (param_axis, side) for the six parametric boundary faces."""
    for a in range(3):
        for side in (0, 1):
            yield a, side


def _on_plane(vol: TensorSpline, a: int, side: int, axis: int, value: float, tol: float) -> bool:
    ctrl = np.take(vol.control, 0 if side == 0 else -1, axis=a)
    return bool(np.all(np.abs(ctrl[..., axis] - value) <= tol))


def check_interface_compatibility(tile: TileGeometry, faces: Iterable[str] = FACES,
                                  pos_tol: float = 1e-6, angle_tol: float = 1e-6,
                                  order: int = 8) -> InterfaceReport:
    """Per-face check that arms meet faces at the centre and along the normal.

    A face fully covered by a piece (a skin slab) passes as ``full`` contact.
    """
    if tile.spline_set is None:
        raise ValueError("interface check needs a solid tile")
    g, gw = np.polynomial.legendre.leggauss(order)
    g = 0.5 * (g + 1)
    gw = 0.5 * gw
    results = []
    for face in faces:
        face = FACE_ALIASES.get(face, face)
        axis, side = face_axis_side(face)
        centre = face_center(face)
        normal = -face_normal(face)
        full = False
        area = 0.0
        moment = np.zeros(3)
        worst_angle = 0.0
        found = False
        for vol in tile.spline_set:
            for a, s in _boundary_patches(vol):
                if not _on_plane(vol, a, s, axis, float(side), 1e-12):
                    continue
                ctrl = np.take(vol.control, 0 if s == 0 else -1, axis=a)
                lo = ctrl.reshape(-1, 3).min(axis=0)
                hi = ctrl.reshape(-1, 3).max(axis=0)
                others = [b for b in range(3) if b != axis]
                spans = [lo[b] <= 1e-12 and hi[b] >= 1 - 1e-12 for b in others]
                if all(spans):
                    full = True
                    continue
                if any(spans):
                    # side strip of a skin slab on a neighbouring face
                    continue
                found = True
                pa = [b for b in range(3) if b != a]
                uu, vv = np.meshgrid(g, g, indexing="ij")
                params = np.zeros((uu.size, 3))
                params[:, a] = float(s)
                params[:, pa[0]] = uu.ravel()
                params[:, pa[1]] = vv.ravel()
                pts = vol.evaluate(params)
                jac = vol.jacobian(params)
                dA = np.linalg.norm(np.cross(jac[:, :, pa[0]], jac[:, :, pa[1]]), axis=1)
                w = dA * np.outer(gw, gw).ravel()
                area += w.sum()
                moment += (w[:, None] * pts).sum(axis=0)
                mid = np.full(3, 0.5)
                mid[a] = float(s)
                tangent = vol.jacobian(mid)[:, a]
                cosang = abs(np.dot(tangent, normal)) / np.linalg.norm(tangent)
                worst_angle = max(worst_angle, float(np.arccos(np.clip(cosang, -1.0, 1.0))))
        if not full and not found:
            near = _nearest_parallel_patch(tile.spline_set, axis, float(side))
            if near is not None:
                vol, a, s = near
                mid = np.full(3, 0.5)
                mid[a] = float(s)
                found = True
                area = 1.0
                moment = np.asarray(vol.evaluate(mid)).reshape(3)
                tangent = vol.jacobian(mid)[:, a]
                cosang = abs(np.dot(tangent, normal)) / np.linalg.norm(tangent)
                worst_angle = float(np.arccos(np.clip(cosang, -1.0, 1.0)))
        if full:
            results.append(FaceCheck(face, True, "full", 0.0, 0.0))
        elif found:
            err = float(np.linalg.norm(moment / area - centre))
            ok = err <= pos_tol and worst_angle <= angle_tol
            results.append(FaceCheck(face, ok, "arm", err, worst_angle))
        else:
            results.append(FaceCheck(face, False, "none"))
    return InterfaceReport(results)


def _nearest_parallel_patch(pieces, axis: int, value: float, reach: float = 0.25):
    """Planar boundary patch parallel to a cube face and closest to it, if within ``reach``."""
    best, best_d = None, reach
    for vol in pieces:
        for a, s in _boundary_patches(vol):
            ctrl = np.take(vol.control, 0 if s == 0 else -1, axis=a)[..., axis]
            if np.ptp(ctrl) > 1e-12:
                continue
            d = abs(float(ctrl.flat[0]) - value)
            if d < best_d:
                best, best_d = (vol, a, s), d
    return best


@dataclass
class PrintabilityReport:
    violations: list[tuple[int, float]]  # (edge index, angle in degrees)
    hanging_nodes: list[int]
    max_angle: float

    @property
    def passed(self) -> bool:
        return not self.violations and not self.hanging_nodes


def edge_angles(graph: BeamGraph, growth_direction) -> np.ndarray:
    """Angle of each edge from the growth direction, folded to [0, 90] degrees."""
    g = np.asarray(growth_direction, dtype=float)
    n = np.linalg.norm(g)
    if n == 0:
        raise TileParameterError("growth direction must be nonzero")
    g = g / n
    d = graph.nodes[graph.edges[:, 1]] - graph.nodes[graph.edges[:, 0]]
    c = np.abs(d @ g) / np.linalg.norm(d, axis=1)
    return np.degrees(np.arccos(np.clip(c, 0.0, 1.0)))


def hanging_nodes(graph: BeamGraph, growth_direction, tol: float = 1e-9) -> list[int]:
    """Nodes above the build plate with no incident edge reaching below them."""
    g = np.asarray(growth_direction, dtype=float)
    g = g / np.linalg.norm(g)
    h = graph.nodes @ g
    base = h.min()
    supported = np.zeros(len(graph.nodes), dtype=bool)
    supported[h <= base + tol] = True
    i, j = graph.edges[:, 0], graph.edges[:, 1]
    supported[i[h[j] < h[i] - tol]] = True
    supported[j[h[i] < h[j] - tol]] = True
    used = np.zeros(len(graph.nodes), dtype=bool)
    used[graph.edges.ravel()] = True
    return np.flatnonzero(used & ~supported).tolist()


def check_printability(graph: BeamGraph, growth_direction=(0.0, 0.0, 1.0), max_angle: float = 60.0) -> PrintabilityReport:
    """Flag edges steeper than ``max_angle`` from the growth direction and hanging nodes."""
    if not 0.0 < max_angle <= 90.0:
        raise TileParameterError("max_angle must lie in (0, 90]")
    ang = edge_angles(graph, growth_direction)
    bad = [(int(e), float(ang[e])) for e in np.flatnonzero(ang > max_angle)]
    return PrintabilityReport(bad, hanging_nodes(graph, growth_direction), max_angle)


def mirrored(graph: BeamGraph, axis: int) -> BeamGraph:
    nodes = graph.nodes.copy()
    nodes[:, axis] = 1.0 - nodes[:, axis]
    return BeamGraph(nodes, graph.edges.copy(), graph.radii.copy())


def with_thickness(spec: TileSpec, thickness: float, faces: Mapping[str, float] | None = None) -> TileSpec:
    return replace(spec, arm_thickness=thickness, face_thickness=dict(faces) if faces else None)
