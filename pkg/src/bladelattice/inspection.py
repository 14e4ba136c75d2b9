"""Signed deviation of measured points from a nominal triangle mesh."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

LEAF_SIZE = 8


class InspectionError(ValueError):
    pass


@dataclass
class PointCloud:
    points: np.ndarray
    normals: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(self.points)):
            raise InspectionError("point cloud has non-finite coordinates")
        if self.normals is not None:
            self.normals = np.asarray(self.normals, dtype=float).reshape(-1, 3)
            if len(self.normals) != len(self.points):
                raise InspectionError("one normal per point is required")

    def __len__(self):
        return len(self.points)

    def transformed(self, rotation, translation) -> "PointCloud":
        R = np.asarray(rotation, float)
        t = np.asarray(translation, float)
        n = None if self.normals is None else self.normals @ R.T
        return PointCloud(self.points @ R.T + t, n)


@dataclass
class TriangleMesh:
    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=int).reshape(-1, 3)
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= len(self.vertices)):
            raise InspectionError("face references a missing vertex")

    def triangles(self) -> np.ndarray:
        return self.vertices[self.faces]

    def areas(self) -> np.ndarray:
        t = self.triangles()
        return 0.5 * np.linalg.norm(np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0]), axis=1)

    def face_normals(self) -> np.ndarray:
        t = self.triangles()
        n = np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0])
        length = np.linalg.norm(n, axis=1)
        return n / np.where(length > 0, length, 1.0)[:, None]

    def transformed(self, rotation, translation) -> "TriangleMesh":
        return TriangleMesh(self.vertices @ np.asarray(rotation, float).T + np.asarray(translation, float), self.faces)

    @staticmethod
    def concatenate(meshes) -> "TriangleMesh":
        verts, faces, base = [], [], 0
        for m in meshes:
            verts.append(m.vertices)
            faces.append(m.faces + base)
            base += len(m.vertices)
        return TriangleMesh(np.concatenate(verts), np.concatenate(faces))


# ---------------------------------------------------------------------------
# sampling


def _as_mesh(geometry, resolution: int) -> TriangleMesh:
    from .lattice import LatticeModel, lattice_surface, tessellate_boundary, tessellate_surface
    from .splines import TensorSpline

    if isinstance(geometry, TriangleMesh):
        return geometry
    if isinstance(geometry, LatticeModel):
        return TriangleMesh(*lattice_surface(geometry, resolution))
    if isinstance(geometry, TensorSpline):
        geometry = [geometry]
    meshes = []
    for g in geometry:
        if len(g.knots) == 3:
            meshes.append(TriangleMesh(*tessellate_boundary(g, resolution)))
        elif len(g.knots) == 2:
            meshes.append(TriangleMesh(*tessellate_surface(g, resolution)))
        else:
            raise InspectionError("cannot tessellate a curve")
    if not meshes:
        raise InspectionError("empty geometry")
    return TriangleMesh.concatenate(meshes)


def sample_nominal(geometry, density: float, seed: int = 0, resolution: int = 16) -> tuple[TriangleMesh, PointCloud]:
    """Tessellate ``geometry`` and draw area-uniform points on it.

    ``density`` is points per unit length, so the count is
    ``round(density**2 * area)``. Each point carries its facet normal.
    """
    if not density > 0:
        raise InspectionError("density must be positive")
    mesh = _as_mesh(geometry, resolution)
    if len(mesh.faces) == 0:
        raise InspectionError("empty geometry")
    areas = mesh.areas()
    total = areas.sum()
    if total <= 0:
        raise InspectionError("geometry has zero area")
    count = int(round(density**2 * total))
    rng = np.random.default_rng(seed)
    tri = rng.choice(len(areas), size=count, p=areas / total)
    r1, r2 = rng.random(count), rng.random(count)
    s = np.sqrt(r1)
    w = np.c_[1 - s, s * (1 - r2), s * r2]
    t = mesh.triangles()[tri]
    pts = np.einsum("ni,nij->nj", w, t)
    return mesh, PointCloud(pts, mesh.face_normals()[tri])


# ---------------------------------------------------------------------------
# exact point-triangle distance

# feature codes of the closest point
FACE, EDGE_AB, EDGE_BC, EDGE_CA, VERT_A, VERT_B, VERT_C = range(7)


def closest_points(p: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Closest point on triangles (a, b, c) to points p, with its feature code.

    Region tests follow the Voronoi-region classification of the triangle.
    All inputs have shape (n, 3).
    """
    ab, ac, ap = b - a, c - a, p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    n = len(p)
    out = np.empty((n, 3))
    code = np.full(n, -1)
    todo = np.ones(n, dtype=bool)

    def assign(mask, point, feature):
        nonlocal todo
        m = mask & todo
        out[m] = point[m] if point.ndim == 2 else point
        code[m] = feature
        todo = todo & ~m

    with np.errstate(divide="ignore", invalid="ignore"):
        assign((d1 <= 0) & (d2 <= 0), a, VERT_A)
        assign((d3 >= 0) & (d4 <= d3), b, VERT_B)
        assign((d6 >= 0) & (d5 <= d6), c, VERT_C)
        v = d1 / (d1 - d3)
        assign((vc <= 0) & (d1 >= 0) & (d3 <= 0), a + v[:, None] * ab, EDGE_AB)
        w = d2 / (d2 - d6)
        assign((vb <= 0) & (d2 >= 0) & (d6 <= 0), a + w[:, None] * ac, EDGE_CA)
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        assign((va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0), b + w[:, None] * (c - b), EDGE_BC)
        denom = 1.0 / (va + vb + vc)
        v = vb * denom
        w = vc * denom
        assign(np.ones(n, dtype=bool), a + v[:, None] * ab + w[:, None] * ac, FACE)
    return out, code


# ---------------------------------------------------------------------------
# bounding-volume hierarchy


@dataclass
class BVH:
    lo: np.ndarray  # (nodes, 3)
    hi: np.ndarray
    left: np.ndarray  # child index or -1 for leaves
    right: np.ndarray
    start: np.ndarray  # leaf triangle range in ``order``
    stop: np.ndarray
    order: np.ndarray

    @classmethod
    def build(cls, tris: np.ndarray, leaf_size: int = LEAF_SIZE) -> "BVH":
        tmin, tmax = tris.min(axis=1), tris.max(axis=1)
        cent = tris.mean(axis=1)
        order = np.arange(len(tris))
        lo, hi, left, right, start, stop = [], [], [], [], [], []
        stack = [(0, len(tris), -1, 0)]
        while stack:
            s, e, parent, side = stack.pop()
            idx = len(lo)
            ids = order[s:e]
            lo.append(tmin[ids].min(axis=0))
            hi.append(tmax[ids].max(axis=0))
            left.append(-1)
            right.append(-1)
            start.append(s)
            stop.append(e)
            if parent >= 0:
                (left if side == 0 else right)[parent] = idx
            if e - s <= leaf_size:
                continue
            ext = np.ptp(cent[ids], axis=0)
            axis = int(np.argmax(ext))
            srt = ids[np.argsort(cent[ids, axis], kind="stable")]
            order[s:e] = srt
            mid = (s + e) // 2
            stack.append((mid, e, idx, 1))
            stack.append((s, mid, idx, 0))
        return cls(np.array(lo), np.array(hi), np.array(left), np.array(right), np.array(start), np.array(stop), order)


def _weld(vertices: np.ndarray, tol: float) -> np.ndarray:
    """Map each vertex to the lowest-index vertex within ``tol`` (patch seams)."""
    rep = np.arange(len(vertices))
    for i, j in sorted(cKDTree(vertices).query_pairs(tol)):
        rep[j] = min(rep[j], rep[i])
    for k in range(len(rep)):
        rep[k] = rep[rep[k]]
    return rep


def _box_dist2(p, lo, hi):
    d = np.maximum(np.maximum(lo - p, p - hi), 0.0)
    return np.einsum("ij,ij->i", d, d)


class DistanceIndex:
    """Nearest-triangle queries with exact distances and pseudo-normal signs."""

    def __init__(self, mesh: TriangleMesh):
        areas = mesh.areas()
        scale = max(np.ptp(mesh.vertices, axis=0).max(), 1e-300) if len(mesh.vertices) else 1.0
        good = areas > 1e-14 * scale**2
        if not np.all(good):
            warnings.warn(f"skipping {np.count_nonzero(~good)} degenerate triangles")
        if not np.any(good):
            raise InspectionError("nominal mesh has no valid triangles")
        self.mesh = mesh
        self.faces = _weld(mesh.vertices, 1e-12 * scale)[mesh.faces[good]]
        self.tris = mesh.vertices[self.faces]
        self.bvh = BVH.build(self.tris)
        self._centroids = cKDTree(self.tris.mean(axis=1))
        self._pseudo_normals()

    def _pseudo_normals(self):
        t = self.tris
        n = np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0])
        n /= np.linalg.norm(n, axis=1)[:, None]
        self.face_n = n
        # angle-weighted vertex normals
        vn = np.zeros((len(self.mesh.vertices), 3))
        for k in range(3):
            e1 = t[:, (k + 1) % 3] - t[:, k]
            e2 = t[:, (k + 2) % 3] - t[:, k]
            cosang = np.einsum("ij,ij->i", e1, e2) / (np.linalg.norm(e1, axis=1) * np.linalg.norm(e2, axis=1))
            ang = np.arccos(np.clip(cosang, -1, 1))
            np.add.at(vn, self.faces[:, k], ang[:, None] * n)
        self.vertex_n = vn
        # edge normals: sum of the adjacent face normals
        edges = np.sort(np.stack([self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]], axis=1), axis=2)
        flat = edges.reshape(-1, 2)
        uniq, inv = np.unique(flat, axis=0, return_inverse=True)
        en = np.zeros((len(uniq), 3))
        np.add.at(en, inv.ravel(), np.repeat(n, 3, axis=0))
        self.edge_n = en[inv.ravel()].reshape(-1, 3, 3)  # per face, per edge (ab, bc, ca)

    def _exact(self, pts, tri_ids):
        t = self.tris[tri_ids]
        cp, code = closest_points(pts, t[:, 0], t[:, 1], t[:, 2])
        d2 = np.einsum("ij,ij->i", pts - cp, pts - cp)
        return d2, cp, code

    def query(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Unsigned distance, closest triangle, closest point and feature code."""
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        n = len(pts)
        _, near = self._centroids.query(pts)
        best_d2, _, _ = self._exact(pts, near)
        best = near.copy()
        bvh = self.bvh
        pidx = np.arange(n)
        node = np.zeros(n, dtype=int)
        while pidx.size:
            d2box = _box_dist2(pts[pidx], bvh.lo[node], bvh.hi[node])
            keep = d2box <= best_d2[pidx]
            pidx, node = pidx[keep], node[keep]
            leaf = bvh.left[node] < 0
            if np.any(leaf):
                lp, ln = pidx[leaf], node[leaf]
                counts = bvh.stop[ln] - bvh.start[ln]
                rp = np.repeat(lp, counts)
                offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
                rt = bvh.order[np.repeat(bvh.start[ln], counts) + offs]
                d2, _, _ = self._exact(pts[rp], rt)
                # best per point: lexicographic on (distance, triangle id) for determinism
                srt = np.lexsort((rt, d2, rp))
                rp, rt, d2 = rp[srt], rt[srt], d2[srt]
                first = np.r_[True, rp[1:] != rp[:-1]]
                rp, rt, d2 = rp[first], rt[first], d2[first]
                better = (d2 < best_d2[rp]) | ((d2 == best_d2[rp]) & (rt < best[rp]))
                best_d2[rp[better]] = d2[better]
                best[rp[better]] = rt[better]
            inner = ~leaf
            ip, inode = pidx[inner], node[inner]
            pidx = np.concatenate([ip, ip])
            node = np.concatenate([bvh.left[inode], bvh.right[inode]])
        d2, cp, code = self._exact(pts, best)
        return np.sqrt(d2), best, cp, code

    def brute_force(self, points: np.ndarray) -> np.ndarray:
        """Unsigned distance by scanning all triangles (reference for small meshes)."""
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        out = np.empty(len(pts))
        m = len(self.tris)
        for i, p in enumerate(pts):
            d2, _, _ = self._exact(np.repeat(p[None], m, axis=0), np.arange(m))
            out[i] = np.sqrt(d2.min())
        return out

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        dist, tri, cp, code = self.query(pts)
        normal = np.empty((len(pts), 3))
        f = code == FACE
        normal[f] = self.face_n[tri[f]]
        for k, c in enumerate((EDGE_AB, EDGE_BC, EDGE_CA)):
            m = code == c
            normal[m] = self.edge_n[tri[m], k]
        for k, c in enumerate((VERT_A, VERT_B, VERT_C)):
            m = code == c
            normal[m] = self.vertex_n[self.faces[tri[m], k]]
        side = np.einsum("ij,ij->i", pts - cp, normal)
        return np.where(side < 0, -dist, dist)


# ---------------------------------------------------------------------------
# reports


@dataclass
class DeviationReport:
    distances: np.ndarray
    bin_edges: np.ndarray
    counts: np.ndarray

    @property
    def min(self) -> float:
        return float(self.distances.min())

    @property
    def max(self) -> float:
        return float(self.distances.max())

    @property
    def mean(self) -> float:
        return float(self.distances.mean())

    @property
    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.distances**2)))

    def fraction_within(self, band: float) -> float:
        return float(np.mean(np.abs(self.distances) <= band))

    def stats(self) -> dict:
        return {"count": int(self.distances.size), "min": self.min, "max": self.max, "mean": self.mean, "rms": self.rms}

    def to_dict(self) -> dict:
        return {**self.stats(), "bin_edges": self.bin_edges.tolist(), "counts": self.counts.tolist()}

    def histogram_table(self, sep: str = ",") -> str:
        lines = [sep.join(["bin_lo", "bin_hi", "count"])]
        for lo, hi, c in zip(self.bin_edges[:-1], self.bin_edges[1:], self.counts):
            lines.append(f"{lo:.17g}{sep}{hi:.17g}{sep}{int(c)}")
        return "\n".join(lines) + "\n"


def histogram(distances: np.ndarray, bins: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Uniform bins over [-max|d|, +max|d|]."""
    half = float(np.abs(distances).max()) if distances.size else 0.0
    if half == 0.0:
        half = 1e-12
    counts, edges = np.histogram(distances, bins=bins, range=(-half, half))
    return edges, counts


def deviation(measured: PointCloud, nominal: TriangleMesh | DistanceIndex, bins: int = 64) -> DeviationReport:
    """Signed distances (positive outside) of measured points to the nominal mesh."""
    if len(measured) == 0:
        raise InspectionError("measured point cloud is empty")
    index = nominal if isinstance(nominal, DistanceIndex) else DistanceIndex(nominal)
    d = index.signed_distance(measured.points)
    edges, counts = histogram(d, bins)
    return DeviationReport(d, edges, counts)


@dataclass
class Verdict:
    passed: bool
    fraction: float
    band: float
    required: float


def tolerance_verdict(report: DeviationReport, band: float, required_fraction: float = 0.95) -> Verdict:
    """Pass iff at least ``required_fraction`` of points lie within +-band."""
    if not band > 0:
        raise InspectionError("band must be positive")
    frac = report.fraction_within(band)
    return Verdict(frac >= required_fraction, frac, band, required_fraction)


def parse_length(text: str | float) -> float:
    """Length with optional unit suffix (m, mm, um, µm) in meters."""
    if isinstance(text, (int, float)):
        return float(text)
    s = text.strip().lower().replace("µ", "u")
    for suffix, factor in (("um", 1e-6), ("mm", 1e-3), ("m", 1.0)):
        if s.endswith(suffix):
            return float(s[: -len(suffix)]) * factor
    return float(s)
