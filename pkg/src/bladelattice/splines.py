"""Tensor-product B-spline curves, surfaces and volumes.

Everything here works on clamped knot vectors. A single :class:`TensorSpline`
class covers any number of parametric directions; :class:`SplineSurface` and
:class:`SplineVolume` only pin the parametric dimension.

Fitting and composition are done by sampling on a tensor grid and solving a
separable least-squares problem, one direction at a time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class DomainError(ValueError):
    """Parameter outside the spline's parametric domain."""


class ApproximationError(RuntimeError):
    """A fit could not reach the requested tolerance."""

    def __init__(self, message: str, deviation: float):
        super().__init__(message)
        self.deviation = deviation


class DegeneracyError(ValueError):
    """Geometry is singular where a regular map was required."""


_DOMAIN_EPS = 1e-12


@dataclass(frozen=True)
class KnotVector:
    degree: int
    knots: np.ndarray

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        object.__setattr__(self, "knots", knots)
        p = self.degree
        if p < 0:
            raise ValueError("degree must be non-negative")
        if knots.ndim != 1 or knots.size < 2 * p + 2:
            raise ValueError(f"need at least {2 * p + 2} knots for degree {p}")
        if np.any(np.diff(knots) < 0):
            raise ValueError("knots must be non-decreasing")
        if np.any(knots[: p + 1] != knots[0]) or np.any(knots[-p - 1 :] != knots[-1]):
            raise ValueError("knot vector must be clamped")
        if knots[-1] <= knots[0]:
            raise ValueError("knot vector spans an empty domain")

    @classmethod
    def clamped_uniform(cls, n: int, degree: int, lo: float = 0.0, hi: float = 1.0) -> "KnotVector":
        """Open-uniform knots for ``n`` basis functions of ``degree`` on [lo, hi]."""
        if n < degree + 1:
            raise ValueError("need at least degree+1 basis functions")
        interior = np.linspace(lo, hi, n - degree + 1)[1:-1]
        knots = np.concatenate([np.full(degree + 1, lo), interior, np.full(degree + 1, hi)])
        return cls(degree, knots)

    @property
    def n(self) -> int:
        return self.knots.size - self.degree - 1

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.knots[self.degree]), float(self.knots[-self.degree - 1])

    def __eq__(self, other):
        return (
            isinstance(other, KnotVector)
            and self.degree == other.degree
            and np.array_equal(self.knots, other.knots)
        )

    def __hash__(self):
        return hash((self.degree, self.knots.tobytes()))

    def find_span(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        lo, hi = self.domain
        if np.any(u < lo - _DOMAIN_EPS) or np.any(u > hi + _DOMAIN_EPS):
            raise DomainError(f"parameter outside [{lo}, {hi}]")
        u = np.clip(u, lo, hi)
        span = np.searchsorted(self.knots, u, side="right") - 1
        return np.clip(span, self.degree, self.n - 1)

    def basis(self, u, deriv: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """Nonzero basis values at ``u``.

        Returns ``(first_index, values)`` where ``values[k, r]`` is basis
        function ``first_index[k] + r`` (or its first derivative if
        ``deriv == 1``) evaluated at ``u[k]``.
        """
        u = np.atleast_1d(np.asarray(u, dtype=float))
        span = self.find_span(u)
        u = np.clip(u, *self.domain)
        p = self.degree
        if deriv == 0:
            return span - p, _cox_de_boor(self.knots, p, span, u)
        if deriv != 1:
            raise ValueError("only first derivatives are supported")
        if p == 0:
            return span, np.zeros((u.size, 1))
        lower = _cox_de_boor(self.knots, p - 1, span, u)
        t = self.knots
        out = np.zeros((u.size, p + 1))
        for r in range(p + 1):
            k = span - p + r
            if r >= 1:
                out[:, r] += lower[:, r - 1] / (t[k + p] - t[k])
            if r <= p - 1:
                out[:, r] -= lower[:, r] / (t[k + p + 1] - t[k + 1])
        return span - p, p * out

    def basis_matrix(self, u, deriv: int = 0) -> np.ndarray:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        first, vals = self.basis(u, deriv)
        mat = np.zeros((u.size, self.n))
        rows = np.arange(u.size)[:, None]
        mat[rows, first[:, None] + np.arange(self.degree + 1)] = vals
        return mat


def _cox_de_boor(knots: np.ndarray, p: int, span: np.ndarray, u: np.ndarray) -> np.ndarray:
    n = u.size
    vals = np.ones((n, 1))
    left = np.zeros((n, p + 1))
    right = np.zeros((n, p + 1))
    for j in range(1, p + 1):
        left[:, j] = u - knots[span + 1 - j]
        right[:, j] = knots[span + j] - u
        new = np.zeros((n, j + 1))
        saved = np.zeros(n)
        for r in range(j):
            temp = vals[:, r] / (right[:, r + 1] + left[:, j - r])
            new[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        new[:, j] = saved
        vals = new
    return vals


def eval_basis(kv: KnotVector, u: float) -> list[tuple[int, float]]:
    """The ``degree + 1`` nonzero basis functions at a single parameter."""
    first, vals = kv.basis(np.array([u], dtype=float))
    return [(int(first[0]) + r, float(v)) for r, v in enumerate(vals[0])]


@dataclass(frozen=True, eq=False)
class TensorSpline:
    """A (possibly rational) tensor-product B-spline map R^k -> R^d.

    ``control`` has shape ``(n_1, ..., n_k, d)``; ``weights`` (if given) has
    shape ``(n_1, ..., n_k)``.
    """

    knots: tuple[KnotVector, ...]
    control: np.ndarray
    weights: np.ndarray | None = None
    pdim: int = field(default=0, repr=False)

    def __post_init__(self):
        knots = tuple(self.knots)
        control = np.array(self.control, dtype=float)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "control", control)
        k = len(knots)
        if self.pdim and self.pdim != k:
            raise ValueError(f"expected {self.pdim} knot vectors, got {k}")
        if control.ndim != k + 1:
            raise ValueError("control grid must have one axis per direction plus a point axis")
        expected = tuple(kv.n for kv in knots)
        if control.shape[:k] != expected:
            raise ValueError(f"control grid {control.shape[:k]} does not match knots {expected}")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != expected:
                raise ValueError("weights must match the control grid")
            if np.any(w <= 0):
                raise ValueError("weights must be strictly positive")
            object.__setattr__(self, "weights", w)
        control.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.control.shape[-1]

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(kv.degree for kv in self.knots)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.control.shape[:-1]

    @property
    def domain(self) -> list[tuple[float, float]]:
        return [kv.domain for kv in self.knots]

    @property
    def is_rational(self) -> bool:
        return self.weights is not None

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        pts = self.control.reshape(-1, self.dim)
        return pts.min(axis=0), pts.max(axis=0)

    def bbox_diagonal(self) -> float:
        lo, hi = self.bbox()
        return float(np.linalg.norm(hi - lo))

    def _homogeneous(self) -> np.ndarray:
        if self.weights is None:
            return self.control
        w = self.weights[..., None]
        return np.concatenate([self.control * w, w], axis=-1)

    def _local(self, params: np.ndarray, derivs: Sequence[int]):
        k = len(self.knots)
        idx, vals = [], []
        for a in range(k):
            first, v = self.knots[a].basis(params[:, a], derivs[a])
            idx.append(first[:, None] + np.arange(self.knots[a].degree + 1))
            vals.append(v)
        return idx, vals

    def _contract(self, coeffs: np.ndarray, params: np.ndarray, derivs: Sequence[int]) -> np.ndarray:
        k = len(self.knots)
        idx, vals = self._local(params, derivs)
        n = params.shape[0]
        grids = []
        for a in range(k):
            shape = [n] + [1] * k
            shape[a + 1] = idx[a].shape[1]
            grids.append(idx[a].reshape(shape))
        block = coeffs[tuple(grids)]  # (n, p1+1, ..., pk+1, d)
        letters = "abcdef"[:k]
        spec = ",".join(f"n{c}" for c in letters) + f",n{letters}z->nz"
        return np.einsum(spec, *vals, block, optimize=True)

    def _check_params(self, params) -> np.ndarray:
        params = np.asarray(params, dtype=float)
        single = params.ndim == 1
        params = np.atleast_2d(params)
        if params.shape[1] != len(self.knots):
            raise DomainError(f"expected {len(self.knots)} parameters per point")
        return params, single

    def evaluate(self, params) -> np.ndarray:
        """Evaluate at points ``params`` of shape ``(n, k)`` (or a single ``(k,)``)."""
        params, single = self._check_params(params)
        k = len(self.knots)
        h = self._contract(self._homogeneous(), params, [0] * k)
        out = h if self.weights is None else h[:, :-1] / h[:, -1:]
        return out[0] if single else out

    def jacobian(self, params) -> np.ndarray:
        """Partial derivatives; shape ``(n, d, k)`` (columns are d/dparam_a)."""
        params, single = self._check_params(params)
        k = len(self.knots)
        coeffs = self._homogeneous()
        cols = [self._contract(coeffs, params, [int(a == b) for b in range(k)]) for a in range(k)]
        if self.weights is None:
            jac = np.stack(cols, axis=-1)
        else:
            h = self._contract(coeffs, params, [0] * k)
            w = h[:, -1:]
            x = h[:, :-1] / w
            jac = np.stack([(c[:, :-1] - x * c[:, -1:]) / w for c in cols], axis=-1)
        return jac[0] if single else jac

    def evaluate_grid(self, axes: Sequence[np.ndarray]) -> np.ndarray:
        """Evaluate on the tensor grid ``axes[0] x axes[1] x ...``."""
        k = len(self.knots)
        mats = [self.knots[a].basis_matrix(axes[a]) for a in range(k)]
        coeffs = self._homogeneous()
        letters = "ijkl"[:k]
        outs = "abcd"[:k]
        spec = ",".join(f"{o}{i}" for o, i in zip(outs, letters)) + f",{letters}z->{outs}z"
        h = np.einsum(spec, *mats, coeffs, optimize=True)
        if self.weights is None:
            return h
        return h[..., :-1] / h[..., -1:]

    def map_control(self, fn) -> "TensorSpline":
        """Apply an affine map to the control points (exact for affine ``fn``)."""
        pts = fn(self.control.reshape(-1, self.dim)).reshape(self.shape + (-1,))
        return type(self)(self.knots, pts, self.weights)


class SplineSurface(TensorSpline):
    def __init__(self, knots, control, weights=None):
        super().__init__(tuple(knots), control, weights, pdim=2)


class SplineVolume(TensorSpline):
    def __init__(self, knots, control, weights=None):
        super().__init__(tuple(knots), control, weights, pdim=3)


def _spline_class(k: int):
    return {2: SplineSurface, 3: SplineVolume}.get(k)


def make_spline(knots, control, weights=None) -> TensorSpline:
    cls = _spline_class(len(knots))
    if cls is None:
        return TensorSpline(tuple(knots), control, weights)
    return cls(knots, control, weights)


def eval_volume(vol: TensorSpline, u: float, v: float, w: float) -> np.ndarray:
    return vol.evaluate(np.array([u, v, w], dtype=float))


def eval_jacobian(vol: TensorSpline, u: float, v: float, w: float) -> np.ndarray:
    if vol.dim != 3:
        raise ValueError("jacobian requires a map into 3-space")
    return vol.jacobian(np.array([u, v, w], dtype=float))


def trilinear_box(lo=(0.0, 0.0, 0.0), hi=(1.0, 1.0, 1.0)) -> SplineVolume:
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    kv = KnotVector(1, [0.0, 0.0, 1.0, 1.0])
    ctrl = np.zeros((2, 2, 2, 3))
    for i in range(2):
        for j in range(2):
            for k in range(2):
                ctrl[i, j, k] = lo + (hi - lo) * np.array([i, j, k])
    return SplineVolume((kv, kv, kv), ctrl)


def trilinear_from_corners(corners: np.ndarray) -> SplineVolume:
    """Trilinear volume from 8 corners ordered with x fastest: index i + 2j + 4k."""
    corners = np.asarray(corners, dtype=float).reshape(8, 3)
    kv = KnotVector(1, [0.0, 0.0, 1.0, 1.0])
    ctrl = np.zeros((2, 2, 2, 3))
    for k in range(2):
        for j in range(2):
            for i in range(2):
                ctrl[i, j, k] = corners[i + 2 * j + 4 * k]
    return SplineVolume((kv, kv, kv), ctrl)


# ---------------------------------------------------------------------------
# fitting


def _fit_operator(kv: KnotVector, u: np.ndarray) -> np.ndarray:
    """Matrix A (n x m) taking samples along one direction to control points.

    When the samples contain both domain ends, the end control points are
    pinned to the end samples (the clamped spline interpolates there) and the
    interior is a least-squares solve. This keeps each boundary layer of the
    fit a function of the boundary samples alone.
    """
    m, n = u.size, kv.n
    if m < n:
        raise ValueError(f"underdetermined fit: {m} samples for {n} control points")
    B = kv.basis_matrix(u)
    lo, hi = kv.domain
    pinned = n >= 2 and np.isclose(u[0], lo) and np.isclose(u[-1], hi)
    if not pinned:
        if np.linalg.matrix_rank(B) < n:
            raise np.linalg.LinAlgError("singular normal equations in spline fit")
        return np.linalg.pinv(B)
    inner = B[:, 1:-1]
    if inner.shape[1] and np.linalg.matrix_rank(inner) < inner.shape[1]:
        raise np.linalg.LinAlgError("singular normal equations in spline fit")
    reduce = np.eye(m)
    reduce[:, 0] -= B[:, 0]
    reduce[:, -1] -= B[:, -1]
    A = np.zeros((n, m))
    A[0, 0] = 1.0
    A[-1, -1] = 1.0
    if inner.shape[1]:
        A[1:-1] = np.linalg.pinv(inner) @ reduce
    return A


def fit_tensor(axes: Sequence[np.ndarray], samples: np.ndarray, sizes: Sequence[int], degree: int = 3) -> tuple[TensorSpline, float]:
    """Least-squares fit of a polynomial tensor spline to gridded samples.

    ``samples`` has shape ``(m_1, ..., m_k, d)`` and ``axes[a]`` holds the
    (increasing) parameters of the samples along direction ``a``.

    Returns the spline and the max residual over the samples.
    """
    samples = np.asarray(samples, dtype=float)
    k = len(axes)
    knots = []
    coeffs = samples
    for a in range(k):
        u = np.asarray(axes[a], dtype=float)
        p = min(degree, sizes[a] - 1)
        kv = KnotVector.clamped_uniform(sizes[a], p, float(u[0]), float(u[-1]))
        knots.append(kv)
        A = _fit_operator(kv, u)
        coeffs = np.moveaxis(np.tensordot(A, coeffs, axes=([1], [a])), 0, a)
    spline = make_spline(knots, coeffs)
    resid = np.linalg.norm(spline.evaluate_grid(axes) - samples, axis=-1).max()
    return spline, float(resid)


def fit_tricubic(axes: Sequence[np.ndarray], samples: np.ndarray, size) -> tuple[SplineVolume, float]:
    """Tri-cubic least-squares fit to samples on a parametric tensor grid.

    ``size`` is the target control-grid size, an int or a triple.
    """
    if len(axes) != 3:
        raise ValueError("fit_tricubic expects three parameter axes")
    sizes = (size,) * 3 if np.isscalar(size) else tuple(size)
    if any(s < 4 for s in sizes):
        raise ValueError("a tri-cubic needs at least 4 control points per direction")
    return fit_tensor(axes, samples, sizes, degree=3)


def _check_inside(points: np.ndarray, domain, what: str) -> np.ndarray:
    out = points.copy()
    for a, (lo, hi) in enumerate(domain):
        tol = 1e-9 * max(1.0, hi - lo)
        if np.any(points[..., a] < lo - tol) or np.any(points[..., a] > hi + tol):
            raise DomainError(f"{what} escapes the parametric domain in direction {a}")
        out[..., a] = np.clip(points[..., a], lo, hi)
    return out


def _sample_axes(spline: TensorSpline, m: int) -> list[np.ndarray]:
    return [np.linspace(lo, hi, m) for lo, hi in spline.domain]


def compose(
    macro: TensorSpline,
    tile: TensorSpline,
    size: int = 4,
    tolerance: float | None = None,
    max_size: int = 16,
    oversample: int = 4,
) -> tuple[TensorSpline, float]:
    """Tri-cubic approximation of ``macro(tile(.))``.

    The tile must map its domain into the macro's parametric domain. The
    control grid grows from ``size`` until the deviation from pointwise
    composition, checked half-way between samples, is within ``tolerance``
    (default 1e-3 of the macro bounding-box diagonal).

    Returns the composed spline and the achieved deviation.
    """
    if tile.dim != len(macro.knots):
        raise ValueError("tile must map into the macro's parametric space")
    if tolerance is None:
        tolerance = 1e-3 * macro.bbox_diagonal()
    k = len(tile.knots)
    n = size
    while True:
        m = oversample * n
        axes = _sample_axes(tile, m)
        inner = _check_inside(tile.evaluate_grid(axes), macro.domain, "tile image")
        pts = macro.evaluate(inner.reshape(-1, inner.shape[-1])).reshape(inner.shape[:-1] + (macro.dim,))
        fitted, _ = fit_tensor(axes, pts, (n,) * k)
        mids = [0.5 * (ax[1:] + ax[:-1]) for ax in axes]
        check = _check_inside(tile.evaluate_grid(mids), macro.domain, "tile image")
        exact = macro.evaluate(check.reshape(-1, check.shape[-1]))
        approx = fitted.evaluate_grid(mids).reshape(-1, macro.dim)
        dev = float(np.linalg.norm(exact - approx, axis=1).max())
        if dev <= tolerance:
            return fitted, dev
        if n >= max_size:
            raise ApproximationError(
                f"composition deviation {dev:.3e} exceeds tolerance {tolerance:.3e}", dev
            )
        n = min(max_size, n + max(1, n // 2))


def surface_normals(surf: TensorSpline, params: np.ndarray, eps: float | None = None) -> np.ndarray:
    jac = surf.jacobian(params)
    nrm = np.cross(jac[:, :, 0], jac[:, :, 1])
    length = np.linalg.norm(nrm, axis=1)
    if eps is None:
        eps = 1e-10 * max(surf.bbox_diagonal(), 1e-300) ** 2
    if np.any(length <= eps):
        raise DegeneracyError("surface normal vanishes at a sample")
    return nrm / length[:, None]


def approximate_offset(surf: TensorSpline, distance: float, size: int | None = None, oversample: int = 4) -> tuple[SplineSurface, float]:
    """Bicubic fit to the surface displaced by ``distance`` along unit normals.

    Returns the fitted offset surface and its max deviation from the exact
    offset at validation samples between the fit samples.
    """
    if len(surf.knots) != 2 or surf.dim != 3:
        raise ValueError("offset requires a surface in 3-space")
    if size is None:
        size = max(8, *surf.shape)
    m = oversample * size
    axes = _sample_axes(surf, m)

    def exact(ax):
        grid = np.stack(np.meshgrid(*ax, indexing="ij"), axis=-1).reshape(-1, 2)
        return surf.evaluate(grid) + distance * surface_normals(surf, grid)

    pts = exact(axes).reshape(m, m, 3)
    fitted, _ = fit_tensor(axes, pts, (size, size))
    mids = [0.5 * (ax[1:] + ax[:-1]) for ax in axes]
    dev = np.linalg.norm(fitted.evaluate_grid(mids).reshape(-1, 3) - exact(mids), axis=1).max()
    return fitted, float(dev)


def blade_macro(
    span: float = 0.090,
    chord: float = 0.040,
    thickness: float = 0.00675,
    twist_deg: float = 25.0,
    taper: float = 0.75,
    thin: float = 0.6,
    sweep: float = 0.004,
) -> SplineVolume:
    """Synthetic twisted and tapered blade: quadratic x linear x linear, 5x2x2 net.

    u runs root (x=0) to tip (x=span), v along the chord, w through the
    thickness. The root section lies in the plane x=0 with the chord along z,
    so a rotation axis parallel to z sits at negative x.
    """
    ku = KnotVector(2, [0, 0, 0, 1 / 3, 2 / 3, 1, 1, 1])
    kl = KnotVector(1, [0, 0, 1, 1])
    greville = np.array([0.0, 1 / 6, 0.5, 5 / 6, 1.0])
    ctrl = np.zeros((5, 2, 2, 3))
    for i, s in enumerate(greville):
        ang = np.radians(twist_deg) * s
        c = chord * (1 + (taper - 1) * s)
        t = thickness * (1 + (thin - 1) * s)
        chord_dir = np.array([0.0, np.sin(ang), np.cos(ang)])
        thick_dir = np.array([0.0, -np.cos(ang), np.sin(ang)])  # keeps the map right-handed
        centre = np.array([span * s, sweep * s * s, 0.0])
        for j, a in enumerate((-0.5, 0.5)):
            for k, b in enumerate((-0.5, 0.5)):
                ctrl[i, j, k] = centre + a * c * chord_dir + b * t * thick_dir
    return SplineVolume((ku, kl, kl), ctrl)


def unit_cube() -> SplineVolume:
    return trilinear_box()
