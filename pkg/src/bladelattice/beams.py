"""Linear 3D Timoshenko beam finite elements.

Six DOFs per node (ux, uy, uz, rx, ry, rz). Element stiffness uses the
shear-flexibility factor phi = 12 EI / (kappa G A L^2), which makes nodal
displacements exact for end-loaded prismatic members.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

log = logging.getLogger(__name__)

DIRECT_SOLVE_MAX_DOFS = 200_000


class SingularModelError(RuntimeError):
    """The constrained stiffness matrix is singular."""


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class Material:
    E: float
    nu: float
    rho: float

    def __post_init__(self):
        if not self.E > 0:
            raise ValueError("Young's modulus must be positive")
        if not self.rho > 0:
            raise ValueError("density must be positive")
        if not -1.0 < self.nu < 0.5:
            raise ValueError("Poisson ratio must lie in (-1, 0.5)")

    @property
    def G(self) -> float:
        return self.E / (2.0 * (1.0 + self.nu))


# Inconel 718 as used for the printed blades
INCONEL_718 = Material(E=208e9, nu=0.3, rho=8220.0)


@dataclass(frozen=True)
class Section:
    A: float
    Iy: float
    Iz: float
    J: float
    kappa: float
    c: float  # extreme-fibre distance for bending stress

    @classmethod
    def circle(cls, r: float, nu: float) -> "Section":
        return cls(
            A=np.pi * r**2,
            Iy=np.pi * r**4 / 4,
            Iz=np.pi * r**4 / 4,
            J=np.pi * r**4 / 2,
            kappa=6 * (1 + nu) / (7 + 6 * nu),
            c=r,
        )

    @classmethod
    def rectangle(cls, b: float, t: float, nu: float) -> "Section":
        """Width ``b`` along local z, thickness ``t`` along local y."""
        a, s = max(b, t), min(b, t)
        J = a * s**3 * (1 / 3 - 0.21 * s / a * (1 - s**4 / (12 * a**4)))
        return cls(
            A=b * t,
            Iy=t * b**3 / 12,
            Iz=b * t**3 / 12,
            J=J,
            kappa=10 * (1 + nu) / (12 + 11 * nu),
            c=0.5 * np.hypot(b, t),
        )


def _section_arrays(radii: np.ndarray, nu: float):
    r = np.asarray(radii, dtype=float)
    A = np.pi * r**2
    I = np.pi * r**4 / 4
    return A, I, I, 2 * I, np.full_like(r, 6 * (1 + nu) / (7 + 6 * nu))


@dataclass(frozen=True)
class HalfSpace:
    """Selects nodes with ``dot(normal, x) <= offset + tol``."""

    normal: tuple[float, float, float]
    offset: float
    tol: float = 1e-9

    def __call__(self, nodes: np.ndarray) -> np.ndarray:
        return np.asarray(nodes) @ np.asarray(self.normal, float) <= self.offset + self.tol


@dataclass(frozen=True)
class LoadCase:
    omega: float
    axis_point: tuple[float, float, float] = (0.0, 0.0, 0.0)
    axis_dir: tuple[float, float, float] = (0.0, 0.0, 1.0)
    fixed: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if self.omega < 0:
            raise ValueError("angular speed must be non-negative")
        d = np.asarray(self.axis_dir, dtype=float)
        n = np.linalg.norm(d)
        if n == 0:
            raise ValueError("rotation axis direction must be nonzero")
        object.__setattr__(self, "axis_dir", tuple(d / n))
        object.__setattr__(self, "axis_point", tuple(np.asarray(self.axis_point, float)))

    @staticmethod
    def rpm_to_rad(rpm: float) -> float:
        return rpm * 2.0 * np.pi / 60.0


@dataclass
class BeamModel:
    nodes: np.ndarray
    elements: np.ndarray
    radii: np.ndarray
    material: Material
    clamped: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    sections: Sequence[Section] | None = None

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float).reshape(-1, 3)
        self.elements = np.asarray(self.elements, dtype=int).reshape(-1, 2)
        self.radii = np.asarray(self.radii, dtype=float).reshape(-1)
        self.clamped = np.unique(np.asarray(self.clamped, dtype=int))
        if self.radii.size != len(self.elements):
            raise ValueError("one radius per element is required")
        if np.any(self.radii <= 0):
            raise ValueError("element radii must be positive")
        if self.elements.size and (self.elements.min() < 0 or self.elements.max() >= len(self.nodes)):
            raise ValueError("element references a missing node")

    @property
    def n_dofs(self) -> int:
        return 6 * len(self.nodes)

    def lengths(self) -> np.ndarray:
        d = self.nodes[self.elements[:, 1]] - self.nodes[self.elements[:, 0]]
        return np.linalg.norm(d, axis=1)

    def element_masses(self) -> np.ndarray:
        if self.sections is not None:
            area = np.array([s.A for s in self.sections])
        else:
            area = np.pi * self.radii**2
        return self.material.rho * area * self.lengths()

    def mass(self) -> float:
        return float(self.element_masses().sum())

    def with_radii(self, radii) -> "BeamModel":
        return BeamModel(self.nodes, self.elements, radii, self.material, self.clamped)

    def element_dofs(self) -> np.ndarray:
        base = 6 * self.elements
        return np.concatenate([base[:, :1] + np.arange(6), base[:, 1:] + np.arange(6)], axis=1)


@dataclass
class SolveResult:
    displacements: np.ndarray  # (n_nodes, 6)
    compliance: float
    max_deflection: float
    axial_stress: np.ndarray
    von_mises: np.ndarray
    reactions: np.ndarray  # (n_nodes, 6), nonzero at constrained DOFs
    residual: float

    def summary(self) -> dict:
        return {
            "compliance": self.compliance,
            "max_deflection": self.max_deflection,
            "max_von_mises": float(self.von_mises.max()) if self.von_mises.size else 0.0,
        }


# ---------------------------------------------------------------------------
# element matrices


def _rotations(dirs: np.ndarray) -> np.ndarray:
    """Rows are local x, y, z axes for each element direction."""
    ex = dirs
    ref = np.zeros_like(ex)
    idx = np.argmin(np.abs(ex), axis=1)
    ref[np.arange(len(ex)), idx] = 1.0
    ey = ref - np.sum(ref * ex, axis=1, keepdims=True) * ex
    ey /= np.linalg.norm(ey, axis=1, keepdims=True)
    ez = np.cross(ex, ey)
    return np.stack([ex, ey, ez], axis=1)


def _local_stiffness(L, E, G, A, Iy, Iz, J, kappa, shear_rigid=False):
    n = L.size
    k = np.zeros((n, 12, 12))
    if shear_rigid:
        phy = phz = np.zeros(n)
    else:
        phy = 12 * E * Iz / (kappa * G * A * L**2)
        phz = 12 * E * Iy / (kappa * G * A * L**2)

    ea = E * A / L
    gj = G * J / L
    k[:, 0, 0] = k[:, 6, 6] = ea
    k[:, 0, 6] = k[:, 6, 0] = -ea
    k[:, 3, 3] = k[:, 9, 9] = gj
    k[:, 3, 9] = k[:, 9, 3] = -gj

    c = E * Iz / ((1 + phy) * L**3)
    entries = {
        (1, 1): 12 * c, (1, 5): 6 * L * c, (1, 7): -12 * c, (1, 11): 6 * L * c,
        (5, 5): (4 + phy) * L**2 * c, (5, 7): -6 * L * c, (5, 11): (2 - phy) * L**2 * c,
        (7, 7): 12 * c, (7, 11): -6 * L * c, (11, 11): (4 + phy) * L**2 * c,
    }
    c = E * Iy / ((1 + phz) * L**3)
    entries.update({
        (2, 2): 12 * c, (2, 4): -6 * L * c, (2, 8): -12 * c, (2, 10): -6 * L * c,
        (4, 4): (4 + phz) * L**2 * c, (4, 8): 6 * L * c, (4, 10): (2 - phz) * L**2 * c,
        (8, 8): 12 * c, (8, 10): 6 * L * c, (10, 10): (4 + phz) * L**2 * c,
    })
    for (i, j), v in entries.items():
        k[:, i, j] = v
        k[:, j, i] = v
    return k


def _transform(R: np.ndarray) -> np.ndarray:
    T = np.zeros((R.shape[0], 12, 12))
    for b in range(4):
        T[:, 3 * b : 3 * b + 3, 3 * b : 3 * b + 3] = R
    return T


def _element_data(model: BeamModel, radii=None):
    xi = model.nodes[model.elements[:, 0]]
    xj = model.nodes[model.elements[:, 1]]
    d = xj - xi
    L = np.linalg.norm(d, axis=1)
    if np.any(L <= 0):
        raise ValueError("zero-length element")
    R = _rotations(d / L[:, None])
    mat = model.material
    if model.sections is not None and radii is None:
        A = np.array([s.A for s in model.sections])
        Iy = np.array([s.Iy for s in model.sections])
        Iz = np.array([s.Iz for s in model.sections])
        J = np.array([s.J for s in model.sections])
        kappa = np.array([s.kappa for s in model.sections])
    else:
        A, Iy, Iz, J, kappa = _section_arrays(model.radii if radii is None else radii, mat.nu)
    return L, R, (A, Iy, Iz, J, kappa)


def element_matrices(model: BeamModel, radii=None, shear_rigid: bool = False, local: bool = False) -> np.ndarray:
    """Global-frame 12x12 stiffness matrices for all elements, shape (E, 12, 12)."""
    L, R, (A, Iy, Iz, J, kappa) = _element_data(model, radii)
    mat = model.material
    k = _local_stiffness(L, mat.E, mat.G, A, Iy, Iz, J, kappa, shear_rigid)
    if local:
        return k
    T = _transform(R)
    kg = np.einsum("eji,ejk,ekl->eil", T, k, T)
    # the triple product is symmetric only to round-off
    return 0.5 * (kg + kg.transpose(0, 2, 1))


def element_stiffness(xi, xj, radius: float, material: Material, shear_rigid: bool = False) -> np.ndarray:
    """12x12 global stiffness of one circular Timoshenko element."""
    m = BeamModel(np.array([xi, xj]), [[0, 1]], [radius], material)
    return element_matrices(m, shear_rigid=shear_rigid)[0]


def assemble_stiffness(model: BeamModel, radii=None, shear_rigid: bool = False) -> sp.csr_matrix:
    ke = element_matrices(model, radii, shear_rigid)
    dofs = model.element_dofs()
    rows = np.repeat(dofs, 12, axis=1).ravel()
    cols = np.tile(dofs, (1, 12)).ravel()
    K = sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(model.n_dofs, model.n_dofs)).tocsr()
    K.sum_duplicates()
    return K


def lumped_mass(model: BeamModel) -> np.ndarray:
    """Diagonal mass: half of each element's mass and rotary inertia per end."""
    m = model.element_masses()
    L = model.lengths()
    diag = np.zeros(model.n_dofs)
    for end in range(2):
        base = 6 * model.elements[:, end]
        for a in range(3):
            np.add.at(diag, base + a, 0.5 * m)
            np.add.at(diag, base + 3 + a, m * L**2 / 24)
    return diag


# ---------------------------------------------------------------------------
# loads and solution


def radial_vectors(points: np.ndarray, lc: LoadCase) -> np.ndarray:
    """Perpendicular offset from the rotation axis to each point."""
    a = np.asarray(lc.axis_dir)
    rel = points - np.asarray(lc.axis_point)
    return rel - np.outer(rel @ a, a)


def element_centrifugal_forces(model: BeamModel, lc: LoadCase, radii=None) -> np.ndarray:
    """Per-element centrifugal force m * omega^2 * r_perp at the element midpoint."""
    if radii is None:
        mass = model.element_masses()
    else:
        mass = model.material.rho * np.pi * np.asarray(radii) ** 2 * model.lengths()
    mid = 0.5 * (model.nodes[model.elements[:, 0]] + model.nodes[model.elements[:, 1]])
    return (mass * lc.omega**2)[:, None] * radial_vectors(mid, lc)


def centrifugal_load(model: BeamModel, lc: LoadCase, radii=None) -> np.ndarray:
    """Global force vector, half of each element's load on each end node."""
    fe = element_centrifugal_forces(model, lc, radii)
    f = np.zeros((len(model.nodes), 6))
    for end in range(2):
        np.add.at(f[:, :3], model.elements[:, end], 0.5 * fe)
    f[model.clamped] = 0.0
    return f.ravel()


def _check_supported(model: BeamModel, constrained_nodes: np.ndarray):
    n = len(model.nodes)
    e = model.elements
    adj = sp.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
    ncomp, labels = connected_components(adj, directed=False)
    supported = np.zeros(ncomp, dtype=bool)
    supported[labels[constrained_nodes]] = True
    for c in np.flatnonzero(~supported):
        members = np.flatnonzero(labels == c)
        raise SingularModelError(
            f"free connected component with {members.size} node(s) has no support, "
            f"e.g. nodes {members[:5].tolist()}"
        )


def solve_static(
    model: BeamModel,
    load: np.ndarray,
    prescribed: dict[int, float] | None = None,
    K: sp.spmatrix | None = None,
) -> SolveResult:
    """Solve K u = f with clamped nodes and optional prescribed DOF values.

    ``prescribed`` maps global DOF index to a displacement value.
    """
    prescribed = prescribed or {}
    if model.clamped.size == 0 and not prescribed:
        raise SingularModelError("no clamped nodes or prescribed displacements")
    f = np.asarray(load, dtype=float).reshape(-1)
    if f.size != model.n_dofs:
        raise ValueError("load vector has the wrong size")
    if K is None:
        K = assemble_stiffness(model)
    constrained_nodes = np.unique(
        np.concatenate([model.clamped, np.array(list(prescribed), dtype=int) // 6])
    )
    _check_supported(model, constrained_nodes)

    fixed = np.zeros(model.n_dofs, dtype=bool)
    u = np.zeros(model.n_dofs)
    for node in model.clamped:
        fixed[6 * node : 6 * node + 6] = True
    for dof, val in prescribed.items():
        fixed[dof] = True
        u[dof] = val
    free = np.flatnonzero(~fixed)
    rhs = f[free] - K[free][:, fixed] @ u[fixed]
    Kff = K[free][:, free].tocsc()
    if free.size <= DIRECT_SOLVE_MAX_DOFS:
        try:
            lu = spla.splu(Kff)
        except RuntimeError as exc:
            raise SingularModelError(f"stiffness factorization failed: {exc}") from exc
        uf = lu.solve(rhs)
    else:
        diag = Kff.diagonal()
        M = spla.LinearOperator(Kff.shape, matvec=lambda x: x / diag)
        uf, info = spla.cg(Kff, rhs, rtol=1e-10, maxiter=20 * free.size, M=M)
        if info != 0:
            raise ConvergenceError(f"conjugate gradient did not converge (info={info})")
    if not np.all(np.isfinite(uf)):
        raise SingularModelError("non-finite displacements; stiffness matrix is singular")
    u[free] = uf
    resid = np.linalg.norm(Kff @ uf - rhs) / max(np.linalg.norm(rhs), 1e-300)
    if resid > 1e-8 and np.linalg.norm(rhs) > 0:
        raise SingularModelError(f"solve residual {resid:.2e} exceeds 1e-8; system is ill-conditioned")

    reactions = K @ u - f
    reactions[~fixed] = 0.0
    disp = u.reshape(-1, 6)
    defl = np.linalg.norm(disp[:, :3], axis=1)
    max_defl = float(defl.max()) if defl.size else 0.0
    extent = np.ptp(model.nodes, axis=0)
    if max_defl > 0.1 * np.linalg.norm(extent):
        log.warning("max deflection %.3g exceeds 10%% of the model size; linear kinematics is doubtful", max_defl)
    axial, vm = element_stresses(model, u)
    return SolveResult(
        displacements=disp,
        compliance=float(f @ u),
        max_deflection=max_defl,
        axial_stress=axial,
        von_mises=vm,
        reactions=reactions.reshape(-1, 6),
        residual=float(resid),
    )


def element_stresses(model: BeamModel, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Axial stress and a von Mises estimate from extreme-fibre stresses."""
    if len(model.elements) == 0:
        return np.zeros(0), np.zeros(0)
    L, R, (A, Iy, Iz, J, _) = _element_data(model)
    kl = element_matrices(model, local=True)
    d = np.asarray(u).reshape(-1)[model.element_dofs()]
    d_loc = np.einsum("eij,ej->ei", _transform(R), d)
    f = np.einsum("eij,ej->ei", kl, d_loc)
    N = f[:, 6]
    if model.sections is not None:
        c = np.array([s.c for s in model.sections])
    else:
        c = model.radii
    Imin = np.minimum(Iy, Iz)
    M = np.maximum(np.hypot(f[:, 4], f[:, 5]), np.hypot(f[:, 10], f[:, 11]))
    sigma = np.abs(N / A) + M * c / Imin
    tau = np.abs(f[:, 9]) * c / J
    return N / A, np.sqrt(sigma**2 + 3 * tau**2)


def lowest_frequencies(model: BeamModel, count: int) -> np.ndarray:
    """Smallest natural frequencies (Hz) with a lumped mass matrix."""
    if count < 1:
        raise ValueError("count must be at least 1")
    if model.clamped.size == 0:
        raise SingularModelError("modal analysis requires clamped nodes")
    _check_supported(model, model.clamped)
    K = assemble_stiffness(model)
    M = lumped_mass(model)
    fixed = np.zeros(model.n_dofs, dtype=bool)
    for node in model.clamped:
        fixed[6 * node : 6 * node + 6] = True
    free = np.flatnonzero(~fixed)
    if count > free.size:
        raise ValueError(f"requested {count} modes but only {free.size} free DOFs")
    Kff = K[free][:, free]
    Mff = M[free]
    if free.size <= 3000:
        lam = scipy.linalg.eigh(
            Kff.toarray(), np.diag(Mff), eigvals_only=True, subset_by_index=[0, count - 1]
        )
    else:
        try:
            lam = spla.eigsh(Kff.tocsc(), k=count, M=sp.diags(Mff).tocsc(), sigma=0.0, which="LM",
                             return_eigenvectors=False)
        except spla.ArpackNoConvergence as exc:
            raise ConvergenceError(
                f"eigen-solver stopped with {len(exc.eigenvalues)} of {count} modes converged"
            ) from exc
        lam = np.sort(lam)
    return np.sqrt(np.clip(lam, 0.0, None)) / (2 * np.pi)


def cantilever_frequency(L: float, b: float, t: float, material: Material) -> float:
    """First bending frequency of a clamped-free rectangular Euler-Bernoulli beam."""
    A = b * t
    I = b * t**3 / 12
    return 1.875**2 / (2 * np.pi * L**2) * np.sqrt(material.E * I / (material.rho * A))


def scaled_frequency(f0: float, area_reduction: float, inertia_reduction: float = 0.0) -> float:
    """Frequency after reducing section area and inertia by the given fractions."""
    return f0 * np.sqrt((1 - inertia_reduction) / (1 - area_reduction))


def effective_poisson(model: BeamModel, strain: float, axis: int = 2, tol: float = 1e-9) -> float:
    """Effective Poisson ratio of a box-shaped patch under axial stretch.

    The two faces normal to ``axis`` get a kinematic axial displacement
    (rollers); lateral faces are free. The ratio is the negated mean lateral
    strain over the axial strain, from boundary-node displacement averages.
    """
    if strain == 0:
        raise ValueError("effective Poisson ratio is undefined at zero strain")
    x = model.nodes
    lo, hi = x.min(axis=0), x.max(axis=0)
    size = hi - lo
    tol = tol * np.linalg.norm(size)
    bottom = np.flatnonzero(np.abs(x[:, axis] - lo[axis]) <= tol)
    top = np.flatnonzero(np.abs(x[:, axis] - hi[axis]) <= tol)
    lateral = [a for a in range(3) if a != axis]
    prescribed = {}
    for node in bottom:
        prescribed[6 * node + axis] = 0.0
    for node in top:
        prescribed[6 * node + axis] = strain * size[axis]
    # suppress lateral rigid motions with a minimal set of supports
    centre = x[bottom].mean(axis=0)
    anchor = bottom[np.argmin(np.linalg.norm(x[bottom] - centre, axis=1))]
    for a in lateral:
        prescribed[6 * anchor + a] = 0.0
    far = bottom[np.argmax(np.linalg.norm(x[bottom] - x[anchor], axis=1))]
    sep = x[far] - x[anchor]
    turn = lateral[0] if abs(sep[lateral[1]]) >= abs(sep[lateral[0]]) else lateral[1]
    prescribed[6 * far + turn] = 0.0
    fixed_model = BeamModel(model.nodes, model.elements, model.radii, model.material, [], model.sections)
    res = solve_static(fixed_model, np.zeros(model.n_dofs), prescribed)
    d = res.displacements
    ratios = []
    for a in lateral:
        lo_nodes = np.flatnonzero(np.abs(x[:, a] - lo[a]) <= tol)
        hi_nodes = np.flatnonzero(np.abs(x[:, a] - hi[a]) <= tol)
        lat = (d[hi_nodes, a].mean() - d[lo_nodes, a].mean()) / size[a]
        ratios.append(-lat / strain)
    return float(np.mean(ratios))
