"""Compliance-driven grading of a lattice under centrifugal load.

Design variables are the coefficients of a parameter field that sets the arm
thickness of every cross tile. Strut radii are linear in the coefficients, so
mass is a quadratic form and the compliance gradient follows from one solve.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import lsq_linear

from .beams import (
    BeamModel,
    LoadCase,
    Material,
    SolveResult,
    centrifugal_load,
    element_centrifugal_forces,
    element_matrices,
    solve_static,
)
from .lattice import BeamLayout, ParameterField

log = logging.getLogger(__name__)


class InfeasibleProblemError(ValueError):
    pass


class EvaluationError(RuntimeError):
    def __init__(self, message: str, coefficients: np.ndarray):
        super().__init__(f"{message} at coefficients {np.array2string(coefficients, precision=6)}")
        self.coefficients = coefficients


@dataclass
class DesignProblem:
    layout: BeamLayout
    field: ParameterField
    load: LoadCase
    material: Material
    bounds: tuple[float, float]
    mass_budget: float | None = None
    external_load: np.ndarray | None = None  # fixed nodal forces, (n_nodes * 6,)

    def __post_init__(self):
        lo, hi = self.bounds
        if not 0 < lo < hi:
            raise InfeasibleProblemError(f"bounds must satisfy 0 < min < max, got {self.bounds}")
        self._D = self.layout.radius_matrix(self.field)
        lengths = np.linalg.norm(
            self.layout.nodes[self.layout.elements[:, 1]] - self.layout.nodes[self.layout.elements[:, 0]], axis=1
        )
        self._Q = self.material.rho * np.pi * (self._D.T * lengths) @ self._D

    @property
    def n(self) -> int:
        return self._D.shape[1]

    def radii(self, coefficients) -> np.ndarray:
        return self._D @ np.asarray(coefficients, dtype=float).ravel()

    def mass(self, coefficients) -> float:
        c = np.asarray(coefficients, dtype=float).ravel()
        return float(c @ self._Q @ c)

    def mass_gradient(self, coefficients) -> np.ndarray:
        return 2.0 * self._Q @ np.asarray(coefficients, dtype=float).ravel()

    def model(self, coefficients) -> BeamModel:
        return self.layout.model(self.material, self.radii(coefficients))

    def check_bounds(self, coefficients):
        c = np.asarray(coefficients, dtype=float).ravel()
        lo, hi = self.bounds
        if c.size != self.n:
            raise ValueError(f"expected {self.n} coefficients, got {c.size}")
        if np.any(c < lo) or np.any(c > hi):
            raise ValueError("coefficients outside bounds")
        return c


def _solve(problem: DesignProblem, c: np.ndarray) -> tuple[BeamModel, np.ndarray, SolveResult]:
    model = problem.model(c)
    f = centrifugal_load(model, problem.load)
    if problem.external_load is not None:
        ext = np.asarray(problem.external_load, dtype=float).reshape(-1, 6).copy()
        ext[model.clamped] = 0.0
        f = f + ext.ravel()
    try:
        res = solve_static(model, f)
    except (RuntimeError, ValueError) as exc:
        raise EvaluationError(str(exc), c) from exc
    return model, f, res


def evaluate(problem: DesignProblem, coefficients) -> tuple[float, float]:
    """Compliance and mass of the lattice graded by ``coefficients``."""
    c = problem.check_bounds(coefficients)
    _, _, res = _solve(problem, c)
    return res.compliance, problem.mass(c)


def compliance_radius_sensitivity(model: BeamModel, load: LoadCase, u: np.ndarray, rel_step: float = 1e-6) -> np.ndarray:
    """dC/dr per element: -u_e^T dK_e/dr u_e + 2 u_e^T df_e/dr.

    dK_e/dr is a central difference of the element matrix; the centrifugal
    load is proportional to r^2, so df_e/dr = 2 f_e / r.
    """
    r = model.radii
    h = rel_step * r
    dK = (element_matrices(model, r + h) - element_matrices(model, r - h)) / (2 * h)[:, None, None]
    ue = np.asarray(u).reshape(-1)[model.element_dofs()]
    term_k = -np.einsum("ei,eij,ej->e", ue, dK, ue)
    fe = element_centrifugal_forces(model, load)
    clamped = np.zeros(len(model.nodes), dtype=bool)
    clamped[model.clamped] = True
    u3 = np.asarray(u).reshape(-1, 6)[:, :3]
    ends = model.elements
    work = np.zeros(len(r))
    for k in range(2):
        free = ~clamped[ends[:, k]]
        work += free * np.einsum("ei,ei->e", 0.5 * fe, u3[ends[:, k]])
    term_f = 2.0 * (2.0 * work / r)
    return term_k + term_f


def gradient(problem: DesignProblem, coefficients, mode: str = "semi_analytic") -> np.ndarray:
    """d(compliance)/d(coefficients)."""
    c = problem.check_bounds(coefficients)
    if mode == "finite_difference":
        lo, hi = problem.bounds
        h = 1e-6 * (hi - lo)
        g = np.zeros(c.size)
        for k in range(c.size):
            cp, cm = c.copy(), c.copy()
            cp[k] += h
            cm[k] -= h
            g[k] = (_solve(problem, cp)[2].compliance - _solve(problem, cm)[2].compliance) / (2 * h)
        return g
    if mode != "semi_analytic":
        raise ValueError(f"unknown gradient mode {mode!r}")
    model, _, res = _solve(problem, c)
    dr = compliance_radius_sensitivity(model, problem.load, res.displacements)
    return problem._D.T @ dr


# ---------------------------------------------------------------------------
# sequential quadratic programming


@dataclass
class TraceRow:
    iteration: int
    objective: float
    mass: float
    violation: float
    step_norm: float
    gradient_norm: float
    step_length: float


@dataclass
class OptimizationTrace:
    rows: list[TraceRow] = field(default_factory=list)
    status: str = ""

    def append(self, row: TraceRow):
        self.rows.append(row)

    @property
    def iterations(self) -> int:
        return max(0, len(self.rows) - 1)

    def objectives(self) -> np.ndarray:
        return np.array([r.objective for r in self.rows])

    def to_table(self, sep: str = ",") -> str:
        head = ["iteration", "objective", "mass", "violation", "step_norm", "gradient_norm", "step_length"]
        lines = [sep.join(head)]
        for r in self.rows:
            vals = [r.iteration, r.objective, r.mass, r.violation, r.step_norm, r.gradient_norm, r.step_length]
            lines.append(sep.join(str(v) if isinstance(v, int) else f"{v:.17g}" for v in vals))
        return "\n".join(lines) + "\n"


def restore_feasibility(problem: DesignProblem, c: np.ndarray, budget: float, tol: float = 1e-10) -> np.ndarray:
    """Scale coefficients toward zero (clipped at the lower bound) until mass <= budget."""
    lo, hi = problem.bounds
    c = np.clip(c, lo, hi)
    if problem.mass(c) <= budget:
        return c
    a, b = 0.0, 1.0
    for _ in range(200):
        s = 0.5 * (a + b)
        if problem.mass(np.maximum(lo, s * c)) <= budget * (1 - tol):
            a = s
        else:
            b = s
        if b - a < 1e-15:
            break
    return np.maximum(lo, a * c)


def _qp_box_linear(B, g, a, b, lower, upper):
    """min g.d + d.B.d/2 s.t. lower <= d <= upper, a.d <= b. Returns (d, multiplier)."""
    L = np.linalg.cholesky(B)

    def box_qp(lam):
        rhs = -np.linalg.solve(L, g + lam * a)
        sol = lsq_linear(L.T, rhs, bounds=(lower, upper), method="bvls", tol=1e-14)
        return np.clip(sol.x, lower, upper)

    d = box_qp(0.0)
    if a @ d <= b:
        return d, 0.0
    hi = 1.0
    while a @ box_qp(hi) > b:
        hi *= 2.0
        if hi > 1e12:
            raise InfeasibleProblemError("linearized mass constraint cannot be met inside the bounds")
    lo = 0.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if a @ box_qp(mid) > b:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * max(1.0, hi):
            break
    return box_qp(hi), hi


def optimize(
    problem: DesignProblem,
    initial=None,
    max_iterations: int = 25,
    step_tol: float = 1e-6,
    gradient_tol: float = 1e-6,
    armijo: float = 1e-4,
    feasibility_tol: float = 1e-8,
    hessian: str = "auto",
) -> tuple[np.ndarray, OptimizationTrace]:
    """Minimise compliance subject to box bounds and the mass budget.

    Each iteration solves a quadratic subproblem (linearized mass constraint,
    box bounds) exactly. Its curvature is a damped BFGS model
    (``hessian="bfgs"``) or a forward-difference Hessian of the gradient
    plus the exact mass term (``hessian="finite_difference"``); ``"auto"``
    picks the latter up to 50 variables. The step then backtracks on the objective with an
    Armijo test; trial points are pulled back onto the mass budget before
    evaluation, so every accepted iterate is feasible. Variables are scaled to
    the unit box and compliance to its starting value.
    """
    if hessian == "auto":
        hessian = "finite_difference" if problem.n <= 50 else "bfgs"
    if hessian not in ("finite_difference", "bfgs"):
        raise ValueError(f"unknown hessian mode {hessian!r}")
    lo, hi = problem.bounds
    width = hi - lo
    c = np.full(problem.n, hi) if initial is None else np.asarray(initial, dtype=float).ravel().copy()
    problem.check_bounds(c)
    budget = problem.mass_budget if problem.mass_budget is not None else np.inf
    if problem.mass(np.full(problem.n, lo)) > budget:
        raise InfeasibleProblemError(
            f"mass budget {budget:.6g} is below the all-lower-bound mass {problem.mass(np.full(problem.n, lo)):.6g}"
        )
    c = restore_feasibility(problem, c, budget)
    trace = OptimizationTrace()

    C0 = evaluate(problem, c)[0]
    scale = C0 if C0 > 0 else 1.0

    def objective(cc):
        return evaluate(problem, cc)[0] / scale

    def grad_z(cc):
        return gradient(problem, cc) * width / scale

    J = objective(c)
    g = grad_z(c)
    n = problem.n
    B = np.eye(n) * max(np.linalg.norm(g), 1e-8)
    lam = 0.0

    def violation(cc):
        return max(0.0, problem.mass(cc) / budget - 1.0) if np.isfinite(budget) else 0.0

    def proj_grad(cc, gg, lm):
        z = (cc - lo) / width
        a = problem.mass_gradient(cc) * width / budget if np.isfinite(budget) else np.zeros(n)
        step = np.clip(z - (gg + lm * a), 0.0, 1.0) - z
        return float(np.linalg.norm(step, np.inf))

    trace.append(TraceRow(0, J * scale, problem.mass(c), violation(c), 0.0, proj_grad(c, g, 0.0), 0.0))
    status = "max_iterations"
    for it in range(1, max_iterations + 1):
        z = (c - lo) / width
        if hessian == "finite_difference":
            B = _fd_hessian(grad_z, c, g, problem.bounds)
            if np.isfinite(budget):
                B = B + lam * 2.0 * problem._Q * width**2 / budget
            B = _floor_spectrum(B)
        if np.isfinite(budget):
            a = problem.mass_gradient(c) * width / budget
            b = 1.0 - problem.mass(c) / budget
        else:
            a, b = np.zeros(n), np.inf
        d, lam = _qp_box_linear(B, g, a, b, -z, 1.0 - z)
        step = float(np.linalg.norm(d, np.inf))
        pg = proj_grad(c, g, lam)
        if step < step_tol or pg < gradient_tol:
            status = "converged"
            trace.append(TraceRow(it, J * scale, problem.mass(c), violation(c), step, pg, 0.0))
            break
        slope = float(g @ d)
        alpha = 1.0
        accepted = False
        while alpha > 1e-10:
            c_try = restore_feasibility(problem, lo + np.clip(z + alpha * d, 0.0, 1.0) * width, budget)
            J_try = objective(c_try)
            if J_try <= J + armijo * alpha * min(slope, 0.0) and J_try <= J:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            status = "line_search_stalled"
            trace.append(TraceRow(it, J * scale, problem.mass(c), violation(c), 0.0, pg, 0.0))
            break
        g_new = grad_z(c_try)
        s = (c_try - c) / width
        y = (g_new + lam * (problem.mass_gradient(c_try) * width / budget if np.isfinite(budget) else 0.0)) - (
            g + lam * a
        )
        B = _damped_bfgs(B, s, y)
        c, J, g = c_try, J_try, g_new
        trace.append(
            TraceRow(it, J * scale, problem.mass(c), violation(c), float(np.linalg.norm(s, np.inf)), proj_grad(c, g, lam), alpha)
        )
        if violation(c) > feasibility_tol:
            raise RuntimeError("accepted iterate violates the mass budget")
    trace.status = status
    return c, trace


def _fd_hessian(grad_z, c, g, bounds, step: float = 1e-5) -> np.ndarray:
    lo, hi = bounds
    width = hi - lo
    n = c.size
    H = np.zeros((n, n))
    for k in range(n):
        # step inward at the upper bound
        h = -step if c[k] + step * width > hi else step
        cp = c.copy()
        cp[k] += h * width
        H[:, k] = (grad_z(cp) - g) / h
    return 0.5 * (H + H.T)


def _floor_spectrum(B: np.ndarray, rel: float = 1e-6) -> np.ndarray:
    w, V = np.linalg.eigh(B)
    floor = rel * max(np.abs(w).max(), 1e-12)
    return (V * np.maximum(w, floor)) @ V.T


def _damped_bfgs(B: np.ndarray, s: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Powell-damped BFGS update, keeps B positive definite."""
    Bs = B @ s
    sBs = float(s @ Bs)
    if sBs <= 1e-300:
        return B
    sy = float(s @ y)
    theta = 1.0 if sy >= 0.2 * sBs else 0.8 * sBs / (sBs - sy)
    r = theta * y + (1 - theta) * Bs
    return B - np.outer(Bs, Bs) / sBs + np.outer(r, r) / float(s @ r)


def layer_means(field: ParameterField, grid, axis: int = 0) -> np.ndarray:
    """Field averaged over cell centres of each cell layer along ``axis``."""
    axes = [(np.arange(n) + 0.5) / n for n in grid]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    vals = field(pts.reshape(-1, 3)).reshape(pts.shape[:-1])
    other = tuple(a for a in range(3) if a != axis)
    return vals.mean(axis=other)
