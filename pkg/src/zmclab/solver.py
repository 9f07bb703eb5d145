"""Finite-difference damped-Newton solver for the elliptic Dirichlet problems.

Two equations share one quasilinear stencil form,

    (1 + s*py^2) pxx - 2 s px py pxy + (1 + s*px^2) pyy = 0,

with s = +1 for the minimal-surface equation and s = -1 for the maximal
(space-like ZMC) equation.  Discretization is second-order central
differences on a uniform rectangle, with the four-diagonal cross stencil
for the mixed derivative.  Newton iterations use the analytic Jacobian of
the stencil, a halving line search on the residual sup-norm, and ILU-
preconditioned GMRES inner solves.  The maximal equation is elliptic only
while the interior stays space-like; iterates that lose B > 0 abort with
CausalTypeViolationError.  The time-like equation is hyperbolic where
|grad| > 1, so Dirichlet problems for it are ill-posed and not offered.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    CausalTypeViolationError,
    LinearSolveError,
    MaxIterationsError,
    SolverError,
)
from .exprfield import GridField, Rect, SampledGrid, parse

__all__ = [
    "DirichletProblem",
    "EquationKind",
    "GridSolution",
    "convergence_report",
    "discrete_residual",
    "solve",
]

NEWTON_TOL = 1e-10
MAX_NEWTON = 50
MAX_HALVINGS = 30
LINEAR_RTOL = 1e-10
MIN_INTERIOR_B = 1e-8


class EquationKind(Enum):
    MINIMAL = "minimal"
    MAXIMAL = "maximal"

    @property
    def sigma(self) -> float:
        return 1.0 if self is EquationKind.MINIMAL else -1.0


BoundaryData = Union[str, Callable[[float, float], float], np.ndarray]


@dataclass
class DirichletProblem:
    """Dirichlet problem on a rectangle lattice.

    ``boundary`` is an expression string, a callable f(x, y), or a full
    (nx, ny) array whose boundary ring supplies the data.  The initial
    guess policy is "harmonic" (discrete harmonic extension of the
    boundary) or "flat" (boundary mean).
    """

    equation: EquationKind
    domain: Rect
    nx: int
    ny: int
    boundary: BoundaryData
    params: dict = field(default_factory=dict)
    initial_guess: str = "harmonic"
    newton_tol: float = NEWTON_TOL
    max_newton: int = MAX_NEWTON
    max_halvings: int = MAX_HALVINGS
    linear_rtol: float = LINEAR_RTOL
    min_b: float = MIN_INTERIOR_B

    def __post_init__(self):
        if isinstance(self.equation, str):
            self.equation = EquationKind(self.equation)
        if self.nx < 5 or self.ny < 5:
            raise ValueError("Dirichlet lattice needs nx, ny >= 5")
        if self.initial_guess not in ("harmonic", "flat"):
            raise ValueError("initial_guess must be 'harmonic' or 'flat'")

    def lattice(self):
        return self.domain.lattice(self.nx, self.ny)

    def spacing(self):
        xs, ys = self.lattice()
        return float(xs[1] - xs[0]), float(ys[1] - ys[0])


@dataclass
class GridSolution:
    """Converged lattice values with the convergence bookkeeping."""

    equation: EquationKind
    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray
    iterations: int
    final_residual: float
    residual_history: list
    damping_history: list
    min_interior_b: float | None
    converged: bool = True

    def field(self, name: str = "") -> GridField:
        return GridField(SampledGrid(self.xs, self.ys, self.values),
                         name or f"{self.equation.value} solution")

    def report(self) -> dict:
        out = {
            "status": "converged" if self.converged else "failed",
            "equation": self.equation.value,
            "resolution": [int(self.xs.size), int(self.ys.size)],
            "iterations": self.iterations,
            "final_residual": self.final_residual,
            "residual_history": list(map(float, self.residual_history)),
            "damping_history": list(map(float, self.damping_history)),
        }
        if self.min_interior_b is not None:
            out["min_interior_b"] = float(self.min_interior_b)
        return out


def _interior_derivatives(v: np.ndarray, hx: float, hy: float):
    px = (v[2:, 1:-1] - v[:-2, 1:-1]) / (2.0 * hx)
    py = (v[1:-1, 2:] - v[1:-1, :-2]) / (2.0 * hy)
    pxx = (v[2:, 1:-1] - 2.0 * v[1:-1, 1:-1] + v[:-2, 1:-1]) / hx ** 2
    pyy = (v[1:-1, 2:] - 2.0 * v[1:-1, 1:-1] + v[1:-1, :-2]) / hy ** 2
    pxy = (v[2:, 2:] - v[2:, :-2] - v[:-2, 2:] + v[:-2, :-2]) / (4.0 * hx * hy)
    return px, py, pxx, pyy, pxy


def discrete_residual(values: np.ndarray, equation: EquationKind,
                      hx: float, hy: float) -> np.ndarray:
    """Per-node stencil residual on the interior, shape (nx-2, ny-2)."""
    values = np.asarray(values, dtype=float)
    if values.shape[0] < 5 or values.shape[1] < 5:
        raise ValueError("discrete residual needs a lattice of at least 5x5")
    if isinstance(equation, str):
        equation = EquationKind(equation)
    s = equation.sigma
    px, py, pxx, pyy, pxy = _interior_derivatives(values, hx, hy)
    return ((1.0 + s * py * py) * pxx
            - 2.0 * s * px * py * pxy
            + (1.0 + s * px * px) * pyy)


def interior_b(values: np.ndarray, hx: float, hy: float) -> np.ndarray:
    """Discrete B = 1 - px^2 - py^2 on interior nodes."""
    px, py, *_ = _interior_derivatives(np.asarray(values, dtype=float), hx, hy)
    return 1.0 - px * px - py * py


def _jacobian(values: np.ndarray, equation: EquationKind,
              hx: float, hy: float) -> sp.csr_matrix:
    """Analytic Jacobian of the stencil residual w.r.t. interior unknowns."""
    s = equation.sigma
    nx, ny = values.shape
    mx, my = nx - 2, ny - 2
    px, py, pxx, pyy, pxy = _interior_derivatives(values, hx, hy)
    A = 1.0 + s * py * py
    C = 1.0 + s * px * px
    D = -2.0 * s * px * py

    cross = D / (4.0 * hx * hy)
    coeffs = {
        (0, 0): -2.0 * A / hx ** 2 - 2.0 * C / hy ** 2,
        (1, 0): A / hx ** 2 + s * (px * pyy - py * pxy) / hx,
        (-1, 0): A / hx ** 2 - s * (px * pyy - py * pxy) / hx,
        (0, 1): C / hy ** 2 + s * (py * pxx - px * pxy) / hy,
        (0, -1): C / hy ** 2 - s * (py * pxx - px * pxy) / hy,
        (1, 1): cross, (-1, -1): cross,
        (1, -1): -cross, (-1, 1): -cross,
    }

    ii, jj = np.meshgrid(np.arange(mx), np.arange(my), indexing="ij")
    row_id = ii * my + jj
    rows, cols, vals = [], [], []
    for (di, dj), cof in coeffs.items():
        ni, nj = ii + di, jj + dj
        keep = (ni >= 0) & (ni < mx) & (nj >= 0) & (nj < my)
        rows.append(row_id[keep])
        cols.append((ni * my + nj)[keep])
        vals.append(np.broadcast_to(cof, row_id.shape)[keep])
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(mx * my, mx * my))


def _iterative_solve(A: sp.csr_matrix, b: np.ndarray, rtol: float) -> np.ndarray:
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b)
    try:
        ilu = spla.spilu(sp.csc_matrix(A), drop_tol=1e-6, fill_factor=20.0)
    except RuntimeError as exc:
        raise LinearSolveError(f"ILU factorization failed: {exc}") from exc
    M = spla.LinearOperator(A.shape, ilu.solve)
    x, info = spla.gmres(A, b, rtol=rtol, atol=0.0, restart=80,
                         maxiter=400, M=M)
    if info != 0:
        raise LinearSolveError(f"GMRES did not converge (info={info})")
    rel = float(np.linalg.norm(A @ x - b)) / bnorm
    if rel > 10.0 * rtol:
        raise LinearSolveError(f"linear solve residual {rel:.3e} above "
                               f"tolerance {rtol:.1e}")
    return x


def _boundary_mask(nx: int, ny: int) -> np.ndarray:
    m = np.zeros((nx, ny), dtype=bool)
    m[0, :] = m[-1, :] = m[:, 0] = m[:, -1] = True
    return m


def _boundary_values(problem: DirichletProblem) -> np.ndarray:
    """Lattice array with the Dirichlet ring filled; the interior is zero
    until the initial-guess policy overwrites it.  Only ring nodes are ever
    evaluated, so data singular in the interior stays usable."""
    xs, ys = problem.lattice()
    vals = np.zeros((problem.nx, problem.ny))
    if isinstance(problem.boundary, np.ndarray):
        arr = np.asarray(problem.boundary, dtype=float)
        if arr.shape != (problem.nx, problem.ny):
            raise ValueError("boundary array must match the lattice shape")
        vals = arr.copy()
    else:
        if callable(problem.boundary):
            def ring(px, py):
                return np.vectorize(problem.boundary)(px, py).astype(float)
        else:
            expr = parse(problem.boundary, problem.params)
            from .exprfield import evaluate

            def ring(px, py):
                return np.broadcast_to(
                    np.asarray(evaluate(expr, {"x": px, "y": py}),
                               dtype=float), np.shape(px))
        vals[0, :] = ring(np.full_like(ys, xs[0]), ys)
        vals[-1, :] = ring(np.full_like(ys, xs[-1]), ys)
        vals[:, 0] = ring(xs, np.full_like(xs, ys[0]))
        vals[:, -1] = ring(xs, np.full_like(xs, ys[-1]))
    if not np.all(np.isfinite(vals[_boundary_mask(problem.nx, problem.ny)])):
        raise ValueError("boundary data must be finite")
    return vals


def _harmonic_extension(vals: np.ndarray, hx: float, hy: float) -> np.ndarray:
    """Fill the interior with the discrete harmonic extension of the ring."""
    nx, ny = vals.shape
    mx, my = nx - 2, ny - 2
    ax, ay = 1.0 / hx ** 2, 1.0 / hy ** 2
    ii, jj = np.meshgrid(np.arange(mx), np.arange(my), indexing="ij")
    row_id = (ii * my + jj).ravel()
    diag = np.full(mx * my, -2.0 * (ax + ay))
    rows, cols, data = [row_id], [row_id], [diag]
    rhs = np.zeros(mx * my)
    for di, dj, w in ((1, 0, ax), (-1, 0, ax), (0, 1, ay), (0, -1, ay)):
        ni, nj = ii + di, jj + dj
        inside = (ni >= 0) & (ni < mx) & (nj >= 0) & (nj < my)
        rows.append(row_id[inside.ravel()])
        cols.append((ni * my + nj)[inside].ravel())
        data.append(np.full(int(inside.sum()), w))
        # boundary neighbours contribute to the right-hand side
        bi, bj = ii[~inside] + 1 + di, jj[~inside] + 1 + dj
        rhs_idx = row_id[(~inside).ravel()]
        np.add.at(rhs, rhs_idx, -w * vals[bi, bj])
    A = sp.csr_matrix((np.concatenate(data),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(mx * my, mx * my))
    interior = spla.spsolve(A, rhs)
    out = vals.copy()
    out[1:-1, 1:-1] = interior.reshape(mx, my)
    return out


def _initial_guess(problem: DirichletProblem, vals: np.ndarray) -> np.ndarray:
    if problem.initial_guess == "flat":
        out = vals.copy()
        ring = vals[_boundary_mask(problem.nx, problem.ny)]
        out[1:-1, 1:-1] = float(ring.mean())
        return out
    hx, hy = problem.spacing()
    return _harmonic_extension(vals, hx, hy)


def _check_causal(problem: DirichletProblem, values: np.ndarray,
                  hx: float, hy: float, iteration: int, history):
    if problem.equation is not EquationKind.MAXIMAL:
        return None
    bmin = float(np.min(interior_b(values, hx, hy)))
    if bmin <= problem.min_b:
        raise CausalTypeViolationError(
            f"interior discrete B reached {bmin:.3e} at iteration "
            f"{iteration}: maximal equation lost ellipticity",
            report={
                "status": "failed", "error": "causal-type-violation",
                "equation": problem.equation.value,
                "iterations": iteration,
                "min_interior_b": bmin,
                "last_residual": history[-1] if history else None,
            })
    return bmin


def solve(problem: DirichletProblem) -> GridSolution:
    """Damped Newton iteration on the interior unknowns.

    Terminates successfully when the residual sup-norm drops below
    ``newton_tol`` (always after at least one Newton step); raises
    MaxIterationsError on stagnation or iteration exhaustion.
    """
    hx, hy = problem.spacing()
    xs, ys = problem.lattice()
    vals = _boundary_values(problem)
    u = _initial_guess(problem, vals)

    res_history: list[float] = []
    damping: list[float] = []
    r = discrete_residual(u, problem.equation, hx, hy)
    rnorm = float(np.max(np.abs(r)))
    res_history.append(rnorm)
    bmin = _check_causal(problem, u, hx, hy, 0, res_history)

    iterations = 0
    for it in range(1, problem.max_newton + 1):
        J = _jacobian(u, problem.equation, hx, hy)
        try:
            delta = _iterative_solve(J, -r.ravel(), problem.linear_rtol)
        except LinearSolveError as exc:
            exc.report = {"status": "failed", "error": exc.code,
                          "equation": problem.equation.value,
                          "iterations": it, "last_residual": rnorm}
            raise
        step = delta.reshape(r.shape)

        alpha = 1.0
        accepted = False
        for _ in range(problem.max_halvings + 1):
            trial = u.copy()
            trial[1:-1, 1:-1] += alpha * step
            r_try = discrete_residual(trial, problem.equation, hx, hy)
            rn_try = float(np.max(np.abs(r_try)))
            if rn_try < rnorm or rn_try < problem.newton_tol:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            if rnorm < problem.newton_tol:
                break  # stagnating at machine level: already converged
            raise MaxIterationsError(
                f"line search stagnated after {problem.max_halvings} "
                f"halvings (residual {rnorm:.3e})",
                report={"status": "failed", "error": "max-iterations",
                        "equation": problem.equation.value,
                        "iterations": it, "last_residual": rnorm})

        u, r, rnorm = trial, r_try, rn_try
        iterations = it
        res_history.append(rnorm)
        damping.append(alpha)
        bmin = _check_causal(problem, u, hx, hy, it, res_history)
        if rnorm < problem.newton_tol:
            break
    else:
        raise MaxIterationsError(
            f"no convergence in {problem.max_newton} Newton iterations "
            f"(residual {rnorm:.3e})",
            report={"status": "failed", "error": "max-iterations",
                    "equation": problem.equation.value,
                    "iterations": problem.max_newton,
                    "last_residual": rnorm})

    return GridSolution(
        equation=problem.equation,
        xs=xs, ys=ys, values=u,
        iterations=max(iterations, 1),
        final_residual=rnorm,
        residual_history=res_history,
        damping_history=damping,
        min_interior_b=bmin,
    )


def convergence_report(result) -> dict:
    """Summary dict for a GridSolution or a failed-solve SolverError."""
    if isinstance(result, GridSolution):
        return result.report()
    if isinstance(result, SolverError):
        out = {"status": "failed", "error": result.code,
               "message": str(result)}
        out.update(result.report)
        return out
    raise TypeError("expected a GridSolution or a SolverError")
