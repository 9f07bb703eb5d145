"""The fluid-mechanical duality between stream functions and potentials.

A graph psi with B = 1 - psi_x^2 - psi_y^2 of constant sign eps is the
stream function of a Chaplygin gas flow (rho c = 1).  Its dual potential
phi satisfies grad phi = (psi_y, -psi_x) / sqrt(eps B); conversely
grad psi = (-phi_y, phi_x) / sqrt(|grad phi|^2 + eps).  The duality pairs
minimal graphs in E^3 with space-like ZMC graphs in L^3 (eps = +1) and
acts on time-like ZMC graphs (eps = -1), where applying it twice negates
the gradient (a 90-degree rotation composed with a positive scalar,
squared).

``dualize`` reconstructs the dual potential on a lattice by integrating
the dual one-form along axis-aligned L-paths with adaptive composite
Simpson quadrature; a two-path defect doubles as an exactness test: the
form is closed iff the source solves its PDE.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (
    DegenerateDenominatorError,
    NonExactFormError,
    OutOfDomainError,
    QuadratureError,
    SonicPointError,
)
from .exprfield import GraphField, GridField, Jet2, Rect, SampledGrid

__all__ = [
    "ChaplyginState",
    "DualDirection",
    "DualField",
    "DualResult",
    "FlowRegime",
    "chaplygin_state",
    "divergence_probe",
    "double_dual_check",
    "dual_one_form",
    "dualize",
    "one_form_curl",
]

#: default per-segment quadrature tolerance for L-path integration
QUAD_TOL = 1e-10
#: path-independence defect beyond this multiple of the quadrature
#: tolerance means the one-form is not closed
NONEXACT_FACTOR = 100.0


class FlowRegime(Enum):
    SUBSONIC = "sub-sonic"
    SUPERSONIC = "super-sonic"
    SONIC = "sonic"


class DualDirection(Enum):
    TO_POTENTIAL = "to-potential"  # stream function psi -> potential phi
    TO_STREAM = "to-stream"        # potential phi -> stream function psi


@dataclass
class ChaplyginState:
    """Pointwise state of the Chaplygin gas flow attached to a stream
    function: rho * sound_speed = 1 and |velocity|^2 + epsilon = c^2."""

    epsilon: int
    rho: float
    velocity: tuple
    sound_speed: float
    pressure: float
    p0: float
    regime: FlowRegime

    @property
    def speed(self) -> float:
        return math.hypot(*self.velocity)


def chaplygin_state(f: GraphField, x: float, y: float, p0: float = 0.0,
                    tau_light: float | None = None) -> ChaplyginState:
    """Reconstruct density, velocity, sound speed and pressure at a point.

    epsilon = sign(B), rho = sqrt(eps * B), velocity = (psi_y, -psi_x)/rho,
    c = 1/rho, p = p0 - 1/rho.  Raises SonicPointError where |B| is inside
    the light-like tolerance (rho would vanish).
    """
    tau_light = f.default_tau_light() if tau_light is None else tau_light
    j = f.jet2(x, y)
    b = 1.0 - j.gx * j.gx - j.gy * j.gy
    if abs(b) <= tau_light:
        raise SonicPointError(f"flow state undefined at sonic point ({x}, {y})")
    eps = 1 if b > 0 else -1
    rho = math.sqrt(eps * b)
    return ChaplyginState(
        epsilon=eps,
        rho=rho,
        velocity=(j.gy / rho, -j.gx / rho),
        sound_speed=1.0 / rho,
        pressure=p0 - 1.0 / rho,
        p0=p0,
        regime=FlowRegime.SUBSONIC if eps > 0 else FlowRegime.SUPERSONIC,
    )


# --------------------------------------------------------------------------
# the dual one-form and its analytic jet transform
# --------------------------------------------------------------------------

def _check_epsilon(epsilon: int) -> int:
    if epsilon not in (1, -1):
        raise ValueError("epsilon must be +1 or -1")
    return int(epsilon)


def _dual_jet_parts(j: Jet2, direction: DualDirection, epsilon: int,
                    tau: float):
    """Gradient, unsymmetrized cross partials and pure second partials of
    the dual field, all from the source jet.  Works elementwise on arrays.

    Returns (w1, w2, d_y w1, d_x w2, d_x w1, d_y w2).
    """
    eps = float(epsilon)
    if direction == DualDirection.TO_POTENTIAL:
        r2 = eps * (1.0 - j.gx * j.gx - j.gy * j.gy)
        bad = r2 <= tau
        if np.any(bad):
            b = 1.0 - j.gx * j.gx - j.gy * j.gy
            if np.any(np.abs(b) <= tau):
                raise SonicPointError("dual one-form hit a sonic point")
            raise DegenerateDenominatorError(
                "sign of B does not match requested epsilon")
        rho = np.sqrt(r2)
        w1 = j.gy / rho
        w2 = -j.gx / rho
        rho_x = -eps * (j.gx * j.hxx + j.gy * j.hxy) / rho
        rho_y = -eps * (j.gx * j.hxy + j.gy * j.hyy) / rho
        w1_y = j.hyy / rho - j.gy * rho_y / r2
        w2_x = -j.hxx / rho + j.gx * rho_x / r2
        w1_x = j.hxy / rho - j.gy * rho_x / r2
        w2_y = -j.hxy / rho + j.gx * rho_y / r2
        return w1, w2, w1_y, w2_x, w1_x, w2_y

    s2 = j.gx * j.gx + j.gy * j.gy + eps
    if np.any(s2 <= tau):
        raise DegenerateDenominatorError(
            "|grad phi|^2 + epsilon not positive: dual gradient undefined")
    s = np.sqrt(s2)
    w1 = -j.gy / s
    w2 = j.gx / s
    s_x = (j.gx * j.hxx + j.gy * j.hxy) / s
    s_y = (j.gx * j.hxy + j.gy * j.hyy) / s
    w1_y = -j.hyy / s + j.gy * s_y / s2
    w2_x = j.hxx / s - j.gx * s_x / s2
    w1_x = -j.hxy / s + j.gy * s_x / s2
    w2_y = j.hxy / s - j.gx * s_y / s2
    return w1, w2, w1_y, w2_x, w1_x, w2_y


def dual_one_form(f: GraphField, x, y, direction: DualDirection,
                  epsilon: int, tau: float | None = None):
    """Components (w1, w2) of the dual one-form at a point (or arrays).

    TO_POTENTIAL: (psi_y, -psi_x)/sqrt(eps B); TO_STREAM:
    (-phi_y, phi_x)/sqrt(|grad phi|^2 + eps).
    """
    epsilon = _check_epsilon(epsilon)
    tau = f.default_tau_light() if tau is None else tau
    j = f.jet2_grid(np.asarray(x, dtype=float), np.asarray(y, dtype=float)) \
        if np.ndim(x) or np.ndim(y) else f.jet2(x, y)
    w1, w2, *_ = _dual_jet_parts(j, direction, epsilon, tau)
    return w1, w2


def dual_jet(j: Jet2, direction: DualDirection, epsilon: int,
             tau: float, value=np.nan) -> Jet2:
    """Two-jet of the dual field from a source jet (Hessian symmetrized)."""
    w1, w2, w1_y, w2_x, w1_x, w2_y = _dual_jet_parts(j, direction, epsilon, tau)
    return Jet2(value, w1, w2, w1_x, 0.5 * (w1_y + w2_x), w2_y)


def one_form_curl(f: GraphField, x, y, direction: DualDirection,
                  epsilon: int, tau: float | None = None):
    """d_y w1 - d_x w2: zero exactly when the source solves its PDE."""
    epsilon = _check_epsilon(epsilon)
    tau = f.default_tau_light() if tau is None else tau
    j = f.jet2_grid(np.asarray(x, dtype=float), np.asarray(y, dtype=float)) \
        if np.ndim(x) or np.ndim(y) else f.jet2(x, y)
    _, _, w1_y, w2_x, _, _ = _dual_jet_parts(j, direction, epsilon, tau)
    return w1_y - w2_x


# --------------------------------------------------------------------------
# quadrature
# --------------------------------------------------------------------------

def _simpson(g, a: float, b: float, tol: float) -> float:
    """Composite Simpson with doubling refinement until two successive
    refinements differ by less than tol (relative once the integral
    outgrows unit scale; float accumulation forbids more)."""
    if a == b:
        return 0.0
    n = 2
    ts = np.linspace(a, b, n + 1)
    vals = g(ts)
    h = (b - a) / n
    prev = h / 3.0 * (vals[0] + 4.0 * vals[1] + vals[2])
    while n <= 2 ** 18:
        n *= 2
        ts = np.linspace(a, b, n + 1)
        vals = g(ts)
        h = (b - a) / n
        cur = h / 3.0 * (vals[0] + vals[-1]
                         + 4.0 * np.sum(vals[1:-1:2])
                         + 2.0 * np.sum(vals[2:-1:2]))
        delta = abs(cur - prev)
        if delta < tol * max(1.0, abs(cur)):
            return cur
        prev = cur
    raise QuadratureError(
        f"Simpson refinement stalled on [{a}, {b}] (last delta "
        f"{delta:.3e} vs tol {tol:.1e})")


def _corrected_trapezoid(g0, g1, d0, d1, h: float) -> float:
    """Endpoint-corrected trapezoid (Euler-Maclaurin, O(h^4)); used for
    lattice-backed sources whose jets exist only at nodes."""
    return h * 0.5 * (g0 + g1) - h * h / 12.0 * (d1 - d0)


# --------------------------------------------------------------------------
# dualize: potential recovery by L-path integration
# --------------------------------------------------------------------------

@dataclass
class DualResult:
    """Sampled dual field plus the path-independence diagnostics."""

    field: "DualField"
    base: tuple
    base_value: float
    direction: DualDirection
    epsilon: int
    path_scheme: str
    defect: float
    quad_tol: float


class DualField(GraphField):
    """Dual of a parent field: values from path integration on a lattice,
    gradient and Hessian transformed analytically from the parent's jets.

    Point values snap to the nearest lattice node; derivative components
    are evaluated at the exact query point whenever the parent has exact
    jets, so residual and round-trip checks are quadrature-independent.
    """

    def __init__(self, parent: GraphField, grid: SampledGrid,
                 direction: DualDirection, epsilon: int, tau: float,
                 name: str = ""):
        super().__init__(Rect(float(grid.xs[0]), float(grid.xs[-1]),
                              float(grid.ys[0]), float(grid.ys[-1])),
                         name or f"dual({parent.name})")
        self.parent = parent
        self.grid = grid
        self.direction = direction
        self.epsilon = epsilon
        self.tau = tau

    @property
    def jet_mode(self):  # inherits accuracy from the parent
        return self.parent.jet_mode

    def _value_at(self, x, y):
        ii = np.clip(np.rint((np.asarray(x) - self.grid.xs[0]) / self.grid.hx),
                     0, self.grid.nx - 1).astype(int)
        jj = np.clip(np.rint((np.asarray(y) - self.grid.ys[0]) / self.grid.hy),
                     0, self.grid.ny - 1).astype(int)
        return self.grid.values[ii, jj]

    def _jet2(self, x, y) -> Jet2:
        pj = self.parent.jet2(x, y)
        return dual_jet(pj, self.direction, self.epsilon, self.tau,
                        value=float(self._value_at(x, y)))

    def _jet2_grid(self, X, Y) -> Jet2:
        pj = self.parent.jet2_grid(X, Y)
        return dual_jet(pj, self.direction, self.epsilon, self.tau,
                        value=self._value_at(X, Y))

    def default_tau_light(self) -> float:
        return self.parent.default_tau_light()


def _axis_segment(f, fixed: float, a: float, b: float, along_x: bool,
                  direction, epsilon, tau, quad_tol: float) -> float:
    """Integral of the matching one-form component over one axis segment."""
    if a == b:
        return 0.0
    if f.jet_mode == "exact":
        if along_x:
            def g(ts):
                w1, _ = dual_one_form(f, ts, np.full_like(ts, fixed),
                                      direction, epsilon, tau)
                return np.broadcast_to(w1, ts.shape)
        else:
            def g(ts):
                _, w2 = dual_one_form(f, np.full_like(ts, fixed), ts,
                                      direction, epsilon, tau)
                return np.broadcast_to(w2, ts.shape)
        return _simpson(g, a, b, quad_tol)
    # lattice-backed parent: node-anchored corrected trapezoid
    if along_x:
        j0 = dual_jet(f.jet2(a, fixed), direction, epsilon, tau)
        j1 = dual_jet(f.jet2(b, fixed), direction, epsilon, tau)
        return _corrected_trapezoid(j0.gx, j1.gx, j0.hxx, j1.hxx, b - a)
    j0 = dual_jet(f.jet2(fixed, a), direction, epsilon, tau)
    j1 = dual_jet(f.jet2(fixed, b), direction, epsilon, tau)
    return _corrected_trapezoid(j0.gy, j1.gy, j0.hyy, j1.hyy, b - a)


def _cumulative(f, fixed: float, start: float, stops: np.ndarray,
                along_x: bool, direction, epsilon, tau, quad_tol):
    """Cumulative segment integrals from ``start`` to each stop (sorted
    ascending); integration runs through consecutive gaps only once."""
    out = np.empty(stops.size)
    right = np.searchsorted(stops, start)
    acc, prev = 0.0, start
    for k in range(right, stops.size):
        acc += _axis_segment(f, fixed, prev, float(stops[k]), along_x,
                             direction, epsilon, tau, quad_tol)
        out[k] = acc
        prev = float(stops[k])
    acc, prev = 0.0, start
    for k in range(right - 1, -1, -1):
        acc += _axis_segment(f, fixed, prev, float(stops[k]), along_x,
                             direction, epsilon, tau, quad_tol)
        out[k] = acc
        prev = float(stops[k])
    return out


def dualize(f: GraphField, res: tuple, base: tuple,
            base_value: float = 0.0,
            direction: DualDirection = DualDirection.TO_POTENTIAL,
            epsilon: int = 1,
            domain: Rect | None = None,
            quad_tol: float = QUAD_TOL,
            defect_nodes: int = 20) -> DualResult:
    """Recover the dual field on a lattice by integrating the dual one-form.

    Every node value comes from an x-first L-path from ``base``: one spine
    integration along the base row, then per-column vertical runs (the
    columns are independent of each other once the spine exists).  The
    path-independence defect is the maximum x-first vs y-first discrepancy
    over ``defect_nodes`` pseudo-random nodes (fixed seed, deterministic).
    A defect above 100x the quadrature tolerance raises NonExactFormError:
    the source does not solve the PDE matching the requested direction.
    """
    epsilon = _check_epsilon(epsilon)
    domain = f.domain if domain is None else domain
    nx, ny = res
    if nx < 3 or ny < 3:
        raise ValueError("dualize needs res >= 3x3")
    bx, by = float(base[0]), float(base[1])
    if not domain.contains(bx, by):
        raise OutOfDomainError(f"base point ({bx}, {by}) outside the domain")
    tau = f.default_tau_light()
    xs, ys = domain.lattice(nx, ny)

    if f.jet_mode == "lattice":
        # node-anchored quadrature: the lattice must live on the parent nodes
        g = f.grid if isinstance(f, (GridField, DualField)) else None
        if g is None or not (np.allclose(xs, g.xs) and np.allclose(ys, g.ys)):
            raise ValueError("lattice-backed sources dualize on their own grid")
        i0 = int(round((bx - xs[0]) / g.hx))
        j0 = int(round((by - ys[0]) / g.hy))
        if abs(bx - xs[i0]) > 1e-9 * g.hx or abs(by - ys[j0]) > 1e-9 * g.hy:
            raise ValueError("lattice-backed sources need the base on a node")
        bx, by = float(xs[i0]), float(ys[j0])
        quad_eff = max(g.hx, g.hy) ** 2
    else:
        quad_eff = quad_tol

    # spine along the base row, then one vertical run per column
    spine = _cumulative(f, by, bx, xs, True, direction, epsilon, tau, quad_tol)
    values = np.empty((nx, ny))
    for i, xi in enumerate(xs):
        col = _cumulative(f, float(xi), by, ys, False, direction, epsilon,
                          tau, quad_tol)
        values[i, :] = base_value + spine[i] + col

    # two-path defect on a deterministic pseudo-random node subset
    rng = np.random.default_rng(0)
    count = min(defect_nodes, nx * ny)
    picks = rng.choice(nx * ny, size=count, replace=False)
    base_col = _cumulative(f, bx, by, ys, False, direction, epsilon, tau,
                           quad_tol)
    defect = 0.0
    for p in picks:
        i, jj = divmod(int(p), ny)
        if f.jet_mode == "lattice":
            # stay node-by-node; long hops lose the O(h^4) correction
            row_val = _cumulative(f, float(ys[jj]), bx, xs, True, direction,
                                  epsilon, tau, quad_tol)[i]
        else:
            row_val = _cumulative(f, float(ys[jj]), bx, xs[i:i + 1], True,
                                  direction, epsilon, tau, quad_tol)[0]
        yfirst = base_value + base_col[jj] + row_val
        defect = max(defect, abs(values[i, jj] - yfirst))

    if defect > NONEXACT_FACTOR * quad_eff:
        raise NonExactFormError(
            f"path-independence defect {defect:.3e} exceeds "
            f"{NONEXACT_FACTOR:g} x {quad_eff:.1e}: one-form is not closed "
            "(source does not solve the matching PDE)", defect)

    grid = SampledGrid(xs, ys, values)
    out_field = DualField(f, grid, direction, epsilon, tau)
    return DualResult(out_field, (bx, by), float(base_value), direction,
                      epsilon, "L-paths, x-first", float(defect), quad_tol)


# --------------------------------------------------------------------------
# involution checks and the divergence probe
# --------------------------------------------------------------------------

def double_dual_check(f: GraphField, res: tuple, epsilon: int,
                      domain: Rect | None = None,
                      quad_tol: float = QUAD_TOL) -> dict:
    """Apply the duality twice and compare gradients with the source.

    eps = +1 chain (to-stream then to-potential): the double dual must
    reproduce grad f.  eps = -1 chain (to-stream twice): the double dual
    negates the gradient.  Returns both the gradient defect and the two
    path-independence defects.
    """
    epsilon = _check_epsilon(epsilon)
    domain = f.domain if domain is None else domain
    base = (0.5 * (domain.x0 + domain.x1), 0.5 * (domain.y0 + domain.y1))
    first = dualize(f, res, base, 0.0, DualDirection.TO_STREAM, epsilon,
                    domain=domain, quad_tol=quad_tol)
    second_dir = (DualDirection.TO_POTENTIAL if epsilon > 0
                  else DualDirection.TO_STREAM)
    second = dualize(first.field, res, base, 0.0, second_dir, epsilon,
                     domain=domain, quad_tol=quad_tol)

    X, Y = domain.meshgrid(*res)
    j0 = f.jet2_grid(X, Y)
    j2 = second.field.jet2_grid(X, Y)
    sign = 1.0 if epsilon > 0 else -1.0
    defect = float(np.max(np.hypot(j2.gx - sign * j0.gx,
                                   j2.gy - sign * j0.gy)))
    return {
        "epsilon": epsilon,
        "relation": "identity" if epsilon > 0 else "gradient-negation",
        "gradient_defect": defect,
        "path_defects": [first.defect, second.defect],
    }


def divergence_probe(f: GraphField, xs, y: float,
                     anchor: float | None = None,
                     epsilon: int | None = None,
                     quad_tol: float = 1e-9,
                     tau: float | None = None) -> np.ndarray:
    """|phi| along a horizontal approach to a degenerate light-like line.

    ``xs`` must decrease strictly toward the line; the potential is
    integrated cumulatively from (anchor, y) through each x.  The caller
    inspects monotone growth; near a degenerate line at x0 the values
    diverge as x -> x0.  ``tau`` overrides the sonic guard, which a probe
    pushing close to the line must keep below min |B| on the path; the
    quadrature tolerance is softer than dualize's because cancellation in
    B caps the integrand accuracy near the line at about eps/|B|.
    """
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 1 or xs.size == 0 or np.any(np.diff(xs) >= 0.0):
        raise ValueError("xs must be strictly decreasing")
    anchor = float(xs[0]) if anchor is None else float(anchor)
    if epsilon is None:
        j = f.jet2(anchor, y)
        b = 1.0 - j.gx * j.gx - j.gy * j.gy
        epsilon = 1 if b > 0 else -1
    epsilon = _check_epsilon(epsilon)
    tau = f.default_tau_light() if tau is None else float(tau)

    out = np.empty(xs.size)
    acc, prev = 0.0, anchor
    for k, xk in enumerate(xs):
        acc += _axis_segment(f, float(y), prev, float(xk), True,
                             DualDirection.TO_POTENTIAL, epsilon, tau,
                             quad_tol)
        out[k] = abs(acc)
        prev = float(xk)
    return out
