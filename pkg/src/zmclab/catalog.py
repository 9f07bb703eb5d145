"""Catalog of explicit ZMC surfaces: generators and validators.

Covers the shear family psi = y + g(x) with its dual potential, the null
cylinder (a circular cylinder along a light-like axis, carrying two
parallel degenerate light-like lines), a properly embedded mixed-type
surface foliated by circles, the time-like graph confined to a vertical
slab, and the helicoid / Lorentzian-catenoid dual pair.  Every parametric
surface ships with an implicit validator so other modules can cross-check
its image without trusting the parametrization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainViolationError, ZeroDerivativeError
from .exprfield import (
    BinOp,
    Expression,
    ExpressionField,
    GraphField,
    Jet2,
    Rect,
    Var,
    evaluate,
    expression_jet2,
    gradient,
    parse,
    to_text,
)
from .duality import _simpson

__all__ = [
    "CATALOG",
    "ImplicitValidator",
    "ParametricSurface",
    "PotentialField",
    "emit",
    "entire_graph_pair",
    "helicoid_catenoid_pair",
    "mixed_type_surface",
    "null_cylinder",
    "timelike_slab",
]


# --------------------------------------------------------------------------
# parametric surfaces and implicit validators
# --------------------------------------------------------------------------

@dataclass
class ParametricSurface:
    """Map (u, v) -> (x, y, t) given by component expressions."""

    x_expr: Expression
    y_expr: Expression
    t_expr: Expression
    u_range: tuple
    v_range: tuple
    u_name: str = "u"
    v_name: str = "v"
    params: dict = field(default_factory=dict)

    def point(self, u, v):
        env = {self.u_name: u, self.v_name: v}
        return (evaluate(self.x_expr, env), evaluate(self.y_expr, env),
                evaluate(self.t_expr, env))

    def tangent_u(self, u: float, v: float):
        """First partials of (x, y, t) along the u parameter."""
        env = {self.u_name: u, self.v_name: v}
        out = []
        for comp in (self.x_expr, self.y_expr, self.t_expr):
            _, g = gradient(comp, env)
            out.append(g[self.u_name])
        return tuple(out)

    def grid(self, nu: int, nv: int):
        us = np.linspace(self.u_range[0], self.u_range[1], nu)
        vs = np.linspace(self.v_range[0], self.v_range[1], nv)
        U, V = np.meshgrid(us, vs, indexing="ij")
        return self.point(U, V)


@dataclass
class ImplicitValidator:
    """Scalar G(x, y, t) whose zero set should contain a surface image."""

    expr: Expression
    tol: float = 1e-10

    def value(self, x, y, t):
        return evaluate(self.expr, {"x": x, "y": y, "t": t})

    def gradient_norm(self, x, y, t):
        _, g = gradient(self.expr, {"x": x, "y": y, "t": t})
        return np.sqrt(g["x"] ** 2 + g["y"] ** 2 + g["t"] ** 2)

    def max_abs_on(self, surface: ParametricSurface, nu: int = 50,
                   nv: int = 50) -> float:
        x, y, t = surface.grid(nu, nv)
        return float(np.max(np.abs(self.value(x, y, t))))

    def min_gradient_norm_on(self, surface: ParametricSurface,
                             n: int = 100) -> float:
        k = max(2, int(math.ceil(math.sqrt(n))))
        x, y, t = surface.grid(k, k)
        norms = self.gradient_norm(x.ravel(), y.ravel(), t.ravel())
        return float(np.min(norms[: n] if norms.size >= n else norms))


# --------------------------------------------------------------------------
# the shear family psi0 = y + g(x) and its dual potential
# --------------------------------------------------------------------------

class PotentialField(GraphField):
    """Dual potential of y + g(x): phi = y - integral of 1/g'.

    Values integrate 1/g' by adaptive Simpson from the reference abscissa
    (0 when the domain allows it, else the nearest domain edge);
    derivatives are closed forms of the jets of g, so phi_x = -1/g'(x),
    phi_y = 1, phi_xx = g''/g'^2.
    """

    def __init__(self, g_expr: Expression, domain: Rect,
                 quad_tol: float = 1e-12, name: str = ""):
        super().__init__(domain, name or f"dual of y + {to_text(g_expr)}")
        self.g_expr = g_expr
        self.quad_tol = quad_tol
        self.x_ref = min(max(0.0, domain.x0), domain.x1)
        self._cache: dict[float, float] = {self.x_ref: 0.0}

    def _gjet(self, x):
        return expression_jet2(self.g_expr, x, 0.0)

    def _integral(self, x: float) -> float:
        got = self._cache.get(x)
        if got is None:
            def integrand(ts):
                j = self._gjet(ts)
                return np.broadcast_to(1.0 / j.gx, np.shape(ts))
            got = _simpson(integrand, self.x_ref, x, self.quad_tol)
            self._cache[x] = got
        return got

    def _jet2(self, x, y) -> Jet2:
        j = self._gjet(x)
        gp, gpp = j.gx, j.hxx
        return Jet2(y - self._integral(x), -1.0 / gp, 1.0,
                    gpp / (gp * gp), 0.0, 0.0)


def entire_graph_pair(g_text: str, params: dict | None = None,
                      domain: Rect = Rect(-1.0, 1.0, -1.0, 1.0),
                      phi_domain: Rect | None = None,
                      quad_tol: float = 1e-12):
    """Entire ZMC graph psi = y + g(x) and, on request, its dual potential.

    psi has B = -g'(x)^2, hence no space-like points, and is light-like
    (degenerately) exactly on the vertical lines where g' vanishes.  The
    potential is built only when ``phi_domain`` is given; it raises
    ZeroDerivativeError if g' vanishes anywhere on that domain.
    """
    g_expr = parse(g_text, params)

    def uses_y(e):
        if isinstance(e, Var):
            return e.name == "y"
        if isinstance(e, BinOp):
            return uses_y(e.lhs) or uses_y(e.rhs)
        if hasattr(e, "arg"):
            return uses_y(e.arg)
        if hasattr(e, "args"):
            return any(uses_y(a) for a in e.args)
        return False

    if uses_y(g_expr):
        raise ValueError("g must be a function of x alone")

    psi = ExpressionField(BinOp("+", Var("y"), g_expr), domain,
                          name=f"y + {to_text(g_expr)}")
    phi = None
    if phi_domain is not None:
        probe = np.linspace(phi_domain.x0, phi_domain.x1, 513)
        gp = expression_jet2(g_expr, probe, np.zeros_like(probe)).gx
        if np.any(gp == 0.0) or np.any(gp[1:] * gp[:-1] < 0.0):
            raise ZeroDerivativeError(
                "g' vanishes inside the requested potential domain")
        phi = PotentialField(g_expr, phi_domain, quad_tol)
    return psi, phi


# --------------------------------------------------------------------------
# explicit surfaces
# --------------------------------------------------------------------------

def null_cylinder(a: float = 1.0, x_extent: float = 1.0,
                  u_range: tuple = (-1.5, 1.5), y_frac: float = 0.9):
    """Circular cylinder of radius ``a`` along the light-like axis (1,0,1).

    Image: (x - t)^2 + y^2 = a^2.  Carries two parallel degenerate
    light-like lines (parameter v = +/- pi/2, i.e. y = 0 on each graph
    branch t = x -/+ sqrt(a^2 - y^2)).
    """
    if a <= 0:
        raise ValueError("radius must be positive")
    p = {"a": float(a)}
    surface = ParametricSurface(
        x_expr=parse("u + a*cos(v)", p, variables=("u", "v")),
        y_expr=parse("a*sin(v)", p, variables=("u", "v")),
        t_expr=parse("u", p, variables=("u", "v")),
        u_range=u_range, v_range=(0.0, 2.0 * math.pi), params=p)
    validator = ImplicitValidator(
        parse("(x - t)^2 + y^2 - a^2", p, variables=("x", "y", "t")))
    ylim = y_frac * a
    dom = Rect(-x_extent, x_extent, -ylim, ylim)
    lower = ExpressionField(parse("x - sqrt(a^2 - y^2)", p), dom,
                            name="null cylinder, lower branch")
    upper = ExpressionField(parse("x + sqrt(a^2 - y^2)", p), dom,
                            name="null cylinder, upper branch")
    return surface, validator, (lower, upper)


def mixed_type_surface(a: float = 1.0, r_range: tuple = (1.2, 3.0)):
    """Properly embedded mixed-type ZMC surface foliated by circles.

    Parametrized for r > 1/a (outer branch) by
    (r + L(r) + r cos(theta), r sin(theta), L(r)) with
    L(r) = log((a r - 1)/(a r + 1)) / (2 a); the closure satisfies
    a sinh(a t) ((x - t)^2 + y^2) + 2 (x - t) cosh(a t) = 0 with a nowhere
    vanishing gradient along it, which `regularity_min_gradient` samples.
    """
    if a <= 0:
        raise ValueError("a must be positive")
    if r_range[0] <= 1.0 / a:
        raise DomainViolationError(
            f"outer branch needs r > 1/a = {1.0 / a}; got r_min = {r_range[0]}")
    p = {"a": float(a)}
    log_part = "(1/(2*a)) * log((a*r - 1)/(a*r + 1))"
    surface = ParametricSurface(
        x_expr=parse(f"r + {log_part} + r*cos(theta)", p,
                     variables=("r", "theta")),
        y_expr=parse("r*sin(theta)", p, variables=("r", "theta")),
        t_expr=parse(log_part, p, variables=("r", "theta")),
        u_range=r_range, v_range=(0.0, 2.0 * math.pi),
        u_name="r", v_name="theta", params=p)
    validator = ImplicitValidator(
        parse("a*sinh(a*t)*((x - t)^2 + y^2) + 2*(x - t)*cosh(a*t)", p,
              variables=("x", "y", "t")))
    return surface, validator


def timelike_slab(delta: float = 0.15, y_extent: float = 4.0) -> ExpressionField:
    """Properly embedded time-like ZMC graph phi = y + log(tan x) confined
    between the vertical planes x = 0 and x = pi/2 (a window of the slab;
    |phi| blows up toward both walls at fixed y)."""
    if not 0.0 < delta < math.pi / 4:
        raise ValueError("delta must lie in (0, pi/4)")
    dom = Rect(delta, math.pi / 2 - delta, -y_extent, y_extent)
    return ExpressionField(parse("y + log(tan(x))"), dom, name="time-like slab")


def helicoid_catenoid_pair(domain: Rect = Rect(1.0, 2.0, 1.0, 2.0)):
    """The dual pair: helicoid graph atan2(y, x) (minimal in E^3) and the
    Lorentzian catenoid graph -asinh(r) (space-like ZMC in L^3)."""
    phi = ExpressionField(parse("atan2(y, x)"), domain, name="helicoid")
    psi = ExpressionField(parse("-asinh(sqrt(x^2 + y^2))"), domain,
                          name="Lorentzian catenoid")
    return phi, psi


# --------------------------------------------------------------------------
# CLI-facing registry
# --------------------------------------------------------------------------

def _field_entry(expr_text, domain, params=None, note=""):
    return {
        "kind": "field",
        "field": {"expr": expr_text, "params": params or {},
                  "domain": [domain.x0, domain.x1, domain.y0, domain.y1]},
        "note": note,
    }


def _catalog():
    helicoid_dom = Rect(1.0, 2.0, 1.0, 2.0)
    slab = timelike_slab()
    shear_dom = Rect(-1.0, 1.0, -1.0, 1.0)
    sin_dom = Rect(0.0, 2.0 * math.pi, -1.0, 1.0)
    cyl_surface, cyl_validator, cyl_branches = null_cylinder()
    mix_surface, mix_validator = mixed_type_surface()
    return {
        "plane": _field_entry("0.3*x + 0.4*y", Rect(-1, 1, -1, 1),
                              note="space-like plane, B = 0.75"),
        "helicoid": _field_entry("atan2(y, x)", helicoid_dom,
                                 note="minimal graph; dual of the Lorentzian catenoid"),
        "lorentzian-catenoid": _field_entry(
            "-asinh(sqrt(x^2 + y^2))", helicoid_dom,
            note="space-like ZMC graph; dual of the helicoid"),
        "timelike-slab": _field_entry(
            "y + log(tan(x))", slab.domain,
            note="time-like ZMC graph between two vertical planes"),
        "shear-linear": _field_entry("y + x", shear_dom,
                                     note="shear graph, B = -1 everywhere"),
        "shear-parabola": _field_entry(
            "y + x^2", shear_dom,
            note="shear graph; degenerate light-like line x = 0"),
        "shear-sine": _field_entry(
            "y + sin(x)", sin_dom,
            note="shear graph; degenerate lines at the zeros of cos"),
        "shear-exp": _field_entry("y + exp(x)", shear_dom,
                                  note="shear graph, no light-like points"),
        "null-cylinder": {
            "kind": "parametric",
            "parametric": {
                "x": to_text(cyl_surface.x_expr),
                "y": to_text(cyl_surface.y_expr),
                "t": to_text(cyl_surface.t_expr),
                "u_range": list(cyl_surface.u_range),
                "v_range": list(cyl_surface.v_range),
                "params": cyl_surface.params,
            },
            "implicit": to_text(cyl_validator.expr),
            "branches": [
                {"expr": "x - sqrt(a^2 - y^2)", "params": {"a": 1.0},
                 "domain": [cyl_branches[0].domain.x0,
                            cyl_branches[0].domain.x1,
                            cyl_branches[0].domain.y0,
                            cyl_branches[0].domain.y1]},
                {"expr": "x + sqrt(a^2 - y^2)", "params": {"a": 1.0},
                 "domain": [cyl_branches[1].domain.x0,
                            cyl_branches[1].domain.x1,
                            cyl_branches[1].domain.y0,
                            cyl_branches[1].domain.y1]},
            ],
            "note": "cylinder along a light-like axis; degenerate lines y = 0",
        },
        "mixed-type-surface": {
            "kind": "parametric",
            "parametric": {
                "x": to_text(mix_surface.x_expr),
                "y": to_text(mix_surface.y_expr),
                "t": to_text(mix_surface.t_expr),
                "u_range": list(mix_surface.u_range),
                "v_range": list(mix_surface.v_range),
                "params": mix_surface.params,
            },
            "implicit": to_text(mix_validator.expr),
            "note": "properly embedded mixed-type surface foliated by circles",
        },
    }


CATALOG = _catalog()


def emit(name: str) -> dict:
    if name not in CATALOG:
        raise KeyError(f"unknown catalog entry {name!r}; "
                       f"known: {', '.join(sorted(CATALOG))}")
    out = {"schema": 1, "name": name}
    out.update(CATALOG[name])
    return out
