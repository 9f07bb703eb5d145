"""Scalar fields on rectangles, queryable for exact two-jets.

A field is either backed by a parsed expression, differentiated with
forward-mode AD that carries (value, dx, dy, dxx, dxy, dyy) through every
operator, or by a uniformly sampled grid differentiated with second-order
finite-difference stencils (central in the interior, one-sided on the
boundary).  Everything downstream (causal classification, PDE residuals,
duality) consumes the same ``Jet2`` record.

Expression grammar (EBNF)::

    expr    = term , { ("+" | "-") , term } ;
    term    = factor , { ("*" | "/") , factor } ;
    factor  = "-" , factor | power ;
    power   = atom , [ "^" , factor ] ;          (* right-associative *)
    atom    = NUMBER | NAME | NAME , "(" , expr , { "," , expr } , ")"
            | "(" , expr , ")" ;

``NAME`` resolves, in order, to a declared variable (default ``x``, ``y``),
a function (sin cos tan exp log sqrt sinh cosh tanh atan atan2 asinh acosh
abs), a constant (``pi``, ``e``), or a bound parameter.  Precedence is
``^`` > unary minus > ``*`` ``/`` > ``+`` ``-``, so ``-x^2`` is ``-(x^2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence, Union

import numpy as np

from .errors import (
    ExpressionSyntaxError,
    NonDifferentiablePointError,
    OutOfDomainError,
    UnboundParameterError,
)

__all__ = [
    "Expression",
    "GraphField",
    "ExpressionField",
    "GridField",
    "Jet2",
    "Rect",
    "SampledGrid",
    "evaluate",
    "field_from_text",
    "free_parameters",
    "gradient",
    "parse",
    "sample",
    "to_text",
]


# --------------------------------------------------------------------------
# abstract syntax tree
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Const:
    name: str
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Param:
    name: str
    value: float


@dataclass(frozen=True)
class Neg:
    arg: "Expression"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    lhs: "Expression"
    rhs: "Expression"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


Expression = Union[Num, Const, Var, Param, Neg, BinOp, Call]

_FUNCTION_ARITY = {
    "sin": 1, "cos": 1, "tan": 1, "exp": 1, "log": 1, "sqrt": 1,
    "sinh": 1, "cosh": 1, "tanh": 1, "atan": 1, "atan2": 2,
    "asinh": 1, "acosh": 1, "abs": 1,
}
_CONSTANTS = {"pi": math.pi, "e": math.e}


# --------------------------------------------------------------------------
# tokenizer / parser
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class _Token:
    kind: str  # num | name | op | lparen | rparen | comma | end
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            lit = text[i:j]
            try:
                float(lit)
            except ValueError:
                raise ExpressionSyntaxError(f"bad numeric literal {lit!r}", i)
            tokens.append(_Token("num", lit, i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(_Token("name", text[i:j], i))
            i = j
            continue
        if c in "+-*/^":
            tokens.append(_Token("op", c, i))
        elif c == "(":
            tokens.append(_Token("lparen", c, i))
        elif c == ")":
            tokens.append(_Token("rparen", c, i))
        elif c == ",":
            tokens.append(_Token("comma", c, i))
        else:
            raise ExpressionSyntaxError(f"unexpected character {c!r}", i)
        i += 1
    tokens.append(_Token("end", "", n))
    return tokens


class _Parser:
    def __init__(self, tokens, params, variables):
        self.tokens = tokens
        self.k = 0
        self.params = params
        self.variables = variables

    def peek(self) -> _Token:
        return self.tokens[self.k]

    def next(self) -> _Token:
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def expect(self, kind: str, what: str) -> _Token:
        tok = self.next()
        if tok.kind != kind:
            raise ExpressionSyntaxError(f"expected {what}", tok.pos)
        return tok

    def parse_expr(self) -> Expression:
        node = self.parse_term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.next().text
            node = BinOp(op, node, self.parse_term())
        return node

    def parse_term(self) -> Expression:
        node = self.parse_factor()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.next().text
            node = BinOp(op, node, self.parse_factor())
        return node

    def parse_factor(self) -> Expression:
        if self.peek().kind == "op" and self.peek().text == "-":
            self.next()
            return Neg(self.parse_factor())
        return self.parse_power()

    def parse_power(self) -> Expression:
        base = self.parse_atom()
        if self.peek().kind == "op" and self.peek().text == "^":
            self.next()
            # exponent re-enters factor: right-associative, may carry a sign
            return BinOp("^", base, self.parse_factor())
        return base

    def parse_atom(self) -> Expression:
        tok = self.next()
        if tok.kind == "num":
            return Num(float(tok.text))
        if tok.kind == "lparen":
            node = self.parse_expr()
            self.expect("rparen", "')'")
            return node
        if tok.kind == "name":
            name = tok.text
            if self.peek().kind == "lparen":
                if name not in _FUNCTION_ARITY:
                    raise ExpressionSyntaxError(f"unknown function {name!r}", tok.pos)
                self.next()
                args = [self.parse_expr()]
                while self.peek().kind == "comma":
                    self.next()
                    args.append(self.parse_expr())
                self.expect("rparen", "')'")
                if len(args) != _FUNCTION_ARITY[name]:
                    raise ExpressionSyntaxError(
                        f"{name} takes {_FUNCTION_ARITY[name]} argument(s)", tok.pos)
                return Call(name, tuple(args))
            if name in self.variables:
                return Var(name)
            if name in _CONSTANTS:
                return Const(name, _CONSTANTS[name])
            if name in self.params:
                return Param(name, float(self.params[name]))
            raise UnboundParameterError(name, tok.pos)
        raise ExpressionSyntaxError("expected a value", tok.pos)


def parse(text: str,
          params: Mapping[str, float] | None = None,
          variables: Sequence[str] = ("x", "y")) -> Expression:
    """Parse expression text into an AST; every free name must be a declared
    variable, a known function/constant, or a key of ``params``."""
    parser = _Parser(_tokenize(text), dict(params or {}), tuple(variables))
    node = parser.parse_expr()
    tail = parser.peek()
    if tail.kind != "end":
        raise ExpressionSyntaxError("trailing input", tail.pos)
    return node


def free_parameters(expr: Expression) -> dict[str, float]:
    """Parameter bindings baked into an AST."""
    out: dict[str, float] = {}

    def walk(e):
        if isinstance(e, Param):
            out[e.name] = e.value
        elif isinstance(e, Neg):
            walk(e.arg)
        elif isinstance(e, BinOp):
            walk(e.lhs)
            walk(e.rhs)
        elif isinstance(e, Call):
            for a in e.args:
                walk(a)

    walk(expr)
    return out


# precedence levels for printing: add=1, mul=2, unary=3, pow=4, atom=5
_LEVEL = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def _level(expr: Expression) -> int:
    if isinstance(expr, BinOp):
        return _LEVEL[expr.op]
    if isinstance(expr, Neg):
        return 3
    return 5


def to_text(expr: Expression) -> str:
    """Render an AST back to parseable text with minimal parentheses.

    ``parse(to_text(parse(s)))`` is structurally identical to ``parse(s)``.
    """
    if isinstance(expr, Num):
        return repr(expr.value)
    if isinstance(expr, Const):
        return expr.name
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Param):
        return expr.name
    if isinstance(expr, Neg):
        inner = to_text(expr.arg)
        if _level(expr.arg) < 3:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(expr, Call):
        return f"{expr.func}({', '.join(to_text(a) for a in expr.args)})"
    if isinstance(expr, BinOp):
        lv = _LEVEL[expr.op]
        lhs, rhs = to_text(expr.lhs), to_text(expr.rhs)
        if expr.op == "^":
            # left operand binds tighter than ^ only at atom level
            if _level(expr.lhs) <= 4:
                lhs = f"({lhs})"
            if _level(expr.rhs) < 3:
                rhs = f"({rhs})"
            return f"{lhs}^{rhs}"
        if _level(expr.lhs) < lv:
            lhs = f"({lhs})"
        # all four are parsed left-associatively, so a same-level right
        # child only arises from a right-nested tree and needs parentheses
        if _level(expr.rhs) <= lv:
            rhs = f"({rhs})"
        return f"{lhs} {expr.op} {rhs}"
    raise TypeError(f"not an expression node: {expr!r}")


# --------------------------------------------------------------------------
# forward-mode jets of order two
# --------------------------------------------------------------------------

@dataclass
class Jet2:
    """Value, gradient and (symmetric) Hessian of a field at a point.

    Components are floats for point queries and ndarrays for lattice
    queries; all formulas downstream work elementwise on either.
    """

    value: float
    gx: float
    gy: float
    hxx: float
    hxy: float
    hyy: float

    @property
    def gradient(self):
        return (self.gx, self.gy)

    @property
    def hessian(self):
        return ((self.hxx, self.hxy), (self.hxy, self.hyy))


class _Jet:
    """Internal forward-AD carrier: value and partials through order two."""

    __slots__ = ("v", "dx", "dy", "dxx", "dxy", "dyy")

    def __init__(self, v, dx=0.0, dy=0.0, dxx=0.0, dxy=0.0, dyy=0.0):
        self.v, self.dx, self.dy = v, dx, dy
        self.dxx, self.dxy, self.dyy = dxx, dxy, dyy


def _jadd(a: _Jet, b: _Jet) -> _Jet:
    return _Jet(a.v + b.v, a.dx + b.dx, a.dy + b.dy,
                a.dxx + b.dxx, a.dxy + b.dxy, a.dyy + b.dyy)


def _jsub(a: _Jet, b: _Jet) -> _Jet:
    return _Jet(a.v - b.v, a.dx - b.dx, a.dy - b.dy,
                a.dxx - b.dxx, a.dxy - b.dxy, a.dyy - b.dyy)


def _jneg(a: _Jet) -> _Jet:
    return _Jet(-a.v, -a.dx, -a.dy, -a.dxx, -a.dxy, -a.dyy)


def _jmul(a: _Jet, b: _Jet) -> _Jet:
    return _Jet(
        a.v * b.v,
        a.dx * b.v + a.v * b.dx,
        a.dy * b.v + a.v * b.dy,
        a.dxx * b.v + 2.0 * a.dx * b.dx + a.v * b.dxx,
        a.dxy * b.v + a.dx * b.dy + a.dy * b.dx + a.v * b.dxy,
        a.dyy * b.v + 2.0 * a.dy * b.dy + a.v * b.dyy,
    )


def _chain(u: _Jet, f0, f1, f2) -> _Jet:
    """Unary composition f(u) given f, f', f'' at u.v."""
    return _Jet(
        f0,
        f1 * u.dx,
        f1 * u.dy,
        f2 * u.dx * u.dx + f1 * u.dxx,
        f2 * u.dx * u.dy + f1 * u.dxy,
        f2 * u.dy * u.dy + f1 * u.dyy,
    )


def _chain2(a: _Jet, b: _Jet, f0, fa, fb, faa, fab, fbb) -> _Jet:
    """Binary composition f(a, b) given all partials of f through order two."""
    return _Jet(
        f0,
        fa * a.dx + fb * b.dx,
        fa * a.dy + fb * b.dy,
        faa * a.dx * a.dx + 2.0 * fab * a.dx * b.dx + fbb * b.dx * b.dx
        + fa * a.dxx + fb * b.dxx,
        faa * a.dx * a.dy + fab * (a.dx * b.dy + a.dy * b.dx)
        + fbb * b.dx * b.dy + fa * a.dxy + fb * b.dxy,
        faa * a.dy * a.dy + 2.0 * fab * a.dy * b.dy + fbb * b.dy * b.dy
        + fa * a.dyy + fb * b.dyy,
    )


def _refuse(cond, message: str):
    if np.any(cond):
        raise NonDifferentiablePointError(message)


def _jrecip(b: _Jet) -> _Jet:
    _refuse(b.v == 0.0, "division by zero")
    inv = 1.0 / b.v
    return _chain(b, inv, -inv * inv, 2.0 * inv * inv * inv)


def _jdiv(a: _Jet, b: _Jet) -> _Jet:
    return _jmul(a, _jrecip(b))


def _jpow_int(base: _Jet, n: int) -> _Jet:
    if n < 0:
        return _jrecip(_jpow_int(base, -n))
    acc = _Jet(np.ones_like(base.v * 1.0))
    for _ in range(n):
        acc = _jmul(acc, base)
    return acc


def _jpow(base: _Jet, expo: _Jet, expo_node) -> _Jet:
    # integer literal exponents use repeated multiplication and keep
    # negative bases valid; everything else needs a strictly positive base
    if isinstance(expo_node, (Num, Param)) and float(expo_node.value).is_integer():
        return _jpow_int(base, int(expo_node.value))
    if isinstance(expo_node, Neg) and isinstance(expo_node.arg, (Num, Param)) \
            and float(expo_node.arg.value).is_integer():
        return _jpow_int(base, -int(expo_node.arg.value))
    _refuse(base.v <= 0.0, "power with non-integer exponent needs positive base")
    if isinstance(expo_node, (Num, Param, Const)) or (
            isinstance(expo_node, Neg) and isinstance(expo_node.arg, (Num, Param, Const))):
        p = expo.v
        f0 = base.v ** p
        return _chain(base, f0, p * base.v ** (p - 1.0),
                      p * (p - 1.0) * base.v ** (p - 2.0))
    return _jexp(_jmul(expo, _jlog(base)))


def _jexp(u: _Jet) -> _Jet:
    f0 = np.exp(u.v)
    return _chain(u, f0, f0, f0)


def _jlog(u: _Jet) -> _Jet:
    _refuse(u.v <= 0.0, "log needs a positive argument")
    inv = 1.0 / u.v
    return _chain(u, np.log(u.v), inv, -inv * inv)


def _jsqrt(u: _Jet) -> _Jet:
    _refuse(u.v <= 0.0, "sqrt differentiable only for positive argument")
    r = np.sqrt(u.v)
    return _chain(u, r, 0.5 / r, -0.25 / (r * u.v))


def _jatan2(a: _Jet, b: _Jet) -> _Jet:
    r2 = a.v * a.v + b.v * b.v
    _refuse(r2 == 0.0, "atan2 undefined at the origin")
    f0 = np.arctan2(a.v, b.v)
    fa = b.v / r2
    fb = -a.v / r2
    r4 = r2 * r2
    faa = -2.0 * a.v * b.v / r4
    fab = (a.v * a.v - b.v * b.v) / r4
    fbb = 2.0 * a.v * b.v / r4
    return _chain2(a, b, f0, fa, fb, faa, fab, fbb)


def _jabs(u: _Jet) -> _Jet:
    _refuse(u.v == 0.0, "abs not differentiable at zero")
    s = np.sign(u.v)
    return _chain(u, np.abs(u.v), s, 0.0)


def _jsin(u):
    s, c = np.sin(u.v), np.cos(u.v)
    return _chain(u, s, c, -s)


def _jcos(u):
    s, c = np.sin(u.v), np.cos(u.v)
    return _chain(u, c, -s, -c)


def _jtan(u):
    t = np.tan(u.v)
    sec2 = 1.0 + t * t
    return _chain(u, t, sec2, 2.0 * t * sec2)


def _jsinh(u):
    s, c = np.sinh(u.v), np.cosh(u.v)
    return _chain(u, s, c, s)


def _jcosh(u):
    s, c = np.sinh(u.v), np.cosh(u.v)
    return _chain(u, c, s, c)


def _jtanh(u):
    t = np.tanh(u.v)
    d = 1.0 - t * t
    return _chain(u, t, d, -2.0 * t * d)


def _jatan(u):
    d = 1.0 / (1.0 + u.v * u.v)
    return _chain(u, np.arctan(u.v), d, -2.0 * u.v * d * d)


def _jasinh(u):
    q = 1.0 + u.v * u.v
    r = np.sqrt(q)
    return _chain(u, np.arcsinh(u.v), 1.0 / r, -u.v / (q * r))


def _jacosh(u):
    _refuse(u.v <= 1.0, "acosh differentiable only for argument > 1")
    q = u.v * u.v - 1.0
    r = np.sqrt(q)
    return _chain(u, np.arccosh(u.v), 1.0 / r, -u.v / (q * r))


_UNARY_JET = {
    "sin": _jsin, "cos": _jcos, "tan": _jtan, "exp": _jexp, "log": _jlog,
    "sqrt": _jsqrt, "sinh": _jsinh, "cosh": _jcosh, "tanh": _jtanh,
    "atan": _jatan, "asinh": _jasinh, "acosh": _jacosh, "abs": _jabs,
}


def _eval_jet(expr: Expression, x, y) -> _Jet:
    if isinstance(expr, Num):
        return _Jet(expr.value)
    if isinstance(expr, (Const, Param)):
        return _Jet(expr.value)
    if isinstance(expr, Var):
        if expr.name == "x":
            return _Jet(x, 1.0, 0.0)
        if expr.name == "y":
            return _Jet(y, 0.0, 1.0)
        raise NonDifferentiablePointError(
            f"two-jet evaluation knows only x and y, not {expr.name!r}")
    if isinstance(expr, Neg):
        return _jneg(_eval_jet(expr.arg, x, y))
    if isinstance(expr, BinOp):
        a = _eval_jet(expr.lhs, x, y)
        if expr.op == "^":
            return _jpow(a, _eval_jet(expr.rhs, x, y), expr.rhs)
        b = _eval_jet(expr.rhs, x, y)
        if expr.op == "+":
            return _jadd(a, b)
        if expr.op == "-":
            return _jsub(a, b)
        if expr.op == "*":
            return _jmul(a, b)
        return _jdiv(a, b)
    if isinstance(expr, Call):
        if expr.func == "atan2":
            return _jatan2(_eval_jet(expr.args[0], x, y),
                           _eval_jet(expr.args[1], x, y))
        return _UNARY_JET[expr.func](_eval_jet(expr.args[0], x, y))
    raise TypeError(f"not an expression node: {expr!r}")


def expression_jet2(expr: Expression, x, y) -> Jet2:
    """Evaluate the exact two-jet of an expression at a point or on arrays.

    Any NaN or infinity in any component raises NonDifferentiablePointError
    instead of propagating into downstream classification.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    scalar = x.ndim == 0 and y.ndim == 0
    with np.errstate(all="ignore"):
        j = _eval_jet(expr, x + 0.0, y + 0.0)
    shape = np.broadcast_shapes(x.shape, y.shape)
    comps = []
    for comp in (j.v, j.dx, j.dy, j.dxx, j.dxy, j.dyy):
        arr = np.broadcast_to(np.asarray(comp, dtype=float), shape)
        if not np.all(np.isfinite(arr)):
            raise NonDifferentiablePointError("jet has non-finite components")
        comps.append(float(arr) if scalar else np.array(arr))
    return Jet2(*comps)


# --------------------------------------------------------------------------
# value-only and first-order evaluation over arbitrary variable sets
# (used by implicit validators and parametrized surfaces)
# --------------------------------------------------------------------------

def evaluate(expr: Expression, env: Mapping[str, float]):
    """Plain value of an expression; env maps variable names to numbers or
    arrays.  Raises NonDifferentiablePointError on undefined points."""
    v = _eval_value(expr, env)
    if not np.all(np.isfinite(v)):
        raise NonDifferentiablePointError("expression value is non-finite")
    return v


def _eval_value(expr, env):
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, (Const, Param)):
        return expr.value
    if isinstance(expr, Var):
        return np.asarray(env[expr.name], dtype=float)
    if isinstance(expr, Neg):
        return -_eval_value(expr.arg, env)
    if isinstance(expr, BinOp):
        a = _eval_value(expr.lhs, env)
        b = _eval_value(expr.rhs, env)
        if expr.op == "+":
            return a + b
        if expr.op == "-":
            return a - b
        if expr.op == "*":
            return a * b
        if expr.op == "/":
            _refuse(np.asarray(b) == 0.0, "division by zero")
            return a / b
        if isinstance(expr.rhs, (Num, Param)) and float(expr.rhs.value).is_integer():
            return a ** int(expr.rhs.value)
        _refuse(np.asarray(a) <= 0.0, "power needs positive base")
        return a ** b
    if isinstance(expr, Call):
        args = [_eval_value(arg, env) for arg in expr.args]
        return _VALUE_FN[expr.func](*args)
    raise TypeError(f"not an expression node: {expr!r}")


def _checked(fn, bad, message):
    def wrapped(u):
        _refuse(bad(np.asarray(u)), message)
        return fn(u)
    return wrapped


_VALUE_FN: dict[str, Callable] = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp,
    "log": _checked(np.log, lambda u: u <= 0.0, "log needs a positive argument"),
    "sqrt": _checked(np.sqrt, lambda u: u < 0.0, "sqrt needs a nonnegative argument"),
    "sinh": np.sinh, "cosh": np.cosh, "tanh": np.tanh,
    "atan": np.arctan, "atan2": np.arctan2,
    "asinh": np.arcsinh,
    "acosh": _checked(np.arccosh, lambda u: u < 1.0, "acosh needs argument >= 1"),
    "abs": np.abs,
}


def gradient(expr: Expression, env: Mapping[str, float]):
    """Value and first partials of an expression w.r.t. every env variable."""
    names = tuple(env.keys())
    v, g = _eval_grad(expr, names, env)
    if not np.all(np.isfinite(v)) or any(not np.all(np.isfinite(p)) for p in g):
        raise NonDifferentiablePointError("gradient has non-finite components")
    return v, dict(zip(names, g))


def _grad_chain(v, g, f0, f1):
    return f0, tuple(f1 * p for p in g)


def _eval_grad(expr, names, env):
    zero = tuple(0.0 for _ in names)
    if isinstance(expr, Num):
        return expr.value, zero
    if isinstance(expr, (Const, Param)):
        return expr.value, zero
    if isinstance(expr, Var):
        v = np.asarray(env[expr.name], dtype=float)
        return v, tuple(1.0 if n == expr.name else 0.0 for n in names)
    if isinstance(expr, Neg):
        v, g = _eval_grad(expr.arg, names, env)
        return -v, tuple(-p for p in g)
    if isinstance(expr, BinOp):
        av, ag = _eval_grad(expr.lhs, names, env)
        bv, bg = _eval_grad(expr.rhs, names, env)
        if expr.op == "+":
            return av + bv, tuple(p + q for p, q in zip(ag, bg))
        if expr.op == "-":
            return av - bv, tuple(p - q for p, q in zip(ag, bg))
        if expr.op == "*":
            return av * bv, tuple(p * bv + av * q for p, q in zip(ag, bg))
        if expr.op == "/":
            _refuse(np.asarray(bv) == 0.0, "division by zero")
            return av / bv, tuple((p * bv - av * q) / (bv * bv)
                                  for p, q in zip(ag, bg))
        if isinstance(expr.rhs, (Num, Param)) and float(expr.rhs.value).is_integer():
            n = int(expr.rhs.value)
            if n < 1:
                _refuse(np.asarray(av) == 0.0,
                        "power derivative undefined at zero base")
            v = av ** n
            return v, tuple(n * av ** (n - 1) * p for p in ag)
        _refuse(np.asarray(av) <= 0.0, "power needs positive base")
        v = av ** bv
        lg = np.log(av)
        return v, tuple(v * (q * lg + bv * p / av) for p, q in zip(ag, bg))
    if isinstance(expr, Call):
        if expr.func == "atan2":
            av, ag = _eval_grad(expr.args[0], names, env)
            bv, bg = _eval_grad(expr.args[1], names, env)
            r2 = av * av + bv * bv
            _refuse(np.asarray(r2) == 0.0, "atan2 undefined at the origin")
            v = np.arctan2(av, bv)
            return v, tuple((bv * p - av * q) / r2 for p, q in zip(ag, bg))
        uv, ug = _eval_grad(expr.args[0], names, env)
        f0, f1 = _GRAD_FN[expr.func](uv)
        return f0, tuple(f1 * p for p in ug)
    raise TypeError(f"not an expression node: {expr!r}")


def _g_log(u):
    _refuse(np.asarray(u) <= 0.0, "log needs a positive argument")
    return np.log(u), 1.0 / u


def _g_sqrt(u):
    _refuse(np.asarray(u) <= 0.0, "sqrt differentiable only for positive argument")
    r = np.sqrt(u)
    return r, 0.5 / r


def _g_acosh(u):
    _refuse(np.asarray(u) <= 1.0, "acosh differentiable only for argument > 1")
    return np.arccosh(u), 1.0 / np.sqrt(u * u - 1.0)


def _g_abs(u):
    _refuse(np.asarray(u) == 0.0, "abs not differentiable at zero")
    return np.abs(u), np.sign(u)


_GRAD_FN = {
    "sin": lambda u: (np.sin(u), np.cos(u)),
    "cos": lambda u: (np.cos(u), -np.sin(u)),
    "tan": lambda u: (np.tan(u), 1.0 + np.tan(u) ** 2),
    "exp": lambda u: (np.exp(u), np.exp(u)),
    "log": _g_log,
    "sqrt": _g_sqrt,
    "sinh": lambda u: (np.sinh(u), np.cosh(u)),
    "cosh": lambda u: (np.cosh(u), np.sinh(u)),
    "tanh": lambda u: (np.tanh(u), 1.0 - np.tanh(u) ** 2),
    "atan": lambda u: (np.arctan(u), 1.0 / (1.0 + u * u)),
    "asinh": lambda u: (np.arcsinh(u), 1.0 / np.sqrt(1.0 + u * u)),
    "acosh": _g_acosh,
    "abs": _g_abs,
}


# --------------------------------------------------------------------------
# domains and sampled grids
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Rect:
    """Closed axis-aligned rectangle [x0, x1] x [y0, y1]."""

    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError("rectangle needs x0 < x1 and y0 < y1")

    def contains(self, x, y) -> bool:
        padx = 1e-12 * (1.0 + abs(self.x0) + abs(self.x1))
        pady = 1e-12 * (1.0 + abs(self.y0) + abs(self.y1))
        return bool(np.all((x >= self.x0 - padx) & (x <= self.x1 + padx)
                           & (y >= self.y0 - pady) & (y <= self.y1 + pady)))

    def lattice(self, nx: int, ny: int):
        if nx < 2 or ny < 2:
            raise ValueError("lattice needs nx, ny >= 2")
        return (np.linspace(self.x0, self.x1, nx),
                np.linspace(self.y0, self.y1, ny))

    def meshgrid(self, nx: int, ny: int):
        xs, ys = self.lattice(nx, ny)
        return np.meshgrid(xs, ys, indexing="ij")


def _d1(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Second-order first derivative along an axis: central inside,
    one-sided three-point stencils on the boundary rows."""
    v = np.moveaxis(values, axis, 0)
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - v[:-2]) / (2.0 * h)
    out[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
    out[-1] = (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * h)
    return np.moveaxis(out, 0, axis)


def _d2(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Second derivative along an axis; one-sided four-point stencils on the
    boundary keep second order when at least 4 nodes are available."""
    v = np.moveaxis(values, axis, 0)
    out = np.empty_like(v)
    h2 = h * h
    out[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / h2
    if v.shape[0] >= 4:
        out[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / h2
        out[-1] = (2.0 * v[-1] - 5.0 * v[-2] + 4.0 * v[-3] - v[-4]) / h2
    else:
        out[0] = (v[0] - 2.0 * v[1] + v[2]) / h2
        out[-1] = out[0]
    return np.moveaxis(out, 0, axis)


class SampledGrid:
    """Uniform lattice of field values, row-major with the x index outermost.

    Jets at nodes come from second-order stencils; they are computed once
    and cached.  Construction is single-writer; a built grid is read-only.
    """

    def __init__(self, xs: np.ndarray, ys: np.ndarray, values: np.ndarray):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        values = np.asarray(values, dtype=float)
        if xs.size < 3 or ys.size < 3:
            raise ValueError("sampled grids need nx, ny >= 3")
        if values.shape != (xs.size, ys.size):
            raise ValueError(f"values shape {values.shape} does not match "
                             f"lattice {(xs.size, ys.size)}")
        for arr in (xs, ys):
            steps = np.diff(arr)
            if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
                raise ValueError("lattice spacing must be uniform")
        self.xs = xs
        self.ys = ys
        self.values = values
        self.hx = float(xs[1] - xs[0])
        self.hy = float(ys[1] - ys[0])
        self._jets = None

    @property
    def nx(self) -> int:
        return self.xs.size

    @property
    def ny(self) -> int:
        return self.ys.size

    def _jet_tables(self):
        if self._jets is None:
            v = self.values
            gx = _d1(v, self.hx, 0)
            gy = _d1(v, self.hy, 1)
            self._jets = Jet2(v, gx, gy,
                              _d2(v, self.hx, 0),
                              _d1(gy, self.hx, 0),
                              _d2(v, self.hy, 1))
        return self._jets

    def nearest_node(self, x: float, y: float) -> tuple[int, int]:
        i = int(round((x - self.xs[0]) / self.hx))
        j = int(round((y - self.ys[0]) / self.hy))
        return min(max(i, 0), self.nx - 1), min(max(j, 0), self.ny - 1)

    def jet_at_node(self, i: int, j: int) -> Jet2:
        t = self._jet_tables()
        return Jet2(float(t.value[i, j]), float(t.gx[i, j]), float(t.gy[i, j]),
                    float(t.hxx[i, j]), float(t.hxy[i, j]), float(t.hyy[i, j]))


# --------------------------------------------------------------------------
# graph fields
# --------------------------------------------------------------------------

class GraphField:
    """A scalar field on a rectangle, queryable for two-jets.

    Immutable after construction; all queries are pure, so instances are
    safe to share across threads.  ``jet_mode`` is "exact" when derivatives
    come from AD (or analytic transforms of AD) and "lattice" when they are
    finite-difference tables.
    """

    jet_mode = "exact"

    def __init__(self, domain: Rect, name: str = ""):
        self.domain = domain
        self.name = name

    # subclasses implement the unchecked jet
    def _jet2(self, x, y) -> Jet2:
        raise NotImplementedError

    def jet2(self, x: float, y: float) -> Jet2:
        """Two-jet at a point; queries outside the domain are rejected."""
        if not self.domain.contains(x, y):
            raise OutOfDomainError(
                f"({x}, {y}) outside domain "
                f"[{self.domain.x0}, {self.domain.x1}] x "
                f"[{self.domain.y0}, {self.domain.y1}]")
        return self._jet2(float(x), float(y))

    def jet2_grid(self, X: np.ndarray, Y: np.ndarray) -> Jet2:
        """Vectorized two-jets; components come back as arrays."""
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        if not self.domain.contains(X, Y):
            raise OutOfDomainError("lattice extends outside the field domain")
        return self._jet2_grid(X, Y)

    def _jet2_grid(self, X, Y) -> Jet2:
        shape = np.broadcast_shapes(X.shape, Y.shape)
        comps = [np.empty(shape) for _ in range(6)]
        Xb = np.broadcast_to(X, shape)
        Yb = np.broadcast_to(Y, shape)
        for idx in np.ndindex(shape):
            j = self._jet2(float(Xb[idx]), float(Yb[idx]))
            for c, val in zip(comps, (j.value, j.gx, j.gy, j.hxx, j.hxy, j.hyy)):
                c[idx] = val
        return Jet2(*comps)

    def value(self, x: float, y: float) -> float:
        return self.jet2(x, y).value

    def sample(self, nx: int, ny: int) -> SampledGrid:
        """Field values on the uniform nx-by-ny lattice of the domain."""
        if nx < 3 or ny < 3:
            raise ValueError("sample needs nx, ny >= 3")
        X, Y = self.domain.meshgrid(nx, ny)
        return SampledGrid(self.domain.lattice(nx, ny)[0],
                           self.domain.lattice(nx, ny)[1],
                           np.asarray(self.jet2_grid(X, Y).value))

    def default_tau_light(self) -> float:
        """Light-like tolerance matched to the jet accuracy of the source."""
        return 1e-9


class ExpressionField(GraphField):
    """Field backed by a parsed expression; jets are exact forward-mode AD."""

    def __init__(self, expr: Expression, domain: Rect, name: str = ""):
        super().__init__(domain, name or to_text(expr))
        self.expr = expr
        self.params = free_parameters(expr)

    def _jet2(self, x, y) -> Jet2:
        return expression_jet2(self.expr, x, y)

    def _jet2_grid(self, X, Y) -> Jet2:
        return expression_jet2(self.expr, X, Y)

    def __repr__(self):
        return f"ExpressionField({self.name!r})"


class GridField(GraphField):
    """Field backed by a sampled grid; jets are O(h^2) finite differences.

    Point queries snap to the nearest lattice node (the grid carries no
    information between nodes); out-of-domain queries are still rejected.
    """

    jet_mode = "lattice"

    def __init__(self, grid: SampledGrid, name: str = ""):
        domain = Rect(float(grid.xs[0]), float(grid.xs[-1]),
                      float(grid.ys[0]), float(grid.ys[-1]))
        super().__init__(domain, name or "sampled grid")
        self.grid = grid

    def _jet2(self, x, y) -> Jet2:
        i, j = self.grid.nearest_node(x, y)
        return self.grid.jet_at_node(i, j)

    def _jet2_grid(self, X, Y) -> Jet2:
        t = self.grid._jet_tables()
        ii = np.clip(np.rint((X - self.grid.xs[0]) / self.grid.hx), 0,
                     self.grid.nx - 1).astype(int)
        jj = np.clip(np.rint((Y - self.grid.ys[0]) / self.grid.hy), 0,
                     self.grid.ny - 1).astype(int)
        return Jet2(t.value[ii, jj], t.gx[ii, jj], t.gy[ii, jj],
                    t.hxx[ii, jj], t.hxy[ii, jj], t.hyy[ii, jj])

    def default_tau_light(self) -> float:
        return 10.0 * max(self.grid.hx, self.grid.hy) ** 2

    def __repr__(self):
        return f"GridField({self.grid.nx}x{self.grid.ny}, {self.name!r})"


def field_from_text(text: str, domain: Rect,
                    params: Mapping[str, float] | None = None,
                    name: str = "") -> ExpressionField:
    """Parse expression text and wrap it as a field on ``domain``."""
    return ExpressionField(parse(text, params), domain, name or text)


def sample(field: GraphField, nx: int, ny: int) -> SampledGrid:
    return field.sample(nx, ny)
