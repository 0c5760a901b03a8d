"""Expression trees: parsing, evaluation, intervals, symbolic derivatives.

The node set is deliberately small: constants, named variables, {neg, sin,
cos, exp, log, sqrt}, {+, -, *, /} and integer powers.  Trees are immutable;
every transformation returns a new tree, so expressions are safe to share
across worker threads.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import (
    DimensionMismatchError,
    DomainError,
    ExprSyntaxError,
    UndeclaredVariableError,
)
from .intervals import Box, Interval


class Expr:
    """Base class; construction helpers so trees compose readably."""

    def __add__(self, other) -> "Expr":
        return Binary("add", self, _as_expr(other))

    def __radd__(self, other) -> "Expr":
        return Binary("add", _as_expr(other), self)

    def __sub__(self, other) -> "Expr":
        return Binary("sub", self, _as_expr(other))

    def __rsub__(self, other) -> "Expr":
        return Binary("sub", _as_expr(other), self)

    def __mul__(self, other) -> "Expr":
        return Binary("mul", self, _as_expr(other))

    def __rmul__(self, other) -> "Expr":
        return Binary("mul", _as_expr(other), self)

    def __truediv__(self, other) -> "Expr":
        return Binary("div", self, _as_expr(other))

    def __rtruediv__(self, other) -> "Expr":
        return Binary("div", _as_expr(other), self)

    def __pow__(self, n: int) -> "Expr":
        return Power(self, int(n))

    def __neg__(self) -> "Expr":
        return Unary("neg", self)


@dataclass(frozen=True)
class Const(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Unary(Expr):
    op: str  # neg | sin | cos | exp | log | sqrt
    arg: Expr


@dataclass(frozen=True)
class Binary(Expr):
    op: str  # add | sub | mul | div
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class Power(Expr):
    base: Expr
    exponent: int


ZERO = Const(0.0)
ONE = Const(1.0)

_FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")


def _as_expr(v) -> Expr:
    if isinstance(v, Expr):
        return v
    if isinstance(v, (int, float)):
        return Const(float(v))
    raise TypeError(f"cannot treat {v!r} as an expression")


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            if text[pos].isspace():
                pos += 1
                continue
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup == "num":
            tokens.append(("num", m.group("num"), m.start("num")))
        elif m.lastgroup == "ident":
            tokens.append(("ident", m.group("ident"), m.start("ident")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("eof", "", len(text)))
    return tokens


class _Parser:
    """Recursive descent over: expr -> term -> unary -> power -> atom."""

    def __init__(self, text: str, variables: Sequence[str]):
        self.text = text
        self.variables = set(variables)
        self.tokens = _tokenize(text)
        self.index = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.index]

    def advance(self) -> tuple[str, str, int]:
        tok = self.tokens[self.index]
        self.index += 1
        return tok

    def expect_op(self, op: str) -> None:
        kind, value, pos = self.advance()
        if kind != "op" or value != op:
            raise ExprSyntaxError(f"expected {op!r}, found {value!r}", pos)

    def parse(self) -> Expr:
        e = self.expr()
        kind, value, pos = self.peek()
        if kind != "eof":
            raise ExprSyntaxError(f"unexpected trailing input {value!r}", pos)
        return e

    def expr(self) -> Expr:
        node = self.term()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "+-":
                self.advance()
                rhs = self.term()
                node = Binary("add" if value == "+" else "sub", node, rhs)
            else:
                return node

    def term(self) -> Expr:
        node = self.unary()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "*/":
                self.advance()
                rhs = self.unary()
                node = Binary("mul" if value == "*" else "div", node, rhs)
            else:
                return node

    def unary(self) -> Expr:
        kind, value, _ = self.peek()
        if kind == "op" and value in "+-":
            self.advance()
            inner = self.unary()
            return inner if value == "+" else Unary("neg", inner)
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        kind, value, pos = self.peek()
        if kind == "op" and value == "^":
            self.advance()
            exponent = self.unary()  # right-associative; binds tighter than unary minus on the base
            folded = simplify(exponent)
            if not isinstance(folded, Const) or folded.value != int(folded.value):
                raise ExprSyntaxError("exponent must be an integer constant", pos)
            return Power(base, int(folded.value))
        return base

    def atom(self) -> Expr:
        kind, value, pos = self.advance()
        if kind == "num":
            return Const(float(value))
        if kind == "ident":
            nxt_kind, nxt_value, _ = self.peek()
            if nxt_kind == "op" and nxt_value == "(":
                if value not in _FUNCTIONS:
                    raise ExprSyntaxError(f"unknown function '{value}'", pos)
                self.advance()
                arg = self.expr()
                self.expect_op(")")
                return Unary(value, arg)
            if value not in self.variables:
                raise UndeclaredVariableError(value, pos)
            return Var(value)
        if kind == "op" and value == "(":
            inner = self.expr()
            self.expect_op(")")
            return inner
        raise ExprSyntaxError(f"unexpected token {value!r}", pos)


def parse(text: str, variables: Sequence[str]) -> Expr:
    """Parse an ASCII math expression over the declared variable names.

    Accepts the Unicode minus sign as '-'.  Precedence, tightest first:
    ^ (integer exponent), unary -, * /, + -.
    """
    normalized = text.replace("−", "-")
    return _Parser(normalized, variables).parse()


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def evaluate(e: Expr, env: Mapping[str, float]) -> float:
    """Exact floating evaluation with eager domain checks."""
    match e:
        case Const(value):
            return value
        case Var(name):
            try:
                return float(env[name])
            except KeyError:
                raise UndeclaredVariableError(name) from None
        case Unary("neg", arg):
            return -evaluate(arg, env)
        case Unary("sin", arg):
            return math.sin(evaluate(arg, env))
        case Unary("cos", arg):
            return math.cos(evaluate(arg, env))
        case Unary("exp", arg):
            return math.exp(evaluate(arg, env))
        case Unary("log", arg):
            v = evaluate(arg, env)
            if v <= 0.0:
                raise DomainError(f"log of non-positive value {v}")
            return math.log(v)
        case Unary("sqrt", arg):
            v = evaluate(arg, env)
            if v < 0.0:
                raise DomainError(f"sqrt of negative value {v}")
            return math.sqrt(v)
        case Binary("add", lhs, rhs):
            return evaluate(lhs, env) + evaluate(rhs, env)
        case Binary("sub", lhs, rhs):
            return evaluate(lhs, env) - evaluate(rhs, env)
        case Binary("mul", lhs, rhs):
            return evaluate(lhs, env) * evaluate(rhs, env)
        case Binary("div", lhs, rhs):
            den = evaluate(rhs, env)
            if den == 0.0:
                raise DomainError("division by zero")
            return evaluate(lhs, env) / den
        case Power(base, n):
            b = evaluate(base, env)
            if n < 0 and b == 0.0:
                raise DomainError("zero raised to a negative power")
            return b**n
    raise TypeError(f"unknown node {e!r}")


def interval_eval(e: Expr, env: Mapping[str, Interval]) -> Interval:
    """Interval extension; the image of e over the env boxes is contained."""
    match e:
        case Const(value):
            return Interval(value, value)
        case Var(name):
            try:
                return env[name]
            except KeyError:
                raise UndeclaredVariableError(name) from None
        case Unary("neg", arg):
            return -interval_eval(arg, env)
        case Unary("sin", arg):
            return interval_eval(arg, env).sin()
        case Unary("cos", arg):
            return interval_eval(arg, env).cos()
        case Unary("exp", arg):
            return interval_eval(arg, env).exp()
        case Unary("log", arg):
            return interval_eval(arg, env).log()
        case Unary("sqrt", arg):
            return interval_eval(arg, env).sqrt()
        case Binary("add", lhs, rhs):
            return interval_eval(lhs, env) + interval_eval(rhs, env)
        case Binary("sub", lhs, rhs):
            return interval_eval(lhs, env) - interval_eval(rhs, env)
        case Binary("mul", lhs, rhs):
            return interval_eval(lhs, env) * interval_eval(rhs, env)
        case Binary("div", lhs, rhs):
            return interval_eval(lhs, env) / interval_eval(rhs, env)
        case Power(base, n):
            return interval_eval(base, env).pow_int(n)
    raise TypeError(f"unknown node {e!r}")


def free_variables(e: Expr) -> set[str]:
    match e:
        case Const(_):
            return set()
        case Var(name):
            return {name}
        case Unary(_, arg):
            return free_variables(arg)
        case Binary(_, lhs, rhs):
            return free_variables(lhs) | free_variables(rhs)
        case Power(base, _):
            return free_variables(base)
    raise TypeError(f"unknown node {e!r}")


# ---------------------------------------------------------------------------
# Simplification (constant folding + cheap identities)
# ---------------------------------------------------------------------------


def _fold_unary(op: str, value: float) -> Expr | None:
    try:
        if op == "neg":
            return Const(-value)
        if op == "sin":
            return Const(math.sin(value))
        if op == "cos":
            return Const(math.cos(value))
        if op == "exp":
            return Const(math.exp(value))
        if op == "log":
            return Const(math.log(value)) if value > 0 else None
        if op == "sqrt":
            return Const(math.sqrt(value)) if value >= 0 else None
    except (ValueError, OverflowError):
        return None
    return None


def simplify(e: Expr) -> Expr:
    match e:
        case Const(_) | Var(_):
            return e
        case Unary(op, arg):
            arg = simplify(arg)
            if isinstance(arg, Const):
                folded = _fold_unary(op, arg.value)
                if folded is not None:
                    return folded
            if op == "neg" and isinstance(arg, Unary) and arg.op == "neg":
                return arg.arg
            return Unary(op, arg)
        case Binary(op, lhs, rhs):
            lhs = simplify(lhs)
            rhs = simplify(rhs)
            return _simplify_binary(op, lhs, rhs)
        case Power(base, n):
            base = simplify(base)
            if n == 0:
                return ONE
            if n == 1:
                return base
            if isinstance(base, Const) and not (base.value == 0.0 and n < 0):
                return Const(float(base.value**n))
            return Power(base, n)
    raise TypeError(f"unknown node {e!r}")


def _is_const(e: Expr, value: float) -> bool:
    return isinstance(e, Const) and e.value == value


def _simplify_binary(op: str, lhs: Expr, rhs: Expr) -> Expr:
    if isinstance(lhs, Const) and isinstance(rhs, Const):
        if op == "add":
            return Const(lhs.value + rhs.value)
        if op == "sub":
            return Const(lhs.value - rhs.value)
        if op == "mul":
            return Const(lhs.value * rhs.value)
        if op == "div" and rhs.value != 0.0:
            return Const(lhs.value / rhs.value)
    if op == "add":
        if _is_const(lhs, 0.0):
            return rhs
        if _is_const(rhs, 0.0):
            return lhs
    elif op == "sub":
        if _is_const(rhs, 0.0):
            return lhs
        if _is_const(lhs, 0.0):
            return simplify(Unary("neg", rhs))
        if lhs == rhs:
            return ZERO
    elif op == "mul":
        if _is_const(lhs, 0.0) or _is_const(rhs, 0.0):
            return ZERO
        if _is_const(lhs, 1.0):
            return rhs
        if _is_const(rhs, 1.0):
            return lhs
        if _is_const(lhs, -1.0):
            return simplify(Unary("neg", rhs))
        if _is_const(rhs, -1.0):
            return simplify(Unary("neg", lhs))
    elif op == "div":
        if _is_const(rhs, 1.0):
            return lhs
        if _is_const(lhs, 0.0) and isinstance(rhs, Const) and rhs.value != 0.0:
            return ZERO
    return Binary(op, lhs, rhs)


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Simultaneous substitution of variables by expressions."""
    match e:
        case Const(_):
            return e
        case Var(name):
            return mapping.get(name, e)
        case Unary(op, arg):
            return Unary(op, substitute(arg, mapping))
        case Binary(op, lhs, rhs):
            return Binary(op, substitute(lhs, mapping), substitute(rhs, mapping))
        case Power(base, n):
            return Power(substitute(base, mapping), n)
    raise TypeError(f"unknown node {e!r}")


# ---------------------------------------------------------------------------
# Symbolic differentiation
# ---------------------------------------------------------------------------


def _diff(e: Expr, var: str) -> Expr:
    match e:
        case Const(_):
            return ZERO
        case Var(name):
            return ONE if name == var else ZERO
        case Unary("neg", arg):
            return Unary("neg", _diff(arg, var))
        case Unary("sin", arg):
            return Binary("mul", Unary("cos", arg), _diff(arg, var))
        case Unary("cos", arg):
            return Unary("neg", Binary("mul", Unary("sin", arg), _diff(arg, var)))
        case Unary("exp", arg):
            return Binary("mul", Unary("exp", arg), _diff(arg, var))
        case Unary("log", arg):
            return Binary("div", _diff(arg, var), arg)
        case Unary("sqrt", arg):
            return Binary(
                "div", _diff(arg, var), Binary("mul", Const(2.0), Unary("sqrt", arg))
            )
        case Binary("add", lhs, rhs):
            return Binary("add", _diff(lhs, var), _diff(rhs, var))
        case Binary("sub", lhs, rhs):
            return Binary("sub", _diff(lhs, var), _diff(rhs, var))
        case Binary("mul", lhs, rhs):
            return Binary(
                "add",
                Binary("mul", _diff(lhs, var), rhs),
                Binary("mul", lhs, _diff(rhs, var)),
            )
        case Binary("div", lhs, rhs):
            num = Binary(
                "sub",
                Binary("mul", _diff(lhs, var), rhs),
                Binary("mul", lhs, _diff(rhs, var)),
            )
            return Binary("div", num, Power(rhs, 2))
        case Power(base, n):
            return Binary(
                "mul",
                Binary("mul", Const(float(n)), Power(base, n - 1)),
                _diff(base, var),
            )
    raise TypeError(f"unknown node {e!r}")


def differentiate(e: Expr, var: str) -> Expr:
    """Symbolic partial derivative, constant-folded after each pass."""
    return simplify(_diff(e, var))


def interval_hessian(
    e: Expr,
    box: Box,
    names: Sequence[str],
    fixed: Mapping[str, float] | None = None,
) -> list[list[Interval]]:
    """Interval enclosure of the Hessian of e w.r.t. names over box.

    Entry (i, j) contains d2e/dxi dxj (x) for every x in the box.  The upper
    triangle is computed symbolically and mirrored, so the result is symmetric
    by construction.  Variables in `fixed` are pinned to point intervals.
    """
    field = ScalarField(e, names)
    return field.interval_hessian(box, fixed)


# ---------------------------------------------------------------------------
# Compilation to fast numpy callables
# ---------------------------------------------------------------------------


def _codegen(e: Expr, index: Mapping[str, int]) -> str:
    match e:
        case Const(value):
            return repr(value)
        case Var(name):
            return f"v[{index[name]}]"
        case Unary("neg", arg):
            return f"(-{_codegen(arg, index)})"
        case Unary(op, arg):
            return f"_np.{op}({_codegen(arg, index)})"
        case Binary("add", lhs, rhs):
            return f"({_codegen(lhs, index)} + {_codegen(rhs, index)})"
        case Binary("sub", lhs, rhs):
            return f"({_codegen(lhs, index)} - {_codegen(rhs, index)})"
        case Binary("mul", lhs, rhs):
            return f"({_codegen(lhs, index)} * {_codegen(rhs, index)})"
        case Binary("div", lhs, rhs):
            return f"({_codegen(lhs, index)} / {_codegen(rhs, index)})"
        case Power(base, n):
            return f"({_codegen(base, index)} ** {n})"
    raise TypeError(f"unknown node {e!r}")


def lambdify(e: Expr, names: Sequence[str]) -> Callable:
    """Compile to a function of one array v with v[i] bound to names[i].

    v may be a 1-D point or an (n, k) matrix of column points; the compiled
    body broadcasts.  No domain checks: callers are expected to have
    validated the region (e.g. via interval evaluation) first.
    """
    index = {name: i for i, name in enumerate(names)}
    body = _codegen(e, index)
    src = f"def _compiled(v, _np=_np):\n    return {body}\n"
    namespace: dict = {"_np": np}
    exec(compile(src, "<dtcbf-expr>", "exec"), namespace)
    return namespace["_compiled"]


class ScalarField:
    """An expression over an ordered variable tuple, with cached derivatives.

    Differentiation happens once per field; the compiled value/gradient
    callables are what the inner optimization loops hit.
    """

    def __init__(self, expr: Expr, names: Sequence[str]):
        self.expr = simplify(expr)
        self.names = tuple(names)
        undeclared = free_variables(self.expr) - set(self.names)
        if undeclared:
            raise UndeclaredVariableError(sorted(undeclared)[0])
        self._value = lambdify(self.expr, self.names)
        self._grad_exprs: tuple[Expr, ...] | None = None
        self._grad_fns: list[Callable] | None = None
        self._hess_exprs: list[list[Expr]] | None = None
        self._negated: "ScalarField | None" = None

    def negated(self) -> "ScalarField":
        """-self as a field with its own cached derivatives."""
        if self._negated is None:
            self._negated = ScalarField(Unary("neg", self.expr), self.names)
        return self._negated

    @property
    def dim(self) -> int:
        return len(self.names)

    def value(self, v: np.ndarray) -> float:
        return self._value(v)

    @property
    def grad_exprs(self) -> tuple[Expr, ...]:
        if self._grad_exprs is None:
            self._grad_exprs = tuple(
                differentiate(self.expr, name) for name in self.names
            )
        return self._grad_exprs

    def gradient(self, v: np.ndarray) -> np.ndarray:
        if self._grad_fns is None:
            self._grad_fns = [lambdify(g, self.names) for g in self.grad_exprs]
        return np.array([fn(v) for fn in self._grad_fns], dtype=float)

    @property
    def hessian_exprs(self) -> list[list[Expr]]:
        if self._hess_exprs is None:
            grads = self.grad_exprs
            n = self.dim
            hess: list[list[Expr]] = [[ZERO] * n for _ in range(n)]
            for i in range(n):
                for j in range(i, n):
                    entry = differentiate(grads[i], self.names[j])
                    hess[i][j] = entry
                    hess[j][i] = entry
            self._hess_exprs = hess
        return self._hess_exprs

    def free_names(self, fixed: Mapping[str, float] | None = None) -> tuple[str, ...]:
        if not fixed:
            return self.names
        return tuple(name for name in self.names if name not in fixed)

    def interval_env(
        self, box: Box, fixed: Mapping[str, float] | None = None
    ) -> dict[str, Interval]:
        """Box intervals bound to the free names in order, points for `fixed`."""
        free = self.free_names(fixed)
        if len(free) != box.dim:
            raise DimensionMismatchError(
                f"box has {box.dim} dimensions but {len(free)} free variables remain"
            )
        env = {name: box.interval(i) for i, name in enumerate(free)}
        if fixed:
            for name, value in fixed.items():
                env[name] = Interval.point(float(value))
        return env

    def interval_hessian(
        self,
        box: Box,
        fixed: Mapping[str, float] | None = None,
        indices: Sequence[int] | None = None,
    ) -> list[list[Interval]]:
        """Interval Hessian over box; `indices` restricts to a subset of names."""
        env = self.interval_env(box, fixed)
        idx = list(indices) if indices is not None else list(range(self.dim))
        hess = self.hessian_exprs
        k = len(idx)
        out: list[list[Interval]] = [[Interval(0.0, 0.0)] * k for _ in range(k)]
        for a in range(k):
            for b in range(a, k):
                entry = interval_eval(hess[idx[a]][idx[b]], env)
                out[a][b] = entry
                out[b][a] = entry
        return out


# ---------------------------------------------------------------------------
# Printing (used by the CLI when echoing generated dynamics)
# ---------------------------------------------------------------------------


def to_string(e: Expr) -> str:
    """Render with minimal parentheses in the accepted grammar."""
    return _render(e, 0)


_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2, "neg": 3, "pow": 4}


def _render(e: Expr, parent_prec: int) -> str:
    match e:
        case Const(value):
            if value < 0:
                text = repr(value)
                return f"({text})" if parent_prec > 1 else text
            return repr(value)
        case Var(name):
            return name
        case Unary("neg", arg):
            text = f"-{_render(arg, _PREC['neg'])}"
            return f"({text})" if parent_prec > _PREC["neg"] else text
        case Unary(op, arg):
            return f"{op}({_render(arg, 0)})"
        case Binary(op, lhs, rhs):
            prec = _PREC[op]
            symbol = {"add": " + ", "sub": " - ", "mul": "*", "div": "/"}[op]
            # right child of - and / needs one extra level
            right_prec = prec + 1 if op in ("sub", "div") else prec
            text = f"{_render(lhs, prec)}{symbol}{_render(rhs, right_prec)}"
            return f"({text})" if parent_prec > prec else text
        case Power(base, n):
            text = f"{_render(base, _PREC['pow'] + 1)}^{n}"
            return f"({text})" if parent_prec > _PREC["pow"] else text
    raise TypeError(f"unknown node {e!r}")
