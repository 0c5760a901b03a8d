"""Problem ingestion and validation.

A problem bundles the discrete-time dynamics f, the candidate barrier h, the
rate function gamma, optional policy pi, the admissible input box U and the
verification region X.  Variables are named x1..xn and u1..um.  Loading from
JSON performs all structural checks here so the verifier can assume a
well-formed instance.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg

from .errors import DtcbfError, ValidationError
from .expr import (
    Const,
    Expr,
    ScalarField,
    Unary,
    Var,
    evaluate,
    interval_eval,
    lambdify,
    parse,
    substitute,
    to_string,
)
from .intervals import Box

GAMMA_ZERO_TOL = 1e-12
_FACE_SPLIT_BUDGET = 4096  # interval evaluations allowed per face certificate


def x_names(n: int) -> tuple[str, ...]:
    return tuple(f"x{i+1}" for i in range(n))


def u_names(m: int) -> tuple[str, ...]:
    return tuple(f"u{j+1}" for j in range(m))


@dataclass(frozen=True)
class Gamma:
    """Rate function, either linear gamma(r) = c*r or a general expression."""

    expr: Expr  # in the single variable r
    linear_coefficient: float | None = None

    @staticmethod
    def linear(c: float) -> "Gamma":
        return Gamma(expr=Const(float(c)) * Var("r"), linear_coefficient=float(c))

    @staticmethod
    def from_expression(text: str) -> "Gamma":
        return Gamma(expr=parse(text, ["r"]), linear_coefficient=None)

    def __call__(self, r: float) -> float:
        return evaluate(self.expr, {"r": r})

    def compose(self, inner: Expr) -> Expr:
        """gamma(inner) by substitution of r."""
        return substitute(self.expr, {"r": inner})


@dataclass
class ProblemSpec:
    n: int
    m: int
    f: tuple[Expr, ...]
    h: Expr
    gamma: Gamma
    U: Box
    X: Box
    pi: tuple[Expr, ...] | None = None
    attest_X_contains_C: bool = False
    warnings: list[str] = dc_field(default_factory=list)

    @property
    def x_names(self) -> tuple[str, ...]:
        return x_names(self.n)

    @property
    def u_names(self) -> tuple[str, ...]:
        return u_names(self.m)

    @property
    def has_policy(self) -> bool:
        return self.pi is not None

    # ------------------------------------------------------------------
    # composed objective/constraint expressions
    # ------------------------------------------------------------------

    def objective_known(self) -> Expr:
        """F(x) = h(f(x, pi(x))) - h(x) + gamma(h(x)) for the given policy."""
        if self.pi is None:
            raise ValidationError("problem has no policy")
        pi_map = {name: self.pi[j] for j, name in enumerate(self.u_names)}
        f_closed = [substitute(fi, pi_map) for fi in self.f]
        step_map = {name: f_closed[i] for i, name in enumerate(self.x_names)}
        h_next = substitute(self.h, step_map)
        return h_next - self.h + self.gamma.compose(self.h)

    def objective_xu(self) -> Expr:
        """F(x, u) = h(f(x, u)) - h(x) + gamma(h(x)) over state and input."""
        step_map = {name: self.f[i] for i, name in enumerate(self.x_names)}
        h_next = substitute(self.h, step_map)
        return h_next - self.h + self.gamma.compose(self.h)

    def constraint(self) -> Expr:
        """H(x) = -h(x); the zero-superlevel set is {H <= 0}."""
        return Unary("neg", self.h)

    def h_field(self) -> ScalarField:
        return ScalarField(self.h, self.x_names)

    def policy_value(self, x: np.ndarray) -> np.ndarray:
        if self.pi is None:
            raise ValidationError("problem has no policy")
        env = {name: float(x[i]) for i, name in enumerate(self.x_names)}
        return np.array([evaluate(p, env) for p in self.pi], dtype=float)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def _grid_per_axis(n: int, budget: int = 10_000) -> int:
    per = int(round(budget ** (1.0 / n)))
    return max(3, min(per, 201))


def _max_h_plus(spec: ProblemSpec) -> float:
    fn = lambdify(spec.h, spec.x_names)
    grid = spec.X.sample_grid(_grid_per_axis(spec.n))
    values = np.asarray(fn(grid), dtype=float)
    return float(max(0.0, np.max(values)))


def _validate_gamma(spec: ProblemSpec) -> None:
    g = spec.gamma
    if g.linear_coefficient is not None:
        c = g.linear_coefficient
        if not (0.0 < c <= 1.0):
            raise ValidationError(
                f"gamma: linear coefficient must satisfy 0 < c <= 1, got {c}"
            )
        return
    at_zero = g(0.0)
    if abs(at_zero) > GAMMA_ZERO_TOL:
        raise ValidationError(f"gamma: gamma(0) = {at_zero}, expected 0")
    r_max = _max_h_plus(spec)
    if r_max <= 0.0:
        r_max = 1.0  # h never positive on the sampled grid; probe a unit range
    samples = np.linspace(0.0, r_max, 1000)
    values = np.array([g(float(r)) for r in samples])
    diffs = np.diff(values)
    if np.any(diffs <= 0.0):
        k = int(np.argmax(diffs <= 0.0))
        raise ValidationError(
            f"gamma: not strictly increasing near r = {samples[k]:.6g}"
        )
    above = values - samples > GAMMA_ZERO_TOL
    if np.any(above):
        k = int(np.argmax(above))
        raise ValidationError(
            f"gamma: gamma(r) > r at r = {samples[k]:.6g} "
            f"(gamma = {values[k]:.6g})"
        )


def _face_certified_negative(h_field: ScalarField, face: Box) -> bool:
    """True if interval subdivision proves h < 0 on the whole face."""
    budget = _FACE_SPLIT_BUDGET
    stack = [face]
    while stack:
        box = stack.pop()
        iv = interval_eval(h_field.expr, h_field.interval_env(box))
        budget -= 1
        if iv.hi < 0.0:
            continue
        widths = box.widths
        if budget <= 0 or np.max(widths) <= 0.0:
            return False
        stack.extend(box.split(int(np.argmax(widths))))
    return True


def _validate_containment(spec: ProblemSpec) -> None:
    hf = spec.h_field()
    for face in spec.X.faces():
        if not _face_certified_negative(hf, face):
            if spec.attest_X_contains_C:
                spec.warnings.append(
                    "X: could not certify h < 0 on all faces of X; "
                    "proceeding on the attestation that C is contained in X"
                )
                return
            raise ValidationError(
                "X: could not certify that the zero-superlevel set of h lies "
                "inside X (h < 0 on every face of X); enlarge X or set "
                '"attest_X_contains_C": true'
            )


def _validate_policy_range(spec: ProblemSpec) -> None:
    if spec.pi is None:
        return
    for j, pj in enumerate(spec.pi):
        field = ScalarField(pj, spec.x_names)
        rng = interval_eval(field.expr, field.interval_env(spec.X))
        uj = spec.U.interval(j)
        if rng.lo < uj.lo or rng.hi > uj.hi:
            # not fatal: the policy only needs to be admissible on C, and every
            # candidate counterexample is re-checked for pi(x) in U exactly
            spec.warnings.append(
                f"pi[{j+1}]: range [{rng.lo:.4g}, {rng.hi:.4g}] over X is not "
                f"contained in U_{j+1} = [{uj.lo:.4g}, {uj.hi:.4g}]; "
                "admissibility will be checked pointwise on C"
            )


def validate(spec: ProblemSpec) -> ProblemSpec:
    """Run all structural checks; raises ValidationError on hard failures."""
    if spec.n < 1 or spec.m < 1:
        raise ValidationError(f"dimensions must be positive (n={spec.n}, m={spec.m})")
    if len(spec.f) != spec.n:
        raise ValidationError(f"f: expected {spec.n} components, got {len(spec.f)}")
    if spec.pi is not None and len(spec.pi) != spec.m:
        raise ValidationError(f"pi: expected {spec.m} components, got {len(spec.pi)}")
    if spec.X.dim != spec.n:
        raise ValidationError(f"X: expected dimension {spec.n}, got {spec.X.dim}")
    if spec.U.dim != spec.m:
        raise ValidationError(f"U: expected dimension {spec.m}, got {spec.U.dim}")
    _validate_gamma(spec)
    _validate_containment(spec)
    _validate_policy_range(spec)
    return spec


# ---------------------------------------------------------------------------
# ZOH discretization of continuous-time linear systems
# ---------------------------------------------------------------------------


def zoh_discretize(
    A: np.ndarray, B: np.ndarray, Ts: float
) -> tuple[np.ndarray, np.ndarray]:
    """Exact zero-order-hold discretization of xdot = A x + B u.

    A_d = exp(A Ts) and B_d = (int_0^Ts exp(A tau) dtau) B, both read off the
    exponential of the augmented matrix [[A, B], [0, 0]] * Ts.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError(f"discretize: A must be square, got shape {A.shape}")
    n = A.shape[0]
    if B.ndim != 2 or B.shape[0] != n:
        raise ValidationError(
            f"discretize: B must have {n} rows to match A, got shape {B.shape}"
        )
    if not (Ts > 0.0 and math.isfinite(Ts)):
        raise ValidationError(f"discretize: Ts must be positive, got {Ts}")
    m = B.shape[1]
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = A
    aug[:n, n:] = B
    E = scipy.linalg.expm(aug * Ts)
    return E[:n, :n].copy(), E[:n, n:].copy()


def linear_f_expressions(A_d: np.ndarray, B_d: np.ndarray) -> list[str]:
    """Render x+ = A_d x + B_d u as one expression string per state."""
    n, m = A_d.shape[0], B_d.shape[1]
    xs, us = x_names(n), u_names(m)
    lines = []
    for i in range(n):
        terms = [(A_d[i, j], xs[j]) for j in range(n)]
        terms += [(B_d[i, j], us[j]) for j in range(m)]
        pieces = []
        for coef, var in terms:
            if coef == 0.0:
                continue
            mag = repr(abs(float(coef)))
            piece = f"{mag}*{var}"
            if not pieces:
                pieces.append(piece if coef > 0 else f"-{piece}")
            else:
                pieces.append(f"{'+' if coef > 0 else '-'} {piece}")
        lines.append(" ".join(pieces) if pieces else "0.0")
    return lines


# ---------------------------------------------------------------------------
# JSON loading
# ---------------------------------------------------------------------------


def _require(doc: Mapping, key: str):
    if key not in doc:
        raise ValidationError(f"{key}: required field is missing")
    return doc[key]


def _load_box(doc: Mapping, key: str, dim: int) -> Box:
    raw = _require(doc, key)
    if not isinstance(raw, Mapping) or "lower" not in raw or "upper" not in raw:
        raise ValidationError(f'{key}: expected an object with "lower" and "upper"')
    lower, upper = raw["lower"], raw["upper"]
    if len(lower) != dim or len(upper) != dim:
        raise ValidationError(
            f"{key}: expected {dim} bounds, got {len(lower)}/{len(upper)}"
        )
    try:
        return Box(lower, upper)
    except (ValueError, DtcbfError) as exc:
        raise ValidationError(f"{key}: {exc}") from exc


def _parse_expr(text, variables: Sequence[str], where: str) -> Expr:
    if not isinstance(text, str):
        raise ValidationError(f"{where}: expected an expression string")
    try:
        return parse(text, variables)
    except Exception as exc:
        raise ValidationError(f"{where}: {exc}") from exc


def _load_gamma(doc: Mapping) -> Gamma:
    raw = _require(doc, "gamma")
    if isinstance(raw, Mapping) and "linear" in raw:
        c = raw["linear"]
        if not isinstance(c, (int, float)):
            raise ValidationError("gamma.linear: expected a number")
        return Gamma.linear(float(c))
    if isinstance(raw, Mapping) and "expr" in raw:
        try:
            return Gamma.from_expression(raw["expr"])
        except Exception as exc:
            raise ValidationError(f"gamma.expr: {exc}") from exc
    raise ValidationError('gamma: expected {"linear": c} or {"expr": "..."}')


_KNOWN_KEYS = {
    "n", "m", "f", "h", "gamma", "pi", "U", "X", "discretize",
    "attest_X_contains_C", "name", "comment",
}


def load_problem(source) -> ProblemSpec:
    """Load and validate a problem from a JSON path, JSON text, or dict."""
    if isinstance(source, Mapping):
        doc = source
    else:
        path = Path(source)
        try:
            doc = json.loads(path.read_text())
        except FileNotFoundError:
            raise ValidationError(f"problem file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, Mapping):
        raise ValidationError("problem document must be a JSON object")

    n = _require(doc, "n")
    m = _require(doc, "m")
    if not isinstance(n, int) or not isinstance(m, int):
        raise ValidationError("n, m: expected integers")
    xs, us = x_names(n), u_names(m)

    warnings = [
        f"{key}: unknown field ignored" for key in doc if key not in _KNOWN_KEYS
    ]

    if "discretize" in doc:
        if "f" in doc:
            raise ValidationError(
                'f: must be omitted when a "discretize" block is given'
            )
        block = doc["discretize"]
        method = block.get("method", "zoh-linear")
        if method != "zoh-linear":
            raise ValidationError(f"discretize.method: unsupported method {method!r}")
        for key in ("A", "B", "Ts"):
            if key not in block:
                raise ValidationError(f"discretize.{key}: required field is missing")
        A_d, B_d = zoh_discretize(
            np.asarray(block["A"], dtype=float),
            np.asarray(block["B"], dtype=float),
            float(block["Ts"]),
        )
        if A_d.shape != (n, n) or B_d.shape != (n, m):
            raise ValidationError(
                f"discretize: matrices are {A_d.shape}/{B_d.shape}, "
                f"expected ({n},{n})/({n},{m})"
            )
        f_strings = linear_f_expressions(A_d, B_d)
    else:
        f_strings = _require(doc, "f")
        if not isinstance(f_strings, Sequence) or isinstance(f_strings, str):
            raise ValidationError("f: expected an array of expression strings")
        if len(f_strings) != n:
            raise ValidationError(f"f: expected {n} components, got {len(f_strings)}")

    f_exprs = tuple(
        _parse_expr(s, list(xs) + list(us), f"f[{i+1}]") for i, s in enumerate(f_strings)
    )
    h_expr = _parse_expr(_require(doc, "h"), xs, "h")
    gamma = _load_gamma(doc)
    U = _load_box(doc, "U", m)
    X = _load_box(doc, "X", n)

    pi_exprs = None
    if doc.get("pi") is not None:
        raw_pi = doc["pi"]
        if not isinstance(raw_pi, Sequence) or isinstance(raw_pi, str):
            raise ValidationError("pi: expected an array of expression strings")
        if len(raw_pi) != m:
            raise ValidationError(f"pi: expected {m} components, got {len(raw_pi)}")
        pi_exprs = tuple(
            _parse_expr(s, xs, f"pi[{j+1}]") for j, s in enumerate(raw_pi)
        )

    spec = ProblemSpec(
        n=n,
        m=m,
        f=f_exprs,
        h=h_expr,
        gamma=gamma,
        U=U,
        X=X,
        pi=pi_exprs,
        attest_X_contains_C=bool(doc.get("attest_X_contains_C", False)),
        warnings=warnings,
    )
    return validate(spec)


def format_f(spec: ProblemSpec) -> list[str]:
    """Expression strings of the dynamics, for display."""
    return [to_string(fi) for fi in spec.f]
