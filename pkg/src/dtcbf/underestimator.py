"""Convex underestimators on boxes via the alpha-perturbation construction.

F_breve(x) = F(x) + sum_i alpha_i (x_i^lb - x_i)(x_i^ub - x_i) with alpha from
the scaled Gerschgorin rule applied to an interval Hessian enclosure.  The
perturbation is non-positive on the box and vanishes at its corners, and the
chosen alphas make the perturbed Hessian diagonally dominant under the
width scaling, hence PSD.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DimensionMismatchError
from .expr import Binary, Const, Expr, ScalarField, Var, simplify, substitute
from .intervals import Box


@dataclass(frozen=True, eq=False)
class AlphaVector:
    """Per-dimension curvature compensation for one specific box.

    interaction carries the interval-Hessian magnitudes the rule consumed
    (diagonal: lower bounds H_ii.lo; off-diagonal: max |H_ij|), which lets
    branching heuristics see couplings even for dimensions where alpha_i = 0.
    """

    alpha: np.ndarray
    box: Box
    method: str = "scaled-gerschgorin"
    interaction: np.ndarray | None = None

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float)
        if a.ndim != 1 or a.shape[0] != self.box.dim:
            raise DimensionMismatchError(
                f"alpha has {a.shape} entries for a {self.box.dim}-d box"
            )
        if np.any(a < 0.0) or not np.all(np.isfinite(a)):
            raise ValueError("alpha entries must be finite and non-negative")
        object.__setattr__(self, "alpha", a)


def _as_field(e, names: Sequence[str] | None) -> ScalarField:
    if isinstance(e, ScalarField):
        return e
    if names is None:
        raise TypeError("names are required when passing a raw expression")
    return ScalarField(e, names)


def compute_alpha(
    e: Expr | ScalarField,
    box: Box,
    names: Sequence[str] | None = None,
    fixed: Mapping[str, float] | None = None,
) -> AlphaVector:
    """Scaled Gerschgorin alphas for e over box.

    With H the interval Hessian over the box's (free) dimensions and
    d the box widths:

        alpha_i = max(0, -1/2 (H_ii.lo - sum_{j != i} max(|H_ij.lo|, |H_ij.hi|) d_j / d_i))

    Zero-width dimensions fall back to alpha_i = max(0, -H_ii.lo / 2) and
    contribute nothing to the other dimensions' sums.
    """
    f = _as_field(e, names)
    free_idx = [k for k, name in enumerate(f.names) if not fixed or name not in fixed]
    hess = f.interval_hessian(box, fixed, free_idx)
    d = box.widths
    k = len(free_idx)
    alpha = np.zeros(k)
    inter = np.zeros((k, k))
    for i in range(k):
        lo_ii = hess[i][i].lo
        inter[i, i] = lo_ii
        s = 0.0
        for j in range(k):
            if j == i:
                continue
            m = max(abs(hess[i][j].lo), abs(hess[i][j].hi))
            inter[i, j] = m
            if d[i] != 0.0 and d[j] != 0.0:
                s += m * (d[j] / d[i])
        if d[i] == 0.0:
            alpha[i] = max(0.0, -0.5 * lo_ii)
        else:
            alpha[i] = max(0.0, -0.5 * (lo_ii - s))
    return AlphaVector(alpha=alpha, box=box, interaction=inter)


class Underestimator:
    """Callable F_breve with value/gradient on the box's free dimensions.

    `fixed` pins a subset of the field's variables to constants, so the same
    compiled field serves both the x-step (u pinned) and the u-step (x pinned)
    without re-substitution.
    """

    def __init__(
        self,
        field: ScalarField,
        box: Box,
        alphas: AlphaVector,
        fixed: Mapping[str, float] | None = None,
    ):
        self.field = field
        self.box = box
        self.alphas = alphas
        self.fixed = dict(fixed) if fixed else {}
        self.free_idx = np.array(
            [k for k, name in enumerate(field.names) if name not in self.fixed],
            dtype=int,
        )
        if len(self.free_idx) != box.dim:
            raise DimensionMismatchError(
                f"box has {box.dim} dimensions but {len(self.free_idx)} free variables"
            )
        if alphas.box is not box and alphas.box != box:
            raise ValueError("alpha vector was computed for a different box")
        self._template = np.zeros(field.dim)
        for k, name in enumerate(field.names):
            if name in self.fixed:
                self._template[k] = float(self.fixed[name])
        self._lo = box.lower
        self._hi = box.upper
        self._alpha = alphas.alpha
        self._all_free = not self.fixed

    def full_point(self, x: np.ndarray) -> np.ndarray:
        if self._all_free:
            return np.asarray(x, dtype=float)
        v = self._template.copy()
        v[self.free_idx] = x
        return v

    def base_value(self, x: np.ndarray) -> float:
        return float(self.field.value(self.full_point(x)))

    def perturbation(self, x: np.ndarray) -> float:
        return float(np.dot(self._alpha, (self._lo - x) * (self._hi - x)))

    def value(self, x: np.ndarray) -> float:
        return self.base_value(x) + self.perturbation(x)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        if self._all_free:
            g = self.field.gradient(x)
        else:
            g = self.field.gradient(self.full_point(x))[self.free_idx]
        return g + self._alpha * (2.0 * x - self._lo - self._hi)

    @property
    def expr(self) -> Expr:
        """The realized F_breve as a closed-form expression (test support)."""
        base = self.field.expr
        if self.fixed:
            base = substitute(
                base, {name: Const(float(v)) for name, v in self.fixed.items()}
            )
        free = [self.field.names[k] for k in self.free_idx]
        out = base
        for i, name in enumerate(free):
            if self._alpha[i] == 0.0:
                continue
            term = Binary(
                "mul",
                Const(float(self._alpha[i])),
                Binary(
                    "mul",
                    Binary("sub", Const(float(self._lo[i])), Var(name)),
                    Binary("sub", Const(float(self._hi[i])), Var(name)),
                ),
            )
            out = Binary("add", out, term)
        return simplify(out)


def build(
    e: Expr | ScalarField,
    box: Box,
    alphas: AlphaVector,
    names: Sequence[str] | None = None,
    fixed: Mapping[str, float] | None = None,
) -> Underestimator:
    return Underestimator(_as_field(e, names), box, alphas, fixed)


def max_separation(alphas: AlphaVector, box: Box) -> float:
    """Peak gap between F and F_breve on the box, attained at the midpoint."""
    return float(0.25 * np.dot(alphas.alpha, box.widths**2))
