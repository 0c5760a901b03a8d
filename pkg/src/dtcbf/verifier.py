"""Branch-and-bound verification of candidate barrier functions.

Splits the verification region into subdomains and, on each one, bounds the
constrained minimum of the barrier-decrease objective from below via the
convexified program.  A subdomain is resolved as verified (case A), proven
outside the zero-superlevel set (case B), falsified at a concrete state
(case C.1), or split further (case C.2).  Stopping criteria on the maximum
underestimator separation (plus subdomain diagonal in the unknown-policy
mode) turn endless refinement into an explicit Inconclusive verdict.

In the unknown-policy mode each verified subdomain records the constant
input that certified it, yielding a piecewise-constant policy.
"""

from __future__ import annotations

import heapq
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .convex_solver import Tolerances, feasibility, solve
from .errors import PolicyDomainError, ValidationError
from .expr import ScalarField, interval_eval, lambdify
from .global_optimizer import maximize_over_box
from .intervals import Box
from .problem import ProblemSpec
from .underestimator import AlphaVector, Underestimator, compute_alpha

SELECTIONS = ("best-first", "depth-first")
BRANCHINGS = ("scaled-longest-side", "longest-side")


@dataclass(frozen=True)
class VerifierConfig:
    eps_f: float = 1e-6
    eps_h: float = 1e-6
    eps_d: float = 1e-6  # unknown-policy mode only
    selection: str = "best-first"
    branching: str = "scaled-longest-side"
    workers: int = 1
    max_iters: int = 200_000

    def __post_init__(self):
        for name in ("eps_f", "eps_h", "eps_d"):
            if not getattr(self, name) > 0.0:
                raise ValidationError(f"{name} must be positive")
        if self.selection not in SELECTIONS:
            raise ValidationError(f"selection must be one of {SELECTIONS}")
        if self.branching not in BRANCHINGS:
            raise ValidationError(f"branching must be one of {BRANCHINGS}")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")
        if self.max_iters < 1:
            raise ValidationError("max_iters must be >= 1")


@dataclass
class Subdomain:
    id: int
    box: Box
    parent: int  # -1 for the root
    status: str = "pending"  # pending|verified-a|discarded-b|counterexample|terminal|split
    u_star: np.ndarray | None = None
    bound: float | None = None  # lower bound on the constrained minimum
    alpha_F: np.ndarray | None = None
    alpha_H: np.ndarray | None = None

    CASE_LABELS = {
        "verified-a": "A",
        "discarded-b": "B",
        "counterexample": "C1",
        "split": "C2",
        "terminal": "terminal",
        "pending": "C2",  # created by a split, never resolved
    }

    @property
    def case_label(self) -> str:
        return self.CASE_LABELS[self.status]


@dataclass(frozen=True)
class PolicyEntry:
    id: int
    box: Box
    u: np.ndarray


class PiecewisePolicy:
    """Constant input per verified subdomain; lookup is lowest-id-first."""

    def __init__(self, entries: Sequence[PolicyEntry]):
        self.entries = sorted(entries, key=lambda e: e.id)
        if self.entries:
            self._los = np.array([e.box.lower for e in self.entries])
            self._his = np.array([e.box.upper for e in self.entries])
            self._us = np.array([e.u for e in self.entries])
        else:
            self._los = self._his = self._us = np.empty((0, 0))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def lookup(self, x: Sequence[float]) -> np.ndarray:
        p = np.asarray(x, dtype=float)
        if len(self.entries) == 0:
            raise PolicyDomainError(f"state {p} is outside every policy subdomain")
        mask = np.all((self._los <= p) & (p <= self._his), axis=1)
        if not mask.any():
            raise PolicyDomainError(f"state {p} is outside every policy subdomain")
        return self._us[int(np.argmax(mask))].copy()


@dataclass
class CounterexampleReport:
    """Independent re-evaluation of a claimed violation; the trust anchor."""

    x: np.ndarray
    mode: str
    passed: bool
    reasons: list[str]
    h_value: float
    F_value: float | None = None  # known mode: objective under the given policy
    pi_value: np.ndarray | None = None
    inner_value: float | None = None  # unknown mode: best input's objective
    inner_gap: float | None = None
    inner_u: np.ndarray | None = None

    def as_dict(self) -> dict:
        out = {
            "x": [float(v) for v in self.x],
            "mode": self.mode,
            "pass": self.passed,
            "reasons": list(self.reasons),
            "h": self.h_value,
        }
        if self.F_value is not None:
            out["F"] = self.F_value
        if self.pi_value is not None:
            out["pi"] = [float(v) for v in self.pi_value]
        if self.inner_value is not None:
            out["max_u_F"] = self.inner_value
            out["max_u_F_gap"] = self.inner_gap
            out["argmax_u"] = [float(v) for v in self.inner_u]
        return out


@dataclass
class VerifyStats:
    iterations: int = 0
    case_a: int = 0
    case_b: int = 0
    case_c1: int = 0
    splits: int = 0
    terminal: int = 0
    leaves: int = 0
    wall_time: float = 0.0


@dataclass
class Verdict:
    kind: str  # "valid" | "counterexample" | "inconclusive"
    policy: PiecewisePolicy | str | None
    counterexample: CounterexampleReport | None
    inconclusive: dict | None
    stats: VerifyStats
    subdomains: list[Subdomain]

    def leaves(self) -> list[Subdomain]:
        return [s for s in self.subdomains if s.status != "split"]


# ---------------------------------------------------------------------------
# Stand-alone pieces of the algorithm (also used directly by tests)
# ---------------------------------------------------------------------------


def stopping_criteria(
    box: Box,
    alpha_F: AlphaVector | np.ndarray,
    alpha_H: AlphaVector | np.ndarray,
    config: VerifierConfig,
    mode: str,
) -> bool:
    """Maximum-separation thresholds (and diagonal in unknown mode)."""
    a_f = alpha_F.alpha if isinstance(alpha_F, AlphaVector) else np.asarray(alpha_F)
    a_h = alpha_H.alpha if isinstance(alpha_H, AlphaVector) else np.asarray(alpha_H)
    d2 = box.diag_sq
    ok = (float(np.max(a_f)) / 4.0) * d2 <= config.eps_f
    ok = ok and (float(np.max(a_h)) / 4.0) * d2 <= config.eps_h
    if mode == "unknown":
        ok = ok and d2 <= config.eps_d
    return ok


def select_branch_dim(box: Box, alpha: np.ndarray | None, strategy: str) -> int:
    """Scaled-longest-side: argmax alpha_i * width_i^2, longest side fallback."""
    widths = box.widths
    if strategy == "scaled-longest-side" and alpha is not None:
        scores = np.asarray(alpha) * widths**2
        if float(np.max(scores)) > 0.0:
            return int(np.argmax(scores))
    return int(np.argmax(widths))


def branch(
    sub: Subdomain,
    alpha: np.ndarray | None,
    strategy: str,
    n_dom: int,
) -> tuple[Subdomain, Subdomain]:
    """Bisect a subdomain; children get ids n_dom+1 and n_dom+2."""
    if float(np.max(sub.box.widths)) <= 0.0:
        raise ValidationError(f"subdomain {sub.id} is degenerate and cannot split")
    dim = select_branch_dim(sub.box, alpha, strategy)
    if sub.box.widths[dim] <= 0.0:
        dim = int(np.argmax(sub.box.widths))
    left, right = sub.box.split(dim)
    return (
        Subdomain(id=n_dom + 1, box=left, parent=sub.id),
        Subdomain(id=n_dom + 2, box=right, parent=sub.id),
    )


def check_counterexample(
    spec: ProblemSpec,
    x: Sequence[float],
    mode: str | None = None,
    eps_inner: float = 1e-8,
    _fields: "_Fields | None" = None,
) -> CounterexampleReport:
    """Re-evaluate a claimed counterexample exactly, with no underestimation.

    Known policy: x must lie in C, violate the barrier-decrease condition
    under pi, and pi(x) must be admissible.  Unknown policy: the certified
    global maximum over admissible inputs must be negative (incumbent plus
    branch-and-bound gap below zero).
    """
    if mode is None:
        mode = "known" if spec.has_policy else "unknown"
    fields = _fields or _Fields(spec, mode)
    p = np.asarray(x, dtype=float)
    h_val = float(fields.h_fn(p))
    reasons: list[str] = []
    if not h_val >= 0.0:
        reasons.append(f"h(x) = {h_val:.9g} < 0: x lies outside the zero-superlevel set")

    if mode == "known":
        F_val = float(fields.F_field.value(p))
        pi_val = spec.policy_value(p)
        if not F_val < 0.0:
            reasons.append(f"F(x) = {F_val:.9g} >= 0: no violation under the policy")
        if not spec.U.contains(pi_val):
            reasons.append(f"pi(x) = {pi_val.tolist()} is not in U")
        return CounterexampleReport(
            x=p,
            mode=mode,
            passed=not reasons,
            reasons=reasons,
            h_value=h_val,
            F_value=F_val,
            pi_value=pi_val,
        )

    fixed = dict(zip(spec.x_names, (float(v) for v in p)))
    inner = maximize_over_box(fields.Fxu_field, spec.U, eps_inner, fixed=fixed)
    certified_max = inner.value + inner.gap
    if not certified_max < 0.0:
        reasons.append(
            f"max_u F(x, u) <= {certified_max:.9g} is not certified negative"
        )
    return CounterexampleReport(
        x=p,
        mode=mode,
        passed=not reasons,
        reasons=reasons,
        h_value=h_val,
        inner_value=inner.value,
        inner_gap=inner.gap,
        inner_u=inner.point,
    )


# ---------------------------------------------------------------------------
# Engine
# ---------------------------------------------------------------------------


class _Fields:
    """Compiled objective/constraint bundles shared across subdomains."""

    def __init__(self, spec: ProblemSpec, mode: str):
        xs = spec.x_names
        self.h_fn = lambdify(spec.h, xs)
        self.h_field = ScalarField(spec.h, xs)
        self.H_field = ScalarField(spec.constraint(), xs)
        self.F_field: ScalarField | None = None
        self.Fxu_field: ScalarField | None = None
        if mode == "known":
            self.F_field = ScalarField(spec.objective_known(), xs)
        else:
            self.Fxu_field = ScalarField(spec.objective_xu(), xs + spec.u_names)

    def warm(self):
        """Populate every lazy cache so worker threads only read."""
        for f in (self.F_field, self.Fxu_field, self.H_field):
            if f is None:
                continue
            f.grad_exprs
            f.hessian_exprs
            f.gradient(np.zeros(f.dim))
            if f is self.Fxu_field:
                neg = f.negated()
                neg.grad_exprs
                neg.hessian_exprs
                neg.gradient(np.zeros(neg.dim))


@dataclass
class _Outcome:
    case: str  # "A" | "B" | "C1" | "C2" | "terminal"
    bound: float | None
    alpha_F: np.ndarray | None = None
    alpha_H: np.ndarray | None = None
    u_star: np.ndarray | None = None
    report: CounterexampleReport | None = None
    criteria: dict | None = None


class _Engine:
    def __init__(
        self,
        spec: ProblemSpec,
        config: VerifierConfig,
        mode: str,
        progress: Callable[[dict], None] | None,
    ):
        self.spec = spec
        self.config = config
        self.mode = mode
        self.progress = progress
        self.tol = Tolerances()
        self.eps_inner = min(config.eps_f, 1e-6) / 10.0
        self.fields = _Fields(spec, mode)
        self.fields.warm()
        self.subdomains: dict[int, Subdomain] = {}
        self.n_dom = 0
        self.policy_entries: list[PolicyEntry] = []
        self.stats = VerifyStats()

    # -- worklist ----------------------------------------------------------

    def _push(self, sub: Subdomain, priority: float):
        if self.config.selection == "best-first":
            heapq.heappush(self.worklist, (priority, sub.id))
        else:
            self.worklist.append(sub.id)

    def _pop_batch(self, count: int) -> list[Subdomain]:
        out = []
        while self.worklist and len(out) < count:
            if self.config.selection == "best-first":
                _, sid = heapq.heappop(self.worklist)
            else:
                sid = self.worklist.pop()
            out.append(self.subdomains[sid])
        return out

    # -- per-subdomain processing (pure w.r.t. shared state) ----------------

    def _process(self, sub: Subdomain) -> _Outcome:
        if self.mode == "known":
            return self._process_known(sub)
        return self._process_unknown(sub)

    def _process_known(self, sub: Subdomain) -> _Outcome:
        box = sub.box
        F = self.fields.F_field
        H = self.fields.H_field
        a_F = compute_alpha(F, box)
        a_H = compute_alpha(H, box)
        sol = solve(Underestimator(F, box, a_F), Underestimator(H, box, a_H), box, self.tol)
        if sol.status == "infeasible":
            return _Outcome("B", None, a_F.alpha, a_H.alpha)
        if sol.lower_bound >= 0.0:
            return _Outcome("A", sol.lower_bound, a_F.alpha, a_H.alpha)
        for cand in (sol.x, box.midpoint):
            report = check_counterexample(
                self.spec, cand, mode="known", _fields=self.fields
            )
            if report.passed:
                return _Outcome(
                    "C1", sol.lower_bound, a_F.alpha, a_H.alpha, report=report
                )
        if stopping_criteria(box, a_F, a_H, self.config, "known"):
            return _Outcome(
                "terminal",
                sol.lower_bound,
                a_F.alpha,
                a_H.alpha,
                criteria=self._criteria_detail(box, a_F, a_H),
            )
        return _Outcome("C2", sol.lower_bound, a_F.alpha, a_H.alpha)

    def _process_unknown(self, sub: Subdomain) -> _Outcome:
        box = sub.box
        H = self.fields.H_field
        a_H = compute_alpha(H, box)
        under_H = Underestimator(H, box, a_H)
        # Feasibility of the box alone decides Case B, so settle it before
        # the input search.
        feas_bound, x_feas = feasibility(under_H, box, self.tol)
        if feas_bound > self.tol.feas:
            return _Outcome("B", None, None, a_H.alpha)

        x_bar = box.midpoint
        fixed_x = dict(zip(self.spec.x_names, (float(v) for v in x_bar)))
        parent = self.subdomains.get(sub.parent) if sub.parent is not None else None
        inner = maximize_over_box(
            self.fields.Fxu_field,
            self.spec.U,
            self.eps_inner,
            fixed=fixed_x,
            eps_rel=0.01,
            x0=None if parent is None else parent.u_star,
        )
        u_star = self.spec.U.clip(inner.point)
        fixed_u = dict(zip(self.spec.u_names, (float(v) for v in u_star)))

        Fxu = self.fields.Fxu_field
        a_F = compute_alpha(Fxu, box, fixed=fixed_u)
        sol = solve(
            Underestimator(Fxu, box, a_F, fixed=fixed_u),
            under_H,
            box,
            self.tol,
            x0=x_feas,
        )
        if sol.status == "infeasible":
            return _Outcome("B", None, a_F.alpha, a_H.alpha, u_star=u_star)
        if sol.lower_bound >= 0.0:
            return _Outcome("A", sol.lower_bound, a_F.alpha, a_H.alpha, u_star=u_star)
        h_bar = float(self.fields.h_fn(x_bar))
        if h_bar >= 0.0 and inner.value + inner.gap < 0.0:
            report = check_counterexample(
                self.spec, x_bar, mode="unknown",
                eps_inner=self.eps_inner, _fields=self.fields,
            )
            if report.passed:
                return _Outcome(
                    "C1", sol.lower_bound, a_F.alpha, a_H.alpha,
                    u_star=u_star, report=report,
                )
        if stopping_criteria(box, a_F, a_H, self.config, "unknown"):
            return _Outcome(
                "terminal",
                sol.lower_bound,
                a_F.alpha,
                a_H.alpha,
                u_star=u_star,
                criteria=self._criteria_detail(box, a_F, a_H),
            )
        return _Outcome("C2", sol.lower_bound, a_F.alpha, a_H.alpha, u_star=u_star)

    def _criteria_detail(self, box: Box, a_F: AlphaVector, a_H: AlphaVector) -> dict:
        d2 = box.diag_sq
        detail = {
            "sep_f": float(np.max(a_F.alpha)) / 4.0 * d2,
            "eps_f": self.config.eps_f,
            "sep_h": float(np.max(a_H.alpha)) / 4.0 * d2,
            "eps_h": self.config.eps_h,
        }
        if self.mode == "unknown":
            detail["diag_sq"] = d2
            detail["eps_d"] = self.config.eps_d
        return detail

    # -- main loop -----------------------------------------------------------

    def run(self) -> Verdict:
        t0 = time.perf_counter()
        root = Subdomain(id=0, box=self.spec.X, parent=-1)
        self.subdomains[0] = root
        self.worklist: list = []
        self._push(root, -math.inf)

        pool = (
            ThreadPoolExecutor(max_workers=self.config.workers)
            if self.config.workers > 1
            else None
        )
        try:
            while self.worklist:
                if self.stats.iterations >= self.config.max_iters:
                    return self._finish_cap(t0)
                room = self.config.max_iters - self.stats.iterations
                batch = self._pop_batch(min(self.config.workers, room))
                if pool is not None and len(batch) > 1:
                    outcomes = list(pool.map(self._process, batch))
                else:
                    outcomes = [self._process(sub) for sub in batch]
                # apply in id order so the result is scheduling-independent
                for sub, outcome in sorted(
                    zip(batch, outcomes), key=lambda pair: pair[0].id
                ):
                    verdict = self._apply(sub, outcome, t0)
                    if verdict is not None:
                        return verdict
            return self._finish_valid(t0)
        finally:
            if pool is not None:
                pool.shutdown(wait=False, cancel_futures=True)

    def _emit(self, sub: Subdomain, outcome: _Outcome):
        if self.progress is not None:
            self.progress(
                {
                    "event": "processed",
                    "id": sub.id,
                    "case": outcome.case,
                    "bound": outcome.bound,
                    "box": sub.box,
                }
            )

    def _apply(self, sub: Subdomain, outcome: _Outcome, t0: float) -> Verdict | None:
        self.stats.iterations += 1
        sub.bound = outcome.bound
        sub.alpha_F = outcome.alpha_F
        sub.alpha_H = outcome.alpha_H
        sub.u_star = outcome.u_star
        self._emit(sub, outcome)

        if outcome.case == "A":
            sub.status = "verified-a"
            self.stats.case_a += 1
            if self.mode == "unknown":
                self.policy_entries.append(
                    PolicyEntry(id=sub.id, box=sub.box, u=outcome.u_star)
                )
            return None
        if outcome.case == "B":
            sub.status = "discarded-b"
            self.stats.case_b += 1
            return None
        if outcome.case == "C1":
            sub.status = "counterexample"
            self.stats.case_c1 += 1
            return self._verdict(
                "counterexample", counterexample=outcome.report, t0=t0
            )
        if outcome.case == "terminal":
            sub.status = "terminal"
            self.stats.terminal += 1
            return self._verdict(
                "inconclusive",
                inconclusive={
                    "reason": "stopping-criteria",
                    "subdomain": sub.id,
                    "box": {
                        "lower": sub.box.lower.tolist(),
                        "upper": sub.box.upper.tolist(),
                    },
                    "criteria": outcome.criteria,
                },
                t0=t0,
            )

        # case C2: split
        try:
            left, right = branch(
                sub, outcome.alpha_F, self.config.branching, self.n_dom
            )
        except ValidationError:
            sub.status = "terminal"
            self.stats.terminal += 1
            return self._verdict(
                "inconclusive",
                inconclusive={
                    "reason": "degenerate-subdomain",
                    "subdomain": sub.id,
                    "box": {
                        "lower": sub.box.lower.tolist(),
                        "upper": sub.box.upper.tolist(),
                    },
                },
                t0=t0,
            )
        sub.status = "split"
        self.stats.splits += 1
        self.n_dom += 2
        self.subdomains[left.id] = left
        self.subdomains[right.id] = right
        priority = outcome.bound if outcome.bound is not None else -math.inf
        if self.config.selection == "depth-first":
            # push right first so the lower-id child is processed next
            self._push(right, priority)
            self._push(left, priority)
        else:
            self._push(left, priority)
            self._push(right, priority)
        return None

    def _finish_valid(self, t0: float) -> Verdict:
        if self.mode == "known":
            return self._verdict("valid", policy="given", t0=t0)
        entries = [
            e
            for e in self.policy_entries
            if self._intersects_c(e.box)
        ]
        return self._verdict("valid", policy=PiecewisePolicy(entries), t0=t0)

    def _intersects_c(self, box: Box) -> bool:
        h_field = self.fields.h_field
        env = h_field.interval_env(box)
        return interval_eval(h_field.expr, env).hi >= 0.0

    def _finish_cap(self, t0: float) -> Verdict:
        remaining = [self.subdomains[sid] for sid in self._worklist_ids()]
        largest = max(remaining, key=lambda s: (s.box.volume, -s.id)) if remaining else None
        return self._verdict(
            "inconclusive",
            inconclusive={
                "reason": "iteration-cap",
                "max_iters": self.config.max_iters,
                "subdomain": largest.id if largest else None,
                "box": {
                    "lower": largest.box.lower.tolist(),
                    "upper": largest.box.upper.tolist(),
                }
                if largest
                else None,
            },
            t0=t0,
        )

    def _worklist_ids(self) -> list[int]:
        if self.config.selection == "best-first":
            return [sid for _, sid in self.worklist]
        return list(self.worklist)

    def _verdict(
        self,
        kind: str,
        policy=None,
        counterexample=None,
        inconclusive=None,
        t0: float = 0.0,
    ) -> Verdict:
        self.stats.wall_time = time.perf_counter() - t0
        ordered = [self.subdomains[i] for i in sorted(self.subdomains)]
        self.stats.leaves = sum(1 for s in ordered if s.status != "split")
        return Verdict(
            kind=kind,
            policy=policy,
            counterexample=counterexample,
            inconclusive=inconclusive,
            stats=self.stats,
            subdomains=ordered,
        )


def verify_known(
    spec: ProblemSpec,
    config: VerifierConfig | None = None,
    progress: Callable[[dict], None] | None = None,
) -> Verdict:
    """Verify or falsify the candidate under the problem's given policy."""
    if not spec.has_policy:
        raise ValidationError("known-policy verification requires pi")
    return _Engine(spec, config or VerifierConfig(), "known", progress).run()


def verify_unknown(
    spec: ProblemSpec,
    config: VerifierConfig | None = None,
    progress: Callable[[dict], None] | None = None,
) -> Verdict:
    """Verify the candidate with per-subdomain inputs chosen by the solver."""
    return _Engine(spec, config or VerifierConfig(), "unknown", progress).run()
