"""Command-line front end: verify, discretize, baseline.

Exit codes: 0 = valid, 1 = counterexample, 2 = inconclusive,
64 = usage error, 65 = malformed/invalid input data.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from typing import Sequence

import numpy as np

from .errors import DtcbfError, ValidationError
from .expr import lambdify
from .global_optimizer import minimize_constrained
from .problem import (
    ProblemSpec,
    linear_f_expressions,
    load_problem,
    zoh_discretize,
)
from .verifier import (
    BRANCHINGS,
    SELECTIONS,
    PiecewisePolicy,
    Verdict,
    VerifierConfig,
    verify_known,
    verify_unknown,
)

EXIT_VALID = 0
EXIT_COUNTEREXAMPLE = 1
EXIT_INCONCLUSIVE = 2
EXIT_USAGE = 64
EXIT_DATA = 65

log = logging.getLogger("dtcbf")


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors, which collides with "inconclusive"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _setup_logging() -> str:
    level_name = os.environ.get("DTCBF_LOG", "info").strip().lower()
    levels = {"quiet": logging.WARNING, "info": logging.INFO, "trace": logging.DEBUG}
    if level_name not in levels:
        print(
            f"dtcbf: unknown DTCBF_LOG value {level_name!r}, using 'info'",
            file=sys.stderr,
        )
        level_name = "info"
    logging.basicConfig(stream=sys.stderr, format="%(message)s", level=levels[level_name])
    log.setLevel(levels[level_name])
    return level_name


def build_parser() -> _Parser:
    parser = _Parser(prog="dtcbf", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_verify = sub.add_parser("verify", help="verify or falsify a candidate barrier")
    p_verify.add_argument("problem", help="path to a JSON problem file")
    p_verify.add_argument("--mode", choices=("known", "unknown", "auto"), default="auto")
    p_verify.add_argument("--eps-f", type=float, default=1e-6)
    p_verify.add_argument("--eps-h", type=float, default=1e-6)
    p_verify.add_argument("--eps-d", type=float, default=1e-6)
    p_verify.add_argument("--select", choices=SELECTIONS, default="best-first")
    p_verify.add_argument("--branch", choices=BRANCHINGS, default="scaled-longest-side")
    p_verify.add_argument("--workers", type=int, default=1)
    p_verify.add_argument(
        "--deterministic",
        action="store_true",
        help="force a single worker for reproducible iteration order and counts",
    )
    p_verify.add_argument("--max-iters", type=int, default=200_000)
    p_verify.add_argument("--out", help="write a verdict JSON file")
    p_verify.add_argument("--dump-subdomains", help="write leaf subdomains as CSV")
    p_verify.add_argument("--dump-policy", help="write the piecewise policy as CSV")

    p_disc = sub.add_parser("discretize", help="print the generated ZOH discretization")
    p_disc.add_argument("problem", help="path to a JSON problem file with a discretize block")

    p_base = sub.add_parser(
        "baseline", help="single global minimization of F over X subject to h >= 0"
    )
    p_base.add_argument("problem", help="path to a JSON problem file (pi required)")
    p_base.add_argument("--eps-c", type=float, default=1e-6)
    p_base.add_argument("--eps-feas", type=float, default=1e-12)
    return parser


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def _write_subdomain_csv(path: str, verdict: Verdict, n: int) -> None:
    header = ["id", "parent", "case"]
    for i in range(1, n + 1):
        header += [f"x{i}_lb", f"x{i}_ub"]
    header.append("bound")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for sub in verdict.leaves():
            row = [sub.id, sub.parent, sub.case_label]
            for i in range(n):
                row += [repr(float(sub.box.lower[i])), repr(float(sub.box.upper[i]))]
            row.append("" if sub.bound is None else repr(float(sub.bound)))
            writer.writerow(row)


def _write_policy_csv(path: str, policy, n: int, m: int) -> None:
    header = ["id"]
    for i in range(1, n + 1):
        header += [f"x{i}_lb", f"x{i}_ub"]
    header += [f"u{j}" for j in range(1, m + 1)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        if not isinstance(policy, PiecewisePolicy):
            return
        for entry in policy:
            row = [entry.id]
            for i in range(n):
                row += [repr(float(entry.box.lower[i])), repr(float(entry.box.upper[i]))]
            row += [repr(float(v)) for v in entry.u]
            writer.writerow(row)


def _leaf_counts(verdict: Verdict) -> dict:
    counts = {"A": 0, "B": 0, "C1": 0, "C2": 0, "terminal": 0}
    for sub in verdict.leaves():
        counts[sub.case_label] += 1
    return counts


def _verdict_json(
    verdict: Verdict, config_echo: dict, policy_path: str | None
) -> dict:
    counts = _leaf_counts(verdict)
    doc = {
        "verdict": verdict.kind,
        "counterexample": None,
        "policy": None,
        "inconclusive": verdict.inconclusive,
        "stats": {
            "iterations": verdict.stats.iterations,
            "leaves": counts,
            "wall_time": verdict.stats.wall_time,
        },
        "config": config_echo,
    }
    if verdict.counterexample is not None:
        doc["counterexample"] = verdict.counterexample.as_dict()
    if verdict.kind == "valid":
        if isinstance(verdict.policy, PiecewisePolicy):
            if policy_path:
                doc["policy"] = {"path": policy_path}
            else:
                doc["policy"] = {
                    "entries": [
                        {
                            "id": e.id,
                            "lower": e.box.lower.tolist(),
                            "upper": e.box.upper.tolist(),
                            "u": e.u.tolist(),
                        }
                        for e in verdict.policy
                    ]
                }
        else:
            doc["policy"] = verdict.policy  # "given"
    return doc


def _print_verdict(verdict: Verdict) -> None:
    print(f"verdict: {verdict.kind}")
    if verdict.kind == "counterexample":
        rep = verdict.counterexample
        xs = ", ".join(f"{v:.10g}" for v in rep.x)
        print(f"  x: [{xs}]")
        print(f"  h(x): {rep.h_value:.10g}")
        if rep.mode == "known":
            print(f"  F(x): {rep.F_value:.10g}")
            pis = ", ".join(f"{v:.10g}" for v in rep.pi_value)
            print(f"  pi(x): [{pis}]")
        else:
            us = ", ".join(f"{v:.10g}" for v in rep.inner_u)
            print(f"  max_u F(x, u): {rep.inner_value:.10g} (gap {rep.inner_gap:.3g})")
            print(f"  argmax u: [{us}]")
        print(f"  recheck: {'pass' if rep.passed else 'FAIL'}")
    elif verdict.kind == "inconclusive":
        info = verdict.inconclusive or {}
        print(f"  reason: {info.get('reason')}")
        if info.get("subdomain") is not None:
            print(f"  subdomain: {info['subdomain']}")
            box = info.get("box")
            if box:
                print(f"  box: lower={box['lower']} upper={box['upper']}")
    elif isinstance(verdict.policy, PiecewisePolicy):
        print(f"  policy: piecewise-constant over {len(verdict.policy)} subdomains")
    else:
        print("  policy: given")
    counts = _leaf_counts(verdict)
    st = verdict.stats
    print(
        f"stats: iterations={st.iterations}"
        f" A={counts['A']} B={counts['B']} C1={counts['C1']}"
        f" terminal={counts['terminal']} pending={counts['C2']}"
        f" wall={st.wall_time:.2f}s"
    )


def cmd_verify(args) -> int:
    spec = load_problem(args.problem)
    for note in spec.warnings:
        log.info("note: %s", note)
    mode = args.mode
    if mode == "auto":
        mode = "known" if spec.has_policy else "unknown"
    if mode == "known" and not spec.has_policy:
        raise ValidationError("--mode known requires a 'pi' entry in the problem file")
    workers = 1 if args.deterministic else args.workers
    config = VerifierConfig(
        eps_f=args.eps_f,
        eps_h=args.eps_h,
        eps_d=args.eps_d,
        selection=args.select,
        branching=args.branch,
        workers=workers,
        max_iters=args.max_iters,
    )

    progress = None
    if log.isEnabledFor(logging.DEBUG):

        def progress(event):
            bound = event["bound"]
            log.debug(
                "[%6d] case=%-8s bound=%s",
                event["id"],
                event["case"],
                "-" if bound is None else f"{bound:.6g}",
            )

    log.info("verifying %s (mode=%s)", args.problem, mode)
    run = verify_known if mode == "known" else verify_unknown
    verdict = run(spec, config, progress)

    if args.dump_subdomains:
        _write_subdomain_csv(args.dump_subdomains, verdict, spec.n)
        log.info("wrote %s", args.dump_subdomains)
    if args.dump_policy:
        _write_policy_csv(args.dump_policy, verdict.policy, spec.n, spec.m)
        log.info("wrote %s", args.dump_policy)
    if args.out:
        config_echo = {
            "problem": args.problem,
            "mode": mode,
            "eps_f": args.eps_f,
            "eps_h": args.eps_h,
            "eps_d": args.eps_d,
            "select": args.select,
            "branch": args.branch,
            "workers": workers,
            "deterministic": bool(args.deterministic),
            "max_iters": args.max_iters,
        }
        doc = _verdict_json(verdict, config_echo, args.dump_policy)
        with open(args.out, "w") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
        log.info("wrote %s", args.out)

    _print_verdict(verdict)
    return {
        "valid": EXIT_VALID,
        "counterexample": EXIT_COUNTEREXAMPLE,
        "inconclusive": EXIT_INCONCLUSIVE,
    }[verdict.kind]


# ---------------------------------------------------------------------------
# discretize
# ---------------------------------------------------------------------------


def cmd_discretize(args) -> int:
    try:
        with open(args.problem) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read {args.problem}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{args.problem} is not valid JSON: {exc}") from exc
    block = raw.get("discretize")
    if not isinstance(block, dict):
        raise ValidationError("problem file has no 'discretize' block")
    method = block.get("method", "zoh-linear")
    if method != "zoh-linear":
        raise ValidationError(f"unsupported discretization method {method!r}")
    try:
        A = np.asarray(block["A"], dtype=float)
        B = np.asarray(block["B"], dtype=float)
        Ts = float(block["Ts"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"discretize block is malformed: {exc}") from exc
    A_d, B_d = zoh_discretize(A, B, Ts)

    def show(name, M):
        print(f"{name}:")
        for row in M:
            print("  " + "  ".join(f"{v: .12g}" for v in row))

    show("A_d", A_d)
    show("B_d", B_d)
    for i, f_i in enumerate(linear_f_expressions(A_d, B_d), start=1):
        print(f"f{i} = {f_i}")
    return 0


# ---------------------------------------------------------------------------
# baseline
# ---------------------------------------------------------------------------


def cmd_baseline(args) -> int:
    spec = load_problem(args.problem)
    for note in spec.warnings:
        log.info("note: %s", note)
    if not spec.has_policy:
        raise ValidationError("baseline requires a 'pi' entry in the problem file")
    sol = minimize_constrained(
        spec.objective_known(),
        spec.constraint(),
        spec.X,
        eps_c=args.eps_c,
        eps_feas=args.eps_feas,
        names=spec.x_names,
    )
    if sol.status == "infeasible":
        print("baseline: no feasible point found (the set h >= 0 may be empty)")
        return EXIT_INCONCLUSIVE
    h_fn = lambdify(spec.h, spec.x_names)
    h_star = float(h_fn(sol.point))
    xs = ", ".join(f"{v:.12g}" for v in sol.point)
    print(f"minimizer: [{xs}]")
    print(f"value: {sol.value:.12g}")
    print(f"gap: {sol.gap:.6g}")
    print(f"h(x*): {h_star:.6g}")
    if h_star < 0.0:
        print(
            "note: h(x*) < 0 — the epsilon-feasible minimizer lies marginally"
            " outside the zero-superlevel set"
        )
    if sol.status != "converged":
        print(f"warning: optimizer stopped at {sol.status} (gap {sol.gap:.3g})")
        return EXIT_INCONCLUSIVE
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "verify": cmd_verify,
        "discretize": cmd_discretize,
        "baseline": cmd_baseline,
    }
    try:
        return handlers[args.command](args)
    except ValidationError as exc:
        print(f"dtcbf: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DtcbfError as exc:
        print(f"dtcbf: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
