"""Shared fixtures: random expression/box generators used across suites."""

import json
import subprocess
import sys
import time
from pathlib import Path
from types import SimpleNamespace

import numpy as np
import pytest

from dtcbf import Box, lambdify, load_problem, parse, substitute, to_string

REPO_ROOT = Path(__file__).resolve().parents[1]
EXAMPLE = "examples/wang2023.json"

# Pool kept to total operations so random trees never hit a domain error:
# div/log/sqrt are exercised by hand-written cases instead.
_BINOPS = ("+", "-", "*")
_UNARY = ("sin", "cos", "neg")


def random_expr_text(rng: np.random.Generator, names, depth: int) -> str:
    """Random expression string of at most the given depth over names."""
    if depth == 0 or rng.random() < 0.15:
        if rng.random() < 0.35:
            return f"{rng.uniform(-2.0, 2.0):.4f}"
        return str(names[rng.integers(len(names))])
    r = rng.random()
    if r < 0.50:
        op = _BINOPS[rng.integers(len(_BINOPS))]
        a = random_expr_text(rng, names, depth - 1)
        b = random_expr_text(rng, names, depth - 1)
        return f"({a} {op} {b})"
    if r < 0.72:
        k = int(rng.integers(2, 4))
        return f"({random_expr_text(rng, names, depth - 1)})^{k}"
    if r < 0.92:
        fn = _UNARY[rng.integers(len(_UNARY))]
        inner = random_expr_text(rng, names, depth - 1)
        if fn == "neg":
            return f"(-({inner}))"
        return f"{fn}({inner})"
    # exp only over a leaf argument, so nested trees cannot overflow
    return f"exp({random_expr_text(rng, names, 0)})"


def random_expr(rng: np.random.Generator, names, depth: int = 4):
    return parse(random_expr_text(rng, names, depth), names)


def random_box(rng: np.random.Generator, n: int, max_halfwidth: float = 1.5) -> Box:
    center = rng.uniform(-1.0, 1.0, size=n)
    half = rng.uniform(0.1, max_halfwidth, size=n)
    return Box(center - half, center + half)


def closed_loop_F_text() -> str:
    """h(f(x, pi(x))) - h(x) + 0.8*h(x) for the bundled case study."""
    spec = load_problem(EXAMPLE)
    un = [f"u{j + 1}" for j in range(spec.m)]
    xn = [f"x{i + 1}" for i in range(spec.n)]
    f_closed = [substitute(fi, dict(zip(un, spec.pi))) for fi in spec.f]
    h_next = substitute(spec.h, dict(zip(xn, f_closed)))
    h = to_string(spec.h)
    return f"({to_string(h_next)}) - ({h}) + 0.8*({h})"


def grid_values(e, names, box: Box, per_axis: int) -> np.ndarray:
    """Expression values on a regular grid, always as a 1-D array."""
    pts = box.sample_grid(per_axis)
    vals = np.asarray(lambdify(e, names)(pts), dtype=float)
    if vals.ndim == 0:  # constant expression broadcasts to a scalar
        vals = np.full(pts.shape[1], float(vals))
    return vals


@pytest.fixture
def rng():
    return np.random.default_rng(20230817)


@pytest.fixture(scope="session")
def case_study_unknown(tmp_path_factory):
    """One shared single-worker unknown-mode CLI run on the bundled case
    study.  Takes a few minutes, so every suite that needs its artifacts
    (verdict file, subdomain/policy CSVs, wall time) reuses this run.
    """
    out = tmp_path_factory.mktemp("case-study-unknown")
    verdict_path = out / "verdict.json"
    subs_path = out / "subdomains.csv"
    policy_path = out / "policy.csv"
    t0 = time.perf_counter()
    proc = subprocess.run(
        [
            sys.executable,
            "-m",
            "dtcbf",
            "verify",
            EXAMPLE,
            "--mode",
            "unknown",
            "--deterministic",
            "--out",
            str(verdict_path),
            "--dump-subdomains",
            str(subs_path),
            "--dump-policy",
            str(policy_path),
        ],
        capture_output=True,
        text=True,
        cwd=REPO_ROOT,
        timeout=1800,
    )
    wall = time.perf_counter() - t0
    assert proc.returncode == 0, proc.stderr
    return SimpleNamespace(
        returncode=proc.returncode,
        stdout=proc.stdout,
        wall=wall,
        verdict=json.loads(verdict_path.read_text()),
        subdomains_csv=subs_path,
        policy_csv=policy_path,
    )
