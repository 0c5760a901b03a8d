"""Fixtures: synthetic CSV builders plus one real verifier run."""

import csv
import json
import subprocess
import sys
from pathlib import Path
from types import SimpleNamespace

import pytest

REPO_ROOT = Path(__file__).resolve().parents[2]
EXAMPLE = REPO_ROOT / "examples" / "wang2023.json"


def write_subdomains(path, rows):
    """rows: (id, parent, case, x1_lb, x1_ub, x2_lb, x2_ub, bound)"""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "parent", "case", "x1_lb", "x1_ub", "x2_lb", "x2_ub", "bound"])
        writer.writerows(rows)
    return path


def write_policy(path, rows, m=1):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["id", "x1_lb", "x1_ub", "x2_lb", "x2_ub"] + [f"u{j}" for j in range(1, m + 1)]
        )
        writer.writerows(rows)
    return path


def write_problem(path, n=2, m=1, h="1 - x1^2 - x2^2", U=((-1.0,), (1.0,)),
                  X=((-1.5, -1.5), (1.5, 1.5))):
    doc = {
        "n": n,
        "m": m,
        "f": ["0"] * n,
        "h": h,
        "gamma": {"linear": 0.5},
        "U": {"lower": list(U[0]), "upper": list(U[1])},
        "X": {"lower": list(X[0]), "upper": list(X[1])},
    }
    path.write_text(json.dumps(doc))
    return path


@pytest.fixture(scope="session")
def case_study_dumps(tmp_path_factory):
    """Unknown-mode verifier run on the bundled case study (slow, shared)."""
    out = tmp_path_factory.mktemp("dumps")
    subs = out / "subdomains.csv"
    policy = out / "policy.csv"
    proc = subprocess.run(
        [
            sys.executable, "-m", "dtcbf", "verify", str(EXAMPLE),
            "--mode", "unknown",
            "--dump-subdomains", str(subs),
            "--dump-policy", str(policy),
        ],
        capture_output=True,
        text=True,
        cwd=REPO_ROOT,
        timeout=1800,
    )
    assert proc.returncode == 0, proc.stderr
    return SimpleNamespace(subdomains=subs, policy=policy, problem=EXAMPLE)
