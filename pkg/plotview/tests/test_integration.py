"""End-to-end: real verifier dumps from the bundled case study."""

import subprocess
import sys

import numpy as np
import pytest
from matplotlib.colors import to_rgba
from matplotlib.patches import Rectangle

from plotview import (
    CASE_COLORS,
    read_policy,
    read_problem,
    read_subdomains,
    render_map,
    render_policy,
)
from plotview.cli import main

GREEN = to_rgba(CASE_COLORS["A"])


def rects_by_color(fig, color):
    return {
        (p.get_x(), p.get_y(), p.get_width(), p.get_height())
        for p in fig.axes[0].patches
        if isinstance(p, Rectangle) and p.get_facecolor() == color
    }


def test_map_green_boxes_match_case_A_rows(case_study_dumps, tmp_path):
    records = read_subdomains(case_study_dumps.subdomains)
    problem = read_problem(case_study_dumps.problem)
    out = tmp_path / "map.png"
    fig = render_map(records, problem, out=out)
    assert out.stat().st_size > 10_000

    green = rects_by_color(fig, GREEN)
    a_rows = {
        (r.lower[0], r.lower[1], r.upper[0] - r.lower[0], r.upper[1] - r.lower[1])
        for r in records
        if r.case == "A"
    }
    assert green == a_rows  # bijection, not just inclusion

    # spot-check 20 random case-A rows by exact coordinate lookup
    rng = np.random.default_rng(8)
    sample = rng.choice(sorted(a_rows), size=20, replace=False)
    for coords in sample:
        assert tuple(coords) in green


def test_map_shows_red_ring_outside_boundary(case_study_dumps):
    # infeasible boxes hug the edge of X, verified ones the interior
    records = read_subdomains(case_study_dumps.subdomains)
    b_rows = [r for r in records if r.case == "B"]
    a_rows = [r for r in records if r.case == "A"]
    assert b_rows and a_rows
    b_dist = np.mean([np.hypot(*(np.add(r.lower, r.upper) / 2)) for r in b_rows])
    a_dist = np.mean([np.hypot(*(np.add(r.lower, r.upper) / 2)) for r in a_rows])
    assert b_dist > a_dist


def test_policy_heatmaps_render_for_both_inputs(case_study_dumps, tmp_path):
    records = read_policy(case_study_dumps.policy)
    problem = read_problem(case_study_dumps.problem)
    assert len(records[0].u) == 2
    for j in (1, 2):
        out = tmp_path / f"u{j}.png"
        fig = render_policy(records, problem, j=j, out=out)
        assert out.stat().st_size > 10_000
        lo, hi = fig.axes[1].get_ylim()
        assert (lo, hi) == (problem["U"][0][j - 1], problem["U"][1][j - 1])


def test_cli_round_trip(case_study_dumps, tmp_path):
    rc = main(
        [
            "map",
            str(case_study_dumps.subdomains),
            str(case_study_dumps.problem),
            "-o",
            str(tmp_path / "map.png"),
        ]
    )
    assert rc == 0 and (tmp_path / "map.png").exists()
    rc = main(
        [
            "policy",
            str(case_study_dumps.policy),
            str(case_study_dumps.problem),
            "-j",
            "2",
            "-o",
            str(tmp_path / "u2.png"),
        ]
    )
    assert rc == 0 and (tmp_path / "u2.png").exists()


def test_cli_reports_errors(case_study_dumps, tmp_path, capsys):
    rc = main(
        [
            "policy",
            str(case_study_dumps.policy),
            str(case_study_dumps.problem),
            "-j",
            "9",
            "-o",
            str(tmp_path / "u9.png"),
        ]
    )
    assert rc == 1
    assert "out of range" in capsys.readouterr().err
