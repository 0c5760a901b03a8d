import numpy as np
import pytest

from dtcbf import (
    Box,
    ScalarField,
    load_problem,
    maximize_over_box,
    minimize_constrained,
    parse,
    substitute,
    to_string,
)

from conftest import EXAMPLE, grid_values, random_box, random_expr


class TestMaximizeOverBox:
    def test_concave_quadratic(self):
        sol = maximize_over_box(parse("-(u1 - 0.3)^2", ["u1"]), Box([-1], [1]), 1e-6, names=["u1"])
        assert sol.status == "converged"
        assert sol.point[0] == pytest.approx(0.3, abs=1e-3)
        assert sol.value == pytest.approx(0.0, abs=1e-6)
        assert sol.gap <= 1e-6

    def test_sine(self):
        sol = maximize_over_box(parse("sin(u1)", ["u1"]), Box([0], [3]), 1e-6, names=["u1"])
        assert sol.value == pytest.approx(1.0, abs=1e-6)
        assert sol.point[0] == pytest.approx(np.pi / 2, abs=1e-3)

    def test_multimodal_picks_global(self):
        # two humps, the right one higher
        e = parse("exp(-(u1 + 1)^2) + 1.5*exp(-(u1 - 1)^2)", ["u1"])
        sol = maximize_over_box(e, Box([-3], [3]), 1e-8, names=["u1"])
        assert sol.point[0] == pytest.approx(0.97318, abs=1e-3)
        assert sol.value == pytest.approx(1.51929657, abs=1e-6)

    def test_fixed_variables(self):
        # maximize over u with x pinned
        names = ["x1", "u1"]
        e = parse("-(u1 - x1)^2", names)
        sol = maximize_over_box(e, Box([-2], [2]), 1e-8, names=names, fixed={"x1": 0.7})
        assert sol.point[0] == pytest.approx(0.7, abs=1e-3)

    def test_case_study_inner_maximization(self):
        # max over U of the two-argument DTCBF margin at the domain midpoint
        spec = load_problem(EXAMPLE)
        names = ["x1", "x2", "u1", "u2"]
        h = to_string(spec.h)
        xn = ["x1", "x2"]
        h_next = substitute(spec.h, dict(zip(xn, spec.f)))
        F = parse(f"({to_string(h_next)}) - ({h}) + 0.8*({h})", names)
        fixed = {"x1": 0.0, "x2": 0.0}
        sol = maximize_over_box(F, spec.U, 1e-6, names=names, fixed=fixed)
        assert sol.status == "converged"

        f = ScalarField(F, names)
        n = 2001
        us = np.linspace(-2.5, 2.5, n)
        U1, U2 = np.meshgrid(us, us, indexing="ij")
        pts = np.vstack([np.zeros(n * n), np.zeros(n * n), U1.ravel(), U2.ravel()])
        from dtcbf import lambdify
        grid_max = lambdify(F, names)(pts).max()
        assert abs(sol.value - grid_max) <= 1e-3

    def test_gap_trace_monotone(self):
        e = parse("sin(3*u1)*u1^2", ["u1"])
        sol = maximize_over_box(e, Box([-2], [2]), 1e-8, names=["u1"])
        trace = np.asarray(sol.gap_trace)
        assert np.all(np.diff(trace) <= 1e-12)

    def test_determinism(self):
        e = parse("sin(3*u1) + 0.3*u1", ["u1"])
        a = maximize_over_box(e, Box([-2], [2]), 1e-8, names=["u1"])
        b = maximize_over_box(e, Box([-2], [2]), 1e-8, names=["u1"])
        assert a.iterations == b.iterations
        assert a.value == b.value
        assert np.array_equal(a.point, b.point)

    def test_iteration_limit_keeps_valid_gap(self):
        e = parse("sin(5*u1)*cos(3*u2)", ["u1", "u2"])
        sol = maximize_over_box(e, Box([-2, -2], [2, 2]), 1e-12, names=["u1", "u2"], max_nodes=25)
        assert sol.status == "iteration-limit"
        # certified bound still encloses the true max (1 at interior points)
        assert sol.value + sol.gap >= 1.0 - 1e-6

    def test_random_grid_oracle(self, rng):
        for _ in range(25):
            ndim = 1 if rng.random() < 0.5 else 2
            names = ["u1", "u2"][:ndim]
            e = random_expr(rng, names, depth=3)
            box = random_box(rng, ndim)
            sol = maximize_over_box(e, box, 1e-6, names=names)
            if sol.status != "converged":
                continue
            per_axis = 3001 if ndim == 1 else 301
            gmax = grid_values(e, names, box, per_axis).max()
            assert sol.value >= gmax - 1e-3
            assert sol.value <= gmax + max(1e-3, sol.gap + 1e-9)


class TestMinimizeConstrained:
    def test_halfspace_projection(self):
        sol = minimize_constrained(
            parse("(x1 - 1)^2 + (x2 - 1)^2", ["x1", "x2"]),
            parse("x1 + x2 - 1", ["x1", "x2"]),
            Box([0, 0], [2, 2]),
            eps_c=1e-6,
            eps_feas=1e-9,
            names=["x1", "x2"],
        )
        assert sol.value == pytest.approx(0.5, abs=1e-5)
        np.testing.assert_allclose(sol.point, [0.5, 0.5], atol=1e-3)

    def test_case_study_baseline(self):
        # epsilon-feasibility lets the incumbent sit just outside h >= 0
        from conftest import closed_loop_F_text

        spec = load_problem(EXAMPLE)
        names = ["x1", "x2"]
        F = parse(closed_loop_F_text(), names)
        H = parse(f"-({to_string(spec.h)})", names)
        sol = minimize_constrained(F, H, spec.X, eps_c=1e-6, eps_feas=1e-12, names=names)
        assert sol.point is not None
        np.testing.assert_allclose(sol.point, [0.841, -1.457], atol=5e-3)
        from dtcbf import evaluate
        h_val = evaluate(spec.h, {"x1": float(sol.point[0]), "x2": float(sol.point[1])})
        assert h_val < 0.0

    def test_infeasible_constant_constraint(self):
        sol = minimize_constrained(
            parse("x1^2", ["x1"]),
            parse("1", ["x1"]),
            Box([-1], [1]),
            eps_c=1e-6,
            eps_feas=1e-9,
            names=["x1"],
        )
        assert sol.status == "infeasible"
        assert sol.point is None

    def test_random_polynomial_grid_oracle(self, rng):
        # interior-feasible problems where the grid oracle is reliable
        names = ["x1", "x2"]
        box = Box([-1, -1], [1, 1])
        checked = 0
        while checked < 5:
            c = rng.uniform(-1, 1, size=6)
            F = parse(
                f"{c[0]:.4f}*x1^2 + {c[1]:.4f}*x2^2 + {c[2]:.4f}*x1*x2"
                f" + {c[3]:.4f}*x1 + {c[4]:.4f}*x2 + {c[5]:.4f}",
                names,
            )
            H = parse("x1^2 + x2^2 - 0.81", names)
            sol = minimize_constrained(F, H, box, eps_c=1e-8, eps_feas=1e-9, names=names)
            if sol.status != "converged":
                continue
            pts = box.sample_grid(501)
            from dtcbf import lambdify
            vals = lambdify(F, names)(pts)
            feas = pts[0] ** 2 + pts[1] ** 2 - 0.81 <= 0.0
            gmin = vals[feas].min()
            assert sol.value <= gmin + 1e-9
            assert gmin - sol.value <= 1e-3
            checked += 1
