import json

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.signal import cont2discrete

from dtcbf import (
    ValidationError,
    evaluate,
    linear_f_expressions,
    load_problem,
    parse,
    zoh_discretize,
)

from conftest import EXAMPLE


def toy_doc(**overrides):
    doc = {
        "n": 2,
        "m": 1,
        "f": ["x1 + 0.1*u1", "0.5*x2"],
        "h": "1 - x1^2 - x2^2",
        "gamma": {"linear": 0.5},
        "pi": ["0.1*x1"],
        "U": {"lower": [-1], "upper": [1]},
        "X": {"lower": [-2, -2], "upper": [2, 2]},
    }
    doc.update(overrides)
    return doc


class TestLoadProblem:
    def test_bundled_case_study(self):
        spec = load_problem(EXAMPLE)
        assert spec.n == 2 and spec.m == 2
        assert spec.has_policy
        assert_allclose(spec.U.lower, [-2.5, -2.5])
        assert_allclose(spec.X.upper, [2.0, 2.0])
        assert evaluate(spec.h, {"x1": 0.0, "x2": 0.0}) == pytest.approx(7.402)
        assert spec.gamma.linear_coefficient == pytest.approx(0.8)
        # f was generated from the ZOH block
        x_plus = evaluate(spec.f[0], {"x1": 0, "x2": 0, "u1": 1, "u2": 0})
        assert x_plus == pytest.approx(5.4, abs=0.05)

    def test_json_text_and_dict_sources(self, tmp_path):
        doc = toy_doc()
        spec_dict = load_problem(doc)
        p = tmp_path / "toy.json"
        p.write_text(json.dumps(doc))
        spec_file = load_problem(p)
        assert spec_dict.n == spec_file.n
        assert evaluate(spec_dict.h, {"x1": 0.3, "x2": 0.1}) == pytest.approx(
            evaluate(spec_file.h, {"x1": 0.3, "x2": 0.1})
        )

    def test_missing_field(self):
        doc = toy_doc()
        del doc["h"]
        with pytest.raises(ValidationError, match="h"):
            load_problem(doc)

    def test_wrong_f_arity(self):
        with pytest.raises(ValidationError, match="f"):
            load_problem(toy_doc(f=["x1"]))

    def test_wrong_pi_arity(self):
        with pytest.raises(ValidationError, match="pi"):
            load_problem(toy_doc(pi=["0.1*x1", "x2"]))

    def test_box_dimension_mismatch(self):
        with pytest.raises(ValidationError, match="U"):
            load_problem(toy_doc(U={"lower": [-1, -1], "upper": [1, 1]}))

    def test_bad_expression_reported_with_field(self):
        with pytest.raises(ValidationError, match=r"f\[2\]"):
            load_problem(toy_doc(f=["x1", "0.5*"]))

    def test_policy_may_reference_x_only(self):
        with pytest.raises(ValidationError, match="pi"):
            load_problem(toy_doc(pi=["u1"]))

    def test_unknown_field_warns(self):
        spec = load_problem(toy_doc(extra_stuff=1))
        assert any("extra_stuff" in w for w in spec.warnings)

    def test_invalid_json_file(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(ValidationError, match="JSON"):
            load_problem(p)


class TestGammaValidation:
    def test_linear_above_one_rejected(self):
        with pytest.raises(ValidationError, match="gamma"):
            load_problem(toy_doc(gamma={"linear": 1.5}))

    def test_linear_nonpositive_rejected(self):
        for c in (0.0, -0.3):
            with pytest.raises(ValidationError, match="gamma"):
                load_problem(toy_doc(gamma={"linear": c}))

    def test_linear_one_allowed(self):
        assert load_problem(toy_doc(gamma={"linear": 1.0})).gamma.linear_coefficient == 1.0

    def test_expression_gamma(self):
        spec = load_problem(toy_doc(gamma={"expr": "0.5*r"}))
        assert spec.gamma(2.0) == pytest.approx(1.0)

    def test_expression_gamma_nonzero_at_zero(self):
        with pytest.raises(ValidationError, match="gamma"):
            load_problem(toy_doc(gamma={"expr": "r + 0.1"}))

    def test_expression_gamma_decreasing(self):
        with pytest.raises(ValidationError, match="gamma"):
            load_problem(toy_doc(gamma={"expr": "-r"}))

    def test_expression_gamma_above_identity(self):
        # gamma(r) <= r must hold on the observed range of h
        with pytest.raises(ValidationError, match="gamma"):
            load_problem(toy_doc(gamma={"expr": "2*r"}))


class TestContainment:
    def test_superlevel_set_must_fit_in_X(self):
        # h >= 0 reaches the boundary of the shrunken X
        with pytest.raises(ValidationError, match="X"):
            load_problem(toy_doc(X={"lower": [-0.5, -0.5], "upper": [0.5, 0.5]}))

    def test_attestation_downgrades_to_warning(self):
        doc = toy_doc(
            X={"lower": [-0.5, -0.5], "upper": [0.5, 0.5]},
            attest_X_contains_C=True,
        )
        spec = load_problem(doc)
        assert any("attestation" in w for w in spec.warnings)

    def test_policy_range_warning(self):
        spec = load_problem(toy_doc(pi=["5*x1"]))
        assert any("pi[1]" in w for w in spec.warnings)


class TestZohDiscretize:
    def test_case_study_matrices(self):
        A = np.array([[2.0, 1.0], [3.0, 1.0]])
        B = np.eye(2)
        A_d, B_d = zoh_discretize(A, B, 1.0)
        assert np.abs(A_d - [[17.6, 7.3], [22.0, 10.3]]).max() <= 0.05
        assert np.abs(B_d - [[5.4, 2.0], [5.9, 3.4]]).max() <= 0.05

    def test_zero_dynamics(self):
        A_d, B_d = zoh_discretize(np.zeros((2, 2)), np.eye(2), 1.0)
        assert_allclose(A_d, np.eye(2), atol=1e-12)
        assert_allclose(B_d, np.eye(2), atol=1e-12)

    def test_nilpotent_closed_form(self):
        A = np.array([[0.0, 1.0], [0.0, 0.0]])
        A_d, B_d = zoh_discretize(A, np.eye(2), 1.0)
        assert_allclose(A_d, [[1.0, 1.0], [0.0, 1.0]], atol=1e-12)
        assert_allclose(B_d, [[1.0, 0.5], [0.0, 1.0]], atol=1e-12)

    def test_against_scipy(self, rng):
        for _ in range(10):
            n, m = 3, 2
            A = rng.normal(size=(n, n))
            B = rng.normal(size=(n, m))
            Ts = float(rng.uniform(0.05, 1.5))
            A_d, B_d = zoh_discretize(A, B, Ts)
            A_s, B_s, *_ = cont2discrete((A, B, np.eye(n), np.zeros((n, m))), Ts)
            assert_allclose(A_d, A_s, rtol=1e-9, atol=1e-9)
            assert_allclose(B_d, B_s, rtol=1e-9, atol=1e-9)

    def test_rejects_bad_shapes(self):
        with pytest.raises(ValidationError, match="square"):
            zoh_discretize(np.zeros((2, 3)), np.zeros((2, 1)), 1.0)
        with pytest.raises(ValidationError):
            zoh_discretize(np.zeros((2, 2)), np.zeros((3, 1)), 1.0)
        with pytest.raises(ValidationError, match="Ts"):
            zoh_discretize(np.zeros((2, 2)), np.zeros((2, 1)), 0.0)

    def test_expression_generation_round_trip(self, rng):
        A_d = rng.normal(size=(2, 2))
        B_d = rng.normal(size=(2, 2))
        names = ["x1", "x2", "u1", "u2"]
        texts = linear_f_expressions(A_d, B_d)
        x = rng.normal(size=2)
        u = rng.normal(size=2)
        env = {"x1": x[0], "x2": x[1], "u1": u[0], "u2": u[1]}
        want = A_d @ x + B_d @ u
        for i, t in enumerate(texts):
            assert evaluate(parse(t, names), env) == pytest.approx(want[i], abs=1e-12)

    def test_discretize_block_with_f_conflicts(self):
        doc = toy_doc()
        doc["discretize"] = {"A": [[0, 0], [0, 0]], "B": [[1], [0]], "Ts": 1.0}
        with pytest.raises(ValidationError, match="f"):
            load_problem(doc)
