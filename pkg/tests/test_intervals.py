import numpy as np
import pytest
from numpy.testing import assert_allclose

from dtcbf import Box, DimensionMismatchError, DomainError, Interval


class TestIntervalArithmetic:
    def test_ordering_enforced(self):
        with pytest.raises(DomainError):
            Interval(2.0, 1.0)

    def test_add_sub_mul(self):
        a, b = Interval(-1, 2), Interval(0.5, 3)
        assert (a + b).lo == -0.5 and (a + b).hi == 5
        assert (a - b).lo == -4 and (a - b).hi == 1.5
        assert (a * b).lo == -3 and (a * b).hi == 6

    def test_division_through_zero(self):
        with pytest.raises(DomainError):
            Interval(1, 2) / Interval(-1, 1)

    def test_division(self):
        q = Interval(1, 2) / Interval(2, 4)
        assert q.lo == pytest.approx(0.25)
        assert q.hi == pytest.approx(1.0)

    def test_even_power_splits_at_zero(self):
        p = Interval(-1, 2).pow_int(2)
        assert p.lo == 0.0 and p.hi == 4.0

    def test_odd_power_monotone(self):
        p = Interval(-2, 1).pow_int(3)
        assert p.lo == -8.0 and p.hi == 1.0

    def test_transcendental_images(self):
        assert Interval(0.5, 3).sqrt().lo == pytest.approx(np.sqrt(0.5))
        assert Interval(0.5, 3).log().hi == pytest.approx(np.log(3))
        # sin over [-1, 2] straddles the pi/2 maximum
        s = Interval(-1, 2).sin()
        assert s.hi == pytest.approx(1.0)
        assert s.lo == pytest.approx(np.sin(-1))
        c = Interval(0, np.pi).cos()
        assert c.lo == pytest.approx(-1.0)
        assert c.hi == pytest.approx(1.0)

    def test_sqrt_log_domain(self):
        with pytest.raises(DomainError):
            Interval(-1, 1).sqrt()
        with pytest.raises(DomainError):
            Interval(0.0, 1).log()

    def test_conservative_on_samples(self, rng):
        # image of each op on random samples stays inside the interval result
        for _ in range(200):
            lo1, lo2 = rng.uniform(-2, 2, size=2)
            a = Interval(lo1, lo1 + rng.uniform(0, 2))
            b = Interval(lo2, lo2 + rng.uniform(0, 2))
            xs = rng.uniform(a.lo, a.hi, size=17)
            ys = rng.uniform(b.lo, b.hi, size=17)
            for op, fn in (
                (a + b, xs + ys),
                (a - b, xs - ys),
                (a * b, xs * ys),
                (a.pow_int(3), xs**3),
                (a.sin(), np.sin(xs)),
                (a.cos(), np.cos(xs)),
                (a.exp(), np.exp(xs)),
            ):
                assert op.lo <= fn.min() + 1e-12
                assert op.hi >= fn.max() - 1e-12

    def test_point_and_predicates(self):
        p = Interval.point(3.0)
        assert p.lo == p.hi == 3.0
        a = Interval(-1, 2)
        assert a.contains(0.0) and not a.contains(2.5)
        assert a.encloses(Interval(0, 1))
        assert a.width == 3 and a.mid == 0.5


class TestBox:
    def test_bounds_validation(self):
        with pytest.raises(DomainError):
            Box([1.0], [0.0])
        with pytest.raises(DimensionMismatchError):
            Box([0, 0], [1])

    def test_geometry(self):
        b = Box([0, 0], [1, 2])
        assert_allclose(b.midpoint, [0.5, 1.0])
        assert_allclose(b.widths, [1.0, 2.0])
        assert b.volume == pytest.approx(2.0)
        assert b.dim == 2

    def test_split_partitions(self):
        b = Box([0, 0], [1, 2])
        left, right = b.split(1)
        assert_allclose(left.upper, [1.0, 1.0])
        assert_allclose(right.lower, [0.0, 1.0])
        assert left.volume + right.volume == pytest.approx(b.volume)

    def test_clip_and_contains(self):
        b = Box([0, 0], [1, 2])
        assert_allclose(b.clip([5.0, -5.0]), [1.0, 0.0])
        assert b.contains([0.5, 1.0])
        assert not b.contains([1.1, 1.0])
        assert b.contains([1.0 + 1e-12, 1.0], slack=1e-9)

    def test_encloses(self):
        b = Box([0, 0], [1, 2])
        assert b.encloses(Box([0.2, 0.1], [0.9, 1.5]))
        assert not b.encloses(Box([-0.1, 0], [1, 2]))

    def test_sample_grid_shape_and_corners(self):
        b = Box([0, -1], [1, 1])
        g = b.sample_grid(3)
        assert g.shape == (2, 9)
        cols = {tuple(c) for c in g.T}
        assert (0.0, -1.0) in cols and (1.0, 1.0) in cols and (0.5, 0.0) in cols

    def test_degenerate_axis_allowed(self):
        b = Box([0.5, 0], [0.5, 1])
        assert b.volume == 0.0
        assert b.contains([0.5, 0.5])
