import numpy as np
import pytest

from cdii import fields, grids, phantoms
from cdii.fields import (
    ScalarField,
    VectorField,
    boundary_field,
    boundary_range,
    clamp,
    div,
    grad,
    l1_distance,
    l2_rel_error,
    linf_error,
    node_average,
    scalar_dot,
    vector_dot,
    weighted_tv,
)

# Total variation of the three-branch saddle over the unit disk.  On each of
# the four lobes |grad u| = 4|x| (or 4|y|), so one lobe contributes
# int_{1/sqrt2}^{1} 4x * 2 sqrt(1-x^2) dx = 8 * (1/2)^{3/2} / 3 and the four
# lobes sum to 8*sqrt(2)/3; the central plateau contributes nothing.
SADDLE_TV = 8.0 * np.sqrt(2.0) / 3.0


def unit_square(n=33):
    g = grids.square_grid(n, (0.0, 1.0))
    return g, grids.square_mask(g)


def unit_disk(n=33):
    g = grids.square_grid(n, (-1.0, 1.0))
    return g, grids.disk_mask(g)


class TestFieldContainers:
    def test_scalar_from_function(self):
        g, m = unit_square(5)
        u = ScalarField.from_function(g, m, lambda x, y: x + 2 * y)
        assert u.values[0, 1] == pytest.approx(0.25)
        assert u.values[1, 0] == pytest.approx(0.5)

    def test_exterior_zeroed(self):
        g, m = unit_disk(17)
        u = ScalarField.from_function(g, m, lambda x, y: 1.0 + 0 * x)
        assert (u.values[m.exterior] == 0.0).all()

    def test_boundary_field_only_on_boundary(self):
        g, m = unit_square(7)
        f = boundary_field(g, m, lambda x, y: x)
        assert (f.values[~m.boundary] == 0.0).all()
        assert f.values[0, -1] == 1.0

    def test_vector_field_zeroes_invalid_edges(self):
        g, m = unit_disk(17)
        p = VectorField(g, m, np.ones(g.shape), np.ones(g.shape))
        assert (p.px[~m.valid_x] == 0.0).all()
        assert (p.py[~m.valid_y] == 0.0).all()

    def test_grid_mismatch_rejected(self):
        g, m = unit_square(5)
        with pytest.raises(ValueError):
            ScalarField(g, m, np.zeros((7, 7)))


class TestGrad:
    def test_constant_has_zero_gradient(self):
        g, m = unit_square(17)
        u = ScalarField.from_function(g, m, lambda x, y: 3.0 + 0 * x)
        p = grad(u)
        assert np.abs(p.px).max() == 0.0
        assert np.abs(p.py).max() == 0.0

    def test_linear_gradient_is_one(self):
        g, m = unit_square(17)
        u = ScalarField.from_function(g, m, lambda x, y: x)
        p = grad(u)
        assert p.px[m.valid_x] == pytest.approx(1.0)
        assert np.abs(p.py).max() == 0.0

    def test_saddle_gradient_near_right_lobe(self):
        g, m = unit_disk(65)
        u = ScalarField.from_function(g, m, phantoms.saddle_values)
        p = grad(u)
        i, j = g.nearest_node(0.9, 0.0)
        # d/dx of 2x^2 - 1 is 4x = 3.6; forward differencing adds O(h).
        assert p.px[j, i] == pytest.approx(3.6, abs=3 * g.h)


class TestDiv:
    def test_zero_vector_field(self):
        g, m = unit_square(17)
        p = VectorField.zeros(g, m)
        assert np.abs(div(p).values).max() == 0.0

    def test_divergence_of_gradient_of_quadratic(self):
        g, m = unit_square(33)
        u = ScalarField.from_function(g, m, lambda x, y: x * x)
        lap = div(grad(u)).values
        core = np.zeros(g.shape, dtype=bool)
        core[2:-2, 2:-2] = True
        assert lap[core] == pytest.approx(2.0)

    def test_adjointness_random_pairs(self):
        g, m = unit_disk(17)
        rng = np.random.default_rng(42)
        for _ in range(100):
            u = ScalarField(g, m, np.where(m.inside, rng.standard_normal(g.shape), 0.0))
            p = VectorField(g, m, rng.standard_normal(g.shape), rng.standard_normal(g.shape))
            lhs = vector_dot(grad(u), p)
            rhs = -scalar_dot(u, div(p))
            assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


class TestWeightedTV:
    def test_linear_on_unit_square(self):
        g, m = unit_square(129)
        u = ScalarField.from_function(g, m, lambda x, y: x)
        a = ScalarField.from_function(g, m, lambda x, y: np.ones_like(x))
        assert weighted_tv(u, a) == pytest.approx(1.0, rel=0.02)

    def test_saddle_matches_analytic_value(self):
        g, m = unit_disk(129)
        u = ScalarField.from_function(g, m, phantoms.saddle_values)
        a = ScalarField.from_function(g, m, lambda x, y: np.ones_like(x))
        assert weighted_tv(u, a) == pytest.approx(SADDLE_TV, rel=0.01)

    def test_nonnegative(self):
        g, m = unit_disk(33)
        rng = np.random.default_rng(3)
        u = ScalarField(g, m, np.where(m.inside, rng.standard_normal(g.shape), 0.0))
        a = ScalarField(g, m, np.where(m.inside, rng.random(g.shape), 0.0))
        assert weighted_tv(u, a) >= 0.0

    def test_positive_homogeneity(self):
        g, m = unit_disk(33)
        rng = np.random.default_rng(4)
        u = ScalarField(g, m, np.where(m.inside, rng.standard_normal(g.shape), 0.0))
        a = ScalarField(g, m, np.where(m.inside, rng.random(g.shape), 0.0))
        base = weighted_tv(u, a)
        for c in (-2.5, 0.0, 3.0):
            scaled = u.with_values(c * u.values)
            assert weighted_tv(scaled, a) == pytest.approx(abs(c) * base, rel=1e-12, abs=1e-14)

    def test_shift_invariance(self):
        g, m = unit_disk(33)
        rng = np.random.default_rng(5)
        u = ScalarField(g, m, np.where(m.inside, rng.standard_normal(g.shape), 0.0))
        a = ScalarField(g, m, np.where(m.inside, rng.random(g.shape), 0.0))
        shifted = u.with_values(np.where(m.inside, u.values + 7.25, 0.0))
        assert weighted_tv(shifted, a) == pytest.approx(weighted_tv(u, a), rel=1e-10)

    def test_negative_weight_rejected(self):
        g, m = unit_square(9)
        u = ScalarField.from_function(g, m, lambda x, y: x)
        a = ScalarField.from_function(g, m, lambda x, y: 0 * x - 1.0)
        with pytest.raises(ValueError):
            weighted_tv(u, a)


class TestClamp:
    def test_range_restriction(self):
        g, m = unit_disk(33)
        f = boundary_field(g, m, lambda x, y: x * x - y * y)  # range [-1, 1]
        vals = np.where(m.inside, 0.0, 0.0)
        i, j = g.nearest_node(0.2, 0.0)
        vals[j, i] = 1.5
        vals[j, i + 1] = -7.0
        vals[j, i + 2] = 0.3
        u = ScalarField(g, m, vals)
        c = clamp(u, f)
        assert c.values[j, i] == 1.0
        assert c.values[j, i + 1] == -1.0
        assert c.values[j, i + 2] == 0.3

    def test_idempotent(self):
        g, m = unit_disk(33)
        f = boundary_field(g, m, lambda x, y: x * x - y * y)
        rng = np.random.default_rng(6)
        u = ScalarField(g, m, np.where(m.inside, 3 * rng.standard_normal(g.shape), 0.0))
        once = clamp(u, f)
        twice = clamp(once, f)
        assert (once.values == twice.values).all()

    def test_never_increases_total_variation(self):
        g, m = unit_disk(33)
        f = boundary_field(g, m, lambda x, y: x * x - y * y)
        a = ScalarField.from_function(g, m, lambda x, y: np.ones_like(x))
        rng = np.random.default_rng(7)
        for _ in range(10):
            u = ScalarField(g, m, np.where(m.inside, 2 * rng.standard_normal(g.shape), 0.0))
            assert weighted_tv(clamp(u, f), a) <= weighted_tv(u, a) + 1e-12

    def test_output_within_boundary_range(self):
        g, m = unit_disk(33)
        f = boundary_field(g, m, lambda x, y: x * x - y * y)
        rng = np.random.default_rng(8)
        u = ScalarField(g, m, np.where(m.inside, 5 * rng.standard_normal(g.shape), 0.0))
        lo, hi = boundary_range(f)
        c = clamp(u, f)
        assert c.values[m.inside].min() >= lo
        assert c.values[m.inside].max() <= hi


class TestHelpers:
    def test_boundary_range(self):
        g, m = unit_disk(65)
        f = boundary_field(g, m, lambda x, y: x * x - y * y)
        lo, hi = boundary_range(f)
        assert lo == pytest.approx(-1.0, abs=0.05)
        assert hi == pytest.approx(1.0, abs=0.05)

    def test_node_average_of_constant_field(self):
        g, m = unit_square(17)
        p = VectorField(g, m, np.ones(g.shape), 2 * np.ones(g.shape))
        vx, vy = node_average(p)
        inner = np.zeros(g.shape, dtype=bool)
        inner[1:-1, 1:-1] = True
        assert vx[inner] == pytest.approx(1.0)
        assert vy[inner] == pytest.approx(2.0)

    def test_error_metrics(self):
        g, m = unit_square(17)
        u = ScalarField.from_function(g, m, lambda x, y: x)
        v = ScalarField.from_function(g, m, lambda x, y: x + 0.1)
        assert linf_error(u, v) == pytest.approx(0.1)
        assert l2_rel_error(u, u) == 0.0
        assert l1_distance(u, u) == 0.0
        assert l1_distance(u, v) == pytest.approx(0.1 * m.area(), rel=0.05)

    def test_metrics_respect_region(self):
        g, m = unit_square(17)
        u = ScalarField.from_function(g, m, lambda x, y: x)
        bad = u.values.copy()
        bad[3, 3] = 50.0
        v = ScalarField(g, m, bad)
        region = m.inside.copy()
        region[3, 3] = False
        assert linf_error(u, v, region) == 0.0
