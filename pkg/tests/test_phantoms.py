import numpy as np
import pytest

from cdii import fields, forward, grids, phantoms
from cdii.fields import ScalarField, boundary_field
from cdii.phantoms import (
    PHANTOMS,
    compare_region,
    example1_minimizer,
    get_phantom,
    reconstruction_data,
    recover_sigma,
    saddle_values,
)


class TestClosedFormMinimizer:
    def test_branch_values(self):
        assert example1_minimizer(0.9, 0.0) == pytest.approx(0.62, abs=1e-12)
        assert example1_minimizer(0.0, 0.0) == 0.0
        assert example1_minimizer(0.0, 0.9) == pytest.approx(-0.62, abs=1e-12)

    def test_plateau_region(self):
        for x, y in ((0.1, 0.2), (-0.5, 0.5), (0.7, -0.7)):
            assert example1_minimizer(x, y) == 0.0

    def test_array_evaluation(self):
        x = np.array([0.9, 0.0, 0.0])
        y = np.array([0.0, 0.0, 0.9])
        out = example1_minimizer(x, y)
        assert out == pytest.approx([0.62, 0.0, -0.62], abs=1e-12)

    def test_outside_domain_rejected(self):
        with pytest.raises(ValueError):
            example1_minimizer(1.1, 0.0)
        with pytest.raises(ValueError):
            example1_minimizer(np.array([0.0, 0.8]), np.array([0.0, 0.8]))

    def test_boundary_of_disk_allowed(self):
        assert example1_minimizer(1.0, 0.0) == pytest.approx(1.0)
        assert example1_minimizer(0.0, 1.0) == pytest.approx(-1.0)

    def test_continuous_across_branch_interfaces(self):
        c = 1.0 / np.sqrt(2.0)
        for y in np.linspace(-c, c, 17):
            left = saddle_values(c - 1e-9, y)
            right = saddle_values(c + 1e-9, y)
            assert abs(left - right) <= 1e-7
            assert abs(saddle_values(c, y)) <= 1e-12
        for x in np.linspace(-c, c, 17):
            below = saddle_values(x, c - 1e-9)
            above = saddle_values(x, c + 1e-9)
            assert abs(below - above) <= 1e-7

    def test_matches_boundary_data(self):
        # on the unit circle the minimizer continues the boundary data x^2 - y^2
        for t in np.linspace(0.0, 2 * np.pi, 50):
            x, y = np.cos(t), np.sin(t)
            assert example1_minimizer(x, y) == pytest.approx(x * x - y * y, abs=1e-12)


class TestRegistry:
    def test_known_names(self):
        for name in ("saddle", "saddle_plateau", "bump", "disk_jump",
                      "insulator", "radial_bump"):
            assert name in PHANTOMS

    def test_alias_resolution(self):
        assert get_phantom("example1") is get_phantom("saddle")

    def test_unknown_name_rejected(self):
        with pytest.raises(KeyError):
            get_phantom("nonexistent")

    def test_all_phantoms_build(self):
        for name, phantom in PHANTOMS.items():
            g = phantom.build_grid(33)
            m = phantom.build_mask(g)
            f = phantom.boundary_data(g, m)
            assert np.isfinite(f.values[m.boundary]).all(), name
            if phantom.sigma is not None:
                sigma = phantom.sigma_field(g, m)
                assert (sigma.values[m.interior] > 0).all(), name
            if phantom.closed_form is not None:
                u = ScalarField.from_function(g, m, phantom.closed_form)
                assert np.isfinite(u.values).all(), name

    def test_domains(self):
        assert get_phantom("saddle").domain == "disk"
        assert get_phantom("bump").domain == "square"

    def test_inclusion_geometry(self):
        plateau = get_phantom("saddle_plateau")
        g = plateau.build_grid(65)
        m = plateau.build_mask(g)
        assert m.n_oinf_components == 1
        insulator = get_phantom("insulator")
        gi = insulator.build_grid(65)
        mi = insulator.build_mask(gi)
        assert mi.o0.any() and not mi.oinf.any()


class TestReconstructionData:
    def test_analytic_weight_used_when_available(self):
        grid, mask, a, f, fwd = reconstruction_data(get_phantom("saddle"), 33)
        assert fwd is None
        assert a.values[mask.interior] == pytest.approx(1.0)
        assert (f.values[~mask.boundary] == 0.0).all()

    def test_forward_solve_used_otherwise(self):
        grid, mask, a, f, fwd = reconstruction_data(get_phantom("bump"), 33)
        assert fwd is not None
        assert (a.values[mask.interior] > 0).all()
        assert (fwd.u.values[mask.boundary] == f.values[mask.boundary]).all()

    def test_compare_region_disk_excludes_rim_overshoot(self):
        phantom = get_phantom("saddle")
        grid, mask, _, _, _ = reconstruction_data(phantom, 33)
        region = compare_region(phantom, grid, mask)
        X, Y = grid.mesh()
        assert (np.hypot(X, Y)[region] <= 1.0 + 1e-9).all()
        assert region.sum() > 0.5 * mask.inside.sum()

    def test_compare_region_square_is_whole_domain(self):
        phantom = get_phantom("bump")
        grid, mask, _, _, _ = reconstruction_data(phantom, 33)
        region = compare_region(phantom, grid, mask)
        assert (region == mask.inside).all()


class TestRecoverSigma:
    def constant_problem(self, value=2.0, n=33):
        g = grids.square_grid(n, (-0.5, 0.5))
        m = grids.square_mask(g)
        sigma = ScalarField.from_function(g, m, lambda x, y: value * np.ones_like(x))
        f = boundary_field(g, m, lambda x, y: x)
        return forward.solve_conductivity(forward.DomainSpec(g, m, sigma, f))

    def test_constant_conductivity_recovered_exactly(self):
        sol = self.constant_problem(2.0)
        sigma_hat, determined = recover_sigma(sol.u, sol.a)
        assert determined.any()
        assert np.abs(sigma_hat.values[determined] - 2.0).max() <= 1e-8

    def test_windowed_estimator_exact_on_affine_voltage(self):
        sol = self.constant_problem(2.0)
        sigma_hat, determined = recover_sigma(sol.u, sol.a, window=3)
        assert determined.any()
        assert np.abs(sigma_hat.values[determined] - 2.0).max() <= 1e-8

    def test_smooth_profile_recovered_from_own_voltage(self, bump_forward):
        spec, sol = bump_forward
        sigma_hat, determined = recover_sigma(sol.u, sol.a)
        truth = spec.sigma.values
        num = np.sqrt(np.sum((sigma_hat.values[determined] - truth[determined]) ** 2))
        den = np.sqrt(np.sum(truth[determined] ** 2))
        assert num / den <= 0.05

    def test_undetermined_regions_flagged(self):
        phantom = get_phantom("insulator")
        g = phantom.build_grid(49)
        m = phantom.build_mask(g)
        spec = forward.DomainSpec(g, m, phantom.sigma_field(g, m),
                                  phantom.boundary_data(g, m))
        sol = forward.solve_with_inclusions(spec)
        _, determined = recover_sigma(sol.u, sol.a)
        assert not determined[m.o0].any()
        assert not determined[m.boundary].any()
        assert determined[m.interior].sum() > 0

    def test_near_critical_points_excluded(self):
        g = grids.square_grid(49, (-1.0, 1.0))
        m = grids.disk_mask(g)
        u = ScalarField.from_function(g, m, lambda x, y: x * x - y * y)
        a = ScalarField.from_function(g, m,
                                      lambda x, y: 2.0 * np.hypot(x, y))
        _, determined = recover_sigma(u, a)
        i, j = g.nearest_node(0.0, 0.0)
        assert not determined[j, i]
