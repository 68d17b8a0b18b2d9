import numpy as np
import pytest

from cdii import fields, minimizer, phantoms, pipeline
from cdii.phantoms import get_phantom
from cdii.pipeline import reconstruct_data, reconstruct_phantom, synth_data, synth_seeds


class TestSynth:
    def test_noise_free_data_is_clean(self):
        res = synth_data(get_phantom("saddle"), 33)
        assert (res.a.values == res.a_clean.values).all()
        assert (res.f.values == res.f_clean.values).all()

    def test_noise_perturbs_weight_only(self):
        res = synth_data(get_phantom("saddle"), 33, noise=0.01, seed=5)
        assert not (res.a.values == res.a_clean.values).all()
        assert (res.f.values == res.f_clean.values).all()

    def test_boundary_noise_perturbs_data_only(self):
        res = synth_data(get_phantom("saddle"), 33, noise_f=0.01, seed=5)
        assert (res.a.values == res.a_clean.values).all()
        assert not (res.f.values == res.f_clean.values).all()

    def test_deterministic_per_seed(self):
        r1 = synth_data(get_phantom("saddle"), 33, noise=0.01, noise_f=0.01, seed=5)
        r2 = synth_data(get_phantom("saddle"), 33, noise=0.01, noise_f=0.01, seed=5)
        r3 = synth_data(get_phantom("saddle"), 33, noise=0.01, noise_f=0.01, seed=6)
        assert (r1.a.values == r2.a.values).all()
        assert (r1.f.values == r2.f.values).all()
        assert not (r1.a.values == r3.a.values).all()

    def test_weight_and_boundary_streams_independent(self):
        # the two noise channels must not share a random stream
        sa, sf = synth_seeds(3)
        assert sa != sf
        assert synth_seeds(4)[0] not in (sa, sf)


class TestReconstruct:
    def test_phantom_reconstruction_converges(self):
        res = reconstruct_phantom(get_phantom("saddle"), 33)
        assert res.report.converged
        assert res.refine == 1
        assert res.solve_grid is res.grid

    def test_refined_reconstruction_reports_fine_grid(self):
        res = reconstruct_phantom(get_phantom("saddle"), 33, refine=2)
        assert res.refine == 2
        assert res.solve_grid.nx == 65
        assert res.u.values.shape == (33, 33)
        # injected solution keeps the coarse boundary data
        bnd = res.mask.boundary
        assert (res.u.values[bnd] == res.f.values[bnd]).all()

    def test_refinement_improves_accuracy(self):
        phantom = get_phantom("saddle")
        plain = reconstruct_phantom(phantom, 33)
        refined = reconstruct_phantom(phantom, 33, refine=2)
        exact = fields.ScalarField.from_function(plain.grid, plain.mask,
                                                 phantoms.saddle_values)
        region = phantoms.compare_region(phantom, plain.grid, plain.mask)
        err_plain = fields.l2_rel_error(plain.u, exact, region)
        err_refined = fields.l2_rel_error(refined.u, exact, region)
        assert err_refined < err_plain

    def test_invalid_refine_rejected(self):
        with pytest.raises(ValueError):
            reconstruct_phantom(get_phantom("saddle"), 33, refine=0)

    def test_refine_with_noise_rejected(self):
        with pytest.raises(ValueError):
            reconstruct_phantom(get_phantom("saddle"), 33, refine=2, noise=0.01)

    def test_reconstruct_from_raw_fields(self):
        phantom = get_phantom("saddle")
        grid, mask, a, f, _ = phantoms.reconstruction_data(phantom, 33)
        res = reconstruct_data(a, f, minimizer.SolverConfig(gap_tol=1e-3))
        assert res.report.converged
        assert res.u.values.shape == grid.shape

    def test_noisy_reconstruction_stays_close(self):
        phantom = get_phantom("saddle")
        clean = reconstruct_phantom(phantom, 33)
        noisy = reconstruct_phantom(phantom, 33, noise=0.01, seed=1)
        assert fields.linf_error(clean.u, noisy.u) <= 0.1
