"""Shared fixtures.

Expensive objects (forward solves, minimizer runs) are session-scoped so
several test modules can reuse one computation.
"""

import numpy as np
import pytest

from cdii import fields, forward, minimizer, phantoms


@pytest.fixture(scope="session")
def saddle_problem():
    """(grid, mask, a, f) for the unit-weight disk saddle at n = 65."""
    phantom = phantoms.get_phantom("saddle")
    grid, mask, a, f, _ = phantoms.reconstruction_data(phantom, 65)
    return grid, mask, a, f


@pytest.fixture(scope="session")
def saddle_solve(saddle_problem):
    """A converged minimizer run on the n = 65 saddle problem."""
    _, _, a, f = saddle_problem
    cfg = minimizer.SolverConfig(gap_tol=2e-4)
    return minimizer.minimize(a, f, cfg)


@pytest.fixture(scope="session")
def saddle_exact(saddle_problem):
    """The closed-form minimizer sampled on the n = 65 saddle grid."""
    grid, mask, _, _ = saddle_problem
    return fields.ScalarField.from_function(grid, mask, phantoms.saddle_values)


@pytest.fixture(scope="session")
def bump_forward():
    """Forward solution of the smooth-bump conductivity phantom at n = 65."""
    phantom = phantoms.get_phantom("bump")
    grid = phantom.build_grid(65)
    mask = phantom.build_mask(grid)
    f = phantom.boundary_data(grid, mask)
    sigma = phantom.sigma_field(grid, mask)
    spec = forward.DomainSpec(grid, mask, sigma, f)
    return spec, forward.solve_conductivity(spec)


def rel_l2(values, reference, select):
    num = float(np.sqrt(np.sum((values[select] - reference[select]) ** 2)))
    den = float(np.sqrt(np.sum(reference[select] ** 2)))
    return num / den
