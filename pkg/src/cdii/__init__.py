"""cdii: conductivity imaging from one current-density magnitude in 2-D.

The measured interior datum is the magnitude a = |J| of the current
generated by Dirichlet boundary data f.  The voltage is recovered as the
minimizer of the weighted total variation ``integral of a |grad u|``
among fields with trace f (a weighted least-gradient problem), solved by
a primal-dual scheme with a certified duality gap; the conductivity then
follows from the pointwise quotient ``a / |grad u|``.

Modules:

- :mod:`cdii.grids`      -- grids, domain masks, inclusion labels
- :mod:`cdii.fields`     -- scalar/vector fields, discrete operators
- :mod:`cdii.forward`    -- variable-coefficient forward (PDE) solver
- :mod:`cdii.minimizer`  -- weighted-TV primal-dual minimizer
- :mod:`cdii.certificate`-- post-hoc optimality certificates
- :mod:`cdii.levelsets`  -- level-set structure audits
- :mod:`cdii.phantoms`   -- named reference problems and recovery
- :mod:`cdii.pipeline`   -- end-to-end experiment drivers
- :mod:`cdii.fileio`     -- field files, configs, images, manifests
- :mod:`cdii.cli`        -- the ``cdii`` command line
"""

__version__ = "0.1.0"

from .grids import (BOUNDARY, EXTERIOR, INTERIOR, O0, OINF, Box, Disk, Grid,
                    Mask, disk_mask, square_grid, square_mask, with_inclusions)
from .fields import (ScalarField, VectorField, boundary_field, boundary_range,
                     clamp, div, grad, l1_distance, l2_rel_error, linf_error,
                     node_average, node_magnitude, scalar_dot, vector_dot,
                     weighted_tv)
from .forward import (DomainSpec, ForwardSolution, InclusionSpreadError,
                      NonConvergenceError, add_boundary_noise, add_noise,
                      boundary_flux, harmonic_extension, interface_flux,
                      solve_conductivity, solve_with_inclusions)
from .minimizer import NotConvergedError, SolveReport, SolverConfig, minimize
from .certificate import Certificate, TolSpec, certify, gauss_green_check
from .levelsets import (admissibility_diagnostics, audit_levels,
                        boundary_intersection_audit, generic_levels,
                        level_boundary_value_check, lipschitz_estimate,
                        super_level_components, z_intervals)
from .phantoms import (PHANTOMS, Phantom, example1_minimizer, get_phantom,
                       reconstruction_data, recover_sigma)
from .pipeline import (ReconstructionResult, SynthResult, reconstruct_data,
                       reconstruct_phantom, synth_data)

__all__ = [name for name in dir() if not name.startswith("_")]
