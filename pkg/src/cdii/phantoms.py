"""Reference problems: named phantoms and closed-form solutions.

The flagship object is the saddle problem on the unit disk: with unit
weight and boundary data ``x^2 - y^2`` the least-gradient voltage is
known in closed form -- ``2x^2 - 1`` on the left/right lobes,
``1 - 2y^2`` on the top/bottom lobes, and identically zero on the
central square of half-width ``1/sqrt(2)``.  Every other phantom is
defined by an analytic conductivity, so its ground truth comes from the
forward solver.

Phantoms are addressable by name (see :data:`PHANTOMS`); each knows its
domain shape, boundary data, and optionally an analytic conductivity, an
analytic reconstruction weight, a closed-form solution, and inclusion
primitives.  :func:`reconstruction_data` turns a phantom into the
``(a, f)`` pair the minimizer consumes, running the forward problem when
the weight is not analytic.

:func:`recover_sigma` inverts the data relation ``|J| = sigma |grad u|``
for the conductivity; it collocates the gradient by edge-averaging, the
same convention the forward solver uses to produce ``a``, so recovery is
exact for constant conductivity rather than merely O(h)-consistent.
"""

import numpy as np

from dataclasses import dataclass

from . import forward
from .fields import (ScalarField, boundary_field, grad, gradient_threshold,
                     node_average)
from .grids import Box, Disk, disk_mask, square_grid, square_mask, with_inclusions

SQRT_HALF = float(1.0 / np.sqrt(2.0))

_TINY = np.finfo(float).tiny


def saddle_values(x, y):
    """Three-branch saddle formula, evaluated without a domain check."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    side = np.abs(x) >= SQRT_HALF
    topbot = ~side & (np.abs(y) >= SQRT_HALF)
    out = np.zeros(np.broadcast(x, y).shape)
    out[side] = 2.0 * np.broadcast_to(x, out.shape)[side] ** 2 - 1.0
    out[topbot] = 1.0 - 2.0 * np.broadcast_to(y, out.shape)[topbot] ** 2
    return out


def example1_minimizer(x, y):
    """Closed-form least-gradient voltage on the closed unit disk.

    Accepts scalars or arrays; raises ``ValueError`` for points outside
    the closed disk (beyond a 1e-12 tolerance).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if np.any(x**2 + y**2 > 1.0 + 1e-12):
        raise ValueError("point outside the closed unit disk")
    out = saddle_values(x, y)
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class Phantom:
    """A named reference problem.

    ``weight`` is an analytic reconstruction weight for problems posed
    directly as (a, f) pairs; when it is None the weight is synthesized
    as |J| from a forward solve of ``sigma``.  ``closed_form`` is the
    analytic voltage where one exists.
    """

    name: str
    domain: str                  # "disk" | "square"
    extent: tuple
    description: str
    boundary: callable
    sigma: callable = None
    closed_form: callable = None
    weight: callable = None
    o0: tuple = ()
    oinf: tuple = ()

    def build_grid(self, n):
        return square_grid(n, self.extent)

    def build_mask(self, grid):
        if self.domain == "disk":
            radius = 0.5 * (self.extent[1] - self.extent[0])
            base = disk_mask(grid, radius=radius)
        elif self.domain == "square":
            base = square_mask(grid)
        else:
            raise ValueError(f"unknown domain {self.domain!r}")
        if self.o0 or self.oinf:
            return with_inclusions(base, o0=self.o0, oinf=self.oinf)
        return base

    def boundary_data(self, grid, mask):
        return boundary_field(grid, mask, self.boundary)

    def sigma_field(self, grid, mask):
        if self.sigma is None:
            return None
        return ScalarField.from_function(grid, mask, self.sigma)

    def weight_data(self, grid, mask):
        if self.weight is None:
            return None
        return ScalarField.from_function(grid, mask, self.weight)

    def closed_form_field(self, grid, mask):
        if self.closed_form is None:
            return None
        return ScalarField.from_function(grid, mask, self.closed_form)


def _bump_sigma(x, y):
    return 1.0 + np.exp(-8.0 * (x**2 + y**2))


def _jump_sigma(x, y):
    return np.where(x**2 + y**2 < 0.16, 3.0, 1.0)


PHANTOMS = {
    p.name: p
    for p in (
        Phantom(
            name="saddle",
            domain="disk",
            extent=(-1.0, 1.0),
            description="unit weight, f = x^2 - y^2; closed-form minimizer",
            boundary=lambda x, y: x**2 - y**2,
            sigma=lambda x, y: np.ones_like(np.asarray(x, dtype=float)),
            closed_form=saddle_values,
            weight=lambda x, y: np.ones_like(np.asarray(x, dtype=float)),
        ),
        Phantom(
            name="saddle_plateau",
            domain="disk",
            extent=(-1.0, 1.0),
            description="saddle with the central square marked perfectly conducting",
            boundary=lambda x, y: x**2 - y**2,
            sigma=lambda x, y: np.ones_like(np.asarray(x, dtype=float)),
            closed_form=saddle_values,
            weight=lambda x, y: np.ones_like(np.asarray(x, dtype=float)),
            oinf=(Box(-SQRT_HALF, SQRT_HALF, -SQRT_HALF, SQRT_HALF),),
        ),
        Phantom(
            name="bump",
            domain="square",
            extent=(-0.5, 0.5),
            description="smooth conductivity bump 1 + exp(-8 r^2), f = x",
            boundary=lambda x, y: np.asarray(x, dtype=float) + 0.0 * np.asarray(y),
            sigma=_bump_sigma,
        ),
        Phantom(
            name="disk_jump",
            domain="disk",
            extent=(-1.0, 1.0),
            description="piecewise-constant conductivity step (negative control)",
            boundary=lambda x, y: np.asarray(x, dtype=float) + 0.0 * np.asarray(y),
            sigma=_jump_sigma,
        ),
        Phantom(
            name="insulator",
            domain="square",
            extent=(-0.5, 0.5),
            description="unit conductivity with an insulating disk, f = x",
            boundary=lambda x, y: np.asarray(x, dtype=float) + 0.0 * np.asarray(y),
            sigma=lambda x, y: np.ones_like(np.asarray(x, dtype=float)),
            o0=(Disk(0.0, 0.0, 0.2),),
        ),
        Phantom(
            name="radial_bump",
            domain="disk",
            extent=(-1.0, 1.0),
            description="radial exp(-4 r^2); its level sets avoid the boundary",
            boundary=lambda x, y: np.exp(-4.0 * (x**2 + y**2)),
            closed_form=lambda x, y: np.exp(-4.0 * (x**2 + y**2)),
            weight=lambda x, y: 8.0
            * np.hypot(x, y)
            * np.exp(-4.0 * (x**2 + y**2)),
        ),
    )
}


# Alternate public names accepted anywhere a phantom name is read.
ALIASES = {"example1": "saddle"}


def get_phantom(name):
    key = ALIASES.get(name, name)
    try:
        return PHANTOMS[key]
    except KeyError:
        known = ", ".join(sorted(PHANTOMS))
        raise KeyError(f"unknown phantom {name!r}; known: {known}") from None


def reconstruction_data(phantom, n, tol=1e-12, spread_tol=1e-3):
    """Build the (a, f) reconstruction inputs for a phantom at size n.

    Returns ``(grid, mask, a, f, fwd)`` where ``fwd`` is the forward
    solution when the weight was synthesized from a conductivity, else
    None (analytic-weight phantoms).
    """
    if isinstance(phantom, str):
        phantom = get_phantom(phantom)
    grid = phantom.build_grid(n)
    mask = phantom.build_mask(grid)
    f = phantom.boundary_data(grid, mask)
    a = phantom.weight_data(grid, mask)
    if a is not None:
        return grid, mask, a, f, None
    sigma = phantom.sigma_field(grid, mask)
    if sigma is None:
        raise ValueError(
            f"phantom {phantom.name!r} has neither an analytic weight nor a conductivity"
        )
    spec = forward.DomainSpec(grid, mask, sigma, f)
    fwd = forward.solve_with_inclusions(spec, tol=tol, spread_tol=spread_tol)
    return grid, mask, fwd.a, f, fwd


def compare_region(phantom, grid, mask):
    """Nodes where a phantom's closed form / ground truth is compared.

    The disk formulas are statements about the closed disk, so nodes the
    ring carries just outside it are not compared; on squares every
    non-exterior node counts.
    """
    if isinstance(phantom, str):
        phantom = get_phantom(phantom)
    if phantom.domain == "disk":
        radius = 0.5 * (phantom.extent[1] - phantom.extent[0])
        center = 0.5 * (phantom.extent[0] + phantom.extent[1])
        X, Y = grid.mesh()
        rsq = (X - center) ** 2 + (Y - center) ** 2
        return mask.inside & (rsq <= radius**2 + 1e-12)
    return mask.inside


def _plane_fit_gradient(u, window):
    """Least-squares plane-fit gradient over (2w+1)^2 node windows.

    Returns node arrays ``(gx, gy, full)`` where ``full`` marks nodes
    whose entire window consists of domain nodes outside inclusions (u
    is meaningless inside O0 and constant inside OINF, so such windows
    are rejected).  The fit is a separable first-moment filter; it is
    exact for affine voltages at any window size.
    """
    from scipy import ndimage

    w = int(window)
    offsets = np.arange(-w, w + 1, dtype=np.float64)
    box = np.ones(2 * w + 1)
    # LS slope of a plane on a full square window: first moment along the
    # axis, plain sum across it, divided by (2w+1) * sum(offsets^2) * h.
    denom = (2 * w + 1) * float(np.sum(offsets**2)) * u.grid.h
    vals = u.values
    gx = ndimage.correlate1d(vals, offsets / denom, axis=1, mode="constant")
    gx = ndimage.correlate1d(gx, box, axis=0, mode="constant")
    gy = ndimage.correlate1d(vals, offsets / denom, axis=0, mode="constant")
    gy = ndimage.correlate1d(gy, box, axis=1, mode="constant")
    usable = u.mask.inside & ~u.mask.o0 & ~u.mask.oinf
    full = ndimage.minimum_filter(usable, size=2 * w + 1, mode="constant")
    return gx, gy, full


def recover_sigma(u, a, eps_g=None, delta=None, window=0):
    """Conductivity from voltage and current magnitude: ``a / |grad u|``.

    With ``window=0`` the gradient is averaged to nodes with the same
    one-sided rule the forward solver uses for ``a = |J|``, so recovery
    composed with data synthesis is the identity and constant
    conductivity is recovered exactly.  With ``window=w > 0`` the
    gradient comes from a least-squares plane fit over each node's
    (2w+1)^2 window: noisy data drive the minimizer toward locally flat
    voltages separated by sharp transitions, which makes the narrow
    quotient blow up, while the plane fit reads the secular slope
    through that staircase.  The fit is exact on affine voltages, so the
    constant-conductivity case stays exact at any window size.

    Nodes are *determined* when they sit away from the boundary ring and
    inclusions (for ``window > 0``, when the whole window does), carry
    weight above ``delta``, and have gradient magnitude above ``eps_g``;
    elsewhere the returned field is zero and the companion boolean array
    is False.

    Returns ``(sigma_hat, determined)``.
    """
    mask = u.mask
    if window > 0:
        gx, gy, full = _plane_fit_gradient(u, window)
    else:
        gx, gy = node_average(grad(u))
        full = np.ones(u.grid.shape, dtype=bool)
    gmag = np.hypot(gx, gy)
    if delta is None:
        delta = 1e-3 * float(np.max(a.values, initial=0.0))
    region = mask.inside & ~mask.boundary & ~mask.o0 & ~mask.oinf & full
    if eps_g is None:
        eps_g = gradient_threshold(gmag, region & (a.values > delta))
    determined = region & (gmag > eps_g) & (a.values > delta)
    vals = np.zeros(u.grid.shape)
    np.divide(a.values, np.maximum(gmag, _TINY), out=vals, where=determined)
    return ScalarField(u.grid, u.mask, vals), determined
