"""Scalar and staggered vector fields plus the discrete calculus used everywhere.

Conventions
-----------
Scalar fields are node-collocated ``(ny, nx)`` arrays, zero on EXTERIOR
nodes.  Vector fields are edge-staggered: ``px[j, i]`` lives on the edge
from node ``(i, j)`` to ``(i+1, j)`` and ``py[j, i]`` on the edge to
``(i, j+1)``.  Both planes are stored full-size with structural zeros on
invalid edges (an edge is valid when both endpoints are non-exterior), so
the dangling last column of ``px`` and last row of ``py`` are always zero.

``grad`` takes forward differences on valid edges and zero elsewhere;
``div`` is its exact negative adjoint under the h^2-weighted inner
product: ``<grad u, p> = -<u, div p>`` holds to round-off for *all*
fields, because the dangling entries are structurally zero.

For pointwise, isotropic quantities (dual-ball projection, weighted total
variation, alignment angles) the two staggered components anchored at a
node are treated as one vector ``(px[j,i], py[j,i])`` at that node.  This
anchoring makes the weighted total variation equal, exactly, to the
support function of the node-wise ball ``|b(x)| <= a(x)`` paired against
``grad u`` -- which is what gives the solver a certified duality gap.
"""

from dataclasses import dataclass, field

import numpy as np

from .grids import Grid, Mask


def _freeze(arr):
    arr.setflags(write=False)
    return arr


@dataclass(eq=False)
class ScalarField:
    """Immutable node-collocated scalar field.

    Values on EXTERIOR nodes are forced to zero at construction; values on
    domain nodes must be finite.
    """

    grid: Grid
    mask: Mask
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True, order="C")
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} != grid shape {self.grid.shape}")
        if not np.isfinite(v[self.mask.inside]).all():
            raise ValueError("non-finite value on a domain node")
        v[self.mask.exterior] = 0.0
        self.values = _freeze(v)

    @classmethod
    def from_function(cls, grid, mask, fn):
        """Sample ``fn(X, Y)`` on all domain nodes (zero on exterior)."""
        X, Y = grid.mesh()
        vals = np.zeros(grid.shape)
        vals[mask.inside] = np.broadcast_to(fn(X, Y), grid.shape)[mask.inside]
        return cls(grid, mask, vals)

    @classmethod
    def zeros(cls, grid, mask):
        return cls(grid, mask, np.zeros(grid.shape))

    def with_values(self, values):
        return ScalarField(self.grid, self.mask, values)

    def copy(self):
        return ScalarField(self.grid, self.mask, self.values)


def boundary_field(grid, mask, fn):
    """Dirichlet data: ``fn`` sampled at BOUNDARY nodes, zero elsewhere."""
    X, Y = grid.mesh()
    vals = np.zeros(grid.shape)
    vals[mask.boundary] = np.broadcast_to(fn(X, Y), grid.shape)[mask.boundary]
    return ScalarField(grid, mask, vals)


@dataclass(eq=False)
class VectorField:
    """Immutable edge-staggered vector field with structural zeros on
    invalid edges (see module docstring)."""

    grid: Grid
    mask: Mask
    px: np.ndarray
    py: np.ndarray

    def __post_init__(self):
        px = np.array(self.px, dtype=np.float64, copy=True, order="C")
        py = np.array(self.py, dtype=np.float64, copy=True, order="C")
        if px.shape != self.grid.shape or py.shape != self.grid.shape:
            raise ValueError("component shape does not match grid shape")
        px[~self.mask.valid_x] = 0.0
        py[~self.mask.valid_y] = 0.0
        if not (np.isfinite(px).all() and np.isfinite(py).all()):
            raise ValueError("non-finite edge value")
        self.px = _freeze(px)
        self.py = _freeze(py)

    @classmethod
    def zeros(cls, grid, mask):
        z = np.zeros(grid.shape)
        return cls(grid, mask, z, z)

    def with_components(self, px, py):
        return VectorField(self.grid, self.mask, px, py)


# ---------------------------------------------------------------------------
# differential operators


def grad(u):
    """Forward-difference gradient of a scalar field.

    Edges with an exterior endpoint carry zero, so the output never mixes
    domain values with the (identically zero) exterior padding.
    """
    h = u.grid.h
    v = u.values
    px = np.zeros(u.grid.shape)
    py = np.zeros(u.grid.shape)
    px[:, :-1] = v[:, 1:] - v[:, :-1]
    py[:-1, :] = v[1:, :] - v[:-1, :]
    px[~u.mask.valid_x] = 0.0
    py[~u.mask.valid_y] = 0.0
    px /= h
    py /= h
    return VectorField(u.grid, u.mask, px, py)


def div(p):
    """Exact negative adjoint of :func:`grad`: ``<grad u, p> = -<u, div p>``.

    Backward differences of the stored edge values; the structural zeros on
    invalid edges make the identity hold for arbitrary node values,
    including nonzero Dirichlet data.
    """
    h = p.grid.h
    out = np.zeros(p.grid.shape)
    out[:, 0] = p.px[:, 0]
    out[:, 1:] = p.px[:, 1:] - p.px[:, :-1]
    out[0, :] += p.py[0, :]
    out[1:, :] += p.py[1:, :] - p.py[:-1, :]
    out /= h
    return ScalarField(p.grid, p.mask, out)


def vector_dot(p, q):
    """h^2-weighted inner product of two vector fields."""
    return p.grid.h**2 * (float(np.vdot(p.px, q.px)) + float(np.vdot(p.py, q.py)))


def scalar_dot(u, v):
    """h^2-weighted inner product of two scalar fields."""
    return u.grid.h**2 * float(np.vdot(u.values, v.values))


def node_magnitude(p):
    """Euclidean magnitude of the node-anchored component pair."""
    return np.hypot(p.px, p.py)


def gradient_threshold(gmag, where, scale=1e-2, floor=5e-2):
    """Magnitude below which a discrete gradient counts as degenerate.

    ``scale * median`` of the magnitudes over ``where`` is the base rule;
    it is floored at ``floor * max`` so that a plateau covering most of
    the domain (which drags the median down to its own noise level)
    cannot disable the threshold.  Returns 0.0 when ``where`` is empty.
    """
    if not np.any(where):
        return 0.0
    sel = gmag[where]
    return max(scale * float(np.median(sel)), floor * float(np.max(sel)))


def node_average(p):
    """Average the staggered components to nodes, one-sided at mask edges.

    Returns node-collocated arrays ``(vx, vy)``.  At a node with two valid
    incident x-edges the left and right edge values are averaged; with one,
    that value is used; with none, zero.
    """
    vx = _average_axis(p.px, p.mask.valid_x, axis=1)
    vy = _average_axis(p.py, p.mask.valid_y, axis=0)
    return vx, vy


def _average_axis(comp, valid, axis):
    s = np.where(valid, comp, 0.0)
    c = valid.astype(np.float64)
    total = s.copy()
    count = c.copy()
    if axis == 1:
        total[:, 1:] += s[:, :-1]
        count[:, 1:] += c[:, :-1]
    else:
        total[1:, :] += s[:-1, :]
        count[1:, :] += c[:-1, :]
    return total / np.maximum(count, 1.0)


# ---------------------------------------------------------------------------
# weighted total variation and clamping


def weighted_tv(u, a):
    """Weighted total variation ``h^2 * sum_x a(x) |grad u (x)|``.

    The gradient magnitude at a node is the Euclidean norm of the two
    forward differences anchored there, so this functional is exactly the
    maximum of ``<grad u, b>`` over vector fields with ``|b(x)| <= a(x)``
    node-wise.  Raises ``ValueError`` for negative weights.
    """
    if a.grid is not u.grid and a.grid != u.grid:
        raise ValueError("weight and field live on different grids")
    if (a.values[a.mask.inside] < 0.0).any():
        raise ValueError("weight field must be non-negative")
    g = grad(u)
    mag = np.hypot(g.px, g.py)
    return u.grid.h**2 * float(np.sum(a.values * mag))


def boundary_range(f):
    """(min, max) of the Dirichlet data over BOUNDARY nodes."""
    vals = f.values[f.mask.boundary]
    if vals.size == 0:
        raise ValueError("field has no boundary nodes")
    return float(vals.min()), float(vals.max())


def clamp(u, f):
    """Clamp ``u`` into the closed range of the boundary data of ``f``.

    Composing with the cut-off is idempotent and never increases the
    weighted total variation (each forward difference can only shrink).
    """
    m, M = boundary_range(f)
    return ScalarField(u.grid, u.mask, np.clip(u.values, m, M))


# ---------------------------------------------------------------------------
# error metrics

def linf_error(u, ref, where=None):
    sel = _metric_domain(u, where)
    return float(np.max(np.abs(u.values[sel] - ref.values[sel]), initial=0.0))


def l2_rel_error(u, ref, where=None):
    sel = _metric_domain(u, where)
    diff = u.values[sel] - ref.values[sel]
    denom = float(np.linalg.norm(ref.values[sel]))
    if denom == 0.0:
        return float(np.linalg.norm(diff))
    return float(np.linalg.norm(diff)) / denom


def l1_distance(u, v, where=None):
    """h^2-weighted L1 distance, optionally restricted to a node subset."""
    sel = _metric_domain(u, where)
    return u.grid.h**2 * float(np.sum(np.abs(u.values[sel] - v.values[sel])))


def _metric_domain(u, where):
    if where is None:
        return u.mask.inside
    return np.asarray(where, dtype=bool) & u.mask.inside
