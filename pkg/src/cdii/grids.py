"""Uniform node-centered grids, domain masks, and simple geometric primitives.

A grid is an ``nx`` x ``ny`` lattice of nodes with spacing ``h``; node
``(i, j)`` sits at ``(x0 + i*h, y0 + j*h)``.  All field arrays in this
package use shape ``(ny, nx)`` indexed ``[j, i]`` so that C (row-major)
order enumerates nodes as row-major over ``(j, i)``.

A mask labels every node with one of five roles:

* ``EXTERIOR``  -- outside the computational domain (fields are zero there),
* ``INTERIOR``  -- ordinary unknown,
* ``BOUNDARY``  -- Dirichlet node carrying prescribed voltage,
* ``O0``        -- node inside a perfectly insulating inclusion,
* ``OINF``      -- node inside a perfectly conducting inclusion.

``O0``/``OINF`` nodes are unknowns of the solvers just like ``INTERIOR``
ones; the labels record inclusion geometry for the forward model and the
diagnostics.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

# Node label codes.  These values are also the on-disk byte codes of the
# mask payload in field files, so they must not be renumbered.
EXTERIOR = 0
INTERIOR = 1
BOUNDARY = 2
O0 = 3
OINF = 4

_LABEL_NAMES = {
    EXTERIOR: "EXTERIOR",
    INTERIOR: "INTERIOR",
    BOUNDARY: "BOUNDARY",
    O0: "O0",
    OINF: "OINF",
}

# 4-connectivity structuring element used for all component labelling.
FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class Grid:
    """Uniform node-centered grid.

    Parameters
    ----------
    nx, ny : int
        Node counts per direction (at least 3 each).
    h : float
        Node spacing, identical in x and y.
    origin : tuple of float
        Coordinates of node (0, 0).
    """

    nx: int
    ny: int
    h: float
    origin: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ValueError(f"grid needs at least 3 nodes per side, got {self.nx}x{self.ny}")
        if not (self.h > 0.0 and np.isfinite(self.h)):
            raise ValueError(f"grid spacing must be positive and finite, got {self.h}")

    @property
    def shape(self):
        """Array shape ``(ny, nx)`` of node-collocated fields."""
        return (self.ny, self.nx)

    @property
    def n_nodes(self):
        return self.nx * self.ny

    def xs(self):
        return self.origin[0] + self.h * np.arange(self.nx)

    def ys(self):
        return self.origin[1] + self.h * np.arange(self.ny)

    def mesh(self):
        """Node coordinate arrays ``X``, ``Y`` of shape ``(ny, nx)``."""
        return np.meshgrid(self.xs(), self.ys())

    def nearest_node(self, x, y):
        """Indices ``(i, j)`` of the node nearest to the point ``(x, y)``."""
        i = int(round((x - self.origin[0]) / self.h))
        j = int(round((y - self.origin[1]) / self.h))
        if not (0 <= i < self.nx and 0 <= j < self.ny):
            raise ValueError(f"point ({x}, {y}) is outside the grid")
        return i, j


def square_grid(n, extent=(0.0, 1.0)):
    """n x n grid covering ``[extent[0], extent[1]]^2`` exactly."""
    lo, hi = float(extent[0]), float(extent[1])
    h = (hi - lo) / (n - 1)
    return Grid(n, n, h, (lo, lo))


@dataclass(frozen=True)
class Disk:
    """Closed disk ``(x-cx)^2 + (y-cy)^2 <= r^2``."""

    cx: float
    cy: float
    r: float

    def contains(self, x, y):
        return (x - self.cx) ** 2 + (y - self.cy) ** 2 <= self.r**2


@dataclass(frozen=True)
class Box:
    """Closed axis-aligned box ``[x0, x1] x [y0, y1]``."""

    x0: float
    x1: float
    y0: float
    y1: float

    def contains(self, x, y):
        return (x >= self.x0) & (x <= self.x1) & (y >= self.y0) & (y <= self.y1)


class Mask:
    """Per-node labels plus derived index sets for one grid.

    The constructor validates the structural invariants: inclusion nodes are
    never boundary nodes, every non-exterior region is 4-connected to the
    Dirichlet boundary, and at least one boundary node exists.

    Attributes
    ----------
    labels : (ny, nx) uint8 array
    exterior, boundary, interior, o0, oinf, free : bool arrays
        ``free`` marks solver unknowns: interior plus inclusion nodes.
    valid_x, valid_y : bool arrays
        Edge validity, anchored at the lower-index node.  ``valid_x[j, i]``
        is True when both node (i, j) and node (i+1, j) are non-exterior;
        the last column (resp. row) is always False.
    oinf_component_ids : int32 array
        0-based 4-connected component index for OINF nodes, -1 elsewhere.
    """

    def __init__(self, grid, labels):
        labels = np.ascontiguousarray(labels, dtype=np.uint8)
        if labels.shape != grid.shape:
            raise ValueError(f"labels shape {labels.shape} != grid shape {grid.shape}")
        if labels.max(initial=0) > OINF:
            raise ValueError("unknown label code in mask")
        self.grid = grid
        self.labels = labels

        self.exterior = labels == EXTERIOR
        self.boundary = labels == BOUNDARY
        self.interior = labels == INTERIOR
        self.o0 = labels == O0
        self.oinf = labels == OINF
        self.free = self.interior | self.o0 | self.oinf
        self.inside = ~self.exterior  # all domain nodes incl. boundary

        ny, nx = grid.shape
        self.valid_x = np.zeros((ny, nx), dtype=bool)
        self.valid_y = np.zeros((ny, nx), dtype=bool)
        self.valid_x[:, :-1] = self.inside[:, :-1] & self.inside[:, 1:]
        self.valid_y[:-1, :] = self.inside[:-1, :] & self.inside[1:, :]

        comp, n_comp = ndimage.label(self.oinf, structure=FOUR_CONNECTED)
        self.oinf_component_ids = np.asarray(comp, dtype=np.int32) - 1
        self.n_oinf_components = int(n_comp)

        self._validate()

        self.labels.setflags(write=False)
        for arr in (self.exterior, self.boundary, self.interior, self.o0,
                    self.oinf, self.free, self.inside, self.valid_x,
                    self.valid_y, self.oinf_component_ids):
            arr.setflags(write=False)

    def _validate(self):
        if not self.boundary.any():
            raise ValueError("mask has no BOUNDARY node")
        # Inclusions must be compactly contained: no inclusion node may be a
        # boundary node, and none may touch an exterior node or the grid rim.
        incl = self.o0 | self.oinf
        if incl.any():
            rim = np.zeros(self.grid.shape, dtype=bool)
            rim[0, :] = rim[-1, :] = rim[:, 0] = rim[:, -1] = True
            if (incl & rim).any():
                raise ValueError("inclusion node on the grid rim")
            near_ext = ndimage.binary_dilation(self.exterior, structure=FOUR_CONNECTED)
            if (incl & near_ext).any():
                raise ValueError("inclusion node adjacent to the exterior")
        # Every free node must connect to a boundary node through the domain.
        comp, n_comp = ndimage.label(self.inside, structure=FOUR_CONNECTED)
        for c in range(1, n_comp + 1):
            sel = comp == c
            if not (sel & self.boundary).any():
                raise ValueError("domain component without boundary contact")

    @property
    def n_free(self):
        return int(self.free.sum())

    def area(self):
        """Discrete domain area: h^2 times the number of non-exterior nodes."""
        return self.grid.h**2 * int(self.inside.sum())

    def label_name(self, code):
        return _LABEL_NAMES[int(code)]


def square_mask(grid):
    """Full-grid domain: rim nodes are BOUNDARY, the rest INTERIOR."""
    labels = np.full(grid.shape, INTERIOR, dtype=np.uint8)
    labels[0, :] = labels[-1, :] = BOUNDARY
    labels[:, 0] = labels[:, -1] = BOUNDARY
    return Mask(grid, labels)


def disk_mask(grid, center=(0.0, 0.0), radius=1.0, ring_slack=0.5):
    """Disk domain embedded in the grid.

    Nodes with ``r <= radius + ring_slack*h`` belong to the domain; the
    outermost layer (nodes with an exterior 4-neighbour, or on the grid rim)
    becomes BOUNDARY.  The default slack of half a cell centers the
    boundary ring on the true circle, which removes the one-sided O(h)
    placement bias of the naive inscribed mask.
    """
    X, Y = grid.mesh()
    r = np.hypot(X - center[0], Y - center[1])
    inside = r <= radius + ring_slack * grid.h
    labels = np.where(inside, INTERIOR, EXTERIOR).astype(np.uint8)

    near_ext = ndimage.binary_dilation(~inside, structure=FOUR_CONNECTED)
    ring = inside & near_ext
    ring[0, :] |= inside[0, :]
    ring[-1, :] |= inside[-1, :]
    ring[:, 0] |= inside[:, 0]
    ring[:, -1] |= inside[:, -1]
    labels[ring] = BOUNDARY
    return Mask(grid, labels)


def with_inclusions(mask, o0=(), oinf=()):
    """Return a new mask with inclusion labels stamped onto free nodes.

    ``o0`` and ``oinf`` are iterables of shapes with a ``contains(X, Y)``
    predicate.  Shapes may only cover INTERIOR nodes (shapes of the same
    kind may union); covering a BOUNDARY or EXTERIOR node, or a node
    already claimed by the other kind of inclusion, raises ``ValueError``.
    """
    X, Y = mask.grid.mesh()
    labels = mask.labels.copy()
    for shape in o0:
        hit = shape.contains(X, Y)
        if (hit & (labels != INTERIOR) & (labels != O0)).any():
            raise ValueError(
                "O0 inclusion must lie strictly inside the domain, "
                "disjoint from OINF inclusions"
            )
        labels[hit] = O0
    for shape in oinf:
        hit = shape.contains(X, Y)
        if (hit & (labels != INTERIOR) & (labels != OINF)).any():
            raise ValueError(
                "OINF inclusion must lie strictly inside the domain, "
                "disjoint from O0 inclusions"
            )
        labels[hit] = OINF
    return Mask(mask.grid, labels)
