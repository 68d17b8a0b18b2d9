"""Level-set structure of reconstructed voltages.

For a genuine weighted least-gradient minimizer every super-level set
component has to reach the domain boundary, and the voltage is constant
along each piece of every level line -- away from the set of levels the
solution occupies on flat (zero-gradient) regions.  This module turns
those facts into grid-level audits:

* :func:`super_level_components` -- flood-filled components of
  ``{u >= level}`` outside insulating inclusions, each annotated with
  whether it touches the boundary ring,
* :func:`boundary_intersection_audit` -- flags components that float in
  the interior (a converged reconstruction of admissible data must
  produce none; a radial bump must produce some),
* :func:`level_boundary_value_check` -- the spread of a reference field
  over each discrete level-line piece of a test field,
* :func:`admissibility_diagnostics` -- where the data weight vanishes,
  where the gradient degenerates, the values the solution takes on the
  degenerate region, and how continuous the weight is elsewhere.

Components use 4-connectivity; thin level-line node sets use
8-connectivity so that diagonal staircase steps stay in one piece.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .fields import grad, gradient_threshold, node_magnitude
from .grids import EIGHT_CONNECTED, FOUR_CONNECTED


@dataclass(frozen=True)
class ContactStats:
    """Values of a field where a component meets the boundary ring."""

    count: int
    minimum: float
    maximum: float
    mean: float


@dataclass(frozen=True)
class LevelSetComponent:
    level: float
    nodes: np.ndarray          # sorted flat node indices
    touches_boundary: bool
    contact: ContactStats | None
    edge_spread: float         # max-min of u over the component's inner rim

    @property
    def size(self):
        return int(self.nodes.size)


@dataclass(frozen=True)
class AuditRow:
    level: float
    component: int
    size: int
    touches_boundary: bool


@dataclass(frozen=True)
class AuditResult:
    rows: tuple
    failures: tuple

    @property
    def failure_count(self):
        return len(self.failures)


@dataclass(frozen=True)
class ValueCheckRow:
    level: float
    component: int
    size: int
    spread: float


@dataclass(frozen=True)
class ValueCheckResult:
    rows: tuple
    max_spread: float


@dataclass(frozen=True)
class AdmissibilityReport:
    zero_set_count: int
    zero_set_components: int
    degenerate_count: int
    degenerate_components: int
    plateau_values: tuple
    plateau_measure: float
    weight_jump_max: float
    delta0: float
    eps_g: float


def _dilate4(sel):
    out = sel.copy()
    out[1:, :] |= sel[:-1, :]
    out[:-1, :] |= sel[1:, :]
    out[:, 1:] |= sel[:, :-1]
    out[:, :-1] |= sel[:, 1:]
    return out


def _inner_rim(sel, domain):
    """Nodes of ``sel`` with a 4-neighbor that is in the domain but not in
    ``sel`` (the discrete inner boundary of the set)."""
    outside = domain & ~sel
    return sel & _dilate4(outside)


def super_level_components(u, level):
    """4-connected components of ``{u >= level}`` off insulating nodes.

    Boundary-ring nodes participate, so a component that reaches the rim
    contains its contact nodes; a component only diagonally adjacent to
    the rim still counts as touching (closure contact).  Components come
    back ordered largest first, ties broken by smallest node index.
    """
    mask = u.mask
    domain = ~mask.exterior & ~mask.o0
    sel = domain & (u.values >= level)
    labels, n = ndimage.label(sel, structure=FOUR_CONNECTED)
    near_boundary = _dilate4(mask.boundary)
    rim = _inner_rim(sel, domain)
    out = []
    for k in range(1, n + 1):
        comp = labels == k
        nodes = np.flatnonzero(comp.ravel())
        touches = bool(np.any(comp & near_boundary))
        contact_sel = comp & mask.boundary
        if not contact_sel.any():
            contact_sel = comp & near_boundary
        contact = None
        if contact_sel.any():
            vals = u.values[contact_sel]
            contact = ContactStats(int(vals.size), float(vals.min()),
                                   float(vals.max()), float(vals.mean()))
        rim_sel = comp & rim
        spread = float(u.values[rim_sel].max() - u.values[rim_sel].min()) if rim_sel.any() else 0.0
        out.append(LevelSetComponent(float(level), nodes, touches, contact, spread))
    out.sort(key=lambda c: (-c.size, int(c.nodes[0]) if c.size else 0))
    return out


def boundary_intersection_audit(u, levels):
    """One row per (level, component); failures are interior-only components.

    Callers are expected to pass generic levels -- inside the boundary
    data range and away from the plateau image (see
    :func:`generic_levels`); the audit itself just reports.
    """
    rows = []
    failures = []
    for level in levels:
        comps = super_level_components(u, float(level))
        for idx, comp in enumerate(comps):
            row = AuditRow(float(level), idx, comp.size, comp.touches_boundary)
            rows.append(row)
            if not comp.touches_boundary:
                failures.append(row)
    return AuditResult(tuple(rows), tuple(failures))


def lipschitz_estimate(u):
    """Largest anchored gradient magnitude; a discrete Lipschitz bound."""
    return float(np.max(node_magnitude(grad(u)), initial=0.0))


def z_intervals(plateau_values, half_width):
    """Excluded level intervals around the values taken on flat regions."""
    return tuple((float(c) - half_width, float(c) + half_width) for c in plateau_values)


def _in_any_interval(x, intervals):
    hit = np.zeros(np.shape(x), dtype=bool)
    for lo, hi in intervals:
        hit |= (x >= lo) & (x <= hi)
    return hit


def generic_levels(lo, hi, count, exclude=(), pad_fraction=0.02):
    """Deterministic sample of ``count`` levels in ``(lo, hi)``.

    Candidates are equispaced over the padded open range; any candidate
    inside an ``exclude`` interval is dropped, and the survivors are
    thinned evenly to ``count``.  Raises ``ValueError`` if the exclusions
    leave too few candidates.
    """
    if not hi > lo:
        raise ValueError("level range is empty")
    pad = pad_fraction * (hi - lo)
    grid = np.linspace(lo + pad, hi - pad, max(8 * count, count))
    keep = grid[~_in_any_interval(grid, exclude)]
    if keep.size < count:
        raise ValueError(
            f"only {keep.size} generic levels available, {count} requested"
        )
    idx = np.round(np.linspace(0, keep.size - 1, count)).astype(int)
    return keep[idx]


def audit_levels(u, count=20, exclude=(), pad_fraction=0.02):
    """Generic levels drawn from the observed range of ``u``.

    The range of the voltage itself (over domain nodes outside O0), not
    of the boundary data, is the right sampling window: a voltage that
    overshoots its boundary data -- the very thing the boundary audit
    exists to catch -- takes its interior-only level sets at values the
    boundary data never reaches.  For a clamped minimizer the two ranges
    coincide.
    """
    sel = u.mask.inside & ~u.mask.o0
    vals = u.values[sel]
    if vals.size == 0:
        raise ValueError("field has no domain nodes")
    lo, hi = float(vals.min()), float(vals.max())
    return generic_levels(lo, hi, count, exclude=exclude, pad_fraction=pad_fraction)


def level_boundary_value_check(u_ref, u_test, levels, exclude=()):
    """Spread of ``u_ref`` along each level-line piece of ``u_test``.

    The level line of ``{u_test >= level}`` is its inner rim; nodes whose
    test value falls in an ``exclude`` interval (the plateau image) are
    dropped, and the remainder is split into 8-connected pieces.  For a
    true minimizer the reference field is nearly constant on every piece,
    so the reported max spread is a few grid quanta.
    """
    mask = u_test.mask
    domain = ~mask.exterior & ~mask.o0
    rows = []
    max_spread = 0.0
    for level in levels:
        sel = domain & (u_test.values >= float(level))
        rim = _inner_rim(sel, domain)
        if exclude:
            rim &= ~_in_any_interval(u_test.values, exclude)
        labels, n = ndimage.label(rim, structure=EIGHT_CONNECTED)
        pieces = []
        for k in range(1, n + 1):
            piece = labels == k
            vals = u_ref.values[piece]
            pieces.append((int(piece.sum()), float(vals.max() - vals.min())))
        pieces.sort(key=lambda t: -t[0])
        for idx, (size, spread) in enumerate(pieces):
            rows.append(ValueCheckRow(float(level), idx, size, spread))
            max_spread = max(max_spread, spread)
    return ValueCheckResult(tuple(rows), max_spread)


def _value_clusters(values, width, min_size):
    """Concentration points of a 1-D sample: sort, split at gaps wider than
    ``width``, keep clusters of at least ``min_size``, return their means."""
    if values.size == 0:
        return ()
    s = np.sort(values)
    splits = np.flatnonzero(np.diff(s) > width)
    out = []
    start = 0
    for stop in list(splits + 1) + [s.size]:
        chunk = s[start:stop]
        if chunk.size >= min_size:
            out.append(float(chunk.mean()))
        start = stop
    return tuple(out)


def detect_plateau_values(u, degenerate):
    """Values the field concentrates on over the degenerate-gradient set."""
    vals = u.values[degenerate]
    if vals.size == 0:
        return (), 0.0
    inside = ~u.mask.exterior
    full = float(u.values[inside].max() - u.values[inside].min())
    width = max(full / 512.0, np.finfo(float).eps)
    clusters = _value_clusters(vals, 4.0 * width, max(8, int(0.05 * vals.size)))
    occupied = np.unique(np.floor((vals - vals.min()) / width)).size
    return clusters, occupied * width


def admissibility_diagnostics(u, a, delta0=None, eps_g=None):
    """Numerical surrogates for the data-admissibility conditions.

    Reports the zero set of the weight, the degenerate-gradient region of
    the voltage (with the values it concentrates on, and a histogram
    estimate of the measure of its image), and the largest jump of the
    weight between neighbor nodes away from inclusions.
    """
    mask = u.mask
    if delta0 is None:
        delta0 = 1e-3 * float(np.max(a.values, initial=0.0))
    gmag = node_magnitude(grad(u))
    anchored = mask.valid_x & mask.valid_y & ~mask.boundary & ~mask.o0
    if eps_g is None:
        eps_g = gradient_threshold(gmag, anchored & (a.values > delta0))

    zero_sel = ~mask.exterior & (a.values <= delta0)
    _, n_zero = ndimage.label(zero_sel, structure=FOUR_CONNECTED)

    degenerate = anchored & (gmag <= eps_g)
    _, n_deg = ndimage.label(degenerate, structure=FOUR_CONNECTED)

    plateau_values, plateau_measure = detect_plateau_values(u, degenerate)

    smooth = ~mask.exterior & ~mask.o0 & ~mask.oinf
    av = a.values
    jump = 0.0
    pair_x = smooth[:, 1:] & smooth[:, :-1]
    if pair_x.any():
        jump = max(jump, float(np.max(np.abs(av[:, 1:] - av[:, :-1])[pair_x])))
    pair_y = smooth[1:, :] & smooth[:-1, :]
    if pair_y.any():
        jump = max(jump, float(np.max(np.abs(av[1:, :] - av[:-1, :])[pair_y])))

    return AdmissibilityReport(
        zero_set_count=int(zero_sel.sum()),
        zero_set_components=int(n_zero),
        degenerate_count=int(degenerate.sum()),
        degenerate_components=int(n_deg),
        plateau_values=plateau_values,
        plateau_measure=float(plateau_measure),
        weight_jump_max=jump,
        delta0=float(delta0),
        eps_g=float(eps_g),
    )
