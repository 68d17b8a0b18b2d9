"""Post-hoc optimality certificates for (u, b) pairs.

A reconstruction hands back a candidate minimizer ``u`` and a dual field
``b``.  Nothing in this module trusts the solver's own report: every
quantity is re-derived from the fields alone.

* certified duality gap -- primal total variation against the corrected
  dual lower bound (valid even when ``b`` is only approximately
  divergence-free),
* dual feasibility -- worst node-wise excess of ``|b|`` over the weight,
* divergence residual -- area-weighted L2 norm of ``div b`` away from a
  one-node collar at the domain rim and around insulating inclusions,
  where the staggering makes the discrete divergence shoulder O(1)
  truncation error,
* alignment -- the fraction of informative nodes (weight above ``delta``,
  gradient above ``eps_g``) where ``b`` points within a few degrees of
  ``grad u``,
* positivity -- whether ``|b|`` stays away from zero wherever the weight
  does,
* Gauss-Green defect -- the discrete integration-by-parts identity,
  checked against an independently assembled boundary term.

All thresholds live in a :class:`TolSpec`; the certificate embeds the
spec it was judged against, so a serialized certificate is
self-contained.
"""

from dataclasses import dataclass, field as dataclass_field

import numpy as np

from . import forward
from .fields import (ScalarField, div, grad, gradient_threshold,
                     node_magnitude, vector_dot, weighted_tv)
from .minimizer import certified_dual_value

_TINY = np.finfo(float).tiny

ANGLE_DEGREES_DEFAULT = 5.0


@dataclass(frozen=True)
class TolSpec:
    """Thresholds a certificate is judged against.

    ``delta_scale`` and ``eps_g_scale`` are relative: the weight floor is
    ``delta = delta_scale * max(a)`` and the gradient floor is ``eps_g =
    eps_g_scale * median(|grad u|)`` over nodes with weight above the
    floor.  When a solution is mostly flat (a genuine plateau covering
    more than half the domain) that median is itself plateau noise, so
    ``eps_g`` is additionally floored at ``eps_g_floor * max(|grad u|)``;
    for fields without a dominant plateau the floor is inactive.
    """

    gap_relative: float = 1e-3
    dual_infeasibility: float = 1e-9
    divergence_relative: float = 5e-2
    alignment_fraction: float = 0.95
    angle_degrees: float = ANGLE_DEGREES_DEFAULT
    delta_scale: float = 1e-3
    eps_g_scale: float = 1e-2
    eps_g_floor: float = 5e-2


@dataclass
class Certificate:
    """Everything :func:`certify` measured, plus the thresholds used."""

    primal_value: float
    dual_value: float
    dual_pairing: float
    dual_correction: float
    gap_relative: float
    dual_infeasibility_max: float
    divergence_residual: float
    b_norm: float
    alignment_score: float
    alignment_checked: int
    positivity_ok: bool
    positivity_min: float
    gauss_green_defect: float
    delta: float
    eps_g: float
    tol: TolSpec = dataclass_field(default_factory=TolSpec)

    def failures(self):
        """Names of the thresholds this certificate does not meet."""
        out = []
        if not self.gap_relative <= self.tol.gap_relative:
            out.append("gap_relative")
        if not self.dual_infeasibility_max <= self.tol.dual_infeasibility:
            out.append("dual_infeasibility")
        if not self.divergence_residual <= self.tol.divergence_relative * self.b_norm:
            out.append("divergence_residual")
        if not self.alignment_score >= self.tol.alignment_fraction:
            out.append("alignment")
        if not self.positivity_ok:
            out.append("positivity")
        return out

    @property
    def passed(self):
        return not self.failures()

    def to_text(self):
        """Flat ``key = value`` block; floats round-trip via ``repr``."""
        rows = [
            ("format", "CDII-CERT1"),
            ("primal.value", repr(self.primal_value)),
            ("dual.value", repr(self.dual_value)),
            ("dual.pairing", repr(self.dual_pairing)),
            ("dual.correction", repr(self.dual_correction)),
            ("gap.relative", repr(self.gap_relative)),
            ("dual.infeasibility.max", repr(self.dual_infeasibility_max)),
            ("divergence.residual", repr(self.divergence_residual)),
            ("divergence.bnorm", repr(self.b_norm)),
            ("alignment.score", repr(self.alignment_score)),
            ("alignment.checked", str(self.alignment_checked)),
            ("positivity.ok", "true" if self.positivity_ok else "false"),
            ("positivity.min", repr(self.positivity_min)),
            ("gaussgreen.defect", repr(self.gauss_green_defect)),
            ("threshold.delta", repr(self.delta)),
            ("threshold.epsg", repr(self.eps_g)),
            ("tol.gap_relative", repr(self.tol.gap_relative)),
            ("tol.dual_infeasibility", repr(self.tol.dual_infeasibility)),
            ("tol.divergence_relative", repr(self.tol.divergence_relative)),
            ("tol.alignment_fraction", repr(self.tol.alignment_fraction)),
            ("tol.angle_degrees", repr(self.tol.angle_degrees)),
            ("tol.delta_scale", repr(self.tol.delta_scale)),
            ("tol.eps_g_scale", repr(self.tol.eps_g_scale)),
            ("pass", "true" if self.passed else "false"),
        ]
        return "".join(f"{k} = {v}\n" for k, v in rows)


def _same_layout(*fields_):
    g0 = fields_[0].grid
    m0 = fields_[0].mask
    for fld in fields_[1:]:
        if fld.grid != g0 or not np.array_equal(fld.mask.labels, m0.labels):
            raise ValueError("certificate inputs must share one grid and mask")


def _collar(mask, around):
    """Nodes 4-adjacent to (or in) the ``around`` set."""
    out = around.copy()
    out[1:, :] |= around[:-1, :]
    out[:-1, :] |= around[1:, :]
    out[:, 1:] |= around[:, :-1]
    out[:, :-1] |= around[:, 1:]
    return out


def divergence_region(mask):
    """Where ``div b`` is held to zero: inside, minus boundary/O0 collars."""
    avoid = _collar(mask, mask.boundary | mask.o0 | mask.exterior)
    return mask.inside & ~mask.boundary & ~mask.o0 & ~avoid


def boundary_pairing(u, b):
    """Boundary term of the discrete integration-by-parts identity.

    Assembled edge by edge (scatter form), independently of
    :func:`cdii.fields.div`: each valid edge deposits its ``b`` component
    into the divergence bucket of both endpoints, and only buckets on
    BOUNDARY nodes are paired with ``u``.  Returns
    ``-h^2 * sum_boundary u * (div b)``.
    """
    mask, grid = b.mask, b.grid
    acc = np.zeros(grid.shape)
    vx = mask.valid_x
    vy = mask.valid_y
    fx = np.where(vx, b.px, 0.0)
    fy = np.where(vy, b.py, 0.0)
    # Edge (i,j)-(i+1,j): outflow at the left node, inflow at the right.
    acc[:, :-1] -= fx[:, :-1]
    acc[:, 1:] += fx[:, :-1]
    acc[:-1, :] -= fy[:-1, :]
    acc[1:, :] += fy[:-1, :]
    bnd = mask.boundary
    # acc equals -h * (div b), so this is -h^2 sum_bnd u (div b).
    return grid.h * float(np.sum(u.values[bnd] * acc[bnd]))


def gauss_green_check(u, b, f=None):
    """Defect of the discrete Gauss-Green identity, relative form.

    The gradient/divergence pair is adjoint by construction, so for any
    fields the interior sums must reproduce the boundary term exactly up
    to round-off:

        -h^2 sum_bnd u (div b)  =  <grad u, b> + h^2 sum_non-bnd u (div b)

    The left side is assembled by :func:`boundary_pairing` (independent
    code path); when ``f`` is given its trace replaces ``u`` there.
    Returns ``|boundary - interior| / (1 + |boundary|)``.
    """
    _same_layout(u, b)
    trace = u if f is None else ScalarField(
        u.grid, u.mask, np.where(u.mask.boundary, f.values, u.values)
    )
    boundary_term = boundary_pairing(trace, b)
    d = div(b)
    interior = np.where(u.mask.boundary, 0.0, trace.values * d.values)
    interior_sum = vector_dot(grad(trace), b) + u.grid.h**2 * float(np.sum(interior))
    return abs(boundary_term - interior_sum) / (1.0 + abs(boundary_term))


def certify(u, b, a, f, tol=None):
    """Measure a (u, b) pair against data (a, f); pure and deterministic.

    The dual lower bound is the corrected pairing of
    :func:`cdii.minimizer.certified_dual_value`, so ``gap_relative`` is a
    true optimality bound no matter where ``b`` came from.  Node-wise
    checks (feasibility, alignment, positivity) collocate the staggered
    components anchored at each node and are evaluated where both anchor
    edges exist, so rim nodes with structurally missing edges are never
    misread as violations.
    """
    if tol is None:
        tol = TolSpec()
    _same_layout(u, b, a, f)
    mask, grid = u.mask, u.grid

    primal = weighted_tv(u, a)
    u_f = forward.harmonic_extension(grid, mask, f)
    dual, pairing, correction = certified_dual_value(b, u_f, f)
    gap_rel = (primal - dual) / max(abs(primal), _TINY)

    bmag = node_magnitude(b)
    excess = bmag - a.values
    excess[mask.exterior] = 0.0
    infeas = float(np.max(excess, initial=0.0))

    region = divergence_region(mask)
    d = div(b).values
    div_res = grid.h * float(np.sqrt(np.sum(d[region] ** 2)))
    b_norm = grid.h * float(np.sqrt(np.sum(bmag[region] ** 2)))

    delta = tol.delta_scale * float(np.max(a.values, initial=0.0))
    g = grad(u)
    gmag = node_magnitude(g)
    anchored = mask.valid_x & mask.valid_y & ~mask.boundary
    informative = anchored & (a.values > delta)
    eps_g = gradient_threshold(gmag, informative,
                               scale=tol.eps_g_scale, floor=tol.eps_g_floor)

    checked = informative & (gmag > eps_g)
    n_checked = int(checked.sum())
    if n_checked:
        dot = b.px * g.px + b.py * g.py
        cos_bound = np.cos(np.radians(tol.angle_degrees))
        denom = np.maximum(bmag * gmag, _TINY)
        aligned = dot[checked] >= cos_bound * denom[checked]
        score = float(np.count_nonzero(aligned)) / n_checked
    else:
        score = 1.0

    if informative.any():
        pos_min = float(np.min(bmag[informative]))
    else:
        pos_min = np.inf
    positivity = bool(pos_min > 0.0)

    defect = gauss_green_check(u, b, f)

    return Certificate(
        primal_value=primal,
        dual_value=dual,
        dual_pairing=pairing,
        dual_correction=correction,
        gap_relative=gap_rel,
        dual_infeasibility_max=infeas,
        divergence_residual=div_res,
        b_norm=b_norm,
        alignment_score=score,
        alignment_checked=n_checked,
        positivity_ok=positivity,
        positivity_min=pos_min,
        gauss_green_defect=defect,
        delta=delta,
        eps_g=eps_g,
        tol=tol,
    )


def parse_certificate_text(text):
    """Inverse of :meth:`Certificate.to_text` for the numeric fields.

    Returns a plain dict keyed by the serialized names; values are floats
    where they parse, booleans for ``true``/``false``, else raw strings.
    """
    out = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or "=" not in line:
            continue
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if val in ("true", "false"):
            out[key] = val == "true"
            continue
        try:
            out[key] = float(val)
        except ValueError:
            out[key] = val
    return out
