"""Weighted least-gradient minimization with a certified duality gap.

Solves ``min_u  h^2 sum a(x) |grad u(x)|`` over fields matching the
Dirichlet data on BOUNDARY nodes, by the first-order primal-dual scheme

    b   <- project_dual_ball(b + sigma_step * grad(u_bar), a)
    u   <- u + tau * div(b)            (BOUNDARY nodes held fixed)
    u_bar <- u + theta * (u - u_prev)

The dual pairing ``h^2 <grad u_f, b>`` is a true lower bound on the
primal value only for exactly divergence-free ``b``.  Iterates are not
exactly divergence-free, so every reported dual value is *certified* by
subtracting a rigorous correction: since clamping to the boundary range
``[m_f, M_f]`` never increases the objective, the minimum is unchanged
when u is restricted to that box, and for any box-feasible u

    <grad u, b> = <grad u_f, b> - <u - u_f, div b>
               >= <grad u_f, b> - sum_x max over [m_f - u_f, M_f - u_f]
                                          of (div b)(x) * (.)

with u_f the unit-conductivity harmonic extension of the data.  The
reported gap therefore bounds the true optimality error of the returned
iterate, whatever the divergence defect happens to be.

Three dual candidates are evaluated at every check: the current iterate,
its running average over the check window (oscillations cancel), and --
when every node carries positive weight -- a polished copy obtained by
projecting the average onto divergence-free fields (one sparse Poisson
solve, factorized once) and rescaling back into the ball.  All three are
feasible, so the best certified value is kept; the running maximum over
checks is monotone and always rigorous.
"""

import time
from dataclasses import dataclass, replace

import numpy as np
from scipy.sparse.linalg import splu

from . import forward
from .fields import (ScalarField, VectorField, boundary_range, clamp,
                     div as field_div, grad, vector_dot)

_TINY = np.finfo(float).tiny


class InvalidStepError(ValueError):
    """Step sizes violate tau * sigma_step * L^2 <= 1 with L = sqrt(8)/h."""


class NotConvergedError(RuntimeError):
    """Gap tolerance not reached; carries the best iterate found."""

    def __init__(self, u, b, report):
        self.u = u
        self.b = b
        self.report = report
        super().__init__(
            f"no certificate after {report.iterations} iterations: "
            f"relative gap {report.gap_relative:.3e} > tol"
        )


@dataclass
class SolverConfig:
    """Knobs of :func:`minimize`.

    ``init`` is one of ``"zero"``, ``"harmonic"``, ``"random:<seed>"`` or
    ``"given"`` (supply ``init_field``).  When ``tau``/``sigma_step`` are
    left unset they default to ``h/sqrt(8) / step_ratio`` and
    ``h/sqrt(8) * step_ratio``, saturating the stability product
    ``tau * sigma_step * (sqrt(8)/h)^2 = 1``.
    """

    max_iter: int = 200_000
    gap_tol: float = 1e-4
    tau: float | None = None
    sigma_step: float | None = None
    theta: float = 1.0
    init: str = "harmonic"
    init_field: ScalarField | None = None
    step_ratio: float = 4.0
    check_every: int = 250
    polish: bool = True

    def resolve_steps(self, h):
        base = h / np.sqrt(8.0)
        tau = self.tau if self.tau is not None else base / self.step_ratio
        sig = self.sigma_step if self.sigma_step is not None else base * self.step_ratio
        if tau <= 0.0 or sig <= 0.0:
            raise InvalidStepError("step sizes must be positive")
        if not (0.0 <= self.theta <= 1.0):
            raise InvalidStepError(f"theta must lie in [0, 1], got {self.theta}")
        L2 = 8.0 / h**2
        if tau * sig * L2 > 1.0 + 1e-12:
            raise InvalidStepError(
                f"tau*sigma_step*L^2 = {tau * sig * L2:.6f} > 1 (L = sqrt(8)/h)"
            )
        return float(tau), float(sig)


@dataclass
class SolveReport:
    primal_value: float
    dual_value: float
    gap: float
    gap_relative: float
    iterations: int
    converged: bool
    wall_time: float
    dual_pairing: float = 0.0
    dual_correction: float = 0.0
    pre_clamp_violation_fraction: float = 0.0
    modulo_zero_weight: bool = False
    init: str = "harmonic"
    tau: float = 0.0
    sigma_step: float = 0.0
    theta: float = 1.0
    checks: int = 0
    polish_used: bool = False


def project_dual_ball(p, a):
    """Node-wise projection onto ``{ |b(x)| <= a(x) }``.

    The two staggered components anchored at each node are scaled by
    ``min(1, a/|p|)``; feasible vectors pass through unchanged (the scale
    factor is exactly 1.0), and ``a = 0`` forces zero.
    """
    mag = np.hypot(p.px, p.py)
    a_floor = np.maximum(a.values, _TINY)
    factor = a.values / np.maximum(mag, a_floor)
    return VectorField(p.grid, p.mask, p.px * factor, p.py * factor)


def dual_value(b, u_f):
    """Dual objective ``h^2 <grad u_f, b>`` for a candidate certificate."""
    return vector_dot(grad(u_f), b)


def certified_dual_value(b, u_f, f):
    """Lower bound on the primal optimum valid for inexactly solenoidal b.

    Returns ``(value, pairing, correction)`` where ``value = pairing -
    correction`` and the correction is the box bound described in the
    module docstring.  Requires ``|b| <= a`` node-wise (not checked here).
    """
    pairing = dual_value(b, u_f)
    m, M = boundary_range(f)
    d = field_div(b).values
    lo = m - u_f.values
    hi = M - u_f.values
    free = b.mask.free
    corr = b.grid.h**2 * float(np.sum(np.maximum(d[free] * lo[free], d[free] * hi[free])))
    return pairing - corr, pairing, corr


def _initial_u(a, f, cfg, u_f, m, M):
    mask, grid = a.mask, a.grid
    vals = np.where(mask.boundary, f.values, 0.0)
    name = cfg.init.lower()
    if name == "harmonic":
        vals = u_f.values.copy()
    elif name == "zero":
        pass
    elif name.startswith("random"):
        try:
            seed = int(name.split(":", 1)[1])
        except (IndexError, ValueError):
            raise ValueError(f"random init needs a seed, e.g. 'random:1'; got {cfg.init!r}")
        rng = np.random.default_rng(seed)
        draw = rng.uniform(m, M, size=grid.shape)
        vals[mask.free] = draw[mask.free]
    elif name == "given":
        if cfg.init_field is None:
            raise ValueError("init='given' requires init_field")
        vals = cfg.init_field.values.copy()
        vals[mask.boundary] = f.values[mask.boundary]
    else:
        raise ValueError(f"unknown init {cfg.init!r}")
    vals[mask.exterior] = 0.0
    return vals


def minimize(a, f, cfg=None):
    """Minimize the weighted total variation subject to the Dirichlet data.

    Parameters
    ----------
    a : ScalarField
        Non-negative weight (interior data |J|).
    f : ScalarField
        Dirichlet data on BOUNDARY nodes.
    cfg : SolverConfig, optional

    Returns
    -------
    (u, b, report)
        ``u`` is clamped into the boundary range; ``b`` is the best dual
        certificate found; ``report.gap`` bounds ``primal - optimum``.

    Raises
    ------
    NotConvergedError
        When the relative gap tolerance is not met within ``max_iter``
        iterations.  The best iterate is attached to the exception.
    """
    if cfg is None:
        cfg = SolverConfig()
    mask, grid = a.mask, a.grid
    h = grid.h
    if (a.values[mask.inside] < 0.0).any():
        raise ValueError("weight field must be non-negative")
    tau, sig = cfg.resolve_steps(h)

    t0 = time.perf_counter()
    m, M = boundary_range(f)
    u_f = forward.harmonic_extension(grid, mask, f)

    a_vals = a.values
    delta0 = 1e-3 * float(a_vals.max(initial=0.0))
    modulo_s = bool((a_vals[mask.free] <= delta0).any())

    # Masked, 1/h-scaled difference stencils (zero on invalid edges).
    mx = mask.valid_x.astype(np.float64) / h
    my = mask.valid_y.astype(np.float64) / h
    gfx = np.zeros(grid.shape)
    gfy = np.zeros(grid.shape)
    gfx[:, :-1] = u_f.values[:, 1:] - u_f.values[:, :-1]
    gfy[:-1, :] = u_f.values[1:, :] - u_f.values[:-1, :]
    gfx *= mx
    gfy *= my

    bnd_flat = np.flatnonzero(mask.boundary.ravel())
    f_bnd = f.values.ravel()[bnd_flat]
    free = mask.free
    lo_free = m - u_f.values[free]
    hi_free = M - u_f.values[free]
    ext = mask.exterior
    a_floor = np.maximum(a_vals, _TINY)

    u = _initial_u(a, f, cfg, u_f, m, M)
    ubar = u.copy()
    unew = np.zeros(grid.shape)

    # Dual start: weight-saturated along the initial gradient direction.
    gx = np.zeros(grid.shape)
    gy = np.zeros(grid.shape)
    gx[:, :-1] = u[:, 1:] - u[:, :-1]
    gy[:-1, :] = u[1:, :] - u[:-1, :]
    gx *= mx
    gy *= my
    # Unit direction computed as gx/mag (safe: |gx| <= mag), then scaled to a.
    mag0 = np.hypot(gx, gy)
    nz0 = mag0 > 0.0
    ux0 = np.zeros(grid.shape)
    uy0 = np.zeros(grid.shape)
    np.divide(gx, mag0, out=ux0, where=nz0)
    np.divide(gy, mag0, out=uy0, where=nz0)
    bx = a_vals * ux0
    by = a_vals * uy0

    mag = np.empty(grid.shape)
    denom = np.empty(grid.shape)
    factor = np.empty(grid.shape)
    dv = np.zeros(grid.shape)
    bx_sum = np.zeros(grid.shape)
    by_sum = np.zeros(grid.shape)
    u_sum = np.zeros(grid.shape)
    window = 0

    tau_h = tau / h

    best_primal = np.inf
    best_dual = -np.inf
    best_pairing = 0.0
    best_corr = 0.0
    u_best = u.copy()
    bx_best = bx.copy()
    by_best = by.copy()
    lap_lu = None
    polish_used = False
    polish_ok = cfg.polish and not modulo_s
    checks = 0

    def _primal_of(raw):
        uc = np.clip(raw, m, M)
        uc[ext] = 0.0
        tgx = np.zeros(grid.shape)
        tgy = np.zeros(grid.shape)
        tgx[:, :-1] = uc[:, 1:] - uc[:, :-1]
        tgy[:-1, :] = uc[1:, :] - uc[:-1, :]
        tgx *= mx
        tgy *= my
        return h**2 * float(np.sum(a_vals * np.hypot(tgx, tgy)))

    def _certified(cbx, cby):
        pair = h**2 * (float(np.vdot(gfx, cbx)) + float(np.vdot(gfy, cby)))
        d = np.zeros(grid.shape)
        d[:, 0] = cbx[:, 0]
        d[:, 1:] = cbx[:, 1:] - cbx[:, :-1]
        d[0, :] += cby[0, :]
        d[1:, :] += cby[1:, :] - cby[:-1, :]
        df = d[free] / h
        corr = h**2 * float(np.sum(np.maximum(df * lo_free, df * hi_free)))
        return pair - corr, pair, corr

    def _polish(cbx, cby):
        nonlocal lap_lu, polish_used
        if lap_lu is None:
            ones = np.ones(grid.shape)
            kx, ky = forward._edge_conductivities(mask, ones)
            A, _, _ = forward._assemble(mask, kx, ky, np.zeros(grid.shape))
            lap_lu = splu(A.tocsc())
        d = np.zeros(grid.shape)
        d[:, 0] = cbx[:, 0]
        d[:, 1:] = cbx[:, 1:] - cbx[:, :-1]
        d[0, :] += cby[0, :]
        d[1:, :] += cby[1:, :] - cby[:-1, :]
        # A phi = -h * (unscaled div) gives div(grad phi) = div b on free nodes.
        phi_free = lap_lu.solve(-h * d[free])
        phi = np.zeros(grid.shape)
        phi[free] = phi_free
        gpx = np.zeros(grid.shape)
        gpy = np.zeros(grid.shape)
        gpx[:, :-1] = phi[:, 1:] - phi[:, :-1]
        gpy[:-1, :] = phi[1:, :] - phi[:-1, :]
        gpx *= mx
        gpy *= my
        px = cbx - gpx
        py = cby - gpy
        pmag = np.hypot(px, py)
        with np.errstate(divide="ignore", over="ignore"):
            ratios = np.where(pmag > _TINY, a_vals / np.maximum(pmag, _TINY), np.inf)
        c = min(1.0, float(ratios.min()))
        if not np.isfinite(c) or c <= 0.0:
            return None
        polish_used = True
        return c * px, c * py

    it = 0
    converged = False
    while True:
        at_end = it >= cfg.max_iter
        if it % cfg.check_every == 0 or at_end:
            checks += 1
            # Primal candidates: the iterate and its window average.  The
            # average irons out the dwindling primal-dual oscillation; both
            # values are exact evaluations, so picking the smaller is safe.
            primal_candidates = [u]
            if window > 0:
                primal_candidates.append(u_sum / window)
            for cand in primal_candidates:
                p_now = _primal_of(cand)
                if p_now < best_primal:
                    best_primal = p_now
                    u_best = np.array(cand, copy=True)
            candidates = [(bx, by)]
            if window > 0:
                candidates.append((bx_sum / window, by_sum / window))
            use_polish = polish_ok and window > 0 and (
                best_primal - best_dual > cfg.gap_tol * (1.0 + abs(best_primal))
            )
            if use_polish:
                pol = _polish(bx_sum / window, by_sum / window)
                if pol is not None:
                    candidates.append(pol)
            for cbx, cby in candidates:
                val, pair, corr = _certified(cbx, cby)
                if val > best_dual:
                    best_dual = val
                    best_pairing = pair
                    best_corr = corr
                    bx_best = np.array(cbx, copy=True)
                    by_best = np.array(cby, copy=True)
            bx_sum[:] = 0.0
            by_sum[:] = 0.0
            u_sum[:] = 0.0
            window = 0
            gap = best_primal - best_dual
            if gap <= cfg.gap_tol * (1.0 + abs(best_primal)):
                converged = True
                break
            if at_end:
                break

        # one primal-dual step
        np.subtract(ubar[:, 1:], ubar[:, :-1], out=gx[:, :-1])
        np.subtract(ubar[1:, :], ubar[:-1, :], out=gy[:-1, :])
        gx *= mx
        gy *= my
        gx *= sig
        gy *= sig
        bx += gx
        by += gy
        np.hypot(bx, by, out=mag)
        np.maximum(mag, a_floor, out=denom)
        np.divide(a_vals, denom, out=factor)
        bx *= factor
        by *= factor

        dv[:, 0] = bx[:, 0]
        np.subtract(bx[:, 1:], bx[:, :-1], out=dv[:, 1:])
        dv[0, :] += by[0, :]
        dv[1:, :] += by[1:, :] - by[:-1, :]
        np.multiply(dv, tau_h, out=dv)
        np.add(u, dv, out=unew)
        unew.ravel()[bnd_flat] = f_bnd

        # u_bar = unew + theta (unew - u), reusing dv as scratch
        np.subtract(unew, u, out=dv)
        dv *= cfg.theta
        np.add(unew, dv, out=ubar)
        u, unew = unew, u

        bx_sum += bx
        by_sum += by
        u_sum += u
        window += 1
        it += 1

    viol = float(np.sum((u_best[free] < m) | (u_best[free] > M))) / max(1, int(free.sum()))
    u_raw = ScalarField(grid, mask, u_best)
    u_out = clamp(u_raw, f)
    b_out = VectorField(grid, mask, bx_best, by_best)

    gap = best_primal - best_dual
    report = SolveReport(
        primal_value=best_primal,
        dual_value=best_dual,
        gap=gap,
        gap_relative=gap / max(abs(best_primal), _TINY),
        iterations=it,
        converged=converged,
        wall_time=time.perf_counter() - t0,
        dual_pairing=best_pairing,
        dual_correction=best_corr,
        pre_clamp_violation_fraction=viol,
        modulo_zero_weight=modulo_s,
        init=cfg.init,
        tau=tau,
        sigma_step=sig,
        theta=cfg.theta,
        checks=checks,
        polish_used=polish_used,
    )
    if not converged:
        raise NotConvergedError(u_out, b_out, report)
    return u_out, b_out, report
