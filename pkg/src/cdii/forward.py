"""Forward conductivity solves and synthetic interior data.

Discretization: the conservative 5-point scheme for ``div(sigma grad u) = 0``
with harmonic-mean edge conductivities and Dirichlet values frozen on
BOUNDARY nodes.  Perfect inclusions are modelled by extreme but finite
surrogate conductivities on O0/OINF nodes; the solver then verifies the
idealized behaviour a posteriori (equipotential OINF components, zero net
flux through every inclusion interface).

The linear systems are symmetric positive definite and are solved with
conjugate gradients under a Jacobi (diagonal) preconditioner; a dense
direct solve is used as an independent oracle in the test-suite only.
"""

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.linalg import LinearOperator, cg

from .fields import ScalarField, VectorField, node_average
from .grids import BOUNDARY, EXTERIOR


class NonConvergenceError(RuntimeError):
    """Linear solver exhausted its iteration budget."""

    def __init__(self, iterations, residual):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"conjugate gradients stalled after {iterations} iterations "
            f"(relative residual {residual:.3e})"
        )


class SingularSystemError(RuntimeError):
    """A free node is fully decoupled (all incident conductances vanish)."""


class InclusionSpreadError(RuntimeError):
    """An OINF component failed its equipotential check."""

    def __init__(self, component, spread, tol):
        self.component = component
        self.spread = spread
        self.tol = tol
        super().__init__(
            f"OINF component {component} has voltage spread {spread:.3e} > {tol:.3e}; "
            "increase sigma_inf or refine the grid"
        )


@dataclass
class DomainSpec:
    """Problem description for one forward solve.

    ``sigma`` holds the background conductivity on domain nodes; the values
    stored on O0/OINF nodes are ignored by :func:`solve_with_inclusions`,
    which substitutes the surrogates ``sigma_ins``/``sigma_inf``.  Defaults
    place the surrogates six decades away from the background range, well
    beyond the required four.
    """

    grid: object
    mask: object
    sigma: ScalarField
    f: ScalarField
    sigma_inf: float | None = None
    sigma_ins: float | None = None

    def __post_init__(self):
        bg = self.sigma.values[self.mask.inside]
        if (bg <= 0.0).any():
            raise ValueError("conductivity must be positive on domain nodes")
        smax = float(bg.max())
        smin = float(bg.min())
        if self.sigma_inf is None:
            self.sigma_inf = 1e6 * smax
        if self.sigma_ins is None:
            self.sigma_ins = 1e-6 * smin
        if self.sigma_inf < 1e4 * smax:
            raise ValueError("sigma_inf must be at least 1e4 * max(sigma)")
        if self.sigma_ins > 1e-4 * smin:
            raise ValueError("sigma_ins must be at most 1e-4 * min(sigma)")


@dataclass
class ForwardReport:
    iterations: int
    residual: float
    boundary_net_flux: float
    boundary_abs_flux: float
    oinf_spreads: list = field(default_factory=list)
    oinf_values: list = field(default_factory=list)
    oinf_net_fluxes: list = field(default_factory=list)
    o0_net_flux: float | None = None
    wall_time: float = 0.0


@dataclass
class ForwardSolution:
    u: ScalarField
    J: VectorField
    a: ScalarField
    sigma_eff: ScalarField
    report: ForwardReport


def _edge_conductivities(mask, sigma_vals):
    """Harmonic-mean conductivity on every valid edge (zero on invalid)."""
    s = sigma_vals
    tiny = np.finfo(float).tiny
    kx = np.zeros(mask.grid.shape)
    ky = np.zeros(mask.grid.shape)
    kx[:, :-1] = 2.0 * s[:, :-1] * s[:, 1:] / np.maximum(s[:, :-1] + s[:, 1:], tiny)
    ky[:-1, :] = 2.0 * s[:-1, :] * s[1:, :] / np.maximum(s[:-1, :] + s[1:, :], tiny)
    kx[~mask.valid_x] = 0.0
    ky[~mask.valid_y] = 0.0
    return kx, ky


def _assemble(mask, kx, ky, f_vals):
    """Sparse SPD system for the free nodes.

    Row for free node p: ``sum_q k_pq (u_p - u_q) = 0`` over its valid
    edges; couplings to BOUNDARY nodes move to the right-hand side.  The
    1/h^2 factor is the same for every entry and is dropped.
    """
    ny, nx = mask.grid.shape
    free = mask.free
    idx = -np.ones(mask.grid.shape, dtype=np.int64)
    fidx = np.flatnonzero(free.ravel())
    idx.ravel()[fidx] = np.arange(fidx.size)

    rows, cols, vals = [], [], []
    rhs = np.zeros(fidx.size)
    diag = np.zeros(fidx.size)

    # Four edge families: (+x, -x, +y, -y) neighbours of each free node.
    J, I = np.nonzero(free)
    for dj, di, k_arr, koff in (
        (0, 1, kx, (0, 0)),    # edge anchored at the node itself
        (0, -1, kx, (0, -1)),  # edge anchored at the left neighbour
        (1, 0, ky, (0, 0)),
        (-1, 0, ky, (-1, 0)),
    ):
        Jn, In = J + dj, I + di
        ok = (Jn >= 0) & (Jn < ny) & (In >= 0) & (In < nx)
        Ja, Ia = J[ok] + koff[0], I[ok] + koff[1]
        k = k_arr[Ja, Ia]
        has_edge = k != 0.0
        p = idx[J[ok], I[ok]]
        qj, qi = Jn[ok], In[ok]
        diag_add = np.zeros(fidx.size)
        np.add.at(diag_add, p, np.where(has_edge, k, 0.0))
        diag += diag_add
        nb_free = free[qj, qi] & has_edge
        rows.append(p[nb_free])
        cols.append(idx[qj[nb_free], qi[nb_free]])
        vals.append(-k[nb_free])
        nb_bdry = (mask.labels[qj, qi] == BOUNDARY) & has_edge
        np.add.at(rhs, p[nb_bdry], k[nb_bdry] * f_vals[qj[nb_bdry], qi[nb_bdry]])

    if (diag == 0.0).any():
        raise SingularSystemError("free node with no conductive coupling")

    rows.append(np.arange(fidx.size))
    cols.append(np.arange(fidx.size))
    vals.append(diag)
    A = csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(fidx.size, fidx.size),
    )
    return A, rhs, idx


def _pcg_solve(A, rhs, tol, max_iter):
    d = A.diagonal()
    inv_d = 1.0 / d
    M = LinearOperator(A.shape, matvec=lambda x: inv_d * x)
    iters = [0]

    def _count(_):
        iters[0] += 1

    x, info = cg(A, rhs, rtol=tol, atol=0.0, maxiter=max_iter, M=M, callback=_count)
    rhs_norm = float(np.linalg.norm(rhs))
    res = float(np.linalg.norm(A @ x - rhs)) / max(rhs_norm, np.finfo(float).tiny)
    if rhs_norm == 0.0:
        res = float(np.linalg.norm(A @ x - rhs))
    if info != 0 or not np.isfinite(res) or res > 10.0 * tol:
        raise NonConvergenceError(iters[0], res)
    return x, res, iters[0]


def _solve_given_sigma(spec, sigma_vals, tol, max_iter):
    t0 = time.perf_counter()
    mask, grid = spec.mask, spec.grid
    kx, ky = _edge_conductivities(mask, sigma_vals)
    A, rhs, idx = _assemble(mask, kx, ky, spec.f.values)
    if max_iter is None:
        max_iter = max(30_000, 20 * max(grid.nx, grid.ny))
    x, res, n_iter = _pcg_solve(A, rhs, tol, max_iter)

    u_vals = np.where(mask.boundary, spec.f.values, 0.0)
    u_vals[mask.free] = x
    u = ScalarField(grid, mask, u_vals)

    # J = -sigma grad u on edges, with harmonic-mean edge conductivity.
    h = grid.h
    jx = np.zeros(grid.shape)
    jy = np.zeros(grid.shape)
    jx[:, :-1] = -kx[:, :-1] * (u_vals[:, 1:] - u_vals[:, :-1]) / h
    jy[:-1, :] = -ky[:-1, :] * (u_vals[1:, :] - u_vals[:-1, :]) / h
    J = VectorField(grid, mask, jx, jy)

    ax, ay = node_average(J)
    a = ScalarField(grid, mask, np.hypot(ax, ay))

    net, tot = boundary_flux(u, sigma_vals)
    report = ForwardReport(
        iterations=n_iter,
        residual=res,
        boundary_net_flux=net,
        boundary_abs_flux=tot,
        wall_time=time.perf_counter() - t0,
    )
    sigma_eff = ScalarField(grid, mask, sigma_vals)
    return ForwardSolution(u, J, a, sigma_eff, report)


def solve_conductivity(spec, tol=1e-12, max_iter=None):
    """Solve the conductivity equation with the given sigma as-is.

    Raises ``NonConvergenceError`` / ``SingularSystemError`` on failure.
    """
    return _solve_given_sigma(spec, spec.sigma.values.copy(), tol, max_iter)


def solve_with_inclusions(spec, tol=1e-12, max_iter=None, spread_tol=1e-3):
    """Forward solve with inclusion surrogates plus a posteriori checks.

    O0 nodes get ``sigma_ins`` and OINF nodes ``sigma_inf``; afterwards the
    voltage spread of every OINF component is checked against
    ``spread_tol`` (raising ``InclusionSpreadError`` beyond it) and the net
    flux through every inclusion interface is recorded in the report.
    With no inclusions in the mask this is bit-identical to
    :func:`solve_conductivity`.
    """
    mask = spec.mask
    sigma_vals = spec.sigma.values.copy()
    sigma_vals[mask.o0] = spec.sigma_ins
    sigma_vals[mask.oinf] = spec.sigma_inf
    sol = _solve_given_sigma(spec, sigma_vals, tol, max_iter)

    rep = sol.report
    u_vals = sol.u.values
    for c in range(mask.n_oinf_components):
        comp = mask.oinf_component_ids == c
        vals = u_vals[comp]
        spread = float(vals.max() - vals.min())
        rep.oinf_spreads.append(spread)
        rep.oinf_values.append(float(np.median(vals)))
        rep.oinf_net_fluxes.append(interface_flux(sol.u, sigma_vals, comp))
        if spread > spread_tol:
            raise InclusionSpreadError(c, spread, spread_tol)
    if mask.o0.any():
        rep.o0_net_flux = interface_flux(sol.u, sigma_vals, mask.o0)
    return sol


def harmonic_extension(grid, mask, f, tol=1e-12, max_iter=None):
    """Solution of the unit-conductivity problem with Dirichlet data f."""
    ones = ScalarField(grid, mask, np.ones(grid.shape))
    spec = DomainSpec(grid, mask, ones, f)
    return solve_conductivity(spec, tol=tol, max_iter=max_iter).u


# ---------------------------------------------------------------------------
# flux bookkeeping


def _crossing_flux(u_vals, kx, ky, region, other):
    """Sum of sigma_e (u_in - u_out) over edges from ``region`` to ``other``.

    Each term is the discrete flux of J = -sigma grad u through one edge
    face (flux density times face length h).
    """
    out = 0.0
    r, o = region, other
    # +x and -x crossings
    out += float(np.sum(np.where(r[:, :-1] & o[:, 1:], kx[:, :-1] * (u_vals[:, :-1] - u_vals[:, 1:]), 0.0)))
    out += float(np.sum(np.where(r[:, 1:] & o[:, :-1], kx[:, :-1] * (u_vals[:, 1:] - u_vals[:, :-1]), 0.0)))
    # +y and -y crossings
    out += float(np.sum(np.where(r[:-1, :] & o[1:, :], ky[:-1, :] * (u_vals[:-1, :] - u_vals[1:, :]), 0.0)))
    out += float(np.sum(np.where(r[1:, :] & o[:-1, :], ky[:-1, :] * (u_vals[1:, :] - u_vals[:-1, :]), 0.0)))
    return out


def boundary_flux(u, sigma_vals):
    """(net, total_abs) outward flux of J through the Dirichlet boundary.

    Net flux vanishes (to solver tolerance) by conservation; ``total_abs``
    sums |flux| per boundary node and is the natural normalization.
    """
    mask = u.mask
    kx, ky = _edge_conductivities(mask, sigma_vals)
    net = _crossing_flux(u.values, kx, ky, mask.boundary, mask.free)
    per_node = _per_node_boundary_flux(u.values, kx, ky, mask)
    return net, float(np.abs(per_node).sum())


def _per_node_boundary_flux(u_vals, kx, ky, mask):
    b = mask.boundary
    fr = mask.free
    flux = np.zeros(mask.grid.shape)
    flux[:, :-1] += np.where(b[:, :-1] & fr[:, 1:], kx[:, :-1] * (u_vals[:, :-1] - u_vals[:, 1:]), 0.0)
    flux[:, 1:] += np.where(b[:, 1:] & fr[:, :-1], kx[:, :-1] * (u_vals[:, 1:] - u_vals[:, :-1]), 0.0)
    flux[:-1, :] += np.where(b[:-1, :] & fr[1:, :], ky[:-1, :] * (u_vals[:-1, :] - u_vals[1:, :]), 0.0)
    flux[1:, :] += np.where(b[1:, :] & fr[:-1, :], ky[:-1, :] * (u_vals[1:, :] - u_vals[:-1, :]), 0.0)
    return flux[b]


def interface_flux(u, sigma_vals, region):
    """Net flux of J out of a node region through its interface."""
    mask = u.mask
    kx, ky = _edge_conductivities(mask, sigma_vals)
    other = mask.inside & ~region
    return _crossing_flux(u.values, kx, ky, region, other)


# ---------------------------------------------------------------------------
# synthetic noise


def add_noise(a, level, seed):
    """Multiplicative uniform noise: ``a * (1 + level * xi)``, xi ~ U[-1, 1].

    Drawn from a PCG64 generator seeded with ``seed``; the draw order is
    the row-major node order, so results are reproducible bit-for-bit.
    Negative results are clipped to zero and exterior nodes stay zero.
    """
    if level < 0.0:
        raise ValueError("noise level must be non-negative")
    rng = np.random.default_rng(seed)
    xi = rng.uniform(-1.0, 1.0, size=a.grid.shape)
    noisy = np.clip(a.values * (1.0 + level * xi), 0.0, None)
    return ScalarField(a.grid, a.mask, noisy)


def add_boundary_noise(f, level, seed):
    """Additive uniform noise of absolute amplitude ``level`` on the
    Dirichlet data (boundary nodes only)."""
    if level < 0.0:
        raise ValueError("noise level must be non-negative")
    rng = np.random.default_rng(seed)
    eta = rng.uniform(-1.0, 1.0, size=f.grid.shape)
    vals = f.values.copy()
    vals[f.mask.boundary] += level * eta[f.mask.boundary]
    return ScalarField(f.grid, f.mask, vals)
