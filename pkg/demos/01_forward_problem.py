"""Forward problem: from a conductivity to the current-magnitude datum.

Solves the conduction equation  div(sigma grad u) = 0  on the unit
square for a smooth conductivity bump, with voltage x imposed on the
boundary.  The solve returns the voltage u, the current J = -sigma
grad u, and the interior datum a = |J| that the reconstruction side of
the toolkit consumes.  Conservation diagnostics and field files are
written to demos/out/01_forward/.
"""

import pathlib

from cdii import fileio, forward, phantoms

OUT = pathlib.Path(__file__).parent / "out" / "01_forward"


def main():
    phantom = phantoms.get_phantom("bump")
    grid = phantom.build_grid(129)
    mask = phantom.build_mask(grid)
    sigma = phantom.sigma_field(grid, mask)
    f = phantom.boundary_data(grid, mask)

    print(f"domain: {phantom.domain}, {grid.nx}x{grid.ny} nodes, h = {grid.h:g}")
    print(f"conductivity: {phantom.description}")

    sol = forward.solve_conductivity(forward.DomainSpec(grid, mask, sigma, f))
    rep = sol.report

    print(f"solved in {rep.iterations} CG iterations, "
          f"relative residual {rep.residual:.2e}")
    net = abs(rep.boundary_net_flux) / rep.boundary_abs_flux
    print(f"current conservation: |net boundary flux| / total = {net:.2e}")
    print(f"voltage range: [{sol.u.values[mask.inside].min():+.4f}, "
          f"{sol.u.values[mask.inside].max():+.4f}]")
    print(f"datum range:   [{sol.a.values[mask.inside].min():.4f}, "
          f"{sol.a.values[mask.inside].max():.4f}]")

    OUT.mkdir(parents=True, exist_ok=True)
    fileio.write_field(OUT / "mask.wlgf", mask)
    fileio.write_field(OUT / "u.wlgf", sol.u)
    fileio.write_field(OUT / "a.wlgf", sol.a)
    fileio.emit_image(sol.u, OUT / "u.pgm")
    fileio.emit_image(sol.a, OUT / "a.pgm")
    print(f"wrote voltage and datum fields to {OUT}")


if __name__ == "__main__":
    main()
