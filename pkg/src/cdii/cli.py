"""The ``cdii`` command line.

Subcommands compose into shell pipelines:

- ``forward``     solve the conductivity equation for a phantom
- ``synth``       produce (noisy) reconstruction data for a phantom
- ``reconstruct`` minimize the weighted total variation over the data
- ``certify``     check a (u, b) pair for certified optimality
- ``analyze``     level-set structure audits and admissibility report
- ``uniqtest``    reconstruct from several initializations and compare
- ``oracle``      closed-form reference fields and error metrics

Exit codes: 0 on success, 1 when a quantitative threshold fails
(certificate, uniqueness tolerance, oracle comparison, non-convergence),
2 on I/O, format, or usage errors.  Progress and wall times go to
standard error; metrics go to standard output and into the report files.
Runs that write artifacts also write ``manifest.txt`` with a SHA-256 per
file, the configuration hash, and the seed, and never contain
timestamps, so a seeded run is reproducible byte-for-byte.
"""

import argparse
import dataclasses
import os
import sys
import time

from . import fileio, forward, levelsets, phantoms, pipeline
from .certificate import TolSpec, certify
from .fields import boundary_range, l1_distance, l2_rel_error, linf_error
from .fileio import FormatError
from .grids import Mask
from .minimizer import NotConvergedError


def _log(message):
    print(message, file=sys.stderr)


def _ensure_outdir(path):
    os.makedirs(path, exist_ok=True)
    return path


class _Run:
    """Collects artifacts of one run and writes the manifest last."""

    def __init__(self, outdir, command, config_text=None, seed=None):
        self.outdir = _ensure_outdir(outdir)
        self.command = command
        self.config_text = config_text
        self.seed = seed
        self.entries = {}

    def path(self, name):
        return os.path.join(self.outdir, name)

    def add_field(self, name, obj):
        fileio.write_field(self.path(name), obj)
        self.entries[name] = self.path(name)

    def add_image(self, name, field):
        fileio.emit_image(field, self.path(name))
        self.entries[name] = self.path(name)

    def add_text(self, name, text):
        with open(self.path(name), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        self.entries[name] = self.path(name)

    def add_csv(self, name, writer, *args):
        writer(self.path(name), *args)
        self.entries[name] = self.path(name)

    def finish(self):
        fileio.write_manifest(self.path("manifest.txt"), self.command,
                              self.entries, config_text=self.config_text,
                              seed=self.seed)


def _load_config(args):
    cfg = fileio.read_run_config(args.config)
    with open(args.config, "r", encoding="utf-8") as fh:
        text = fh.read()
    return cfg, text


def _config_phantom(cfg):
    if cfg.phantom is None:
        raise FormatError("config needs a phantom name for this command")
    p = phantoms.get_phantom(cfg.phantom)
    if cfg.domain is not None and cfg.domain != p.domain:
        raise FormatError(
            f"config says domain = {cfg.domain} but phantom {p.name!r} "
            f"lives on a {p.domain}"
        )
    if cfg.n is None:
        raise FormatError("config needs n (grid nodes per side)")
    return p


def _forward_report_pairs(phantom, cfg, rep):
    pairs = [
        ("phantom", phantom.name),
        ("n", cfg.n),
        ("domain", phantom.domain),
        ("iterations", rep.iterations),
        ("residualRelative", rep.residual),
        ("boundaryNetFlux", rep.boundary_net_flux),
        ("boundaryAbsFlux", rep.boundary_abs_flux),
    ]
    for idx, spread in enumerate(rep.oinf_spreads):
        pairs.append((f"oinfSpread.{idx}", spread))
        pairs.append((f"oinfNetFlux.{idx}", rep.oinf_net_fluxes[idx]))
    if rep.o0_net_flux is not None:
        pairs.append(("o0NetFlux", rep.o0_net_flux))
    return pairs


def _cmd_forward(args):
    cfg, text = _load_config(args)
    p = _config_phantom(cfg)
    grid = p.build_grid(cfg.n)
    mask = p.build_mask(grid)
    sigma = p.sigma_field(grid, mask)
    if sigma is None:
        raise FormatError(f"phantom {p.name!r} has no conductivity to solve")
    f = p.boundary_data(grid, mask)
    _log(f"forward: {p.name} on {cfg.n}x{cfg.n} {p.domain}")
    t0 = time.perf_counter()
    sol = forward.solve_with_inclusions(
        forward.DomainSpec(grid, mask, sigma, f), spread_tol=cfg.spreadTol
    )
    _log(f"forward solve took {time.perf_counter() - t0:.2f} s "
         f"({sol.report.iterations} iterations)")

    run = _Run(args.out, "forward", config_text=text, seed=cfg.seed)
    run.add_field("mask.wlgf", mask)
    run.add_field("u.wlgf", sol.u)
    run.add_field("J.wlgf", sol.J)
    run.add_field("a.wlgf", sol.a)
    run.add_field("f.wlgf", f)
    run.add_field("sigma.wlgf", sigma)
    run.add_image("u.pgm", sol.u)
    report = fileio.format_report(_forward_report_pairs(p, cfg, sol.report))
    run.add_text("report.txt", report)
    run.finish()
    sys.stdout.write(report)
    return 0


def _cmd_synth(args):
    cfg, text = _load_config(args)
    p = _config_phantom(cfg)
    _log(f"synth: {p.name} at n={cfg.n}, noise={cfg.noise}, "
         f"noiseF={cfg.noiseF}, seed={cfg.seed}")
    res = pipeline.synth_data(p, cfg.n, noise=cfg.noise, noise_f=cfg.noiseF,
                              seed=cfg.seed, spread_tol=cfg.spreadTol)
    run = _Run(args.out, "synth", config_text=text, seed=cfg.seed)
    run.add_field("mask.wlgf", res.mask)
    run.add_field("a.wlgf", res.a)
    run.add_field("f.wlgf", res.f)
    seed_a, seed_f = pipeline.synth_seeds(cfg.seed)
    pairs = [
        ("phantom", p.name),
        ("n", cfg.n),
        ("noise", cfg.noise),
        ("noiseF", cfg.noiseF),
        ("seed", cfg.seed),
        ("seedA", seed_a),
        ("seedF", seed_f),
        ("weightSource", "analytic" if res.fwd is None else "forward"),
    ]
    report = fileio.format_report(pairs)
    run.add_text("report.txt", report)
    run.finish()
    sys.stdout.write(report)
    return 0


def _read_data_triplet(a_path, f_path, mask_path):
    mask = fileio.read_field(mask_path)
    if not isinstance(mask, Mask):
        raise FormatError(f"{mask_path}: expected a mask file")
    a = fileio.read_field(a_path, mask=mask)
    f = fileio.read_field(f_path, mask=mask)
    return a, f, mask


def _solve_report_pairs(rep, refine):
    return [
        ("primal", rep.primal_value),
        ("dual", rep.dual_value),
        ("gap", rep.gap),
        ("gapRelative", rep.gap_relative),
        ("iterations", rep.iterations),
        ("converged", rep.converged),
        ("preClampViolationFraction", rep.pre_clamp_violation_fraction),
        ("init", rep.init),
        ("tau", rep.tau),
        ("sigmaStep", rep.sigma_step),
        ("theta", rep.theta),
        ("refine", refine),
    ]


def _cmd_reconstruct(args):
    cfg, text = _load_config(args)
    solver = fileio.solver_config_from(cfg)

    file_driven = args.data is not None or args.a is not None
    if file_driven and cfg.phantom is not None:
        raise FormatError("give either file data or a phantom in the config, not both")

    t0 = time.perf_counter()
    if file_driven:
        if cfg.refine != 1:
            raise FormatError("refine > 1 needs phantom-driven data "
                              "(the fine grid must be synthesized)")
        if args.data is not None:
            a_path = os.path.join(args.data, "a.wlgf")
            f_path = os.path.join(args.data, "f.wlgf")
            mask_path = os.path.join(args.data, "mask.wlgf")
        else:
            if args.f is None or args.mask is None:
                raise FormatError("--a requires --f and --mask")
            a_path, f_path, mask_path = args.a, args.f, args.mask
        a, f, mask = _read_data_triplet(a_path, f_path, mask_path)
        _log(f"reconstruct: file data {a_path} on {mask.grid.nx}x{mask.grid.ny}")
        res = pipeline.reconstruct_data(a, f, solver)
    else:
        p = _config_phantom(cfg)
        _log(f"reconstruct: {p.name} at n={cfg.n}, refine={cfg.refine}, "
             f"noise={cfg.noise}, init={cfg.init}")
        res = pipeline.reconstruct_phantom(
            p, cfg.n, solver, refine=cfg.refine, noise=cfg.noise,
            noise_f=cfg.noiseF, seed=cfg.seed, spread_tol=cfg.spreadTol,
        )
    _log(f"reconstruction took {time.perf_counter() - t0:.2f} s "
         f"({res.report.iterations} iterations, gapRelative "
         f"{res.report.gap_relative:.3e})")

    run = _Run(args.out, "reconstruct", config_text=text, seed=cfg.seed)
    run.add_field("mask.wlgf", res.mask)
    run.add_field("a.wlgf", res.a)
    run.add_field("f.wlgf", res.f)
    run.add_field("u_rec.wlgf", res.u)
    run.add_field("b.wlgf", res.solve_b)
    run.add_image("u_rec.pgm", res.u)
    if res.refine > 1:
        run.add_field("solve_mask.wlgf", res.solve_mask)
        run.add_field("solve_a.wlgf", res.solve_a)
        run.add_field("solve_f.wlgf", res.solve_f)
        run.add_field("solve_u.wlgf", res.solve_u)
    report = fileio.format_report(_solve_report_pairs(res.report, res.refine))
    run.add_text("report.txt", report)
    run.finish()
    sys.stdout.write(report)
    return 0


def _certify_tol(args):
    base = TolSpec()
    return TolSpec(
        gap_relative=args.gap_tol if args.gap_tol is not None else base.gap_relative,
        dual_infeasibility=(args.infeas_tol if args.infeas_tol is not None
                            else base.dual_infeasibility),
        divergence_relative=(args.div_tol if args.div_tol is not None
                             else base.divergence_relative),
        alignment_fraction=(args.align_frac if args.align_frac is not None
                            else base.alignment_fraction),
        angle_degrees=(args.angle_deg if args.angle_deg is not None
                       else base.angle_degrees),
    )


def _cmd_certify(args):
    mask = fileio.read_field(args.mask)
    u = fileio.read_field(args.u, mask=mask)
    b = fileio.read_field(args.b, mask=mask)
    a = fileio.read_field(args.a, mask=mask)
    f = fileio.read_field(args.f, mask=mask)
    cert = certify(u, b, a, f, tol=_certify_tol(args))
    text = cert.to_text()
    sys.stdout.write(text)
    if args.out is not None:
        run = _Run(args.out, "certify")
        run.add_text("certificate.txt", text)
        run.finish()
    failures = cert.failures()
    if failures:
        _log("certificate FAILED: " + ", ".join(failures))
        return 1
    _log("certificate passed")
    return 0


def _cmd_analyze(args):
    mask = fileio.read_field(args.mask)
    u = fileio.read_field(args.u, mask=mask)
    a = fileio.read_field(args.a, mask=mask)
    u_ref = u if args.ref is None else fileio.read_field(args.ref, mask=mask)

    diag = levelsets.admissibility_diagnostics(u, a, delta0=args.delta0,
                                               eps_g=args.eps_g)
    half_width = 4.0 * u.grid.h * levelsets.lipschitz_estimate(u)
    zint = levelsets.z_intervals(diag.plateau_values, half_width)
    levels = levelsets.audit_levels(u, args.levels, exclude=zint)
    audit = levelsets.boundary_intersection_audit(u, levels)
    check = levelsets.level_boundary_value_check(u_ref, u, levels, exclude=zint)

    run = _Run(args.out, "analyze")
    run.add_csv("audit.csv", fileio.write_audit_csv, audit)
    run.add_csv("valuecheck.csv", fileio.write_value_check_csv, check)
    pairs = [
        ("levels", len(levels)),
        ("auditFailures", audit.failure_count),
        ("valueCheckMaxSpread", check.max_spread),
        ("zeroSetNodes", diag.zero_set_count),
        ("zeroSetComponents", diag.zero_set_components),
        ("degenerateNodes", diag.degenerate_count),
        ("degenerateComponents", diag.degenerate_components),
        ("plateauValues", ",".join(repr(c) for c in diag.plateau_values)),
        ("plateauMeasure", diag.plateau_measure),
        ("weightJumpMax", diag.weight_jump_max),
        ("delta0", diag.delta0),
        ("epsG", diag.eps_g),
    ]
    if args.recover_sigma:
        sigma_hat, determined = phantoms.recover_sigma(
            u, a, eps_g=args.eps_g, delta=args.delta0, window=args.window
        )
        run.add_field("sigma_hat.wlgf", sigma_hat)
        run.add_image("sigma_hat.pgm", sigma_hat)
        pairs.append(("determinedNodes", int(determined.sum())))
    report = fileio.format_report(pairs)
    run.add_text("admissibility.txt", report)
    run.finish()
    sys.stdout.write(report)
    _log(f"analyze: {audit.failure_count} audit failures over {len(levels)} levels")
    return 1 if audit.failure_count else 0


_INIT_SET = ("ZERO", "BOUNDARY_HARMONIC", "RANDOM:1", "RANDOM:2", "RANDOM:3")


def _cmd_uniqtest(args):
    cfg, text = _load_config(args)
    p = _config_phantom(cfg)
    init_names = tuple(s.strip() for s in args.inits.split(",")) if args.inits else _INIT_SET
    if len(init_names) < 2:
        raise FormatError("uniqtest needs at least two initializations")

    synth = pipeline.synth_data(p, cfg.n, noise=cfg.noise, noise_f=cfg.noiseF,
                                seed=cfg.seed, spread_tol=cfg.spreadTol)
    mf, Mf = boundary_range(synth.f)
    area = synth.mask.area()
    tol = args.tol if args.tol is not None else 1e-2 * area * (Mf - mf)
    delta = cfg.delta0 if cfg.delta0 is not None else 1e-3 * float(synth.a.values.max())
    region = synth.a.values > delta

    run = _Run(args.out, "uniqtest", config_text=text, seed=cfg.seed)
    run.add_field("mask.wlgf", synth.mask)
    base_solver = fileio.solver_config_from(cfg)
    solutions = []
    for name in init_names:
        solver = dataclasses.replace(base_solver, init=fileio.parse_init(name))
        _log(f"uniqtest: solving from {name}")
        t0 = time.perf_counter()
        res = pipeline.reconstruct_data(synth.a, synth.f, solver)
        _log(f"  {res.report.iterations} iterations in "
             f"{time.perf_counter() - t0:.2f} s, gapRelative "
             f"{res.report.gap_relative:.3e}")
        solutions.append(res.u)
        safe = name.lower().replace(":", "_")
        run.add_field(f"u_{safe}.wlgf", res.u)

    distances = {}
    worst = 0.0
    for i in range(len(solutions)):
        for j in range(i + 1, len(solutions)):
            d = l1_distance(solutions[i], solutions[j], where=region)
            distances[(i, j)] = d
            worst = max(worst, d)
    run.add_csv("pairwise.csv", fileio.write_pairwise_csv, init_names, distances)

    passed = worst <= tol
    pairs = [
        ("phantom", p.name),
        ("n", cfg.n),
        ("inits", ",".join(init_names)),
        ("worstPairwiseL1", worst),
        ("tolerance", tol),
        ("pass", passed),
    ]
    report = fileio.format_report(pairs)
    run.add_text("report.txt", report)
    run.finish()
    sys.stdout.write(report)
    if not passed:
        _log(f"uniqtest FAILED: worst pairwise L1 {worst:.3e} > {tol:.3e}")
        return 1
    _log("uniqtest passed")
    return 0


def _cmd_oracle(args):
    p = phantoms.get_phantom(args.phantom)
    if p.closed_form is None:
        raise FormatError(f"phantom {p.name!r} has no closed-form voltage")
    grid = p.build_grid(args.n)
    mask = p.build_mask(grid)
    truth = p.closed_form_field(grid, mask)

    if args.out is not None:
        run = _Run(args.out, "oracle")
        run.add_field("mask.wlgf", mask)
        run.add_field("u_true.wlgf", truth)
        run.add_image("u_true.pgm", truth)
        run.finish()

    if args.compare is None:
        return 0

    mask_path = args.mask
    if mask_path is None:
        mask_path = os.path.join(os.path.dirname(args.compare) or ".", "mask.wlgf")
    cand_mask = fileio.read_field(mask_path)
    candidate = fileio.read_field(args.compare, mask=cand_mask)
    if cand_mask.grid != grid:
        raise FormatError(
            f"{args.compare}: grid does not match the {args.n}-node oracle grid"
        )
    region = phantoms.compare_region(p, grid, mask)
    linf = linf_error(candidate, truth, where=region)
    rel_l2 = l2_rel_error(candidate, truth, where=region)
    sys.stdout.write(fileio.format_report([("linf", linf), ("relL2", rel_l2)]))

    ok = linf <= args.linf_tol
    if args.l2_tol is not None:
        ok = ok and rel_l2 <= args.l2_tol
    if not ok:
        _log(f"oracle comparison FAILED: linf {linf:.3e} (tol {args.linf_tol:.3e})"
             + (f", relL2 {rel_l2:.3e} (tol {args.l2_tol:.3e})"
                if args.l2_tol is not None else ""))
        return 1
    _log("oracle comparison passed")
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="cdii",
        description="conductivity imaging from one current-density magnitude",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("--config", required=True, help="run configuration file")
        p.add_argument("--out", required=True, help="output directory")

    p_forward = sub.add_parser("forward", help="solve the conductivity equation")
    with_config(p_forward)
    p_forward.set_defaults(func=_cmd_forward)

    p_synth = sub.add_parser("synth", help="synthesize (noisy) reconstruction data")
    with_config(p_synth)
    p_synth.set_defaults(func=_cmd_synth)

    p_rec = sub.add_parser("reconstruct", help="weighted least-gradient reconstruction")
    with_config(p_rec)
    p_rec.add_argument("--data", help="directory with a.wlgf, f.wlgf, mask.wlgf")
    p_rec.add_argument("--a", help="interior datum field file")
    p_rec.add_argument("--f", help="boundary datum field file")
    p_rec.add_argument("--mask", help="domain mask field file")
    p_rec.set_defaults(func=_cmd_reconstruct)

    p_cert = sub.add_parser("certify", help="certificate for a (u, b) pair")
    p_cert.add_argument("--u", required=True)
    p_cert.add_argument("--b", required=True)
    p_cert.add_argument("--a", required=True)
    p_cert.add_argument("--f", required=True)
    p_cert.add_argument("--mask", required=True)
    p_cert.add_argument("--out")
    p_cert.add_argument("--gap-tol", type=float)
    p_cert.add_argument("--infeas-tol", type=float)
    p_cert.add_argument("--div-tol", type=float)
    p_cert.add_argument("--align-frac", type=float)
    p_cert.add_argument("--angle-deg", type=float)
    p_cert.set_defaults(func=_cmd_certify)

    p_an = sub.add_parser("analyze", help="level-set audits and diagnostics")
    p_an.add_argument("--u", required=True)
    p_an.add_argument("--a", required=True)
    p_an.add_argument("--mask", required=True)
    p_an.add_argument("--ref", help="reference field for the value check")
    p_an.add_argument("--levels", type=int, default=20)
    p_an.add_argument("--delta0", type=float)
    p_an.add_argument("--eps-g", type=float)
    p_an.add_argument("--recover-sigma", action="store_true")
    p_an.add_argument("--window", type=int, default=0,
                      help="plane-fit window for conductivity recovery")
    p_an.add_argument("--out", required=True)
    p_an.set_defaults(func=_cmd_analyze)

    p_uniq = sub.add_parser("uniqtest", help="multi-initialization uniqueness test")
    with_config(p_uniq)
    p_uniq.add_argument("--inits", help="comma-separated initialization names")
    p_uniq.add_argument("--tol", type=float,
                        help="pairwise L1 tolerance (default 1e-2*area*range(f))")
    p_uniq.set_defaults(func=_cmd_uniqtest)

    p_or = sub.add_parser("oracle", help="closed-form reference and comparison")
    p_or.add_argument("--phantom", required=True)
    p_or.add_argument("--n", type=int, required=True)
    p_or.add_argument("--out")
    p_or.add_argument("--compare", help="candidate field file to compare")
    p_or.add_argument("--mask", help="mask for the candidate (default: sibling mask.wlgf)")
    p_or.add_argument("--linf-tol", type=float, default=5e-2)
    p_or.add_argument("--l2-tol", type=float)
    p_or.set_defaults(func=_cmd_oracle)

    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FormatError, OSError) as exc:
        _log(f"error: {exc}")
        return 2
    except KeyError as exc:
        _log(f"error: {exc.args[0] if exc.args else exc}")
        return 2
    except ValueError as exc:
        _log(f"error: {exc}")
        return 2
    except NotConvergedError as exc:
        _log(f"error: {exc}")
        return 1
    except forward.NonConvergenceError as exc:
        _log(f"error: forward solve did not converge: {exc}")
        return 1
    except forward.InclusionSpreadError as exc:
        _log(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
