"""Command line entry point.

Exit status: 0 on success, 1 for usage or configuration errors, 2 for
failures while computing (instability, missing data, I/O).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import analysis, config as cfgmod, io, montecarlo, option, pde
from ._accel import backend_name
from .errors import CarbonStackError, ConfigError

log = logging.getLogger("carbonstack")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _level_list(text):
    """``1..4`` or ``1,2,3``."""
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            return list(range(int(a), int(b) + 1))
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected levels like 1..4 or 1,2,3, got {text!r}") from None


def build_parser():
    p = _Parser(prog="carbonstack", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    common = _Parser(add_help=False)
    common.add_argument("-c", "--config", help="TOML or JSON configuration (default: bundled reference)")
    common.add_argument("-o", "--out", default="out", help="output directory (default: out)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("price-allowance", parents=[common], help="single-period allowance surface")
    a.add_argument("--penalty", type=float, help="override [scheme].penalty")
    a.add_argument("--times", type=_float_list, help="times to export (default: 0, T/2, T)")

    b = sub.add_parser("price-allowance-2p", parents=[common], help="two-period allowance surface")
    b.add_argument("--mechanism", choices=["bw", "bbw"], help="override [scheme].mechanism")
    b.add_argument("--times", type=_float_list, help="first-period times to export")

    c = sub.add_parser("price-call", parents=[common], help="European call on the allowance")
    c.add_argument("--strike", type=float, help="override [option].strike")
    c.add_argument("--maturity", type=float, help="override [option].maturity (years)")

    d = sub.add_parser("simulate-emissions", parents=[common], help="Monte Carlo penalty sweep")
    d.add_argument("--penalties", type=_float_list, help="comma-separated penalties")
    d.add_argument("--paths", type=int, help="override [mc].n_paths")
    d.add_argument("--seed", type=int, help="override [mc].seed")

    e = sub.add_parser("convergence", parents=[common], help="grid refinement study")
    e.add_argument("--levels", type=_level_list, help="refinement levels, e.g. 1..4")

    sub.add_parser("validate-config", parents=[common], help="check and echo the configuration")
    return p


def _default_times(horizon):
    return [0.0, horizon / 2, horizon]


def _levels_for(grid, times):
    return sorted({pde.level_at_or_below(grid, t) for t in times})


def cmd_price_allowance(args, cfg):
    scheme = cfg.scheme if args.penalty is None else cfg.scheme.with_penalty(args.penalty)
    grid, scheme = cfg.build_grid(scheme)
    times = args.times or _default_times(grid.horizon)
    keep = _levels_for(grid, times)
    s = pde.solve_single_period(scheme, cfg.demand, cfg.stack, grid, levels=keep,
                                n_a=cfg.grid.price_levels, cfl=cfg.grid.cfl)
    files = io.export_surfaces(args.out, "allowance", s, keep, cfg.to_dict())
    return {"outputs": [str(f) for f in files], "levels": keep}


def cmd_price_allowance_2p(args, cfg):
    if args.mechanism:
        cfg = replace(cfg, two_period=replace(cfg.two_period, mechanism=args.mechanism))
    grid, tp = cfg.build_two_period_grid()
    times = args.times or _default_times(grid.horizon)
    keep = _levels_for(grid, times)
    sol = pde.solve_two_period(tp, cfg.demand, cfg.stack, grid, levels=keep,
                               n_a=cfg.grid.price_levels, cfl=cfg.grid.cfl)
    files = list(io.export_surfaces(args.out, "alpha1", sol.alpha1, keep, cfg.to_dict(),
                                    {"mechanism": tp.mechanism.value}))
    path = Path(args.out) / "alpha2_start.csv"
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("E1,D,E,value\n")
        e = grid.e_nodes
        d = grid.d_nodes
        for s_ in range(grid.n_e + 1):
            for i in range(grid.n_d + 1):
                for j in range(grid.n_e + 1):
                    fh.write(f"{io._fmt(e[s_])},{io._fmt(d[i])},{io._fmt(e[j])},"
                             f"{io._fmt(sol.alpha2_start[s_, i, j])}\n")
    files.append(path)
    return {"outputs": [str(f) for f in files], "levels": keep, "mechanism": tp.mechanism.value}


def cmd_price_call(args, cfg):
    grid, scheme = cfg.build_grid()
    strike = cfg.option.strike if args.strike is None else args.strike
    maturity = cfg.option_maturity() if args.maturity is None else args.maturity
    spec = option.OptionSpec(maturity=maturity, strike=strike)
    spec.validate(scheme.horizon)
    k_tau = grid.time_index(maturity, "maturity")
    alpha = pde.solve_single_period(scheme, cfg.demand, cfg.stack, grid, levels=range(k_tau + 1),
                                    n_a=cfg.grid.price_levels, cfl=cfg.grid.cfl)
    v = option.solve_call(spec, alpha, scheme, cfg.demand, cfg.stack,
                          n_a=cfg.grid.price_levels, cfl=cfg.grid.cfl,
                          levels=sorted({0, k_tau // 2, k_tau}))
    keep = sorted({0, k_tau // 2, k_tau})
    files = io.export_surfaces(args.out, "call", v, keep, cfg.to_dict(),
                               {"strike": strike, "maturity": maturity})
    price = pde.evaluate(v, 0.0, cfg.demand.d0, 0.0)
    return {"outputs": [str(f) for f in files], "price_at_d0": price}


def cmd_simulate(args, cfg):
    mc = cfg.mc
    penalties = args.penalties if args.penalties is not None else list(mc.penalties)
    if any(p < 0 for p in penalties):
        raise ConfigError("penalties must be >= 0")
    n_paths = mc.n_paths if args.paths is None else args.paths
    seed = mc.seed if args.seed is None else args.seed
    try:
        pc = montecarlo.PathConfig(n_paths=n_paths, n_steps=mc.n_steps, seed=seed,
                                   d0=cfg.demand.d0, batch_size=mc.batch_size)
    except CarbonStackError as exc:
        raise ConfigError(str(exc)) from None
    grid, scheme = cfg.build_grid()
    results = []
    for pi in penalties:
        s = scheme.with_penalty(pi)
        alpha = montecarlo.solve_for_simulation(s, cfg.demand, cfg.stack, grid, pc.n_steps,
                                                n_a=cfg.grid.price_levels, cfl=cfg.grid.cfl)
        r = montecarlo.simulate(pc, cfg.demand, cfg.stack, s, alpha, n_a=mc.price_levels,
                                n_demand_cells=mc.demand_cells)
        log.info("penalty %g: mean %.6g, std error %.4g", pi, r.mean_emissions, r.std_error)
        results.append(r)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv = io.write_mc_csv(out / "emissions.csv", results)
    summary = {
        "seed": seed, "n_paths": n_paths, "n_steps": pc.n_steps, "backend": backend_name(),
        "grid": io.grid_metadata(grid),
        "results": [{"penalty": r.penalty, "mean": r.mean_emissions, "std_error": r.std_error}
                    for r in results],
        "config": cfg.to_dict(),
    }
    js = io.write_json(out / "emissions.json", summary)
    return {"outputs": [str(csv), str(js)],
            "results": summary["results"]}


def cmd_convergence(args, cfg):
    labels = args.levels or list(cfg.analysis.levels)
    levels = analysis.table5_levels(labels)
    if len(levels) < 2:
        raise ConfigError("convergence needs at least two levels")
    rep = analysis.refinement_study(
        levels, cfg.scheme, cfg.demand, cfg.stack, alignment=cfg.grid.cap_alignment,
        cfl=cfg.analysis.cfl, n_a=cfg.grid.price_levels,
        progress=lambda lv, sec: log.info("level %d solved in %.2fs", lv.label, sec))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    payload = {**rep.to_dict(), "backend": backend_name(), "config": cfg.to_dict()}
    payload.pop("seconds")
    js = io.write_json(out / "convergence.json", payload)
    csv = out / "convergence.csv"
    with csv.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("coarse_level,fine_level,delta_e,err_inf,err_one\n")
        for n, (ei, e1) in enumerate(zip(rep.err_inf, rep.err_one)):
            fh.write(f"{levels[n].label},{levels[n + 1].label},{io._fmt(rep.widths[n])},"
                     f"{io._fmt(ei)},{io._fmt(e1)}\n")
    return {"outputs": [str(js), str(csv)], **{k: payload[k] for k in ("err_inf", "err_one", "rate_inf")}}


def cmd_validate(args, cfg):
    return {"valid": True}


COMMANDS = {
    "price-allowance": cmd_price_allowance,
    "price-allowance-2p": cmd_price_allowance_2p,
    "price-call": cmd_price_call,
    "simulate-emissions": cmd_simulate,
    "convergence": cmd_convergence,
    "validate-config": cmd_validate,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = cfgmod.load(args.config)
        result = COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CarbonStackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    echo = {"command": args.command, "config": cfg.to_dict(), **result}
    print(json.dumps(io._clean(echo), indent=2))
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

