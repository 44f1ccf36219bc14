"""``unbiot`` command line.

Exit codes: 0 success, 2 configuration error, 3 failed validation check,
64 usage error. The default output directory is ``$UNBIOT_OUT_DIR`` or the
working directory.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import experiments as ex
from .analytic import CapacityQuery, UnsupportedCombination, capacity_closed_form, capacity_numeric, \
    success_probability
from .model import (Association, ConfigError, Protocol, ProtocolSpec, Scheme, db_to_linear,
                    dump_config, load_config, preset_area_m2, table2_path, validate_config)
from .sim import InterferenceField, Mode, SimOptions, UnsupportedFidelity, estimate_success_probability

EXIT_OK, EXIT_CONFIG, EXIT_VALIDATION, EXIT_USAGE = 0, 2, 3, 64
OUT_ENV = "UNBIOT_OUT_DIR"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _resolve_config(name: str) -> Path:
    p = Path(name)
    if p.is_file():
        return p
    if name in ("table2", "table2.cfg"):
        return table2_path()
    raise ConfigError([("NoConfig", f"config file {name!r} not found")])


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", default="table2", help="config file, or 'table2' for the bundled preset")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key (densities per km^2); repeatable")
    p.add_argument("--dump-config", action="store_true", help="print the effective config and exit")
    p.add_argument("--seed", type=int, default=1, help="master seed")
    p.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or .)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for Monte-Carlo runs")


def _protocol(p: argparse.ArgumentParser, multi: bool = False):
    kinds = [k.value for k in Protocol]
    if multi:
        p.add_argument("--protocol", action="append", choices=kinds, help="repeatable")
    else:
        p.add_argument("--protocol", choices=kinds, default="benchmark")
    p.add_argument("--scheme", choices=[s.value for s in Scheme], default="random")
    p.add_argument("--assoc", choices=[a.value for a in Association], default="none")


def _mc(p: argparse.ArgumentParser):
    p.add_argument("--realizations", type=int, default=10_000)
    p.add_argument("--mode", choices=[m.value for m in Mode], default="thinned")
    p.add_argument("--interference", choices=[f.value for f in InterferenceField], default="shared")
    p.add_argument("--torus-km", type=float, default=None, help="torus side in km")
    p.add_argument("--noise", action="store_true", help="include thermal noise")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="unbiot", description="UNB IoT access protocol analysis and simulation")
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    a = sub.add_parser("analytic", help="closed-form success probability")
    _common(a)
    _protocol(a)
    a.add_argument("--tau-db", type=float, default=None)

    s = sub.add_parser("simulate", help="Monte-Carlo success probability with 95%% CI")
    _common(s)
    _protocol(s)
    _mc(s)
    s.add_argument("--tau-db", type=float, default=None)

    c = sub.add_parser("capacity", help="supported IoT devices at a success constraint")
    _common(c)
    _protocol(c)
    c.add_argument("--gamma", type=float, default=0.8)
    c.add_argument("--tau-db", type=float, default=None)
    c.add_argument("--area-km2", type=float, default=preset_area_m2() / 1e6)
    c.add_argument("--closed-form", action="store_true", help="use the closed form instead of inversion")

    w = sub.add_parser("sweep", help="sweep one parameter and write CSV + SVG")
    _common(w)
    _protocol(w, multi=True)
    _mc(w)
    w.add_argument("--param", required=True, help="config key, tau_db, kind, scheme or association")
    w.add_argument("--grid", required=True, help="comma-separated values")
    w.add_argument("--engine", choices=ex.ENGINES, default="analytic")
    w.add_argument("--name", default="sweep", help="output file stem")

    r = sub.add_parser("reproduce", help="regenerate a figure preset (CSV + SVG)")
    _common(r)
    _mc(r)
    r.add_argument("figure", choices=ex.FIGURES + ("all",))
    r.add_argument("--engine", choices=("analytic", "both"), default=None)

    v = sub.add_parser("validate", help="run the built-in property suite")
    _common(v)
    v.add_argument("--quick", action="store_true", help="small Monte-Carlo workloads")
    return ap


def _config(args):
    cfg = load_config(_resolve_config(args.config), args.override)
    if getattr(args, "tau_db", None) is not None:
        cfg = cfg.with_(tau=db_to_linear(args.tau_db))
    return cfg


def _spec(args) -> ProtocolSpec:
    return ProtocolSpec(Protocol(args.protocol), Scheme(args.scheme), Association(args.assoc))


def _opts(args) -> SimOptions:
    return SimOptions(mode=Mode(args.mode), realizations=args.realizations, master_seed=args.seed,
                      include_noise=args.noise, interference=InterferenceField(args.interference),
                      torus_side_m=None if args.torus_km is None else args.torus_km * 1e3)


def _out_dir(args) -> Path:
    d = Path(args.out or os.environ.get(OUT_ENV) or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _grid(param: str, text: str) -> tuple:
    items = [t.strip() for t in text.split(",") if t.strip()]
    if param in ("kind", "scheme", "association"):
        return tuple(items)
    try:
        return tuple(float(t) for t in items)
    except ValueError:
        raise UsageError(f"--grid values for {param} must be numbers") from None


def _run(args) -> int:
    if args.cmd == "validate":
        from . import validation
        results = validation.run_checks(quick=args.quick, seed=args.seed, jobs=args.jobs)
        for c in results:
            print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}")
        return EXIT_OK if all(c.passed for c in results) else EXIT_VALIDATION

    cfg = _config(args)
    if args.dump_config:
        sys.stdout.write(dump_config(cfg))
        return EXIT_OK

    if args.cmd == "analytic":
        spec = _spec(args)
        cfg = ex.config_for(cfg, spec)
        print(f"{success_probability(cfg, spec):.10g}")
    elif args.cmd == "simulate":
        spec = _spec(args)
        cfg = ex.config_for(cfg, spec)
        validate_config(cfg, spec)
        est = estimate_success_probability(cfg, spec, _opts(args), jobs=args.jobs)
        print(f"{est.value:.6f} +/- {est.ci_half:.6f} (95% Wilson, {est.successes}/{est.realizations})")
    elif args.cmd == "capacity":
        spec = _spec(args)
        cfg = ex.config_for(cfg, spec)
        q = CapacityQuery(args.gamma, spec)
        if args.closed_form:
            density, reachable = capacity_closed_form(cfg, q), True
        else:
            density, reachable = capacity_numeric(cfg, q)
        print(f"{density * args.area_km2 * 1e6:.6g}" + ("" if reachable else " (constraint unreachable)"))
    elif args.cmd == "sweep":
        kinds = args.protocol or ["benchmark"]
        specs = tuple(ProtocolSpec(Protocol(k), Scheme(args.scheme), Association(args.assoc)) for k in kinds)
        out = _out_dir(args)
        sw = ex.SweepSpec(cfg, args.param, _grid(args.param, args.grid), specs, args.engine, _opts(args),
                          str(out / f"{args.name}.csv"))
        res = ex.run_sweep(sw, jobs=args.jobs)
        ok = [r for r in res.rows if r.value is not None]
        if all(isinstance(r.param, float) for r in ok):
            ex._svg(out / f"{args.name}.svg", args.name, args.param, "success probability", ex._series(ok))
        print(out / f"{args.name}.csv")
        errors = [r for r in res.rows if r.error]
        for r in errors:
            print(f"error at {args.param}={r.param} {r.protocol}: {r.error}", file=sys.stderr)
    elif args.cmd == "reproduce":
        out = _out_dir(args)
        figs = ex.FIGURES if args.figure == "all" else (args.figure,)
        for fig in figs:
            for p in ex.reproduce_figure(fig, out, cfg, _opts(args), args.jobs, args.engine):
                print(p)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "jobs", 1) < 1:
            raise UsageError("--jobs must be >= 1")
        return _run(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, UnsupportedCombination, UnsupportedFidelity, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
