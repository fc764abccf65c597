"""Command-line entry point.

Exit status: 0 on success, 2 on a configuration error, 3 on a trace error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .analytic import binomial_band, chi_square_fit, expected_tier_distribution, monte_carlo_tier_counts
from .config import SimConfig, apply_overrides, format_config, load_config
from .errors import ConfigError, TraceError
from .sim import report, run, sweep
from .trace import gen_pointer_chase, gen_sequential, gen_uniform, gen_zipf, write_trace

EXIT_CONFIG = 2
EXIT_TRACE = 3


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--trace", help="trace file (overrides trace.kind)")
    p.add_argument("--mode", help="native | nested | speculation-off | nested-off | perfect-speculation")
    p.add_argument("--seed", type=int)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key (repeatable)")


def _config_from(args: argparse.Namespace) -> SimConfig:
    cfg = load_config(args.config) if args.config else SimConfig()
    apply_overrides(cfg, args.set)
    if args.trace:
        cfg.trace.kind = "file"
        cfg.trace.path = args.trace
    if args.mode:
        cfg.mode = args.mode
    if args.seed is not None:
        cfg.seed = args.seed
    cfg.validate()
    return cfg


def _write(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_gen_trace(args: argparse.Namespace) -> None:
    if args.kind == "uniform":
        events = gen_uniform(args.pages, args.accesses, args.seed, args.instr)
    elif args.kind == "zipf":
        events = gen_zipf(args.pages, args.accesses, args.zipf_s, args.seed, args.instr)
    elif args.kind == "sequential":
        events = gen_sequential(args.pages, args.accesses, args.instr, lines_per_page=args.lines_per_page)
    else:
        events = gen_pointer_chase(args.pages, args.accesses, args.seed, args.instr)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            write_trace(events, fh)
    else:
        write_trace(events, sys.stdout)


def _cmd_run(args: argparse.Namespace) -> None:
    stats = run(_config_from(args))
    _write(report(stats, args.format), args.out)


def _parse_values(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _cmd_sweep(args: argparse.Namespace) -> None:
    cfg = _config_from(args)
    rows = sweep(cfg, args.axis, _parse_values(args.values), jobs=args.jobs)
    _write(report(rows, args.format), args.out)


def _cmd_analytic(args: argparse.Namespace) -> None:
    expected = expected_tier_distribution(args.p, args.n)
    lines = [f"p = {args.p}, N = {args.n}", f"model success 1 - p^N = {1 - args.p ** args.n:.6f}"]
    if args.trials:
        counts = monte_carlo_tier_counts(args.frames, args.p, args.n, args.trials, args.seed, args.mc_mode)
        emp = counts / counts.sum()
        succ = 1.0 - emp[-1]
        band = binomial_band(1 - args.p ** args.n, args.trials)
        fit = chi_square_fit(emp, expected, args.trials)
        lines.append(f"measured success = {succ:.6f} (3-sigma band +/- {band:.6f})")
        lines.append(f"chi-square = {fit.statistic:.3f}, dof = {fit.dof}, p-value = {fit.p_value:.4f}, "
                     f"{'pass' if fit.passed else 'FAIL'} at alpha = 0.001")
        lines.append("tier      model     measured")
        for i, (e, m) in enumerate(zip(expected, emp), start=1):
            name = str(i) if i <= args.n else "fallback"
            lines.append(f"{name:<8}  {e:.6f}  {m:.6f}")
    else:
        for i, e in enumerate(expected, start=1):
            lines.append(f"{(str(i) if i <= args.n else 'fallback'):<8}  {e:.6f}")
    if args.json:
        print(json.dumps({"p": args.p, "n": args.n, "expected": expected.tolist()}))
    else:
        print("\n".join(lines))


def _cmd_print_config(args: argparse.Namespace) -> None:
    cfg = load_config(args.config) if args.config else SimConfig()
    apply_overrides(cfg, args.set)
    cfg.validate()
    sys.stdout.write(format_config(cfg))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spectrans", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-trace", help="write a synthetic trace")
    g.add_argument("--kind", choices=("uniform", "zipf", "sequential", "pointer-chase"), default="uniform")
    g.add_argument("--pages", type=int, default=16384)
    g.add_argument("--accesses", type=int, default=100_000)
    g.add_argument("--seed", type=int, default=1)
    g.add_argument("--instr", type=int, default=10)
    g.add_argument("--zipf-s", type=float, default=1.0)
    g.add_argument("--lines-per-page", type=int, default=1, help="lines read per page visit (sequential only)")
    g.add_argument("--out")
    g.set_defaults(func=_cmd_gen_trace)

    r = sub.add_parser("run", help="simulate one configuration")
    _add_config_args(r)
    r.add_argument("--format", choices=("human", "csv", "json-lines"), default="human")
    r.add_argument("--out", help="write the report here instead of stdout")
    r.set_defaults(func=_cmd_run)

    s = sub.add_parser("sweep", help="simulate one configuration per axis value")
    _add_config_args(s)
    s.add_argument("--axis", required=True, help="pressure | n_max | bandwidth | any config key")
    s.add_argument("--values", required=True, help="comma-separated axis values")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--format", choices=("csv", "json-lines", "human"), default="csv")
    s.add_argument("--out")
    s.set_defaults(func=_cmd_sweep)

    a = sub.add_parser("analytic", help="closed-form allocation model, optionally vs Monte-Carlo")
    a.add_argument("--p", type=float, required=True)
    a.add_argument("--n", type=int, required=True)
    a.add_argument("--trials", type=int, default=0)
    a.add_argument("--frames", type=int, default=1 << 20)
    a.add_argument("--seed", type=int, default=1)
    a.add_argument("--mc-mode", choices=("fresh", "sequential"), default="fresh")
    a.add_argument("--json", action="store_true")
    a.set_defaults(func=_cmd_analytic)

    pc = sub.add_parser("print-config", help="print the effective configuration")
    pc.add_argument("--config")
    pc.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    pc.set_defaults(func=_cmd_print_config)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TraceError, OSError) as exc:
        print(f"trace error: {exc}", file=sys.stderr)
        return EXIT_TRACE
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
