"""``turbodyn`` command line.

Settings come from built-in defaults, then an optional ``--config`` file of
``key = value`` lines, then ``--set key=value`` flags and the dedicated
options below.  Failures exit with status 1 and print one line
``error: <ExceptionType>: <message>`` to stderr.
"""

from __future__ import annotations

import argparse
import sys

from . import io as tio
from . import experiments as ex


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
    p.add_argument("--out", dest="output_dir", help="output directory")
    p.add_argument("--workers", type=int)
    p.add_argument("--seed", dest="master_seed", type=int, help="master seed")
    p.add_argument("--k", type=int)
    p.add_argument("--svg", action="store_true", default=None, help="also render SVG plots")


def _config(args) -> ex.ExperimentConfig:
    values: dict[str, object] = {}
    if args.config:
        values.update(tio.load_config_file(args.config))
    for item in args.set:
        key, sep, val = item.partition("=")
        if not sep:
            raise ValueError(f"--set expects KEY=VALUE, got {item!r}")
        values[key.strip()] = val.strip()
    for key in ("output_dir", "workers", "master_seed", "k", "svg", "gamma_db", "block_count", "grid", "realization_seed"):
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    if "grid" in values and isinstance(values["grid"], str):
        values["grid"] = ex.parse_grid(values["grid"])
    return ex.build_config(values)


def _print_mapping(m) -> None:
    for key, val in m.items():
        print(f"{key} = {tio.fmt(val)}")


def cmd_simulate(args) -> None:
    cfg = _config(args)
    _print_mapping(ex.cmd_simulate(cfg))


def cmd_stopping_eval(args) -> None:
    cfg = _config(args)
    _print_mapping(ex.cmd_stopping_eval(cfg))


def cmd_sweep(args) -> None:
    cfg = _config(args)
    res = ex.cmd_sweep(cfg)
    low, mid, high = res.regions()
    for p in res.points:
        print(f"{p.gamma_db:.4f} {p.label.tag} errors={p.errors_at_cap}")
    print(f"gamma1_hat = {tio.fmt(res.gamma1_hat)}")
    print(f"gamma2_hat = {tio.fmt(res.gamma2_hat)}")
    print(f"regions = {len(low)}/{len(mid)}/{len(high)}")


def cmd_trace(args) -> None:
    cfg = _config(args)
    trace, label = ex.cmd_trace(cfg)
    print(f"label = {label.tag} ({label.describe()})")
    print(f"transient_length = {label.transient_length}")
    print(f"errors_at_cap = {trace.stats[-1].errors}")


def cmd_oracle_check(args) -> None:
    worst = ex.oracle_check(args.k, args.trials, args.seed)
    print(f"k = {args.k}")
    print(f"trials = {args.trials}")
    print(f"max_abs_deviation = {worst!r}")
    if worst > args.tol:
        raise RuntimeError(f"BCJR deviates from the MAP oracle by {worst:.3e} > {args.tol:.1e}")


def cmd_defaults(args) -> None:
    sys.stdout.write(ex.defaults_text())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="turbodyn", description="Turbo decoder dynamics and Z-crease stopping workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Monte-Carlo decode of independent blocks")
    _add_common(p)
    p.add_argument("--gamma", dest="gamma_db", type=float)
    p.add_argument("--blocks", dest="block_count", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("stopping-eval", help="stopping policy vs fixed cap vs genie")
    _add_common(p)
    p.add_argument("--gamma", dest="gamma_db", type=float)
    p.add_argument("--blocks", dest="block_count", type=int)
    p.set_defaults(func=cmd_stopping_eval)

    p = sub.add_parser("sweep", help="bifurcation sweep over an SNR grid for one noise realization")
    _add_common(p)
    p.add_argument("--grid", help="lo:hi:step or comma list, in dB")
    p.add_argument("--realization", dest="realization_seed", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("trace", help="wave and phase data for one block")
    _add_common(p)
    p.add_argument("--gamma", dest="gamma_db", type=float)
    p.add_argument("--realization", dest="realization_seed", type=int)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("oracle-check", help="compare BCJR with exhaustive MAP on small blocks")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("defaults", help="print every config key with its default")
    p.set_defaults(func=cmd_defaults)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except Exception as exc:  # one machine-parseable line, no traceback
        msg = str(exc).replace("\n", " ")
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
