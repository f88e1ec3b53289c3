"""Command-line entry point: ``aictrack {run,sweep,gradcheck,surface,vsm}``."""
import argparse
import sys

import numpy as np

from . import harness
from .aic import run_episode
from .config import PRESETS, ScenarioSet, parse_config
from .critic import CriticNet, QuadraticBasis
from .errors import ConfigError, DivergenceError

# flag -> RunConfig field
_CONFIG_FLAGS = {
    "benchmark": str, "preset": str, "dt": float, "horizon": float,
    "gamma_s": float, "gamma_c": float, "gamma_belief_c": float,
    "h_i": int, "h_a": int, "eta_i1": float, "eta_i2": float, "eta_c": float,
    "eta_a1": float, "eta_a2": float, "rho": float, "q": str, "r": str, "a_c": str,
    "seed": int, "offset": str, "settle_band": float, "init_identifier": float,
    "init_actor": float, "critic_init": str, "clamp": float,
}
_RENAME = {"gamma_s": "gamma_bar_s", "gamma_c": "gamma_bar_c"}


def _add_config_flags(p):
    g = p.add_argument_group("configuration (flags override --config, which overrides the preset)")
    g.add_argument("--config", metavar="FILE", help="INI file with a [run] section")
    for name, typ in _CONFIG_FLAGS.items():
        flag = "--" + name.replace("_", "-")
        kw = {"type": typ, "default": None}
        if name == "benchmark":
            kw["choices"] = ("simo", "mimo", "vsm")
        elif name == "preset":
            kw["choices"] = tuple(PRESETS) + ("custom",)
        elif typ is str and name not in ("critic_init",):
            kw["metavar"] = "V1,V2"
        g.add_argument(flag, **kw)
    g.add_argument("--eta-a", type=float, default=None, help="set both actor learning rates")
    g.add_argument("--eta-i", type=float, default=None, help="set both identifier learning rates")
    g.add_argument("--allow-unstable", action="store_true", help="accept eta_c outside (0, 2)")


def _config_from_args(args, default_benchmark=None):
    flags = {}
    for name in _CONFIG_FLAGS:
        v = getattr(args, name, None)
        if v is not None:
            flags[_RENAME.get(name, name)] = v
    if args.eta_a is not None:
        flags.setdefault("eta_a1", args.eta_a)
        flags.setdefault("eta_a2", args.eta_a)
    if args.eta_i is not None:
        flags.setdefault("eta_i1", args.eta_i)
        flags.setdefault("eta_i2", args.eta_i)
    if args.allow_unstable:
        flags["allow_unstable"] = "true"
    if getattr(args, "uncontrolled", False):
        flags["uncontrolled"] = "true"
    if default_benchmark and "benchmark" not in flags and "preset" not in flags and args.config is None:
        flags["benchmark"] = default_benchmark
    return parse_config(args.config, flags)


def build_parser():
    parser = argparse.ArgumentParser(prog="aictrack", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one episode and write the per-step CSV")
    _add_config_flags(p)
    p.add_argument("--uncontrolled", action="store_true", help="force the command to zero")
    p.add_argument("--out", default="-", help="CSV path, '-' for stdout (default)")

    p = sub.add_parser("sweep", help="repeat runs over dropout scenarios and print the metrics table")
    _add_config_flags(p)
    p.add_argument("--scenarios", default="standard", help="'standard' or 'gs,gc;gs,gc;...'")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="-")

    p = sub.add_parser("gradcheck", help="finite-difference checks of every analytic gradient")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--corrupt", choices=harness.CORRUPTIONS, default=None,
                   help="negative control: deliberately break one gradient")

    p = sub.add_parser("surface", help="critic value over an (e1, e2) grid")
    _add_config_flags(p)
    p.add_argument("--weights", metavar="W1,W2,W3", help="use these critic weights instead of running")
    p.add_argument("--lo", type=float, default=-1.0)
    p.add_argument("--hi", type=float, default=1.0)
    p.add_argument("--n", type=int, default=101)
    p.add_argument("--out", default="-")

    p = sub.add_parser("vsm", help="VSM frequency study, controlled run plus uncontrolled baseline")
    _add_config_flags(p)
    p.add_argument("--no-baseline", action="store_true", help="skip the uncontrolled run")
    p.add_argument("--out", default=None, help="CSV for the controlled run")
    p.add_argument("--baseline-out", default=None, help="CSV for the uncontrolled run")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gradcheck":
            if args.points < 1:
                raise ConfigError("must be at least 1", "points")
            return harness.gradcheck_command(args.seed, args.points, args.corrupt)
        if args.command == "run":
            return harness.run_command(_config_from_args(args), args.out)
        if args.command == "sweep":
            if args.repeats < 1:
                raise ConfigError("must be at least 1", "repeats")
            cfg = _config_from_args(args)
            return harness.sweep_command(cfg, ScenarioSet.parse(args.scenarios), args.repeats,
                                         args.out, args.workers)
        if args.command == "surface":
            if args.n < 2 or not args.lo < args.hi:
                raise ConfigError("need n >= 2 and lo < hi", "surface")
            if args.weights:
                try:
                    w = np.array([float(v) for v in args.weights.split(",")])
                except ValueError as exc:
                    raise ConfigError(str(exc), "weights") from None
                critic = CriticNet(w, QuadraticBasis(2), 1.0)
            else:
                cfg = _config_from_args(args)
                try:
                    critic = run_episode(cfg.benchmark, cfg).controller.critic
                except DivergenceError as exc:
                    print(f"diverged: {exc}", file=sys.stderr)
                    return harness.EXIT_DIVERGED
            return harness.surface_command(critic, args.lo, args.hi, args.n, args.out)
        if args.command == "vsm":
            cfg = _config_from_args(args, default_benchmark="vsm")
            if cfg.benchmark != "vsm":
                raise ConfigError("the vsm command only runs the vsm benchmark", "benchmark")
            return harness.vsm_command(cfg, not args.no_baseline, args.out, args.baseline_out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return harness.EXIT_CONFIG
    raise AssertionError(args.command)


if __name__ == "__main__":
    sys.exit(main())
