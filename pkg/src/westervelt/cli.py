"""Command-line front end.

Settings come from scenario defaults, then an optional INI-style config file,
then command-line flags; later sources win.
"""
from __future__ import annotations

import argparse
import configparser
import sys
from dataclasses import fields

from .mesh import GridError
from .model import BranchError, DiscriminantNegative
from .scenarios import (
    SCENARIOS,
    ConfigError,
    NumericalFailure,
    ScenarioConfig,
    default_config,
    run_convergence_study,
    run_scenario,
    stable_dt_report,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4

_SCHEME_ALIASES = {"strang": "strang", "lt": "lie-trotter", "lie-trotter": "lie-trotter"}
_KEY_ALIASES = {"n": "resolutions", "out": "output_dir", "L": "length_scale"}
_FIELD_TYPES = {f.name: f.type for f in fields(ScenarioConfig)}


def _int_list(text):
    try:
        return tuple(int(s) for s in str(text).replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"expected a list of integers, got {text!r}") from None


def _float_list(text):
    try:
        return tuple(float(s) for s in str(text).replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"expected a list of numbers, got {text!r}") from None


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _coerce(key, raw):
    if key == "resolutions":
        return _int_list(raw)
    if key == "domain":
        return _float_list(raw)
    if key == "scheme":
        if raw not in _SCHEME_ALIASES:
            raise ConfigError(f"unknown scheme {raw!r}")
        return _SCHEME_ALIASES[raw]
    if key in ("integrated_sound_speed", "medium"):
        return _bool(raw)
    if key == "dt" and str(raw).strip().lower() in ("", "none"):
        return None
    kind = _FIELD_TYPES[key]
    try:
        if "int" in kind:
            return int(raw)
        if "float" in kind:
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return str(raw)


def read_config_file(path, scenario=None):
    """``(scenario, settings)`` from a config file.

    Keys in ``[run]`` apply to every scenario; a section named after the
    scenario overrides them.
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    settings = {}
    if parser.has_section("run"):
        settings.update(parser["run"])
    scenario = scenario or settings.pop("scenario", None)
    settings.pop("scenario", None)
    if scenario is None:
        raise ConfigError(f"{path}: no scenario given (set scenario= in [run])")
    if parser.has_section(scenario):
        settings.update(parser[scenario])
    unknown = set(parser.sections()) - {"run"} - set(SCENARIOS)
    if unknown:
        raise ConfigError(f"{path}: unknown sections {sorted(unknown)}")
    return scenario, normalize(settings, str(path))


def normalize(settings: dict, where="config") -> dict:
    out = {}
    for key, raw in settings.items():
        name = _KEY_ALIASES.get(key, key.replace("-", "_"))
        if name not in _FIELD_TYPES or name == "scenario":
            raise ConfigError(f"{where}: unknown key {key!r}")
        out[name] = _coerce(name, raw)
    return out


def _add_common(p):
    p.add_argument("--config", help="INI-style settings file")
    p.add_argument("--k", type=float, help="nonlinearity coefficient")
    p.add_argument("--b", type=float, help="diffusivity of sound")
    p.add_argument("--n", help="grid size(s) per axis, comma separated")
    p.add_argument("--domain", help="domain lengths per axis, comma separated")
    p.add_argument("--t-end", type=float)
    p.add_argument("--dt", type=float, help="fixed time step (overrides the policy)")
    p.add_argument("--dt-policy", choices=("paper", "auto"))
    p.add_argument("--cfl-safety", type=float, help="safety factor for --dt-policy auto")
    p.add_argument("--scheme", choices=("strang", "lt"))
    p.add_argument("--out", help="output directory")
    p.add_argument("--snapshot-stride", type=int, help="write a snapshot every this many steps (0: first and last)")
    p.add_argument("--jobs", type=int, help="parallel runs in a convergence study")
    p.add_argument("--integrated-sound-speed", action="store_const", const="true",
                   help="cell-averaged instead of point-sampled sound speed")


def build_parser():
    parser = argparse.ArgumentParser(prog="westervelt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("converge-1d", "1D manufactured-solution convergence table"),
        ("converge-2d", "2D manufactured-solution convergence table"),
        ("gaussian-1d", "steepening Gaussian pulse"),
        ("medium-2d", "2D run with variable sound speed"),
    ):
        _add_common(sub.add_parser(name, help=text))
    run = sub.add_parser("run", help="run the scenario named in a config file")
    _add_common(run)
    run.add_argument("--scenario", choices=SCENARIOS)
    run.add_argument("--mu", type=float)
    run.add_argument("--sigma", type=float)
    run.add_argument("--L", type=float, help="length scale of the Gaussian profile")
    run.add_argument("--profile", choices=("gaussian", "cosine", "zero"))
    run.add_argument("--medium", action="store_const", const="true")
    sd = sub.add_parser("stable-dt", help="print the time-step bound breakdown")
    _add_common(sd)
    sd.add_argument("--scenario", choices=SCENARIOS)
    return parser


_FLAG_KEYS = ("k", "b", "n", "domain", "t_end", "dt", "dt_policy", "cfl_safety", "scheme", "out",
              "snapshot_stride", "jobs", "integrated_sound_speed", "mu", "sigma", "L", "profile", "medium")


def resolve_config(args) -> ScenarioConfig:
    scenario = getattr(args, "scenario", None)
    if args.command not in ("run", "stable-dt"):
        scenario = args.command
    settings = {}
    if args.config:
        scenario, settings = read_config_file(args.config, scenario)
    elif args.command in ("run", "stable-dt") and scenario is None:
        raise ConfigError(f"{args.command} needs --config or --scenario")
    flags = {k: getattr(args, k) for k in _FLAG_KEYS if getattr(args, k, None) is not None}
    settings.update(normalize({k: str(v) for k, v in flags.items()}, "flags"))
    if "output_dir" not in settings and args.command != "stable-dt":
        settings["output_dir"] = f"results/{scenario}"
    return default_config(scenario, **settings)


def _cmd_stable_dt(config):
    rep = stable_dt_report(config)
    print(f"grid: {rep['n']} per axis, {config.dim}D, domain {list(config.domain)}")
    for key in ("laplacian_norm_bound", "sound_speed_sq_max", "conservative", "dissipative",
                "binding", "bound", "cfl_safety", "stable_dt", "paper_dt"):
        if key in rep:
            val = rep[key]
            print(f"{key:22s} {val:.10g}" if isinstance(val, float) else f"{key:22s} {val}")


def _cmd_study(config):
    table = run_convergence_study(config)
    sys.stdout.write(table.as_text(config.dim))
    if config.output_dir:
        print(f"wrote {config.output_dir}/convergence.csv")


def _cmd_single(config):
    res = run_scenario(config)
    series = res.series
    print(f"{config.scenario}: n={res.n} dt={res.dt:.6g} steps={res.n_steps} solves={res.nonlinear_solves}")
    print(f"H(0)={series.columns['H'][0]:.12g} H(T)={series.columns['H'][-1]:.12g} "
          f"predicted change={series.columns['diss_integral'][-1]:.6g}")
    if config.dim >= 2:
        print(f"max vorticity drift={max(series.columns['vorticity_drift']):.3g}")
    if res.error is not None:
        print(f"rel L2 error={res.error.rel_l2:.6g} rel Linf error={res.error.rel_linf:.6g}")
    if res.output_dir:
        print(f"wrote {res.output_dir}")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        config = resolve_config(args)
        if args.command == "stable-dt":
            _cmd_stable_dt(config)
        elif config.scenario.startswith("converge"):
            _cmd_study(config)
        else:
            _cmd_single(config)
    except (ConfigError, GridError, BranchError) as exc:
        print(f"westervelt: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, DiscriminantNegative, FloatingPointError) as exc:
        print(f"westervelt: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"westervelt: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
