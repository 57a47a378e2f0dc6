"""
lssmap command line.

    python lssmap.py run --map solenoid --s 1.0 --n 10000 --n0 1000 --seed 7
    python lssmap.py err-profile --n 100 --s 2.0 --seed 3 -o prof.csv
    python lssmap.py converge --s 1.0 --n-list 100,200,400,800 --reps 4 -o conv.csv

Every flag can also come from a KEY=VALUE file given with --config (keys are
the flag names). Exit codes: 0 success, 1 numeric failure, 2 usage/config error.
"""
import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np
import pandas as pd

import charts
import experiments
import settings
from dynsys import ConfigError, LssError
from fd_oracle import FdConfig, fd_derivative
from lss_solver import SOLVERS
from maps import MAPS, get_map
from sensitivity import RunConfig, compute_sensitivity

logger = logging.getLogger("lssmap")

DEFAULT_CONVERGE_OUTPUT = "converge.csv"


# --- Option table ---

def int_list(text):
    return [int(t) for t in str(text).split(",") if t.strip()]


def float_list(text):
    return [float(t) for t in str(text).split(",") if t.strip()]


def solver_name(text):
    if text not in SOLVERS:
        raise ValueError(f"solver must be one of {SOLVERS}")
    return text


int_list.__name__ = "comma-separated integers"
float_list.__name__ = "comma-separated numbers"


@dataclass(frozen=True)
class Option:
    name: str
    type: Callable
    default: Any = None
    help: str = ""
    required: bool = False

    @property
    def dest(self):
        return self.name.replace("-", "_")


def _seed_option():
    return Option("seed", int, settings.env_seed, "RNG seed (falls back to LSS_SEED)")


def _map_option(default=None):
    return Option("map", str, default, f"map name: {', '.join(MAPS)}", required=default is None)


def _n0_option():
    return Option("n0", int, None, "spin-up steps (default: per-map)")


COMMANDS = {
    "run": ("least squares shadowing estimate of d<J>/ds", [
        _map_option(),
        Option("s", float, None, "parameter value", required=True),
        Option("n", int, None, "trajectory length", required=True),
        _n0_option(),
        _seed_option(),
        Option("trim", int, 0, "steps dropped from each end of the average"),
        Option("solver", solver_name, "thomas", f"block solver: {', '.join(SOLVERS)}"),
    ]),
    "fd": ("ensemble finite-difference derivative with 3-sigma band", [
        _map_option(),
        Option("s", float, None, "parameter value", required=True),
        Option("ds", float, 0.05, "half step of the central difference"),
        Option("ensemble", int, 100, "trajectories per side"),
        Option("n", int, 5000, "length of each trajectory"),
        _n0_option(),
        _seed_option(),
    ]),
    "err-profile": ("distance to the analytic shadowing direction along one trajectory", [
        _map_option("solenoid"),
        Option("n", int, 100, "trajectory length"),
        Option("s", float, 2.0, "parameter value"),
        _n0_option(),
        _seed_option(),
        Option("solver", solver_name, "thomas", f"block solver: {', '.join(SOLVERS)}"),
    ]),
    "sweep": ("LSS estimates over a grid of s against finite differences", [
        _map_option("solenoid"),
        Option("s-list", float_list, None, "parameter values, e.g. 0.9,1.0,1.1", required=True),
        Option("n-list", int_list, [1000], "LSS trajectory lengths"),
        Option("reps", int, 4, "LSS repetitions per (s, n)"),
        Option("trim", int, 0, "steps dropped from each end of the average"),
        _n0_option(),
        _seed_option(),
        Option("ds", float, 0.05, "finite-difference half step"),
        Option("ensemble", int, 100, "finite-difference trajectories per side"),
        Option("fd-n", int, 5000, "finite-difference trajectory length"),
    ]),
    "converge": ("mean |error| against a reference value as n grows", [
        _map_option("solenoid"),
        Option("s", float, 1.0, "parameter value"),
        Option("n-list", int_list, None, "trajectory lengths, e.g. 100,200,400,800", required=True),
        Option("reps", int, 16, "seeds per length"),
        Option("truth", float, None, "reference d<J>/ds (default: solenoid value at s=1)"),
        Option("trim", int, 0, "steps dropped from each end of the average (0 keeps the O(1/n) boundary term)"),
        _n0_option(),
        _seed_option(),
    ]),
    "truth": ("reference value from many trimmed LSS runs", [
        _map_option("solenoid"),
        Option("s", float, 1.0, "parameter value"),
        Option("n", int, 10000, "trajectory length"),
        Option("reps", int, 16, "number of runs"),
        Option("trim", int, 20, "steps dropped from each end of the average"),
        _n0_option(),
        _seed_option(),
    ]),
    "attractor": ("sample of the attractor at a given s", [
        _map_option("solenoid"),
        Option("s", float, 1.0, "parameter value"),
        Option("n", int, 5000, "number of points"),
        _n0_option(),
        _seed_option(),
    ]),
}

COMMON = [
    Option("output", str, None, "output file (default: stdout)"),
    Option("format", str, None, "output format: json or csv"),
    Option("jobs", int, settings.env_jobs, "worker processes for ensembles and grids"),
    Option("log-level", str, settings.log_level, "DEBUG, INFO, WARNING or ERROR"),
    Option("plot", str, None, "also write a plotly HTML chart to this file"),
]


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lssmap",
        description="Least squares shadowing sensitivity analysis for chaotic maps.")
    sub = parser.add_subparsers(dest="command", required=True)
    for command, (summary, options) in COMMANDS.items():
        p = sub.add_parser(command, help=summary, description=summary)
        p.add_argument("--config", default=None, help="KEY=VALUE file with defaults for any flag")
        for opt in options + COMMON:
            flags = [f"--{opt.name}"]
            if opt.name == "output":
                flags.insert(0, "-o")
            if opt.required:
                extra = " (required)"
            elif callable(opt.default):
                extra = " (default: from environment)"
            else:
                extra = f" (default: {opt.default})"
            p.add_argument(*flags, dest=opt.dest, type=opt.type, default=None,
                           help=opt.help + extra)
    return parser


def resolve(command, namespace):
    """Merge command line, config file and defaults into a plain dict."""
    options = COMMANDS[command][1] + COMMON
    file_values = {}
    if namespace.config:
        file_values = settings.load_config_file(namespace.config, {o.name for o in options})

    values = {}
    for opt in options:
        value = getattr(namespace, opt.dest)
        if value is None and opt.name in file_values:
            try:
                value = opt.type(file_values[opt.name])
            except ValueError as e:
                raise ConfigError(f"bad value for '{opt.name}' in {namespace.config}: {e}") from None
        if value is None:
            value = opt.default() if callable(opt.default) else opt.default
        if value is None and opt.required:
            raise ConfigError(f"--{opt.name} is required")
        values[opt.dest] = value

    if values["format"] not in (None, "json", "csv"):
        raise ConfigError(f"format must be json or csv, got '{values['format']}'")
    if values["jobs"] < 1:
        raise ConfigError(f"jobs must be at least 1, got {values['jobs']}")
    get_map(values["map"])
    return values


# --- Output ---

def _native(value):
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def _dumps(payload):
    return json.dumps(payload, indent=2, default=_native) + "\n"


def _write_text(text, output):
    if output is None:
        sys.stdout.write(text)
    else:
        path = Path(output)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")


def emit_record(record, output, fmt):
    if (fmt or "json") == "json":
        _write_text(_dumps(record), output)
    else:
        emit_table(pd.DataFrame([record]), output, "csv")


def emit_table(frame, output, fmt):
    if (fmt or "csv") == "json":
        _write_text(_dumps(frame.to_dict(orient="records")), output)
    elif output is None:
        frame.to_csv(sys.stdout, index=False, float_format=experiments.FLOAT_FORMAT, lineterminator="\n")
    else:
        experiments.write_csv(frame, output)


def _maybe_plot(figure_fn, frame, path):
    if path:
        charts.write_chart(figure_fn(frame), path)


# --- Commands ---

def cmd_run(opts):
    config = RunConfig(opts["map"], opts["s"], opts["n"], opts["n0"], opts["seed"],
                       opts["trim"], opts["solver"])
    result = compute_sensitivity(get_map(opts["map"]), config)
    emit_record(result.to_dict(), opts["output"], opts["format"])
    return 0


def cmd_fd(opts):
    config = FdConfig(opts["map"], opts["s"], opts["ds"], opts["ensemble"], opts["n"],
                      opts["n0"], opts["seed"])
    result = fd_derivative(config, jobs=opts["jobs"])
    emit_record(result.to_dict(), opts["output"], opts["format"])
    return 0


def cmd_err_profile(opts):
    profile = experiments.error_profile(opts["n"], opts["s"], opts["seed"], sys=get_map(opts["map"]),
                                        n0=opts["n0"], solver=opts["solver"])
    frame = profile.to_frame()
    emit_table(frame, opts["output"], opts["format"])
    _maybe_plot(charts.error_profile_figure, frame, opts["plot"])
    return 0


def cmd_sweep(opts):
    fd_config = FdConfig(opts["map"], opts["s_list"][0], opts["ds"], opts["ensemble"],
                         opts["fd_n"], opts["n0"], opts["seed"])
    frame = experiments.sweep(opts["s_list"], opts["n_list"], opts["reps"], fd_config,
                              sys=get_map(opts["map"]), seed=opts["seed"], trim=opts["trim"],
                              n0=opts["n0"], jobs=opts["jobs"])
    emit_table(frame, opts["output"], opts["format"])
    _maybe_plot(charts.sweep_figure, frame, opts["plot"])
    return 0


def cmd_converge(opts):
    truth = opts["truth"]
    if truth is None:
        if opts["map"] != "solenoid" or opts["s"] != 1.0:
            raise ConfigError("--truth is required unless map=solenoid and s=1")
        truth = settings.SOLENOID_TRUTH_S1
    study = experiments.convergence_study(opts["s"], opts["n_list"], opts["reps"], truth,
                                          trim=opts["trim"], sys=get_map(opts["map"]),
                                          n0=opts["n0"], seed=opts["seed"], jobs=opts["jobs"])
    # two tables plus a summary on stdout, so the rows always go to a file
    output = Path(opts["output"] or DEFAULT_CONVERGE_OUTPUT)
    companion = output.with_name(f"{output.stem}-mean{output.suffix}")
    emit_table(study.rows, output, opts["format"])
    emit_table(study.means(), companion, opts["format"])
    _maybe_plot(charts.convergence_figure, study.means(), opts["plot"])
    summary = study.summary()
    summary.update(map=opts["map"], reps=opts["reps"], seed=opts["seed"])
    sys.stdout.write(_dumps(summary))
    return 0


def cmd_truth(opts):
    estimate = experiments.estimate_truth(opts["s"], opts["n"], opts["reps"], trim=opts["trim"],
                                          sys=get_map(opts["map"]), n0=opts["n0"],
                                          seed=opts["seed"], jobs=opts["jobs"])
    record = {"map": opts["map"], "s": opts["s"], "n0": opts["n0"], "seed": opts["seed"]}
    record.update(estimate.to_dict())
    emit_record(record, opts["output"], opts["format"])
    return 0


def cmd_attractor(opts):
    frame = experiments.attractor_points(opts["s"], opts["n"], sys=get_map(opts["map"]),
                                         n0=opts["n0"], seed=opts["seed"])
    emit_table(frame, opts["output"], opts["format"])
    _maybe_plot(charts.attractor_figure, frame, opts["plot"])
    return 0


HANDLERS = {
    "run": cmd_run,
    "fd": cmd_fd,
    "err-profile": cmd_err_profile,
    "sweep": cmd_sweep,
    "converge": cmd_converge,
    "truth": cmd_truth,
    "attractor": cmd_attractor,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        opts = resolve(args.command, args)
        logging.basicConfig(
            level=getattr(logging, str(opts["log_level"]).upper(), logging.WARNING),
            format="%(asctime)s %(levelname)s %(name)s: %(message)s",
            stream=sys.stderr,
        )
        logger.debug("%s %s", args.command, opts)
        return HANDLERS[args.command](opts)
    except ConfigError as e:
        print(f"lssmap: error: {e}", file=sys.stderr)
        return 2
    except (LssError, np.linalg.LinAlgError, FloatingPointError) as e:
        print(f"lssmap: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
