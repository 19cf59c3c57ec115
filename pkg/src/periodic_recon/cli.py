"""Command-line interface.

Settings are merged in increasing priority: built-in defaults, the JSON file
given by ``--config``, explicit flags. Exit status is 0 on success, 2 for
configuration errors and 3 for numerical failures.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import warnings

import numpy as np

from .errors import ConfigError, NumericalError
from .harness import (
    ExperimentConfig,
    dump_kernel,
    format_number,
    kernel_csv,
    run_gamma_sweep,
    run_lambda_sweep,
    run_table2,
    table2_csv,
    table2_json,
    TABLE2_OPERATORS,
)
from .rkhs import TIME, MeasurementSet, assemble_system, build_kernel
from .solvers import reconstruct_signal, solve_gamma_regularized, solve_representer, verify_spline
from .spectral import DEFAULT_N_COEF, evaluate, parse_operator
from .stochastic import (
    MEASUREMENT_STREAM,
    NOISE_STREAM,
    draw_bridge,
    measure,
    substream,
    tail_energy,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

SUPPRESS = argparse.SUPPRESS


def parse_grid(text: str) -> list[float]:
    """``"a,b,c"``, ``"linspace:start,stop,num"`` or ``"logspace:start,stop,num"`` (base-10 exponents)."""
    text = text.strip()
    try:
        if ":" in text:
            kind, body = text.split(":", 1)
            start, stop, num = body.split(",")
            if kind == "linspace":
                return np.linspace(float(start), float(stop), int(num)).tolist()
            if kind == "logspace":
                return np.logspace(float(start), float(stop), int(num)).tolist()
            raise ConfigError(f"unknown grid kind {kind!r}")
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse grid {text!r}") from exc


def parse_int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse integer list {text!r}") from exc


def _to_complex(v):
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, str):
        return complex(v.replace(" ", ""))
    return complex(v)


def parse_values(source) -> np.ndarray:
    """Measurement values from a list, a file path, or inline text.

    Files and inline text may hold a JSON list or comma/whitespace separated
    numbers. Complex entries are ``[re, im]`` pairs or strings like ``"1-2j"``.
    """
    if isinstance(source, (list, tuple)):
        items = list(source)
    else:
        text = str(source)
        if os.path.isfile(text):
            with open(text) as fh:
                text = fh.read()
        text = text.strip()
        try:
            items = json.loads(text) if text.startswith("[") else text.replace(",", " ").split()
        except json.JSONDecodeError as exc:
            raise ConfigError(f"cannot parse measurement values: {exc}") from exc
    try:
        values = np.array([_to_complex(v) for v in items])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"cannot parse measurement values: {exc}") from exc
    if values.size and np.all(values.imag == 0):
        return values.real
    return values


def _load_measurements(source, n_coef) -> MeasurementSet:
    if isinstance(source, dict):
        return MeasurementSet.from_config(source, n_coef)
    try:
        return MeasurementSet.load(source, n_coef)
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot read measurements from {source}: {exc}") from exc


def _pairs(x: np.ndarray):
    x = np.asarray(x)
    if np.iscomplexobj(x):
        return [[float(v.real), float(v.imag)] for v in x]
    return [float(v) for v in x]


def _rows_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_number(v) for v in row])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# subcommands


def cmd_reconstruct(s: dict) -> str:
    n_coef = int(s["n_coef"])
    op = parse_operator(s["operator"], n_coef)
    if "measurements" not in s or "y" not in s:
        raise ConfigError("reconstruct needs --measurements and --y")
    meas = _load_measurements(s["measurements"], n_coef)
    y = parse_values(s["y"])
    lam = float(s["lambda"])
    gamma = float(s["gamma"])
    sys_ = assemble_system(build_kernel(op, gamma, n_coef), meas)
    if s["estimator"] == "representer":
        model = solve_representer(sys_, y, lam)
    elif s["estimator"] == "gamma":
        model = solve_gamma_regularized(sys_, y, lam)
    else:
        raise ConfigError(f"unknown estimator {s['estimator']!r}")
    f = reconstruct_signal(model)
    grid = int(s["grid"])
    if grid < 1:
        raise ConfigError("grid must be at least 1")
    t = np.arange(grid) / grid
    values = evaluate(f, t)
    if s["format"] == "csv":
        return _rows_csv(["t", "f"], zip(t.tolist(), values.real.tolist()))
    out = {
        "operator": op.name,
        "gamma": gamma,
        "lambda": lam,
        "estimator": model.kind,
        "measurements": meas.to_config(),
        "null_space": list(op.null_space),
        "a": _pairs(model.a_coeffs),
        "b": _pairs(model.b_coeffs),
        "null_component": _pairs(model.null_component),
        "condition": model.condition,
        "t": t.tolist(),
        "f": values.real.tolist(),
    }
    if model.kind == "representer" and meas.kind == TIME:
        out["spline_deviation"] = verify_spline(model)
    return json.dumps(out, indent=2)


def cmd_simulate_bridge(s: dict) -> str:
    n_coef = int(s["n_coef"])
    op = parse_operator(s["operator"], n_coef)
    gamma0_sq = float(s["gamma0_sq"])
    if not gamma0_sq > 0:
        raise ConfigError("gamma0_sq must be positive")
    seed, trial = int(s["seed"]), int(s["trial"])
    bridge = draw_bridge(op, math.sqrt(gamma0_sq), n_coef, substream(seed, trial, NOISE_STREAM))
    grid = int(s["grid"])
    if grid < 1:
        raise ConfigError("grid must be at least 1")
    t = np.arange(grid) / grid
    values = evaluate(bridge.signal, t).real
    if s["format"] == "csv":
        return _rows_csv(["t", "s"], zip(t.tolist(), values.tolist()))
    out = {
        "operator": op.name,
        "gamma0_sq": gamma0_sq,
        "seed": seed,
        "trial": trial,
        "n_coef": n_coef,
        "energy": bridge.signal.energy(),
        "tail_energy": tail_energy(op, n_coef),
        "t": t.tolist(),
        "s": values.tolist(),
    }
    if s.get("measurements") is not None:
        meas = _load_measurements(s["measurements"], n_coef)
        draw = measure(bridge, meas, float(s["sigma0_sq"]), substream(seed, trial, MEASUREMENT_STREAM))
        out["measurements"] = meas.to_config()
        out["y"] = _pairs(draw.y)
    return json.dumps(out, indent=2)


EXPERIMENT_KEYS = {
    "operator", "gamma0_sq", "sigma0_sq", "M", "N", "n_coef", "kind", "layout", "locations",
    "fourier_indices", "lambda_grid", "gamma_sq_grid", "lam", "seed", "output", "format", "verbose", "workers",
}


def _experiment_config(s: dict) -> ExperimentConfig:
    data = {k: v for k, v in s.items() if k in EXPERIMENT_KEYS}
    for key in ("lambda_grid", "gamma_sq_grid"):
        if isinstance(data.get(key), str):
            data[key] = parse_grid(data[key])
    if isinstance(data.get("fourier_indices"), str):
        data["fourier_indices"] = parse_int_list(data["fourier_indices"])
    if isinstance(data.get("locations"), str):
        data["locations"] = parse_grid(data["locations"])
    return ExperimentConfig.from_dict(data)


def _record_output(rec, cfg: ExperimentConfig) -> str:
    return rec.to_json(cfg.verbose) if cfg.format == "json" else rec.to_csv()


def cmd_sweep_lambda(s: dict) -> str:
    cfg = _experiment_config(s)
    return _record_output(run_lambda_sweep(cfg), cfg)


def cmd_sweep_gamma(s: dict) -> str:
    cfg = _experiment_config(s)
    return _record_output(run_gamma_sweep(cfg), cfg)


def cmd_table2(s: dict) -> str:
    ops = s.get("operators", TABLE2_OPERATORS)
    if isinstance(ops, str):
        ops = [o for o in ops.split(";") if o.strip()] if ";" in ops else ops.split(",")
    trials = s.get("N")
    base = {k: v for k, v in s.items() if k != "N"}
    cfg = _experiment_config(base)
    records = run_table2(cfg, operators=ops, trials=trials, paper_fidelity=bool(s.get("paper_fidelity")))
    return table2_json(records, cfg.verbose) if cfg.format == "json" else table2_csv(records)


def cmd_kernel_dump(s: dict) -> str:
    n_coef = int(s["n_coef"])
    op = parse_operator(s["operator"], n_coef)
    rows = dump_kernel(op, float(s["gamma"]), n_coef, int(s["grid"]))
    if s["format"] == "json":
        return json.dumps({"operator": op.name, "gamma": float(s["gamma"]), "n_coef": n_coef,
                           "t": [r[0] for r in rows], "h": [r[1] for r in rows]}, indent=2)
    return kernel_csv(rows)


COMMON_DEFAULTS = {"seed": 12345, "n_coef": DEFAULT_N_COEF, "format": "csv"}

DEFAULTS = {
    "reconstruct": {"operator": "D", "gamma": 1.0, "lambda": 1e-2, "estimator": "representer",
                    "grid": 512, "format": "json"},
    "simulate-bridge": {"operator": "D", "gamma0_sq": 1.0, "grid": 512, "trial": 0, "sigma0_sq": 1e-2},
    "sweep-lambda": {},
    "sweep-gamma": {"operator": "D"},
    "table2": {},
    "kernel-dump": {"operator": "D", "gamma": 1.0, "grid": 512},
}

COMMANDS = {
    "reconstruct": cmd_reconstruct,
    "simulate-bridge": cmd_simulate_bridge,
    "sweep-lambda": cmd_sweep_lambda,
    "sweep-gamma": cmd_sweep_gamma,
    "table2": cmd_table2,
    "kernel-dump": cmd_kernel_dump,
}


def _global_flags(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=SUPPRESS, help="base seed of the random substreams")
    p.add_argument("--n-coef", dest="n_coef", type=int, default=SUPPRESS, help="Fourier band limit K")
    p.add_argument("--trials", dest="N", type=int, default=SUPPRESS, help="Monte Carlo trial count")
    p.add_argument("--format", choices=("csv", "json"), default=SUPPRESS)
    p.add_argument("--output", default=SUPPRESS, help="write here instead of stdout")
    p.add_argument("--config", default=SUPPRESS, help="JSON file of settings; flags take precedence")


def _experiment_flags(p: argparse.ArgumentParser):
    p.add_argument("--operator", default=SUPPRESS, help="D, D+I, D2, D2+4pi2I, I or poly:c0,c1,...")
    p.add_argument("--gamma0-sq", dest="gamma0_sq", type=float, default=SUPPRESS)
    p.add_argument("--sigma0-sq", dest="sigma0_sq", type=float, default=SUPPRESS)
    p.add_argument("--M", "--num-measurements", dest="M", type=int, default=SUPPRESS)
    p.add_argument("--kind", choices=("time", "fourier"), default=SUPPRESS)
    p.add_argument("--layout", choices=("stratified", "uniform", "grid", "fixed"), default=SUPPRESS)
    p.add_argument("--indices", dest="fourier_indices", default=SUPPRESS, help="Fourier indices, e.g. -2,-1,0,1,2")
    p.add_argument("--workers", type=int, default=SUPPRESS)
    p.add_argument("--verbose", action="store_true", default=SUPPRESS, help="include per-trial arrays in JSON")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common)
    parser = argparse.ArgumentParser(prog="periodic-recon", description=__doc__.splitlines()[0],
                                     parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reconstruct", parents=[common], help="solve for given measurements")
    p.add_argument("--operator", default=SUPPRESS)
    p.add_argument("--gamma", type=float, default=SUPPRESS)
    p.add_argument("--lambda", dest="lambda", type=float, default=SUPPRESS)
    p.add_argument("--measurements", default=SUPPRESS, help="JSON measurement description")
    p.add_argument("--y", default=SUPPRESS, help="measurement values: file or inline list")
    p.add_argument("--estimator", choices=("representer", "gamma"), default=SUPPRESS)
    p.add_argument("--grid", type=int, default=SUPPRESS, help="output grid size")

    p = sub.add_parser("simulate-bridge", parents=[common], help="draw one Gaussian bridge")
    p.add_argument("--operator", default=SUPPRESS)
    p.add_argument("--gamma0-sq", dest="gamma0_sq", type=float, default=SUPPRESS)
    p.add_argument("--trial", type=int, default=SUPPRESS)
    p.add_argument("--grid", type=int, default=SUPPRESS)
    p.add_argument("--measurements", default=SUPPRESS, help="also emit noisy measurements (JSON output)")
    p.add_argument("--sigma0-sq", dest="sigma0_sq", type=float, default=SUPPRESS)

    p = sub.add_parser("sweep-lambda", parents=[common], help="NMSE against lambda")
    _experiment_flags(p)
    p.add_argument("--lambda-grid", dest="lambda_grid", default=SUPPRESS,
                   help="comma list or linspace:a,b,n")

    p = sub.add_parser("sweep-gamma", parents=[common], help="NMSE against gamma^2")
    _experiment_flags(p)
    p.add_argument("--gamma-sq-grid", dest="gamma_sq_grid", default=SUPPRESS,
                   help="comma list or logspace:a,b,n")
    p.add_argument("--lambda", dest="lam", type=float, default=SUPPRESS, help="defaults to sigma0^2")

    p = sub.add_parser("table2", parents=[common], help="reference-estimator comparison table")
    _experiment_flags(p)
    p.add_argument("--operators", default=SUPPRESS, help="comma list of operators")
    p.add_argument("--paper-fidelity", dest="paper_fidelity", action="store_true", default=SUPPRESS,
                   help="500 trials per cell")

    p = sub.add_parser("kernel-dump", parents=[common], help="sample the reproducing kernel")
    p.add_argument("--operator", default=SUPPRESS)
    p.add_argument("--gamma", type=float, default=SUPPRESS)
    p.add_argument("--grid", type=int, default=SUPPRESS)
    return parser


def resolve_settings(args: argparse.Namespace) -> dict:
    flags = vars(args).copy()
    command = flags.pop("command")
    settings = {**COMMON_DEFAULTS, **DEFAULTS[command]}
    config_path = flags.pop("config", None)
    if config_path is not None:
        try:
            with open(config_path) as fh:
                from_file = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read configuration {config_path}: {exc}") from exc
        if not isinstance(from_file, dict):
            raise ConfigError("configuration file must hold a JSON object")
        if "trials" in from_file:
            from_file["N"] = from_file.pop("trials")
        settings.update(from_file)
    settings.update(flags)
    settings["command"] = command
    return settings


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = resolve_settings(args)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            text = COMMANDS[settings.pop("command")](settings)
        out = settings.get("output")
        if out:
            with open(out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text if text.endswith("\n") else text + "\n")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
