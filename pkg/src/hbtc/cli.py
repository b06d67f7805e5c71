"""Command-line experiment runner.

Subcommands:
    gen       write ground-truth files (clean/noisy CT3, mask CM3, BTD1)
    complete  run the solver on a CT3 tensor + CM3 mask
    eval      print the RLNE between an estimate and a reference tensor
    sweep     run a Monte-Carlo sweep and write rows/aggregates CSVs

Configuration is a flat key-value text file (`key = value`, `#` comments,
order-insensitive); command-line flags override file values.  The only
environment variable honored is HBTC_THREADS (parallel trial count).
"""

import argparse
import csv
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import fileio
from .model import BlockStructure
from .solver import ConfigError, NumericalError, SolveReport, SolverConfig, solve
from .sweep import SweepSpec, run_sweep, write_aggregates_csv, write_rows_csv
from .synth import GenConfig, generate, rlne

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

_GEN_KEYS = {"I", "J", "K", "L", "snr_db", "sample_ratio", "scenario", "seed"}
_SOLVER_KEYS = {"lambda", "beta0", "rho_penalty", "max_iterations",
                "tol_rel_change", "backend", "svt_threshold",
                "overwrite_observed", "seed"}
_SWEEP_KEYS = {"swept", "values", "trials", "methods"}


def parse_config(path):
    """Flat key = value file -> dict of raw strings."""
    known = _GEN_KEYS | _SOLVER_KEYS | _SWEEP_KEYS
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value', "
                              f"got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"config: unknown field {key!r}")
        out[key] = value
    return out


def _get(cfg, key, cast, default):
    if key not in cfg:
        return default
    try:
        return cast(cfg[key])
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"config field {key!r}: {exc}") from exc


def _float(v):
    if v.lower() in ("inf", "+inf", "infinity"):
        return math.inf
    return float(v)


def _bool(v):
    if v.lower() in ("true", "1", "yes"):
        return True
    if v.lower() in ("false", "0", "no"):
        return False
    raise ValueError(f"expected a boolean, got {v!r}")


def _int_list(v):
    return tuple(int(x) for x in v.split(","))


def _float_list(v):
    return tuple(_float(x) for x in v.split(","))


def _str_list(v):
    return tuple(x.strip() for x in v.split(","))


def build_gen_config(cfg, seed_override=None):
    dims = (_get(cfg, "I", int, 20), _get(cfg, "J", int, 20),
            _get(cfg, "K", int, 20))
    blocks = _get(cfg, "L", _int_list, (3, 3, 3))
    try:
        structure = BlockStructure(blocks)
        return GenConfig(
            dims=dims,
            structure=structure,
            snr_db=_get(cfg, "snr_db", _float, math.inf),
            sample_ratio=_get(cfg, "sample_ratio", _float, 0.15),
            seed=seed_override if seed_override is not None
            else _get(cfg, "seed", int, 0),
            scenario=_get(cfg, "scenario", str, "generic"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_solver_config(cfg, args=None):
    kwargs = dict(
        lam=_get(cfg, "lambda", _float, 10.0),
        beta0=_get(cfg, "beta0", _float, 1e-3),
        rho_penalty=_get(cfg, "rho_penalty", _float, 1.05),
        max_iterations=_get(cfg, "max_iterations", int, 500),
        tol_rel_change=_get(cfg, "tol_rel_change", _float, 1e-8),
        backend=_get(cfg, "backend", str, "als"),
        seed=_get(cfg, "seed", int, 0),
        svt_threshold=_get(cfg, "svt_threshold", str, "half"),
        overwrite_observed=_get(cfg, "overwrite_observed", _bool, False),
    )
    if args is not None:
        overrides = {
            "lam": getattr(args, "lambda_weight", None),
            "beta0": args.beta0,
            "rho_penalty": args.rho,
            "max_iterations": args.iters,
            "backend": args.backend,
            "seed": args.seed,
        }
        kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return SolverConfig(**kwargs)


def build_sweep_spec(cfg, args=None):
    for key in ("swept", "values"):
        if key not in cfg:
            raise ConfigError(f"config: missing required field {key!r}")
    return SweepSpec(
        swept=cfg["swept"],
        values=_get(cfg, "values", _float_list, ()),
        trials=_get(cfg, "trials", int, 50),
        base_gen=build_gen_config(cfg, seed_override=getattr(args, "seed", None)),
        base_solver=build_solver_config(cfg, args),
        methods=_get(cfg, "methods", _str_list, ("btd_als",)),
    )


def write_trace_csv(path, report):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SolveReport.TRACE_HEADER)
        for row in report.trace:
            writer.writerow([row[0]] + [repr(float(v)) for v in row[1:]])


def _cmd_gen(args):
    cfg = parse_config(args.config)
    gen_cfg = build_gen_config(cfg, seed_override=args.seed)
    truth = generate(gen_cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fileio.write_ct3(out / "clean.ct3", truth.clean)
    fileio.write_ct3(out / "noisy.ct3", truth.noisy)
    fileio.write_cm3(out / "mask.cm3", truth.mask)
    fileio.write_btd1(out / "factors.btd1", truth.factors)
    print(f"wrote ground truth to {out}")
    return 0


def _cmd_complete(args):
    cfg = parse_config(args.config)
    blocks = _get(cfg, "L", _int_list, None)
    if blocks is None:
        raise ConfigError("config: missing required field 'L'")
    structure = BlockStructure(blocks)
    solver_cfg = build_solver_config(cfg, args)
    y = fileio.read_ct3(args.tensor)
    w = fileio.read_cm3(args.mask)
    if y.shape != w.shape:
        raise ConfigError(f"tensor/mask: shape mismatch {y.shape} vs {w.shape}")
    report = solve(w * y, w, structure, solver_cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fileio.write_ct3(out / "completed.ct3", report.completed)
    fileio.write_btd1(out / "factors.btd1", report.factors)
    write_trace_csv(out / "trace.csv", report)
    print(f"completed in {report.iterations_run} iterations "
          f"(converged={report.converged}); wrote {out}")
    return 0


def _cmd_eval(args):
    estimate = fileio.read_ct3(args.estimate)
    clean = fileio.read_ct3(args.clean)
    if estimate.shape != clean.shape:
        raise ConfigError(
            f"estimate/clean: shape mismatch {estimate.shape} vs {clean.shape}")
    print(f"{rlne(estimate, clean):.6f}")
    return 0


def _default_threads():
    env = os.environ.get("HBTC_THREADS")
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"HBTC_THREADS: {exc}") from exc
    return os.cpu_count() or 1


def _cmd_sweep(args):
    cfg = parse_config(args.config)
    spec = build_sweep_spec(cfg, args)
    threads = args.threads if args.threads is not None else _default_threads()
    rows, aggregates = run_sweep(spec, threads=threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_rows_csv(out / "rows.csv", rows)
    write_aggregates_csv(out / "aggregates.csv", aggregates)
    print(f"wrote {len(rows)} rows to {out}")
    return 0


def _add_solver_flags(p):
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument("--backend", choices=("als", "gn"), default=None)
    p.add_argument("--lambda", dest="lambda_weight", type=float, default=None,
                   help="fit-vs-structure weight")
    p.add_argument("--beta0", type=float, default=None)
    p.add_argument("--rho", type=float, default=None, help="penalty growth factor")
    p.add_argument("--iters", type=int, default=None, help="max iterations")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hbtc",
        description="Harmonic tensor completion via block-term decomposition",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate ground-truth files")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("complete", help="complete an observed tensor")
    p.add_argument("--config", required=True)
    p.add_argument("--tensor", required=True, help="observed tensor (CT3)")
    p.add_argument("--mask", required=True, help="observation mask (CM3)")
    p.add_argument("--out", required=True)
    _add_solver_flags(p)
    p.set_defaults(func=_cmd_complete)

    p = sub.add_parser("eval", help="print RLNE between estimate and reference")
    p.add_argument("--estimate", required=True)
    p.add_argument("--clean", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("sweep", help="run a Monte-Carlo sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=None)
    _add_solver_flags(p)
    p.set_defaults(func=_cmd_sweep)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
