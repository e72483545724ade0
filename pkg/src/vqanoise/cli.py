"""Command-line driver: ``vqanoise {optimize,sigma-sweep,param-sweep,time-scan} --config FILE``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .experiments import run_optimize, run_param_sweep, run_sigma_sweep, run_time_scan
from .instances import ConfigError, ExperimentConfig, ensure_dir, write_csv
from .quantum import MAX_DM_QUBITS

log = logging.getLogger("vqanoise")

SWEEP_COLUMNS = ["sigma", "mean_dE", "stderr", "exact_dE", "q", "n"]
INSTANCE_SWEEP_COLUMNS = ["instance"] + SWEEP_COLUMNS
PARAM_COLUMNS = ["param_label", "layer", "delta", "energy"]
SCAN_COLUMNS = ["p", "t_max", "E_star", "t_exec", "overlap", "converged"]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return None if math.isnan(v) else v
    return obj


def write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


def _gnuplot(path: Path, body: str) -> None:
    path.write_text("set datafile separator ','\nset key autotitle columnhead\n" + body)


# --- subcommands ------------------------------------------------------------------


def cmd_optimize(cfg: ExperimentConfig, args) -> list[Path]:
    records = run_optimize(cfg, args.threads, _progress)
    path = args.out / "optimize.json"
    write_json(path, {"config": cfg.to_dict(), "results": records})
    return [path]


def cmd_sigma_sweep(cfg: ExperimentConfig, args) -> list[Path]:
    res = run_sigma_sweep(cfg, args.threads, args.max_dm_qubits, _progress)
    ens, inst = args.out / "sigma_sweep.csv", args.out / "sigma_sweep_instances.csv"
    summ = args.out / "sigma_sweep_summary.json"
    write_csv(ens, res.ensemble.rows(), SWEEP_COLUMNS)
    rows = []
    for s, rep in zip(res.summaries, res.reports):
        rows.extend(dict(r, instance=s["instance"]) for r in rep.rows())
    write_csv(inst, rows, INSTANCE_SWEEP_COLUMNS)
    fit = res.fit
    write_json(summ, {
        "ensemble_fit": None if fit is None else {"c": fit.c, "residual": fit.residual,
                                                  "max_valid_sigma": fit.max_valid_sigma, "n_points": fit.n_points},
        "instances": res.summaries,
    })
    out = [ens, inst, summ]
    if args.gnuplot_script:
        gp = args.out / "sigma_sweep.gp"
        _gnuplot(gp, "set logscale xy\nset xlabel 'sigma'\nset ylabel 'mean dE'\n"
                     "plot 'sigma_sweep.csv' using 1:2:3 with yerrorbars\n")
        out.append(gp)
    return out


def cmd_param_sweep(cfg: ExperimentConfig, args) -> list[Path]:
    mean, _ = run_param_sweep(cfg, args.threads, _progress)
    table, rank = args.out / "param_sweep.csv", args.out / "param_sweep_ranking.json"
    write_csv(table, mean.rows(), PARAM_COLUMNS)
    sens = mean.sensitivity
    write_json(rank, {
        "E_star": mean.E_star,
        "ranking": [{"param_label": mean.labels[k][0], "layer": mean.labels[k][1], "sensitivity": float(sens[k])}
                    for k in mean.ranking()],
    })
    out = [table, rank]
    if args.gnuplot_script:
        gp = args.out / "param_sweep.gp"
        _gnuplot(gp, "set xlabel 'delta'\nset ylabel 'energy'\n"
                     "plot 'param_sweep.csv' using 3:4:($2) with points palette\n")
        out.append(gp)
    return out


def cmd_time_scan(cfg: ExperimentConfig, args) -> list[Path]:
    scan = run_time_scan(cfg, args.threads, _progress)
    table, plat = args.out / "time_scan.csv", args.out / "time_scan_plateaus.json"
    write_csv(table, scan.rows, SCAN_COLUMNS)
    write_json(plat, {str(p): v for p, v in scan.plateaus.items()})
    out = [table, plat]
    if args.gnuplot_script:
        gp = args.out / "time_scan.gp"
        _gnuplot(gp, "set xlabel 't_max'\nset ylabel 'p'\nset view map\n"
                     "splot 'time_scan.csv' using 2:1:3 with points pointtype 5 palette\n")
        out.append(gp)
    return out


COMMANDS = {
    "optimize": cmd_optimize,
    "sigma-sweep": cmd_sigma_sweep,
    "param-sweep": cmd_param_sweep,
    "time-scan": cmd_time_scan,
}


def _progress(msg: str) -> None:
    log.info(msg)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vqanoise", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, required=True, help="experiment config JSON")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        p.add_argument("--samples", type=int, help="override Monte Carlo samples per sigma")
        p.add_argument("--max-dm-qubits", type=int, default=MAX_DM_QUBITS,
                       help="largest register for exact density-matrix evaluation")
        p.add_argument("--gnuplot-script", action="store_true", help="also write a gnuplot script")
        p.add_argument("-q", "--quiet", action="store_true")
    return parser


def load_config(args) -> ExperimentConfig:
    try:
        text = args.config.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    cfg = ExperimentConfig.from_json(text)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.samples is not None:
        overrides["n_samples"] = args.samples
    return replace(cfg, **overrides) if overrides else cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    if args.threads < 1 or args.max_dm_qubits < 0:
        print("error: --threads must be >= 1 and --max-dm-qubits >= 0", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args)
        ensure_dir(args.out)
        written = COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
