"""End-to-end workflows behind the CLI subcommands."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .analysis import QuadraticFit, analysis_summary, fit_quadratic, stability_bounds
from .ansatz import ParamMap, checkerboard, qaoa_build
from .hamiltonians import (Hamiltonian, SpectralData, build_3sat, build_ising, build_maxcut, build_search,
                           spectral_data)
from .instances import ExperimentConfig, gen_3sat, gen_maxcut, ising_fields
from .noise import ParamSweep, PerturbationReport, ensemble_report, per_parameter_sweep, sigma_sweep
from .optimize import (OptResult, ScanResult, _map, default_restarts, depth_time_scan, minimize,
                       minimize_constrained)
from .quantum import MAX_DM_QUBITS, Circuit, ground_overlap, run_circuit

log = logging.getLogger(__name__)


@dataclass
class Problem:
    name: str
    H: Hamiltonian
    circuit: Circuit
    pm: ParamMap
    spec: SpectralData
    source: object = None


def build_problem(cfg: ExperimentConfig, index: int, depth: int | None = None) -> Problem:
    """Instance ``index`` of the configured ensemble with its ansatz."""
    depth = cfg.depth if depth is None else depth
    sub_seed = [cfg.seed, index]
    source: object
    if cfg.problem == "ising":
        h = float(ising_fields(*cfg.h_range, cfg.instance_count, cfg.seed)[index])
        H, source = build_ising(cfg.n, h), h
        circuit, pm = checkerboard(cfg.n, depth)
        name = f"ising-n{cfg.n}-h{h:.6f}"
    else:
        if cfg.problem == "sat3":
            source = gen_3sat(cfg.n, cfg.num_clauses, cfg.unique, sub_seed)
            H = build_3sat(source)
        elif cfg.problem == "maxcut":
            source = gen_maxcut(cfg.n, cfg.edge_prob, sub_seed)
            H = build_maxcut(source)
        else:
            source = cfg.target
            H = build_search(cfg.n, cfg.target)
        circuit, pm = qaoa_build(H, depth, cfg.mode)
        name = f"{cfg.problem}-n{cfg.n}-{index}"
    return Problem(name, H, circuit, pm, spectral_data(H), source)


def optimize_problem(prob: Problem, cfg: ExperimentConfig, index: int, threads: int = 1) -> OptResult:
    """Multistart optimum; ``threads`` spreads restarts, results do not depend on it."""
    restarts = cfg.restarts or default_restarts(cfg.depth)
    if cfg.t_max is not None and prob.pm.is_qaoa:
        return minimize_constrained(prob.circuit, prob.pm, prob.H, cfg.t_max, restarts, cfg.seed,
                                    cell=index, threads=threads)
    return minimize(prob.circuit, prob.pm, prob.H, restarts, cfg.seed, cell=index, threads=threads)


def _split_threads(cfg: ExperimentConfig, threads: int) -> tuple[int, int]:
    # Parallelize over instances when there are several, otherwise over restarts.
    return (threads, 1) if cfg.instance_count > 1 else (1, threads)


def optimize_record(prob: Problem, res: OptResult) -> dict:
    state = run_circuit(prob.circuit, res.params_star)
    summary = analysis_summary(res.energy_star, prob.spec, prob.circuit.num_gates)
    summary.update({
        "instance": prob.name,
        "q": prob.circuit.num_gates,
        "params_star": [float(x) for x in res.params_star],
        "overlap": ground_overlap(state, prob.spec),
        "iterations": res.iterations,
        "restarts_used": res.restarts_used,
        "converged": res.converged,
        "grad_norm": res.grad_norm,
        "t_exec": res.t_exec,
    })
    return summary


def run_optimize(cfg: ExperimentConfig, threads: int = 1, progress: Callable[[str], None] | None = None) -> list[dict]:
    outer, inner = _split_threads(cfg, threads)

    def job(i):
        prob = build_problem(cfg, i)
        res = optimize_problem(prob, cfg, i, inner)
        if progress:
            progress(f"{prob.name}: E*={res.energy_star:.8f}")
        return optimize_record(prob, res)

    return _map(job, range(cfg.instance_count), outer)


@dataclass
class SweepOutcome:
    reports: list[PerturbationReport]
    ensemble: PerturbationReport
    summaries: list[dict]
    fit: QuadraticFit | None


def _instance_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index, 7]).generate_state(1)[0])


def _safe_fit(report: PerturbationReport, cut: float, source: str = "mc") -> QuadraticFit | None:
    try:
        return fit_quadratic(report, cut, source)
    except ValueError as exc:
        log.info("no quadratic fit: %s", exc)
        return None


def run_sigma_sweep(cfg: ExperimentConfig, threads: int = 1, max_dm_qubits: int = MAX_DM_QUBITS,
                    progress: Callable[[str], None] | None = None) -> SweepOutcome:
    grouping = "per-layer" if cfg.mode == "layerwise" and cfg.problem != "ising" else "per-gate"

    outer, inner = _split_threads(cfg, threads)

    def job(i):
        prob = build_problem(cfg, i)
        res = optimize_problem(prob, cfg, i, inner)
        rep = sigma_sweep(prob.circuit, prob.pm, res.params_star, prob.H, cfg.sigma_grid, cfg.n_samples,
                          seed=_instance_seed(cfg.seed, i), grouping=grouping, max_dm_qubits=max_dm_qubits)
        rep.fit = _safe_fit(rep, cfg.validity_cut)
        summary = analysis_summary(res.energy_star, prob.spec, prob.circuit.num_gates, rep.fit)
        summary["instance"] = prob.name
        summary["q"] = prob.circuit.num_gates
        if progress:
            progress(f"{prob.name}: E*={res.energy_star:.6f} q={prob.circuit.num_gates}")
        return rep, summary

    out = _map(job, range(cfg.instance_count), outer)
    reports = [r for r, _ in out]
    ens = ensemble_report(reports)
    ens.fit = _safe_fit(ens, cfg.validity_cut)
    return SweepOutcome(reports, ens, [s for _, s in out], ens.fit)


def run_param_sweep(cfg: ExperimentConfig, threads: int = 1, progress: Callable[[str], None] | None = None):
    """Per-parameter energy table averaged over instances, plus per-instance sweeps."""

    outer, inner = _split_threads(cfg, threads)

    def job(i):
        prob = build_problem(cfg, i)
        res = optimize_problem(prob, cfg, i, inner)
        if progress:
            progress(f"{prob.name}: E*={res.energy_star:.6f}")
        return per_parameter_sweep(prob.circuit, prob.pm, res.params_star, prob.H, cfg.delta_grid)

    sweeps = _map(job, range(cfg.instance_count), outer)
    first = sweeps[0]
    mean = ParamSweep(first.labels, first.delta_grid, np.mean([s.energies for s in sweeps], axis=0),
                      float(np.mean([s.E_star for s in sweeps])))
    return mean, sweeps


def run_time_scan(cfg: ExperimentConfig, threads: int = 1, progress: Callable[[str], None] | None = None) -> ScanResult:
    if cfg.problem == "ising":
        raise ValueError("time-scan needs a QAOA problem (sat3, maxcut or search)")
    p_range = cfg.p_range or list(range(1, cfg.depth + 1))
    t_grid = cfg.t_max_grid or [float(t) for t in np.arange(0.0, 3 * np.pi * max(p_range) + 1e-9, 1.0)]
    prob = build_problem(cfg, 0)
    restarts = cfg.restarts or 5
    return depth_time_scan(prob.H, p_range, t_grid, restarts, cfg.seed, mode=cfg.mode, threads=threads,
                           spec=prob.spec, progress=progress)


def bounds_record(E: float, spec: SpectralData) -> dict:
    b = stability_bounds(E, spec)
    return {"lower": b.lower, "upper": b.upper, "accepted": b.accepted}
