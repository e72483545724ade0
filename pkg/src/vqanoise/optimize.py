"""Parameter-shift gradients and multistart (optionally time-constrained) minimization."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize as scipy_minimize

from .ansatz import ParamMap, execution_time, pad_qaoa_params, qaoa_build, wrap_angles
from .hamiltonians import Hamiltonian, SpectralData, spectral_data
from ._kernels import shift_differences
from .quantum import Circuit, batch_energies, ground_overlap, run_circuit, run_gate_angles

log = logging.getLogger(__name__)

SHIFT = math.pi / 4
GTOL = 1e-7
MAXITER = 2000
FEAS_TOL = 1e-9
PENALTY_SCHEDULE = (1e1, 1e2, 1e3, 1e4, 1e5, 1e6)


@dataclass
class OptResult:
    params_star: np.ndarray
    energy_star: float
    iterations: int
    restarts_used: int
    converged: bool
    t_exec: float | None = None
    grad_norm: float = math.nan
    history: list[float] = field(default_factory=list, repr=False)


def default_restarts(p: int) -> int:
    return 20 if p <= 10 else 50


def gate_derivatives(circuit: Circuit, H: Hamiltonian, angles: np.ndarray) -> tuple[float, np.ndarray]:
    """Energy and ``dE/d(angle_g)`` for every gate from two shifted runs each."""
    q = circuit.num_gates
    batch = np.tile(angles, (2 * q + 1, 1))
    shift = np.eye(q) * SHIFT
    batch[1 : q + 1] += shift
    batch[q + 1 :] -= shift
    e = batch_energies(circuit, H, batch)
    return float(e[0]), e[1 : q + 1] - e[q + 1 :]


def _to_logical(circuit: Circuit, gate_grad: np.ndarray) -> np.ndarray:
    return np.bincount(circuit.param_ids, weights=circuit.coeffs * gate_grad, minlength=circuit.num_params)


def adjoint_gate_derivatives(circuit: Circuit, H: Hamiltonian, angles: np.ndarray) -> tuple[float, np.ndarray]:
    """Same shift-rule differences as :func:`gate_derivatives`, from one reverse sweep."""
    angles = np.ascontiguousarray(angles, dtype=float)
    psi = run_gate_angles(circuit, angles)
    lam = H.apply(psi)
    e = float(np.real(np.vdot(psi, lam)))
    if not circuit.num_gates:
        return e, np.zeros(0)
    return e, shift_differences(psi, np.ascontiguousarray(lam, dtype=complex), angles, *circuit.gate_tables)


def energy_and_gradient(circuit: Circuit, H: Hamiltonian, params, method: str = "shift") -> tuple[float, np.ndarray]:
    angles = circuit.gate_angles(params)
    if method == "shift":
        e, d = gate_derivatives(circuit, H, angles)
    elif method == "adjoint":
        e, d = adjoint_gate_derivatives(circuit, H, angles)
    else:
        raise ValueError(f"unknown gradient method {method!r}")
    return e, _to_logical(circuit, d)


def energy_gradient(circuit: Circuit, pm: ParamMap | None, params, H: Hamiltonian,
                    method: str = "shift") -> np.ndarray:
    """Exact gradient: ``c * [E(phi + pi/4) - E(phi - pi/4)]`` summed over each parameter's gates.

    ``method="adjoint"`` obtains the same differences from a reverse sweep in
    O(q) gate applications instead of 2q circuit runs.
    """
    params = np.asarray(params, dtype=float)
    if params.shape != (circuit.num_params,):
        raise ValueError(f"expected {circuit.num_params} parameters, got shape {params.shape}")
    return energy_and_gradient(circuit, H, params, method)[1]


def _sub_rng(seed: int, cell: int, restart: int) -> np.random.Generator:
    return np.random.default_rng([seed, cell, restart])


def _random_start(pm: ParamMap, rng: np.random.Generator) -> np.ndarray:
    hi = np.array([b for _, b in pm.bounds])
    return rng.uniform(0.0, 1.0, size=hi.size) * hi


def _local_search(fun: Callable, x0: np.ndarray, bounds=None, maxiter: int = MAXITER, gtol: float = GTOL):
    return scipy_minimize(
        fun, x0, jac=True, method="L-BFGS-B", bounds=bounds,
        options={"maxiter": maxiter, "gtol": gtol, "ftol": 1e-15, "maxcor": 30},
    )


def _pick_best(results: Sequence[OptResult]) -> OptResult:
    # Lowest energy; ties go to the lowest restart index so serial == parallel.
    best = min(range(len(results)), key=lambda i: (results[i].energy_star, i))
    return results[best]


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _unconstrained_run(circuit: Circuit, H: Hamiltonian, x0: np.ndarray, maxiter: int, gtol: float) -> OptResult:
    def fun(x):
        return energy_and_gradient(circuit, H, x, "adjoint")

    res = _local_search(fun, x0, maxiter=maxiter, gtol=gtol)
    e, g = energy_and_gradient(circuit, H, res.x)
    gnorm = float(np.max(np.abs(g), initial=0.0))
    return OptResult(res.x, e, int(res.nit), 1, gnorm < 1e-5 and bool(np.isfinite(e)), grad_norm=gnorm)


def minimize(circuit: Circuit, pm: ParamMap, H: Hamiltonian, restarts: int | None = None, seed: int = 0,
             *, cell: int = 0, threads: int = 1, maxiter: int = MAXITER, gtol: float = GTOL,
             starts: Sequence[np.ndarray] = ()) -> OptResult:
    """Best of ``restarts`` L-BFGS runs from seeded random points in the parameter boxes.

    ``converged`` means the best point's gradient infinity-norm is below 1e-5.
    """
    restarts = default_restarts(_depth(pm)) if restarts is None else restarts
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    inits = [np.asarray(s, dtype=float) for s in starts]
    inits += [_random_start(pm, _sub_rng(seed, cell, r)) for r in range(restarts)]

    def run(x0):
        try:
            return _unconstrained_run(circuit, H, x0, maxiter, gtol)
        except (FloatingPointError, ValueError, np.linalg.LinAlgError) as exc:
            log.warning("local search failed: %s", exc)
            return OptResult(x0, math.inf, 0, 1, False)

    results = _map(run, inits, threads)
    best = _pick_best(results)
    best.restarts_used = len(results)
    best.iterations = sum(r.iterations for r in results)
    if pm.is_qaoa:
        best.t_exec = execution_time(pm, best.params_star)
    return best


def _depth(pm: ParamMap) -> int:
    return max((layer for _, layer in pm.labels), default=1)


# --- execution-time constrained search ---------------------------------------


def project_time(x: np.ndarray, t_max: float) -> np.ndarray:
    """Radially shrink box-wrapped angles onto ``sum(x) <= t_max``."""
    total = float(np.sum(x))
    if total <= t_max:
        return x
    return x * (t_max / total) if total > 0 else x


def _into_box(pm: ParamMap, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    hi = np.array([b for _, b in pm.bounds])
    return np.where((x >= 0) & (x <= hi), x, wrap_angles(pm, x))


def _constrained_run(circuit: Circuit, H: Hamiltonian, pm: ParamMap, x0: np.ndarray, t_max: float,
                     maxiter: int, gtol: float) -> OptResult:
    bounds = [(0.0, hi) for _, hi in pm.bounds]
    x = np.clip(x0, 0.0, [hi for _, hi in bounds])
    nit = 0
    for mu in PENALTY_SCHEDULE:
        def fun(v, mu=mu):
            e, g = energy_and_gradient(circuit, H, v, "adjoint")
            viol = max(0.0, float(np.sum(v)) - t_max)
            return e + mu * viol * viol, g + 2 * mu * viol

        res = _local_search(fun, x, bounds=bounds, maxiter=maxiter, gtol=gtol)
        x, nit = res.x, nit + int(res.nit)
        if np.sum(x) - t_max <= FEAS_TOL:
            break
    x = project_time(np.clip(x, 0.0, [hi for _, hi in bounds]), t_max)
    e, g = energy_and_gradient(circuit, H, x)
    return OptResult(x, e, nit, 1, True, t_exec=float(np.sum(x)), grad_norm=float(np.max(np.abs(g))))


def minimize_constrained(circuit: Circuit, pm: ParamMap, H: Hamiltonian, t_max: float, restarts: int | None = None,
                         seed: int = 0, warm_starts: Sequence[np.ndarray] = (), *, cell: int = 0, threads: int = 1,
                         maxiter: int = MAXITER, gtol: float = GTOL) -> OptResult:
    """Minimize the energy subject to ``execution_time <= t_max``.

    Exterior quadratic penalty with an escalating weight inside the angle boxes,
    then radial projection onto the feasible set.  Every (projected) warm start
    is itself a candidate, so the result is never worse than any of them.
    """
    if t_max < 0:
        raise ValueError("t_max must be >= 0 (infeasible otherwise)")
    if not pm.is_qaoa:
        raise ValueError("time-constrained search needs a QAOA parameter map")
    restarts = default_restarts(_depth(pm)) if restarts is None else restarts
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    warm = [project_time(_into_box(pm, w), t_max) for w in warm_starts]
    candidates = [OptResult(w, float(batch_energies(circuit, H, circuit.gate_angles(w)[None])[0]), 0, 1, True,
                            t_exec=float(np.sum(w))) for w in warm]
    inits = warm + [project_time(_random_start(pm, _sub_rng(seed, cell, r)), t_max) for r in range(restarts)]

    def run(x0):
        if t_max == 0:
            x = np.zeros_like(x0)
            e = float(batch_energies(circuit, H, circuit.gate_angles(x)[None])[0])
            return OptResult(x, e, 0, 1, True, t_exec=0.0)
        try:
            return _constrained_run(circuit, H, pm, x0, t_max, maxiter, gtol)
        except (FloatingPointError, ValueError, np.linalg.LinAlgError) as exc:
            log.warning("constrained search failed: %s", exc)
            return OptResult(x0, math.inf, 0, 1, False)

    results = candidates + _map(run, inits, threads)
    best = _pick_best(results)
    best.restarts_used = len(inits)
    best.iterations = sum(r.iterations for r in results)
    best.t_exec = execution_time(pm, best.params_star)
    return best


# --- depth x budget scan --------------------------------------------------------


@dataclass
class ScanResult:
    rows: list[dict]
    plateaus: dict[int, list[dict]]
    params: dict[tuple[int, float], np.ndarray] = field(repr=False, default_factory=dict)

    def energy_table(self) -> tuple[list[int], list[float], np.ndarray]:
        ps = sorted({r["p"] for r in self.rows})
        ts = sorted({r["t_max"] for r in self.rows})
        table = np.full((len(ps), len(ts)), np.nan)
        for r in self.rows:
            table[ps.index(r["p"]), ts.index(r["t_max"])] = r["E_star"]
        return ps, ts, table


def find_plateaus(t_grid: Sequence[float], energies: Sequence[float], tol: float = 1e-6) -> list[dict]:
    """Maximal runs of two or more consecutive budgets whose optimum energy stays flat."""
    out = []
    start = 0
    for i in range(1, len(energies) + 1):
        if i == len(energies) or abs(energies[i] - energies[i - 1]) > tol:
            if i - start >= 2:
                out.append({"t_start": t_grid[start], "t_end": t_grid[i - 1], "energy": float(energies[start])})
            start = i
    return out


def distinct_plateau_levels(plateaus: Sequence[dict], tol: float = 1e-6) -> int:
    levels: list[float] = []
    for p in plateaus:
        if all(abs(p["energy"] - lv) > tol for lv in levels):
            levels.append(p["energy"])
    return len(levels)


def depth_time_scan(H: Hamiltonian, p_range: Sequence[int], t_max_grid: Sequence[float], restarts: int = 5,
                    seed: int = 0, *, mode: str = "decomposed", threads: int = 1,
                    spec: SpectralData | None = None, plateau_tol: float = 1e-6,
                    progress: Callable[[str], None] | None = None) -> ScanResult:
    """Optimum energy for every (depth, budget) cell, warm-started along both axes.

    Cell (p, t) starts from all lower-budget optima at the same depth and from
    the depth ``p - 1`` optimum at budget ``t`` padded with an idle layer.
    """
    ps = sorted(int(p) for p in p_range)
    ts = sorted(float(t) for t in t_max_grid)
    if not ps or not ts:
        raise ValueError("depth and budget grids must be non-empty")
    spec = spectral_data(H) if spec is None else spec
    rows: list[dict] = []
    params: dict[tuple[int, float], np.ndarray] = {}
    plateaus: dict[int, list[dict]] = {}
    for ip, p in enumerate(ps):
        circuit, pm = qaoa_build(H, p, mode)
        energies = []
        for it, t in enumerate(ts):
            warm = [params[(p, t2)] for t2 in ts[:it]]
            if ip > 0:
                prev = ps[ip - 1]
                warm.append(pad_qaoa_params(params[(prev, t)], prev, p))
            res = minimize_constrained(circuit, pm, H, t, restarts, seed, warm,
                                       cell=ip * len(ts) + it, threads=threads)
            params[(p, t)] = res.params_star
            energies.append(res.energy_star)
            rows.append({
                "p": p, "t_max": t, "E_star": res.energy_star, "t_exec": res.t_exec,
                "overlap": ground_overlap(run_circuit(circuit, res.params_star), spec),
                "converged": res.converged,
            })
            if progress:
                progress(f"p={p} t_max={t:g} E*={res.energy_star:.6f}")
        plateaus[p] = find_plateaus(ts, energies, plateau_tol)
    return ScanResult(rows, plateaus, params)
