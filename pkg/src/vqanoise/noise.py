"""Random gate-angle noise: Monte Carlo, exact averaged channel, first-order theory.

Noise draws ``d ~ uniform(-sigma, sigma)`` per noise group.  Under ``per-gate``
grouping every gate angle receives its own draw.  Under ``per-parameter`` and
``per-layer`` grouping the draw shifts the logical parameter of the group, so
a gate with coefficient ``c`` moves by ``c * d``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .ansatz import ParamMap
from .hamiltonians import Hamiltonian, SpectralData
from .quantum import MAX_DM_QUBITS, Circuit, batch_energies, evolve_density

GROUPINGS = ("per-gate", "per-parameter", "per-layer")
MC_CHUNK = 500


def sin2_moment(sigma):
    """``<sin(d)**2>`` for ``d ~ uniform(-sigma, sigma)``: ``1/2 - sin(2 sigma) / (4 sigma)``."""
    sigma = np.abs(np.asarray(sigma, dtype=float))
    small = sigma < 1e-3
    safe = np.where(small, 1.0, sigma)
    direct = 0.5 - np.sin(2 * safe) / (4 * safe)
    s2 = sigma * sigma
    series = s2 / 3 - s2 * s2 / 15 + 2 * s2**3 / 315
    out = np.where(small, series, direct)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class NoiseSpec:
    """Uniform angle noise; ``sigma`` is a scalar or one spread per noise group."""

    sigma: float | tuple[float, ...]
    grouping: str = "per-gate"
    distribution: str = "uniform"

    def __post_init__(self) -> None:
        if self.grouping not in GROUPINGS:
            raise ValueError(f"grouping must be one of {GROUPINGS}, got {self.grouping!r}")
        if self.distribution != "uniform":
            raise ValueError("only the uniform distribution is supported")
        if not np.isscalar(self.sigma):
            object.__setattr__(self, "sigma", tuple(float(s) for s in self.sigma))
        if np.any(np.asarray(self.sigma) < 0):
            raise ValueError("sigma must be non-negative")

    def group_index(self, circuit: Circuit, pm: ParamMap | None = None) -> tuple[np.ndarray, int]:
        """Noise group of every gate and the number of groups."""
        q = circuit.num_gates
        if self.grouping == "per-gate":
            return np.arange(q), q
        if self.grouping == "per-parameter":
            return circuit.param_ids.copy(), circuit.num_params
        if pm is None:
            raise ValueError("per-layer grouping needs a ParamMap")
        blocks = np.asarray(pm.gate_blocks)
        uniq, idx = np.unique(blocks, return_inverse=True)
        return idx, uniq.size

    def group_sigmas(self, n_groups: int) -> np.ndarray:
        sig = np.broadcast_to(np.asarray(self.sigma, dtype=float), (n_groups,)) if np.isscalar(self.sigma) \
            else np.asarray(self.sigma, dtype=float)
        if sig.shape != (n_groups,):
            raise ValueError(f"NoiseSpec has {sig.size} spreads for {n_groups} noise groups")
        return np.array(sig)

    def gate_scale(self, circuit: Circuit) -> np.ndarray:
        """Multiplier mapping a group draw onto each gate angle."""
        if self.grouping == "per-gate":
            return np.ones(circuit.num_gates)
        return circuit.coeffs.copy()

    def is_independent(self, circuit: Circuit, pm: ParamMap | None = None) -> bool:
        idx, n_groups = self.group_index(circuit, pm)
        return np.bincount(idx, minlength=n_groups).max(initial=0) <= 1

    def gate_error_probabilities(self, circuit: Circuit, pm: ParamMap | None = None) -> np.ndarray:
        """Exact ``a_k = <sin(d_k)**2>`` of every gate angle."""
        idx, n_groups = self.group_index(circuit, pm)
        sig = self.group_sigmas(n_groups)[idx] * np.abs(self.gate_scale(circuit))
        return np.atleast_1d(sin2_moment(sig))


@dataclass
class PerturbationReport:
    sigma_grid: list[float]
    mean_dE: list[float]
    stderr: list[float]
    n_samples: int
    q: int
    n: int
    exact_dE: list[float | None] = field(default_factory=list)
    fit: object | None = None

    def rows(self):
        exact = self.exact_dE or [None] * len(self.sigma_grid)
        for s, m, e, x in zip(self.sigma_grid, self.mean_dE, self.stderr, exact):
            yield {"sigma": s, "mean_dE": m, "stderr": e, "exact_dE": x, "q": self.q, "n": self.n}


def sample_delta(spec: NoiseSpec, n_groups: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Independent ``uniform(-sigma_k, sigma_k)`` draws, one per noise group."""
    sig = spec.group_sigmas(n_groups)
    shape = (n_groups,) if size is None else (size, n_groups)
    return rng.uniform(-1.0, 1.0, size=shape) * sig


def _sample_energies(circuit, pm, params, H, spec, n_samples, seed) -> np.ndarray:
    idx, n_groups = spec.group_index(circuit, pm)
    scale = spec.gate_scale(circuit)
    base = circuit.gate_angles(params)
    out = np.empty(n_samples)
    # Chunk c always draws from rng([seed, c]); results do not depend on scheduling.
    for c, lo in enumerate(range(0, n_samples, MC_CHUNK)):
        size = min(MC_CHUNK, n_samples - lo)
        rng = np.random.default_rng([seed, c])
        deltas = sample_delta(spec, n_groups, rng, size)
        out[lo : lo + size] = batch_energies(circuit, H, base + deltas[:, idx] * scale)
    return out


def mc_noisy_energy(circuit: Circuit, pm: ParamMap | None, params, H: Hamiltonian, spec: NoiseSpec,
                    n_samples: int = 2000, seed: int = 0) -> tuple[float, float]:
    """Sample mean and standard error of the energy over perturbed circuits."""
    if n_samples < 2:
        raise ValueError("need at least 2 samples")
    e = _sample_energies(circuit, pm, params, H, spec, n_samples, seed)
    return float(e.mean()), float(e.std(ddof=1) / math.sqrt(n_samples))


def exact_noisy_energy(circuit: Circuit, pm: ParamMap | None, params, H: Hamiltonian, spec: NoiseSpec,
                       max_dm_qubits: int = MAX_DM_QUBITS) -> float:
    """``Tr(rho H)`` with each gate replaced by its exactly averaged channel.

    Valid for independent noise only; correlated groupings are rejected.
    """
    if not spec.is_independent(circuit, pm):
        raise ValueError(f"{spec.grouping} grouping correlates gates; use mc_noisy_energy")
    probs = spec.gate_error_probabilities(circuit, pm)
    rho = evolve_density(circuit, circuit.gate_angles(params), probs, max_dm_qubits)
    return H.dm_expectation(rho)


def shifted_gate_energies(circuit: Circuit, H: Hamiltonian, params) -> tuple[float, np.ndarray]:
    """Noiseless energy and the energies with gate ``k`` rotated by an extra pi/2."""
    base = circuit.gate_angles(params)
    angles = np.tile(base, (circuit.num_gates + 1, 1))
    angles[1:] += np.eye(circuit.num_gates) * (math.pi / 2)
    e = batch_energies(circuit, H, angles)
    return float(e[0]), e[1:]


def first_order_delta_e(circuit: Circuit, pm: ParamMap | None, params, H: Hamiltonian, spec: NoiseSpec) -> float:
    """``sum_k a_k (E_k - E)`` with ``E_k`` the energy after rotating gate k by pi/2."""
    probs = spec.gate_error_probabilities(circuit, pm)
    e0, ek = shifted_gate_energies(circuit, H, params)
    return float(probs @ (ek - e0))


def sigma_threshold(E_star: float, spec_data: SpectralData, q: int) -> float:
    """Largest uniform spread keeping the noisy energy below ``E_g + Delta``.

    Returns 0 when ``E_star`` already fails the acceptance condition and ``inf``
    when ``E_star == E_m``.
    """
    margin = spec_data.delta - (E_star - spec_data.E_g)
    if margin <= 0:
        return 0.0
    headroom = spec_data.E_m - E_star
    if headroom <= 0:
        return math.inf
    return math.sqrt(margin / (q * headroom))


def sigma_sweep(circuit: Circuit, pm: ParamMap | None, params, H: Hamiltonian, sigma_grid: Sequence[float],
                n_samples: int = 2000, seed: int = 0, grouping: str = "per-gate",
                max_dm_qubits: int = MAX_DM_QUBITS) -> PerturbationReport:
    """Monte Carlo energy shift per spread, with exact-channel values when feasible."""
    grid = [float(s) for s in sigma_grid]
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("sigma grid must be sorted ascending")
    e0 = float(batch_energies(circuit, H, circuit.gate_angles(params)[None])[0])
    means, errs, exact = [], [], []
    for i, sigma in enumerate(grid):
        spec = NoiseSpec(sigma, grouping)
        if sigma == 0:
            means.append(0.0)
            errs.append(0.0)
        else:
            e = _sample_energies(circuit, pm, params, H, spec, n_samples, _mix(seed, i)) - e0
            means.append(float(e.mean()))
            errs.append(float(e.std(ddof=1) / math.sqrt(n_samples)))
        if circuit.n <= max_dm_qubits and spec.is_independent(circuit, pm):
            exact.append(0.0 if sigma == 0 else exact_noisy_energy(circuit, pm, params, H, spec, max_dm_qubits) - e0)
        else:
            exact.append(None)
    return PerturbationReport(grid, means, errs, n_samples, circuit.num_gates, circuit.n, exact)


def _mix(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def ensemble_report(reports: Sequence[PerturbationReport]) -> PerturbationReport:
    """Mean of per-instance energy shifts with the ensemble standard error."""
    if not reports:
        raise ValueError("no reports to combine")
    grid = reports[0].sigma_grid
    if any(r.sigma_grid != grid for r in reports):
        raise ValueError("reports use different sigma grids")
    m = np.array([r.mean_dE for r in reports])
    err = m.std(axis=0, ddof=1) / math.sqrt(len(reports)) if len(reports) > 1 else np.array(reports[0].stderr)
    exact: list[float | None] = []
    for i in range(len(grid)):
        vals = [r.exact_dE[i] if r.exact_dE else None for r in reports]
        exact.append(None if any(v is None for v in vals) else float(np.mean(vals)))
    q = int(round(np.mean([r.q for r in reports])))
    return PerturbationReport(list(grid), m.mean(axis=0).tolist(), np.asarray(err).tolist(),
                              reports[0].n_samples, q, reports[0].n, exact)


@dataclass
class ParamSweep:
    labels: list[tuple[str, int]]
    delta_grid: list[float]
    energies: np.ndarray  # (num_params, len(delta_grid))
    E_star: float

    @property
    def sensitivity(self) -> np.ndarray:
        """Largest energy deviation from ``E_star`` over the grid, per parameter."""
        return np.max(np.abs(self.energies - self.E_star), axis=1)

    def ranking(self) -> list[int]:
        """Parameter indices from least to most sensitive."""
        return [int(k) for k in np.argsort(self.sensitivity, kind="stable")]

    def rows(self):
        for k, (kind, layer) in enumerate(self.labels):
            for d, e in zip(self.delta_grid, self.energies[k]):
                yield {"param_label": kind, "layer": layer, "delta": d, "energy": float(e)}


def per_parameter_sweep(circuit: Circuit, pm: ParamMap, params_star, H: Hamiltonian,
                        delta_grid: Sequence[float]) -> ParamSweep:
    """Energy with one logical parameter shifted by each ``delta``, the rest fixed."""
    params_star = np.asarray(params_star, dtype=float)
    grid = np.asarray(delta_grid, dtype=float)
    P = circuit.num_params
    shifted = np.repeat(params_star[None, :], P * grid.size, axis=0)
    shifted[np.arange(P * grid.size), np.repeat(np.arange(P), grid.size)] += np.tile(grid, P)
    energies = batch_energies(circuit, H, circuit.gate_angles(shifted)).reshape(P, grid.size)
    e_star = float(batch_energies(circuit, H, circuit.gate_angles(params_star)[None])[0])
    return ParamSweep(list(pm.labels), grid.tolist(), energies, e_star)
