"""Overlap bounds, power-law fits and the noise-induced shift of the optimum."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import minimize as scipy_minimize

from .ansatz import ParamMap
from .hamiltonians import Hamiltonian, SpectralData
from .noise import NoiseSpec, PerturbationReport, exact_noisy_energy, sigma_threshold
from .optimize import SHIFT, energy_and_gradient
from .quantum import MAX_DM_QUBITS, Circuit, batch_energies, evolve_density

STATIONARY_TOL = 1e-5
PINV_RTOL = 1e-8


@dataclass(frozen=True)
class StabilityBounds:
    lower: float
    upper: float
    accepted: bool

    @property
    def clamped(self) -> tuple[float, float]:
        return min(max(self.lower, 0.0), 1.0), min(max(self.upper, 0.0), 1.0)


def stability_bounds(E: float, spec: SpectralData) -> StabilityBounds:
    """Ground-overlap bounds ``1 - (E - E_g)/Delta <= |<psi|g>|^2 <= 1 - (E - E_g)/(E_m - E_g)``."""
    width = spec.E_m - spec.E_g
    if width <= 0:
        raise ValueError("flat spectrum: overlap bounds are undefined")
    excess = E - spec.E_g
    return StabilityBounds(1 - excess / spec.delta, 1 - excess / width, bool(E < spec.E_g + spec.delta))


# --- fits -----------------------------------------------------------------------


@dataclass(frozen=True)
class QuadraticFit:
    c: float
    residual: float
    max_valid_sigma: float
    n_points: int


def fit_quadratic(report: PerturbationReport, validity_cut: float = 1.0, source: str = "mc",
                  rel_tol: float = 0.1) -> QuadraticFit:
    """Weighted least squares of ``dE = c sigma^2`` over points with ``q sigma^2 <= validity_cut``.

    ``residual`` is the weighted RMS misfit relative to the data's weighted RMS.
    ``max_valid_sigma`` is the largest grid spread up to which every point sits
    within ``rel_tol`` of the fitted parabola.
    """
    sig = np.asarray(report.sigma_grid, dtype=float)
    if source == "mc":
        y = np.asarray(report.mean_dE, dtype=float)
        err = np.asarray(report.stderr, dtype=float)
    elif source == "exact":
        if not report.exact_dE or any(v is None for v in report.exact_dE):
            raise ValueError("report has no exact values")
        y = np.asarray(report.exact_dE, dtype=float)
        err = np.zeros_like(y)
    else:
        raise ValueError(f"unknown source {source!r}")
    use = (sig > 0) & (report.q * sig**2 <= validity_cut)
    if use.sum() < 3:
        raise ValueError(f"need >= 3 nonzero grid points with q*sigma^2 <= {validity_cut}, have {use.sum()}")
    x2, yy, ee = sig[use] ** 2, y[use], err[use]
    w = 1.0 / ee**2 if np.all(ee > 0) else np.ones_like(yy)
    c = float(np.sum(w * x2 * yy) / np.sum(w * x2 * x2))
    denom = math.sqrt(float(np.sum(w * yy**2)))
    residual = math.sqrt(float(np.sum(w * (yy - c * x2) ** 2))) / denom if denom > 0 else 0.0
    max_valid = 0.0
    for s, v in zip(sig, y):
        if s == 0:
            continue
        model = c * s * s
        if abs(v - model) > rel_tol * abs(model):
            break
        max_valid = float(s)
    return QuadraticFit(c, residual, max_valid, int(use.sum()))


def loglog_fit(x: Sequence[float], y: Sequence[float]) -> tuple[float, float, float]:
    """Slope, intercept and relative RMS residual of ``log y = slope log x + intercept``."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = np.exp(slope * lx + intercept)
    rel = np.sqrt(np.mean(((np.exp(ly) - pred) / pred) ** 2))
    return float(slope), float(intercept), float(rel)


# --- derivatives --------------------------------------------------------------


def _jacobian(circuit: Circuit) -> np.ndarray:
    J = np.zeros((circuit.num_gates, circuit.num_params))
    J[np.arange(circuit.num_gates), circuit.param_ids] = circuit.coeffs
    return J


def noisy_gradients_Bk(circuit: Circuit, pm: ParamMap | None, params, H: Hamiltonian) -> np.ndarray:
    """Row ``k``: gradient of the energy of the circuit whose gate ``k`` is rotated by pi/2."""
    base = circuit.gate_angles(params)
    q = circuit.num_gates
    eye = np.eye(q)
    rows = []
    for k in range(q):
        shifted = base + eye[k] * (math.pi / 2)
        rows.append(shifted + eye * SHIFT)
        rows.append(shifted - eye * SHIFT)
    e = batch_energies(circuit, H, np.concatenate(rows)).reshape(q, 2, q)
    return (e[:, 0, :] - e[:, 1, :]) @ _jacobian(circuit)


def hessian(circuit: Circuit, pm: ParamMap | None, params, H: Hamiltonian) -> np.ndarray:
    """Nested parameter-shift Hessian (four shifted runs per gate pair), symmetrized."""
    base = circuit.gate_angles(params)
    q = circuit.num_gates
    ii, jj = np.triu_indices(q)
    eye = np.eye(q)
    batch = np.empty((4, ii.size, q))
    for slot, (si, sj) in enumerate(((1, 1), (1, -1), (-1, 1), (-1, -1))):
        batch[slot] = base + si * SHIFT * eye[ii] + sj * SHIFT * eye[jj]
    e = batch_energies(circuit, H, batch.reshape(-1, q)).reshape(4, ii.size)
    G = np.zeros((q, q))
    G[ii, jj] = e[0] - e[1] - e[2] + e[3]
    G[jj, ii] = G[ii, jj]
    J = _jacobian(circuit)
    Hm = J.T @ G @ J
    return 0.5 * (Hm + Hm.T)


def _pinv_psd(M: np.ndarray, rtol: float = PINV_RTOL) -> tuple[np.ndarray, int]:
    evals, evecs = np.linalg.eigh(M)
    top = float(np.max(evals, initial=0.0))
    keep = evals > rtol * top if top > 0 else np.zeros_like(evals, dtype=bool)
    inv = (evecs[:, keep] / evals[keep]) @ evecs[:, keep].T
    return inv, int(keep.sum())


@dataclass(frozen=True)
class OptimumShift:
    delta_theta_star: np.ndarray
    predicted_gain: float
    hessian_rank: int
    grad_norm: float
    stationary: bool


def optimum_shift(circuit: Circuit, pm: ParamMap | None, params_star, H: Hamiltonian, spec: NoiseSpec,
                  stationary_tol: float = STATIONARY_TOL) -> OptimumShift:
    """Second-order shift of the optimum under independent gate noise.

    ``delta = -H^+ sum_k a_k B^k`` with ``H^+`` the pseudo-inverse over Hessian
    eigenvalues above ``1e-8`` of the largest.  The gain is the quadratic
    model's change ``delta^T H delta / 2 + sum_k a_k delta^T B^k``.
    """
    _, grad = energy_and_gradient(circuit, H, params_star)
    gnorm = float(np.max(np.abs(grad), initial=0.0))
    a = spec.gate_error_probabilities(circuit, pm)
    g = a @ noisy_gradients_Bk(circuit, pm, params_star, H)
    Hm = hessian(circuit, pm, params_star, H)
    inv, rank = _pinv_psd(Hm)
    delta = -inv @ g
    gain = 0.5 * float(delta @ Hm @ delta) + float(delta @ g)
    return OptimumShift(delta, gain, rank, gnorm, gnorm < stationary_tol)


def noisy_energy_and_gradient(circuit: Circuit, params, H: Hamiltonian, spec: NoiseSpec, pm: ParamMap | None = None,
                              max_dm_qubits: int = MAX_DM_QUBITS) -> tuple[float, np.ndarray]:
    """Exact-channel energy and its gradient; each gate's channel is a degree-2 trig polynomial."""
    probs = spec.gate_error_probabilities(circuit, pm)
    base = circuit.gate_angles(params)

    def energy_at(angles):
        return H.dm_expectation(evolve_density(circuit, angles, probs, max_dm_qubits))

    eye = np.eye(circuit.num_gates) * SHIFT
    d = np.array([energy_at(base + eye[g]) - energy_at(base - eye[g]) for g in range(circuit.num_gates)])
    return energy_at(base), _jacobian(circuit).T @ d


def reoptimize_noisy(circuit: Circuit, pm: ParamMap | None, params_star, H: Hamiltonian, spec: NoiseSpec,
                     gtol: float = 1e-13, maxiter: int = 5000) -> tuple[np.ndarray, float]:
    """Minimize the exact noisy energy directly, starting from ``params_star``."""
    if not spec.is_independent(circuit, pm):
        raise ValueError("direct reoptimization needs independent noise")
    res = scipy_minimize(
        lambda x: noisy_energy_and_gradient(circuit, x, H, spec, pm),
        np.asarray(params_star, dtype=float), jac=True, method="BFGS",
        options={"gtol": gtol, "maxiter": maxiter},
    )
    return res.x, exact_noisy_energy(circuit, pm, res.x, H, spec)


def analysis_summary(E_star: float, spec: SpectralData, q: int, fit: QuadraticFit | None = None) -> dict:
    b = stability_bounds(E_star, spec)
    lo, hi = b.clamped
    return {
        "E_star": E_star,
        "E_g": spec.E_g,
        "delta": spec.delta,
        "E_m": spec.E_m,
        "bounds": {"lower": b.lower, "upper": b.upper, "lower_clamped": lo, "upper_clamped": hi,
                   "accepted": b.accepted},
        "sigma_threshold": sigma_threshold(E_star, spec, q),
        "fit_c": None if fit is None else fit.c,
        "max_valid_sigma": None if fit is None else fit.max_valid_sigma,
    }
