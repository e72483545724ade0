"""Checkerboard VQE and QAOA circuit builders with their parameter maps."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hamiltonians import Hamiltonian
from .quantum import Circuit, Gate, PauliString

GAMMA_PERIOD = 2 * math.pi
BETA_PERIOD = math.pi


@dataclass(frozen=True)
class ParamMap:
    """Which gates each logical parameter drives, plus labels and noise blocks.

    ``labels[k]`` is ``(kind, layer)`` with kind in ``gamma``/``beta``/``theta``
    and a 1-based layer.  ``gate_blocks[g]`` is the correlation block of gate
    ``g`` used by per-layer noise.
    """

    num_logical: int
    groups: tuple[tuple[tuple[int, float], ...], ...]
    labels: tuple[tuple[str, int], ...]
    gate_blocks: tuple[int, ...]
    mode: str = "decomposed"
    energy_offset: float = 0.0

    @property
    def is_qaoa(self) -> bool:
        return bool(self.labels) and all(kind in ("gamma", "beta") for kind, _ in self.labels)

    @property
    def default_grouping(self) -> str:
        return "per-layer" if self.mode == "layerwise" else "per-gate"

    @property
    def bounds(self) -> list[tuple[float, float]]:
        """Box ranges of each parameter (used for sampling, time accounting, reporting)."""
        box = {"gamma": GAMMA_PERIOD, "beta": BETA_PERIOD, "theta": 2 * math.pi}
        return [(0.0, box[kind]) for kind, _ in self.labels]

    def label(self, k: int) -> str:
        kind, layer = self.labels[k]
        return f"{kind}_{layer}"

    def layer_of(self, k: int) -> int:
        return self.labels[k][1]

    def kinds(self) -> np.ndarray:
        return np.array([kind for kind, _ in self.labels])


def _param_map(circuit: Circuit, labels, gate_blocks, mode="decomposed", energy_offset=0.0) -> ParamMap:
    groups: list[list[tuple[int, float]]] = [[] for _ in range(circuit.num_params)]
    for g, gate in enumerate(circuit.gates):
        groups[gate.param_id].append((g, gate.coeff))
    return ParamMap(
        num_logical=circuit.num_params,
        groups=tuple(tuple(grp) for grp in groups),
        labels=tuple(labels),
        gate_blocks=tuple(gate_blocks),
        mode=mode,
        energy_offset=energy_offset,
    )


def checkerboard(n: int, p: int) -> tuple[Circuit, ParamMap]:
    """Brick-wall ansatz with ``5 n p`` gates, one parameter per gate.

    Each layer holds two periodic brick rows (pairs starting on even, then odd
    qubits).  A brick is an XX gate followed by Z and X rotations on both of
    its qubits.
    """
    if n < 2 or n % 2:
        raise ValueError(f"checkerboard ansatz needs an even n >= 2, got {n}")
    if p < 1:
        raise ValueError("depth p must be >= 1")
    gates: list[Gate] = []
    labels: list[tuple[str, int]] = []
    blocks: list[int] = []

    def add(ops: dict[int, str], layer: int) -> None:
        gates.append(Gate(PauliString.from_sparse(n, ops), len(gates)))
        labels.append(("theta", layer + 1))
        blocks.append(layer)

    for layer in range(p):
        for start in (0, 1):
            for a in range(start, n, 2):
                b = (a + 1) % n
                add({a: "X", b: "X"}, layer)
                for q in (a, b):
                    add({q: "Z"}, layer)
                    add({q: "X"}, layer)
    circuit = Circuit(n, tuple(gates), len(gates), "zero")
    return circuit, _param_map(circuit, labels, blocks)


def qaoa_build(H: Hamiltonian, p: int, mode: str = "decomposed") -> tuple[Circuit, ParamMap]:
    """QAOA circuit with parameters ordered ``(gamma_1..gamma_p, beta_1..beta_p)``.

    The cost propagator ``exp(-i gamma H)`` is one gate per non-identity Pauli
    term; identity terms only shift energies and are recorded as
    ``energy_offset``.  ``mode="layerwise"`` keeps the same gates but marks every
    block as one noise-correlation group.
    """
    if mode not in ("decomposed", "layerwise"):
        raise ValueError(f"unknown QAOA mode {mode!r}")
    if not H.is_diagonal:
        raise ValueError("QAOA cost Hamiltonian must be diagonal (Z/I terms only)")
    if p < 1:
        raise ValueError("depth p must be >= 1")
    n = H.n
    terms = H.merged_terms()
    cost = [(c, P) for c, P in terms if not P.is_identity]
    offset = sum(c for c, P in terms if P.is_identity)
    gates: list[Gate] = []
    blocks: list[int] = []
    for k in range(p):
        for c, P in cost:
            gates.append(Gate(P, k, -c))
            blocks.append(2 * k)
        for j in range(n):
            gates.append(Gate(PauliString.from_sparse(n, {j: "X"}), p + k, -1.0))
            blocks.append(2 * k + 1)
    labels = [("gamma", k + 1) for k in range(p)] + [("beta", k + 1) for k in range(p)]
    circuit = Circuit(n, tuple(gates), 2 * p, "plus")
    return circuit, _param_map(circuit, labels, blocks, mode, offset)


def wrap_angles(pm: ParamMap, params: np.ndarray) -> np.ndarray:
    """Representatives of each angle in its box: gamma in [0, 2pi), beta in [0, pi)."""
    periods = np.array([hi for _, hi in pm.bounds])
    return np.mod(np.asarray(params, dtype=float), periods)


def execution_time(pm: ParamMap, params: np.ndarray) -> float:
    """``sum_k gamma_k + beta_k`` over box-wrapped angles."""
    if not pm.is_qaoa:
        raise ValueError("execution time is defined for QAOA parameter maps only")
    params = np.asarray(params, dtype=float)
    if params.shape != (pm.num_logical,):
        raise ValueError(f"expected {pm.num_logical} parameters, got shape {params.shape}")
    return float(np.sum(wrap_angles(pm, params)))


def pad_qaoa_params(params: np.ndarray, p_from: int, p_to: int) -> np.ndarray:
    """Embed depth-``p_from`` angles into depth ``p_to`` with zero trailing layers."""
    params = np.asarray(params, dtype=float)
    out = np.zeros(2 * p_to)
    out[:p_from] = params[:p_from]
    out[p_to : p_to + p_from] = params[p_from:]
    return out
