"""Dense state-vector and density-matrix simulation for involutory-generator gates.

Qubit ``j`` of an ``n``-qubit register maps to bit ``n - 1 - j`` of the basis
index, so ``|q0 q1 ... q_{n-1}>`` reads left to right like a ket label.

Every gate has the form ``exp(i * angle * A)`` with ``A`` a signed Pauli string,
hence ``A @ A = 1`` and ``exp(i a A) = cos(a) + i sin(a) A``.  Pauli strings are
applied by index permutation and sign flips; no ``2**n x 2**n`` gate matrix is
ever built.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

import numpy as np

from ._kernels import evolve_batch, gate_tables

if TYPE_CHECKING:
    from .hamiltonians import Hamiltonian, SpectralData

ATOL = 1e-10
MAX_STATE_QUBITS = 14
MAX_DM_QUBITS = 10

# Amplitudes held at once by batched evaluation (rows * 2**n).
_BATCH_BUDGET = 1 << 20

_PAULI_LABELS = frozenset("IXYZ")


@lru_cache(maxsize=4096)
def _pauli_action(ops: str, phase: int) -> tuple[np.ndarray | None, np.ndarray]:
    """Return ``(perm, factor)`` with ``(P psi)[j] = factor[j] * psi[perm[j]]``.

    ``perm`` is ``None`` for diagonal strings.
    """
    n = len(ops)
    xmask = zmask = 0
    n_y = 0
    for q, op in enumerate(ops):
        bit = 1 << (n - 1 - q)
        if op in "XY":
            xmask |= bit
        if op in "ZY":
            zmask |= bit
        if op == "Y":
            n_y += 1
    idx = np.arange(1 << n, dtype=np.int64)
    src = idx ^ xmask
    parity = np.zeros(1 << n, dtype=np.int64)
    masked = src & zmask
    while masked.any():
        parity ^= masked & 1
        masked >>= 1
    # Y = i X Z on each qubit, so the string is phase * i**n_y * X^x Z^z.
    scalar = phase * (1j**n_y)
    factor = np.where(parity == 1, -scalar, scalar)
    if n_y % 2 == 0:
        factor = factor.real.copy()
    factor.setflags(write=False)
    if xmask == 0:
        return None, factor
    src.setflags(write=False)
    return src, factor


@dataclass(frozen=True)
class PauliString:
    """Signed tensor product of single-qubit Paulis, e.g. ``PauliString("XZI", -1)``."""

    ops: str
    phase: int = 1

    def __post_init__(self) -> None:
        if not self.ops or set(self.ops) - _PAULI_LABELS:
            raise ValueError(f"invalid Pauli label {self.ops!r}")
        if self.phase not in (1, -1):
            raise ValueError(f"phase must be +1 or -1, got {self.phase}")

    @classmethod
    def from_sparse(cls, n: int, ops: Mapping[int, str], phase: int = 1) -> PauliString:
        """Build from ``{qubit: label}``; unspecified qubits are identity."""
        labels = ["I"] * n
        for q, op in ops.items():
            if not 0 <= q < n:
                raise ValueError(f"qubit {q} out of range for n={n}")
            labels[q] = op
        return cls("".join(labels), phase)

    @classmethod
    def parse(cls, label: str) -> PauliString:
        """Inverse of :attr:`label`: ``"-XZI"`` or ``"+XZI"`` or ``"XZI"``."""
        phase = 1
        if label[:1] in "+-":
            phase = -1 if label[0] == "-" else 1
            label = label[1:]
        return cls(label, phase)

    @property
    def n(self) -> int:
        return len(self.ops)

    @property
    def label(self) -> str:
        return ("+" if self.phase > 0 else "-") + self.ops

    @property
    def weight(self) -> int:
        return sum(op != "I" for op in self.ops)

    @property
    def is_diagonal(self) -> bool:
        return all(op in "IZ" for op in self.ops)

    @property
    def is_identity(self) -> bool:
        return all(op == "I" for op in self.ops)

    def diagonal(self) -> np.ndarray:
        """Real +-1 diagonal of a Z/I string."""
        if not self.is_diagonal:
            raise ValueError(f"{self.label} is not diagonal")
        return _pauli_action(self.ops, self.phase)[1]

    def apply(self, psi: np.ndarray, axis: int = -1) -> np.ndarray:
        """Apply to ``psi`` along ``axis`` (batched states use the last axis)."""
        dim = 1 << self.n
        if psi.shape[axis] != dim:
            raise ValueError(
                f"dimension mismatch: Pauli on {self.n} qubits, axis has {psi.shape[axis]}"
            )
        perm, factor = _pauli_action(self.ops, self.phase)
        if axis not in (-1, psi.ndim - 1):
            moved = np.moveaxis(psi, axis, -1)
            return np.moveaxis(self.apply(moved), -1, axis)
        if perm is None:
            return psi * factor
        return psi[..., perm] * factor

    def matrix(self) -> np.ndarray:
        """Dense matrix; for tests and small systems only."""
        return self.apply(np.eye(1 << self.n, dtype=complex), axis=0)


@dataclass(frozen=True)
class Gate:
    """``exp(i * (coeff * theta[param_id] + offset) * generator)``."""

    generator: PauliString
    param_id: int
    coeff: float = 1.0
    offset: float = 0.0

    def __post_init__(self) -> None:
        if self.coeff == 0:
            raise ValueError("gate coefficient must be nonzero")
        if self.param_id < 0:
            raise ValueError("param_id must be non-negative")


@dataclass(frozen=True, eq=False)
class Circuit:
    """Ordered gate list over a logical parameter vector."""

    n: int
    gates: tuple[Gate, ...]
    num_params: int
    initial_state: str = "zero"

    def __post_init__(self) -> None:
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.initial_state not in ("zero", "plus"):
            raise ValueError(f"unknown initial state {self.initial_state!r}")
        if not 1 <= self.n <= MAX_STATE_QUBITS:
            raise ValueError(f"n={self.n} outside [1, {MAX_STATE_QUBITS}]")
        for k, g in enumerate(self.gates):
            if g.generator.n != self.n:
                raise ValueError(f"gate {k} acts on {g.generator.n} qubits, circuit has {self.n}")
            if g.param_id >= self.num_params:
                raise ValueError(f"gate {k} refers to parameter {g.param_id} >= {self.num_params}")

    @property
    def num_gates(self) -> int:
        return len(self.gates)

    @cached_property
    def _gate_table(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        pid = np.array([g.param_id for g in self.gates], dtype=np.int64)
        coeff = np.array([g.coeff for g in self.gates], dtype=float)
        offset = np.array([g.offset for g in self.gates], dtype=float)
        return pid, coeff, offset

    @property
    def param_ids(self) -> np.ndarray:
        return self._gate_table[0]

    @property
    def coeffs(self) -> np.ndarray:
        return self._gate_table[1]

    def gate_angles(self, params: np.ndarray) -> np.ndarray:
        """Effective angle of each gate; ``params`` may be ``(P,)`` or ``(B, P)``."""
        params = np.asarray(params, dtype=float)
        if params.shape[-1] != self.num_params:
            raise ValueError(f"expected {self.num_params} parameters, got {params.shape[-1]}")
        pid, coeff, offset = self._gate_table
        return params[..., pid] * coeff + offset

    def initial_vector(self) -> np.ndarray:
        return zero_state(self.n) if self.initial_state == "zero" else plus_state(self.n)

    @cached_property
    def gate_tables(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return gate_tables([g.generator for g in self.gates], self.n)

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "n": self.n,
            "num_params": self.num_params,
            "initial_state": self.initial_state,
            "gates": [
                {
                    "generator": g.generator.label,
                    "param_id": g.param_id,
                    "coeff": g.coeff,
                    "offset": g.offset,
                }
                for g in self.gates
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> Circuit:
        if data.get("schema") != 1:
            raise ValueError(f"unsupported circuit schema {data.get('schema')!r}")
        gates = tuple(
            Gate(PauliString.parse(g["generator"]), int(g["param_id"]), float(g["coeff"]), float(g.get("offset", 0.0)))
            for g in data["gates"]
        )
        return cls(int(data["n"]), gates, int(data["num_params"]), data.get("initial_state", "zero"))


def zero_state(n: int) -> np.ndarray:
    psi = np.zeros(1 << n, dtype=complex)
    psi[0] = 1.0
    return psi


def plus_state(n: int) -> np.ndarray:
    return np.full(1 << n, (1 << n) ** -0.5, dtype=complex)


def num_qubits(dim: int) -> int:
    n = dim.bit_length() - 1
    if dim <= 0 or 1 << n != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


def apply_gate(state: np.ndarray, generator: PauliString, angle) -> np.ndarray:
    """Return ``exp(i * angle * A) |state>``.

    ``state`` may be batched ``(B, 2**n)`` with ``angle`` of shape ``(B,)``.
    """
    state = np.asarray(state)
    angle = np.asarray(angle, dtype=float)
    if angle.ndim:
        angle = angle[:, None]
    return np.cos(angle) * state + 1j * np.sin(angle) * generator.apply(state)


def run_gate_angles(circuit: Circuit, angles: np.ndarray) -> np.ndarray:
    """Run the circuit with explicit per-gate angles, shape ``(q,)`` or ``(B, q)``."""
    angles = np.asarray(angles, dtype=float)
    single = angles.ndim == 1
    angles = np.ascontiguousarray(np.atleast_2d(angles))
    if angles.shape[1] != circuit.num_gates:
        raise ValueError(f"expected {circuit.num_gates} gate angles, got {angles.shape[1]}")
    states = np.tile(circuit.initial_vector(), (angles.shape[0], 1))
    if circuit.num_gates:
        evolve_batch(states, angles, *circuit.gate_tables)
    return states[0] if single else states


def run_circuit(circuit: Circuit, params: Sequence[float] | np.ndarray) -> np.ndarray:
    """Prepare the circuit's state at logical parameters ``params``."""
    params = np.asarray(params, dtype=float)
    if params.ndim != 1 or params.size != circuit.num_params:
        raise ValueError(f"expected {circuit.num_params} parameters, got shape {params.shape}")
    return run_gate_angles(circuit, circuit.gate_angles(params))


def expectation(state: np.ndarray, H: Hamiltonian) -> float | np.ndarray:
    """``<psi|H|psi>``; batched states give one energy per row."""
    return H.expectation(state)


def batch_energies(circuit: Circuit, H: Hamiltonian, angles: np.ndarray) -> np.ndarray:
    """Energies for a ``(B, q)`` stack of gate-angle vectors, evaluated in chunks."""
    angles = np.atleast_2d(np.asarray(angles, dtype=float))
    chunk = max(1, _BATCH_BUDGET >> circuit.n)
    out = np.empty(angles.shape[0])
    for lo in range(0, angles.shape[0], chunk):
        states = run_gate_angles(circuit, angles[lo : lo + chunk])
        out[lo : lo + chunk] = H.expectation(states)
    return out


def energy(circuit: Circuit, H: Hamiltonian, params: np.ndarray) -> float:
    return float(H.expectation(run_circuit(circuit, params)))


def ground_overlap(state: np.ndarray, spec: SpectralData) -> float:
    """Squared norm of the projection of ``state`` onto the ground subspace."""
    basis = np.atleast_2d(spec.ground_basis)
    if basis.shape[1] != state.shape[-1]:
        raise ValueError(f"dimension mismatch: state {state.shape[-1]}, ground basis {basis.shape[1]}")
    amps = basis.conj() @ state
    return float(np.clip(np.sum(np.abs(amps) ** 2), 0.0, 1.0))


# --- density matrices -------------------------------------------------------


def density_matrix(state: np.ndarray) -> np.ndarray:
    return np.outer(state, state.conj())


def _conjugate(rho: np.ndarray, generator: PauliString, angle: float, s: float) -> np.ndarray:
    # U[(1-s) rho + s A rho A]U^dag for Hermitian rho, using rho A = (A rho)^dag.
    a_rho = generator.apply(rho, axis=0)
    a_rho_a = generator.apply(a_rho.conj().T, axis=0)
    x = (1 - s) * rho + s * a_rho_a
    ax = (1 - s) * a_rho + s * a_rho.conj().T
    axa = (1 - s) * a_rho_a + s * rho
    c, sn = math.cos(angle), math.sin(angle)
    comm = ax - ax.conj().T
    return c * c * x + sn * sn * axa + 1j * c * sn * comm


def apply_unitary_gate_dm(rho: np.ndarray, generator: PauliString, angle: float) -> np.ndarray:
    return _conjugate(rho, generator, angle, 0.0)


def apply_noisy_gate_channel(rho: np.ndarray, generator: PauliString, angle: float, s: float) -> np.ndarray:
    """Gate followed by its angle-noise average: ``U[(1-s) rho + s A rho A]U^dag``.

    Exact average of ``U(angle + d) rho U(angle + d)^dag`` for any zero-symmetric
    ``d`` with ``<sin(d)**2> = s``.
    """
    if not 0.0 <= s <= 0.5:
        raise ValueError(f"gate error probability must lie in [0, 1/2], got {s}")
    if rho.shape != (1 << generator.n, 1 << generator.n):
        raise ValueError(f"dimension mismatch: rho {rho.shape}, generator on {generator.n} qubits")
    return _conjugate(rho, generator, angle, s)


def evolve_density(
    circuit: Circuit,
    angles: np.ndarray,
    error_probs: Iterable[float] | np.ndarray | None = None,
    max_qubits: int = MAX_DM_QUBITS,
) -> np.ndarray:
    """Compose (noisy) gate channels over the whole circuit from its initial state."""
    if circuit.n > max_qubits:
        raise ValueError(f"density-matrix simulation capped at {max_qubits} qubits, circuit has {circuit.n}")
    angles = np.asarray(angles, dtype=float)
    probs = np.zeros(circuit.num_gates) if error_probs is None else np.asarray(error_probs, dtype=float)
    rho = density_matrix(circuit.initial_vector())
    for g, phi, s in zip(circuit.gates, angles, probs):
        rho = apply_noisy_gate_channel(rho, g.generator, float(phi), float(s))
    return rho


def dm_expectation(rho: np.ndarray, H: Hamiltonian) -> float:
    return H.dm_expectation(rho)
