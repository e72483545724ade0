"""Problem Hamiltonians as weighted Pauli sums, plus exact spectral data."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .quantum import MAX_STATE_QUBITS, PauliString, _pauli_action

LEVEL_TOL = 1e-9
MAX_DENSE_QUBITS = 12


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    """``sum(coeff * pauli)`` with real coefficients.

    ``diagonal`` caches the computational-basis diagonal when every term is a
    Z/I string; builders of combinatorial problems fill it by direct counting.
    """

    n: int
    terms: tuple[tuple[float, PauliString], ...]
    diagonal: np.ndarray | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "terms", tuple((float(c), p) for c, p in self.terms))
        for _, p in self.terms:
            if p.n != self.n:
                raise ValueError(f"term {p.label} acts on {p.n} qubits, Hamiltonian has {self.n}")
        if self.diagonal is None and all(p.is_diagonal for _, p in self.terms):
            object.__setattr__(self, "diagonal", self._diagonal_from_terms())
        if self.diagonal is not None:
            diag = np.asarray(self.diagonal, dtype=float)
            if diag.shape != (1 << self.n,):
                raise ValueError(f"diagonal has shape {diag.shape}, expected ({1 << self.n},)")
            diag.setflags(write=False)
            object.__setattr__(self, "diagonal", diag)

    @classmethod
    def from_terms(cls, n: int, terms: Iterable[tuple[float, PauliString]], merge: bool = True,
                   diagonal: np.ndarray | None = None) -> Hamiltonian:
        terms = list(terms)
        if merge:
            terms = merge_terms(terms)
        return cls(n, tuple(terms), diagonal)

    def _diagonal_from_terms(self) -> np.ndarray:
        diag = np.zeros(1 << self.n)
        for c, p in self.terms:
            diag += c * p.diagonal()
        return diag

    @property
    def is_diagonal(self) -> bool:
        return self.diagonal is not None

    @property
    def dim(self) -> int:
        return 1 << self.n

    @property
    def constant(self) -> float:
        """Total coefficient of identity terms."""
        return sum(c * p.phase for c, p in self.terms if p.is_identity)

    def merged_terms(self) -> list[tuple[float, PauliString]]:
        return merge_terms(self.terms)

    @cached_property
    def _xgroups(self) -> list[tuple[np.ndarray | None, np.ndarray]]:
        # Terms sharing an X-mask share a permutation: H = sum_x diag(w_x) X^x.
        groups: dict[str, tuple[np.ndarray | None, np.ndarray]] = {}
        for c, p in self.terms:
            key = "".join("1" if op in "XY" else "0" for op in p.ops)
            perm, factor = _pauli_action(p.ops, p.phase)
            if key in groups:
                groups[key] = (perm, groups[key][1] + c * factor)
            else:
                groups[key] = (perm, c * factor)
        return list(groups.values())

    def apply(self, psi: np.ndarray) -> np.ndarray:
        """``H |psi>`` along the last axis."""
        if psi.shape[-1] != self.dim:
            raise ValueError(f"dimension mismatch: state {psi.shape[-1]}, Hamiltonian {self.dim}")
        if self.diagonal is not None:
            return psi * self.diagonal
        out = np.zeros(psi.shape, dtype=complex)
        for perm, w in self._xgroups:
            out += w * (psi if perm is None else psi[..., perm])
        return out

    def expectation(self, psi: np.ndarray) -> float | np.ndarray:
        if psi.shape[-1] != self.dim:
            raise ValueError(f"dimension mismatch: state {psi.shape[-1]}, Hamiltonian {self.dim}")
        if self.diagonal is not None:
            val = (psi.real**2 + psi.imag**2) @ self.diagonal
        else:
            val = np.sum((psi.conj() * self.apply(psi)).real, axis=-1)
        return float(val) if np.ndim(val) == 0 else val

    def dm_expectation(self, rho: np.ndarray) -> float:
        if rho.shape != (self.dim, self.dim):
            raise ValueError(f"dimension mismatch: rho {rho.shape}, Hamiltonian {self.dim}")
        if self.diagonal is not None:
            return float(np.real(np.diagonal(rho)) @ self.diagonal)
        total = 0.0
        cols = np.arange(self.dim)
        for perm, w in self._xgroups:
            rows = cols if perm is None else perm
            # Tr(D X^x rho) = sum_j w[j] rho[perm[j], j]
            total += float(np.real(np.sum(w * rho[rows, cols])))
        return total

    def matrix(self) -> np.ndarray:
        if self.n > MAX_DENSE_QUBITS:
            raise ValueError(f"dense matrix capped at {MAX_DENSE_QUBITS} qubits")
        return self.apply(np.eye(self.dim, dtype=complex)).T


def merge_terms(terms: Iterable[tuple[float, PauliString]], tol: float = 1e-14) -> list[tuple[float, PauliString]]:
    """Combine like Pauli strings (sign folded into the coefficient) and drop zeros."""
    acc: dict[str, float] = {}
    for c, p in terms:
        acc[p.ops] = acc.get(p.ops, 0.0) + c * p.phase
    return [(c, PauliString(ops)) for ops, c in acc.items() if abs(c) > tol]


@dataclass(frozen=True)
class SpectralData:
    E_g: float
    delta: float
    E_m: float
    ground_basis: np.ndarray

    @property
    def degeneracy(self) -> int:
        return int(np.atleast_2d(self.ground_basis).shape[0])


def spectral_data(H: Hamiltonian, level_tol: float = LEVEL_TOL) -> SpectralData:
    """Ground energy, gap to the first distinct excited level, top energy, ground basis."""
    if H.diagonal is not None:
        if H.n > MAX_STATE_QUBITS:
            raise ValueError(f"spectral data capped at {MAX_STATE_QUBITS} qubits")
        evals = np.asarray(H.diagonal)
        e_g = float(evals.min())
        idx = np.flatnonzero(evals <= e_g + level_tol)
        basis = np.zeros((idx.size, H.dim), dtype=complex)
        basis[np.arange(idx.size), idx] = 1.0
    else:
        evals, vecs = np.linalg.eigh(H.matrix())
        e_g = float(evals[0])
        idx = np.flatnonzero(evals <= e_g + level_tol)
        basis = vecs[:, idx].T.copy()
    above = evals[evals > e_g + level_tol]
    delta = float(above.min() - e_g) if above.size else 0.0
    return SpectralData(e_g, delta, float(evals.max()), basis)


# --- problem instances ------------------------------------------------------


@dataclass(frozen=True)
class CnfInstance:
    """3-CNF formula with DIMACS-style signed, 1-based literals."""

    num_vars: int
    clauses: tuple[tuple[int, int, int], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "clauses", tuple(tuple(int(l) for l in c) for c in self.clauses))
        if self.num_vars < 1:
            raise ValueError("num_vars must be positive")
        for j, clause in enumerate(self.clauses):
            if len(clause) != 3:
                raise ValueError(f"clause {j} has {len(clause)} literals, expected 3")
            vars_ = [abs(l) for l in clause]
            if any(l == 0 or v > self.num_vars for l, v in zip(clause, vars_)):
                raise ValueError(f"clause {j} has a literal outside [1, {self.num_vars}]: {clause}")
            if len(set(vars_)) != 3:
                raise ValueError(f"clause {j} repeats a variable: {clause}")

    @property
    def num_clauses(self) -> int:
        return len(self.clauses)

    def violations(self) -> np.ndarray:
        """Number of violated clauses for every basis state ``z`` (qubit ``v-1`` holds ``x_v``)."""
        n = self.num_vars
        z = np.arange(1 << n)
        bits = (z[:, None] >> (n - 1 - np.arange(n))) & 1
        count = np.zeros(1 << n, dtype=np.int64)
        for clause in self.clauses:
            sat = np.zeros(1 << n, dtype=bool)
            for lit in clause:
                b = bits[:, abs(lit) - 1]
                sat |= (b == 1) if lit > 0 else (b == 0)
            count += ~sat
        return count


@dataclass(frozen=True)
class Graph:
    num_vertices: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self) -> None:
        norm = set()
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            if not (0 <= u < self.num_vertices and 0 <= v < self.num_vertices):
                raise ValueError(f"edge ({u}, {v}) outside [0, {self.num_vertices})")
            norm.add((min(u, v), max(u, v)))
        object.__setattr__(self, "edges", frozenset(norm))

    @classmethod
    def from_edges(cls, num_vertices: int, edges: Iterable[tuple[int, int]]) -> Graph:
        edges = list(edges)
        keys = [(min(u, v), max(u, v)) for u, v in edges]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate edge")
        return cls(num_vertices, frozenset(keys))

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)


def pauli_decompose_projector(bits: Sequence[tuple[int, int]], n: int) -> list[tuple[float, PauliString]]:
    """Expand ``prod_q (I + (-1)**bit Z_q) / 2`` into ``2**k`` signed Z strings."""
    qubits = [q for q, _ in bits]
    if len(set(qubits)) != len(qubits):
        raise ValueError(f"duplicate qubit in projector {bits}")
    k = len(bits)
    out = []
    for subset in itertools.product((0, 1), repeat=k):
        sign = 1
        ops = {}
        for use, (q, b) in zip(subset, bits):
            if use:
                ops[q] = "Z"
                sign *= -1 if b else 1
        out.append((sign * 2.0**-k, PauliString.from_sparse(n, ops)))
    return out


def build_ising(n: int, h: float) -> Hamiltonian:
    """Periodic transverse-field chain ``sum Z_j Z_{j+1} + h sum X_j``."""
    if n < 2:
        raise ValueError("Ising chain needs n >= 2")
    terms = [(1.0, PauliString.from_sparse(n, {j: "Z", (j + 1) % n: "Z"})) for j in range(n)]
    if h != 0:
        terms += [(float(h), PauliString.from_sparse(n, {j: "X"})) for j in range(n)]
    return Hamiltonian.from_terms(n, terms, merge=False)


def build_3sat(inst: CnfInstance) -> Hamiltonian:
    """Sum of clause-violation projectors; diagonal counts violated clauses."""
    n = inst.num_vars
    terms = []
    for clause in inst.clauses:
        # A clause is violated when every literal is false.
        bits = [(abs(l) - 1, 0 if l > 0 else 1) for l in clause]
        terms += pauli_decompose_projector(bits, n)
    return Hamiltonian.from_terms(n, terms, diagonal=inst.violations().astype(float))


def build_maxcut(g: Graph) -> Hamiltonian:
    n = g.num_vertices
    edges = g.sorted_edges()
    terms = [(1.0, PauliString.from_sparse(n, {u: "Z", v: "Z"})) for u, v in edges]
    z = np.arange(1 << n)
    diag = np.zeros(1 << n)
    for u, v in edges:
        diag += 1 - 2 * (((z >> (n - 1 - u)) ^ (z >> (n - 1 - v))) & 1)
    return Hamiltonian.from_terms(n, terms, merge=False, diagonal=diag)


def build_search(n: int, t: int) -> Hamiltonian:
    """``1 - |t><t|`` for target basis index ``t``."""
    if not 0 <= t < 1 << n:
        raise ValueError(f"target {t} outside [0, {1 << n})")
    bits = [(q, (t >> (n - 1 - q)) & 1) for q in range(n)]
    terms = [(1.0, PauliString("I" * n))] + [(-c, p) for c, p in pauli_decompose_projector(bits, n)]
    diag = np.ones(1 << n)
    diag[t] = 0.0
    return Hamiltonian.from_terms(n, terms, diagonal=diag)
