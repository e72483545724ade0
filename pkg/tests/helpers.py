"""Shared builders for random test systems."""

import numpy as np
from scipy.linalg import expm

from vqanoise.hamiltonians import Hamiltonian
from vqanoise.quantum import Circuit, Gate, PauliString


def random_pauli(rng, n, max_weight=None):
    while True:
        ops = "".join(rng.choice(list("IXYZ"), size=n))
        p = PauliString(ops, int(rng.choice([1, -1])))
        if not p.is_identity and (max_weight is None or p.weight <= max_weight):
            return p


def random_state(rng, n):
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return v / np.linalg.norm(v)


def random_circuit(rng, n, q, num_params=None, shared=False, init="zero"):
    """Random circuit; ``shared`` lets several gates drive one parameter with random coefficients."""
    num_params = q if num_params is None else num_params
    gates = []
    for g in range(q):
        pid = int(rng.integers(num_params)) if shared else g % num_params
        coeff = float(rng.choice([-2.0, -1.0, 0.5, 1.0, 1.5])) if shared else 1.0
        gates.append(Gate(random_pauli(rng, n, 2), pid, coeff, float(rng.uniform(-0.3, 0.3)) if shared else 0.0))
    return Circuit(n, tuple(gates), num_params, init)


def random_hamiltonian(rng, n, n_terms=6):
    terms = [(float(rng.normal()), random_pauli(rng, n)) for _ in range(n_terms)]
    return Hamiltonian.from_terms(n, terms)


def dense_circuit_state(circuit, params):
    """Reference evolution with explicit matrix exponentials."""
    psi = circuit.initial_vector().astype(complex)
    for g in circuit.gates:
        angle = g.coeff * params[g.param_id] + g.offset
        psi = expm(1j * angle * g.generator.matrix()) @ psi
    return psi
