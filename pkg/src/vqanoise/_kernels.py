"""Compiled inner loops for batched circuit evolution."""

import math

import numba
import numpy as np


@numba.njit(cache=True)
def _rotate(psi, c, s, perm, f, diag):
    dim = psi.shape[0]
    if diag:
        for j in range(dim):
            psi[j] *= c + 1j * s * f[j]
    else:
        for j in range(dim):
            k = perm[j]
            if j < k:
                a = psi[j]
                bk = psi[k]
                psi[j] = c * a + 1j * s * f[j] * bk
                psi[k] = c * bk + 1j * s * f[k] * a


@numba.njit(cache=True)
def evolve_batch(states, angles, perms, factors, diagonal):
    """In-place ``states[b] <- prod_g exp(i angles[b, g] A_g) states[b]``.

    ``A_g`` acts as ``(A psi)[j] = factors[g, j] * psi[perms[g, j]]`` with
    ``perms[g]`` an involution (XOR with the string's X mask).
    """
    for b in range(states.shape[0]):
        psi = states[b]
        for g in range(angles.shape[1]):
            _rotate(psi, math.cos(angles[b, g]), math.sin(angles[b, g]), perms[g], factors[g], diagonal[g])
    return states


def gate_tables(generators, n):
    """Stack permutation/factor tables for a list of Pauli generators."""
    from .quantum import _pauli_action

    dim = 1 << n
    q = len(generators)
    perms = np.empty((q, dim), dtype=np.int64)
    factors = np.empty((q, dim), dtype=np.complex128)
    diagonal = np.empty(q, dtype=np.bool_)
    ident = np.arange(dim, dtype=np.int64)
    for g, gen in enumerate(generators):
        perm, factor = _pauli_action(gen.ops, gen.phase)
        diagonal[g] = perm is None
        perms[g] = ident if perm is None else perm
        factors[g] = factor
    return perms, factors, diagonal


@numba.njit(cache=True)
def shift_differences(psi, lam, angles, perms, factors, diagonal):
    """``E(angle_g + pi/4) - E(angle_g - pi/4)`` for every gate by one reverse sweep.

    ``psi`` is the final state and ``lam = H psi``; both are consumed.  With
    ``f`` the state just after gate g and ``lam_g`` the back-propagated
    ``H psi``, the difference equals ``-2 Im <lam_g| A_g f>``.
    """
    n_gates = angles.shape[0]
    dim = psi.shape[0]
    out = np.empty(n_gates)
    for g in range(n_gates - 1, -1, -1):
        f = factors[g]
        perm = perms[g]
        z = 0.0 + 0.0j
        for j in range(dim):
            z += np.conj(lam[j]) * f[j] * psi[perm[j]]
        out[g] = -2.0 * z.imag
        c = math.cos(angles[g])
        s = -math.sin(angles[g])
        _rotate(psi, c, s, perm, f, diagonal[g])
        _rotate(lam, c, s, perm, f, diagonal[g])
    return out
