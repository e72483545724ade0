import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_circuit, random_hamiltonian
from vqanoise.ansatz import _param_map, qaoa_build
from vqanoise.hamiltonians import Hamiltonian, SpectralData, build_search, spectral_data
from vqanoise.noise import (
    NoiseSpec,
    ensemble_report,
    exact_noisy_energy,
    first_order_delta_e,
    mc_noisy_energy,
    per_parameter_sweep,
    sample_delta,
    shifted_gate_energies,
    sigma_sweep,
    sigma_threshold,
    sin2_moment,
)
from vqanoise.quantum import Circuit, Gate, PauliString, energy

X1 = Circuit(1, (Gate(PauliString("X"), 0),), 1)
HZ = Hamiltonian.from_terms(1, [(1.0, PauliString("Z"))])
HALF_PI = [math.pi / 2]


def spec_data(E_g, delta, E_m):
    return SpectralData(E_g, delta, E_m, np.zeros((1, 2)))


class TestMoment:
    @pytest.mark.parametrize("sigma", [1e-4, 1e-3, 0.01, 0.5, 2.0])
    def test_matches_quadrature(self, sigma):
        x, w = np.polynomial.legendre.leggauss(60)
        ref = 0.5 * np.sum(w * np.sin(sigma * x) ** 2)
        assert sin2_moment(sigma) == pytest.approx(ref, rel=1e-12)

    def test_zero_and_small(self):
        assert sin2_moment(0.0) == 0.0
        assert sin2_moment(0.999e-3) == pytest.approx(sin2_moment(1.001e-3), rel=1e-2)
        assert sin2_moment(0.1) < 0.1**2 / 3


class TestSampling:
    def test_zero_sigma(self):
        rng = np.random.default_rng(0)
        np.testing.assert_array_equal(sample_delta(NoiseSpec(0.0), 5, rng), 0)

    def test_moments(self):
        sigma = 0.3
        d = sample_delta(NoiseSpec(sigma), 1, np.random.default_rng(1), 100_000)[:, 0]
        se = d.std() / math.sqrt(d.size)
        assert abs(d.mean()) < 4 * se
        var_se = np.std(d**2) / math.sqrt(d.size)
        assert abs(np.mean(d**2) - sigma**2 / 3) < 4 * var_se

    def test_cross_terms_vanish(self):
        d = sample_delta(NoiseSpec(0.2), 2, np.random.default_rng(2), 100_000)
        prod = d[:, 0] * d[:, 1]
        assert abs(prod.mean()) < 4 * prod.std() / math.sqrt(prod.size)

    def test_per_layer_blocks_share_delta(self):
        c, pm = qaoa_build(build_search(3, 2), 2, "layerwise")
        idx, n_groups = NoiseSpec(0.1, "per-layer").group_index(c, pm)
        assert n_groups == 4
        blocks = np.asarray(pm.gate_blocks)
        for b in range(4):
            assert np.unique(idx[blocks == b]).size == 1

    def test_per_layer_needs_param_map(self):
        with pytest.raises(ValueError):
            NoiseSpec(0.1, "per-layer").group_index(X1)

    @pytest.mark.parametrize("kwargs", [{"sigma": -0.1}, {"sigma": 0.1, "grouping": "bogus"},
                                        {"sigma": 0.1, "distribution": "normal"}])
    def test_spec_validation(self, kwargs):
        with pytest.raises(ValueError):
            NoiseSpec(**kwargs)


class TestSingleGate:
    def test_mc_zero_sigma(self):
        mean, se = mc_noisy_energy(X1, None, HALF_PI, HZ, NoiseSpec(0.0), 100)
        assert (mean, se) == (pytest.approx(-1.0, abs=1e-15), 0.0)

    def test_mc_matches_closed_form(self):
        sigma = 0.4
        mean, se = mc_noisy_energy(X1, None, HALF_PI, HZ, NoiseSpec(sigma), 10_000, seed=5)
        assert abs(mean + math.sin(2 * sigma) / (2 * sigma)) < 3 * se

    def test_exact_closed_form(self):
        assert exact_noisy_energy(X1, None, HALF_PI, HZ, NoiseSpec(0.1)) == pytest.approx(-0.9933466539753061,
                                                                                        abs=1e-12)

    def test_first_order(self):
        assert first_order_delta_e(X1, None, HALF_PI, HZ, NoiseSpec(0.1)) == pytest.approx(0.0066533, abs=1e-7)
        assert first_order_delta_e(X1, None, HALF_PI, HZ, NoiseSpec(0.0)) == 0.0

    @pytest.mark.parametrize("theta", [0.0, 0.4, 1.3])
    def test_first_order_exact_for_one_gate(self, theta):
        spec = NoiseSpec(0.3)
        exact = exact_noisy_energy(X1, None, [theta], HZ, spec) - energy(X1, HZ, np.array([theta]))
        assert first_order_delta_e(X1, None, [theta], HZ, spec) == pytest.approx(exact, abs=1e-14)

    def test_sweep_curve(self):
        grid = [0.0, 0.1, 0.2, 0.4]
        rep = sigma_sweep(X1, None, HALF_PI, HZ, grid, n_samples=200)
        expected = [0.0] + [1 - math.sin(2 * s) / (2 * s) for s in grid[1:]]
        np.testing.assert_allclose(rep.exact_dE, expected, atol=1e-13)
        assert rep.mean_dE[0] == 0 and rep.stderr[0] == 0

    def test_sweep_zero_grid(self):
        rep = sigma_sweep(X1, None, HALF_PI, HZ, [0.0], n_samples=10)
        assert rep.mean_dE == [0.0] and rep.q == 1 and rep.n == 1
        assert [r["sigma"] for r in rep.rows()] == [0.0]

    def test_sweep_rejects_unsorted(self):
        with pytest.raises(ValueError):
            sigma_sweep(X1, None, HALF_PI, HZ, [0.2, 0.1])


class TestRandomCircuits:
    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_exact_at_zero_sigma(self, seed):
        rng = np.random.default_rng(seed)
        c = random_circuit(rng, 3, 10)
        H = random_hamiltonian(rng, 3)
        x = rng.uniform(-3, 3, 10)
        assert exact_noisy_energy(c, None, x, H, NoiseSpec(0.0)) == pytest.approx(energy(c, H, x), abs=1e-10)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.0, 0.5))
    def test_trivial_bound(self, seed, sigma):
        rng = np.random.default_rng(seed)
        c = random_circuit(rng, 3, 12)
        H = random_hamiltonian(rng, 3)
        x = rng.uniform(-3, 3, 12)
        spec = NoiseSpec(sigma)
        a = spec.gate_error_probabilities(c)
        e0 = energy(c, H, x)
        assert first_order_delta_e(c, None, x, H, spec) <= np.sum(a) * (spectral_data(H).E_m - e0) + 1e-12

    def test_exact_vs_mc(self):
        rng = np.random.default_rng(12)
        c = random_circuit(rng, 4, 20)
        H = random_hamiltonian(rng, 4)
        x = rng.uniform(-3, 3, 20)
        spec = NoiseSpec(0.15)
        mean, se = mc_noisy_energy(c, None, x, H, spec, 10_000, seed=1)
        assert abs(exact_noisy_energy(c, None, x, H, spec) - mean) <= 3 * se

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        c = random_circuit(rng, 3, 8)
        H = random_hamiltonian(rng, 3)
        x = rng.uniform(-3, 3, 8)
        a = mc_noisy_energy(c, None, x, H, NoiseSpec(0.2), 1200, seed=7)
        assert a == mc_noisy_energy(c, None, x, H, NoiseSpec(0.2), 1200, seed=7)
        assert a != mc_noisy_energy(c, None, x, H, NoiseSpec(0.2), 1200, seed=8)

    def test_correlated_rejected_by_exact(self):
        c, pm = qaoa_build(build_search(2, 1), 1, "layerwise")
        with pytest.raises(ValueError):
            exact_noisy_energy(c, pm, [0.3, 0.4], build_search(2, 1), NoiseSpec(0.1, "per-layer"))

    def test_correlated_groups_shift_logical_parameter(self):
        # Per-parameter noise on a one-parameter circuit is an exact shift of that parameter.
        H = build_search(2, 1)
        c, pm = qaoa_build(H, 1)
        x = np.array([0.7, 0.4])
        e = [energy(c, H, x + np.array([d, 0.0])) for d in np.linspace(-0.2, 0.2, 2001)]
        spec = NoiseSpec((0.2, 0.0), "per-parameter")
        mean, se = mc_noisy_energy(c, pm, x, H, spec, 20_000, seed=2)
        assert abs(mean - np.mean(e)) < 4 * se + 1e-6


class TestThreshold:
    def test_examples(self):
        assert sigma_threshold(0.5, spec_data(0.0, 1.0, 1.0), 100) == pytest.approx(0.1)
        assert sigma_threshold(1.0, spec_data(0.0, 1.0, 2.0), 10) == 0.0
        assert sigma_threshold(0.0, spec_data(0.0, 1.0, 1.0), 1) == pytest.approx(1.0)

    def test_flags(self):
        assert sigma_threshold(1.5, spec_data(0.0, 1.0, 2.0), 10) == 0.0
        assert sigma_threshold(1.0, spec_data(0.0, 2.0, 1.0), 10) == math.inf


class TestParamSweep:
    def setup_method(self):
        self.H = build_search(3, 5)
        self.c, self.pm = qaoa_build(self.H, 2)
        self.x = np.array([0.9, 2.1, 0.6, 0.3])

    def test_zero_column_is_e_star(self):
        sw = per_parameter_sweep(self.c, self.pm, self.x, self.H, [-0.1, 0.0, 0.1])
        np.testing.assert_allclose(sw.energies[:, 1], energy(self.c, self.H, self.x), atol=1e-13)
        assert sorted(sw.ranking()) == [0, 1, 2, 3]
        assert sw.sensitivity[sw.ranking()[-1]] == sw.sensitivity.max()
        assert {r["param_label"] for r in sw.rows()} == {"gamma", "beta"}

    def test_single_gate_sinusoid(self):
        # A parameter driving one gate gives E(d) = a + b cos 2d + c sin 2d.
        rng = np.random.default_rng(4)
        c = random_circuit(rng, 3, 6)
        H = random_hamiltonian(rng, 3)
        pm = _param_map(c, [("theta", 1)] * 6, [0] * 6)
        x = rng.uniform(-2, 2, 6)
        d = np.array([-0.7, 0.1, 0.5, 1.3])
        sw = per_parameter_sweep(c, pm, x, H, d)
        for k in range(6):
            A = np.stack([np.ones(3), np.cos(2 * d[:3]), np.sin(2 * d[:3])], axis=1)
            coef = np.linalg.solve(A, sw.energies[k, :3])
            pred = coef @ [1, math.cos(2 * d[3]), math.sin(2 * d[3])]
            assert abs(pred - sw.energies[k, 3]) < 1e-8


def test_shifted_gate_energies_shape():
    e0, ek = shifted_gate_energies(X1, HZ, HALF_PI)
    assert e0 == pytest.approx(-1) and ek == pytest.approx([1.0])


def test_ensemble_report():
    a = sigma_sweep(X1, None, HALF_PI, HZ, [0.0, 0.2], n_samples=100, seed=1)
    b = sigma_sweep(X1, None, [1.2], HZ, [0.0, 0.2], n_samples=100, seed=2)
    ens = ensemble_report([a, b])
    assert ens.mean_dE[1] == pytest.approx((a.mean_dE[1] + b.mean_dE[1]) / 2)
    assert ens.exact_dE[1] == pytest.approx((a.exact_dE[1] + b.exact_dE[1]) / 2)
    with pytest.raises(ValueError):
        ensemble_report([])
