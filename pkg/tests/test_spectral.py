import math
import warnings

import numpy as np
import pytest
from scipy.stats import unitary_group

from qwalks import qwalk, spectral
from qwalks.graph import bridged_cliques, cycle
from qwalks.qwalk import CoinedWalk, RandomUnitaryWalk, basis_state, basis_states, dft_coin, hadamard_coin
from qwalks.spectral import (
    convergence_bound_pairs,
    convergence_bound_uniform_spacing,
    cycle_analytic_spectrum,
    cycle_mixing_bound,
    decompose,
    decompose_walk,
    limiting_distribution,
    spacing_report,
)


def hadamard_cycle(n):
    return CoinedWalk(hadamard_coin(), cycle(n))


def phase_coin():
    return dft_coin(2) @ np.diag([1, 1j])


def test_identity_single_class():
    dec = decompose(np.eye(6))
    assert len(dec.classes) == 1 and np.allclose(dec.eigvals, 1)


def test_decomposition_invariants():
    dec = decompose_walk(hadamard_cycle(9))
    assert np.abs(np.abs(dec.eigvals) - 1).max() <= 1e-10
    V = dec.eigvecs
    assert np.abs(V.conj().T @ V - np.eye(18)).max() <= 1e-10
    a = dec.amplitudes(basis_state(cycle(9), 0, 4))
    assert abs(np.sum(np.abs(a) ** 2) - 1) <= 1e-10
    assert np.all(np.diff(dec.args) >= 0)


def test_cycle5_distinct_cycle4_degenerate():
    dec5 = decompose_walk(hadamard_cycle(5))
    assert dec5.distinct and len(dec5.classes) == 10
    dec4 = decompose_walk(hadamard_cycle(4))
    assert not dec4.distinct
    assert max(len(c) for c in dec4.classes) >= 2


def test_non_unitary_rejected():
    with pytest.raises(qwalk.NonUnitaryError):
        decompose(np.array([[1, 1], [0, 1]]))


def test_dense_cap(monkeypatch):
    monkeypatch.setattr(spectral, "DENSE_CAP", 8)
    with pytest.raises(spectral.DenseCapError, match="8"):
        decompose_walk(hadamard_cycle(5))


def test_close_eigenvalues_warn():
    U = np.diag(np.exp(1j * np.array([0.0, 5e-9, 1.0])))
    with pytest.warns(spectral.SpectralWarning):
        decompose(U)


def test_analytic_k0():
    m = cycle_analytic_spectrum(5)[0]
    assert m.theta1 == 0 and m.theta2 == pytest.approx(math.pi)
    assert np.allclose(m.eigvals, [1, -1])


def test_analytic_n5_k1():
    m = cycle_analytic_spectrum(5)[1]
    assert math.sin(m.theta1) == pytest.approx(0.672499, abs=1e-6)
    # asin(sin(2 pi / 5) / sqrt 2), not 0.738246
    assert m.theta1 == pytest.approx(0.737580, abs=1e-6)
    assert m.theta2 == pytest.approx(math.pi - 0.737580, abs=1e-6)
    lam = np.exp(1j * m.theta1)
    assert np.min(np.abs(decompose_walk(hadamard_cycle(5)).eigvals - lam)) <= 1e-10


@pytest.mark.parametrize("n", [3, 5, 7, 9, 21])
def test_analytic_eigenpairs(n):
    U = hadamard_cycle(n).matrix
    for m in cycle_analytic_spectrum(n):
        assert -math.pi / 4 <= m.theta1 <= math.pi / 4
        for lam, v in zip(m.eigvals, (m.vec1, m.vec2)):
            assert abs(np.linalg.norm(v) - 1) <= 1e-12
            assert np.abs(U @ v - lam * v).max() <= 1e-12
    dec = decompose(U)
    assert spectral.multiset_distance(dec.eigvals, spectral.analytic_eigenvalues(n)) <= 1e-10


def test_analytic_needs_odd():
    with pytest.raises(ValueError):
        cycle_analytic_spectrum(6)
    with pytest.raises(ValueError):
        cycle_analytic_spectrum(1)


def test_limiting_distribution_uniform_cycle7():
    dec = decompose_walk(hadamard_cycle(7))
    pi = limiting_distribution(dec, basis_states(cycle(7)))
    assert np.abs(pi - 1 / 7).max() <= 1e-10


def test_limiting_distribution_distinct_formula():
    dec = decompose_walk(hadamard_cycle(5))
    alpha = qwalk.random_states(10, 1, np.random.default_rng(3))[0]
    a = dec.amplitudes(alpha)
    p = (np.abs(dec.eigvecs.T) ** 2).reshape(10, 2, 5).sum(1)
    assert np.allclose(limiting_distribution(dec, alpha), (np.abs(a) ** 2) @ p, atol=1e-14)


def test_limiting_distribution_basis_invariance():
    dec = decompose_walk(hadamard_cycle(4))
    alpha = basis_states(cycle(4))
    base = limiting_distribution(dec, alpha)
    perm = np.random.default_rng(0).permutation(8)
    assert np.abs(limiting_distribution(dec.with_permuted_basis(perm), alpha) - base).max() <= 1e-10
    c = next(i for i, cl in enumerate(dec.classes) if len(cl) > 1)
    Q = unitary_group.rvs(len(dec.classes[c]), random_state=1)
    assert np.abs(limiting_distribution(dec.rotate_class(c, Q), alpha) - base).max() <= 1e-10


def test_even_cycle_limit_depends_on_start():
    dec = decompose_walk(hadamard_cycle(6))
    pi = limiting_distribution(dec, basis_states(cycle(6)))
    assert np.allclose(pi.sum(1), 1, atol=1e-10)
    assert pi.min() >= -1e-12
    assert not spectral.start_independent(pi)


def test_limit_matches_long_average():
    W = hadamard_cycle(5)
    dec = decompose_walk(W)
    a = basis_state(cycle(5), 0, 0)
    T = 100_000
    measured = np.abs(qwalk.average_distribution(W, a, T) - limiting_distribution(dec, a)).sum()
    assert measured <= convergence_bound_pairs(dec, a, T)


@pytest.mark.slow
def test_limit_matches_million_step_average():
    W = hadamard_cycle(5)
    dec = decompose_walk(W)
    a = basis_state(cycle(5), 1, 2)
    T = 1_000_000
    measured = np.abs(qwalk.average_distribution(W, a, T) - limiting_distribution(dec, a)).sum()
    assert measured <= convergence_bound_pairs(dec, a, T)


def test_spacing_delta_zero():
    dec = decompose_walk(hadamard_cycle(7))
    r = spacing_report(dec, 0.0)
    assert r.Delta_delta == r.Delta and len(r.bad_indices) == 0


@pytest.mark.parametrize("n", range(5, 52, 2))
def test_good_spacing_floor(n):
    dec = decompose_walk(hadamard_cycle(n))
    for delta in (0.05, 0.1, 0.2):
        r = spacing_report(dec, delta, basis_state(cycle(n), 0, 0))
        assert r.Delta_delta >= math.pi * delta / (math.sqrt(2) * n)
        assert r.Delta_delta >= r.Delta
        assert spectral.regime_spacing_slack(dec, r) >= -1e-12


@pytest.mark.parametrize("n", [7, 9, 11, 21, 51])
def test_bad_mass_counts_bad_momenta(n):
    dec = decompose_walk(hadamard_cycle(n))
    for delta in (0.05, 0.1, 0.2):
        ks = np.arange(n)
        bad_k = int((~spectral.good_momentum(ks, n, delta)).sum())
        for a in range(2):
            r = spacing_report(dec, delta, basis_state(cycle(n), a, 3))
            # Each momentum sector carries exactly 1/n of a basis state.
            assert r.bad_mass == pytest.approx(bad_k / n, abs=1e-10)
            assert r.bad_mass <= 2 * delta + 2 / n + 1e-12


def test_bad_mass_exceeds_two_delta_by_discretization():
    dec = decompose_walk(hadamard_cycle(7))
    r = spacing_report(dec, 0.2, basis_state(cycle(7), 0, 0))
    assert r.bad_mass == pytest.approx(3 / 7, abs=1e-10) and r.bad_mass > 0.4


def test_momenta_recovered():
    dec = decompose_walk(hadamard_cycle(9))
    k = spectral.eigenvector_momenta(dec)
    assert sorted(k.tolist()) == sorted(list(range(9)) * 2)
    for j in range(dec.dim):
        s = math.sin(2 * math.pi * k[j] / 9) / math.sqrt(2)
        assert dec.eigvals[j].imag == pytest.approx(s, abs=1e-10)


def test_spacing_needs_two_good():
    dec = decompose(np.diag([1.0, -1.0]))
    with pytest.raises(ValueError):
        spacing_report(dec, 0.5)


def test_eigenvector_start_is_stationary():
    W = hadamard_cycle(5)
    dec = decompose_walk(W)
    phi = dec.eigvecs[:, 3]
    pi = limiting_distribution(dec, phi)
    for T in (1, 7, 50):
        assert np.abs(qwalk.average_distribution(W, phi, T) - pi).max() <= 1e-12


def test_pair_bound_scaling_and_soundness():
    W = hadamard_cycle(5)
    dec = decompose_walk(W)
    a = basis_state(cycle(5), 0, 0)
    b = convergence_bound_pairs(dec, a, 1000)
    assert convergence_bound_pairs(dec, a, 2000) == pytest.approx(b / 2, rel=1e-14)
    measured = np.abs(qwalk.average_distribution(W, a, 1000) - 0.2).sum()
    assert measured <= b


def test_uniform_spacing_bound():
    dec = decompose_walk(hadamard_cycle(5))
    D = spacing_report(dec).Delta
    b = convergence_bound_uniform_spacing(5, 2, D, 10_000)
    assert convergence_bound_uniform_spacing(5, 2, D, 20_000) == pytest.approx(b / 2)
    assert convergence_bound_uniform_spacing(5, 2, 2 * D, 10_000) < b
    measured = np.abs(qwalk.average_distribution(hadamard_cycle(5), basis_state(cycle(5), 1, 0), 10_000) - 0.2).sum()
    assert measured <= b
    with pytest.raises(ValueError, match="pairs"):
        convergence_bound_uniform_spacing(5, 2, 0.0, 10)


def test_cycle_mixing_bound_values():
    assert cycle_mixing_bound(5, 0.5) == 295686
    assert cycle_mixing_bound(7, 0.5) == 452549
    for n in (11, 21, 51, 101):
        assert 2 <= cycle_mixing_bound(2 * n, 0.3) / cycle_mixing_bound(n, 0.3) <= 2.4
    # Exactly eight before rounding up.
    r = cycle_mixing_bound(9, 0.2) / cycle_mixing_bound(9, 0.4)
    assert r == pytest.approx(8, rel=1e-6)
    with pytest.raises(ValueError):
        cycle_mixing_bound(5, 0)


def test_state_distance_bound():
    W = hadamard_cycle(9)
    a = basis_state(cycle(9), 0, 0)
    r = spectral.state_distance_vs_distribution_distance(a, a, W, 10)
    assert r.measured == 0 and r.upper_bound == 0
    rng = np.random.default_rng(17)
    states = qwalk.random_states(18, 40, rng)
    for T in (10, 100):
        for i in range(0, 40, 2):
            r = spectral.state_distance_vs_distribution_distance(states[i], states[i + 1], W, T)
            assert r.holds


@pytest.mark.parametrize("n,delta", [(11, 0.05), (21, 0.1), (25, 0.2)])
def test_good_projection_effect(n, delta):
    W = hadamard_cycle(n)
    dec = decompose_walk(W)
    a = basis_state(cycle(n), 0, 0)
    r = spacing_report(dec, delta, a)
    assert r.bad_mass <= 2 * delta  # these sizes avoid the discretization excess
    b = spectral.good_projection(dec, r, a)
    assert np.linalg.norm(a - b) <= 2 * math.sqrt(2 * delta)
    T = 200
    effect = (np.abs(qwalk.average_distribution(W, a, T) - qwalk.average_distribution(W, b, T)).sum()
              + np.abs(limiting_distribution(dec, a) - limiting_distribution(dec, b)).sum())
    assert effect <= 8 * math.sqrt(2 * delta)


def test_mixture_limit_single_element_matches_unitary():
    W = CoinedWalk(dft_coin(3), bridged_cliques(3))
    alpha = basis_states(W.graph)[:4]
    unitary = limiting_distribution(decompose_walk(W), alpha)
    mixed = spectral.mixture_limiting_distribution(RandomUnitaryWalk([W], [1.0]), alpha)
    assert np.abs(unitary - mixed).max() <= 1e-10


def test_mixture_limit_uniform_on_odd_cycle():
    g = cycle(9)
    W = RandomUnitaryWalk([CoinedWalk(hadamard_coin(), g), CoinedWalk(phase_coin(), g)], [0.5, 0.5])
    pi = spectral.mixture_limiting_distribution(W, basis_states(g))
    assert np.abs(pi - 1 / 9).max() <= 1e-10


def test_mixture_limit_matches_channel_average():
    g = cycle(5)
    W = RandomUnitaryWalk([CoinedWalk(hadamard_coin(), g), CoinedWalk(phase_coin(), g)], [0.3, 0.7])
    a = basis_state(g, 1, 2)
    T = 4000
    avg = sum(qwalk.iter_node_distributions(W, a, T)) / T
    pi = spectral.mixture_limiting_distribution(W, a)
    assert np.abs(avg - pi).sum() <= 0.01


def test_spectrum_rows():
    dec = decompose_walk(hadamard_cycle(4))
    rows = spectral.spectrum_rows(dec)
    assert len(rows) == 8
    assert len({r[4] for r in rows}) == len(dec.classes)
