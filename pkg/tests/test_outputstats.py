from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from scrooge.ensembles import EnsembleSampler, maximally_mixed, product, random_rank
from scrooge.entropies import subentropy
from scrooge.hilbert import DensityMatrix, Partition
from scrooge.outputstats import (
    OutputDistribution,
    apply_depolarizing,
    avg_cmi_scrooge,
    bitflip_overlap,
    cmi,
    cmi_subentropy_formula,
    coherence_r,
    collision_probability,
    collision_slope,
    depolarize_distribution,
    marginal,
    noisy_collision,
    output_distribution,
    pt_moment_ratio,
    qubit_coherence_formula,
    sensitivity_prediction,
    tvd,
    wishart_joint_moment_closed,
    wishart_joint_moment_mc,
)

from conftest import random_density


def direct_cmi(p):
    """sum p(a,b,c) log2 [p(abc) p(b) / (p(ab) p(bc))] over a (dA, dB, dC) array."""
    pab = p.sum(axis=2)
    pbc = p.sum(axis=0)
    pb = p.sum(axis=(0, 2))
    tot = 0.0
    for a, b, c in np.ndindex(p.shape):
        if p[a, b, c] > 0:
            tot += p[a, b, c] * math.log2(p[a, b, c] * pb[b] / (pab[a, b] * pbc[b, c]))
    return tot


def test_distribution_validation():
    with pytest.raises(ValueError):
        OutputDistribution(np.array([0.5, 0.6]), ())
    with pytest.raises(ValueError):
        OutputDistribution(np.array([1.2, -0.2]), ())
    d = output_distribution(np.array([1, 1j, 0, 0]))
    assert d.probs == pytest.approx([0.5, 0.5, 0, 0])
    assert d.n_bits == 2


def test_tvd_and_collision():
    p = np.array([0.5, 0.5, 0, 0])
    q = np.array([0, 0, 0.5, 0.5])
    assert tvd(p, q) == pytest.approx(2.0)
    assert tvd(p, p) == 0.0
    assert collision_probability(p) == pytest.approx(0.5)


@given(st.integers(0, 10_000))
def test_cmi_matches_definition(seed):
    rng = np.random.default_rng(seed)
    p = rng.random(16)
    p /= p.sum()
    part = Partition((2, 4, 2), ("A", "B", "C"))
    assert cmi(p, part) == pytest.approx(direct_cmi(p.reshape(2, 4, 2)), abs=1e-10)


def test_cmi_region_order():
    rng = np.random.default_rng(3)
    p = rng.random(8)
    p /= p.sum()
    # sites labelled B, A, C: reorder before comparing with the direct formula
    part = Partition.qubits("BAC")
    want = direct_cmi(p.reshape(2, 2, 2).transpose(1, 0, 2))
    assert cmi(p, part) == pytest.approx(want)


def test_cmi_markov_chain_is_zero():
    pa = np.array([0.3, 0.7])
    pb_a = np.array([[0.9, 0.1], [0.2, 0.8]])
    pc_b = np.array([[0.6, 0.4], [0.25, 0.75]])
    p = np.einsum("a,ab,bc->abc", pa, pb_a, pc_b).reshape(-1)
    assert cmi(p, Partition.qubits("ABC")) == pytest.approx(0.0, abs=1e-12)


def test_marginal():
    p = np.arange(8, dtype=float) / 28
    m = marginal(OutputDistribution(p, (2, 2, 2)), Partition.qubits("ABB"), "A")
    assert m.probs == pytest.approx([6 / 28, 22 / 28])


def test_collision_slope_finite_difference(rng):
    p = rng.random(16)
    p /= p.sum()
    h = 1e-6
    fd = (noisy_collision(p, h) - noisy_collision(p, 0.0)) / h
    assert collision_slope(p) == pytest.approx(fd, rel=1e-4)


def test_depolarize_matches_channel(rng):
    rho = random_density(rng, 8)
    gamma = 0.3
    out = apply_depolarizing(DensityMatrix(rho, (2, 2, 2)), gamma)
    assert np.allclose(np.real(np.diag(out.entries)), depolarize_distribution(np.real(np.diag(rho)), gamma))
    full = apply_depolarizing(DensityMatrix(rho, (2, 2, 2)), 1.0)
    assert np.allclose(full.entries, np.eye(8) / 8)
    with pytest.raises(ValueError):
        depolarize_distribution(np.ones(3) / 3, 0.1)


def test_bitflip_overlap_examples():
    assert bitflip_overlap(np.array([1.0, 0, 0, 0])) == 0.0
    assert bitflip_overlap(np.ones(4) / 4) == pytest.approx(2 * 4 / 16)


def test_sensitivity_prediction_mixed():
    n, d = 3, 8
    assert sensitivity_prediction(np.eye(d) / d) == pytest.approx(n / d)


def test_coherence_formula_matches_ratio(rng):
    for _ in range(5):
        rho = random_density(rng, 2)
        r = coherence_r(rho, 0, 1).magnitude
        assert qubit_coherence_formula(rho) == pytest.approx(r**2)


def test_wishart_closed_examples():
    rho = np.array([[0.4, 0.1 + 0.1j, 0], [0.1 - 0.1j, 0.35, 0], [0, 0, 0.25]])
    p, pp = 0.4, 0.35
    r2 = abs(rho[0, 1]) ** 2 / (p * pp)
    assert wishart_joint_moment_closed(rho, 0, 1, 0, 1, 0) == pytest.approx(p)
    assert wishart_joint_moment_closed(rho, 0, 1, 0, 2, 0) == pytest.approx(2 * p**2)
    assert wishart_joint_moment_closed(rho, 0, 1, 0, 1, 1) == pytest.approx(p * pp * (1 + r2))
    assert wishart_joint_moment_closed(rho, 0, 1, 1, 0, 0) == pytest.approx(p * pp * (1 + r2))
    with pytest.raises(ValueError):
        wishart_joint_moment_closed(rho, 0, 1, 2, 2, 1)


def test_wishart_gaussian_mc():
    rho = DensityMatrix(np.array([[0.5, 0.2j], [-0.2j, 0.5]]))
    samp = EnsembleSampler.gaussian(2, seed=4, rho=rho)
    for a, b, c in [(0, 1, 1), (1, 1, 0), (0, 2, 1)]:
        est = wishart_joint_moment_mc(samp, 0, 1, a, b, c, 100_000)
        want = wishart_joint_moment_closed(rho.entries, 0, 1, a, b, c)
        assert abs(est.value - want) < 4 * est.std_error


def test_pt_ratio_haar():
    est = pt_moment_ratio(EnsembleSampler.haar(8, 1), maximally_mixed(8), 0, 2, 50_000)
    # Haar on C^d: E p^2 / (2 p^2) = d / (d + 1)
    assert abs(est.value - 8 / 9) < 4 * est.std_error
    with pytest.raises(ValueError):
        pt_moment_ratio(EnsembleSampler.haar(2, 1), DensityMatrix(np.diag([1.0, 0.0])), 1, 2, 100)


def test_cmi_subentropy_formula_product():
    rho = product(maximally_mixed(2), maximally_mixed(2), maximally_mixed(2))
    part = Partition.qubits("ABC")
    want = 2 * subentropy(np.eye(2) / 2) - subentropy(np.eye(4) / 4)
    assert cmi_subentropy_formula(rho, part) == pytest.approx(want)
    with pytest.raises(ValueError):
        cmi_subentropy_formula(random_rank(8, 8, 1), part)


def test_avg_cmi_runs():
    rho = product(maximally_mixed(2), maximally_mixed(2), maximally_mixed(2))
    est, target = avg_cmi_scrooge(rho, Partition.qubits("ABC"), 5000, seed=1)
    assert est.value > 0 and est.std_error < 0.05
    assert target > 0


def test_collision_doubles_for_high_entropy():
    from scrooge.ensembles import flat_rank

    rho = flat_rank(256, 64)
    b = EnsembleSampler.scrooge(rho, seed=2).draw(0, 20_000)
    c = np.sum(np.abs(b.states) ** 4, axis=1)
    ratio = np.sum(b.weights * c) / b.weights.sum() / collision_probability(np.real(np.diag(rho.entries)))
    assert ratio == pytest.approx(2.0, abs=0.1)


def test_sensitivity_against_finite_difference():
    from scrooge.outputstats import noise_sensitivity

    samp = EnsembleSampler.haar(16, seed=5)
    n = 20_000
    est = noise_sensitivity(samp, n)
    probs = np.abs(samp.draw(0, n).states) ** 2
    g = 1e-3
    fd = np.mean([(noisy_collision(p, g) - collision_probability(p)) / g for p in probs[:4000]])
    coll = np.mean(np.sum(probs[:4000] ** 2, axis=1))
    # slope = S - n C, so S is recovered from the finite difference up to O(gamma)
    assert fd + 4 * coll == pytest.approx(est.value, abs=4 * est.std_error * math.sqrt(n / 4000) + 0.01)
