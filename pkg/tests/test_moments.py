from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from scrooge.ensembles import EnsembleSampler, flat_rank, maximally_mixed, random_rank
from scrooge.hilbert import DensityMatrix, Partition, all_permutations, permutation_operator
from scrooge.moments import (
    WeightedAccumulator,
    approx_moment_element,
    approx_moment_matrix,
    default_probes,
    estimate,
    full_moment_matrices,
    haar_prefactor,
    jackknife_sigma,
    mc_moment_element,
    relative_error_probes,
    relative_error_psd,
    rising_factorial,
    subsystem_moment_error,
    relerr_scale,
    trace_norm_distance,
)

from conftest import random_density


def test_prefactor_arithmetic():
    assert rising_factorial(4, 3) == 4 * 5 * 6
    assert haar_prefactor(4, 2) == pytest.approx(16 / 20)
    # flat rank 16: m = 16, delta = 11 * 4 / 4
    assert relerr_scale(flat_rank(64, 16), 2) == pytest.approx(11.0)


def test_approx_element_matches_dense(rng):
    d, k = 3, 3
    rho = random_density(rng, d)
    dense = approx_moment_matrix(rho, k)
    for _ in range(5):
        bras = [rng.standard_normal(d) + 1j * rng.standard_normal(d) for _ in range(k)]
        kets = [rng.standard_normal(d) + 1j * rng.standard_normal(d) for _ in range(k)]
        bra = np.kron(np.kron(bras[0], bras[1]), bras[2])
        ket = np.kron(np.kron(kets[0], kets[1]), kets[2])
        assert approx_moment_element(rho, bras, kets) == pytest.approx(np.vdot(bra, dense @ ket))


def test_approx_matrix_from_scratch(rng):
    # independent construction: explicit loop over permutation matrices
    d = 2
    rho = random_density(rng, d)
    rk = np.kron(rho, rho)
    want = rk @ (np.eye(4) + permutation_operator(all_permutations(2)[1], d))
    assert np.allclose(approx_moment_matrix(rho, 2), want)
    swap = np.zeros((4, 4))
    for i in range(2):
        for j in range(2):
            swap[2 * i + j, 2 * j + i] = 1
    assert np.allclose(want, rk @ (np.eye(4) + swap))


@pytest.mark.parametrize("d,k", [(2, 2), (3, 2), (2, 3), (4, 3)])
def test_trace_one_at_maximally_mixed(d, k):
    m = approx_moment_matrix(maximally_mixed(d).entries, k, prefactor=True)
    assert np.trace(m).real == pytest.approx(1.0)


def test_trace_general_k2(rng):
    # for k = 2 the trace is d (1 + tr rho^2) / (d + 1), equal to 1 only at I/d
    rho = random_density(rng, 3)
    t = np.trace(approx_moment_matrix(rho, 2, prefactor=True)).real
    assert t == pytest.approx(3 * (1 + np.trace(rho @ rho).real) / 4)


def test_haar_is_exact_moment():
    # at rho = I/d the prefactored operator is the exact Haar moment
    d, k = 3, 2
    mc, appr = full_moment_matrices(maximally_mixed(d).entries, EnsembleSampler.haar(d, 1), k, 60_000)
    assert trace_norm_distance(mc, appr) < 0.05


def test_relative_error_psd_examples():
    a = np.diag([1.0, 2.0])
    assert relative_error_psd(a, a) == pytest.approx(0.0)
    assert relative_error_psd(a, 1.1 * a) == pytest.approx(0.1)
    assert relative_error_psd(a, np.diag([0.5, 2.0])) == pytest.approx(0.5)
    assert relative_error_psd(np.diag([1.0, 0.0]), np.diag([1.0, 1e-3])) == math.inf
    assert relative_error_psd(np.diag([1.0, 0.0]), np.diag([1.2, 0.0])) == pytest.approx(0.2)
    with pytest.raises(ValueError):
        relative_error_psd(np.diag([1.0, -1.0]), np.eye(2))


@given(st.integers(0, 10_000), st.floats(0.01, 100.0))
def test_relative_error_scale_invariant(seed, c):
    rng = np.random.default_rng(seed)
    a = random_density(rng, 4)
    b = random_density(rng, 4)
    assert relative_error_psd(c * a, c * b) == pytest.approx(relative_error_psd(a, b), rel=1e-6)


@given(st.integers(0, 10_000))
def test_relative_error_sandwich(seed):
    rng = np.random.default_rng(seed)
    a = random_density(rng, 3)
    b = random_density(rng, 3)
    eps = relative_error_psd(a, b)
    lo = np.linalg.eigvalsh(b - (1 - eps) * a)[0]
    hi = np.linalg.eigvalsh((1 + eps) * a - b)[0]
    assert lo >= -1e-9 and hi >= -1e-9


def test_trace_norm_distance_svd_vs_eig(rng):
    a = random_density(rng, 5)
    b = random_density(rng, 5)
    assert trace_norm_distance(a, b) == pytest.approx(np.sum(np.abs(np.linalg.eigvalsh(a - b))))


def test_jackknife_of_block_means():
    # delete-one replicates of iid data reproduce the usual standard error
    rng = np.random.default_rng(0)
    x = rng.standard_normal(50)
    reps = np.array([(x.sum() - xi) / 49 for xi in x])
    assert jackknife_sigma(reps[:, None])[0] == pytest.approx(x.std(ddof=1) / math.sqrt(50))


def test_weighted_accumulator_mean():
    n = 1000
    rng = np.random.default_rng(2)
    v = rng.standard_normal((n, 2))
    w = rng.random(n)
    acc = WeightedAccumulator(n, 2, dtype=float)
    acc.add(0, v[:400], w[:400])
    acc.add(400, v[400:], w[400:])
    mean, sig, reps = acc.result()
    assert np.allclose(mean, (v * w[:, None]).sum(0) / w.sum())
    assert acc.ess == pytest.approx(w.sum() ** 2 / (w**2).sum())
    assert reps.shape[0] == 50


def test_workers_agree():
    rho = random_rank(8, 4, seed=3)
    samp = EnsembleSampler.scrooge(rho, seed=5)
    pr = default_probes(8)
    a = relative_error_probes(rho, samp, 2, pr, 30_000, workers=1)
    b = relative_error_probes(rho, samp, 2, pr, 30_000, workers=3)
    assert abs(a.epsilon_measured - b.epsilon_measured) < 1e-12
    fn = lambda batch: np.abs(batch.states) ** 2  # noqa: E731
    m1, _, _ = estimate(samp, 20_000, fn, 8, workers=1, dtype=float).result()
    m3, _, _ = estimate(samp, 20_000, fn, 8, workers=3, dtype=float).result()
    assert np.max(np.abs(m1 - m3)) < 1e-12


def test_mc_element_haar():
    d = 4
    e0 = np.eye(d)[0]
    est = mc_moment_element(EnsembleSampler.haar(d, 2), [e0, e0], [e0, e0], 100_000)
    assert abs(est.value - 2 / (d * (d + 1))) < 4 * est.std_error
    assert not est.low_quality
    with pytest.raises(ValueError):
        mc_moment_element(EnsembleSampler.haar(d, 2), [e0], [e0], 10)


def test_probes_consistent_for_flat_state():
    rho = flat_rank(16, 16)
    rep = relative_error_probes(rho, EnsembleSampler.haar(16, 1), 2, default_probes(16), 50_000)
    assert rep.epsilon_measured < 5 * rep.epsilon_sigma
    assert rep.n_probes == 16
    assert len(rep.details) == 16


def test_default_probes_large():
    p = default_probes(1024, seed=1)
    assert len(p.indices) == 256
    assert p.vectors.shape == (64, 1024)
    assert np.allclose(np.linalg.norm(p.vectors, axis=1), 1)


def test_subsystem_error_product_state():
    rho = maximally_mixed(16)
    part = Partition.qubits("AABB")
    rep = subsystem_moment_error(rho, EnsembleSampler.haar(16, 4), 2, part, ["A", "B"], 20_000)
    assert rep.epsilon_measured < 5 * rep.epsilon_sigma + 1e-3
    # S* of I on 2 qubits is 2 bits, so the bound is 4 * 2^-2
    assert rep.epsilon_bound == pytest.approx(1.0, rel=1e-3)
