from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from scipy import integrate, stats
from scipy.linalg import expm

from scrooge.bounds import (
    BoundInputs,
    bits_lower_bound,
    cardinality_check,
    cardinality_lower_bound,
    complexity_bound,
    dephased_state,
    discrete_scrooge_moment,
    noise_cutoff,
    noise_distinguishing_bound,
    temporal_additive_error_sweep,
    temporal_time_bound,
    time_averaged_state,
)
from scrooge.ensembles import Hamiltonian, flat_rank, make_hamiltonian, maximally_mixed


def test_bits_examples():
    assert bits_lower_bound(BoundInputs(s_inf=4.0)).value == pytest.approx(4.0)
    assert bits_lower_bound(BoundInputs(s_inf=4.0, k=2, epsilon=0.5)).value == pytest.approx(2 * 3 + 1)
    vac = bits_lower_bound(BoundInputs(s_inf=4.0, epsilon=0.5), delta=0.3)
    assert vac.vacuous and vac.value == math.inf


def test_input_validation():
    with pytest.raises(ValueError):
        BoundInputs(s_inf=1.0, k=0)
    with pytest.raises(ValueError):
        BoundInputs(s_inf=1.0, epsilon=2.5)
    with pytest.raises(ValueError):
        BoundInputs(s_inf=1.0, eta=0.0)


def test_time_and_complexity_examples():
    assert temporal_time_bound(BoundInputs(s_inf=2.0)) == pytest.approx(4.0)
    assert temporal_time_bound(BoundInputs(s_inf=10.0, k=2, epsilon=0.4, n=8)) == pytest.approx(
        2**20 * 0.64 / 16
    )
    assert temporal_time_bound(BoundInputs(s_inf=3.0, epsilon=2.0)) == 0.0
    c = complexity_bound(BoundInputs(s_inf=16.0))
    assert c["basic"] == pytest.approx(4.0)
    c = complexity_bound(BoundInputs(s_inf=8.0, k=2, eta=0.25))
    assert c["basic"] == pytest.approx(14 / 4)
    assert c["refined"] == pytest.approx(16 / 4)
    with pytest.raises(ValueError):
        complexity_bound(BoundInputs(s_inf=0.5))


def test_cardinality_bound_arithmetic():
    assert cardinality_lower_bound(3.0, 2, 0.0) == pytest.approx(32.0)
    assert cardinality_lower_bound(3.0, 2, 1.0, delta=0.25) == pytest.approx(0.25 * 32)


def test_noise_cutoff_against_binomial():
    out = noise_cutoff(40, 0.3)
    assert out["ell_star"] == 3
    assert out["q"] == pytest.approx(sum(stats.binom.pmf(j, 40, 0.3) for j in range(3)))
    ratio = stats.binom.pmf(2, 40, 0.3) / stats.binom.pmf(3, 40, 0.3)
    assert out["ratio"] == pytest.approx(ratio)
    assert out["holds"]
    with pytest.raises(ValueError):
        noise_cutoff(10, 1.0)


def test_noise_distinguishing_bound():
    q = noise_cutoff(40, 0.3)["q"]
    assert noise_distinguishing_bound(1, 40, 0.3, 5.0) == pytest.approx(2 * q)
    assert noise_distinguishing_bound(3, 40, 0.3, 5.0) == pytest.approx(6 * q + 6 / 32)


def test_time_average_against_quadrature():
    h = make_hamiltonian("gue", 4, seed=2, target_norm=1.0)
    psi0 = np.array([1, 1, 0, 0], dtype=complex) / math.sqrt(2)
    T = 3.0

    def entry(t, i, j, part):
        v = expm(-1j * t * h.matrix) @ psi0
        z = v[i] * np.conj(v[j]) / T
        return z.real if part == 0 else z.imag

    got = time_averaged_state(h, psi0, T)
    for i, j in [(0, 0), (0, 1), (2, 3)]:
        re = integrate.quad(entry, 0, T, args=(i, j, 0))[0]
        im = integrate.quad(entry, 0, T, args=(i, j, 1))[0]
        assert got[i, j] == pytest.approx(re + 1j * im, abs=1e-9)
    assert np.allclose(time_averaged_state(h, psi0, 0.0), np.outer(psi0, psi0.conj()))
    assert np.allclose(time_averaged_state(h, psi0, 1e7), dephased_state(h, psi0), atol=1e-6)


def test_degenerate_spectrum_warns():
    h = Hamiltonian(np.diag([0.0, 1.0, 1.0]).astype(complex))
    with pytest.warns(RuntimeWarning, match="degenerate"):
        temporal_additive_error_sweep(h, np.array([1, 0, 0], dtype=complex), 1, [1.0], 2000)


def test_temporal_sweep_shape():
    h = make_hamiltonian("gue", 8, seed=1, target_norm=1.0)
    psi0 = np.zeros(8, dtype=complex)
    psi0[0] = 1
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        rows = temporal_additive_error_sweep(h, psi0, 2, [0.0, 1e4], 20_000, seed=3)
    # T = 0 reproduces |psi0><psi0|^{(x)2}, which is far from the symmetrized operator
    assert rows[0]["additive_error"] == pytest.approx(1.0, abs=1e-9)
    assert rows[1]["additive_error"] < rows[0]["additive_error"]
    assert all(r["stderr"] >= 0 for r in rows)
    with pytest.raises(ValueError):
        temporal_additive_error_sweep(h, psi0, 3, [1.0], 100)


def test_discrete_moment_is_state_average():
    rho = flat_rank(4, 2)
    m = discrete_scrooge_moment(rho, 1, 500, seed=1)
    assert np.trace(m).real == pytest.approx(1.0)
    assert np.allclose(m, rho.entries, atol=0.12)


def test_cardinality_check_mixed():
    out = cardinality_check(maximally_mixed(4), 1, 1, seed=0)
    # one state against I/4 (unnormalized moment I/4 at k = 1): epsilon = 1.5
    assert out["epsilon"] == pytest.approx(1.5)
    assert out["required"] == pytest.approx(0.25 * 4)
    assert out["pass"]
    for r_states in (2, 16, 200):
        assert cardinality_check(maximally_mixed(4), 2, r_states, seed=r_states)["pass"]
    with pytest.raises(ValueError):
        cardinality_check(maximally_mixed(4), 2, 0)
