from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from scrooge.ensembles import maximally_mixed, random_rank
from scrooge.entropies import (
    Q_MAX,
    conditional_hat_entropy,
    entropy_report,
    gaussian_identity_target,
    min_entropy,
    post_measurement_min_entropy,
    post_measurement_min_entropy_grid,
    post_measurement_norm,
    renyi_entropy,
    subentropy,
    subentropy_flat,
    subentropy_gaussian_check,
    subentropy_integral,
)
from scrooge.hilbert import DensityMatrix, Partition

from conftest import random_density


def direct_subentropy(lam):
    """Plain float evaluation; fine when eigenvalues are well separated."""
    lam = np.asarray(lam, dtype=float)
    tot = 0.0
    for k, x in enumerate(lam):
        others = np.delete(lam, k)
        tot += x ** len(lam) * math.log(x) / np.prod(x - others)
    return -tot / math.log(2)


def test_renyi_examples():
    rho = np.diag([0.5, 0.25, 0.25])
    assert min_entropy(rho) == pytest.approx(1.0)
    assert renyi_entropy(rho, 1.0) == pytest.approx(1.5)
    assert renyi_entropy(rho, 2.0) == pytest.approx(-math.log2(0.375))
    assert renyi_entropy(rho, math.inf) == pytest.approx(1.0)
    assert renyi_entropy(np.eye(8) / 8, 0.5) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        renyi_entropy(rho, 0)


@given(st.integers(0, 10_000))
def test_renyi_monotone_in_alpha(seed):
    rho = random_density(np.random.default_rng(seed), 5)
    vals = [renyi_entropy(rho, a) for a in (0.5, 1.0, 2.0, 3.0, math.inf)]
    assert all(a >= b - 1e-9 for a, b in zip(vals, vals[1:]))


def test_subentropy_qubit_mixed():
    # Q(I/2) = 1 - H_2 + ln 2 nats
    assert subentropy(np.eye(2) / 2) * math.log(2) == pytest.approx(0.19315, abs=1e-5)
    assert subentropy(np.diag([1.0, 0.0])) == 0.0


@pytest.mark.parametrize("m", [2, 8, 64])
def test_subentropy_flat_matches(m):
    q = subentropy_flat(m)
    assert subentropy(np.eye(m) / m) == pytest.approx(q, abs=1e-5)
    assert subentropy_integral(np.eye(m) / m) == pytest.approx(q, abs=1e-7)


def test_subentropy_flat_asymptote():
    assert subentropy_flat(1) == 0.0
    assert subentropy_flat(10**6) == pytest.approx(Q_MAX, abs=1e-6)


@pytest.mark.parametrize("lam", [[0.7, 0.3], [0.5, 0.3, 0.2], [0.4, 0.3, 0.2, 0.1]])
def test_subentropy_against_direct(lam):
    assert subentropy(np.diag(lam)) == pytest.approx(direct_subentropy(lam), abs=1e-10)
    assert subentropy_integral(np.diag(lam)) == pytest.approx(direct_subentropy(lam), abs=1e-8)


@given(st.integers(0, 10_000), st.integers(2, 6))
def test_subentropy_bounds(seed, d):
    rho = random_density(np.random.default_rng(seed), d)
    q = subentropy(rho)
    assert 0.0 <= q <= Q_MAX
    assert q <= renyi_entropy(rho, 1.0) + 1e-9
    assert q == pytest.approx(subentropy_integral(rho), abs=1e-6)


def test_gaussian_identity():
    rho = random_rank(4, 4, seed=1)
    est = subentropy_gaussian_check(rho, 200_000, seed=3)
    assert abs(est.value - gaussian_identity_target(rho)) < 4 * est.std_error
    with pytest.raises(ValueError):
        subentropy_gaussian_check(rho, 100)


def bell():
    v = np.array([1, 0, 0, 1]) / math.sqrt(2)
    return DensityMatrix.from_pure(v, (2, 2))


def test_hat_entropy_examples(rng):
    part = Partition.qubits("AB")
    assert conditional_hat_entropy(bell(), part) == pytest.approx(0.0, abs=1e-9)
    a = random_density(rng, 2)
    b = np.diag([0.8, 0.2])
    assert conditional_hat_entropy(np.kron(a, b), part) == pytest.approx(-math.log2(0.8))


def test_post_measurement_product_and_bell(rng):
    part = Partition.qubits("AB")
    a = random_density(rng, 2)
    res = post_measurement_min_entropy(np.kron(a, np.diag([0.6, 0.4])), part)
    assert res.method == "product"
    assert res.value == pytest.approx(-math.log2(0.6))
    assert post_measurement_min_entropy(bell(), part).value == pytest.approx(0.0, abs=1e-9)


def test_post_measurement_classical():
    # diagonal state: S* = min_x -log2 max_y p(y|x)
    p = np.array([[0.3, 0.1], [0.15, 0.45]])
    rho = np.diag(p.reshape(-1))
    want = min(-math.log2(p[x].max() / p[x].sum()) for x in range(2))
    part = Partition.qubits("AB")
    assert post_measurement_min_entropy(rho, part).value == pytest.approx(want, abs=1e-9)
    assert post_measurement_min_entropy_grid(rho, part) == pytest.approx(want, abs=1e-6)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_post_measurement_against_grid(seed):
    rho = random_density(np.random.default_rng(seed), 6)
    part = Partition((2, 3), ("A", "B"))
    res = post_measurement_min_entropy(rho, part, restarts=16)
    grid = post_measurement_min_entropy_grid(rho, part)
    assert res.value == pytest.approx(grid, abs=1e-6)
    # the reported optimizer attains the value
    y = np.array([complex(*c) for c in res.best_y])
    assert post_measurement_norm(rho, part, y) == pytest.approx(res.max_norm, rel=1e-8)


def test_post_measurement_region_checks():
    part = Partition.qubits("AB")
    with pytest.raises(ValueError):
        post_measurement_min_entropy(np.eye(4) / 4, part, "A", "A")
    with pytest.raises(ValueError):
        post_measurement_min_entropy(np.eye(4) / 4, part, "A", [])


def test_entropy_report_json():
    rho = DensityMatrix(maximally_mixed(4).entries, (2, 2))
    rep = entropy_report(rho, rho.partition("AB"), restarts=4)
    assert rep.S_inf == pytest.approx(2.0)
    assert set(rep.S_star) == {"A", "B"}
    assert '"S_inf": 2.0' in rep.to_json()
