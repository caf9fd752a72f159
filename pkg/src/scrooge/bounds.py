"""Randomness, temporal-time and complexity lower bounds, plus desk-scale verifiers.

Asymptotic constants are set to 1, so those values are order-of-magnitude
only. The cardinality inequality is explicit and is checked as a hard
inequality.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .ensembles import EnsembleSampler, Hamiltonian, hamiltonian_eigs
from .hilbert import DensityMatrix, hermitianize
from .moments import MAX_FULL_DIM, approx_moment_matrix, relerr_scale, trace_norm_distance
from .entropies import min_entropy


@dataclass(frozen=True)
class BoundInputs:
    s_inf: float
    k: int = 1
    epsilon: float = 0.0
    eta: float = 1.0
    n: int = 1
    h_norm: float = 1.0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0.0 <= self.epsilon <= 2.0:
            raise ValueError("epsilon must lie in [0, 2]")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError("eta must lie in (0, 1]")


@dataclass(frozen=True)
class BoundValue:
    value: float
    vacuous: bool
    note: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def bits_lower_bound(inputs: BoundInputs, delta: float = 0.0) -> BoundValue:
    """k (S_inf - log2 k) - log2(1 - epsilon - 2 delta), in bits.

    When the log argument is not positive the bound carries no information;
    the value is then +inf and ``vacuous`` is set.
    """
    arg = 1.0 - inputs.epsilon - 2.0 * delta
    if arg <= 0:
        return BoundValue(math.inf, True, "1 - epsilon - 2 delta <= 0")
    k = inputs.k
    return BoundValue(k * (inputs.s_inf - math.log2(k)) - math.log2(arg), False)


def cardinality_lower_bound(s_inf: float, k: int, epsilon: float, delta: float = 0.0) -> float:
    """Fewest states a discrete ensemble needs to reach additive error epsilon."""
    return (1.0 - delta - epsilon / 2.0) * 2.0 ** (k * s_inf) / math.factorial(k)


def temporal_time_bound(inputs: BoundInputs) -> float:
    """2^{k S} (1 - epsilon/2)^2 / (k! n), order of magnitude."""
    k = inputs.k
    return 2.0 ** (k * inputs.s_inf) * (1.0 - inputs.epsilon / 2.0) ** 2 / (math.factorial(k) * inputs.n)


def complexity_bound(inputs: BoundInputs) -> dict:
    """Gate-count lower bound k (S - log2 k) / log2(k S), and its refinement with eta."""
    k, s = inputs.k, inputs.s_inf
    ks = k * s
    if ks <= 1:
        raise ValueError("need k * S_inf > 1")
    basic = k * (s - math.log2(k)) / math.log2(ks)
    refined = (k * (s - math.log2(k)) - math.log2(inputs.eta)) / math.log2(ks)
    return {"basic": basic, "refined": refined}


# ---------------------------------------------------------------- noise cutoff


def noise_cutoff(n: int, gamma: float) -> dict:
    """Binomial cutoff used to bound the chance that noise touches few qubits.

    The number of depolarized qubits is Binomial(n, gamma). With cutoff
    l* = ceil(gamma n / 4), q is the probability of fewer than l* hits, which
    is at most 2 b_{l*} whenever the adjacent ratio b_{l*-1}/b_{l*} <= 1/2.
    """
    from scipy import stats

    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    ell = math.ceil(gamma * n / 4)
    dist = stats.binom(n, gamma)
    q = float(dist.cdf(ell - 1)) if ell > 0 else 0.0
    b = float(dist.pmf(ell))
    ratio = ell / (n - ell + 1) * (1 - gamma) / gamma
    return {"n": n, "gamma": gamma, "ell_star": ell, "q": q, "b": b, "ratio": ratio, "holds": bool(q <= 2 * b)}


def noise_distinguishing_bound(k: int, n: int, gamma: float, s_star: float) -> float:
    """TVD bound 2 k q(l*) + k (k - 1) 2^{-S*} for k noisy copies."""
    return 2 * k * noise_cutoff(n, gamma)["q"] + k * (k - 1) * 2.0 ** (-s_star)


# ---------------------------------------------------------------- cardinality verifier


def discrete_scrooge_moment(rho: DensityMatrix, k: int, r_states: int, seed: int = 0) -> np.ndarray:
    """Uniform average of psi^{(x)k} over r_states exact purification samples."""
    sampler = EnsembleSampler.scrooge(rho, seed, method="purification")
    batch = sampler.draw(0, r_states)
    s = batch.states
    t = s
    for _ in range(k - 1):
        t = (t[:, :, None] * s[:, None, :]).reshape(len(s), -1)
    return hermitianize(t.T @ t.conj() / r_states)


def cardinality_check(rho: DensityMatrix, k: int, r_states: int, seed: int = 0, slack: float = 1e-6) -> dict:
    """Check r_states >= (1 - epsilon/2) 2^{k S_inf} / k! on one discrete ensemble.

    epsilon is the measured trace distance to the unnormalized approximate
    moment. That operator has trace at least 1 and spectral norm
    k! lambda_max^k, which is all the inequality needs, so this is
    the constant-free form (delta = 0).
    """
    d = rho.dim
    if d**k > MAX_FULL_DIM:
        raise ValueError(f"d^k = {d**k} exceeds {MAX_FULL_DIM}")
    if r_states < 1:
        raise ValueError("r_states must be >= 1")
    disc = discrete_scrooge_moment(rho, k, r_states, seed)
    appr = approx_moment_matrix(rho, k, prefactor=False)
    eps = trace_norm_distance(disc, appr)
    s_inf = min_entropy(rho)
    need = cardinality_lower_bound(s_inf, k, eps)
    return {
        "k": k,
        "d": d,
        "r_states": r_states,
        "epsilon": eps,
        "s_inf": s_inf,
        "required": need,
        "delta_reference": relerr_scale(rho, k),
        "pass": bool(r_states >= need - slack),
    }


# ---------------------------------------------------------------- temporal ensembles


def time_averaged_state(h: Hamiltonian, psi0, T: float) -> np.ndarray:
    """First moment of e^{-iHt}|psi0> for t uniform on [0, T], in closed form."""
    w, v = hamiltonian_eigs(h.matrix)
    c = v.conj().T @ np.asarray(psi0, dtype=complex)
    gap = w[:, None] - w[None, :]
    x = gap * T
    small = np.abs(x) < 1e-8
    safe = np.where(small, 1.0, x)
    # (1 - e^{-ix}) / (ix), with series value 1 - ix/2 near 0
    fac = np.where(small, 1.0 - 0.5j * x, (1.0 - np.exp(-1j * safe)) / (1j * safe))
    rho_e = np.outer(c, c.conj()) * fac
    return hermitianize(v @ rho_e @ v.conj().T)


def dephased_state(h: Hamiltonian, psi0) -> np.ndarray:
    w, v = hamiltonian_eigs(h.matrix)
    c = v.conj().T @ np.asarray(psi0, dtype=complex)
    return hermitianize((v * np.abs(c) ** 2) @ v.conj().T)


def _check_gaps(w: np.ndarray, tol: float = 1e-9) -> None:
    if np.min(np.diff(np.sort(w))) < tol * max(1.0, float(np.max(np.abs(w)))):
        warnings.warn("degenerate Hamiltonian spectrum: time averages need not dephase", RuntimeWarning, stacklevel=3)


def temporal_additive_error_sweep(
    h: Hamiltonian,
    psi0,
    k: int,
    t_list: Sequence[float],
    n: int,
    seed: int = 0,
    splits: int = 10,
) -> list[dict]:
    """Trace distance between MC temporal moments and the approximate moment of rho_T.

    The standard error comes from the spread of the distance over ``splits``
    disjoint sub-ensembles (each of size n / splits), scaled by 1/sqrt(splits).
    """
    d = h.dim
    if d > 64 or k > 2:
        raise ValueError("sweep limited to d <= 64 and k <= 2")
    w, _ = hamiltonian_eigs(h.matrix)
    _check_gaps(w)
    rows = []
    for T in t_list:
        rho_t = time_averaged_state(h, psi0, T)
        appr = approx_moment_matrix(rho_t, k, prefactor=False)
        sampler = EnsembleSampler.temporal(h, psi0, T, seed)
        sub = n // splits
        parts = [_temporal_moment(sampler, k, sub, start=j * sub) for j in range(splits)]
        err = trace_norm_distance(sum(parts) / splits, appr)
        errs = [trace_norm_distance(p, appr) for p in parts]
        se = float(np.std(errs, ddof=1) / math.sqrt(splits)) if splits > 1 else math.nan
        rows.append({"T": float(T), "additive_error": err, "stderr": se})
    return rows


def _temporal_moment(sampler: EnsembleSampler, k: int, n: int, start: int = 0, chunk: int = 2048) -> np.ndarray:
    d = sampler.dim
    acc = np.zeros((d**k, d**k), dtype=complex)
    for a in range(start, start + n, chunk):
        s = sampler.draw(a, min(a + chunk, start + n)).states
        t = s
        for _ in range(k - 1):
            t = (t[:, :, None] * s[:, None, :]).reshape(len(s), -1)
        acc += t.T @ t.conj()
    return hermitianize(acc / n)
