"""Computational-basis output statistics of sampled states.

TVD here is sum_x |p(x) - q(x)| with no factor 1/2, so it ranges over [0, 2].
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ensembles import Batch, EnsembleSampler
from .entropies import subentropy
from .hilbert import DensityMatrix, Partition, _as_array, partial_trace, reorder
from .moments import MIN_ESS, MomentEstimate, estimate

MAX_VECTOR_DIM = 2**14
MAX_MATRIX_DIM = 2**10


@dataclass(frozen=True)
class OutputDistribution:
    probs: np.ndarray
    factor_dims: tuple[int, ...]
    source: str = ""

    def __post_init__(self):
        p = np.array(self.probs, dtype=float).reshape(-1)
        if p.min(initial=0.0) < -1e-12:
            raise ValueError(f"negative probability {p.min():.3e}")
        p = np.clip(p, 0.0, None)
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {p.sum()!r}")
        dims = tuple(self.factor_dims) or (p.size,)
        if math.prod(dims) != p.size:
            raise ValueError("factor dims do not match distribution length")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "factor_dims", dims)

    @property
    def n_bits(self) -> int:
        return len(self.factor_dims)


@dataclass(frozen=True)
class CoherenceParam:
    r: complex

    def __post_init__(self):
        if abs(self.r) > 1 + 1e-9:
            raise ValueError(f"|r| = {abs(self.r)} exceeds 1")

    @property
    def magnitude(self) -> float:
        return min(abs(self.r), 1.0)


def _qubit_dims(d: int) -> tuple[int, ...]:
    n = int(round(math.log2(d))) if d > 1 else 0
    return (2,) * n if 2**n == d and d > 1 else (d,)


def output_distribution(obj, factor_dims: Sequence[int] = ()) -> OutputDistribution:
    arr = _as_array(obj)
    dims = tuple(factor_dims) or (obj.factor_dims if isinstance(obj, DensityMatrix) else ())
    if arr.ndim == 1:
        if arr.size > MAX_VECTOR_DIM:
            raise ValueError(f"state dimension {arr.size} exceeds {MAX_VECTOR_DIM}")
        p = np.abs(arr) ** 2
        p = p / p.sum()
        tag = "state"
    else:
        if arr.shape[0] > MAX_MATRIX_DIM:
            raise ValueError(f"matrix dimension {arr.shape[0]} exceeds {MAX_MATRIX_DIM}")
        p = np.real(np.diag(arr))
        tag = "rho"
    return OutputDistribution(p, dims or _qubit_dims(p.size), tag)


def _probs(p) -> np.ndarray:
    return p.probs if isinstance(p, OutputDistribution) else np.asarray(p, dtype=float)


def marginal(dist: OutputDistribution, part: Partition, keep) -> OutputDistribution:
    part.check(dist.probs.size)
    kept = part.sites(keep)
    t = dist.probs.reshape(part.factor_dims)
    drop = tuple(s for s in range(len(part.factor_dims)) if s not in kept)
    out = t.sum(axis=drop) if drop else t
    return OutputDistribution(out.reshape(-1), tuple(part.factor_dims[s] for s in kept), dist.source)


def tvd(p, q) -> float:
    """sum_x |p(x) - q(x)|, in [0, 2]."""
    return float(np.sum(np.abs(_probs(p) - _probs(q))))


def collision_probability(dist) -> float:
    p = _probs(dist)
    return float(np.sum(p * p))


# ---------------------------------------------------------------- Porter-Thomas and Wishart


def pt_moment_ratio(sampler: EnsembleSampler, rho: DensityMatrix, x: int, k: int, n: int, workers: int = 1):
    """E p^psi(x)^k / (k! p_rho(x)^k)."""
    px = float(np.real(rho.entries[x, x]))
    if px <= 1e-12:
        raise ValueError(f"p_rho({x}) = {px:.3e} is too small for a relative moment")
    target = math.factorial(k) * px**k

    def fn(batch: Batch):
        return (np.abs(batch.states[:, x]) ** (2 * k))[:, None]

    acc = estimate(sampler, n, fn, 1, workers, dtype=float)
    mean, sig, _ = acc.result()
    ess = acc.ess
    kind = "weighted" if sampler.weighted else "unweighted"
    return MomentEstimate(float(mean[0] / target), float(sig[0] / target), n, kind, ess, ess < MIN_ESS)


def coherence_r(rho, x: int, xp: int) -> CoherenceParam:
    m = _as_array(rho)
    p, pp = float(np.real(m[x, x])), float(np.real(m[xp, xp]))
    if p <= 1e-12 or pp <= 1e-12:
        raise ValueError("coherence needs both diagonal entries above 1e-12")
    r = complex(m[x, xp]) / math.sqrt(p * pp)
    if abs(r) > 1:
        r = r / abs(r)
    return CoherenceParam(r)


def qubit_coherence_formula(rho_c) -> float:
    """|r|^2 for a single-qubit state written as alpha sin^2 t / (1 - alpha cos^2 t).

    alpha = 2 tr(rho_c^2) - 1 is the squared Bloch length and t the polar angle.
    """
    m = _as_array(rho_c)
    alpha = float(2 * np.real(np.trace(m @ m)) - 1)
    if alpha <= 1e-15:
        return 0.0
    z = float(np.real(m[0, 0] - m[1, 1]))
    c2 = min(z * z / alpha, 1.0)
    return alpha * (1 - c2) / (1 - alpha * c2)


def _check_wishart_orders(a: int, b: int, c: int) -> None:
    if min(a, b, c) < 0:
        raise ValueError("orders must be nonnegative")
    if 2 * a + b + c > 6:
        raise ValueError("2a + b + c must not exceed 6")


def wishart_joint_moment_closed(rho, x: int, xp: int, a: int, b: int, c: int) -> float:
    """Closed-form E[|<x|psi><psi|x'>|^{2a} p(x)^b p(x')^c] from the 2x2 complex Wishart law."""
    _check_wishart_orders(a, b, c)
    m = _as_array(rho)
    p, pp = float(np.real(m[x, x])), float(np.real(m[xp, xp]))
    r2 = coherence_r(rho, x, xp).magnitude ** 2
    u, v = b + a, c + a
    s = sum(math.comb(u, j) * math.comb(v, j) * r2**j for j in range(min(u, v) + 1))
    return p**u * pp**v * math.factorial(u) * math.factorial(v) * s


def wishart_joint_moment_mc(
    sampler: EnsembleSampler, x: int, xp: int, a: int, b: int, c: int, n: int, workers: int = 1
) -> MomentEstimate:
    _check_wishart_orders(a, b, c)

    def fn(batch: Batch):
        s = batch.states
        px = np.abs(s[:, x]) ** 2
        pxp = np.abs(s[:, xp]) ** 2
        cross = np.abs(s[:, x] * np.conj(s[:, xp])) ** (2 * a)
        return (cross * px**b * pxp**c)[:, None]

    acc = estimate(sampler, n, fn, 1, workers, dtype=float)
    mean, sig, _ = acc.result()
    ess = acc.ess
    kind = "weighted" if sampler.weighted else "unweighted"
    return MomentEstimate(float(mean[0]), float(sig[0]), n, kind, ess, ess < MIN_ESS)


def wishart_mgf_diagnostic(
    sampler: EnsembleSampler, rho, xs: Sequence[int], ts: Sequence[float], n: int
) -> dict:
    """Empirical E exp(-sum_i t_i p(x_i)) against det(I + T Sigma)^{-1}, Sigma_ij = <x_i|rho|x_j>.

    Diagnostic only: for m > 2 strings the Wishart form is a heuristic.
    """
    m = _as_array(rho)
    xs = list(xs)
    tv = np.asarray(ts, dtype=float)
    sigma = m[np.ix_(xs, xs)]
    pred = float(1.0 / np.real(np.linalg.det(np.eye(len(xs)) + np.diag(tv) @ sigma)))

    def fn(batch: Batch):
        p = np.abs(batch.states[:, xs]) ** 2
        return np.exp(-(p @ tv))[:, None]

    acc = estimate(sampler, n, fn, 1, dtype=float)
    mean, sig, _ = acc.result()
    return {"mc": float(mean[0]), "stderr": float(sig[0]), "predicted": pred}


# ---------------------------------------------------------------- readout noise


def depolarize_distribution(probs: np.ndarray, gamma: float) -> np.ndarray:
    """Readout-noise image of qubit distributions (rows of ``probs``).

    Each bit is replaced by a uniformly random bit with probability gamma,
    i.e. flipped with probability gamma / 2. This is the diagonal of the
    per-qubit depolarizing channel.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    p = np.asarray(probs, dtype=float)
    single = p.ndim == 1
    p = p[None, :] if single else p
    d = p.shape[1]
    n = int(round(math.log2(d)))
    if 2**n != d:
        raise ValueError("distribution length must be a power of two")
    t = p.reshape((p.shape[0],) + (2,) * n)
    keep, flip = 1 - gamma / 2, gamma / 2
    for ax in range(1, n + 1):
        t = keep * t + flip * np.flip(t, axis=ax)
    out = t.reshape(p.shape)
    return out[0] if single else out


def noisy_collision(dist, gamma: float) -> float:
    return collision_probability(depolarize_distribution(_probs(dist), gamma))


def bitflip_overlap(probs: np.ndarray) -> np.ndarray:
    """sum_i sum_x p(x) p(x with bit i flipped), per row."""
    p = np.asarray(probs, dtype=float)
    single = p.ndim == 1
    p = p[None, :] if single else p
    n = int(round(math.log2(p.shape[1])))
    t = p.reshape((p.shape[0],) + (2,) * n)
    tot = np.zeros(p.shape[0])
    for ax in range(1, n + 1):
        tot += np.sum(t * np.flip(t, axis=ax), axis=tuple(range(1, n + 1)))
    return tot[0] if single else tot


def collision_slope(dist) -> float:
    """Exact d/dgamma at gamma = 0 of the noisy collision probability: S - n C."""
    p = _probs(dist)
    n = int(round(math.log2(p.size)))
    return float(bitflip_overlap(p) - n * np.sum(p * p))


def noise_sensitivity(sampler: EnsembleSampler, n: int, workers: int = 1) -> MomentEstimate:
    """Ensemble mean of sum_i sum_x p(x) p(x^i) over output distributions."""
    if sampler.dim > 2**14:
        raise ValueError("noise sensitivity limited to 14 qubits")

    def fn(batch: Batch):
        return bitflip_overlap(np.abs(batch.states) ** 2)[:, None]

    acc = estimate(sampler, n, fn, 1, workers, dtype=float)
    mean, sig, _ = acc.result()
    kind = "weighted" if sampler.weighted else "unweighted"
    return MomentEstimate(float(mean[0]), float(sig[0]), n, kind, acc.ess, acc.ess < MIN_ESS)


def sensitivity_prediction(rho) -> float:
    """sum_i sum_x [p(x) p(x^i) + |<x|rho|x^i>|^2] for the background state."""
    m = _as_array(rho)
    d = m.shape[0]
    n = int(round(math.log2(d)))
    idx = np.arange(d)
    p = np.real(np.diag(m))
    tot = 0.0
    for i in range(n):
        fl = idx ^ (1 << (n - 1 - i))
        tot += float(np.sum(p * p[fl]) + np.sum(np.abs(m[idx, fl]) ** 2))
    return tot


def apply_depolarizing(obj, gamma: float, factor_dims: Sequence[int] = ()) -> DensityMatrix:
    """Apply sigma -> (1 - gamma) sigma + gamma tr_i(sigma) (x) I/2 on every qubit."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    arr = _as_array(obj).astype(complex)
    if arr.ndim == 1:
        arr = np.outer(arr, arr.conj()) / np.vdot(arr, arr).real
    d = arr.shape[0]
    dims = tuple(factor_dims) or (obj.factor_dims if isinstance(obj, DensityMatrix) else _qubit_dims(d))
    if any(x != 2 for x in dims) or 2 ** len(dims) != d:
        raise ValueError(f"depolarizing needs qubit factors, got {dims}")
    n = len(dims)
    t = arr.reshape((2,) * (2 * n))
    for i in range(n):
        tr = np.trace(t, axis1=i, axis2=n + i)
        tr = np.expand_dims(np.expand_dims(tr, i), n + i)
        shape = [1] * (2 * n)
        shape[i] = shape[n + i] = 2
        t = (1 - gamma) * t + gamma * tr * (np.eye(2) / 2).reshape(shape)
    out = t.reshape(d, d)
    return DensityMatrix((out + out.conj().T) / 2, dims)


# ---------------------------------------------------------------- CMI


def _entropy_rows(p: np.ndarray) -> np.ndarray:
    """Shannon entropy in bits of each row of p, with 0 log 0 = 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        lg = np.where(p > 0, np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return -np.sum(p * lg, axis=1)


def _abc_tensor(probs: np.ndarray, part: Partition, a, b, c):
    """Rows of ``probs`` reshaped to (rows, dA, dB, dC)."""
    regs = [a, b, c]
    sites = []
    for r in regs:
        sites += part.sites(r)
    if sorted(sites) != list(range(len(part.factor_dims))):
        raise ValueError("A, B, C must be disjoint and cover every site")
    t = probs.reshape((probs.shape[0],) + part.factor_dims)
    t = t.transpose([0] + [1 + s for s in sites])
    dims = [part.region_dim(r) for r in regs]
    return t.reshape(probs.shape[0], *dims)


def cmi_rows(probs: np.ndarray, part: Partition, a="A", b="B", c="C") -> np.ndarray:
    t = _abc_tensor(np.asarray(probs, dtype=float), part, a, b, c)
    rows = t.shape[0]
    h_abc = _entropy_rows(t.reshape(rows, -1))
    h_ab = _entropy_rows(t.sum(axis=3).reshape(rows, -1))
    h_bc = _entropy_rows(t.sum(axis=1).reshape(rows, -1))
    h_b = _entropy_rows(t.sum(axis=(1, 3)).reshape(rows, -1))
    return h_ab + h_bc - h_b - h_abc


def cmi(dist, part: Partition, a="A", b="B", c="C") -> float:
    """I(X_A : X_C | X_B) in bits from exact marginals."""
    p = _probs(dist)
    part.check(p.size)
    val = float(cmi_rows(p[None, :], part, a, b, c)[0])
    if val < -1e-9:
        raise ArithmeticError(f"CMI came out negative ({val:.3e})")
    return max(val, 0.0)


def _check_product(rho: DensityMatrix, part: Partition, regs: Sequence[str], tol: float = 1e-10):
    mat, p2 = reorder(rho.entries, part, list(regs))
    factors = [partial_trace(mat, p2, r) for r in regs]
    prod = factors[0]
    for f in factors[1:]:
        prod = np.kron(prod, f)
    err = float(np.max(np.abs(prod - mat)))
    if err > tol:
        raise ValueError(f"rho is not a product over {list(regs)} (deviation {err:.3e})")
    return factors


def cmi_subentropy_formula(rho: DensityMatrix, part: Partition, a="A", b="B", c="C") -> float:
    """Q(rho_A) + Q(rho_C) - Q(rho_AC) for a product background state."""
    fa, _, fc = _check_product(rho, part, [a, b, c])
    return subentropy(fa) + subentropy(fc) - subentropy(np.kron(fa, fc))


def avg_cmi_scrooge(
    rho: DensityMatrix,
    part: Partition,
    n: int,
    seed: int = 0,
    method: str = "distortion",
    a="A",
    b="B",
    c="C",
    workers: int = 1,
) -> tuple[MomentEstimate, float]:
    """Mean output CMI over Scrooge samples, and the subentropy prediction."""
    target = cmi_subentropy_formula(rho, part, a, b, c)
    sampler = EnsembleSampler.scrooge(rho, seed, method)

    def fn(batch: Batch):
        return np.clip(cmi_rows(np.abs(batch.states) ** 2, part, a, b, c), 0.0, None)[:, None]

    acc = estimate(sampler, n, fn, 1, workers, dtype=float)
    mean, sig, _ = acc.result()
    kind = "weighted" if sampler.weighted else "unweighted"
    return MomentEstimate(float(mean[0]), float(sig[0]), n, kind, acc.ess, acc.ess < MIN_ESS), target


def mean_tvd_to_background(
    sampler: EnsembleSampler, rho: DensityMatrix, n: int, gammas: Sequence[float] = (0.0,), workers: int = 1
) -> list[MomentEstimate]:
    """E tvd(noisy p^psi, noisy p^rho) for each gamma, all from the same samples."""
    prho = np.real(np.diag(rho.entries))
    noisy_rho = [depolarize_distribution(prho, g) for g in gammas]

    def fn(batch: Batch):
        p = np.abs(batch.states) ** 2
        cols = [np.sum(np.abs(depolarize_distribution(p, g) - q[None, :]), axis=1) for g, q in zip(gammas, noisy_rho)]
        return np.stack(cols, axis=1)

    acc = estimate(sampler, n, fn, len(gammas), workers, dtype=float)
    mean, sig, _ = acc.result()
    kind = "weighted" if sampler.weighted else "unweighted"
    return [MomentEstimate(float(m), float(s), n, kind, acc.ess, acc.ess < MIN_ESS) for m, s in zip(mean, sig)]

