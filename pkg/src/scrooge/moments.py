"""Approximate Scrooge moments, Monte Carlo moment estimators and error measures."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .ensembles import Batch, EnsembleSampler, map_batches
from .hilbert import (
    DensityMatrix,
    Partition,
    _as_array,
    all_permutations,
    hermitianize,
    kron,
    partial_trace,
    permutation_operator,
    permuted_product_element,
)

MAX_K = 6
MAX_FULL_DIM = 4096
JACKKNIFE_BLOCKS = 50
MIN_ESS = 30.0
BOUND_CONSTANT = 11.0


class LowQualityEstimate(RuntimeError):
    pass


@dataclass
class MomentEstimate:
    value: complex | float
    std_error: float
    n_samples: int
    kind: str = "unweighted"
    ess: float = 0.0
    low_quality: bool = False

    def to_dict(self) -> dict:
        out = asdict(self)
        v = self.value
        if isinstance(v, complex):
            out["value"] = v.real
            out["value_imag"] = v.imag
        return out


@dataclass
class ErrorReport:
    epsilon_measured: float
    epsilon_sigma: float
    epsilon_bound: float
    epsilon_excess: float = 0.0
    consistent_with_zero: bool = True
    probes: str = ""
    n_probes: int = 0
    n_samples: int = 0
    ess: float = 0.0
    low_quality: bool = False
    constant: float = BOUND_CONSTANT
    details: list = field(default_factory=list)

    def to_dict(self, with_details: bool = False) -> dict:
        out = asdict(self)
        if not with_details:
            out.pop("details")
        return out


def rising_factorial(d: int, k: int) -> int:
    return math.prod(range(d, d + k))


def haar_prefactor(d: int, k: int) -> float:
    return d**k / rising_factorial(d, k)


def relerr_scale(rho: DensityMatrix, k: int, c: float = BOUND_CONSTANT) -> float:
    """Relative-error scale c k^2 / sqrt(m) with m = floor(1 / max eig)."""
    m = math.floor(1.0 / rho.max_eig + 1e-9)
    return c * k * k / math.sqrt(max(m, 1))


# ---------------------------------------------------------------- closed form


def approx_moment_element(rho, bras: Sequence, kets: Sequence, prefactor: bool = False) -> complex:
    """Sum over all k! permutations of the permuted product element."""
    k = len(bras)
    if k != len(kets):
        raise ValueError("bras and kets must have equal length")
    if k > MAX_K:
        raise ValueError(f"k = {k} exceeds {MAX_K}; k! permutations would be enumerated")
    tot = sum(permuted_product_element(rho, bras, kets, pi) for pi in all_permutations(k))
    if prefactor:
        tot *= haar_prefactor(_as_array(rho).shape[0], k)
    return complex(tot)


def approx_moment_matrix(rho, k: int, prefactor: bool = False) -> np.ndarray:
    m = _as_array(rho)
    d = m.shape[0]
    if d**k > MAX_FULL_DIM:
        raise ValueError(f"d^k = {d**k} exceeds {MAX_FULL_DIM}")
    rk = kron(*([m] * k)) if k > 1 else m.copy()
    sym = sum(permutation_operator(pi, d) for pi in all_permutations(k))
    out = rk @ sym
    if prefactor:
        out = out * haar_prefactor(d, k)
    return hermitianize(out)


# ---------------------------------------------------------------- MC engine


class WeightedAccumulator:
    """Self-normalized weighted means with delete-one-block jackknife errors.

    Sample ``i`` of ``n`` falls in jackknife block ``i * blocks // n``.
    Per-block sums are kept, so memory does not grow with ``n``.
    """

    def __init__(self, n: int, width: int, blocks: int = JACKKNIFE_BLOCKS, dtype=complex):
        self.n = n
        self.blocks = min(blocks, n)
        self.swf = np.zeros((self.blocks, width), dtype=dtype)
        self.sw = np.zeros(self.blocks)
        self.sw2 = np.zeros(self.blocks)
        self.count = 0

    def segments(self, start: int, length: int):
        idx = np.arange(start, start + length)
        blk = idx * self.blocks // self.n
        cuts = np.flatnonzero(np.diff(blk)) + 1
        bounds = np.concatenate([[0], cuts, [length]])
        for a, b in zip(bounds[:-1], bounds[1:]):
            yield int(blk[a]), a, b

    def add(self, start: int, values: np.ndarray, weights: np.ndarray) -> None:
        values = np.asarray(values).reshape(len(weights), -1)
        for j, a, b in self.segments(start, len(weights)):
            w = weights[a:b]
            self.swf[j] += w @ values[a:b]
            self.sw[j] += w.sum()
            self.sw2[j] += (w * w).sum()
        self.count += len(weights)

    def add_block_sums(self, j: int, swf: np.ndarray, sw: float, sw2: float, count: int) -> None:
        self.swf[j] += swf
        self.sw[j] += sw
        self.sw2[j] += sw2
        self.count += count

    def merge(self, other: WeightedAccumulator) -> None:
        self.swf += other.swf
        self.sw += other.sw
        self.sw2 += other.sw2
        self.count += other.count

    @property
    def ess(self) -> float:
        return float(self.sw.sum() ** 2 / max(self.sw2.sum(), 1e-300))

    def result(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(means, jackknife std errors, jackknife replicates of shape (blocks, width))."""
        tot_wf = self.swf.sum(axis=0)
        tot_w = self.sw.sum()
        mean = tot_wf / tot_w
        reps = (tot_wf[None, :] - self.swf) / (tot_w - self.sw)[:, None]
        return mean, jackknife_sigma(reps), reps


def jackknife_sigma(reps: np.ndarray) -> np.ndarray:
    j = reps.shape[0]
    dev = reps - reps.mean(axis=0, keepdims=True)
    return np.sqrt((j - 1) / j * np.sum(np.abs(dev) ** 2, axis=0))


def estimate(
    sampler: EnsembleSampler,
    n: int,
    fn: Callable[[Batch], np.ndarray],
    width: int,
    workers: int = 1,
    dtype=complex,
) -> WeightedAccumulator:
    """Accumulate ``fn(batch)`` (shape (len(batch), width)) over ``n`` samples."""
    if n < 2:
        raise ValueError("need at least 2 samples")

    def job(batch: Batch):
        acc = WeightedAccumulator(n, width, dtype=dtype)
        acc.add(batch.start, fn(batch), batch.weights)
        return acc

    acc = WeightedAccumulator(n, width, dtype=dtype)
    for part in map_batches(sampler, n, job, workers=workers):
        acc.merge(part)
    return acc


def _kind(sampler: EnsembleSampler) -> str:
    return "weighted" if sampler.weighted else "unweighted"


# ---------------------------------------------------------------- estimators


def mc_moment_element(
    sampler: EnsembleSampler, bras: Sequence, kets: Sequence, n: int, workers: int = 1
) -> MomentEstimate:
    """Mean of prod_r <bra_r|psi><psi|ket_r> over the ensemble."""
    if n < 100:
        raise ValueError("need N >= 100")
    bv = np.array([np.asarray(_as_array(b)).reshape(-1) for b in bras])
    kv = np.array([np.asarray(_as_array(x)).reshape(-1) for x in kets])

    def fn(batch: Batch):
        s = batch.states
        # <bra|psi> and <psi|ket> for every copy
        left = s @ bv.conj().T
        right = s.conj() @ kv.T
        return np.prod(left * right, axis=1)[:, None]

    acc = estimate(sampler, n, fn, 1, workers)
    mean, sig, _ = acc.result()
    ess = acc.ess
    val = complex(mean[0])
    return MomentEstimate(val, float(sig[0]), n, _kind(sampler), ess, ess < MIN_ESS)


def full_moment_matrices(
    rho, sampler: EnsembleSampler, k: int, n: int, prefactor: bool = True, workers: int = 1
) -> tuple[np.ndarray, np.ndarray]:
    m = _as_array(rho)
    d = m.shape[0]
    big = d**k
    if big > MAX_FULL_DIM:
        raise ValueError(f"d^k = {big} exceeds {MAX_FULL_DIM}")

    def job(batch: Batch):
        s = batch.states
        t = s
        for _ in range(k - 1):
            t = (t[:, :, None] * s[:, None, :]).reshape(len(s), -1)
        wt = t * batch.weights[:, None]
        return wt.T @ t.conj(), float(batch.weights.sum())

    parts = map_batches(sampler, n, job, workers=workers)
    num = sum(p[0] for p in parts)
    den = sum(p[1] for p in parts)
    return hermitianize(num / den), approx_moment_matrix(m, k, prefactor)


def trace_norm_distance(m1, m2) -> float:
    diff = np.asarray(m1) - np.asarray(m2)
    return float(np.sum(np.linalg.svd(diff, compute_uv=False)))


def relative_error_psd(a, b, tol: float = 1e-9) -> float:
    """Smallest eps with (1 - eps) A <= B <= (1 + eps) A; inf if supp B is not inside supp A."""
    a = hermitianize(np.asarray(a, dtype=complex))
    b = hermitianize(np.asarray(b, dtype=complex))
    if a.shape != b.shape:
        raise ValueError("shape mismatch")
    wa, va = np.linalg.eigh(a)
    wb = np.linalg.eigvalsh(b)
    scale_a = max(abs(wa).max(), 1e-300)
    scale_b = max(abs(wb).max(), 1e-300)
    if wa[0] < -tol * scale_a or wb[0] < -tol * scale_b:
        raise ValueError("inputs must be positive semidefinite")
    keep = wa > tol * scale_a
    vs, vn = va[:, keep], va[:, ~keep]
    if vn.shape[1]:
        outside = vn.conj().T @ b @ vn
        if np.max(np.abs(outside)) > tol * scale_b:
            return math.inf
    if not keep.any():
        return 0.0 if scale_b <= tol else math.inf
    isq = 1.0 / np.sqrt(wa[keep])
    red = (vs.conj().T @ b @ vs) * isq[:, None] * isq[None, :]
    lam = np.linalg.eigvalsh(hermitianize(red))
    return float(np.max(np.abs(lam - 1.0)))


# ---------------------------------------------------------------- probes


@dataclass
class ProbeSet:
    """Probe vectors v, each used as the symmetric product v^{(x)k}.

    ``indices`` selects computational basis states directly; ``vectors``
    holds arbitrary unit vectors (rows).
    """

    indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    vectors: np.ndarray | None = None
    label: str = ""

    def __len__(self) -> int:
        nv = 0 if self.vectors is None else self.vectors.shape[0]
        return len(self.indices) + nv


def default_probes(d: int, seed: int = 0, n_strings: int = 256, n_product: int = 64) -> ProbeSet:
    n = int(round(math.log2(d))) if d > 1 else 0
    if d <= 256 or 2**n != d:
        return ProbeSet(np.arange(d), None, f"all {d} computational strings")
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(d, size=n_strings, replace=False))
    vecs = []
    for _ in range(n_product):
        q = rng.standard_normal((n, 2)) + 1j * rng.standard_normal((n, 2))
        q /= np.linalg.norm(q, axis=1, keepdims=True)
        vecs.append(kron(*q))
    return ProbeSet(idx, np.array(vecs), f"{n_strings} random strings + {n_product} product probes")


def relative_error_probes(
    rho: DensityMatrix,
    sampler: EnsembleSampler,
    k: int,
    probes: ProbeSet,
    n: int,
    prefactor: bool = True,
    n_sigma: float = 4.0,
    workers: int = 1,
) -> ErrorReport:
    """Relative deviation of MC moments from k! <v|rho|v>^k on symmetric product probes."""
    m = rho.entries
    d = rho.dim
    pre = haar_prefactor(d, k) if prefactor else 1.0
    idx = np.asarray(probes.indices, dtype=int)
    vecs = probes.vectors
    p_idx = np.real(np.diag(m))[idx]
    p_vec = np.real(np.einsum("pi,ij,pj->p", vecs.conj(), m, vecs)) if vecs is not None else np.zeros(0)
    target = pre * math.factorial(k) * np.concatenate([p_idx, p_vec]) ** k
    floor = 1e-12 * max(target.max(), 1e-300)
    valid = target > floor
    width = len(target)

    def fn(batch: Batch):
        s = batch.states
        parts = [np.abs(s[:, idx]) ** 2]
        if vecs is not None:
            parts.append(np.abs(s @ vecs.conj().T) ** 2)
        return np.concatenate(parts, axis=1) ** k

    acc = estimate(sampler, n, fn, width, workers, dtype=float)
    mean, sig, _ = acc.result()
    ratio = mean[valid] / target[valid]
    rsig = sig[valid] / target[valid]
    dev = ratio - 1.0
    if dev.size == 0:
        raise ValueError("no probe has nonzero overlap with rho")
    j = int(np.argmax(np.abs(dev)))
    excess = np.clip(np.abs(dev) - n_sigma * rsig, 0, None)
    labels = [f"x={i}" for i in idx] + [f"v{i}" for i in range(len(p_vec))]
    labels = [lab for lab, ok in zip(labels, valid) if ok]
    details = [
        {"probe": lab, "mc": float(a), "appr": float(b), "dev": float(e), "sigma": float(s)}
        for lab, a, b, e, s in zip(labels, mean[valid], target[valid], dev, rsig)
    ]
    ess = acc.ess
    return ErrorReport(
        epsilon_measured=float(abs(dev[j])),
        epsilon_sigma=float(rsig[j]),
        epsilon_bound=relerr_scale(rho, k),
        epsilon_excess=float(excess.max()),
        consistent_with_zero=bool(np.all(np.abs(dev) <= n_sigma * rsig)),
        probes=probes.label or f"{width} probes",
        n_probes=int(valid.sum()),
        n_samples=n,
        ess=ess,
        low_quality=ess < MIN_ESS,
        details=details,
    )


def _marginal_probs(states: np.ndarray, part: Partition, keep: Sequence[str]) -> np.ndarray:
    """|psi|^2 marginalized onto the kept regions, for each row."""
    probs = np.abs(states) ** 2
    n = len(part.factor_dims)
    t = probs.reshape((len(states),) + part.factor_dims)
    kept = part.sites(keep)
    drop = tuple(1 + s for s in range(n) if s not in kept)
    out = t.sum(axis=drop) if drop else t
    return out.reshape(len(states), -1)


def subsystem_moment_error(
    rho: DensityMatrix,
    sampler: EnsembleSampler,
    k: int,
    part: Partition,
    kept: Sequence[str | Sequence[str]],
    n: int,
    workers: int = 1,
    max_probes: int = 1 << 16,
) -> ErrorReport:
    """Relative deviation of E prod_r p_{A_r}(x_r) from prod_r p^rho_{A_r}(x_r).

    ``kept[r]`` names the region(s) A_r for copy r; everything else is traced
    out. Probes are all tuples of computational strings (x_1, ..., x_k).
    """
    from .entropies import post_measurement_min_entropy

    if len(kept) != k:
        raise ValueError(f"need {k} kept-region specs")
    part.check(rho.dim)
    targets = [np.real(np.diag(partial_trace(rho, part, a))) for a in kept]
    dims = [len(t) for t in targets]
    width = math.prod(dims)
    if width > max_probes:
        raise ValueError(f"{width} product probes exceed the limit {max_probes}")

    def fn(batch: Batch):
        margs = [_marginal_probs(batch.states, part, a) for a in kept]
        out = margs[0]
        for mg in margs[1:]:
            out = (out[:, :, None] * mg[:, None, :]).reshape(len(mg), -1)
        return out

    if k == 2:
        acc = _second_moment_accumulate(sampler, n, part, kept, workers)
    else:
        acc = estimate(sampler, n, fn, width, workers, dtype=float)
    mean, sig, _ = acc.result()
    target = targets[0]
    for t in targets[1:]:
        target = np.outer(target, t).reshape(-1)
    valid = target > 1e-12 * target.max()
    dev = mean[valid] / target[valid] - 1
    rsig = sig[valid] / target[valid]
    j = int(np.argmax(np.abs(dev)))

    labels = part.labels
    s_star = []
    for a in kept:
        a_set = {a} if isinstance(a, str) else set(a)
        b_set = [lab for lab in labels if lab not in a_set]
        if not b_set:
            s_star.append(math.inf)
            continue
        res = post_measurement_min_entropy(rho, part, a_regions=sorted(a_set), b_regions=b_set)
        s_star.append(res.value)
    smin = min(s_star)
    bound = k * k * 2.0 ** (-smin) if math.isfinite(smin) else 0.0
    ess = acc.ess
    return ErrorReport(
        epsilon_measured=float(abs(dev[j])),
        epsilon_sigma=float(rsig[j]),
        epsilon_bound=bound,
        epsilon_excess=float(np.clip(np.abs(dev) - 4 * rsig, 0, None).max()),
        consistent_with_zero=bool(np.all(np.abs(dev) <= 4 * rsig)),
        probes=f"{int(valid.sum())} product probes",
        n_probes=int(valid.sum()),
        n_samples=n,
        ess=ess,
        low_quality=ess < MIN_ESS,
        constant=1.0,
    )


def _second_moment_accumulate(sampler, n, part, kept, workers) -> WeightedAccumulator:
    """k = 2 fast path: per jackknife block, accumulate P1^T diag(w) P2 by matrix product."""

    def job(batch: Batch):
        p1 = _marginal_probs(batch.states, part, kept[0])
        p2 = _marginal_probs(batch.states, part, kept[1])
        acc = WeightedAccumulator(n, p1.shape[1] * p2.shape[1], dtype=float)
        for j, a, b in acc.segments(batch.start, len(batch)):
            w = batch.weights[a:b]
            m = (p1[a:b] * w[:, None]).T @ p2[a:b]
            acc.add_block_sums(j, m.reshape(-1), float(w.sum()), float((w * w).sum()), b - a)
        return acc

    out = None
    for part_acc in map_batches(sampler, n, job, workers=workers):
        if out is None:
            out = part_acc
        else:
            out.merge(part_acc)
    return out
