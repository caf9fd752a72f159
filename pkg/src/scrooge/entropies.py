"""Entropies that control Scrooge moment errors, and the subentropy."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import mpmath
import numpy as np
from scipy import integrate, optimize, special

from .ensembles import Batch, EnsembleSampler
from .hilbert import DensityMatrix, Partition, eigs, hermitianize, partial_trace, partial_transpose, pinv_sqrt, reorder

EULER_GAMMA = float(np.euler_gamma)
Q_MAX = (1.0 - EULER_GAMMA) / math.log(2.0)


def _spectrum(rho) -> np.ndarray:
    if isinstance(rho, DensityMatrix):
        return rho.spectrum
    return np.clip(np.linalg.eigvalsh(hermitianize(np.asarray(rho))), 0.0, None)


def min_entropy(rho) -> float:
    return max(0.0, -math.log2(float(_spectrum(rho)[-1])))


def renyi_entropy(rho, alpha: float) -> float:
    """Renyi entropy in bits; alpha = 1 gives von Neumann, alpha = inf the min-entropy."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    lam = _spectrum(rho)
    lam = lam[lam > 1e-15]
    if math.isinf(alpha):
        return min_entropy(rho)
    if abs(alpha - 1.0) < 1e-12:
        return max(0.0, float(-np.sum(lam * np.log2(lam))))
    return max(0.0, float(math.log2(np.sum(lam**alpha)) / (1.0 - alpha)))


# ---------------------------------------------------------------- conditional quantities


def _ab_tensor(rho, part: Partition, a_regions, b_regions):
    a_regions = [a_regions] if isinstance(a_regions, str) else list(a_regions)
    b_regions = [b_regions] if isinstance(b_regions, str) else list(b_regions)
    if set(a_regions) & set(b_regions):
        raise ValueError("A and B regions overlap")
    if set(a_regions) | set(b_regions) != set(part.labels):
        raise ValueError(f"regions {a_regions} + {b_regions} must cover {part.labels}")
    m = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho)
    mat, p2 = reorder(m, part, a_regions + b_regions)
    da = part.region_dim(a_regions)
    db = part.region_dim(b_regions)
    return mat, p2, da, db, a_regions, b_regions


def conditional_hat_entropy(rho, part: Partition, a_regions="A", b_regions="B") -> float:
    """-log2 of the spectral norm of rho_A^{-1/2} (rho^{T_B}) rho_A^{-1/2} (support inverse)."""
    mat, p2, da, db, a_r, b_r = _ab_tensor(rho, part, a_regions, b_regions)
    rho_a = partial_trace(mat, p2, a_r)
    w = np.kron(pinv_sqrt(rho_a), np.eye(db))
    x = w @ partial_transpose(mat, p2, b_r) @ w
    val = -math.log2(float(np.max(np.abs(np.linalg.eigvalsh(hermitianize(x))))))
    if val < -1e-9:
        raise ArithmeticError(f"conditional entropy came out negative ({val:.3e})")
    return max(val, 0.0)


@dataclass
class PostMeasurementResult:
    value: float
    max_norm: float
    best_y: list = field(default_factory=list)
    restarts: int = 0
    iterations: int = 0
    converged: bool = True
    method: str = "alternating"

    def to_dict(self) -> dict:
        return asdict(self)


def _is_product(mat: np.ndarray, da: int, db: int, tol: float = 1e-10) -> tuple[bool, np.ndarray]:
    t = mat.reshape(da, db, da, db)
    ra = np.einsum("ibjb->ij", t)
    rb = np.einsum("aiaj->ij", t)
    return bool(np.max(np.abs(mat - np.kron(ra, rb))) < tol), rb


def post_measurement_min_entropy(
    rho,
    part: Partition,
    a_regions="A",
    b_regions="B",
    restarts: int = 64,
    iters: int = 2000,
    tol: float = 1e-14,
    seed: int = 0,
) -> PostMeasurementResult:
    """Minimum over outcomes y in supp(rho_A) of the min-entropy of the conditional state on B.

    Maximizes ||rho^B_y|| = max_v <y v|rho|y v> / <y|rho_A|y> by alternating
    exact maximization over v (top eigenvector of the conditional state) and y
    (top generalized eigenvector against rho_A). Each half-step cannot
    decrease the objective. Runs ``restarts`` random starts and keeps the best.
    """
    mat, _, da, db, _, _ = _ab_tensor(rho, part, a_regions, b_regions)
    prod, rb = _is_product(mat, da, db)
    if prod:
        top = float(np.linalg.eigvalsh(hermitianize(rb))[-1])
        return PostMeasurementResult(max(0.0, -math.log2(top)), top, [], 0, 0, True, "product")
    if da > 64:
        raise ValueError(f"dim A = {da} exceeds 64 for optimization mode")
    t = mat.reshape(da, db, da, db)
    rho_a = np.einsum("ibjb->ij", t)
    w, u = eigs(rho_a)
    keep = w > 1e-10 * w[-1]
    wmat = u[:, keep] / np.sqrt(w[keep])[None, :]  # y = W x gives <y|rho_A|y> = |x|^2
    r = wmat.shape[1]
    # reduced tensor on (x, b, x', b')
    red = np.einsum("ai,abcd,cj->ibjd", wmat.conj(), t, wmat)
    rng = np.random.default_rng(seed)

    def cond_state(x):
        return hermitianize(np.einsum("i,ibjd,j->bd", x.conj(), red, x))

    best = (-1.0, None, 0, False)
    total_iters = 0
    starts = rng.standard_normal((restarts, r, 2))
    for s in range(restarts):
        x = starts[s, :, 0] + 1j * starts[s, :, 1]
        x /= np.linalg.norm(x)
        f_old = -1.0
        converged = False
        for it in range(iters):
            ev, vv = np.linalg.eigh(cond_state(x))
            v = vv[:, -1]
            kmat = hermitianize(np.einsum("b,ibjd,d->ij", v.conj(), red, v))
            ek, xk = np.linalg.eigh(kmat)
            x = xk[:, -1]
            f = float(ek[-1])
            total_iters += 1
            if abs(f - f_old) <= tol * max(f, 1e-300):
                converged = True
                break
            f_old = f
        f = float(np.linalg.eigvalsh(cond_state(x))[-1])
        if f > best[0]:
            best = (f, x, it + 1, converged)
    f, x, _, conv = best
    y = wmat @ x
    y = y / np.linalg.norm(y)
    return PostMeasurementResult(
        max(0.0, -math.log2(f)), f, [[float(c.real), float(c.imag)] for c in y], restarts, total_iters, conv
    )


def post_measurement_norm(rho, part: Partition, y: np.ndarray, a_regions="A", b_regions="B") -> float:
    """||rho^B_y||_inf for a given (not necessarily normalized) outcome vector y."""
    mat, _, da, db, _, _ = _ab_tensor(rho, part, a_regions, b_regions)
    t = mat.reshape(da, db, da, db)
    y = np.asarray(y, dtype=complex)
    num = hermitianize(np.einsum("a,abcd,c->bd", y.conj(), t, y))
    den = float(np.real(np.einsum("a,abcb,c->", y.conj(), t, y)))
    return float(np.linalg.eigvalsh(num)[-1]) / den


def post_measurement_min_entropy_grid(
    rho, part: Partition, a_regions="A", b_regions="B", resolution_deg: float = 1.0, polish: bool = True
) -> float:
    """Brute-force S* for a qubit A: Bloch-sphere grid, then Nelder-Mead from the best cells."""
    mat, _, da, db, _, _ = _ab_tensor(rho, part, a_regions, b_regions)
    if da != 2:
        raise ValueError("grid search needs dim A = 2")
    t = mat.reshape(2, db, 2, db)
    rho_a = np.einsum("ibjb->ij", t)
    if np.linalg.eigvalsh(hermitianize(rho_a))[0] < 1e-12:
        raise ValueError("grid search assumes rho_A of full rank")
    th = np.deg2rad(np.arange(0.0, 180.0 + 1e-9, resolution_deg))
    ph = np.deg2rad(np.arange(0.0, 360.0, resolution_deg))
    tt, pp = np.meshgrid(th, ph, indexing="ij")
    ys = np.stack([np.cos(tt / 2), np.exp(1j * pp) * np.sin(tt / 2)], axis=-1).reshape(-1, 2)

    def values(y):
        num = np.einsum("na,abcd,nc->nbd", y.conj(), t, y)
        num = (num + np.conj(np.swapaxes(num, 1, 2))) / 2
        den = np.real(np.einsum("na,ac,nc->n", y.conj(), rho_a, y))
        return np.linalg.eigvalsh(num)[:, -1] / den

    vals = values(ys)
    best = float(vals.max())
    if polish:
        order = np.argsort(vals)[::-1][:8]
        for i in order:
            t0 = tt.reshape(-1)[i]
            p0 = pp.reshape(-1)[i]

            def neg(p):
                y = np.array([[math.cos(p[0] / 2), np.exp(1j * p[1]) * math.sin(p[0] / 2)]])
                return -float(values(y)[0])

            res = optimize.minimize(
                neg, [t0, p0], method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-15, "maxiter": 4000}
            )
            best = max(best, -float(res.fun))
    return max(0.0, -math.log2(best))


# ---------------------------------------------------------------- subentropy


def _subentropy_sum(lam: Sequence[float]) -> float:
    """-sum_k prod_{l != k} lam_k / (lam_k - lam_l) * lam_k log2 lam_k in adaptive precision."""
    lam = [float(x) for x in lam]
    d = len(lam)
    # magnitude of the largest term fixes how many digits cancel
    worst = 0.0
    for k in range(d):
        lg = (d - 1) * math.log10(lam[k]) + math.log10(abs(lam[k] * math.log(lam[k])) + 1e-300)
        lg -= sum(math.log10(abs(lam[k] - lam[l])) for l in range(d) if l != k)
        worst = max(worst, lg)
    dps = 30 + int(math.ceil(worst))
    with mpmath.workdps(dps):
        mls = [mpmath.mpf(x) for x in lam]
        tot = mpmath.mpf(0)
        for k in range(d):
            c = mpmath.mpf(1)
            for l in range(d):
                if l != k:
                    c *= mls[k] / (mls[k] - mls[l])
            tot += c * mls[k] * mpmath.log(mls[k])
        return float(-tot / mpmath.log(2))


def subentropy(rho, jitter: float = 1e-7, draws: int = 3, seed: int = 0, gap_tol: float = 1e-6) -> float:
    """Subentropy in bits, Q = -sum_k prod_{l != k} lam_k/(lam_k - lam_l) lam_k log2 lam_k.

    Zero eigenvalues drop out exactly. Near-degenerate eigenvalues (relative
    gap below ``gap_tol``) are split by a relative jitter and the result is
    averaged over ``draws`` jitter realizations.
    """
    lam = np.sort(_spectrum(rho))[::-1]
    lam = lam[lam > 1e-14]
    if lam.size <= 1:
        return 0.0
    lam = lam / lam.sum()
    gaps = np.abs(np.diff(lam)) / lam[1:]
    if np.all(gaps > gap_tol):
        vals = [_subentropy_sum(lam)]
    else:
        rng = np.random.default_rng(seed)
        vals = []
        for _ in range(draws):
            lj = lam * (1.0 + jitter * rng.uniform(-1.0, 1.0, size=lam.size))
            vals.append(_subentropy_sum(lj / lj.sum()))
    q = float(np.mean(vals))
    if not -1e-6 <= q <= Q_MAX + 1e-6:
        raise ArithmeticError(f"subentropy {q} outside [0, {Q_MAX}]")
    return min(max(q, 0.0), Q_MAX)


def subentropy_flat(m: int) -> float:
    """Closed-form subentropy of I_m/m in bits: (1 - H_m + ln m) / ln 2, H_m harmonic."""
    if m < 1:
        raise ValueError("m must be >= 1")
    # harmonic number H_m = digamma(m + 1) + gamma
    h = float(special.digamma(m + 1)) + EULER_GAMMA
    return (1.0 - h + math.log(m)) / math.log(2.0)


def subentropy_integral(rho) -> float:
    """Subentropy from a one-dimensional integral over the Laplace transform of r_z.

    Uses ln x = int_0^inf (e^{-s} - e^{-s x}) ds / s with the moment generating
    function prod_i (1 + s lam_i)^{-1} of r_z = <z|rho|z>; no eigenvalue gaps appear.
    """
    lam = _spectrum(rho)
    lam = lam[lam > 1e-15]

    def integrand(s):
        if s == 0.0:
            return float(np.sum(lam**2))
        mgf = np.prod(1.0 / (1.0 + s * lam))
        return (math.exp(-s) - mgf * np.sum(lam / (1.0 + s * lam))) / s

    a, _ = integrate.quad(integrand, 0.0, 1.0, limit=400, epsabs=1e-14, epsrel=1e-12)
    b, _ = integrate.quad(integrand, 1.0, np.inf, limit=400, epsabs=1e-14, epsrel=1e-12)
    e_xlnx = a + b
    return ((1.0 - EULER_GAMMA) - e_xlnx) / math.log(2.0)


def gaussian_identity_target(rho) -> float:
    """Predicted E_z[r_z log2 r_z] = (1 - gamma)/ln 2 - Q(rho)."""
    return Q_MAX - subentropy(rho)


def subentropy_gaussian_check(rho: DensityMatrix, n: int, seed: int = 0, workers: int = 1):
    """Monte Carlo E_z[r_z log2 r_z] with r_z = <z|rho|z> for standard complex Gaussian z."""
    from .moments import MomentEstimate, estimate

    if n < 10_000:
        raise ValueError("need N >= 10^4")
    m = rho.entries
    sampler = EnsembleSampler.gaussian(rho.dim, seed)

    def fn(batch: Batch):
        z = batch.states
        r = np.real(np.einsum("ni,ij,nj->n", z.conj(), m, z))
        r = np.clip(r, 1e-300, None)
        return (r * np.log2(r))[:, None]

    acc = estimate(sampler, n, fn, 1, workers, dtype=float)
    mean, sig, _ = acc.result()
    return MomentEstimate(float(mean[0]), float(sig[0]), n, "unweighted", acc.ess, False)


# ---------------------------------------------------------------- report


@dataclass
class EntropyReport:
    S_inf: float
    S_alpha: dict
    Q_subentropy: float
    S_hat: dict = field(default_factory=dict)
    S_star: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def entropy_report(
    rho: DensityMatrix, part: Partition | None = None, alphas=(0.5, 1.0, 2.0, 3.0), restarts: int = 64
) -> EntropyReport:
    rep = EntropyReport(
        S_inf=min_entropy(rho),
        S_alpha={str(a): renyi_entropy(rho, a) for a in alphas},
        Q_subentropy=subentropy(rho),
    )
    if part is not None:
        labels = part.labels
        for b in labels:
            a = [x for x in labels if x != b]
            if not a:
                continue
            key = f"{b}|{''.join(a)}"
            rep.S_hat[key] = conditional_hat_entropy(rho, part, a, [b])
            res = post_measurement_min_entropy(rho, part, a, [b], restarts=restarts)
            rep.S_star[b] = res.to_dict()
    return rep
