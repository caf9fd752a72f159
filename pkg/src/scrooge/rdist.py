"""Law of the Haar weight r = d <phi|rho|phi>.

The density of r is a spline with knots mu_i = d lambda_i: it equals
(d - 1) times the divided difference over the knots of t -> (t - r)_+^{d-2}.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import special, stats

from .ensembles import EnsembleSampler
from .hilbert import DensityMatrix

KS_ALPHA = 0.05


class ConfluenceError(ValueError):
    """A confluent knot cluster needs a derivative that was not supplied."""


# ---------------------------------------------------------------- divided differences


@dataclass
class DividedDifferenceTable:
    knots: np.ndarray
    clusters: list[tuple[float, int]]
    table: list
    condition: float

    @property
    def value(self):
        return self.table[0][-1]


def _clusters(x: np.ndarray, tol: float) -> tuple[np.ndarray, list[tuple[float, int]]]:
    """Snap sorted knots that agree within tol * scale onto their cluster mean."""
    scale = max(float(np.max(np.abs(x))), 1.0)
    groups: list[list[float]] = [[x[0]]]
    for v in x[1:]:
        if v - groups[-1][0] < tol * scale:
            groups[-1].append(v)
        else:
            groups.append([v])
    snapped = np.concatenate([[np.mean(g)] * len(g) for g in groups])
    return snapped, [(float(np.mean(g)), len(g)) for g in groups]


def divided_difference_table(
    f: Callable,
    knots: Sequence[float],
    derivative: Callable | None = None,
    tol: float = 1e-9,
) -> DividedDifferenceTable:
    """Newton divided-difference table with the confluent rule f^{(j)}(x) / j!.

    ``f(t)`` and ``derivative(t, j)`` may return arrays (e.g. one value per
    grid point); the table is then evaluated elementwise. Knots are sorted
    first, so coinciding knots are adjacent. More than 8 knots are handled
    in extended precision.
    """
    x = np.sort(np.asarray(knots, dtype=float))
    if x.size == 0:
        raise ValueError("need at least one knot")
    if not np.all(np.isfinite(x)):
        raise ValueError("knots must be finite")
    x, clusters = _clusters(x, tol)
    n = x.size
    dt = np.longdouble if n > 8 else np.float64
    xs = x.astype(dt)
    for c, mult in clusters:
        if mult > 1 and derivative is None:
            raise ConfluenceError(f"cluster at {c:.6g} with multiplicity {mult} needs derivatives up to order {mult - 1}")
    col = [np.asarray(f(float(v)), dtype=dt) for v in x]
    table = [col]
    mags = [np.abs(c) for c in col]
    for j in range(1, n):
        prev = table[-1]
        new, newmag = [], []
        for i in range(n - j):
            if x[i + j] == x[i]:
                try:
                    val = np.asarray(derivative(float(x[i]), j), dtype=dt) / math.factorial(j)
                except (NotImplementedError, ValueError) as exc:
                    raise ConfluenceError(
                        f"derivative of order {j} unavailable at cluster {x[i]:.6g}: {exc}"
                    ) from exc
                new.append(val)
                newmag.append(np.abs(val))
            else:
                h = xs[i + j] - xs[i]
                new.append((prev[i + 1] - prev[i]) / h)
                newmag.append((mags[i + 1] + mags[i]) / h)
        table.append(new)
        mags = newmag
    res = table[-1][0]
    # growth of magnitudes through the table relative to the result scale; an
    # exactly zero result comes from equal function values and loses nothing
    top = float(np.max(np.abs(res)))
    cond = float(np.max(mags[0]) / top) if top > 0 else 0.0
    if cond * float(np.finfo(dt).eps) > 1e-4:
        warnings.warn(f"divided difference is ill-conditioned (estimate {cond:.2e})", RuntimeWarning, stacklevel=2)
    # transpose into rows: table[i][j] = f[x_i .. x_{i+j}]
    rows = [[table[j][i] for j in range(n - i)] for i in range(n)]
    return DividedDifferenceTable(x, clusters, rows, cond)


def divided_difference(f: Callable, knots: Sequence[float], derivative: Callable | None = None, tol: float = 1e-9):
    val = divided_difference_table(f, knots, derivative, tol).value
    return float(val) if np.ndim(val) == 0 else np.asarray(val, dtype=float)


def exp_function(s: float):
    """(f, derivative) pair for f(t) = exp(s t)."""
    return (lambda t: math.exp(s * t)), (lambda t, j: s**j * math.exp(s * t))


# ---------------------------------------------------------------- sampling


def knots(rho: DensityMatrix) -> np.ndarray:
    return rho.dim * np.clip(rho.spectrum, 0.0, None)


def sample_r(rho: DensityMatrix, n: int, seed: int = 0) -> np.ndarray:
    """n draws of d <phi|rho|phi> for Haar phi."""
    if n < 1:
        raise ValueError("need N >= 1")
    m = rho.entries
    d = rho.dim
    sampler = EnsembleSampler.haar(d, seed)
    out = np.empty(n)
    for batch in sampler.batches(n):
        s = batch.states
        out[batch.start : batch.start + len(batch)] = d * np.real(np.einsum("ni,ij,nj->n", s.conj(), m, s))
    return out


def moment_identity_check(rho: DensityMatrix, s: float, n: int, seed: int = 0, n_sigma: float = 4.0) -> dict:
    """Compare E[f^{(d-1)}(r)] with (d-1)! f[mu_1..mu_d] for f = exp(s t)."""
    d = rho.dim
    if d > 10:
        raise ValueError("identity check limited to d <= 10")
    f, df = exp_function(s)
    exact = math.factorial(d - 1) * divided_difference(f, knots(rho), df)
    r = sample_r(rho, n, seed)
    vals = s ** (d - 1) * np.exp(s * r)
    mc = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(n))
    # a constant r (rho = I/d) has zero spread; compare to rounding only
    ok = abs(mc - exact) <= n_sigma * se + 1e-12 * max(abs(exact), 1.0)
    return {"s": s, "d": d, "mc": mc, "stderr": se, "exact": exact, "pass": bool(ok)}


# ---------------------------------------------------------------- Beta reference


@dataclass(frozen=True)
class BetaReference:
    """Law of u = (m/d) r for a flat spectrum of rank m: Beta(m, d - m)."""

    m: int
    d: int

    def __post_init__(self):
        if not 1 <= self.m < self.d:
            raise ValueError("need 1 <= m < d")

    @property
    def dist(self):
        return stats.beta(self.m, self.d - self.m)

    def pdf(self, u):
        return self.dist.pdf(u)

    def cdf(self, u):
        return self.dist.cdf(u)

    def ks_test(self, u_samples: np.ndarray) -> dict:
        res = stats.kstest(np.asarray(u_samples), self.dist.cdf)
        n = len(u_samples)
        crit = float(stats.kstwobign.ppf(1 - KS_ALPHA)) / math.sqrt(n)
        return {"statistic": float(res.statistic), "critical": crit, "pvalue": float(res.pvalue), "n": n}


def beta_reference(m: int, d: int) -> BetaReference:
    return BetaReference(m, d)


def flat_raw_moment(m: int, d: int, s: float) -> float:
    """Exact E[r^s] when r = (d/m) u with u ~ Beta(m, d - m); requires m + s > 0."""
    if m + s <= 0:
        return math.inf
    lg = special.gammaln(m + s) - special.gammaln(m) + special.gammaln(d) - special.gammaln(d + s)
    return float((d / m) ** s * math.exp(lg))


def flat_central_moment(m: int, d: int, t: float) -> float:
    """Exact E|r - 1|^t for the flat spectrum, by quadrature against the Beta density."""
    from scipy import integrate

    ref = stats.beta(m, d - m)
    c = m / d
    g = lambda u: abs(u / c - 1.0) ** t * ref.pdf(u)
    a, _ = integrate.quad(g, 0.0, c, limit=200)
    b, _ = integrate.quad(g, c, 1.0, limit=200)
    return a + b


# ---------------------------------------------------------------- concentration bounds


def raw_moment_bound(s: float, m: int) -> float:
    return math.exp(s * (s + 1) / (2 * m))


def reciprocal_moment_bound(q: float, m: int) -> float:
    return math.exp(q * q / (2 * (m - q)))


def central_moment_bound(t: float, m: int) -> float:
    return 4 * math.gamma(t + 1) / (m / 4) ** (t / 2)


def moment_bounds_check(
    rho: DensityMatrix,
    n: int,
    seed: int = 0,
    n_sigma: float = 3.0,
    raw_orders: Sequence[int] = (1, 2, 3),
    reciprocal_orders: Sequence[int] = (1, 2),
    central_orders: Sequence[float] = (1, 2, 4),
) -> list[dict]:
    """Empirical r-moments against the concentration bounds, one row per bound.

    A row passes when empirical - n_sigma * stderr <= bound. If rho has a
    flat spectrum the exact Beta value is reported alongside.
    """
    m = math.floor(1.0 / rho.max_eig + 1e-9)
    if m < 8:
        raise ValueError(f"m = floor(1/max eig) = {m} < 8")
    d = rho.dim
    lam = rho.spectrum[::-1]
    flat = np.allclose(lam[:m], 1.0 / m, atol=1e-12) and np.allclose(lam[m:], 0.0, atol=1e-12)
    r = sample_r(rho, n, seed)
    rows = []

    def row(kind, order, vals, bound, exact):
        mean = float(vals.mean())
        se = float(vals.std(ddof=1) / math.sqrt(n))
        rows.append(
            {
                "kind": kind,
                "order": order,
                "empirical": mean,
                "stderr": se,
                "bound": bound,
                "exact": exact,
                "pass": bool(mean - n_sigma * se <= bound),
            }
        )

    for s in raw_orders:
        row("raw", s, r**s, raw_moment_bound(s, m), flat_raw_moment(m, d, s) if flat else None)
    for q in reciprocal_orders:
        if q >= m / 2:
            continue
        row("reciprocal", q, r ** (-float(q)), reciprocal_moment_bound(q, m), flat_raw_moment(m, d, -q) if flat else None)
    for t in central_orders:
        row("central", t, np.abs(r - 1.0) ** t, central_moment_bound(t, m), flat_central_moment(m, d, t) if flat else None)
    return rows


# ---------------------------------------------------------------- spline density


def _spline_raw(mu: np.ndarray, grid: np.ndarray) -> np.ndarray:
    d = mu.size
    deg = d - 2
    g = np.asarray(grid, dtype=float)

    def f(t):
        return np.where(t > g, (t - g) ** deg, 0.0) if deg > 0 else (t > g).astype(float)

    def df(t, j):
        if j > deg:
            raise NotImplementedError(f"truncated power of degree {deg} has no derivative of order {j}")
        c = math.comb(deg, j) * math.factorial(j)
        p = deg - j
        return c * (np.where(t > g, (t - g) ** p, 0.0) if p > 0 else (t > g).astype(float))

    return (d - 1) * divided_difference(f, mu, df)


def _spline_norm(mu: np.ndarray) -> float:
    """Integral of the raw spline; Gauss-Legendre is exact on each polynomial piece."""
    nodes, wts = np.polynomial.legendre.leggauss(mu.size)
    edges = np.unique(np.round(mu, 12))
    tot = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        x = (a + b) / 2 + (b - a) / 2 * nodes
        tot += (b - a) / 2 * float(np.dot(wts, _spline_raw(mu, x)))
    return tot


def spline_pdf(rho: DensityMatrix, r_grid: Sequence[float]) -> np.ndarray:
    """Density of r on ``r_grid``, normalized numerically over the knot span."""
    mu = np.sort(knots(rho))
    d = mu.size
    if d > 12:
        raise ValueError("spline density limited to d <= 12")
    if d < 2 or mu[-1] - mu[0] < 1e-9:
        raise ConfluenceError("all knots coincide: r is deterministic and has no density")
    return _spline_raw(mu, np.asarray(r_grid, dtype=float)) / _spline_norm(mu)


def spline_cdf(rho: DensityMatrix, fine: int = 40001) -> tuple[np.ndarray, np.ndarray]:
    mu = np.sort(knots(rho))
    xs = np.linspace(mu[0], mu[-1], fine)
    pdf = spline_pdf(rho, xs)
    cdf = np.concatenate([[0.0], np.cumsum((pdf[1:] + pdf[:-1]) / 2 * np.diff(xs))])
    return xs, cdf / cdf[-1]


def ks_against_spline(rho: DensityMatrix, samples: np.ndarray) -> float:
    xs, cdf = spline_cdf(rho)
    srt = np.sort(samples)
    n = srt.size
    f = np.interp(srt, xs, cdf)
    emp_hi = np.arange(1, n + 1) / n
    emp_lo = np.arange(0, n) / n
    return float(max(np.max(emp_hi - f), np.max(f - emp_lo)))


def pdf_table(rho: DensityMatrix, samples: np.ndarray, bins: int = 60) -> list[dict]:
    """Rows with columns r, pdf_spline, pdf_beta_if_flat, hist_density."""
    hist, edges = np.histogram(samples, bins=bins, density=True)
    mid = (edges[:-1] + edges[1:]) / 2
    d = rho.dim
    lam = rho.spectrum[::-1]
    m = int(np.sum(lam > 1e-12))
    flat = m < d and np.allclose(lam[:m], 1.0 / m, atol=1e-12)
    spline = spline_pdf(rho, mid) if d <= 12 else np.full(mid.size, np.nan)
    beta = BetaReference(m, d).pdf(mid * m / d) * m / d if flat else np.full(mid.size, np.nan)
    return [
        {"r": float(a), "pdf_spline": float(b), "pdf_beta_if_flat": float(c), "hist_density": float(h)}
        for a, b, c, h in zip(mid, spline, beta, hist)
    ]
