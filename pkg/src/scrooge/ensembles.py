"""Seeded samplers for pure-state ensembles, plus generators for rho and H.

Randomness is counter based. Samples are produced in fixed blocks of
``BLOCK`` rows; block ``b`` of a sampler draws from the stream
``SeedSequence(master_seed, spawn_key=(kind_tag, b))``. Sample ``i`` is row
``i % BLOCK`` of block ``i // BLOCK`` and so depends on nothing but
``(master_seed, i)``, however many samples are requested or however the
blocks are distributed over threads.
"""
from __future__ import annotations

import hashlib
import math
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .hilbert import DensityMatrix, PureState, eigs, hermitianize, kron, psd_sqrt, read_density_matrix

BLOCK = 256
NORM_FLOOR = 1e-14

KINDS = ("haar", "scrooge_distortion", "scrooge_purification", "temporal", "gaussian")
_KIND_TAG = {k: i + 1 for i, k in enumerate(KINDS)}


def block_rng(master_seed: int, tag: int, block: int, retry: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(master_seed) & (2**64 - 1), spawn_key=(tag, block, retry))
    return np.random.Generator(np.random.PCG64(ss))


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard complex normal entries: E|z|^2 = 1."""
    x = rng.standard_normal(tuple(shape) + (2,))
    return (x[..., 0] + 1j * x[..., 1]) * np.sqrt(0.5)


def haar_unitaries(rng: np.random.Generator, count: int, m: int) -> np.ndarray:
    g = complex_normal(rng, (count, m, m))
    q, r = np.linalg.qr(g)
    diag = np.diagonal(r, axis1=1, axis2=2)
    ph = diag / np.where(np.abs(diag) > 0, np.abs(diag), 1.0)
    return q * ph[:, None, :]


@dataclass
class Batch:
    """Contiguous run of samples ``start .. start + len(weights)``."""

    start: int
    states: np.ndarray
    weights: np.ndarray
    resampled: int = 0

    def __len__(self) -> int:
        return self.states.shape[0]


# ---------------------------------------------------------------- Hamiltonians


@dataclass(frozen=True)
class Hamiltonian:
    matrix: np.ndarray
    target_norm: float | None = None

    def __post_init__(self):
        h = np.array(self.matrix, dtype=complex)
        if np.max(np.abs(h - h.conj().T)) > 1e-10:
            raise ValueError("Hamiltonian must be Hermitian")
        h = hermitianize(h)
        h.setflags(write=False)
        object.__setattr__(self, "matrix", h)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def norm(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvalsh(self.matrix))))


def _normalized(h: np.ndarray, target_norm: float | None) -> Hamiltonian:
    if target_norm is None:
        return Hamiltonian(h)
    nrm = float(np.max(np.abs(np.linalg.eigvalsh(hermitianize(h)))))
    return Hamiltonian(h * (target_norm / nrm), target_norm)


_PAULI = [
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
]


def make_hamiltonian(kind: str, size: int, seed: int, target_norm: float | None = None) -> Hamiltonian:
    """``gue`` takes the dimension as ``size``; ``local_random`` takes the qubit count.

    ``local_random`` sums nearest-neighbour two-qubit terms on an open chain,
    each a Gaussian combination of the 16 Pauli products.
    """
    rng = np.random.default_rng(seed)
    if kind == "gue":
        if size < 2:
            raise ValueError("gue needs d >= 2")
        a = complex_normal(rng, (size, size))
        return _normalized((a + a.conj().T) / 2, target_norm)
    if kind == "local_random":
        n = size
        if n < 2:
            raise ValueError("local_random needs at least 2 qubits")
        d = 2**n
        h = np.zeros((d, d), dtype=complex)
        for i in range(n - 1):
            c = rng.standard_normal((4, 4))
            term = sum(c[a, b] * np.kron(_PAULI[a], _PAULI[b]) for a in range(4) for b in range(4))
            h += kron(np.eye(2**i), term, np.eye(2 ** (n - i - 2)))
        return _normalized(h, target_norm)
    raise ValueError(f"unknown Hamiltonian kind {kind!r}")


_EIG_CACHE: dict[str, tuple[np.ndarray, np.ndarray]] = {}
_EIG_LOCK = threading.Lock()


def hamiltonian_eigs(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition cached by a digest of the matrix bytes."""
    h = np.ascontiguousarray(h, dtype=complex)
    key = hashlib.sha256(h.tobytes()).hexdigest() + str(h.shape)
    hit = _EIG_CACHE.get(key)
    if hit is not None:
        return hit
    w, v = eigs(h)
    w.setflags(write=False)
    v.setflags(write=False)
    with _EIG_LOCK:
        return _EIG_CACHE.setdefault(key, (w, v))


# ---------------------------------------------------------------- sampler


@dataclass(frozen=True)
class EnsembleSampler:
    kind: str
    dim: int
    master_seed: int = 0
    rho: DensityMatrix | None = None
    hamiltonian: Hamiltonian | None = None
    psi0: np.ndarray | None = None
    T: float = 0.0
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown ensemble kind {self.kind!r}")
        if self.kind in ("scrooge_distortion", "scrooge_purification") and self.rho is None:
            raise ValueError(f"{self.kind} needs rho")
        if self.rho is not None and self.rho.dim != self.dim:
            raise ValueError("rho dimension does not match sampler dimension")
        if self.kind == "temporal":
            if self.hamiltonian is None or self.psi0 is None:
                raise ValueError("temporal sampler needs hamiltonian and psi0")
            if self.T < 0:
                raise ValueError("T must be nonnegative")
        d = self.dim
        if self.kind in ("scrooge_distortion", "gaussian") and self.rho is not None:
            self._cache["sqrt_rho"] = psd_sqrt(self.rho)
        if self.kind == "scrooge_purification":
            w, v = eigs(self.rho)
            keep = w > 1e-12 * w[-1]
            self._cache["schmidt"] = (np.sqrt(np.clip(w[keep], 0, None)), v[:, keep])
        if self.kind == "temporal":
            w, v = hamiltonian_eigs(self.hamiltonian.matrix)
            psi = np.asarray(self.psi0, dtype=complex).reshape(-1)
            if psi.shape[0] != d or abs(np.linalg.norm(psi) - 1) > 1e-10:
                raise ValueError("psi0 must be a unit vector of the sampler dimension")
            self._cache["temporal"] = (w, v, v.conj().T @ psi)

    # constructors ---------------------------------------------------------

    @classmethod
    def haar(cls, d: int, seed: int = 0) -> EnsembleSampler:
        return cls("haar", d, seed)

    @classmethod
    def scrooge(cls, rho: DensityMatrix, seed: int = 0, method: str = "distortion") -> EnsembleSampler:
        return cls(f"scrooge_{method}", rho.dim, seed, rho=rho)

    @classmethod
    def temporal(cls, h: Hamiltonian, psi0, T: float, seed: int = 0) -> EnsembleSampler:
        return cls("temporal", h.dim, seed, hamiltonian=h, psi0=np.asarray(psi0, dtype=complex), T=float(T))

    @classmethod
    def gaussian(cls, d: int, seed: int = 0, rho: DensityMatrix | None = None) -> EnsembleSampler:
        """Complex Gaussian vectors; with ``rho`` the vectors are sqrt(rho) z (unnormalized)."""
        return cls("gaussian", d, seed, rho=rho)

    @property
    def weighted(self) -> bool:
        return self.kind == "scrooge_distortion"

    @property
    def normalized(self) -> bool:
        return self.kind != "gaussian"

    # drawing --------------------------------------------------------------

    def block(self, b: int) -> Batch:
        tag = _KIND_TAG[self.kind]
        rng = block_rng(self.master_seed, tag, b)
        d = self.dim
        resampled = 0
        if self.kind == "haar":
            z = complex_normal(rng, (BLOCK, d))
            states = z / np.linalg.norm(z, axis=1, keepdims=True)
            weights = np.ones(BLOCK)
        elif self.kind == "gaussian":
            states = complex_normal(rng, (BLOCK, d))
            if self.rho is not None:
                states = states @ self._cache["sqrt_rho"].T
            weights = np.ones(BLOCK)
        elif self.kind == "scrooge_distortion":
            states, weights, resampled = self._distortion_block(rng, b)
        elif self.kind == "scrooge_purification":
            states = self._purification_block(rng)
            weights = np.ones(BLOCK)
        else:
            w, v, c = self._cache["temporal"]
            t = rng.random(BLOCK) * self.T
            states = (np.exp(-1j * t[:, None] * w[None, :]) * c[None, :]) @ v.T
            weights = np.ones(BLOCK)
        return Batch(b * BLOCK, states, weights, resampled)

    def _distortion_block(self, rng, b):
        d = self.dim
        s = self._cache["sqrt_rho"]
        phi = complex_normal(rng, (BLOCK, d))
        phi /= np.linalg.norm(phi, axis=1, keepdims=True)
        chi = phi @ s.T
        nrm = np.linalg.norm(chi, axis=1)
        bad = np.flatnonzero(nrm < NORM_FLOOR)
        retry = 0
        while bad.size:
            # measure-zero event: redraw those rows from a dedicated retry stream
            retry += 1
            r2 = block_rng(self.master_seed, _KIND_TAG[self.kind], b, retry)
            p2 = complex_normal(r2, (bad.size, d))
            phi[bad] = p2 / np.linalg.norm(p2, axis=1, keepdims=True)
            chi[bad] = phi[bad] @ s.T
            nrm[bad] = np.linalg.norm(chi[bad], axis=1)
            bad = bad[nrm[bad] < NORM_FLOOR]
        weights = d * nrm**2
        return chi / nrm[:, None], weights, retry

    def _purification_block(self, rng):
        amp, basis = self._cache["schmidt"]
        m = amp.shape[0]
        u = haar_unitaries(rng, BLOCK, m)
        # outcome j has probability sum_i lambda_i |U_ij|^2
        probs = np.einsum("i,bij->bj", amp**2, np.abs(u) ** 2)
        cum = np.cumsum(probs, axis=1)
        x = rng.random(BLOCK) * cum[:, -1]
        j = np.minimum((cum < x[:, None]).sum(axis=1), m - 1)
        col = u[np.arange(BLOCK), :, j]
        vec = (amp[None, :] * col.conj()) @ basis.T
        return vec / np.linalg.norm(vec, axis=1, keepdims=True)

    def draw(self, start: int, stop: int) -> Batch:
        if stop <= start:
            return Batch(start, np.zeros((0, self.dim), dtype=complex), np.zeros(0))
        parts = []
        resampled = 0
        for b in range(start // BLOCK, (stop - 1) // BLOCK + 1):
            blk = self.block(b)
            lo = max(start - blk.start, 0)
            hi = min(stop - blk.start, BLOCK)
            parts.append((blk.states[lo:hi], blk.weights[lo:hi]))
            resampled += blk.resampled
        return Batch(
            start, np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]), resampled
        )

    def sample(self, i: int) -> PureState:
        blk = self.draw(i, i + 1)
        return PureState(blk.states[0], float(blk.weights[0]), normalized=self.normalized)

    def batches(self, n: int, chunk: int = 16 * BLOCK) -> Iterator[Batch]:
        for s in range(0, n, chunk):
            yield self.draw(s, min(s + chunk, n))


def sample_haar(d: int, index: int, seed: int = 0) -> PureState:
    return EnsembleSampler.haar(d, seed).sample(index)


def sample_scrooge_distortion(rho: DensityMatrix, index: int, seed: int = 0) -> PureState:
    return EnsembleSampler.scrooge(rho, seed, "distortion").sample(index)


def sample_scrooge_purification(rho: DensityMatrix, index: int, seed: int = 0) -> PureState:
    return EnsembleSampler.scrooge(rho, seed, "purification").sample(index)


def sample_temporal(h: Hamiltonian, psi0, T: float, index: int, seed: int = 0) -> PureState:
    return EnsembleSampler.temporal(h, psi0, T, seed).sample(index)


def sample_gaussian_vector(d: int, index: int, seed: int = 0) -> np.ndarray:
    return EnsembleSampler.gaussian(d, seed).sample(index).amplitudes


def map_batches(sampler: EnsembleSampler, n: int, fn, workers: int = 1, chunk: int = 16 * BLOCK) -> list:
    """Apply ``fn(batch)`` to consecutive batches; results come back in index order."""
    starts = list(range(0, n, chunk))

    def job(s):
        return fn(sampler.draw(s, min(s + chunk, n)))

    if workers <= 1 or len(starts) == 1:
        return [job(s) for s in starts]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(job, starts))


# ---------------------------------------------------------------- background states


def flat_rank(d: int, m: int) -> DensityMatrix:
    if not 1 <= m <= d:
        raise ValueError(f"need 1 <= m <= d, got m={m}, d={d}")
    diag = np.zeros(d)
    diag[:m] = 1.0 / m
    return DensityMatrix(np.diag(diag).astype(complex), _qubit_dims(d))


def thermal(h: Hamiltonian | np.ndarray, beta: float) -> DensityMatrix:
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    hm = h.matrix if isinstance(h, Hamiltonian) else np.asarray(h, dtype=complex)
    w, v = eigs(hm)
    bw = np.exp(-beta * (w - w[0]))
    rho = (v * (bw / bw.sum())) @ v.conj().T
    return DensityMatrix(hermitianize(rho), _qubit_dims(hm.shape[0]))


def random_rank(d: int, m: int, seed: int) -> DensityMatrix:
    """G G^dag / tr with G a d x m complex Ginibre matrix."""
    if not 1 <= m <= d:
        raise ValueError(f"need 1 <= m <= d, got m={m}, d={d}")
    g = complex_normal(np.random.default_rng(seed), (d, m))
    rho = g @ g.conj().T
    return DensityMatrix(hermitianize(rho / np.trace(rho).real), _qubit_dims(d))


def product(*rhos: DensityMatrix) -> DensityMatrix:
    dims = tuple(x for r in rhos for x in r.factor_dims)
    return DensityMatrix(kron(*[r.entries for r in rhos]), dims)


def maximally_mixed(d: int) -> DensityMatrix:
    return flat_rank(d, d)


def _qubit_dims(d: int) -> tuple[int, ...]:
    n = int(round(math.log2(d))) if d > 1 else 0
    if d > 1 and 2**n == d:
        return (2,) * n
    return (d,)


_ATOM = re.compile(r"^(flat|mixed|random|thermal|pure|file):(.*)$")


def split_spec(s: str) -> list[str]:
    out, depth, cur = [], 0, ""
    for ch in s:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            out.append(cur)
            cur = ""
        else:
            cur += ch
    out.append(cur)
    return [x.strip() for x in out if x.strip()]


def make_rho(spec: str | DensityMatrix) -> DensityMatrix:
    """Build rho from a spec string.

    Grammar: ``flat:d:m``, ``mixed:d``, ``random:d:m:seed``, ``pure:d``
    (projector on the first basis state), ``thermal:kind:size:seed:beta``
    (Hamiltonian from :func:`make_hamiltonian`, unit norm), ``file:path`` and
    ``product(spec, spec, ...)``.
    """
    if isinstance(spec, DensityMatrix):
        return spec
    s = spec.strip()
    if s.startswith("product(") and s.endswith(")"):
        parts = split_spec(s[len("product(") : -1])
        if not parts:
            raise ValueError("empty product")
        return product(*[make_rho(p) for p in parts])
    m = _ATOM.match(s)
    if not m:
        raise ValueError(f"cannot parse rho spec {spec!r}")
    kind, rest = m.group(1), m.group(2)
    if kind == "file":
        return read_density_matrix(Path(rest))
    args = rest.split(":")
    try:
        if kind == "flat":
            return flat_rank(int(args[0]), int(args[1]))
        if kind == "mixed":
            return maximally_mixed(int(args[0]))
        if kind == "pure":
            return flat_rank(int(args[0]), 1)
        if kind == "random":
            return random_rank(int(args[0]), int(args[1]), int(args[2]))
        if kind == "thermal":
            h = make_hamiltonian(args[0], int(args[1]), int(args[2]), target_norm=1.0)
            return thermal(h, float(args[3]))
    except (IndexError, ValueError) as exc:
        raise ValueError(f"bad arguments in rho spec {spec!r}: {exc}") from exc
    raise ValueError(f"cannot parse rho spec {spec!r}")


def random_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    a = complex_normal(rng, (d, d))
    return (a + a.conj().T) / 2


def random_unit_vectors(rng: np.random.Generator, count: int, d: int) -> np.ndarray:
    z = complex_normal(rng, (count, d))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def subset_indices(seq: Sequence, n: int, rng: np.random.Generator) -> list:
    idx = rng.choice(len(seq), size=min(n, len(seq)), replace=False)
    return [seq[i] for i in sorted(idx)]
