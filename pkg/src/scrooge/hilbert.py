"""Dense linear algebra on small multi-factor Hilbert spaces.

Operators are plain complex numpy arrays. ``DensityMatrix`` and ``PureState``
add validation and tensor-factor bookkeeping on top of them.
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from functools import cached_property, reduce
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

HERM_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
NORM_TOL = 1e-10
JSON_FORMAT = "qdm-json-1"
BINARY_MAGIC = b"QDM1"


class DimensionError(ValueError):
    """Operator and partition dimensions disagree."""

    def __init__(self, message: str, site: int | None = None):
        super().__init__(message)
        self.site = site


class InvalidStateError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, iterations: int):
        super().__init__(f"{message} (after {iterations} iterations)")
        self.iterations = iterations


class FormatError(ValueError):
    """Malformed density-matrix file; ``offset`` is the byte position of the fault."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte {offset}")
        self.offset = offset


def hermitianize(a: np.ndarray) -> np.ndarray:
    return (a + a.conj().T) / 2


def _as_array(op) -> np.ndarray:
    if isinstance(op, DensityMatrix):
        return op.entries
    if isinstance(op, PureState):
        return op.amplitudes
    return np.asarray(op)


# ---------------------------------------------------------------- types


@dataclass(frozen=True)
class DensityMatrix:
    entries: np.ndarray
    factor_dims: tuple[int, ...] = ()

    def __post_init__(self):
        m = np.array(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidStateError(f"density matrix must be square, got shape {m.shape}")
        d = m.shape[0]
        dims = tuple(int(x) for x in self.factor_dims) or (d,)
        if math.prod(dims) != d:
            raise DimensionError(f"factor dims {dims} do not multiply to {d}")
        herm = float(np.max(np.abs(m - m.conj().T))) if d else 0.0
        if herm > HERM_TOL:
            raise InvalidStateError(f"not Hermitian: max |M - M^dag| = {herm:.3e}")
        tr = float(np.trace(m).real)
        if abs(tr - 1) > TRACE_TOL:
            raise InvalidStateError(f"trace is {tr!r}, expected 1")
        m = hermitianize(m)
        lo = float(np.linalg.eigvalsh(m)[0])
        if lo < -PSD_TOL:
            raise InvalidStateError(f"smallest eigenvalue {lo:.3e} is negative")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)
        object.__setattr__(self, "factor_dims", dims)

    @classmethod
    def from_matrix(cls, m, factor_dims: Sequence[int] = (), normalize: bool = False) -> DensityMatrix:
        m = np.asarray(m, dtype=complex)
        if normalize:
            m = hermitianize(m)
            m = m / np.trace(m).real
        return cls(m, tuple(factor_dims))

    @classmethod
    def from_pure(cls, psi, factor_dims: Sequence[int] = ()) -> DensityMatrix:
        v = _as_array(psi).astype(complex)
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()), tuple(factor_dims))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @cached_property
    def spectrum(self) -> np.ndarray:
        """Eigenvalues, ascending, clipped at zero."""
        return np.clip(np.linalg.eigvalsh(self.entries), 0.0, None)

    @property
    def max_eig(self) -> float:
        return float(self.spectrum[-1])

    def partition(self, regions: Sequence[str]) -> Partition:
        return Partition(self.factor_dims, tuple(regions))


@dataclass(frozen=True)
class PureState:
    amplitudes: np.ndarray
    weight: float = 1.0
    normalized: bool = True

    def __post_init__(self):
        v = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if self.weight < 0:
            raise InvalidStateError("weight must be nonnegative")
        if self.normalized and abs(np.linalg.norm(v) - 1) > NORM_TOL:
            raise InvalidStateError(f"norm is {np.linalg.norm(v)!r}, expected 1")
        v.setflags(write=False)
        object.__setattr__(self, "amplitudes", v)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]


@dataclass(frozen=True)
class Partition:
    """Assignment of tensor factors (sites) to labeled regions."""

    factor_dims: tuple[int, ...]
    region_of_site: tuple[str, ...]

    def __post_init__(self):
        dims = tuple(int(x) for x in self.factor_dims)
        regs = tuple(self.region_of_site)
        if len(dims) != len(regs):
            raise DimensionError(
                f"{len(dims)} sites but {len(regs)} region labels", site=min(len(dims), len(regs))
            )
        for i, x in enumerate(dims):
            if x < 1:
                raise DimensionError(f"site {i} has dimension {x}", site=i)
        object.__setattr__(self, "factor_dims", dims)
        object.__setattr__(self, "region_of_site", regs)

    @classmethod
    def from_regions(cls, factor_dims: Sequence[int], regions: dict[str, Iterable[int]]) -> Partition:
        labels: list[str | None] = [None] * len(factor_dims)
        for lab, sites in regions.items():
            for s in sites:
                if not 0 <= s < len(factor_dims):
                    raise DimensionError(f"site {s} out of range", site=s)
                if labels[s] is not None:
                    raise DimensionError(f"site {s} assigned twice", site=s)
                labels[s] = lab
        for s, lab in enumerate(labels):
            if lab is None:
                raise DimensionError(f"site {s} not assigned to a region", site=s)
        return cls(tuple(factor_dims), tuple(labels))  # type: ignore[arg-type]

    @classmethod
    def qubits(cls, regions: str) -> Partition:
        """One qubit per character, e.g. ``"AABBC"``."""
        return cls((2,) * len(regions), tuple(regions))

    @property
    def dim(self) -> int:
        return math.prod(self.factor_dims)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(self.region_of_site))

    def sites(self, regions: str | Iterable[str]) -> list[int]:
        want = _region_set(regions)
        return [i for i, lab in enumerate(self.region_of_site) if lab in want]

    def region_dim(self, regions: str | Iterable[str]) -> int:
        return math.prod(self.factor_dims[i] for i in self.sites(regions))

    def check(self, d: int) -> None:
        if self.dim != d:
            # name the first site whose cumulative product no longer divides d
            acc = 1
            for i, x in enumerate(self.factor_dims):
                acc *= x
                if d % acc:
                    raise DimensionError(f"site {i} (dim {x}) inconsistent with operator dimension {d}", site=i)
            raise DimensionError(
                f"partition dimension {self.dim} != operator dimension {d}", site=len(self.factor_dims) - 1
            )


def _region_set(regions) -> set[str]:
    if isinstance(regions, str):
        return {regions}
    return set(regions)


@dataclass(frozen=True)
class Permutation:
    """Bijection on copy indices ``0..k-1``; ``images[r]`` is where copy r is sent."""

    images: tuple[int, ...]
    cycles: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        imgs = tuple(int(x) for x in self.images)
        if sorted(imgs) != list(range(len(imgs))):
            raise ValueError(f"{imgs} is not a bijection on 0..{len(imgs) - 1}")
        object.__setattr__(self, "images", imgs)
        seen = [False] * len(imgs)
        cyc = []
        for s in range(len(imgs)):
            if seen[s]:
                continue
            c = []
            j = s
            while not seen[j]:
                seen[j] = True
                c.append(j)
                j = imgs[j]
            cyc.append(tuple(c))
        object.__setattr__(self, "cycles", tuple(cyc))

    @property
    def k(self) -> int:
        return len(self.images)

    @classmethod
    def identity(cls, k: int) -> Permutation:
        return cls(tuple(range(k)))

    def inverse(self) -> Permutation:
        inv = [0] * self.k
        for r, img in enumerate(self.images):
            inv[img] = r
        return Permutation(tuple(inv))

    def cycle_type(self) -> tuple[int, ...]:
        return tuple(sorted((len(c) for c in self.cycles), reverse=True))


def all_permutations(k: int) -> list[Permutation]:
    from itertools import permutations

    return [Permutation(p) for p in permutations(range(k))]


def permutation_operator(pi: Permutation, d: int) -> np.ndarray:
    """Dense d^k x d^k operator sending v_1 x ... x v_k to the tensor with v_r in slot pi(r)."""
    k = pi.k
    big = d**k
    idx = np.arange(big).reshape((d,) * k)
    # output slot a holds input slot pi^{-1}(a)
    src = idx.transpose(pi.inverse().images).reshape(-1)
    out = np.zeros((big, big))
    out[np.arange(big), src] = 1.0
    return out


# ---------------------------------------------------------------- tensor ops


def _tensor_view(op: np.ndarray, part: Partition) -> tuple[np.ndarray, int]:
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise DimensionError(f"expected square operator, got shape {op.shape}")
    part.check(op.shape[0])
    n = len(part.factor_dims)
    return op.reshape(part.factor_dims * 2), n


def partial_trace(op, part: Partition, keep: str | Iterable[str]) -> np.ndarray:
    """Trace out every region not in ``keep``; kept sites stay in site order."""
    m = _as_array(op)
    t, n = _tensor_view(m, part)
    kept = part.sites(keep)
    row = list(range(n))
    col = list(range(n, 2 * n))
    for s in range(n):
        if s not in kept:
            col[s] = row[s]
    out_idx = [row[s] for s in kept] + [col[s] for s in kept]
    dk = part.region_dim(keep)
    return np.einsum(t, row + col, out_idx).reshape(dk, dk)


def partial_transpose(op, part: Partition, region: str | Iterable[str]) -> np.ndarray:
    m = _as_array(op)
    t, n = _tensor_view(m, part)
    axes = list(range(2 * n))
    for s in part.sites(region):
        axes[s], axes[n + s] = axes[n + s], axes[s]
    return t.transpose(axes).reshape(m.shape)


def reorder(op, part: Partition, order: Sequence[str]) -> tuple[np.ndarray, Partition]:
    """Permute tensor factors so that regions appear contiguously in ``order``."""
    m = _as_array(op)
    t, n = _tensor_view(m, part)
    sites = [s for lab in order for s in part.sites(lab)]
    if sorted(sites) != list(range(n)):
        raise DimensionError("order must list every region exactly once")
    t = t.transpose(sites + [n + s for s in sites])
    dims = tuple(part.factor_dims[s] for s in sites)
    regs = tuple(part.region_of_site[s] for s in sites)
    return t.reshape(m.shape), Partition(dims, regs)


def kron(*ops) -> np.ndarray:
    return reduce(np.kron, [_as_array(o) for o in ops])


def eigs(op, max_attempts: int = 3) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian operator, ascending eigenvalues."""
    m = hermitianize(_as_array(op).astype(complex))
    if not np.all(np.isfinite(m)):
        raise ValueError("operator has non-finite entries")
    err = None
    for attempt in range(1, max_attempts + 1):
        try:
            # the symmetric driver occasionally fails on near-degenerate input;
            # retrying with a scaled copy changes the internal pivots
            scale = 1.0 if attempt == 1 else 1.0 + 1e-12 * attempt
            w, v = np.linalg.eigh(m * scale)
            return w / scale, v
        except np.linalg.LinAlgError as exc:
            err = exc
    raise ConvergenceError(f"eigh failed: {err}", iterations=max_attempts)


def eigvalsh(op) -> np.ndarray:
    return np.linalg.eigvalsh(hermitianize(_as_array(op)))


def spectral_norm(op) -> float:
    m = _as_array(op)
    if not np.all(np.isfinite(m)):
        raise ValueError("operator has non-finite entries")
    if m.ndim == 1:
        return float(np.linalg.norm(m))
    if np.allclose(m, m.conj().T, atol=1e-12, rtol=0):
        return float(np.max(np.abs(np.linalg.eigvalsh(hermitianize(m)))))
    return float(np.linalg.norm(m, 2))


def trace_norm(op) -> float:
    m = _as_array(op)
    if np.allclose(m, m.conj().T, atol=1e-12, rtol=0):
        return float(np.sum(np.abs(np.linalg.eigvalsh(hermitianize(m)))))
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def pinv_sqrt(rho, rank_tol: float | None = None) -> np.ndarray:
    """Inverse square root on the support; eigenvalues at or below ``rank_tol`` map to 0.

    The default tolerance is 1e-10 times the largest eigenvalue.
    """
    w, v = eigs(rho)
    if rank_tol is None:
        rank_tol = 1e-10 * max(float(w[-1]), 0.0)
    keep = w > rank_tol
    inv = np.zeros_like(w)
    inv[keep] = 1.0 / np.sqrt(w[keep])
    return hermitianize((v * inv) @ v.conj().T)


def psd_sqrt(rho) -> np.ndarray:
    w, v = eigs(rho)
    return hermitianize((v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T)


def support_projector(rho, rank_tol: float | None = None) -> np.ndarray:
    w, v = eigs(rho)
    if rank_tol is None:
        rank_tol = 1e-10 * max(float(w[-1]), 0.0)
    vk = v[:, w > rank_tol]
    return vk @ vk.conj().T


def permuted_product_element(rho, bras: Sequence, kets: Sequence, pi: Permutation) -> complex:
    """Matrix element of rho^{(x)k} times the permutation operator, via cycle products.

    Equals prod_r <bra_r| rho |ket_{pi^{-1}(r)}>. Each cycle of ``pi`` contributes
    one independent factor, so the d^k space is never formed.
    """
    m = _as_array(rho)
    k = pi.k
    if len(bras) != k or len(kets) != k:
        raise DimensionError(f"need {k} bras and kets, got {len(bras)} and {len(kets)}")
    d = m.shape[0]
    bv = [np.asarray(_as_array(b)).reshape(-1) for b in bras]
    kv = [np.asarray(_as_array(x)).reshape(-1) for x in kets]
    for i, v in enumerate(bv + kv):
        if v.shape[0] != d:
            raise DimensionError(f"vector {i} has dimension {v.shape[0]}, expected {d}")
    out = 1.0 + 0.0j
    for cyc in pi.cycles:
        # within a cycle (s, pi(s), pi^2(s), ...), bra at pi(s) pairs with ket at s
        f = 1.0 + 0.0j
        for s in cyc:
            r = pi.images[s]
            f *= np.vdot(bv[r], m @ kv[s])
        out *= f
    return complex(out)


# ---------------------------------------------------------------- file formats


def density_to_json(rho: DensityMatrix) -> str:
    payload = {
        "format": JSON_FORMAT,
        "dim": rho.dim,
        "factor_dims": list(rho.factor_dims),
        "re": rho.entries.real.tolist(),
        "im": rho.entries.imag.tolist(),
    }
    return json.dumps(payload)


def density_from_json(text: str | bytes) -> DensityMatrix:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}", len(text[: exc.pos].encode("utf-8"))) from exc

    def where(key: str) -> int:
        pos = text.find(f'"{key}"')
        return len(text[: max(pos, 0)].encode("utf-8"))

    if not isinstance(obj, dict):
        raise FormatError("top level must be an object", 0)
    if obj.get("format") != JSON_FORMAT:
        raise FormatError(f"unsupported format tag {obj.get('format')!r}", where("format"))
    for key in ("dim", "factor_dims", "re", "im"):
        if key not in obj:
            raise FormatError(f"missing key {key!r}", len(text.encode("utf-8")))
    d = obj["dim"]
    if not isinstance(d, int) or d < 1:
        raise FormatError(f"bad dim {d!r}", where("dim"))
    try:
        re_ = np.array(obj["re"], dtype=float)
        im_ = np.array(obj["im"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"non-numeric matrix entries: {exc}", where("re")) from exc
    for key, arr in (("re", re_), ("im", im_)):
        if arr.shape != (d, d):
            raise FormatError(f"{key} has shape {arr.shape}, expected {(d, d)}", where(key))
    try:
        return DensityMatrix(re_ + 1j * im_, tuple(obj["factor_dims"]))
    except ValueError as exc:
        raise FormatError(str(exc), where("re")) from exc


def density_to_bytes(rho: DensityMatrix) -> bytes:
    d = rho.dim
    head = BINARY_MAGIC + struct.pack("<QQ", d, len(rho.factor_dims))
    head += struct.pack(f"<{len(rho.factor_dims)}Q", *rho.factor_dims)
    body = np.empty((d, d, 2), dtype="<f8")
    body[..., 0] = rho.entries.real
    body[..., 1] = rho.entries.imag
    return head + body.tobytes()


def density_from_bytes(buf: bytes) -> DensityMatrix:
    if len(buf) < 4 or buf[:4] != BINARY_MAGIC:
        raise FormatError("missing QDM1 magic", 0)
    pos = 4

    def take(n: int, what: str) -> bytes:
        nonlocal pos
        if pos + n > len(buf):
            raise FormatError(f"truncated while reading {what}", pos)
        out = buf[pos : pos + n]
        pos += n
        return out

    (d,) = struct.unpack("<Q", take(8, "dim"))
    dim_at = pos - 8
    (nf,) = struct.unpack("<Q", take(8, "factor count"))
    if d < 1 or d > 2**16:
        raise FormatError(f"unsupported dim {d}", dim_at)
    if nf > 64:
        raise FormatError(f"implausible factor count {nf}", pos - 8)
    fdims = struct.unpack(f"<{nf}Q", take(8 * nf, "factor dims"))
    body_at = pos
    raw = take(16 * d * d, "matrix entries")
    if pos != len(buf):
        raise FormatError(f"{len(buf) - pos} trailing bytes", pos)
    arr = np.frombuffer(raw, dtype="<f8").reshape(d, d, 2)
    try:
        return DensityMatrix(arr[..., 0] + 1j * arr[..., 1], tuple(fdims))
    except ValueError as exc:
        raise FormatError(str(exc), body_at) from exc


def read_density_matrix(path: str | Path) -> DensityMatrix:
    data = Path(path).read_bytes()
    if data[:4] == BINARY_MAGIC:
        return density_from_bytes(data)
    return density_from_json(data)


def write_density_matrix(rho: DensityMatrix, path: str | Path, binary: bool | None = None) -> None:
    p = Path(path)
    if binary is None:
        binary = p.suffix in (".qdm", ".bin")
    if binary:
        p.write_bytes(density_to_bytes(rho))
    else:
        p.write_text(density_to_json(rho))
