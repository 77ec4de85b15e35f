"""Dense complex linear algebra shared by the rest of the package.

Every routine here is a pure function of its inputs.  Tolerances come from a
single :class:`ToleranceConfig`; ``DEFAULT_TOL`` is used when callers pass
nothing.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyInput, InvalidMatrix, NotHermitian, ShapeMismatch


@dataclass(frozen=True)
class ToleranceConfig:
    """Global numerical policy.

    :param eps_eq: entrywise / residual equality threshold
    :param eps_norm: threshold for comparing operator norms
    :param eps_psd: slack allowed on eigenvalue nonnegativity
    :param optimizer_restarts: random restarts for nonconvex searches
    :param rng_seed: root seed from which every random stream is derived
    """

    eps_eq: float = 1e-10
    eps_norm: float = 1e-7
    eps_psd: float = 1e-9
    optimizer_restarts: int = 64
    rng_seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.eps_eq <= self.eps_norm < 1.0):
            raise ValueError("tolerances must satisfy 0 < eps_eq <= eps_norm < 1")
        if self.optimizer_restarts < 1:
            raise ValueError("optimizer_restarts must be >= 1")
        if not (0 <= int(self.rng_seed) < 2**64):
            raise ValueError("rng_seed must fit in an unsigned 64-bit integer")

    def with_(self, **changes) -> "ToleranceConfig":
        return replace(self, **changes)

    def rng(self, *salt: int) -> np.random.Generator:
        """Independent generator for the stream labelled by ``salt``."""
        return np.random.default_rng([int(self.rng_seed), *[int(s) for s in salt]])


DEFAULT_TOL = ToleranceConfig()


def as_matrix(m, *, name: str = "matrix") -> np.ndarray:
    """Validate and return ``m`` as a 2-d complex array."""
    arr = np.asarray(m, dtype=complex)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidMatrix(f"{name} must be a non-empty 2-d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidMatrix(f"{name} has non-finite entries")
    return arr


def op_norm(m) -> float:
    """Largest singular value."""
    arr = as_matrix(m)
    return float(np.linalg.norm(arr, 2))


def is_hermitian(m, tol: ToleranceConfig = DEFAULT_TOL) -> bool:
    arr = as_matrix(m)
    if arr.shape[0] != arr.shape[1]:
        return False
    scale = max(1.0, float(np.abs(arr).max()))
    return float(np.abs(arr - arr.conj().T).max()) <= tol.eps_eq * scale


def herm_eigs(m, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    """Ascending eigenvalues of a Hermitian matrix, multiplicity counted."""
    arr = as_matrix(m)
    if arr.shape[0] != arr.shape[1]:
        raise NotHermitian(f"matrix is not square: {arr.shape}")
    if not is_hermitian(arr, tol):
        raise NotHermitian("matrix differs from its adjoint beyond eps_eq")
    herm = 0.5 * (arr + arr.conj().T)
    # eigvalsh is ascending; stable argsort keeps equal values in index order
    vals = np.linalg.eigvalsh(herm)
    return vals[np.argsort(vals, kind="stable")]


def dedupe_sorted(values: Iterable[float], resolution: float) -> list[float]:
    """Collapse an ascending sequence into cluster representatives."""
    out: list[float] = []
    cluster: list[float] = []
    for v in values:
        if cluster and v - cluster[-1] > resolution:
            out.append(float(np.mean(cluster)))
            cluster = []
        cluster.append(float(v))
    if cluster:
        out.append(float(np.mean(cluster)))
    return out


def inner(x: np.ndarray, y: np.ndarray) -> complex:
    """Trace inner product <x, y> = tr(y* x)."""
    return complex(np.vdot(np.asarray(y).ravel(), np.asarray(x).ravel()))


def _rank_cut(s: np.ndarray, tol: float) -> int:
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * max(1.0, s[0])))


def orth_columns(mat: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormal basis (as columns) of the column space of ``mat``."""
    if mat.shape[1] == 0:
        return np.zeros((mat.shape[0], 0), dtype=complex)
    u, s, _ = np.linalg.svd(mat, full_matrices=False)
    return u[:, :_rank_cut(s, tol)]


def nullspace(mat: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormal basis (as columns) of the kernel of ``mat``."""
    n = mat.shape[1]
    if mat.shape[0] == 0:
        return np.eye(n, dtype=complex)
    _, s, vh = np.linalg.svd(mat, full_matrices=True)
    rank = _rank_cut(s, tol)
    return vh[rank:].conj().T


def span_basis(vectors: Sequence, tol: ToleranceConfig = DEFAULT_TOL) -> list[np.ndarray]:
    """Orthonormal basis (trace inner product) of the span of equally shaped matrices."""
    if len(vectors) == 0:
        raise EmptyInput("span_basis needs at least one vector")
    mats = [np.asarray(v, dtype=complex) for v in vectors]
    shape = mats[0].shape
    for v in mats:
        if v.shape != shape:
            raise ShapeMismatch(f"mixed shapes {shape} and {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InvalidMatrix("non-finite entries in span input")
    stacked = np.stack([v.ravel() for v in mats], axis=1)
    q = orth_columns(stacked, tol.eps_eq)
    return [q[:, i].reshape(shape) for i in range(q.shape[1])]


class SpanBuilder:
    """Incrementally maintained orthonormal basis of a subspace of C^n.

    Vectors whose relative residual after two rounds of Gram-Schmidt is at
    most ``rel_tol`` are treated as already contained, as are vectors (and
    residuals) with norm at most ``abs_floor``.
    """

    def __init__(self, dim: int, rel_tol: float = 1e-10, abs_floor: float = 0.0):
        self.dim = dim
        self.rel_tol = rel_tol
        self.abs_floor = abs_floor
        self._q = np.zeros((dim, 0), dtype=complex)

    @property
    def basis(self) -> np.ndarray:
        return self._q

    def __len__(self) -> int:
        return self._q.shape[1]

    def residual(self, v: np.ndarray) -> np.ndarray:
        r = np.asarray(v, dtype=complex).ravel().copy()
        for _ in range(2):
            r -= self._q @ (self._q.conj().T @ r)
        return r

    def add(self, v: np.ndarray) -> bool:
        v = np.asarray(v, dtype=complex).ravel()
        nv = np.linalg.norm(v)
        if nv < 1e-300 or nv <= self.abs_floor:
            return False
        r = self.residual(v)
        nr = np.linalg.norm(r)
        if nr <= self.rel_tol * nv or nr <= self.abs_floor:
            return False
        self._q = np.concatenate([self._q, (r / nr)[:, None]], axis=1)
        return True

    def contains(self, v: np.ndarray, rel_tol: float | None = None) -> bool:
        v = np.asarray(v, dtype=complex).ravel()
        nv = np.linalg.norm(v)
        if nv == 0.0:
            return True
        tol = self.rel_tol if rel_tol is None else rel_tol
        return np.linalg.norm(self.residual(v)) <= tol * max(nv, 1.0)


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR with phase correction."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def polar_unitary(m: np.ndarray) -> np.ndarray:
    """Unitary factor W of the polar decomposition m = W |m|."""
    u, _, vh = np.linalg.svd(m)
    return u @ vh


def hermitian_dilation(m: np.ndarray) -> np.ndarray:
    """The self-adjoint matrix [[0, m], [m*, 0]]."""
    m = as_matrix(m)
    r, c = m.shape
    return np.block([[np.zeros((r, r)), m], [m.conj().T, np.zeros((c, c))]])
