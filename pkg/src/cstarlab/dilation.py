"""Dilations of representations of operator algebras.

Representations here are unital homomorphisms ``A -> M_d`` stored as
:class:`~cstarlab.opalg.AlgebraMap` objects into a one-block shape.  The
module provides

* :class:`TwistFamily`: an upper-triangular 3 x 3 block dilation ``sigma``
  and its twists ``sigma_z`` (strictly upper blocks scaled by ``z`` and
  ``z**2``), with :meth:`TwistFamily.sarason_t2` building the standard family
  for the upper-triangular 2 x 2 matrices;
* :func:`compress`, the corner of a representation on a subspace;
* :func:`is_maximal`, which decides the unique-extension property through a
  semidefinite program over Choi matrices (maximal representations are
  exactly those whose only UCP extension to the generated C*-algebra is a
  *-homomorphism);
* :func:`delta_curve` and :func:`semidirichlet_scaling_probe`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import cvxpy as cp
import numpy as np

from .errors import NotHomomorphism, NotIsometry, OutsideDisk, ShapeMismatch, TrivialCorner
from .fdca import BlockElement, BlockShape, generated_span, star_structure
from .matcore import DEFAULT_TOL, ToleranceConfig, as_matrix
from .opalg import (AlgebraMap, GapResult, OperatorAlgebra, extend_rep, gap_search,
                    generate_algebra, is_semi_dirichlet)
from .words import evaluate

_SALT_UEP = 0x0E9


def rep_from_matrices(A: OperatorAlgebra, mats: Sequence) -> AlgebraMap:
    """Extend images of the generators (plain matrices) to a homomorphism into ``M_d``."""
    mats = [as_matrix(m) for m in mats]
    shape = BlockShape((mats[0].shape[0],))
    return extend_rep(A, shape, [BlockElement(shape, (m,)) for m in mats])


def dense_images(rho: AlgebraMap) -> np.ndarray:
    """Images of the basis as dense matrices, shape ``(d, N, N)``."""
    if len(rho.target) == 1:
        return rho.stacks[0]
    return np.stack([rho.target.from_vec(rho.matrix[:, k]).dense() for k in range(rho.source.dim)])


def _one_block(A: OperatorAlgebra, mats: np.ndarray) -> AlgebraMap:
    n = mats.shape[-1]
    return AlgebraMap(A, BlockShape((n,)), mats.reshape(mats.shape[0], -1).T.copy())


# ---------------------------------------------------------------------------
# twist families


@dataclass(frozen=True, eq=False)
class TwistFamily:
    """Semi-invariant decomposition ``H1 (+) H (+) H2`` of a dilation ``sigma``.

    :param A: the operator algebra
    :param sigma: upper-triangular dilation on ``H1 (+) H (+) H2``
    :param dims: ``(dim H1, dim H, dim H2)``
    """

    A: OperatorAlgebra
    sigma: AlgebraMap
    dims: tuple[int, int, int]

    def __post_init__(self):
        n1, n, n2 = self.dims
        mats = dense_images(self.sigma)
        if mats.shape[-1] != n1 + n + n2:
            raise ShapeMismatch(f"dilation acts on dimension {mats.shape[-1]}, dims sum to {n1 + n + n2}")
        lower = np.tril(np.ones((3, 3)), -1)
        for i in range(3):
            for j in range(3):
                if lower[i, j] and np.abs(mats[:, self._sl(i), self._sl(j)]).max(initial=0.0) > 1e-12:
                    raise NotHomomorphism("dilation is not upper triangular for the given dims")

    def _sl(self, i: int) -> slice:
        off = np.cumsum((0,) + self.dims)
        return slice(int(off[i]), int(off[i + 1]))

    @property
    def total(self) -> int:
        return sum(self.dims)

    def block(self, i: int, j: int) -> np.ndarray:
        """Basis images of the ``(i, j)`` block, shape ``(d, rows, cols)``."""
        return dense_images(self.sigma)[:, self._sl(i), self._sl(j)]

    @property
    def pi(self) -> AlgebraMap:
        """The compression to the middle space ``H``."""
        return _one_block(self.A, self.block(1, 1).copy())

    def scaling(self, z: complex) -> np.ndarray:
        """Entrywise factors: 1 on the diagonal, z on (1,2) and (2,3), z**2 on (1,3)."""
        f = np.ones((self.total, self.total), dtype=complex)
        for (i, j), v in {(0, 1): z, (1, 2): z, (0, 2): z * z}.items():
            f[self._sl(i), self._sl(j)] = v
        return f

    @classmethod
    def sarason_t2(cls, t: float = 0.5, tol: ToleranceConfig = DEFAULT_TOL) -> "TwistFamily":
        """The standard dilation of ``[[a, b], [0, c]] -> [[a, b sqrt(t)], [0, c]]``.

        The dilation acts on ``C^4 = span(e1) (+) span(e2, e3) (+) span(e4)``
        and its twist by real ``s`` has ``b``-block ``A_s``.
        """
        if not 0.0 <= t <= 1.0:
            raise ValueError("t must lie in [0, 1]")
        A = t2_algebra(tol)
        r, q = np.sqrt(1.0 - t), np.sqrt(t)

        def sigma(a, b, c):
            return np.array([[a, 0, b * r, -b * q],
                             [0, a, b * q, b * r],
                             [0, 0, c, 0],
                             [0, 0, 0, c]], dtype=complex)

        rho = rep_from_matrices(A, [sigma(1, 0, 0), sigma(0, 1, 0), sigma(0, 0, 1)])
        return cls(A, rho, (1, 2, 1))


def t2_algebra(tol: ToleranceConfig = DEFAULT_TOL) -> OperatorAlgebra:
    """Upper-triangular 2 x 2 matrices with generators ``p = E11, e = E12, q = E22``."""
    shape = BlockShape((2,))
    e = np.eye(2)
    gens = [BlockElement(shape, (np.outer(e[i], e[j]),)) for i, j in ((0, 0), (0, 1), (1, 1))]
    return generate_algebra(shape, gens, ("p", "e", "q"), tol)


def a_matrix(s: complex, t: float) -> np.ndarray:
    """The b-block ``[[s sqrt(1-t), -s**2 sqrt(t)], [sqrt(t), s sqrt(1-t)]]`` of the twisted T2 family."""
    r, q = np.sqrt(1.0 - t), np.sqrt(t)
    return np.array([[s * r, -s * s * q], [q, s * r]], dtype=complex)


@dataclass(frozen=True, eq=False)
class TwistCheck:
    multiplicativity: float
    compression_error: float
    contraction: GapResult | None


def twist(f: TwistFamily, z: complex, tol: ToleranceConfig | None = None,
          check_contractive: bool = False, max_level: int = 4) -> AlgebraMap:
    """The twisted representation ``sigma_z``.

    :raises OutsideDisk: if ``|z| > 1``
    :raises NotHomomorphism: if the twist fails multiplicativity or its
        compression to ``H`` differs from ``pi``
    """
    tol = tol or f.A.tol
    if abs(z) > 1.0 + tol.eps_eq:
        raise OutsideDisk(f"|z| = {abs(z):.6g} exceeds 1")
    rho = _one_block(f.A, dense_images(f.sigma) * f.scaling(z)[None])
    chk = twist_check(f, rho, tol, check_contractive, max_level)
    if chk.multiplicativity > max(1e-8, tol.eps_eq):
        raise NotHomomorphism(f"twist at z={z} is not multiplicative (error {chk.multiplicativity:.2e})")
    if chk.compression_error > 0.0:
        raise NotHomomorphism("twist does not compress to the middle representation")
    if chk.contraction is not None and chk.contraction.margin > tol.eps_norm:
        raise NotHomomorphism(f"twist at z={z} is not completely contractive")
    return rho


def twist_check(f: TwistFamily, rho: AlgebraMap, tol: ToleranceConfig, check_contractive: bool,
                max_level: int = 4) -> TwistCheck:
    mats = dense_images(rho)
    mid = mats[:, f._sl(1), f._sl(1)]
    comp = float(np.abs(mid - f.block(1, 1)).max())
    cc = None
    if check_contractive:
        cc = gap_search(rho.stacks, f.A.stacks, min(max_level, f.total), tol, salt=(3,))
    return TwistCheck(rho.multiplicativity_error(), comp, cc)


def twist_conjugator(f: TwistFamily, z: complex, w: complex) -> np.ndarray:
    """Unitary ``diag(1, z/w, (z/w)**2)`` (blockwise) taking ``sigma_z`` to ``sigma_w``."""
    if w == 0 or abs(abs(z) - abs(w)) > 1e-12:
        raise ValueError("need |z| = |w| > 0")
    ratio = z / w
    diag = np.concatenate([np.full(f.dims[0], 1.0 + 0j), np.full(f.dims[1], ratio),
                           np.full(f.dims[2], ratio * ratio)])
    return np.diag(diag)


# ---------------------------------------------------------------------------
# compression


@dataclass(frozen=True, eq=False)
class Compression:
    """Corner ``V* rho(.) V`` of a representation and whether it is multiplicative."""

    map: AlgebraMap
    is_dilation: bool
    multiplicativity: float


def compress(rho: AlgebraMap, V, tol: ToleranceConfig | None = None) -> Compression:
    """Compress ``rho`` to the range of the isometry ``V``.

    :raises NotIsometry: if ``V* V`` is not the identity
    """
    tol = tol or rho.source.tol
    V = as_matrix(V, name="embedding")
    mats = dense_images(rho)
    if V.shape[0] != mats.shape[-1]:
        raise ShapeMismatch(f"embedding has {V.shape[0]} rows, representation acts on {mats.shape[-1]}")
    if np.abs(V.conj().T @ V - np.eye(V.shape[1])).max() > max(1e-9, tol.eps_eq):
        raise NotIsometry("embedding is not an isometry")
    comp = np.einsum("ia,lij,jb->lab", V.conj(), mats, V)
    m = _one_block(rho.source, comp)
    err = m.multiplicativity_error()
    return Compression(m, err <= max(1e-8, tol.eps_eq), err)


# ---------------------------------------------------------------------------
# maximality via unique UCP extension


@dataclass(frozen=True, eq=False)
class DilationCertificate:
    """A representation ``psi`` of ``A`` on ``C^K`` and an isometry ``V`` with
    ``V* psi(.) V = rho`` whose range does not reduce ``psi(A)``."""

    V: np.ndarray
    images: tuple[np.ndarray, ...]
    compression_error: float
    non_reducing: float

    def valid(self, atol: float = 1e-6) -> bool:
        iso = np.abs(self.V.conj().T @ self.V - np.eye(self.V.shape[1])).max()
        return bool(iso <= atol and self.compression_error <= atol and self.non_reducing > 10 * atol
                    and self.V.shape[0] > self.V.shape[1])


@dataclass(frozen=True, eq=False)
class MaximalityVerdict:
    status: str
    certificate: DilationCertificate | None = None
    evidence: dict = field(default_factory=dict)


def _choi_problem(dims: Sequence[int], d: int, A_coords: Sequence[Sequence[np.ndarray]],
                  rho_mats: np.ndarray):
    """Choi variables, constraints and a parametrized linear objective.

    ``Phi(e^k_ab) = J_k[a-th d-block, b-th d-block]`` and the constraints
    pin ``Phi`` to ``rho`` on every basis element of the algebra.
    """
    J = [cp.Variable((m * d, m * d), hermitian=True) for m in dims]
    n_rows = len(A_coords) * d * d
    lhs = 0
    ii, jj = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
    for k, m in enumerate(dims):
        L = np.zeros((n_rows, (m * d) ** 2), dtype=complex)
        for l, coords in enumerate(A_coords):
            rows = l * d * d + (ii * d + jj).ravel()
            X = coords[k]
            for a in range(m):
                for b in range(m):
                    if X[a, b] != 0:
                        cols = ((a * d + ii) * (m * d) + (b * d + jj)).ravel()
                        L[rows, cols] += X[a, b]
        lhs = lhs + L @ cp.vec(J[k], order="C")
    cons = [j >> 0 for j in J] + [lhs == rho_mats.reshape(-1)]
    H = [cp.Parameter((m * d, m * d), hermitian=True) for m in dims]
    obj = cp.Maximize(sum(cp.real(cp.trace(h @ j)) for h, j in zip(H, J)))
    return cp.Problem(obj, cons), J, H


def _solve(prob: cp.Problem):
    for solver in ("CLARABEL", "SCS"):
        if solver in cp.installed_solvers():
            try:
                prob.solve(solver=solver)
            except cp.SolverError:
                continue
            if prob.status in ("optimal", "optimal_inaccurate"):
                return True
    return False


def _certificate(J_vals: Sequence[np.ndarray], dims: Sequence[int], d: int, structure,
                 A: OperatorAlgebra, rho_mats: np.ndarray) -> DilationCertificate:
    """Stinespring form of the UCP map with Choi matrices ``J_vals``."""
    kraus_rows = []
    blocks = []
    for k, (Jk, m) in enumerate(zip(J_vals, dims)):
        Jk = 0.5 * (Jk + Jk.conj().T)
        vals, vecs = np.linalg.eigh(Jk)
        for v, w in zip(vals, vecs.T):
            if v <= 1e-9:
                continue
            K = (np.sqrt(v) * w).reshape(m, d).T  # d x m, K[:, a] = w[a-block]
            kraus_rows.append(K.conj().T)
            blocks.append(k)
    V = np.concatenate(kraus_rows, axis=0)
    # polish to an exact isometry
    u, _, vh = np.linalg.svd(V, full_matrices=False)
    V = u @ vh

    def psi(x: BlockElement) -> np.ndarray:
        coords = structure.to_coords(x)
        from scipy.linalg import block_diag
        return block_diag(*[coords.blocks[k] for k in blocks])

    imgs = tuple(psi(g) for g in A.generators)
    basis_imgs = [psi(b) for b in A.basis_elements]
    comp = max(float(np.abs(V.conj().T @ p @ V - r).max()) for p, r in zip(basis_imgs, rho_mats))
    P = V @ V.conj().T
    Q = np.eye(P.shape[0]) - P
    nonred = max(max(float(np.linalg.norm(Q @ p @ V, 2)), float(np.linalg.norm(Q @ p.conj().T @ V, 2)))
                 for p in imgs)
    return DilationCertificate(V, imgs, comp, nonred)


def is_maximal(A: OperatorAlgebra, rho, tol: ToleranceConfig | None = None,
               agree_tol: float = 1e-6) -> MaximalityVerdict:
    """Unique-extension test for a unital completely contractive ``rho: A -> M_d``.

    :param rho: an :class:`AlgebraMap` or images of the generators as matrices
    :param agree_tol: tolerance for optimal values to count as coinciding
        (a solver-accuracy floor on top of ``eps_norm``)
    """
    tol = tol or A.tol
    if not isinstance(rho, AlgebraMap):
        rho = rep_from_matrices(A, rho)
    rho_mats = dense_images(rho)
    d = rho_mats.shape[-1]
    structure = star_structure(A.ambient, A.generators, tol)
    dims = structure.shape.sizes
    A_coords = [structure.to_coords(b).blocks for b in A.basis_elements]
    prob, J, H = _choi_problem(dims, d, A_coords, rho_mats)
    thresh = max(tol.eps_norm, agree_tol)

    # *-homomorphic extension, if one exists: the graph of (g, rho(g)) must generate
    # a C*-algebra no bigger than C*(A)
    shape = BlockShape((d,))
    imgs = [BlockElement(shape, (m,)) for m in (rho_mats[l] for l in range(A.dim))]
    pairs = [b.concat(y) for b, y in zip(A.basis_elements, imgs)]
    graph = generated_span(A.ambient.concat(shape), pairs, star=True, tol=tol)
    star_ext = None
    if len(graph) == structure.dim:
        src = graph.basis[:A.ambient.dim]
        tgt = graph.basis[A.ambient.dim:]
        star_ext = []
        for k, m in enumerate(dims):
            Jk = np.zeros((m * d, m * d), dtype=complex)
            for a in range(m):
                for b in range(m):
                    c, *_ = np.linalg.lstsq(src, structure.units[k][a, b], rcond=None)
                    Jk[a * d:(a + 1) * d, b * d:(b + 1) * d] = (tgt @ c).reshape(d, d)
            star_ext.append(Jk)

    rng = tol.rng(_SALT_UEP, d, A.dim)
    worst = 0.0
    solved = 0
    for _ in range(tol.optimizer_restarts):
        Hs = []
        for m in dims:
            g = rng.standard_normal((m * d, m * d)) + 1j * rng.standard_normal((m * d, m * d))
            Hs.append(0.5 * (g + g.conj().T))
        for sign in (1.0, -1.0):
            for h, val in zip(H, Hs):
                h.value = sign * val
            if not _solve(prob):
                continue
            solved += 1
            J_vals = [j.value for j in J]
            if star_ext is None:
                cert = _certificate(J_vals, dims, d, structure, A, rho_mats)
                return MaximalityVerdict("not_maximal", cert,
                                         {"reason": "no *-homomorphic extension", "solves": solved})
            ref = sum(float(np.real(np.trace(sign * h @ j))) for h, j in zip(Hs, star_ext))
            dev = prob.value - ref
            worst = max(worst, dev)
            if dev > thresh:
                dist = max(float(np.abs(a - b).max()) for a, b in zip(J_vals, star_ext))
                cert = _certificate(J_vals, dims, d, structure, A, rho_mats)
                return MaximalityVerdict("not_maximal", cert,
                                         {"reason": "second UCP extension", "gap": dev,
                                          "distance": dist, "solves": solved})
    if star_ext is None or solved < 2 * tol.optimizer_restarts:
        return MaximalityVerdict("unknown", None, {"solves": solved, "worst_gap": worst})
    return MaximalityVerdict("maximal", None, {"solves": solved, "worst_gap": worst,
                                               "functionals": 2 * tol.optimizer_restarts})


# ---------------------------------------------------------------------------
# delta curves


def delta_curve(f: TwistFamily, word: str, grid: Sequence[complex],
                tol: ToleranceConfig | None = None) -> list[tuple[complex, float]]:
    """Norms of a word evaluated in the twisted images, for each grid point."""
    out = []
    names = f.A.names
    for z in grid:
        rho = twist(f, z, tol)
        mats = rho.images()
        val = evaluate(word, dict(zip(names, mats)), mats[0].shape.identity())
        out.append((z, val.norm()))
    return out


def delta_value(f: TwistFamily, word: str, z: complex) -> float:
    rho = _one_block(f.A, dense_images(f.sigma) * f.scaling(z)[None])
    mats = rho.images()
    return evaluate(word, dict(zip(f.A.names, mats)), mats[0].shape.identity()).norm()


def solve_level(f: TwistFamily, word: str, level: float, lo: float = 0.0, hi: float = 1.0,
                xtol: float = 1e-12) -> float:
    """Real ``z`` in ``[lo, hi]`` with ``delta(z) = level`` (the curve must bracket it)."""
    from scipy.optimize import brentq
    return float(brentq(lambda z: delta_value(f, word, z) - level, lo, hi, xtol=xtol))


# ---------------------------------------------------------------------------
# semi-Dirichlet corner scaling


def scale_corner(mats: np.ndarray, split: int, s: float) -> np.ndarray:
    """Multiply the top-right ``split x (N - split)`` corner by ``s``."""
    out = np.array(mats, dtype=complex, copy=True)
    out[..., :split, split:] *= s
    return out


def image_algebra(A: OperatorAlgebra, rho: AlgebraMap) -> OperatorAlgebra:
    return generate_algebra(rho.target, rho.images(), A.names, A.tol)


@dataclass(frozen=True, eq=False)
class ProbeReport:
    phi: bool
    phi_half: bool
    joint: bool
    corner_norm: float

    @property
    def one_fails(self) -> bool:
        return not (self.phi and self.phi_half)


def semidirichlet_scaling_probe(A: OperatorAlgebra, rho, split: int,
                                tol: ToleranceConfig | None = None, factor: float = 0.5) -> ProbeReport:
    """Semi-Dirichlet status of ``Phi``, of ``Phi'`` (corner scaled by ``factor``) and of ``Phi (+) Phi'``.

    :param rho: representation (``AlgebraMap`` or generator matrices),
        upper triangular for the split ``split | N - split``
    :raises TrivialCorner: if the corner vanishes on all of ``A``
    """
    tol = tol or A.tol
    if not isinstance(rho, AlgebraMap):
        rho = rep_from_matrices(A, rho)
    mats = dense_images(rho)
    n = mats.shape[-1]
    if not 0 < split < n:
        raise ValueError("split must leave both diagonal blocks nonempty")
    if np.abs(mats[:, split:, :split]).max() > 1e-12:
        raise ValueError("representation is not block upper triangular for this split")
    corner = float(np.abs(mats[:, :split, split:]).max())
    if corner <= tol.eps_eq:
        raise TrivialCorner("the off-diagonal corner vanishes on the algebra")
    half = _one_block(A, scale_corner(mats, split, factor))
    joint_shape = BlockShape((n, n))
    joint_imgs = [BlockElement(joint_shape, (x.blocks[0], y.blocks[0]))
                  for x, y in zip(rho.images(), half.images())]
    joint = generate_algebra(joint_shape, joint_imgs, A.names, tol)
    return ProbeReport(is_semi_dirichlet(image_algebra(A, rho)), is_semi_dirichlet(image_algebra(A, half)),
                       is_semi_dirichlet(joint), corner)
