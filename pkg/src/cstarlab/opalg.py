"""Unital operator algebras inside a block C*-algebra.

An :class:`OperatorAlgebra` is stored by an orthonormal basis (trace inner
product) of the unital algebra spanned by words in its generators.  Matrix
levels are handled through coefficient tensors ``u`` of shape ``(k, k, d)``:
the level-k element is ``sum_pq E_pq (x) (sum_l u[p, q, l] b_l)``.

Whether deleting a set of blocks is completely isometric is decided by
:func:`gap_search`, a batched projected-gradient ascent of the relative gap
``1 - ||u_kept|| / ||u_deleted||`` over matrix levels up to the total size
of the deleted blocks.  Maps into ``M_K`` attain their cb-norm at level ``K``
(Smith's lemma), which is why that level suffices.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import EmptyInput, NotHomomorphism, ShapeMismatch, ShilovInconsistent
from .fdca import (BlockElement, BlockShape, Ideal, enumerate_ideals,
                   generated_span, quotient, quotient_shape)
from .matcore import DEFAULT_TOL, SpanBuilder, ToleranceConfig, nullspace
from .words import evaluate

log = logging.getLogger(__name__)

_SALT_GAP = 0x6A9


@dataclass(frozen=True, eq=False)
class OperatorAlgebra:
    """Unital subalgebra of ``ambient`` spanned by the columns of ``basis``."""

    ambient: BlockShape
    generators: tuple[BlockElement, ...]
    names: tuple[str, ...]
    basis: np.ndarray
    tol: ToleranceConfig = DEFAULT_TOL

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @cached_property
    def basis_elements(self) -> list[BlockElement]:
        return [self.ambient.from_vec(self.basis[:, k]) for k in range(self.dim)]

    @cached_property
    def stacks(self) -> list[np.ndarray]:
        """Per ambient block, the basis as an array of shape ``(d, n, n)``."""
        return [np.stack([b.blocks[i] for b in self.basis_elements])
                for i in range(len(self.ambient))]

    @cached_property
    def products(self) -> np.ndarray:
        """Structure constants ``c[i, j, l]`` with ``b_i b_j = sum_l c[i, j, l] b_l``."""
        d = self.dim
        out = np.zeros((d, d, d), dtype=complex)
        for i, bi in enumerate(self.basis_elements):
            for j, bj in enumerate(self.basis_elements):
                out[i, j] = self.coefficients(bi @ bj)
        return out

    @property
    def unit_coefficients(self) -> np.ndarray:
        return self.coefficients(self.ambient.identity())

    @property
    def env(self) -> dict[str, BlockElement]:
        return dict(zip(self.names, self.generators))

    def coefficients(self, x: BlockElement) -> np.ndarray:
        if x.shape != self.ambient:
            raise ShapeMismatch(f"element of shape {x.shape.sizes} is not in ambient {self.ambient.sizes}")
        return self.basis.conj().T @ x.vec()

    def residual(self, x: BlockElement) -> float:
        v = x.vec()
        return float(np.linalg.norm(v - self.basis @ (self.basis.conj().T @ v)))

    def contains(self, x: BlockElement, rel_tol: float = 1e-8) -> bool:
        return self.residual(x) <= rel_tol * max(1.0, float(np.linalg.norm(x.vec())))

    def element(self, coeffs) -> BlockElement:
        return self.ambient.from_vec(self.basis @ np.asarray(coeffs, dtype=complex))

    def word(self, expr: str) -> BlockElement:
        """Evaluate a polynomial in the named generators."""
        return evaluate(expr, self.env, self.ambient.identity())

    def is_selfadjoint(self) -> bool:
        return all(self.contains(b.H) for b in self.basis_elements)

    def __repr__(self) -> str:
        return f"OperatorAlgebra(dim={self.dim}, ambient={self.ambient})"


def generate_algebra(ambient: BlockShape, gens: Sequence[BlockElement],
                     names: Sequence[str] | None = None,
                     tol: ToleranceConfig = DEFAULT_TOL) -> OperatorAlgebra:
    """Unital algebra generated by ``gens`` inside ``ambient``."""
    gens = tuple(gens)
    if not gens:
        raise EmptyInput("generate_algebra needs at least one generator")
    if names is None:
        names = tuple(f"g{i}" for i in range(len(gens)))
    names = tuple(names)
    if len(names) != len(gens):
        raise ShapeMismatch("one name per generator required")
    span = generated_span(ambient, gens, star=False, tol=tol)
    basis = span.basis.copy()
    basis.setflags(write=False)
    return OperatorAlgebra(ambient, gens, names, basis, tol)


def subalgebra_from_basis(ambient: BlockShape, gens: Sequence[BlockElement], names: Sequence[str],
                          basis: np.ndarray, tol: ToleranceConfig = DEFAULT_TOL) -> OperatorAlgebra:
    basis = np.array(basis, dtype=complex)
    basis.setflags(write=False)
    return OperatorAlgebra(ambient, tuple(gens), tuple(names), basis, tol)


# ---------------------------------------------------------------------------
# linear maps out of an operator algebra


@dataclass(frozen=True, eq=False)
class AlgebraMap:
    """Linear map from ``source`` into ``target`` given on basis coefficients."""

    source: OperatorAlgebra
    target: BlockShape
    matrix: np.ndarray

    def __call__(self, x) -> BlockElement:
        c = self.source.coefficients(x) if isinstance(x, BlockElement) else np.asarray(x)
        return self.target.from_vec(self.matrix @ c)

    @cached_property
    def stacks(self) -> list[np.ndarray]:
        imgs = [self.target.from_vec(self.matrix[:, k]) for k in range(self.source.dim)]
        return [np.stack([b.blocks[i] for b in imgs]) for i in range(len(self.target))]

    def images(self) -> list[BlockElement]:
        return [self(g) for g in self.source.generators]

    def multiplicativity_error(self) -> float:
        """Largest entrywise error of rho(b_i b_j) - rho(b_i) rho(b_j) over basis pairs."""
        src = self.source
        err = 0.0
        imgs = [self.target.from_vec(self.matrix[:, k]) for k in range(src.dim)]
        for i in range(src.dim):
            for j in range(src.dim):
                lhs = self(src.products[i, j])
                rhs = imgs[i] @ imgs[j]
                err = max(err, max(float(np.abs(a - b).max()) for a, b in zip(lhs.blocks, rhs.blocks)))
        unit_err = max(float(np.abs(a - b).max()) for a, b in
                       zip(self(src.unit_coefficients).blocks, self.target.identity().blocks))
        return max(err, unit_err)


def extend_rep(A: OperatorAlgebra, target: BlockShape, images: Sequence[BlockElement],
               tol: ToleranceConfig | None = None) -> AlgebraMap:
    """Extend generator images to a unital homomorphism on all of ``A``.

    The algebra generated by the pairs ``(g, rho(g))`` is the graph of the
    extension exactly when its dimension equals ``dim A``.

    :raises NotHomomorphism: if no such extension exists
    """
    tol = tol or A.tol
    images = list(images)
    if len(images) != len(A.generators):
        raise ShapeMismatch(f"{len(images)} images for {len(A.generators)} generators")
    for y in images:
        if y.shape != target:
            raise ShapeMismatch(f"image of shape {y.shape.sizes} is not in target {target.sizes}")
    graph_shape = A.ambient.concat(target)
    pairs = [g.concat(y) for g, y in zip(A.generators, images)]
    graph = generated_span(graph_shape, pairs, star=False, tol=tol)
    if len(graph) != A.dim:
        raise NotHomomorphism(f"generator images span a graph of dimension {len(graph)}, algebra has {A.dim}")
    src = graph.basis[:A.ambient.dim, :]
    tgt = graph.basis[A.ambient.dim:, :]
    x = A.basis.conj().T @ src
    if np.linalg.cond(x) > 1e8:
        raise NotHomomorphism("generator images are not a function of the algebra elements")
    rho = AlgebraMap(A, target, tgt @ np.linalg.inv(x))
    if rho.multiplicativity_error() > max(1e-8, 100 * tol.eps_eq):
        raise NotHomomorphism("extension fails multiplicativity")
    return rho


def identity_map(A: OperatorAlgebra) -> AlgebraMap:
    return AlgebraMap(A, A.ambient, A.basis.copy())


# ---------------------------------------------------------------------------
# matrix levels


def amplify(u: np.ndarray, stack: np.ndarray) -> np.ndarray:
    """Level-k matrices for a batch of coefficient tensors.

    :param u: array ``(..., k, k, d)``
    :param stack: per-block basis ``(d, n, n)``
    :return: array ``(..., k n, k n)``
    """
    k = u.shape[-2]
    n = stack.shape[-1]
    x = np.einsum("...pql,lij->...piqj", u, stack)
    return x.reshape(*u.shape[:-3], k * n, k * n)


def _as_level_tensor(u, d: int) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.ndim == 1:
        u = u.reshape(1, 1, -1)
    if u.ndim != 3 or u.shape[0] != u.shape[1] or u.shape[2] != d:
        raise ShapeMismatch(f"coefficient tensor of shape {u.shape} does not match (k, k, {d})")
    return u


def level_norm(A: OperatorAlgebra, u) -> float:
    """Operator norm of the level-k element with coefficient tensor ``u``."""
    u = _as_level_tensor(u, A.dim)
    return max(float(np.linalg.norm(amplify(u, s), 2)) for s in A.stacks)


def coefficient_tensor(A: OperatorAlgebra, entries: Sequence[Sequence[BlockElement]]) -> np.ndarray:
    """Coefficient tensor of a k x k matrix of algebra elements."""
    k = len(entries)
    out = np.zeros((k, k, A.dim), dtype=complex)
    for p in range(k):
        if len(entries[p]) != k:
            raise ShapeMismatch("level matrix must be square")
        for q in range(k):
            out[p, q] = A.coefficients(entries[p][q])
    return out


@dataclass(frozen=True, eq=False)
class GapResult:
    """Outcome of a gap search.

    ``margin`` is the largest relative gap ``1 - ||kept|| / ||deleted||``
    seen; when positive, ``witness`` holds a coefficient tensor normalized so
    that its deleted norm is 1, making ``margin`` an absolute norm gap too.
    """

    margin: float
    level: int | None
    witness: np.ndarray | None
    levels_checked: int


def _top_sv(x: np.ndarray, k: int, n: int):
    """Top singular value and left/right vectors reshaped to ``(R, k, n)``."""
    # top eigenpair of x* x is cheaper than a full batched SVD
    w, v = np.linalg.eigh(np.swapaxes(x.conj(), -1, -2) @ x)
    right = v[..., -1]
    xr = np.einsum("rij,rj->ri", x, right)
    s = np.linalg.norm(xr, axis=1)
    left = xr / np.where(s > 0, s, 1.0)[:, None]
    return s, left.reshape(-1, k, n), right.reshape(-1, k, n)


def _side(u: np.ndarray, stacks: Sequence[np.ndarray], want_grad: bool):
    """Max block norm over ``stacks`` and its (sub)gradient, batched over restarts."""
    r, k = u.shape[0], u.shape[1]
    if not stacks:
        return np.zeros(r), np.zeros_like(u)
    best = np.full(r, -1.0)
    grad = np.zeros_like(u)
    for stack in stacks:
        n = stack.shape[-1]
        s, left, right = _top_sv(amplify(u, stack), k, n)
        better = s > best
        best = np.where(better, s, best)
        if want_grad and better.any():
            h = np.einsum("rpi,lij,rqj->rpql", left[better].conj(), stack, right[better])
            grad[better] = h.conj()
    return best, grad


def _relative_gap(sd: np.ndarray, sk: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        r = 1.0 - sk / sd
    return np.where(sd > 1e-14, r, -np.inf)


def gap_search(deleted: Sequence[np.ndarray], kept: Sequence[np.ndarray], max_level: int,
               tol: ToleranceConfig = DEFAULT_TOL, salt: Sequence[int] = (),
               iterations: int = 120, stop_margin: float = 1e-3,
               patience: int = 25, stall_tol: float = 1e-10,
               level_one_seeds: np.ndarray | None = None) -> GapResult:
    """Search for a coefficient tensor whose deleted-block norm beats its kept-block norm.

    :param deleted: per-block basis stacks ``(d, n, n)`` of the blocks being removed
    :param kept: stacks of the blocks that remain
    :param max_level: highest matrix level searched
    :param salt: labels the random stream so distinct searches are independent
    :param level_one_seeds: extra level-1 starting points, shape ``(s, d)``
    :param patience: iterations without improvement of the best restart
        (by more than ``stall_tol``) after which a level is abandoned
    """
    if not deleted:
        return GapResult(0.0, None, None, 0)
    d = deleted[0].shape[0]
    best_margin, best_level, best_u = -np.inf, None, None
    checked = 0
    for k in range(1, max_level + 1):
        checked = k
        rng = tol.rng(_SALT_GAP, k, *salt)
        R = tol.optimizer_restarts
        u = (rng.standard_normal((R, k, k, d)) + 1j * rng.standard_normal((R, k, k, d)))
        if k == 1:
            seeds = [np.eye(d, dtype=complex)]
            if kept:
                null = nullspace(np.concatenate([s.reshape(d, -1).T for s in kept], axis=0), 1e-9)
                if null.shape[1]:
                    seeds.append(null.T)
            if level_one_seeds is not None:
                seeds.append(np.asarray(level_one_seeds, dtype=complex).reshape(-1, d))
            extra = np.concatenate(seeds, axis=0).reshape(-1, 1, 1, d)
            u = np.concatenate([u, extra], axis=0)
        u /= np.linalg.norm(u.reshape(u.shape[0], -1), axis=1)[:, None, None, None]
        sd, gd = _side(u, deleted, True)
        sk, gk = _side(u, kept, True)
        cur = _relative_gap(sd, sk)
        step = np.full(u.shape[0], 0.3)
        level_best, stalled = -np.inf, 0
        for _ in range(iterations):
            i = int(np.argmax(cur))
            if cur[i] > best_margin:
                best_margin, best_level, best_u = float(cur[i]), k, u[i] / sd[i]
            if best_margin > stop_margin or np.all(step < 1e-7):
                break
            # give up on a level once the best restart stops improving
            stalled = stalled + 1 if cur[i] <= level_best + stall_tol else 0
            level_best = max(level_best, float(cur[i]))
            if stalled >= patience:
                break
            with np.errstate(divide="ignore", invalid="ignore"):
                g = (sk / sd**2)[:, None, None, None] * gd - (1.0 / sd)[:, None, None, None] * gk
            g = np.nan_to_num(g)
            # project onto the tangent space of the sphere
            flat_u = u.reshape(u.shape[0], -1)
            flat_g = g.reshape(g.shape[0], -1)
            radial = np.real(np.sum(flat_u.conj() * flat_g, axis=1))
            flat_g = flat_g - radial[:, None] * flat_u
            gn = np.linalg.norm(flat_g, axis=1)
            gn[gn == 0] = 1.0
            prop = flat_u + step[:, None] * flat_g / gn[:, None]
            prop /= np.linalg.norm(prop, axis=1)[:, None]
            prop = prop.reshape(u.shape)
            psd, pgd = _side(prop, deleted, True)
            psk, pgk = _side(prop, kept, True)
            pr = _relative_gap(psd, psk)
            accept = pr >= cur
            u = np.where(accept[:, None, None, None], prop, u)
            sd = np.where(accept, psd, sd)
            sk = np.where(accept, psk, sk)
            gd = np.where(accept[:, None, None, None], pgd, gd)
            gk = np.where(accept[:, None, None, None], pgk, gk)
            cur = np.where(accept, pr, cur)
            step = np.where(accept, np.minimum(step * 1.5, 1.0), step * 0.5)
        i = int(np.argmax(cur))
        if cur[i] > best_margin:
            best_margin, best_level, best_u = float(cur[i]), k, u[i] / sd[i]
        if best_margin > stop_margin:
            break
    if best_margin <= 0:
        return GapResult(max(best_margin, 0.0), None, None, checked)
    return GapResult(best_margin, best_level, best_u, checked)


# ---------------------------------------------------------------------------
# boundary ideals


@dataclass(frozen=True, eq=False)
class BoundaryVerdict:
    """Result of a boundary-ideal test.

    :param is_boundary: no norm-increasing witness was found at any level
    :param witness: ``(level, u)`` when the quotient is not completely isometric
    :param margin: largest observed ``||u_deleted|| - ||u_kept||`` with ``||u|| = 1``
    """

    is_boundary: bool
    witness: tuple[int, np.ndarray] | None
    margin: float
    levels_checked: int = 0

    def __post_init__(self):
        if not self.is_boundary and self.witness is None:
            raise ValueError("a negative verdict needs a witness")


def is_boundary_ideal(A: OperatorAlgebra, S: Ideal, tol: ToleranceConfig | None = None) -> BoundaryVerdict:
    """Decide whether deleting the blocks in ``S`` is completely isometric on ``A``."""
    tol = tol or A.tol
    if S.shape != A.ambient:
        raise ShapeMismatch("ideal lives over a different ambient")
    if not S.members:
        return BoundaryVerdict(True, None, 0.0, 0)
    if not S.kept:
        # deleting everything kills the unit
        return BoundaryVerdict(False, (1, A.unit_coefficients.reshape(1, 1, -1)), 1.0, 1)
    deleted = [A.stacks[i] for i in S.sorted()]
    kept = [A.stacks[i] for i in S.kept]
    res = gap_search(deleted, kept, S.deleted_dim, tol, salt=S.sorted())
    if res.margin > tol.eps_norm:
        return BoundaryVerdict(False, (res.level, res.witness), res.margin, res.levels_checked)
    return BoundaryVerdict(True, None, res.margin, res.levels_checked)


def boundary_ideals(A: OperatorAlgebra, tol: ToleranceConfig | None = None) -> list[tuple[Ideal, BoundaryVerdict]]:
    return [(S, is_boundary_ideal(A, S, tol)) for S in enumerate_ideals(A.ambient)]


def shilov_ideal(A: OperatorAlgebra, tol: ToleranceConfig | None = None) -> Ideal:
    """Largest boundary ideal of ``A`` in its ambient.

    The union of the boundary singletons is returned after re-verification.
    Should it fail, the largest verified boundary ideal is found by
    exhaustive search (first in enumeration order among the largest).
    """
    tol = tol or A.tol
    m = len(A.ambient)
    passing = [i for i in range(m) if is_boundary_ideal(A, Ideal.of(A.ambient, {i}), tol).is_boundary]
    union = Ideal.of(A.ambient, passing)
    if len(passing) <= 1 or is_boundary_ideal(A, union, tol).is_boundary:
        return union
    log.warning("union of boundary singletons %s is not boundary; falling back to exhaustive search", union)
    candidates = [S for S in enumerate_ideals(A.ambient) if S.members <= union.members]
    best = Ideal.of(A.ambient)
    for S in candidates:
        if len(S) > len(best) and is_boundary_ideal(A, S, tol).is_boundary:
            best = S
    if not is_boundary_ideal(A, best, tol).is_boundary:
        raise ShilovInconsistent(f"no boundary ideal could be verified among subsets of {union}")
    return best


def quotient_algebra(A: OperatorAlgebra, S: Ideal) -> OperatorAlgebra:
    """Image of ``A`` under deletion of the blocks in ``S``."""
    shape = quotient_shape(A.ambient, S)
    gens = [quotient(g, S) for g in A.generators]
    return generate_algebra(shape, gens, A.names, A.tol)


def envelope(A: OperatorAlgebra, tol: ToleranceConfig | None = None, check: bool = True):
    """C*-envelope of ``A`` as the quotient of its ambient by the Shilov ideal."""
    from .covers import Cover

    tol = tol or A.tol
    S = shilov_ideal(A, tol)
    shape = quotient_shape(A.ambient, S)
    cover = Cover.from_images(A, shape, [quotient(g, S) for g in A.generators], role_tag="envelope",
                              tol=tol, check_isometry=False)
    if check and shilov_ideal(quotient_algebra(A, S), tol).members:
        raise ShilovInconsistent("image of the algebra in its envelope still has a boundary ideal")
    return cover


# ---------------------------------------------------------------------------
# (semi-)Dirichlet


def _selfadjoint_span(A: OperatorAlgebra) -> SpanBuilder:
    span = SpanBuilder(A.ambient.dim, rel_tol=A.tol.eps_eq)
    for b in A.basis_elements:
        span.add(b.vec())
        span.add(b.H.vec())
    return span


def is_semi_dirichlet(A: OperatorAlgebra, rel_tol: float = 1e-8) -> bool:
    """Whether every ``a* b`` lies in ``span(A + A*)``."""
    span = _selfadjoint_span(A)
    elems = A.basis_elements
    return all(span.contains((a.H @ b).vec(), rel_tol) for a in elems for b in elems)


def is_dirichlet(A: OperatorAlgebra) -> bool:
    """Whether ``A + A*`` already spans the C*-algebra generated by ``A``."""
    cstar = generated_span(A.ambient, A.basis_elements, star=True, tol=A.tol)
    return len(_selfadjoint_span(A)) == len(cstar)
