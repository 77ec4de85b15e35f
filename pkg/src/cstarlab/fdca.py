"""Finite-dimensional C*-algebras as direct sums of full matrix blocks.

Ideals of ``M_{n_1} + ... + M_{n_m}`` are exactly the block subsets, so an
:class:`Ideal` is just a set of block indices (0-based).  Unital
*-homomorphisms are stored in the standard "multiplicity + unitary" form of
:class:`StarHomData`.  :func:`star_structure` recovers that block form for any
*-subalgebra given by generators.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.linalg import block_diag

from .errors import (EmptyQuotient, NotHomomorphism, ShapeMismatch,
                     TooManyBlocks)
from .matcore import (DEFAULT_TOL, SpanBuilder, ToleranceConfig, as_matrix,
                      dedupe_sorted, nullspace)

MAX_BLOCKS = 20


@dataclass(frozen=True)
class BlockShape:
    """Block sizes ``[n_1, ..., n_m]``.

    ``origin`` records, for shapes produced by a quotient, which block of the
    parent shape each surviving block came from.  It is metadata only and
    does not take part in equality.
    """

    sizes: tuple[int, ...]
    origin: tuple[int, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.sizes)
        if len(sizes) < 1 or any(n < 1 for n in sizes):
            raise ShapeMismatch(f"block sizes must be positive and non-empty, got {self.sizes}")
        object.__setattr__(self, "sizes", sizes)
        if self.origin is not None:
            object.__setattr__(self, "origin", tuple(int(i) for i in self.origin))

    def __len__(self) -> int:
        return len(self.sizes)

    @property
    def total(self) -> int:
        """Dimension of the Hilbert space the algebra acts on."""
        return sum(self.sizes)

    @property
    def dim(self) -> int:
        """Vector-space dimension of the algebra."""
        return sum(n * n for n in self.sizes)

    @cached_property
    def offsets(self) -> tuple[int, ...]:
        return tuple(np.cumsum([0] + [n * n for n in self.sizes]).tolist())

    def concat(self, other: "BlockShape") -> "BlockShape":
        return BlockShape(self.sizes + other.sizes)

    def zeros(self) -> "BlockElement":
        return BlockElement(self, tuple(np.zeros((n, n), dtype=complex) for n in self.sizes))

    def identity(self) -> "BlockElement":
        return BlockElement(self, tuple(np.eye(n, dtype=complex) for n in self.sizes))

    def unit(self, block: int, a: int, b: int) -> "BlockElement":
        """Matrix unit e_ab inside block ``block``."""
        blocks = [np.zeros((n, n), dtype=complex) for n in self.sizes]
        blocks[block][a, b] = 1.0
        return BlockElement(self, tuple(blocks))

    def block_units(self, block: int) -> list["BlockElement"]:
        n = self.sizes[block]
        return [self.unit(block, a, b) for a in range(n) for b in range(n)]

    def random_element(self, rng: np.random.Generator) -> "BlockElement":
        return BlockElement(self, tuple(
            (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
            for n in self.sizes))

    def from_vec(self, v: np.ndarray) -> "BlockElement":
        v = np.asarray(v, dtype=complex).ravel()
        if v.size != self.dim:
            raise ShapeMismatch(f"vector of length {v.size} does not fit shape {self.sizes}")
        off = self.offsets
        return BlockElement(self, tuple(v[off[i]:off[i + 1]].reshape(n, n)
                                        for i, n in enumerate(self.sizes)))

    def __str__(self) -> str:
        return " + ".join("C" if n == 1 else f"M{n}" for n in self.sizes)


def shape_of(sizes: Iterable[int] | BlockShape) -> BlockShape:
    return sizes if isinstance(sizes, BlockShape) else BlockShape(tuple(sizes))


@dataclass(frozen=True, eq=False)
class BlockElement:
    """An element of ``M_{n_1} + ... + M_{n_m}`` stored block by block."""

    shape: BlockShape
    blocks: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.blocks) != len(self.shape):
            raise ShapeMismatch(f"{len(self.blocks)} blocks for shape {self.shape.sizes}")
        fixed = []
        for i, (b, n) in enumerate(zip(self.blocks, self.shape.sizes)):
            arr = as_matrix(b, name=f"block {i}").copy()
            if arr.shape != (n, n):
                raise ShapeMismatch(f"block {i} has shape {arr.shape}, expected {(n, n)}")
            arr.setflags(write=False)
            fixed.append(arr)
        object.__setattr__(self, "blocks", tuple(fixed))

    @classmethod
    def of(cls, *blocks) -> "BlockElement":
        arrs = [as_matrix(b) for b in blocks]
        return cls(BlockShape(tuple(a.shape[0] for a in arrs)), tuple(arrs))

    def _check(self, other: "BlockElement"):
        if self.shape != other.shape:
            raise ShapeMismatch(f"shapes {self.shape.sizes} and {other.shape.sizes} differ")

    def __add__(self, other):
        self._check(other)
        return BlockElement(self.shape, tuple(a + b for a, b in zip(self.blocks, other.blocks)))

    def __sub__(self, other):
        self._check(other)
        return BlockElement(self.shape, tuple(a - b for a, b in zip(self.blocks, other.blocks)))

    def __neg__(self):
        return BlockElement(self.shape, tuple(-a for a in self.blocks))

    def __mul__(self, scalar):
        if isinstance(scalar, BlockElement):
            return NotImplemented
        return BlockElement(self.shape, tuple(complex(scalar) * a for a in self.blocks))

    __rmul__ = __mul__

    def __matmul__(self, other):
        self._check(other)
        return BlockElement(self.shape, tuple(a @ b for a, b in zip(self.blocks, other.blocks)))

    @property
    def H(self) -> "BlockElement":
        return BlockElement(self.shape, tuple(a.conj().T for a in self.blocks))

    def norm(self) -> float:
        return max(float(np.linalg.norm(b, 2)) for b in self.blocks)

    def vec(self) -> np.ndarray:
        return np.concatenate([b.ravel() for b in self.blocks])

    def dense(self) -> np.ndarray:
        return block_diag(*self.blocks)

    def restrict(self, keep: Sequence[int]) -> "BlockElement":
        keep = list(keep)
        origin = self.shape.origin or tuple(range(len(self.shape)))
        shape = BlockShape(tuple(self.shape.sizes[i] for i in keep),
                           origin=tuple(origin[i] for i in keep))
        return BlockElement(shape, tuple(self.blocks[i] for i in keep))

    def concat(self, other: "BlockElement") -> "BlockElement":
        return BlockElement(self.shape.concat(other.shape), self.blocks + other.blocks)

    def allclose(self, other: "BlockElement", atol: float) -> bool:
        self._check(other)
        return all(np.abs(a - b).max() <= atol for a, b in zip(self.blocks, other.blocks))

    def is_selfadjoint(self, atol: float) -> bool:
        return self.allclose(self.H, atol)

    def __repr__(self) -> str:
        return f"BlockElement({self.shape.sizes}, {[b.tolist() for b in self.blocks]})"


@dataclass(frozen=True)
class Ideal:
    """Closed two-sided ideal, given by the set of blocks it contains."""

    shape: BlockShape
    members: frozenset[int]

    def __post_init__(self):
        members = frozenset(int(i) for i in self.members)
        bad = [i for i in members if not 0 <= i < len(self.shape)]
        if bad:
            raise ShapeMismatch(f"block indices {sorted(bad)} out of range for {self.shape.sizes}")
        object.__setattr__(self, "members", members)

    @classmethod
    def of(cls, shape, members: Iterable[int] = ()) -> "Ideal":
        return cls(shape_of(shape), frozenset(members))

    @property
    def kept(self) -> list[int]:
        return [i for i in range(len(self.shape)) if i not in self.members]

    @property
    def deleted_dim(self) -> int:
        """Total size of the deleted blocks (the Hilbert-space dimension they act on)."""
        return sum(self.shape.sizes[i] for i in self.members)

    def __or__(self, other: "Ideal") -> "Ideal":
        return Ideal(self.shape, self.members | other.members)

    def __le__(self, other: "Ideal") -> bool:
        return self.members <= other.members

    def __lt__(self, other: "Ideal") -> bool:
        return self.members < other.members

    def __len__(self) -> int:
        return len(self.members)

    def sorted(self) -> list[int]:
        return sorted(self.members)

    def __str__(self) -> str:
        return "{" + ", ".join(str(i) for i in self.sorted()) + "}"


def quotient_shape(shape: BlockShape, ideal: Ideal) -> BlockShape:
    if ideal.shape != shape:
        raise ShapeMismatch("ideal lives over a different shape")
    keep = ideal.kept
    if not keep:
        raise EmptyQuotient("quotient by the whole algebra is not unital")
    origin = shape.origin or tuple(range(len(shape)))
    return BlockShape(tuple(shape.sizes[i] for i in keep), origin=tuple(origin[i] for i in keep))


def quotient(x: BlockElement, ideal: Ideal) -> BlockElement:
    """Image of ``x`` under the quotient map by ``ideal`` (block deletion)."""
    if ideal.shape != x.shape:
        raise ShapeMismatch("ideal lives over a different shape")
    if not ideal.kept:
        raise EmptyQuotient("quotient by the whole algebra is not unital")
    return x.restrict(ideal.kept)


def enumerate_ideals(shape: BlockShape) -> list[Ideal]:
    """All block subsets, ordered by cardinality then lexicographically."""
    m = len(shape)
    if m > MAX_BLOCKS:
        raise TooManyBlocks(f"{m} blocks exceeds the enumeration guard of {MAX_BLOCKS}")
    return [Ideal(shape, frozenset(c))
            for k in range(m + 1) for c in itertools.combinations(range(m), k)]


@dataclass(frozen=True, eq=False)
class StarHomData:
    """Unital *-homomorphism in standard form.

    Block ``i`` of the image of ``x`` is
    ``U_i (x_0 (+) ... x_0 (+) x_1 (+) ...) U_i*`` where ``x_j`` is repeated
    ``multiplicity[i][j]`` times.
    """

    source: BlockShape
    target: BlockShape
    multiplicity: tuple[tuple[int, ...], ...]
    conjugators: tuple[np.ndarray, ...]

    def __post_init__(self):
        mult = tuple(tuple(int(v) for v in row) for row in self.multiplicity)
        object.__setattr__(self, "multiplicity", mult)
        if len(mult) != len(self.target) or any(len(r) != len(self.source) for r in mult):
            raise ShapeMismatch("multiplicity matrix must be target-blocks x source-blocks")
        if any(v < 0 for r in mult for v in r):
            raise ShapeMismatch("multiplicities must be nonnegative")
        for i, row in enumerate(mult):
            if sum(v * n for v, n in zip(row, self.source.sizes)) != self.target.sizes[i]:
                raise NotHomomorphism(f"target block {i} is not filled unitally by {row}")
        conj = []
        for i, u in enumerate(self.conjugators):
            u = as_matrix(u, name=f"conjugator {i}").copy()
            n = self.target.sizes[i]
            if u.shape != (n, n):
                raise ShapeMismatch(f"conjugator {i} has shape {u.shape}, expected {(n, n)}")
            if np.abs(u.conj().T @ u - np.eye(n)).max() > 1e-8:
                raise NotHomomorphism(f"conjugator {i} is not unitary")
            u.setflags(write=False)
            conj.append(u)
        if len(conj) != len(self.target):
            raise ShapeMismatch("one conjugator per target block required")
        object.__setattr__(self, "conjugators", tuple(conj))

    @property
    def is_injective(self) -> bool:
        return all(any(row[j] for row in self.multiplicity) for j in range(len(self.source)))

    def __call__(self, x: BlockElement) -> BlockElement:
        return apply_hom(self, x)


def identity_hom(shape: BlockShape) -> StarHomData:
    m = len(shape)
    mult = tuple(tuple(int(i == j) for j in range(m)) for i in range(m))
    return StarHomData(shape, shape, mult, tuple(np.eye(n) for n in shape.sizes))


def apply_hom(h: StarHomData, x: BlockElement) -> BlockElement:
    if x.shape != h.source:
        raise ShapeMismatch(f"element of shape {x.shape.sizes} fed to hom from {h.source.sizes}")
    out = []
    for row, u in zip(h.multiplicity, h.conjugators):
        parts = [x.blocks[j] for j, r in enumerate(row) for _ in range(r)]
        d = block_diag(*parts)
        out.append(u @ d @ u.conj().T)
    return BlockElement(h.target, tuple(out))


def star_hom_from_map(source: BlockShape, target: BlockShape,
                      phi: Callable[[BlockElement], BlockElement],
                      tol: ToleranceConfig = DEFAULT_TOL) -> StarHomData:
    """Standard form of a unital *-homomorphism given as a black-box linear map.

    Only the images of the matrix units ``e_a1`` and ``e_11`` of each source
    block are evaluated.
    """
    mult_rows = [[0] * len(source) for _ in target.sizes]
    columns: list[list[np.ndarray]] = [[] for _ in target.sizes]
    for j, n in enumerate(source.sizes):
        e11 = phi(source.unit(j, 0, 0))
        col_images = [phi(source.unit(j, a, 0)) for a in range(n)]
        for i in range(len(target)):
            p = 0.5 * (e11.blocks[i] + e11.blocks[i].conj().T)
            vals, vecs = np.linalg.eigh(p)
            w = vecs[:, vals > 0.5]
            mult_rows[i][j] = w.shape[1]
            for r in range(w.shape[1]):
                for a in range(n):
                    columns[i].append(col_images[a].blocks[i] @ w[:, r])
    conj = []
    for i, cols in enumerate(columns):
        if len(cols) != target.sizes[i]:
            raise NotHomomorphism(f"map is not unital on target block {i}")
        conj.append(np.stack(cols, axis=1))
    return StarHomData(source, target, tuple(tuple(r) for r in mult_rows), tuple(conj))


# ---------------------------------------------------------------------------
# generated (*-)subalgebras


def _batch_blocks(shape: BlockShape, vecs: np.ndarray) -> list[np.ndarray]:
    """Split column vectors (dim x k) into per-block stacks (k, n, n)."""
    off = shape.offsets
    return [vecs[off[i]:off[i + 1], :].T.reshape(-1, n, n) for i, n in enumerate(shape.sizes)]


def _unbatch(blocks: list[np.ndarray]) -> np.ndarray:
    return np.concatenate([b.reshape(b.shape[0], -1) for b in blocks], axis=1).T


def generated_span(shape: BlockShape, elements: Sequence[BlockElement], *, star: bool,
                   tol: ToleranceConfig = DEFAULT_TOL, max_rounds: int | None = None) -> SpanBuilder:
    """Orthonormal basis of the unital (*-)algebra generated by ``elements``.

    The span of words is grown by left multiplication with the generators
    (and their adjoints when ``star``) until it stops growing.
    """
    gens = list(elements)
    for g in gens:
        if g.shape != shape:
            raise ShapeMismatch(f"generator of shape {g.shape.sizes} in ambient {shape.sizes}")
    if star:
        gens = gens + [g.H for g in gens]
    scale = max([1.0] + [g.norm() for g in gens])
    # products of unit vectors with generators that vanish exactly come back as
    # rounding noise; the absolute floor keeps them out of the span
    span = SpanBuilder(shape.dim, rel_tol=tol.eps_eq, abs_floor=1e3 * np.finfo(float).eps * scale)
    span.add(shape.identity().vec())
    frontier = [0]
    gen_blocks = [[g.blocks[i] for g in gens] for i in range(len(shape))]
    rounds = max_rounds if max_rounds is not None else shape.total ** 2 + 1
    for _ in range(rounds):
        if not frontier or not gens:
            break
        cur = span.basis[:, frontier]
        cur_blocks = _batch_blocks(shape, cur)
        new_start = len(span)
        for gi in range(len(gens)):
            prod = _unbatch([gen_blocks[i][gi][None] @ cur_blocks[i] for i in range(len(shape))])
            for c in range(prod.shape[1]):
                span.add(prod[:, c])
        frontier = list(range(new_start, len(span)))
    return span


@dataclass(frozen=True, eq=False)
class StarStructure:
    """A *-subalgebra B of ``ambient`` together with a *-isomorphism onto ``shape``.

    ``units[k]`` has shape ``(m_k, m_k, ambient.dim)``: the ambient vectors of
    the matrix units of the k-th simple summand of B.
    """

    ambient: BlockShape
    shape: BlockShape
    units: tuple[np.ndarray, ...]
    basis: np.ndarray

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def contains(self, x: BlockElement, rel_tol: float = 1e-8) -> bool:
        v = x.vec()
        r = v - self.basis @ (self.basis.conj().T @ v)
        return np.linalg.norm(r) <= rel_tol * max(1.0, np.linalg.norm(v))

    def to_coords(self, x: BlockElement) -> BlockElement:
        if x.shape != self.ambient:
            raise ShapeMismatch("element is not in the ambient of this structure")
        v = x.vec()
        blocks = []
        for u in self.units:
            m = u.shape[0]
            weight = np.real(np.vdot(u[0, 0], u[0, 0]))
            blocks.append((u.conj() @ v).reshape(m, m) / weight)
        return BlockElement(self.shape, tuple(blocks))

    def from_coords(self, y: BlockElement) -> BlockElement:
        if y.shape != self.shape:
            raise ShapeMismatch("coordinates do not match the structure shape")
        v = np.zeros(self.ambient.dim, dtype=complex)
        for u, b in zip(self.units, y.blocks):
            v += np.tensordot(b, u, axes=([0, 1], [0, 1]))
        return self.ambient.from_vec(v)

    def embedding(self, tol: ToleranceConfig = DEFAULT_TOL) -> StarHomData:
        """Standard form of the inclusion B -> ambient."""
        return star_hom_from_map(self.shape, self.ambient, self.from_coords, tol)


def _cluster(values: np.ndarray, resolution: float) -> list[list[int]]:
    order = np.argsort(values, kind="stable")
    groups: list[list[int]] = []
    last = None
    for idx in order:
        v = values[idx]
        if last is None or v - last > resolution:
            groups.append([])
        groups[-1].append(int(idx))
        last = v
    return groups


def _spectral_projections(shape: BlockShape, h: BlockElement, support: BlockElement | None,
                          resolution: float) -> list[BlockElement]:
    """Spectral projections of self-adjoint ``h``, grouping equal eigenvalues across blocks.

    When ``support`` (a projection) is given only its range is decomposed.
    """
    vals, owners, vecs = [], [], []
    for i, hb in enumerate(h.blocks):
        if support is None:
            w = np.eye(hb.shape[0], dtype=complex)
        else:
            pv, pw = np.linalg.eigh(0.5 * (support.blocks[i] + support.blocks[i].conj().T))
            w = pw[:, pv > 0.5]
        if w.shape[1] == 0:
            continue
        comp = w.conj().T @ hb @ w
        ev, evec = np.linalg.eigh(0.5 * (comp + comp.conj().T))
        for k in range(ev.size):
            vals.append(ev[k])
            owners.append(i)
            vecs.append(w @ evec[:, k])
    groups = _cluster(np.array(vals), resolution)
    projs = []
    for g in groups:
        blocks = [np.zeros((n, n), dtype=complex) for n in shape.sizes]
        for idx in g:
            v = vecs[idx]
            blocks[owners[idx]] += np.outer(v, v.conj())
        projs.append(BlockElement(shape, tuple(blocks)))
    return projs


def _random_selfadjoint(shape: BlockShape, basis: np.ndarray, rng: np.random.Generator) -> BlockElement:
    c = rng.standard_normal(basis.shape[1]) + 1j * rng.standard_normal(basis.shape[1])
    x = shape.from_vec(basis @ c)
    return 0.5 * (x + x.H)


def _first_position(p: BlockElement) -> tuple[int, int]:
    for i, b in enumerate(p.blocks):
        d = np.real(np.diag(b))
        hits = np.nonzero(d > 0.25)[0]
        if hits.size:
            return (i, int(hits[0]))
    return (len(p.blocks), 0)


def star_structure(shape: BlockShape, elements: Sequence[BlockElement],
                   tol: ToleranceConfig = DEFAULT_TOL, attempts: int = 8) -> StarStructure:
    """Decompose the C*-algebra generated by ``elements`` into full matrix blocks.

    Summands are ordered by where their central projection first appears on
    the ambient diagonal.
    """
    span = generated_span(shape, elements, star=True, tol=tol)
    basis = span.basis
    if basis.shape[1] == shape.dim:
        # the whole ambient: keep its own matrix units
        units = []
        for i, n in enumerate(shape.sizes):
            e = np.zeros((n, n, shape.dim), dtype=complex)
            for a in range(n):
                for b in range(n):
                    e[a, b] = shape.unit(i, a, b).vec()
            units.append(e)
        return StarStructure(shape, BlockShape(shape.sizes), tuple(units), basis)
    gens = list(elements) + [g.H for g in elements]
    rng = tol.rng(0x5EED, len(shape), basis.shape[1])
    resolution = 1e-6

    # centre of B: elements of B commuting with every generator
    if gens:
        rows = []
        cols = [shape.from_vec(basis[:, k]) for k in range(basis.shape[1])]
        for g in gens:
            rows.append(np.stack([(g @ c - c @ g).vec() for c in cols], axis=1))
        centre_coeffs = nullspace(np.concatenate(rows, axis=0), 1e-9)
    else:
        centre_coeffs = np.eye(basis.shape[1], dtype=complex)
    centre = basis @ centre_coeffs
    n_summands = centre.shape[1]

    for _ in range(attempts):
        central = _random_selfadjoint(shape, centre, rng)
        projections = _spectral_projections(shape, central, None, resolution)
        projections = [p for p in projections if p.norm() > 0.5]
        # the spectral projections of h may include ambient directions on which
        # every central element vanishes only if the unit is missing; unit is in B
        if len(projections) == n_summands:
            break
    else:
        raise NotHomomorphism("could not separate the centre of the generated C*-algebra")
    projections.sort(key=_first_position)

    units = []
    sizes = []
    for p in projections:
        sub = SpanBuilder(shape.dim, rel_tol=1e-9, abs_floor=1e-10)
        for k in range(basis.shape[1]):
            sub.add((p @ shape.from_vec(basis[:, k])).vec())
        d = len(sub)
        m = int(round(np.sqrt(d)))
        if m * m != d:
            raise NotHomomorphism(f"summand of dimension {d} is not a full matrix algebra")
        for _ in range(attempts):
            h = _random_selfadjoint(shape, sub.basis, rng)
            minimal = _spectral_projections(shape, h, p, resolution)
            if len(minimal) == m:
                break
        else:
            raise NotHomomorphism("could not split a simple summand into minimal projections")
        e = np.zeros((m, m, shape.dim), dtype=complex)
        e[0, 0] = minimal[0].vec()
        links = [minimal[0]]
        for a in range(1, m):
            for _ in range(attempts):
                b = shape.from_vec(sub.basis @ (rng.standard_normal(d) + 1j * rng.standard_normal(d)))
                v = minimal[0] @ b @ minimal[a]
                lam = np.real(np.trace((v @ v.H).dense())) / np.real(np.trace(minimal[0].dense()))
                if lam > 1e-8:
                    break
            else:
                raise NotHomomorphism("minimal projections are not linked inside the summand")
            links.append((1.0 / np.sqrt(lam)) * v)
        for a in range(m):
            for b in range(m):
                left = minimal[0] if a == 0 else links[a].H
                right = minimal[0] if b == 0 else links[b]
                e[a, b] = (left @ right).vec()
        units.append(e)
        sizes.append(m)
    structure = StarStructure(shape, BlockShape(tuple(sizes)), tuple(units), basis)
    total = sum(m * m for m in sizes)
    if total != basis.shape[1]:
        raise NotHomomorphism(f"summands span {total} dimensions, algebra has {basis.shape[1]}")
    return structure


def generates_shape(shape: BlockShape, elements: Sequence[BlockElement],
                    tol: ToleranceConfig = DEFAULT_TOL) -> bool:
    """True iff the *-algebra generated by ``elements`` is all of ``shape``."""
    return len(generated_span(shape, elements, star=True, tol=tol)) == shape.dim


def spectrum_values(x: BlockElement, tol: ToleranceConfig = DEFAULT_TOL) -> list[float]:
    """Deduplicated spectrum of a self-adjoint block element."""
    from .matcore import herm_eigs
    vals = np.sort(np.concatenate([herm_eigs(b, tol) for b in x.blocks]))
    return dedupe_sorted(vals, tol.eps_eq * max(1.0, float(np.abs(vals).max())))
