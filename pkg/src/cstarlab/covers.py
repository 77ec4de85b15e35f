"""C*-covers of an operator algebra relative to a fixed finite ambient.

A :class:`Cover` is a completely isometric unital homomorphism of an
:class:`OperatorAlgebra` into a block C*-algebra whose image generates the
target.  Covers are ordered by the existence of an intertwining
*-homomorphism, found by :func:`find_morphism` as a finite search over
multiplicity patterns followed by a linear solve for the conjugating unitary.

When a set of generator images only generates a proper C*-subalgebra of the
block algebra they live in, :func:`generated_cover` decomposes that
subalgebra into blocks and re-expresses the images in those coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import (BaseMismatch, ImageNotIdeal, NotCover, NotHermitian,
                     NotHomomorphism, NotShilov, ShilovInconsistent)
from .fdca import (BlockElement, BlockShape, Ideal, StarHomData, generated_span,
                   quotient, quotient_shape, star_hom_from_map,
                   star_structure)
from .matcore import (SpanBuilder, ToleranceConfig, dedupe_sorted,
                      herm_eigs, nullspace, polar_unitary)
from .opalg import (AlgebraMap, GapResult, OperatorAlgebra, extend_rep, gap_search,
                    generate_algebra, is_boundary_ideal, shilov_ideal)
from .words import evaluate

ROLE_TAGS = ("ambient", "envelope", "quotient", "join", "induced", "custom")
MAX_PATTERNS = 1000
_SALT_HOM = 0x40A


@dataclass(frozen=True, eq=False)
class IsometryReport:
    """Gap searches in both directions for a candidate complete isometry.

    ``expanding`` looks for ``||rho(u)|| > ||u||`` and ``shrinking`` for
    ``||rho(u)|| < ||u||``.
    """

    expanding: GapResult
    shrinking: GapResult
    eps: float

    @property
    def ok(self) -> bool:
        return self.expanding.margin <= self.eps and self.shrinking.margin <= self.eps


def isometry_report(rho: AlgebraMap, tol: ToleranceConfig | None = None,
                    max_level: int | None = None) -> IsometryReport:
    """Check that ``rho`` is completely isometric.

    Expansion is searched up to the size of the target and shrinkage up to
    the size of the source ambient; ``max_level`` caps both.
    """
    tol = tol or rho.source.tol
    src = rho.source
    k_exp = rho.target.total if max_level is None else min(max_level, rho.target.total)
    k_shr = src.ambient.total if max_level is None else min(max_level, src.ambient.total)
    expanding = gap_search(rho.stacks, src.stacks, k_exp, tol, salt=(1,))
    shrinking = gap_search(src.stacks, rho.stacks, k_shr, tol, salt=(2,))
    return IsometryReport(expanding, shrinking, tol.eps_norm)


@dataclass(frozen=True, eq=False)
class Cover:
    """A C*-cover ``(target, rep)`` of ``base``.

    :param images: images of ``base.generators`` in ``target``
    :param rep: the extension of ``images`` to all of ``base``
    :param certificates: optional *-homomorphisms out of this cover
        recorded at construction time (e.g. the projections of a join)
    """

    base: OperatorAlgebra
    target: BlockShape
    images: tuple[BlockElement, ...]
    role_tag: str
    rep: AlgebraMap
    certificates: tuple[StarHomData, ...] = ()

    @classmethod
    def from_images(cls, base: OperatorAlgebra, target: BlockShape, images: Sequence[BlockElement],
                    role_tag: str = "custom", tol: ToleranceConfig | None = None,
                    check_isometry: bool = True, max_level: int | None = None,
                    certificates: Sequence[StarHomData] = ()) -> "Cover":
        """Validate and build a cover.

        :raises NotCover: if the images do not extend to a homomorphism, do
            not generate ``target``, or (when checked) fail complete isometry
        """
        tol = tol or base.tol
        if role_tag not in ROLE_TAGS:
            raise ValueError(f"unknown role tag {role_tag!r}")
        try:
            rep = extend_rep(base, target, images, tol)
        except NotHomomorphism as exc:
            raise NotCover(str(exc)) from exc
        if len(generated_span(target, images, star=True, tol=tol)) != target.dim:
            raise NotCover("images do not generate the target C*-algebra")
        cover = cls(base, target, tuple(images), role_tag, rep, tuple(certificates))
        if check_isometry:
            report = isometry_report(rep, tol, max_level)
            if not report.ok:
                raise NotCover(f"representation is not completely isometric "
                               f"(gaps {report.expanding.margin:.3g}, {report.shrinking.margin:.3g})")
        return cover

    @classmethod
    def ambient(cls, A: OperatorAlgebra, tol: ToleranceConfig | None = None) -> "Cover":
        """The C*-algebra generated by ``A`` inside its ambient, as a cover."""
        return generated_cover(A, A.ambient, A.generators, "ambient", tol, check_isometry=False)

    @property
    def env(self) -> dict[str, BlockElement]:
        return dict(zip(self.base.names, self.images))

    def word(self, expr: str) -> BlockElement:
        return evaluate(expr, self.env, self.target.identity())

    def verify(self, tol: ToleranceConfig | None = None, max_level: int | None = None) -> IsometryReport:
        return isometry_report(self.rep, tol or self.base.tol, max_level)

    def __repr__(self) -> str:
        return f"Cover({self.role_tag}: {self.target})"


def generated_cover(base: OperatorAlgebra, shape: BlockShape, images: Sequence[BlockElement],
                    role_tag: str, tol: ToleranceConfig | None = None, check_isometry: bool = True,
                    max_level: int | None = None) -> Cover:
    """Cover onto the C*-algebra generated by ``images`` inside ``shape``.

    Records the inclusion of the generated algebra into ``shape`` as the
    first certificate when the two differ.
    """
    tol = tol or base.tol
    images = list(images)
    span = generated_span(shape, images, star=True, tol=tol)
    if len(span) == shape.dim:
        return Cover.from_images(base, shape, images, role_tag, tol, check_isometry, max_level)
    st = star_structure(shape, images, tol)
    coords = [st.to_coords(y) for y in images]
    return Cover.from_images(base, st.shape, coords, role_tag, tol, check_isometry, max_level)


def _same_base(c1: Cover, c2: Cover) -> bool:
    a, b = c1.base, c2.base
    if a is b:
        return True
    if a.ambient != b.ambient or len(a.generators) != len(b.generators):
        return False
    return all(x.allclose(y, 1e-12) for x, y in zip(a.generators, b.generators))


def _check_base(c1: Cover, c2: Cover):
    if not _same_base(c1, c2):
        raise BaseMismatch("covers are of different operator algebras")


# ---------------------------------------------------------------------------
# morphism search


def multiplicity_rows(source: Sequence[int], total: int, cap: int = MAX_PATTERNS) -> list[tuple[int, ...]]:
    """Nonnegative ``m`` with ``sum m_j n_j = total``, in lexicographic order."""
    rows: list[tuple[int, ...]] = []

    def rec(j: int, left: int, acc: list[int]):
        if len(rows) >= cap:
            return
        if j == len(source):
            if left == 0:
                rows.append(tuple(acc))
            return
        for m in range(left // source[j] + 1):
            rec(j + 1, left - m * source[j], acc + [m])

    rec(0, total, [])
    return rows


def _words_for(images: Sequence[BlockElement]) -> list[BlockElement]:
    out = []
    for g in images:
        out.extend([g, g.H @ g, g @ g.H])
    return out


def _fit_block(ys: Sequence[np.ndarray], xs: Sequence[Sequence[np.ndarray]], row: tuple[int, ...],
               rng: np.random.Generator, atol: float) -> np.ndarray | None:
    """Unitary ``U`` with ``U D(g) U* = Y(g)`` for every generator, or None."""
    ds = []
    for gx in xs:
        parts = [gx[j] for j, r in enumerate(row) for _ in range(r)]
        ds.append(_block_diag(parts))
    n = ys[0].shape[0]
    eye = np.eye(n)
    rows = []
    for y, dmat in zip(ys, ds):
        for yy, dd in ((y, dmat), (y.conj().T, dmat.conj().T)):
            # row-major vec: vec(Y U) = (Y kron I) vec U, vec(U D) = (I kron D^T) vec U
            rows.append(np.kron(yy, eye) - np.kron(eye, dd.T))
    null = nullspace(np.concatenate(rows, axis=0), 1e-9)
    if null.shape[1] == 0:
        return None
    c = rng.standard_normal(null.shape[1]) + 1j * rng.standard_normal(null.shape[1])
    u0 = (null @ c).reshape(n, n)
    if np.linalg.svd(u0, compute_uv=False)[-1] < 1e-8 * np.linalg.norm(u0):
        return None
    u = polar_unitary(u0)
    for y, dmat in zip(ys, ds):
        if np.abs(u @ dmat @ u.conj().T - y).max() > atol:
            return None
    return u


def _block_diag(parts: Sequence[np.ndarray]) -> np.ndarray:
    from scipy.linalg import block_diag
    return block_diag(*parts)


def find_morphism(c1: Cover, c2: Cover, tol: ToleranceConfig | None = None) -> StarHomData | None:
    """The *-homomorphism ``h`` with ``h(rep1(g)) = rep2(g)`` for all generators, if any."""
    _check_base(c1, c2)
    tol = tol or c1.base.tol
    src, tgt = c1.target, c2.target
    scale = max([1.0] + [y.norm() for y in c2.images])
    atol = tol.eps_eq * scale
    rng = tol.rng(_SALT_HOM, len(src), len(tgt))
    x_words = _words_for(c1.images)
    y_words = _words_for(c2.images)
    x_tr = np.array([[np.trace(b) for b in w.blocks] for w in x_words])
    mult, conj = [], []
    for i, n_i in enumerate(tgt.sizes):
        y_tr = np.array([np.trace(w.blocks[i]) for w in y_words])
        ys = [y.blocks[i] for y in c2.images]
        xs = [x.blocks for x in c1.images]
        found = None
        for row in multiplicity_rows(src.sizes, n_i):
            if np.abs(x_tr @ np.array(row) - y_tr).max() > 1e-8 * max(1.0, np.abs(y_tr).max()):
                continue
            u = _fit_block(ys, xs, row, rng, atol)
            if u is not None:
                found = (row, u)
                break
        if found is None:
            return None
        mult.append(found[0])
        conj.append(found[1])
    try:
        return StarHomData(src, tgt, tuple(mult), tuple(conj))
    except NotHomomorphism:
        return None


def morphism_error(h: StarHomData, c1: Cover, c2: Cover) -> float:
    """Largest entrywise error of ``h(rep1(g)) - rep2(g)`` over generators."""
    err = 0.0
    for x, y in zip(c1.images, c2.images):
        hx = h(x)
        err = max(err, max(float(np.abs(a - b).max()) for a, b in zip(hx.blocks, y.blocks)))
    return err


# ---------------------------------------------------------------------------
# fingerprints and comparison


def spectral_fingerprint(c: Cover, word: str, tol: ToleranceConfig | None = None) -> list[float]:
    """Distinct eigenvalues of a self-adjoint word evaluated in the cover.

    :raises NotHermitian: if the evaluated word is not self-adjoint
    """
    tol = tol or c.base.tol
    x = c.word(word)
    scale = max(1.0, x.norm())
    if not x.allclose(x.H, tol.eps_eq * scale):
        raise NotHermitian(f"word {word!r} does not evaluate to a self-adjoint element")
    vals = np.sort(np.concatenate([herm_eigs(b, tol.with_(eps_eq=tol.eps_eq * scale)) for b in x.blocks]))
    return dedupe_sorted(vals, tol.eps_eq * scale)


def obstruction_words(names: Sequence[str]) -> list[str]:
    out = []
    for g in names:
        out += [f"{g}* {g}", f"{g} {g}*", f"{g} + {g}*", f"1i {g} - 1i {g}*"]
    return out


def _not_contained(small: Sequence[float], big: Sequence[float], atol: float) -> list[float]:
    big = np.asarray(big)
    return [v for v in small if np.abs(big - v).min() > atol]


def find_obstruction(c1: Cover, c2: Cover, tol: ToleranceConfig | None = None,
                     atol: float = 1e-8) -> tuple[str, list[float]] | None:
    """A Hermitian word whose spectrum in ``c2`` is not inside its spectrum in ``c1``.

    Such a word rules out any morphism ``c1 -> c2``, since *-homomorphisms
    can only shrink spectra.
    """
    for w in obstruction_words(c1.base.names):
        f1 = spectral_fingerprint(c1, w, tol)
        f2 = spectral_fingerprint(c2, w, tol)
        extra = _not_contained(f2, f1, atol)
        if extra:
            return w, extra
    return None


@dataclass(frozen=True, eq=False)
class CoverOrder:
    """Relation between two covers, with certificates.

    ``morphism`` maps the dominating cover onto the other (first onto second
    for ``first_dominates`` and ``equivalent``); ``reverse`` is the second
    onto the first when it exists.  ``obstructions`` holds the words that
    rule out morphisms (first->second, second->first).
    """

    relation: str
    morphism: StarHomData | None = None
    reverse: StarHomData | None = None
    obstructions: tuple = ()


def compare(c1: Cover, c2: Cover, tol: ToleranceConfig | None = None) -> CoverOrder:
    _check_base(c1, c2)
    tol = tol or c1.base.tol
    fwd = find_morphism(c1, c2, tol)
    bwd = find_morphism(c2, c1, tol)
    if fwd is not None and bwd is not None:
        return CoverOrder("equivalent", fwd, bwd)
    if fwd is not None:
        return CoverOrder("first_dominates", fwd)
    if bwd is not None:
        return CoverOrder("second_dominates", bwd)
    ob12 = find_obstruction(c1, c2, tol)
    ob21 = find_obstruction(c2, c1, tol)
    if ob12 is not None and ob21 is not None:
        return CoverOrder("incomparable", obstructions=(ob12, ob21))
    return CoverOrder("unknown", obstructions=(ob12, ob21))


def dominates(c1: Cover, c2: Cover, tol: ToleranceConfig | None = None) -> bool:
    """Whether ``c1 >= c2``, i.e. a morphism ``c1 -> c2`` exists."""
    return find_morphism(c1, c2, tol) is not None


# ---------------------------------------------------------------------------
# join


def join(c1: Cover, c2: Cover, tol: ToleranceConfig | None = None, check_isometry: bool = False) -> Cover:
    """Cover generated by the direct sum of the two representations.

    The result carries the projections onto ``c1`` and ``c2`` as
    ``certificates``.  Complete isometry is inherited from either summand and
    is only re-checked on request.
    """
    _check_base(c1, c2)
    tol = tol or c1.base.tol
    shape = c1.target.concat(c2.target)
    images = [x.concat(y) for x, y in zip(c1.images, c2.images)]
    st = star_structure(shape, images, tol)
    k1 = len(c1.target)
    if st.dim == shape.dim:
        target, coords = shape, images
        embed = lambda y: y
    else:
        target, coords = st.shape, [st.to_coords(y) for y in images]
        embed = st.from_coords
    p1 = star_hom_from_map(target, c1.target, lambda y: embed(y).restrict(range(k1)), tol)
    p2 = star_hom_from_map(target, c2.target, lambda y: embed(y).restrict(range(k1, len(shape))), tol)
    return Cover.from_images(c1.base, target, coords, "join", tol, check_isometry, certificates=(p1, p2))


# ---------------------------------------------------------------------------
# Shilov extension and the lattice maps


def _ideal_units(shape: BlockShape, ideal: Ideal) -> tuple[list[BlockElement], list[str]]:
    units, names = [], []
    for b in ideal.sorted():
        n = shape.sizes[b]
        for a in range(n):
            for c in range(n):
                units.append(shape.unit(b, a, c))
                names.append(f"E{b}_{a}{c}")
    return units, names


@dataclass(frozen=True, eq=False)
class ShilovExtension:
    """The algebra ``A + I`` for the Shilov ideal ``I`` of ``A``.

    :param projection: the homomorphism ``p: A + I -> A`` with kernel ``I``,
        as a map into the common ambient
    """

    A: OperatorAlgebra
    I: Ideal
    API: OperatorAlgebra
    projection: AlgebraMap

    @cached_property
    def ambient_cover(self) -> Cover:
        """The fixed ambient cover of ``A + I``."""
        return Cover.ambient(self.API)

    @cached_property
    def ambient_cover_A(self) -> Cover:
        return Cover.ambient(self.A)

    @property
    def n_base(self) -> int:
        return len(self.A.generators)

    def p(self, x: BlockElement) -> BlockElement:
        return self.projection(x)


def extend_by_shilov(A: OperatorAlgebra, tol: ToleranceConfig | None = None,
                     shilov: Ideal | None = None) -> ShilovExtension:
    """Adjoin the Shilov ideal of ``A`` to ``A`` and verify the resulting structure."""
    tol = tol or A.tol
    I = shilov if shilov is not None else shilov_ideal(A, tol)
    units, unit_names = _ideal_units(A.ambient, I)
    API = generate_algebra(A.ambient, list(A.generators) + units, list(A.names) + unit_names, tol)
    dim_i = sum(A.ambient.sizes[b] ** 2 for b in I.members)
    if API.dim != A.dim + dim_i:
        raise ShilovInconsistent(f"A + I has dimension {API.dim}, expected {A.dim} + {dim_i}")
    # p: split each API basis vector as a + i
    mix = np.concatenate([A.basis] + [u.vec()[:, None] for u in units], axis=1)
    coef, *_ = np.linalg.lstsq(mix, API.basis, rcond=None)
    if np.abs(mix @ coef - API.basis).max() > 1e-8:
        raise ShilovInconsistent("A + I is not spanned by A and I")
    proj = AlgebraMap(API, A.ambient, A.basis @ coef[:A.dim])
    if proj.multiplicativity_error() > 1e-8:
        raise ShilovInconsistent("the projection of A + I onto A is not multiplicative")
    for g in A.generators:
        if not proj(g).allclose(g, 1e-8):
            raise ShilovInconsistent("projection does not fix A")
    for u in units:
        if proj(u).norm() > 1e-8:
            raise ShilovInconsistent("projection does not kill I")
    if shilov_ideal(API, tol).members:
        raise ShilovInconsistent("A + I still has a nonzero boundary ideal")
    if not A.is_selfadjoint() and API.is_selfadjoint():
        raise ShilovInconsistent("adjoining I made the algebra self-adjoint")
    return ShilovExtension(A, I, API, proj)


def _check_cover_of(c: Cover, alg: OperatorAlgebra, what: str):
    if c.base is not alg and not (c.base.ambient == alg.ambient and c.base.dim == alg.dim
                                  and len(c.base.generators) == len(alg.generators)
                                  and all(x.allclose(y, 1e-12) for x, y in zip(c.base.generators, alg.generators))):
        raise BaseMismatch(f"cover is not a cover of {what}")


def map_Q(ext: ShilovExtension, d: Cover, tol: ToleranceConfig | None = None,
          check_isometry: bool = True) -> Cover:
    """Quotient of a cover of ``A + I`` by the ideal generated by the image of ``I``."""
    tol = tol or ext.A.tol
    _check_cover_of(d, ext.API, "A + I")
    units, _ = _ideal_units(ext.A.ambient, ext.I)
    imgs = [d.rep(u) for u in units]
    carrying = sorted({b for y in imgs for b, blk in enumerate(y.blocks) if np.abs(blk).max() > 1e-8})
    span = SpanBuilder(d.target.dim, rel_tol=1e-9, abs_floor=1e-10)
    for y in imgs:
        span.add(y.vec())
    if len(span) != sum(d.target.sizes[b] ** 2 for b in carrying):
        raise ImageNotIdeal("image of I is not a sum of full blocks of the cover")
    J = Ideal.of(d.target, carrying)
    shape = quotient_shape(d.target, J)
    images = [quotient(d.images[k], J) for k in range(ext.n_base)]
    return Cover.from_images(ext.A, shape, images, "quotient", tol, check_isometry)


def map_N(ext: ShilovExtension, c: Cover, tol: ToleranceConfig | None = None,
          check_isometry: bool = True) -> Cover:
    """Cover of ``A + I`` induced by ``x -> iota(p(x)) (+) x``."""
    tol = tol or ext.A.tol
    _check_cover_of(c, ext.A, "A")
    amb = ext.ambient_cover
    shape = c.target.concat(amb.target)
    images = []
    for g, y in zip(ext.API.generators, amb.images):
        a = ext.projection(g)
        images.append(c.rep(a).concat(y))
    return generated_cover(ext.API, shape, images, "induced", tol, check_isometry)


def map_R(ext: ShilovExtension, d: Cover, tol: ToleranceConfig | None = None,
          check_isometry: bool = False) -> Cover:
    """Restriction of a cover of ``A + I`` to ``A``."""
    tol = tol or ext.A.tol
    _check_cover_of(d, ext.API, "A + I")
    return generated_cover(ext.A, d.target, d.images[:ext.n_base], "induced", tol, check_isometry)


# ---------------------------------------------------------------------------
# the algebraic model {(a + i, a + j)}


@dataclass(frozen=True, eq=False)
class CmaxModel:
    """The C*-algebra ``{(x, y) : x - y in I}`` and the embedding ``j`` of ``A + I``.

    Blocks of ``shape`` are: the blocks outside ``I`` (shared by both
    coordinates), then the ``I`` blocks of the first coordinate, then the
    ``I`` blocks of the second.  ``inclusion`` embeds the model in
    ``target (+) target``; ``boundary`` is ``0 (+) I`` in model coordinates.
    """

    shape: BlockShape
    inclusion: StarHomData
    cover: Cover
    boundary: Ideal
    extension: ShilovExtension


def cmax_plus_model(ambientA: Cover, I: Ideal, tol: ToleranceConfig | None = None,
                    check_isometry: bool = True) -> CmaxModel:
    """Build the model and verify ``j`` and the boundary ideal ``0 (+) I``.

    :raises NotShilov: if ``I`` is not the Shilov ideal of the image of the
        base in ``ambientA.target``
    """
    tol = tol or ambientA.base.tol
    T = ambientA.target
    if I.shape != T:
        raise NotShilov("ideal does not live over the cover's target")
    A_T = generate_algebra(T, ambientA.images, ambientA.base.names, tol)
    if not is_boundary_ideal(A_T, I, tol).is_boundary or shilov_ideal(A_T, tol) != I:
        raise NotShilov(f"{I} is not the Shilov ideal of the algebra in {T}")
    ext = extend_by_shilov(A_T, tol, shilov=I)
    rest = I.kept
    ids = I.sorted()
    shape = BlockShape(tuple(T.sizes[b] for b in rest + ids + ids))

    def model(x: BlockElement, y: BlockElement) -> BlockElement:
        blocks = [x.blocks[b] for b in rest] + [x.blocks[b] for b in ids] + [y.blocks[b] for b in ids]
        return BlockElement(shape, tuple(blocks))

    images = []
    for g in ext.API.generators:
        images.append(model(g, ext.projection(g)))
    cover = Cover.from_images(ext.API, shape, images, "custom", tol, check_isometry)
    # inclusion into T (+) T: block b of the first copy, then block b of the second
    m = len(rest)
    nI = len(ids)
    mult = []
    for copy in range(2):
        for b in range(len(T)):
            row = [0] * len(shape)
            if b in rest:
                row[rest.index(b)] = 1
            else:
                row[m + ids.index(b) + copy * nI] = 1
            mult.append(tuple(row))
    inclusion = StarHomData(shape, T.concat(T), tuple(mult), tuple(np.eye(n) for n in T.concat(T).sizes))
    boundary = Ideal.of(shape, range(m + nI, m + 2 * nI))
    A_model = generate_algebra(shape, images, ext.API.names, tol)
    if not is_boundary_ideal(A_model, boundary, tol).is_boundary:
        raise NotShilov("0 (+) I is not a boundary ideal of the model")
    return CmaxModel(shape, inclusion, cover, boundary, ext)
