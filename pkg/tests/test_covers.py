import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cstarlab.covers import (Cover, cmax_plus_model, generated_cover, compare, dominates, extend_by_shilov,
                             find_obstruction, isometry_report, join, map_N, map_Q, map_R,
                             morphism_error, multiplicity_rows, spectral_fingerprint)
from cstarlab.errors import BaseMismatch, NotCover, NotHermitian, NotShilov
from cstarlab.fdca import BlockElement, BlockShape, Ideal, apply_hom
from cstarlab.matcore import random_unitary
from cstarlab.opalg import envelope, generate_algebra, shilov_ideal
from cstarlab.scenarios import toeplitz_covers, toeplitz_matrix
from oracles import eig_fingerprint

EPS = 1e-10


@pytest.fixture(scope="module")
def lattice(pi_id):
    amb = Cover.ambient(pi_id)
    env = envelope(pi_id)
    return pi_id, amb, env, extend_by_shilov(pi_id)


def test_ambient_and_envelope_targets(lattice):
    A, amb, env, _ = lattice
    assert amb.target.sizes == (1, 2) and amb.role_tag == "ambient"
    assert env.target.sizes == (2,) and env.role_tag == "envelope"
    assert env.verify().ok and amb.verify().ok


def test_from_images_rejects_non_isometric(t2):
    # the upper-left entry of T2 is a character: contractive but not isometric
    c = BlockShape((1,))
    imgs = [BlockElement(c, (np.array([[v]]),)) for v in (1.0, 0.0, 0.0)]
    with pytest.raises(NotCover):
        Cover.from_images(t2, c, imgs)
    report = isometry_report(Cover.from_images(t2, c, imgs, check_isometry=False).rep)
    assert report.shrinking.margin > 0.5 and not report.ok


def test_from_images_rejects_non_generating(t2):
    s = BlockShape((2, 2))
    imgs = [BlockElement(s, (g.blocks[0], g.blocks[0])) for g in t2.generators]
    with pytest.raises(NotCover):
        Cover.from_images(t2, s, imgs)


def test_compare_examples(lattice):
    A, amb, env, _ = lattice
    o = compare(amb, env)
    assert o.relation == "first_dominates"
    assert o.morphism.multiplicity == ((0, 1),)
    assert morphism_error(o.morphism, amb, env) <= EPS
    assert compare(env, amb).relation == "second_dominates"
    same = compare(amb, amb)
    assert same.relation == "equivalent"
    assert morphism_error(same.morphism, amb, amb) <= EPS
    assert dominates(amb, env) and not dominates(env, amb)


def test_compare_sees_through_unitary_conjugation(t2):
    rng = np.random.default_rng(4)
    u = random_unitary(2, rng)
    s = BlockShape((2,))
    c1 = Cover.ambient(t2)
    c2 = Cover.from_images(t2, s, [BlockElement(s, (u @ g.blocks[0] @ u.conj().T,)) for g in t2.generators])
    o = compare(c1, c2)
    assert o.relation == "equivalent"
    assert morphism_error(o.morphism, c1, c2) <= EPS
    for g, y in zip(c1.images, c2.images):
        assert apply_hom(o.morphism, g).allclose(y, EPS)


def test_join_dominates_both(lattice):
    A, amb, env, _ = lattice
    j = join(amb, env)
    assert compare(j, env).relation in ("first_dominates", "equivalent")
    assert compare(j, amb).relation == "equivalent"
    assert len(j.certificates) == 2
    for h, c in zip(j.certificates, (amb, env)):
        assert morphism_error(h, j, c) <= EPS


def test_base_mismatch(lattice, t2):
    A, amb, env, _ = lattice
    with pytest.raises(BaseMismatch):
        compare(amb, Cover.ambient(t2))
    with pytest.raises(BaseMismatch):
        join(env, Cover.ambient(t2))


def test_multiplicity_rows():
    rows = multiplicity_rows((1, 2), 4)
    assert rows == sorted(rows)
    assert set(rows) == {(0, 2), (2, 1), (4, 0)}
    assert multiplicity_rows((2,), 3) == []


def test_fingerprint_examples():
    A, covers = toeplitz_covers(8, [0.5, 1.0])
    assert spectral_fingerprint(covers[0], "V* V") == pytest.approx([0.0, 0.25, 1.0], abs=1e-9)
    assert spectral_fingerprint(covers[0], "1") == pytest.approx([1.0])
    assert spectral_fingerprint(covers[1], "V* V") == pytest.approx([0.0, 1.0], abs=1e-9)
    with pytest.raises(NotHermitian):
        spectral_fingerprint(covers[0], "V")


@pytest.mark.parametrize("z", [0.3, 0.6, 0.9, 0.5j, np.exp(0.7j) * 0.4])
def test_fingerprint_matches_eigen_oracle(z):
    _, covers = toeplitz_covers(8, [z])
    m = toeplitz_matrix(8, z)
    assert spectral_fingerprint(covers[0], "V* V") == pytest.approx(eig_fingerprint(m.conj().T @ m), abs=1e-9)


def test_toeplitz_antichain():
    _, covers = toeplitz_covers(8, [0.3, 0.6])
    o = compare(covers[0], covers[1])
    assert o.relation == "incomparable"
    assert all(ob is not None for ob in o.obstructions)
    assert find_obstruction(covers[0], covers[0]) is None


def test_extend_by_shilov_examples(lattice, t2):
    A, _, _, ext = lattice
    assert ext.I.sorted() == [0]
    assert ext.API.dim == 4
    s = A.ambient
    for x in (s.unit(0, 0, 0), s.unit(1, 0, 0), s.unit(1, 0, 1), s.unit(1, 1, 1)):
        assert ext.API.contains(x)
    assert not shilov_ideal(ext.API).members
    assert ext.p(s.unit(0, 0, 0)).norm() < 1e-12
    e = A.word("e")
    assert ext.p(e).allclose(e, 1e-12)
    same = extend_by_shilov(t2)
    assert same.I.sorted() == [] and same.API.dim == t2.dim
    c2 = BlockShape((1, 1))
    scal = extend_by_shilov(generate_algebra(c2, [c2.identity()]))
    assert scal.API.dim == 2


def test_lattice_maps(lattice):
    A, amb, env, ext = lattice
    n_env = map_N(ext, env)
    assert n_env.target.sizes == (2, 1)
    n_amb = map_N(ext, amb)
    assert compare(n_amb, n_env).relation in ("first_dominates", "equivalent")
    for c in (amb, env):
        n = map_N(ext, c)
        assert compare(map_Q(ext, n), c).relation == "equivalent"
        r = map_R(ext, n)
        assert compare(r, join(c, amb)).relation == "equivalent"
        assert compare(r, map_Q(ext, n)).relation in ("first_dominates", "equivalent")
    d = ext.ambient_cover
    assert compare(map_R(ext, d), amb).relation == "equivalent"
    assert compare(map_N(ext, map_Q(ext, d)), d).relation == "equivalent"
    assert map_Q(ext, d).target.sizes == (2,)


def test_cmax_model(lattice):
    A, amb, _, ext = lattice
    model = cmax_plus_model(amb, ext.I)
    assert model.shape.sizes == (2, 1, 1)
    assert model.boundary.sorted() == [2]
    a = ext.API.word("p")
    x = ext.API.element(ext.API.coefficients(a))
    img = model.cover.rep(x)
    full = apply_hom(model.inclusion, img)
    np.testing.assert_allclose(full.blocks[0], [[1.0]])
    np.testing.assert_allclose(full.blocks[2], [[1.0]])
    with pytest.raises(NotShilov):
        cmax_plus_model(amb, Ideal.of(amb.target, {1}))


def test_cmax_model_trivial_ideal(t2):
    amb = Cover.ambient(t2)
    model = cmax_plus_model(amb, Ideal.of(amb.target))
    assert model.shape.sizes == (2,)
    assert compare(model.cover, Cover.ambient(model.extension.API)).relation == "equivalent"


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 2**31))
def test_compare_is_sound_on_random_conjugates(seed):
    rng = np.random.default_rng(seed)
    s = BlockShape((2,))
    A = generate_algebra(s, [BlockElement(s, (np.triu(rng.standard_normal((2, 2))),))])
    c1 = Cover.ambient(A)
    big = BlockShape((2, 2))
    u = random_unitary(2, rng)
    imgs = [BlockElement(big, (g.blocks[0], u @ g.blocks[0] @ u.conj().T)) for g in A.generators]
    c2 = generated_cover(A, big, imgs, "custom", check_isometry=False)
    assert c2.target.sizes == (2,)
    o = compare(c2, c1)
    assert o.relation in ("equivalent", "first_dominates")
    assert morphism_error(o.morphism, c2, c1) <= EPS
