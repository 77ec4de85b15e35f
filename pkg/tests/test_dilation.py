import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cstarlab.dilation import (TwistFamily, a_matrix, compress, delta_curve, delta_value, dense_images,
                               is_maximal, rep_from_matrices, scale_corner, semidirichlet_scaling_probe,
                               solve_level, twist, twist_conjugator)
from cstarlab.errors import NotHomomorphism, NotIsometry, OutsideDisk, TrivialCorner
from cstarlab.matcore import DEFAULT_TOL
from cstarlab.opalg import identity_map
from cstarlab.scenarios import curated_corner_rep

WORD = "e e* - p"


@pytest.fixture(scope="module")
def fam():
    return TwistFamily.sarason_t2(0.5)


def test_twist_endpoints(fam):
    s1 = dense_images(twist(fam, 1.0))
    np.testing.assert_array_equal(s1, dense_images(fam.sigma))
    s0 = dense_images(twist(fam, 0.0))
    off = s0.copy()
    for i in range(3):
        off[:, fam._sl(i), fam._sl(i)] = 0
    assert np.abs(off).max() == 0.0
    np.testing.assert_array_equal(s0[:, fam._sl(1), fam._sl(1)], fam.block(1, 1))


def test_twist_rejects_outside_disk(fam):
    with pytest.raises(OutsideDisk):
        twist(fam, 1.01)


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 1), st.floats(0, 2 * np.pi))
def test_twist_is_multiplicative(r, theta):
    f = TwistFamily.sarason_t2(0.5)
    rho = twist(f, r * np.exp(1j * theta))
    assert rho.multiplicativity_error() <= 1e-8


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 1), st.floats(0, 2 * np.pi), st.floats(0, 2 * np.pi))
def test_twist_conjugation(r, a, b):
    f = TwistFamily.sarason_t2(0.5)
    z, w = r * np.exp(1j * a), r * np.exp(1j * b)
    u = twist_conjugator(f, z, w)
    sz, sw = dense_images(twist(f, z)), dense_images(twist(f, w))
    np.testing.assert_allclose(np.einsum("ij,ljk,km->lim", u, sz, u.conj().T), sw, atol=1e-9)


def test_conjugator_requires_equal_moduli(fam):
    with pytest.raises(ValueError):
        twist_conjugator(fam, 0.5, 0.6)


def test_twist_family_rejects_lower_entries(fam):
    perm = np.eye(4)[[3, 1, 2, 0]]
    swapped = rep_from_matrices(fam.A, [perm @ y.blocks[0] @ perm.T for y in fam.sigma.images()])
    with pytest.raises(NotHomomorphism):
        TwistFamily(fam.A, swapped, (1, 2, 1))


def test_a_matrix_spectrum_closed_form():
    for s in (0.0, 0.3, 0.6, 0.9, 1.0):
        a = a_matrix(s, 1.0)
        sv = np.linalg.svd(a, compute_uv=False)
        np.testing.assert_allclose(sorted(sv), [s * s, 1.0], atol=1e-12)


def test_compress_examples(t2, fam):
    rho = identity_map(t2)
    full = compress(rho, np.eye(2))
    assert full.is_dilation
    e1 = compress(rho, np.array([[1.0], [0.0]]))
    assert e1.is_dilation
    mats = dense_images(e1.map)
    np.testing.assert_allclose([m[0, 0] for m in dense_images(rep_from_matrices(t2, [
        np.array([[1.0]]), np.array([[0.0]]), np.array([[0.0]])]))], [m[0, 0] for m in mats], atol=1e-12)
    assert abs(e1.map(t2.word("e")).blocks[0][0, 0]) < 1e-12
    mid = np.zeros((4, 2))
    mid[1, 0] = mid[2, 1] = 1.0
    c = compress(twist(fam, 0.4), mid)
    np.testing.assert_allclose(dense_images(c.map), fam.block(1, 1), atol=1e-12)
    with pytest.raises(NotIsometry):
        compress(rho, np.array([[2.0], [0.0]]))


def test_maximal_identity_m3(m3):
    v = is_maximal(m3, identity_map(m3), DEFAULT_TOL.with_(optimizer_restarts=4))
    assert v.status == "maximal"


def test_maximal_envelope_t2(t2):
    v = is_maximal(t2, identity_map(t2), DEFAULT_TOL.with_(optimizer_restarts=8))
    assert v.status == "maximal"
    assert v.evidence["worst_gap"] <= 1e-6


def test_not_maximal_character(t2):
    rho = rep_from_matrices(t2, [[[1.0]], [[0.0]], [[0.0]]])
    v = is_maximal(t2, rho, DEFAULT_TOL.with_(optimizer_restarts=4))
    assert v.status == "not_maximal"
    cert = v.certificate
    assert cert.valid()
    assert cert.V.shape == (2, 1)
    comp = np.einsum("ia,lij,jb->lab", cert.V.conj(), np.array(cert.images), cert.V)
    np.testing.assert_allclose(comp[:, 0, 0], [1.0, 0.0, 0.0], atol=1e-6)


def test_delta_curve(fam):
    assert all(v == pytest.approx(1.0) for _, v in delta_curve(fam, "1", [0, 0.5, 1]))
    assert delta_value(fam, WORD, 0.0) == pytest.approx(1.0)
    assert delta_value(fam, WORD, 1.0) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("level", [0.25, 0.5, 0.75])
def test_delta_curve_hits_intermediate_values(fam, level):
    grid = np.linspace(0, 1, 1001)
    vals = np.array([delta_value(fam, WORD, z) for z in grid])
    assert np.all(np.diff(vals) <= 1e-12)
    assert vals.min() <= level <= vals.max()
    step = np.abs(np.diff(vals)).max()
    assert np.abs(vals - level).min() <= step / 2 + 1e-12
    z = solve_level(fam, WORD, level)
    assert delta_value(fam, WORD, z) == pytest.approx(level, abs=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1))
def test_delta_lipschitz_bound(z, w):
    f = TwistFamily.sarason_t2(0.5)
    y, v = "e e* - p", "e e* - p + 0.1 e"
    dist = 0.1
    lhs = abs(delta_value(f, y, z) - delta_value(f, y, w))
    rhs = 2 * dist + abs(delta_value(f, v, z) - delta_value(f, v, w))
    assert lhs <= rhs + 1e-12


def test_semidirichlet_probe_curated():
    A, mats, split = curated_corner_rep(0.5)
    rep = semidirichlet_scaling_probe(A, mats, split)
    assert rep.one_fails
    assert not rep.joint


def test_semidirichlet_probe_identity_both_pass(t2):
    rep = semidirichlet_scaling_probe(t2, identity_map(t2), 1)
    assert rep.phi and rep.phi_half and not rep.one_fails


def test_semidirichlet_probe_rejects(t2):
    diag = rep_from_matrices(t2, [np.diag([1.0, 0.0]), np.zeros((2, 2)), np.diag([0.0, 1.0])])
    with pytest.raises(TrivialCorner):
        semidirichlet_scaling_probe(t2, diag, 1)
    with pytest.raises(ValueError):
        semidirichlet_scaling_probe(t2, identity_map(t2), 0)


def test_scale_corner():
    m = np.ones((1, 3, 3))
    out = scale_corner(m, 1, 0.5)
    assert out[0, 0, 1] == 0.5 and out[0, 1, 0] == 1.0 and m[0, 0, 1] == 1.0
