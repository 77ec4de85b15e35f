import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cstarlab.dilation import a_matrix
from cstarlab.errors import EmptyInput, InvalidMatrix, NotHermitian
from cstarlab.matcore import (DEFAULT_TOL, SpanBuilder, ToleranceConfig, dedupe_sorted, herm_eigs,
                              hermitian_dilation, inner, is_hermitian, nullspace, op_norm,
                              orth_columns, polar_unitary, random_unitary, span_basis)
from conftest import unit

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def complex_matrices(n, m):
    return st.tuples(arrays(float, (n, m), elements=finite), arrays(float, (n, m), elements=finite)).map(
        lambda p: p[0] + 1j * p[1])


def test_op_norm_examples():
    assert op_norm(np.eye(3)) == pytest.approx(1.0)
    assert op_norm(np.zeros((2, 4))) == 0.0
    assert op_norm(unit(2, 0, 1)) == pytest.approx(1.0)


def test_op_norm_rejects_non_finite():
    with pytest.raises(InvalidMatrix):
        op_norm(np.array([[np.nan, 0], [0, 1]]))
    with pytest.raises(InvalidMatrix):
        op_norm(np.zeros((0, 2)))


@settings(max_examples=50, deadline=None)
@given(complex_matrices(3, 2), complex_matrices(2, 4))
def test_op_norm_submultiplicative(a, b):
    assert op_norm(a @ b) <= op_norm(a) * op_norm(b) + 1e-9 * (1 + op_norm(a) * op_norm(b))


@settings(max_examples=50, deadline=None)
@given(complex_matrices(3, 3))
def test_op_norm_matches_largest_eigenvalue_of_gram(a):
    top = np.sqrt(max(np.linalg.eigvalsh(a.conj().T @ a).max(), 0.0))
    assert op_norm(a) == pytest.approx(top, rel=1e-9, abs=1e-9)


def test_herm_eigs_examples():
    assert herm_eigs(np.diag([1.0, 0.0])).tolist() == [0.0, 1.0]
    a = a_matrix(1.0, 1.0)
    np.testing.assert_allclose(herm_eigs(a.conj().T @ a), [1.0, 1.0], atol=1e-12)
    a = a_matrix(0.5, 1.0)
    np.testing.assert_allclose(herm_eigs(a.conj().T @ a), [0.0625, 1.0], atol=1e-12)


def test_herm_eigs_rejects_non_hermitian():
    with pytest.raises(NotHermitian):
        herm_eigs(unit(2, 0, 1))
    with pytest.raises(NotHermitian):
        herm_eigs(np.zeros((2, 3)))


@settings(max_examples=50, deadline=None)
@given(complex_matrices(4, 4))
def test_herm_eigs_sorted_and_trace(a):
    h = a + a.conj().T
    ev = herm_eigs(h)
    assert np.all(np.diff(ev) >= 0)
    assert ev.sum() == pytest.approx(np.trace(h).real, abs=1e-8 * (1 + np.abs(h).sum()))


def test_span_basis_examples():
    assert len(span_basis([unit(2, 0, 0), unit(2, 0, 0)])) == 1
    assert len(span_basis([unit(2, 0, 0), unit(2, 1, 1), np.eye(2)])) == 2
    assert len(span_basis([unit(2, 0, 1), unit(2, 1, 0), unit(2, 0, 1) + 1j * unit(2, 1, 0)])) == 2
    with pytest.raises(EmptyInput):
        span_basis([])


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2**31))
def test_span_basis_orthonormal(k, seed):
    rng = np.random.default_rng(seed)
    vecs = [rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)) for _ in range(k)]
    vecs.append(vecs[0] + 2 * vecs[-1])
    q = np.array([b.ravel() for b in span_basis(vecs)])
    assert q.shape[0] == min(k, 4)
    np.testing.assert_allclose(q.conj() @ q.T, np.eye(q.shape[0]), atol=1e-10)


def test_span_builder_floor_rejects_noise():
    sb = SpanBuilder(4, rel_tol=1e-9, abs_floor=1e-12)
    assert sb.add(np.array([1, 0, 0, 0]))
    assert not sb.add(np.array([0, 1e-15, 0, 0]))
    assert not sb.add(np.array([2, 0, 0, 0]))
    assert sb.add(np.array([1, 1, 0, 0]))
    assert len(sb) == 2
    assert sb.contains(np.array([3, -1, 0, 0]))
    assert not sb.contains(np.array([0, 0, 1, 0]))


def test_nullspace_and_orth():
    m = np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 0.0]])
    ns = nullspace(m, 1e-12)
    assert ns.shape == (3, 2)
    np.testing.assert_allclose(m @ ns, 0, atol=1e-12)
    assert orth_columns(m.T, 1e-12).shape == (3, 1)


def test_unitaries_and_dilation():
    rng = np.random.default_rng(5)
    u = random_unitary(4, rng)
    np.testing.assert_allclose(u.conj().T @ u, np.eye(4), atol=1e-12)
    m = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    w = polar_unitary(m)
    np.testing.assert_allclose(w.conj().T @ w, np.eye(3), atol=1e-12)
    h = hermitian_dilation(m)
    assert is_hermitian(h)
    assert np.linalg.eigvalsh(h).max() == pytest.approx(op_norm(m))


def test_misc_helpers():
    assert dedupe_sorted([0.0, 1e-12, 0.5, 1.0, 1.0 + 1e-11], 1e-9) == pytest.approx([0.0, 0.5, 1.0])
    assert inner(unit(2, 0, 1), unit(2, 0, 1)) == 1.0
    assert inner(unit(2, 0, 1), unit(2, 1, 0)) == 0.0


def test_tolerance_config_validation():
    with pytest.raises(ValueError):
        ToleranceConfig(eps_eq=1e-3, eps_norm=1e-6)
    with pytest.raises(ValueError):
        ToleranceConfig(optimizer_restarts=0)
    t = DEFAULT_TOL.with_(rng_seed=7)
    assert t.rng(1).integers(1 << 30) == ToleranceConfig(rng_seed=7).rng(1).integers(1 << 30)
    assert t.rng(1).integers(1 << 30) != t.rng(2).integers(1 << 30)
