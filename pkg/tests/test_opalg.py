import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cstarlab.errors import EmptyInput, NotHomomorphism, ShapeMismatch
from cstarlab.matcore import DEFAULT_TOL
from cstarlab.fdca import BlockElement, BlockShape, Ideal
from cstarlab.opalg import (amplify, boundary_ideals, coefficient_tensor, envelope, extend_rep,
                            gap_search, generate_algebra, identity_map, is_boundary_ideal, is_dirichlet,
                            is_semi_dirichlet, level_norm, quotient_algebra, shilov_ideal)
from conftest import unit
from oracles import algebra_basis, kron_level, oracle_boundary, random_algebra, split_blocks


def test_generate_algebra_examples(t2, pi_id):
    assert t2.dim == 3
    assert pi_id.dim == 3
    one = generate_algebra(BlockShape((2,)), [BlockShape((2,)).identity()])
    assert one.dim == 1
    with pytest.raises(EmptyInput):
        generate_algebra(BlockShape((2,)), [])


def test_algebra_membership(t2):
    assert t2.contains(t2.word("p + 2 e - q"))
    assert not t2.contains(BlockElement.of(unit(2, 1, 0)))
    x = t2.word("3 e + p")
    assert t2.element(t2.coefficients(x)).allclose(x, 1e-12)
    assert not t2.is_selfadjoint()


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31))
def test_generated_basis_matches_oracle(seed):
    sizes, gens, _ = random_algebra(seed)
    shape = BlockShape(tuple(sizes))
    A = generate_algebra(shape, [BlockElement(shape, tuple(split_blocks(sizes, g))) for g in gens])
    assert A.dim == len(algebra_basis(sizes, gens))
    prod = A.basis_elements[-1] @ A.basis_elements[-1]
    assert A.contains(prod)


def test_level_norm_examples(t2, pi_id):
    assert level_norm(t2, t2.unit_coefficients) == pytest.approx(1.0)
    z = BlockShape((2,)).zeros()
    u = coefficient_tensor(t2, [[z, t2.word("e")], [z, z]])
    assert level_norm(t2, u) == pytest.approx(1.0)
    x = BlockElement(pi_id.ambient, (np.array([[3.0]]), unit(2, 0, 1)))
    assert not pi_id.contains(x)
    big = BlockShape((1, 2))
    full = generate_algebra(big, [big.unit(0, 0, 0)] + big.block_units(1))
    assert level_norm(full, full.coefficients(x)) == pytest.approx(3.0)
    with pytest.raises(ShapeMismatch):
        level_norm(t2, np.zeros((2, 2, 5)))


def test_amplify_agrees_with_kron(t2):
    rng = np.random.default_rng(0)
    u = rng.standard_normal((3, 3, t2.dim)) + 1j * rng.standard_normal((3, 3, t2.dim))
    stack = t2.stacks[0]
    want = sum(kron_level(u[..., l], stack[l]) for l in range(t2.dim))
    np.testing.assert_allclose(amplify(u, stack), want, atol=1e-12)


def test_boundary_examples(pi_id):
    s = pi_id.ambient
    assert is_boundary_ideal(pi_id, Ideal.of(s, {0})).is_boundary
    v = is_boundary_ideal(pi_id, Ideal.of(s, {1}))
    assert not v.is_boundary
    level, u = v.witness
    assert level == 1
    x = pi_id.element(u.reshape(-1))
    assert x.blocks[0][0, 0] == pytest.approx(0, abs=1e-9)
    assert np.linalg.norm(x.blocks[1], 2) == pytest.approx(1.0, abs=1e-9)
    assert v.margin == pytest.approx(1.0, abs=1e-9)
    assert is_boundary_ideal(pi_id, Ideal.of(s)).is_boundary
    assert not is_boundary_ideal(pi_id, Ideal.of(s, {0, 1})).is_boundary
    assert [S.sorted() for S, r in boundary_ideals(pi_id) if r.is_boundary] == [[], [0]]


def test_gap_search_detects_stretched_copy():
    # the deleted block carries 2 e_12 where the kept block has e_12
    e = np.zeros((2, 2, 2), dtype=complex)
    e[0] = np.eye(2)
    e[1] = unit(2, 0, 1)
    kept = [e]
    deleted = [e * np.array([1, 2]).reshape(2, 1, 1)]
    res = gap_search(deleted, kept, 2, DEFAULT_TOL)
    assert res.margin > 0.4 and res.level == 1


@pytest.mark.parametrize("seed", range(6))
def test_boundary_agrees_with_sampling_oracle(seed):
    sizes, gens, _ = random_algebra(1000 + seed)
    shape = BlockShape(tuple(sizes))
    A = generate_algebra(shape, [BlockElement(shape, tuple(split_blocks(sizes, g))) for g in gens])
    for S, verdict in boundary_ideals(A):
        assert verdict.is_boundary == oracle_boundary(sizes, gens, S.sorted(), samples=2000)


def test_shilov_examples(t2, pi_id, m3):
    assert shilov_ideal(pi_id).sorted() == [0]
    assert shilov_ideal(t2).sorted() == []
    assert shilov_ideal(m3).sorted() == []
    assert envelope(pi_id).target.sizes == (2,)
    env = envelope(t2)
    assert env.target.sizes == (2,)
    assert all(y.allclose(g, 0) for y, g in zip(env.images, t2.generators))


def test_scalars_in_two_copies_keep_one_block(caplog):
    s = BlockShape((1, 1))
    A = generate_algebra(s, [s.identity()])
    with caplog.at_level(logging.WARNING, logger="cstarlab.opalg"):
        S = shilov_ideal(A)
    assert len(S) == 1
    assert S.sorted() == [0]
    assert "falling back" in caplog.text
    assert envelope(A).target.sizes == (1,)


def test_quotient_algebra(pi_id):
    q = quotient_algebra(pi_id, Ideal.of(pi_id.ambient, {0}))
    assert q.ambient.sizes == (2,) and q.dim == 3


def test_extend_rep(t2, pi_id):
    rho = extend_rep(t2, pi_id.ambient, pi_id.generators)
    assert rho.multiplicativity_error() < 1e-12
    assert rho(t2.word("p e")).allclose(pi_id.word("p e"), 1e-12)
    bad = [BlockElement.of(unit(2, 0, 1)), BlockElement.of(unit(2, 0, 1)), BlockElement.of(np.eye(2))]
    with pytest.raises(NotHomomorphism):
        extend_rep(t2, BlockShape((2,)), bad)
    assert identity_map(t2).multiplicativity_error() < 1e-12


def test_dirichlet_examples(t2, pi_id):
    assert is_dirichlet(t2) and is_semi_dirichlet(t2)
    m3 = BlockShape((3,))
    shift = generate_algebra(m3, [BlockElement.of(unit(3, 0, 1) + unit(3, 1, 2))])
    assert not is_semi_dirichlet(shift)
    corner = generate_algebra(m3, [BlockElement.of(unit(3, 0, 2))])
    assert not is_dirichlet(corner)
    # dimension count: A + A* has dimension 4, C*(A) = C + M2 has dimension 5
    assert not is_dirichlet(pi_id)
    assert is_semi_dirichlet(pi_id)


def test_selfadjoint_algebras_are_dirichlet(m3):
    assert is_dirichlet(m3) and is_semi_dirichlet(m3)
    s = BlockShape((1, 2))
    full = generate_algebra(s, [s.unit(0, 0, 0)] + s.block_units(1))
    assert is_dirichlet(full) and shilov_ideal(full).sorted() == []
