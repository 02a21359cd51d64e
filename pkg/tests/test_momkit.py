import numpy as np
import pytest

from momcone.algebra import AtomicMeasure, Poly, Tms, basis, parse_poly, tms_from_atoms
from momcone.errors import OrderTooSmall
from momcone.momkit import (SemialgSet, d_K, localizing_matrix, localizing_operator, moment_matrix,
                            moment_matrix_fast)


def test_moment_matrix_layout():
    z = Tms(basis(2, 2), np.arange(1.0, 7.0))
    z00, z10, z01, z20, z11, z02 = z.values
    expect = [[z00, z10, z01], [z10, z20, z11], [z01, z11, z02]]
    assert np.array_equal(moment_matrix(1, z), expect)
    assert np.array_equal(moment_matrix_fast(1, z), expect)


def test_localizing_matrix_ball_at_origin():
    z = tms_from_atoms(AtomicMeasure([[0.0, 0.0]], [1.0]), basis(2, 2))
    L = localizing_matrix(parse_poly("1 - x1^2 - x2^2", 2), 1, z)
    assert L.shape == (1, 1) and L[0, 0] == 1.0


def test_localizing_matrix_vanishes_on_circle():
    mu = AtomicMeasure([[1.0, 0.0], [0.0, 1.0]], [0.5, 0.5])
    z = tms_from_atoms(mu, basis(2, 4))
    L = localizing_matrix(parse_poly("x1^2 + x2^2 - 1", 2), 2, z)
    assert np.abs(L).max() == 0.0


def test_moment_matrix_dirac_and_zero():
    z = tms_from_atoms(AtomicMeasure([[1.0, 1.0]], [1.0]), basis(2, 2))
    assert np.array_equal(moment_matrix(1, z), np.ones((3, 3)))
    assert not moment_matrix(1, Tms(basis(2, 2), np.zeros(6))).any()


def test_moment_matrix_rank_two_atoms():
    rng = np.random.default_rng(3)
    mu = AtomicMeasure(rng.normal(size=(2, 2)), [1.0, 2.0])
    M = moment_matrix(2, tms_from_atoms(mu, basis(2, 4)))
    assert np.linalg.matrix_rank(M, tol=1e-8 * np.abs(M).max()) == 2


def test_operator_matches_direct_summation():
    rng = np.random.default_rng(1)
    for _ in range(20):
        q = Poly.from_vector(basis(2, 2), rng.normal(size=6))
        z = Tms(basis(2, 6), rng.normal(size=28))
        op = localizing_operator(q, 3)
        assert np.allclose(op.apply(z), localizing_matrix(q, 3, z), atol=1e-12)
        B = op.tensor()
        assert np.allclose(np.tensordot(z.values, B, axes=1), localizing_matrix(q, 3, z), atol=1e-12)


def test_operator_cells_in_one_variable():
    op = localizing_operator(Poly.constant(1, 1.0), 1)
    assert op.size == 2
    assert op.entry_map((0,), (0,)) == [((0,), 1.0)]
    assert op.entry_map((0,), (1,)) == [((1,), 1.0)]
    assert op.entry_map((1,), (0,)) == [((1,), 1.0)]
    assert op.entry_map((1,), (1,)) == [((2,), 1.0)]


def test_operator_on_affine_equality():
    z = tms_from_atoms(AtomicMeasure([[0.3, 0.7]], [1.0]), basis(2, 2))
    L = localizing_operator(parse_poly("x1 + x2 - 1", 2), 1).apply(z)
    assert np.abs(L).max() < 1e-15


def test_order_too_small():
    with pytest.raises(OrderTooSmall):
        localizing_matrix(parse_poly("x1^4", 1), 1, Tms(basis(1, 2), np.zeros(3)))


def test_d_K():
    assert d_K(SemialgSet(2, [parse_poly("x1^2 + x2^2 - 1", 2)])) == 1
    h = parse_poly("x1 + x2 + x3 + x4 + x5 - 1", 5)
    assert d_K(SemialgSet(5, [h], [Poly.var(5, i) for i in range(5)])) == 1
    assert d_K(SemialgSet(3, [], [parse_poly(f"1 - x{i}^2", 3) for i in (1, 2, 3)])) == 1
    assert d_K(SemialgSet(1, [], [parse_poly("1 - x1^4", 1)])) == 2


def test_set_membership_helpers():
    K = SemialgSet(2, [], [parse_poly("1 - x1^2 - x2^2", 2)], ball_radius=1.0)
    assert K.contains([0.6, 0.8]) and not K.contains([1.0, 1.0])
    assert K.violation([1.0, 1.0]) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        SemialgSet(1, ball_radius=0.0)
