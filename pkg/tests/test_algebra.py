import math

import numpy as np
import pytest

from momcone.algebra import (AtomicMeasure, Poly, Support, Tms, basis, homogeneous_basis, parse_poly,
                             poly_eval, restrict, riesz_pairing, tms_from_atoms)
from momcone.errors import DimensionMismatch, UnsupportedMonomial


def test_basis_sizes_and_order():
    assert list(basis(2, 2).indices) == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
    assert list(basis(1, 3).indices) == [(0,), (1,), (2,), (3,)]
    assert len(basis(3, 6)) == math.comb(9, 6) == 84


def test_homogeneous_basis():
    assert len(homogeneous_basis(3, 6)) == 28
    assert list(homogeneous_basis(2, 2).indices) == [(2, 0), (1, 1), (0, 2)]
    assert len(homogeneous_basis(5, 2)) == 15


def test_riesz_pairing_trivial():
    A = basis(2, 2)
    y = Tms.from_dict(A, {(1, 1): 3.0})
    assert riesz_pairing(Poly.monomial((1, 1)), y) == 3.0
    assert riesz_pairing(Poly(2), y) == 0.0


def test_riesz_pairing_sphere_atom():
    A = homogeneous_basis(3, 6)
    mu = AtomicMeasure([np.ones(3) / math.sqrt(3)], [9.0])
    a1 = parse_poly("x1^2*x2^4 + x2^2*x3^4 + x3^2*x1^4", 3)
    assert riesz_pairing(a1, tms_from_atoms(mu, A)) == pytest.approx(1.0, abs=1e-12)


def test_riesz_pairing_rejects_missing_monomial():
    with pytest.raises(UnsupportedMonomial):
        riesz_pairing(Poly.monomial((3, 0)), Tms(basis(2, 2), np.zeros(6)))


def test_poly_eval():
    assert poly_eval(parse_poly("x1^2 + x2^2 - 1", 2), [1, 0]) == 0.0
    motzkin = Poly.monomial((2, 2, 0)) * parse_poly("x1^2 + x2^2 - 3*x3^2", 3) + Poly.monomial((0, 0, 6))
    assert poly_eval(motzkin, [1, 1, 1]) == 0.0
    assert poly_eval(Poly.monomial((1, 1)), [2, 3]) == 6.0


def test_tms_from_atoms_dirac_origin():
    y = tms_from_atoms(AtomicMeasure([[0.0, 0.0]], [1.0]), basis(2, 2))
    assert np.array_equal(y.values, [1, 0, 0, 0, 0, 0])


def test_tms_from_atoms_cube_measure():
    mu = AtomicMeasure([[0, 1, -1], [1, 1, 1]], [0.5, 1 / 6])
    y = tms_from_atoms(mu, basis(3, 6))
    a = [parse_poly("x1*x2 + x2*x3 + x3*x1", 3), parse_poly("x1^2*x2^2 + x2^2*x3^2 + x3^2*x1^2", 3),
         parse_poly("x1^3*x2^2 + x2^3*x3^2 + x3^3*x1^2", 3)]
    assert [riesz_pairing(p, y) for p in a] == pytest.approx([0, 1, 1], abs=1e-14)


def test_tms_from_atoms_sphere_measure():
    s = 1 / math.sqrt(3)
    mu = AtomicMeasure(np.array([[1, 1, 1], [-1, 1, 1], [1, -1, 1], [1, 1, -1]]) * s, [27 / 4] * 4)
    y = tms_from_atoms(mu, homogeneous_basis(3, 6))
    assert riesz_pairing(Poly.monomial((2, 2, 2)), y) == pytest.approx(1.0, abs=1e-12)
    assert riesz_pairing(parse_poly("x1^4*x2^2 + x2^4*x3^2 + x3^4*x1^2", 3), y) == pytest.approx(3.0, abs=1e-12)


def test_restrict():
    rng = np.random.default_rng(0)
    z = Tms(basis(2, 4), rng.normal(size=15))
    assert np.array_equal(restrict(z, z.support).values, z.values)
    assert np.array_equal(restrict(z, basis(2, 2)).values, z.values[:6])
    mu = AtomicMeasure(rng.normal(size=(3, 2)), rng.random(3) + 0.1)
    lhs = restrict(tms_from_atoms(mu, basis(2, 6)), homogeneous_basis(2, 4))
    rhs = tms_from_atoms(mu, homogeneous_basis(2, 4))
    assert np.allclose(lhs.values, rhs.values, atol=1e-12)


def test_poly_arithmetic_and_parse():
    p = parse_poly("x1^2*x2 - 3", 2)
    assert p.coeff((2, 1)) == 1.0 and p.coeff((0, 0)) == -3.0
    q = (Poly.var(2, 0) + 1.0) ** 2
    assert q == parse_poly("x1^2 + 2*x1 + 1", 2)
    with pytest.raises(DimensionMismatch):
        Poly.var(2, 0) + Poly.var(3, 0)


def test_poly_terms_roundtrip():
    p = parse_poly("2*x1*x2^3 - 0.5*x2", 2)
    assert Poly.from_terms(2, p.to_terms()) == p
    with pytest.raises(DimensionMismatch):
        Poly.from_terms(2, [{"exponents": [1, 0, 0], "coeff": 1.0}])


def test_atomic_measure_rejects_bad_weights():
    with pytest.raises(ValueError):
        AtomicMeasure([[0.0]], [-1.0])
    with pytest.raises(DimensionMismatch):
        AtomicMeasure([[0.0], [1.0]], [1.0])


def test_support_sorting_and_membership():
    S = Support(2, [(0, 2), (1, 0), (0, 0)])
    assert list(S.indices) == [(0, 0), (1, 0), (0, 2)]
    assert (1, 0) in S and (1, 1) not in S
    assert S.degree == 2
