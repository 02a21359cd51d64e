import math

import numpy as np
import pytest

from momcone.algebra import AtomicMeasure, Poly, Support, basis, homogeneous_basis, parse_poly, tms_from_atoms
from momcone.apps import sphere_set
from momcone.extraction import verify_measure
from momcone.feascert import (DUAL_INFEASIBLE, FEASIBLE_POINT, INCONCLUSIVE, KFULL_WITNESS, MOMENT_INFEASIBLE,
                              NOT_FULL, certify_dual_infeasible, certify_moment_infeasible, find_feasible_dual,
                              find_feasible_moment, k_fullness, verify_dual_refutation,
                              verify_moment_certificate)
from momcone.hierarchy import SosWitness, sos_membership, verify_sos_witness
from momcone.momkit import SemialgSet
from momcone.options import Options

P = parse_poly
CUBE = SemialgSet(3, [], [P(f"1 - x{i}^2", 3) for i in (1, 2, 3)], ball_radius=math.sqrt(3))
CIRCLE = SemialgSet(2, [P("x1^2 + x2^2 - 1", 2)], [], ball_radius=1.0)
BALL2 = SemialgSet(2, [], [P("1 - x1^2 - x2^2", 2)], ball_radius=1.0)
SPHERE = SemialgSet(3, [P("x1^2 + x2^2 + x3^2 - 1", 3)], [], ball_radius=1.0)

EX51_A = [P("x1*x2 + x2*x3 + x3*x1", 3), P("x1^2*x2^2 + x2^2*x3^2 + x3^2*x1^2", 3),
          P("x1^3*x2^2 + x2^3*x3^2 + x3^3*x1^2", 3)]
EX54_A = [P("x1^2*x2^2", 2), P("x1^4 + x2^4", 2), P("x1^6 + x2^6", 2)]


def ex52():
    c = P("x1^2", 3) * P("x1^4 + x2^2*x3^2 - x1^2*x2^2 - x1^2*x3^2", 3)
    a1 = P("x2^2", 3) * P("x2^4 + x3^2*x1^2 - x2^2*x3^2 - x2^2*x1^2", 3)
    a2 = P("x3^2", 3) * P("x3^4 + x1^2*x2^2 - x3^2*x1^2 - x3^2*x2^2", 3)
    return c, [a1, a2]


def ex56():
    c = P("x1^2*x2^2", 3) * P("x1^2 + x2^2 - 4*x3^2", 3) + P("x3^6", 3)
    return c, [P("x1^3*x2^3", 3), P("x1^3*x3^3", 3), P("x2^3*x3^3", 3)]


def test_example_51_feasible():
    cert = find_feasible_moment(EX51_A, [0, 1, 1], basis(3, 6), CUBE)
    assert cert.kind == FEASIBLE_POINT
    assert [cert.measure.integrate(p) for p in EX51_A] == pytest.approx([0, 1, 1], abs=1e-6)
    assert verify_measure(cert.measure, cert.y_witness, CUBE)


def test_zero_rhs_gives_zero_measure():
    cert = find_feasible_moment(EX51_A, [0, 0, 0], basis(3, 6), CUBE)
    assert cert.kind == FEASIBLE_POINT and len(cert.measure) == 0
    assert not cert.y_witness.values.any()


def test_example_54_certificate():
    cert = find_feasible_moment(EX54_A, [1, 1, 1], basis(2, 6), CIRCLE)
    assert cert.kind == MOMENT_INFEASIBLE and cert.order <= 3
    assert float(np.dot([1, 1, 1], cert.lam)) < 0
    assert verify_moment_certificate(cert.lam, EX54_A, [1, 1, 1], cert.sos_witness)


def test_example_54_printed_identity():
    # -3 a1 + a2 + a3 = 2 (x1^2 - x2^2)^2 + (x1^4 - x1^2 x2^2 + x2^4) h
    B = basis(2, 2)
    v = np.zeros(len(B))
    v[B.index((2, 0))], v[B.index((0, 2))] = 1.0, -1.0
    wit = SosWitness([B], [2.0 * np.outer(v, v)], [Poly.constant(2, 1.0)], list(CIRCLE.h),
                     [P("x1^4 - x1^2*x2^2 + x2^4", 2)])
    lam = [-3.0, 1.0, 1.0]
    assert verify_moment_certificate(lam, EX54_A, [1, 1, 1], wit, tol=1e-10)
    combo = -3.0 * EX54_A[0] + EX54_A[1] + EX54_A[2]
    assert verify_sos_witness(combo, wit, tol=1e-10).residual == 0.0


def test_trivial_moment_certificate():
    cert = certify_moment_infeasible([Poly.constant(2, 1.0)], [-1.0], CIRCLE)
    assert cert is not None and cert.order == 1
    assert cert.lam == pytest.approx([1.0])


def test_consistent_system_has_no_certificate():
    assert certify_moment_infeasible(EX51_A, [0, 1, 1], CUBE, Options(max_order=4)) is None


def test_example_52_dual_feasible():
    c, a = ex52()
    cert = find_feasible_dual(c, a, SPHERE, Options(max_order=4))
    assert cert.kind == FEASIBLE_POINT and cert.order == 4
    target = c - float(cert.lam[0]) * a[0] - float(cert.lam[1]) * a[1]
    assert verify_sos_witness(target, cert.sos_witness)
    printed = sos_membership(c + a[0] + a[1], [], SPHERE, 4)
    assert printed is not None and verify_sos_witness(c + a[0] + a[1], printed.witness)


def test_sos_point_immediately():
    cert = find_feasible_dual(P("1 + x1^2", 2), [], BALL2)
    assert cert.kind == FEASIBLE_POINT and cert.order == 1


def test_example_56_dual_infeasible():
    c, a = ex56()
    cert = find_feasible_dual(c, a, SPHERE)
    assert cert.kind == DUAL_INFEASIBLE
    assert verify_dual_refutation(c, a, cert.y_witness)
    assert verify_measure(cert.measure, cert.y_witness, SPHERE)


def test_example_56_printed_measure():
    c, a = ex56()
    s = 1 / math.sqrt(3)
    mu = AtomicMeasure(np.array([[1, 1, 1], [-1, 1, 1], [1, -1, 1], [1, 1, -1]]) * s, [27 / 4] * 4)
    y = tms_from_atoms(mu, homogeneous_basis(3, 6))
    assert verify_dual_refutation(c, a, y, tol=1e-6)
    assert verify_measure(mu, y, SPHERE)


def test_no_refutation_for_positive_constant():
    assert certify_dual_infeasible(Poly.constant(2, 1.0), [], BALL2) is None


def test_cauchy_schwarz_case_inconclusive():
    cert = find_feasible_dual(P("x1*x2", 2), [P("x1^2", 2)], CIRCLE)
    assert cert.kind == INCONCLUSIVE


def test_k_fullness():
    cert = k_fullness(basis(2, 2), BALL2)
    assert cert.kind == KFULL_WITNESS
    assert cert.lam == pytest.approx([2, 0, 0, 0, 0, 0])
    cert = k_fullness(homogeneous_basis(3, 6), sphere_set(3))
    assert cert.kind == KFULL_WITNESS
    A = homogeneous_basis(3, 6)
    target = sum((float(l) * Poly.monomial(al) for l, al in zip(cert.lam, A.indices)), Poly.constant(3, -1.0))
    assert verify_sos_witness(target, cert.sos_witness)
    interval = SemialgSet(1, [], [P("1 - x1^2", 1)], ball_radius=1.0)
    cert = k_fullness(Support(1, [(1,)]), interval)
    assert cert.kind == NOT_FULL
    assert cert.y_witness.get((0,)) == pytest.approx(1.0)
    assert cert.y_witness.get((1,)) == pytest.approx(0.0, abs=1e-8)
