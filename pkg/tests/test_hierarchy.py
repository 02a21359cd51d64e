import numpy as np
import pytest

from momcone.algebra import Poly, basis, parse_poly
from momcone.errors import DimensionMismatch, OrderTooSmall
from momcone.hierarchy import (INFEASIBLE, MomentLP, assemble, build_relaxation, lasserre_lower_bound,
                               solve_relaxation, sos_membership, verify_sos_witness)
from momcone.momkit import SemialgSet

from oracle_cvx import solve_with_cvxpy

P = parse_poly
BALL2 = SemialgSet(2, [], [P("1 - x1^2 - x2^2", 2)], ball_radius=1.0)
CIRCLE = SemialgSet(2, [P("x1^2 + x2^2 - 1", 2)], [], ball_radius=1.0)
BALL3 = SemialgSet(3, [], [P("1 - x1^2 - x2^2 - x3^2", 3)], ball_radius=1.0)


def ex47():
    c = P("x1^4*x2^2 + 6*x1^2*x2^2 + 4*x1*x2^4 + x2^6 + x2^2", 2)
    a = [P("x1^3*x2^2 + x1*x2^2", 2), P("x1^2*x2^4 + x2^4", 2)]
    return MomentLP(basis(2, 6), a, [1.0, 1.0], c, BALL2)


def test_no_constraints_constant_objective():
    lp = MomentLP(basis(2, 2), [], [], Poly.constant(2, 1.0), BALL2)
    r = solve_relaxation(lp, 1)
    assert r.is_optimal
    assert r.c_k == pytest.approx(0.0, abs=1e-7)
    assert len(r.lambda_star) == 0
    assert verify_sos_witness(lp.c, r.witness)


def test_example_47_order_3():
    r = solve_relaxation(ex47(), 3)
    assert r.is_optimal
    assert r.lambda_star == pytest.approx([4.0, 2.0], abs=1e-4)
    assert r.c_k == pytest.approx(r.b_k, abs=1e-6)


def test_example_47_matches_oracle():
    lp = ex47()
    p = build_relaxation(lp, 3)
    status, value, _, _ = solve_with_cvxpy(p)
    r = solve_relaxation(lp, 3)
    assert status == "optimal"
    # SDP primal value is -b_k
    assert -value == pytest.approx(r.b_k, abs=1e-5)


def test_circle_system_infeasible_at_order_3():
    a = [P("x1^2*x2^2", 2), P("x1^4 + x2^4", 2), P("x1^6 + x2^6", 2)]
    lp = MomentLP(basis(2, 6), a, [1.0, 1.0, 1.0], P("1 + x1^2", 2), CIRCLE)
    r = solve_relaxation(lp, 3)
    assert r.status == INFEASIBLE
    assert r.ray["verified"] and float(lp.b @ r.lambda_star) < 0
    assert verify_sos_witness(Poly(2) + sum((float(l) * q for l, q in zip(r.lambda_star, a)), Poly(2)),
                              r.witness)


def test_lasserre_pure_sos():
    assert lasserre_lower_bound(P("x1^2 + x2^2", 2), SemialgSet(2), 1) == pytest.approx(0.0, abs=1e-7)


def test_lasserre_on_circle():
    # brute-force minimum over a fine grid of the circle
    th = np.linspace(0, 2 * np.pi, 20001)
    grid_min = float(np.min((np.cos(th) - np.sin(th)) ** 2))
    fk = lasserre_lower_bound(P("x1^2 - 2*x1*x2 + x2^2", 2), CIRCLE, 1)
    assert fk == pytest.approx(grid_min, abs=1e-6)


def test_motzkin_never_certified():
    motzkin = Poly.monomial((2, 2, 0)) * P("x1^2 + x2^2 - 3*x3^2", 3) + Poly.monomial((0, 0, 6))
    values = [lasserre_lower_bound(motzkin, BALL3, k) for k in (3, 4)]
    assert all(v < 0 for v in values)
    assert values[0] <= values[1] + 1e-8


def test_sos_membership_one_and_minus_one():
    cert = sos_membership(Poly.constant(2, 1.0), [], BALL2, 1)
    assert cert is not None and verify_sos_witness(Poly.constant(2, 1.0), cert.witness)
    for k in range(1, 5):
        assert sos_membership(Poly.constant(2, -1.0), [], CIRCLE, k) is None


def test_witness_verifier_rejects_wrong_target():
    cert = sos_membership(Poly.constant(2, 1.0), [], BALL2, 1)
    assert not verify_sos_witness(Poly.constant(2, 1.5), cert.witness)


def test_order_and_dimension_checks():
    with pytest.raises(OrderTooSmall):
        build_relaxation(ex47(), 2)
    with pytest.raises(DimensionMismatch):
        MomentLP(basis(2, 2), [P("x1^3", 2)], [1.0], Poly.constant(2, 1.0), BALL2)
    with pytest.raises(DimensionMismatch):
        MomentLP(basis(2, 2), [P("x1", 2)], [1.0, 2.0], Poly.constant(2, 1.0), BALL2)


def test_assemble_layout_without_face_reduction():
    p = assemble(CIRCLE, 1, Poly.constant(2, 1.0), [], np.zeros(0), face_reduce=False)
    status, value, _, _ = solve_with_cvxpy(p)
    assert status == "optimal"
    assert value == pytest.approx(0.0, abs=1e-6)
