import numpy as np
import pytest

from momcone.algebra import Poly, Tms, basis, homogeneous_basis, parse_poly, riesz_pairing
from momcone.errors import RankDeficient
from momcone.extraction import verify_measure
from momcone.hierarchy import MomentLP, verify_sos_witness
from momcone.linopt import (INFEASIBLE_KIND, OPTIMAL, ORDER_LIMIT, reformulate_span_problem, solve_moment_lp,
                            span_problem)
from momcone.momkit import SemialgSet
from momcone.options import Options

P = parse_poly
BALL2 = SemialgSet(2, [], [P("1 - x1^2 - x2^2", 2)], ball_radius=1.0)
CIRCLE = SemialgSet(2, [P("x1^2 + x2^2 - 1", 2)], [], ball_radius=1.0)


def test_example_47_optimal():
    c = P("x1^4*x2^2 + 6*x1^2*x2^2 + 4*x1*x2^4 + x2^6 + x2^2", 2)
    a = [P("x1^3*x2^2 + x1*x2^2", 2), P("x1^2*x2^4 + x2^4", 2)]
    lp = MomentLP(basis(2, 6), a, [1.0, 1.0], c, BALL2)
    seen = []
    out = solve_moment_lp(lp, Options(deep_membership=True, max_order=6, seed=1), progress=seen.append)
    assert out.kind == OPTIMAL and out.gap_closed
    assert out.lambda_star == pytest.approx([4.0, 2.0], abs=1e-4)
    assert verify_measure(out.measure, out.y_star, BALL2)
    assert verify_sos_witness(lp.c_of(out.lambda_star), out.witness)
    assert [e["k"] for e in seen] == [e["k"] for e in out.history]
    assert out.c_min == pytest.approx(riesz_pairing(c, out.y_star))


def test_circle_system_infeasible():
    a = [P("x1^2*x2^2", 2), P("x1^4 + x2^4", 2), P("x1^6 + x2^6", 2)]
    lp = MomentLP(basis(2, 6), a, [1.0, 1.0, 1.0], P("1 + x1^2 + x2^2", 2), CIRCLE)
    out = solve_moment_lp(lp)
    assert out.kind == INFEASIBLE_KIND and out.order <= 3
    assert float(lp.b @ out.lambda_star) < 0


def test_linear_objective_on_ball():
    # min x1 s.t. <1, y> = 1 on the unit disk: the Dirac at (-1, 0)
    lp = MomentLP(basis(2, 1), [Poly.constant(2, 1.0)], [1.0], P("x1", 2), BALL2)
    out = solve_moment_lp(lp)
    assert out.kind == OPTIMAL
    assert out.c_min == pytest.approx(-1.0, abs=1e-6)
    assert out.measure.atoms[0] == pytest.approx([-1.0, 0.0], abs=1e-4)


def test_unbounded_reports_order_limit():
    # unit mass on the half-line, min -x1: delta_t drives the value to -inf
    K = SemialgSet(1, [], [P("x1", 1)])
    lp = MomentLP(basis(1, 1), [Poly.constant(1, 1.0)], [1.0], P("-x1", 1), K)
    out = solve_moment_lp(lp, Options(max_order=3))
    assert out.kind == ORDER_LIMIT
    assert "unbounded" in out.message
    assert out.y_star is None


def test_span_recover_exact():
    A = basis(2, 2)
    rng = np.random.default_rng(0)
    z0 = Tms(A, rng.normal(size=6))
    z1 = Tms(A, rng.normal(size=6))
    sp = span_problem(z0, [z1], [1.0], A, BALL2)
    y = z0 - z1.scaled(5.0)
    assert sp.recover(y) == pytest.approx([5.0], abs=1e-12)
    assert sp.objective([5.0]) == 5.0
    lp, recover = reformulate_span_problem(z0, [z1], [1.0], A, BALL2)
    assert lp.m == len(A) - 1
    assert recover(y) == pytest.approx([5.0], abs=1e-12)


def test_span_rejects_dependent_columns():
    A = basis(1, 2)
    z = Tms(A, np.array([1.0, 2.0, 3.0]))
    with pytest.raises(RankDeficient):
        span_problem(z, [z, z.scaled(2.0)], [1.0, 1.0], A, SemialgSet(1, [], [P("1 - x1^2", 1)]))


def test_span_constraints_encode_the_affine_set():
    A = homogeneous_basis(2, 2)
    z0 = Tms(A, np.array([1.0, 0.0, 1.0]))
    z1 = Tms(A, np.array([0.0, 1.0, 0.0]))
    sp = span_problem(z0, [z1], [1.0], A, CIRCLE)
    for lam in (-0.3, 0.0, 0.7):
        y = z0 - z1.scaled(lam)
        assert [riesz_pairing(q, y) for q in sp.lp.a] == pytest.approx(list(sp.lp.b), abs=1e-12)
        # the objective of the moment problem tracks ell' lam up to a constant
        assert riesz_pairing(sp.lp.c, y) + lam == pytest.approx(riesz_pairing(sp.lp.c, z0), abs=1e-12)
