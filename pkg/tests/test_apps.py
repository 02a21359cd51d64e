import math

import numpy as np
import pytest

from momcone.algebra import Poly, parse_poly, riesz_pairing
from momcone.apps import (PartialSymMatrix, SoepForm, ball_set, copositivity_margin, cp_completion, cube_set,
                          half_sphere_set, matrix_to_tms, multinomial, powers_to_form, simplex_set,
                          soep_check, sphere_set, tms_to_matrix)
from momcone.errors import DimensionMismatch
from momcone.extraction import verify_measure
from momcone.linopt import INFEASIBLE_KIND, OPTIMAL
from momcone.momkit import d_K

P = parse_poly

CP_PATTERN = [[None, 1, 2, 3, 4],
              [1, None, 1, 2, 3],
              [2, 1, None, 1, 2],
              [3, 2, 1, None, 1],
              [4, 3, 2, 1, None]]


def test_preset_sets():
    S = simplex_set(6)
    assert S.h == (P("x1 + x2 + x3 + x4 + x5 + x6 - 1", 6),)
    assert S.g == tuple(Poly.var(6, i) for i in range(6))
    assert d_K(S) == 1
    assert sphere_set(3).h == (P("x1^2 + x2^2 + x3^2 - 1", 3),)
    assert cube_set(3).g == tuple(P(f"1 - x{i}^2", 3) for i in (1, 2, 3))
    assert ball_set(2).g == (P("1 - x1^2 - x2^2", 2),)
    assert half_sphere_set(3).g == (P("x1 + x2 + x3", 3),)
    assert all(K.ball_radius is not None for K in (S, sphere_set(3), cube_set(3), ball_set(2)))


def test_matrix_tms_roundtrip():
    y = matrix_to_tms(np.eye(2))
    assert (y[(2, 0)], y[(1, 1)], y[(0, 2)]) == (1.0, 0.0, 1.0)
    assert list(matrix_to_tms(np.outer([1, 2], [1, 2])).values) == [1.0, 2.0, 4.0]
    rng = np.random.default_rng(0)
    C = rng.normal(size=(4, 4))
    C = C + C.T
    assert np.array_equal(tms_to_matrix(matrix_to_tms(C)), C)


def test_cp_completion_min_trace():
    res = cp_completion(PartialSymMatrix.from_rows(CP_PATTERN))
    assert res.kind == OPTIMAL
    assert res.c_min == pytest.approx(20.817217, abs=1e-3)
    assert np.trace(res.matrix) == pytest.approx(res.c_min, abs=1e-6)
    assert res.factorization_error() <= 1e-6
    assert np.all(res.factors >= 0)
    d = np.diag(res.matrix)
    assert d == pytest.approx([6.031873, 3.968627, 0.816217, 3.968627, 6.031873], abs=1e-3)


def test_cp_feasibility_rank_one():
    u = np.array([1.0, 2.0, 0.5])
    res = cp_completion(PartialSymMatrix.from_rows(np.outer(u, u).tolist()), "Feasibility")
    assert res.kind == OPTIMAL
    assert res.factors.shape == (1, 3)
    assert res.factors[0] == pytest.approx(u, abs=1e-6)


def test_cp_infeasible_pattern():
    res = cp_completion(PartialSymMatrix(2, {(0, 1): 1.0, (0, 0): 0.0, (1, 1): 0.0}))
    assert res.kind == INFEASIBLE_KIND


def test_cp_rejects_bad_rows():
    with pytest.raises(DimensionMismatch):
        PartialSymMatrix.from_rows([[1, 2], [3]])
    with pytest.raises(ValueError):
        cp_completion(PartialSymMatrix(2, {(0, 1): 1.0}), "MaxTrace")


def test_horn_like_margin():
    out = copositivity_margin(np.eye(2), [np.array([[0, 0.5], [0.5, 0]])], [1.0])
    assert out.kind == OPTIMAL
    # the margin is the minimum of (x1^2 + x2^2) / (x1 x2) over the simplex
    t = np.linspace(0.0, 1.0, 100001)
    q = t ** 2 + (1 - t) ** 2
    mask = t * (1 - t) > 0
    grid = float(np.min(q[mask] / (t[mask] * (1 - t[mask]))))
    assert out.b_max == pytest.approx(grid, abs=1e-6)
    assert out.b_max == pytest.approx(2.0, abs=1e-6)
    assert verify_measure(out.measure, out.y_star, simplex_set(2))


def test_zero_direction_is_unbounded():
    out = copositivity_margin(np.eye(2), [np.zeros((2, 2))], [1.0])
    assert out.kind == INFEASIBLE_KIND
    assert out.b_max == math.inf
    assert "unbounded" in out.message


def test_soep_form_encoding():
    assert multinomial(6, (2, 2, 2)) == 90
    f = SoepForm.from_poly(P("x1^2 + x2^2", 2) ** 2)
    z = f.to_tms()
    # (x1^2 + x2^2)^2 = x1^4 + 2 x1^2 x2^2 + x2^4, and 2 / binom(4; 2, 2) = 1/3
    assert z[(2, 2)] == pytest.approx(1 / 3)
    assert SoepForm.from_tms(z).to_poly() == f.to_poly()
    with pytest.raises(ValueError):
        SoepForm.from_poly(P("x1^3", 1))


def test_soep_single_power():
    L = np.array([1.0, -2.0, 0.5])
    f = SoepForm.from_poly(powers_to_form(L[None, :], 3, 6))
    res = soep_check(f)
    assert res.kind == OPTIMAL
    assert res.linear_forms.shape == (1, 3)
    assert res.linear_forms[0] == pytest.approx(L, abs=1e-6)
    assert res.residual <= 1e-6


def test_soep_pairing_of_forms():
    L = np.array([[1.0, 0.0], [1.0, 1.0]])
    f = powers_to_form(L, 2, 4)
    assert f == P("x1^4", 2) + P("x1^4 + 4*x1^3*x2 + 6*x1^2*x2^2 + 4*x1*x2^3 + x2^4", 2)
    z = SoepForm.from_poly(f).to_tms()
    # <g, tms(f)> pairs like the apolar inner product: sum_k g(L_k) for a power sum f
    g = P("x1^2*x2^2", 2)
    assert riesz_pairing(g, z) == pytest.approx(sum(g(row) for row in L))
