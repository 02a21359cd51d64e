import copy

import numpy as np
import pytest

from momcone import sdp
from momcone.sdp import SdpProblem, solve, verify_certificate, write_sdpa


def _one_by_one(rhs=None):
    p = SdpProblem.empty([1])
    p.C_blocks[0] = np.eye(1)
    if rhs is not None:
        p.add_constraint([np.eye(1)], None, rhs)
    return p


def test_unconstrained_psd_scalar():
    s = solve(_one_by_one())
    assert s.is_optimal
    assert s.primal_objective == pytest.approx(0.0, abs=1e-7)


def test_trace_with_fixed_offdiagonal():
    p = SdpProblem.empty([2])
    p.C_blocks[0] = np.eye(2)
    p.add_constraint([np.array([[0, 0.5], [0.5, 0]])], None, 1.0)
    s = solve(p)
    assert s.status == sdp.OPTIMAL
    assert s.primal_objective == pytest.approx(2.0, abs=1e-7)
    assert np.allclose(s.X[0], np.ones((2, 2)), atol=1e-5)
    assert verify_certificate(p, s)


def test_primal_infeasible_ray_is_conic():
    p = _one_by_one(-1.0)
    s = solve(p)
    assert s.status == sdp.PRIMAL_INFEASIBLE
    assert verify_certificate(p, s)
    s2 = copy.deepcopy(s)
    s2.ray["u"] = 2.0 * s.ray["u"]
    assert verify_certificate(p, s2)


def test_dual_infeasible():
    # min x s.t. x + X = 0, X >= 0: x = -X is unbounded below
    p = SdpProblem.empty([1], free_dim=1)
    p.c_free = np.array([1.0])
    p.add_constraint([np.eye(1)], [1.0], 0.0)
    s = solve(p)
    assert s.status == sdp.DUAL_INFEASIBLE
    assert verify_certificate(p, s)


def test_corrupted_solution_fails_verification():
    p = SdpProblem.empty([2])
    p.C_blocks[0] = np.eye(2)
    p.add_constraint([np.array([[0, 0.5], [0.5, 0]])], None, 1.0)
    s = solve(p)
    bad = copy.deepcopy(s)
    bad.X = [s.X[0] + 0.1 * np.eye(2)]
    bad.primal_objective += 0.2
    assert not verify_certificate(p, bad)


def test_free_variables_and_equalities():
    # x1 = 1 + x2 = 3 - X, so the objective x1 + X is 3 on the whole feasible set
    p = SdpProblem.empty([1], free_dim=2)
    p.C_blocks[0] = np.eye(1)
    p.c_free = np.array([1.0, 0.0])
    p.add_constraint([None], [1.0, -1.0], 1.0)
    p.add_constraint([np.eye(1)], [0.0, 1.0], 2.0)
    s = solve(p)
    assert s.is_optimal
    assert s.primal_objective == pytest.approx(3.0, abs=1e-6)


def test_sdpa_dump(tmp_path):
    p = SdpProblem.empty([2], free_dim=1)
    p.C_blocks[0] = np.eye(2)
    p.c_free = np.array([0.5])
    p.add_constraint([np.array([[0, 0.5], [0.5, 0]])], [1.0], 1.0)
    out = tmp_path / "p.dat-s"
    write_sdpa(p, out)
    lines = [ln for ln in out.read_text().splitlines() if not ln.startswith(("*", '"'))]
    assert lines[0].split()[0] == "1"          # m
    assert lines[1].split()[0] == "2"          # nblocks: the PSD block plus the split free block
    assert lines[2].replace(",", " ").split()[:2] == ["2", "-2"]
