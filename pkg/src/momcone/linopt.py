"""Outer loop for linear optimization over the moment cone.

For ``k = ceil(deg A / 2), ...`` the order-k relaxation pair is solved;
an infeasible moment side stops the loop, otherwise the minimizer is
tested for membership in ``R_A(K)``: first by looking for a flat
truncation of ``w*``, then (opt-in) with the randomized membership check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .algebra import AtomicMeasure, Poly, Support, Tms, basis, restrict, riesz_pairing
from .errors import ExtractionFailure, NumericalFailure, RankDeficient
from .extraction import extract_atoms, flat_truncation, verified_measure
from .hierarchy import INFEASIBLE, UNBOUNDED, MomentLP, SosWitness, solve_relaxation
from .membership import EXTRACT_ATOL, MEMBER, check_moment_membership
from .momkit import SemialgSet, d_K
from .options import Options

OPTIMAL = "Optimal"
INFEASIBLE_KIND = "Infeasible"
ORDER_LIMIT = "OrderLimit"


@dataclass
class LinOptOutcome:
    """Result of ``solve_moment_lp``.

    Attributes
    ----------
    kind : str
        ``Optimal``, ``Infeasible`` or ``OrderLimit``.
    order : int
        Relaxation order at which the loop stopped.
    y_star : Tms, optional
        Minimizer on ``A`` (moments of ``measure`` when ``kind`` is Optimal).
    measure : AtomicMeasure, optional
        Representing measure of ``y_star`` on ``K``.
    lambda_star : ndarray, optional
        Maximizer of the SOS side at the final order, or the infeasibility
        certificate when ``kind`` is Infeasible.
    c_min, b_max : float, optional
        ``<c, y_star>`` and ``b' lambda_star``.
    gap_closed : bool
        ``|c_k - b_k| <= tol_gap (1 + |c_k|)`` at the final order.
    history : list of dict
        One entry per order: status, ``c_k``, ``b_k``, flatness, membership.
    """

    kind: str
    order: int | None = None
    y_star: Tms | None = None
    measure: AtomicMeasure | None = None
    lambda_star: np.ndarray | None = None
    c_min: float | None = None
    b_max: float | None = None
    gap_closed: bool = False
    history: list = field(default_factory=list)
    witness: SosWitness | None = None
    w_star: Tms | None = None
    message: str = ""

    def to_json(self) -> dict:
        out = {
            "kind": self.kind,
            "order": self.order,
            "c_min": self.c_min,
            "b_max": self.b_max,
            "gap_closed": self.gap_closed,
            "lambda": None if self.lambda_star is None else [float(v) for v in self.lambda_star],
            "y_star": None if self.y_star is None else {
                "support": [list(a) for a in self.y_star.support.indices],
                "values": [float(v) for v in self.y_star.values]},
            "measure": None if self.measure is None else {
                "atoms": self.measure.atoms.tolist(), "weights": self.measure.weights.tolist()},
            "history": self.history,
            "message": self.message,
        }
        return out


def _start_order(lp: MomentLP) -> int:
    return max(math.ceil(lp.A.degree / 2), math.ceil(lp.K.max_degree / 2), 1)


def solve_moment_lp(lp: MomentLP, opts: Options | None = None,
                    progress: Callable[[dict], None] | None = None) -> LinOptOutcome:
    """Increase the relaxation order until the minimizer is certified in ``R_A(K)``."""
    opts = opts or Options()
    k0 = _start_order(lp)
    last = opts.last_order(k0)
    t_min = max(math.ceil(lp.A.degree / 2), d_K(lp.K))
    history: list = []
    unbounded_seen = False
    res = None
    for k in range(k0, last + 1):
        try:
            res = solve_relaxation(lp, k, opts.solver)
        except NumericalFailure as exc:
            history.append({"k": k, "status": "NumericalFailure", "message": str(exc)})
            continue
        entry = {"k": k, "status": res.status,
                 "c_k": None if not res.is_optimal else float(res.c_k),
                 "b_k": None if not res.is_optimal else float(res.b_k),
                 "flat": None, "member": None}
        history.append(entry)
        if progress:
            progress(entry)
        if res.status == INFEASIBLE:
            verified = bool(res.ray and res.ray.get("verified"))
            entry["certificate_verified"] = verified
            return LinOptOutcome(INFEASIBLE_KIND, k, lambda_star=res.lambda_star, history=history,
                                 witness=res.witness,
                                 message="moment relaxation infeasible"
                                 + ("" if verified else " (certificate not re-verified)"))
        if res.status == UNBOUNDED:
            if unbounded_seen:
                return LinOptOutcome(ORDER_LIMIT, k, history=history,
                                     message="likely unbounded or not strictly feasible")
            unbounded_seen = True
            continue
        if not res.is_optimal:
            continue
        gap = abs(res.c_k - res.b_k) <= opts.tol_gap * (1.0 + abs(res.c_k))
        mu = None
        prof = flat_truncation(res.w_star, lp.K, t_min, opts.tol_rank)
        if prof is not None:
            entry["flat"] = prof.flat_at
            try:
                zt = restrict(res.w_star, basis(lp.n, 2 * prof.flat_at))
                cand = extract_atoms(zt, lp.K, opts.tol_rank, opts.seed, t=prof.flat_at, atol=EXTRACT_ATOL)
                cand, rep = verified_measure(cand, res.y_star, lp.K, max(opts.tol_feas, 1e-9))
                entry["moment_error"] = rep.moment_error
                if rep:
                    mu = cand
            except ExtractionFailure as exc:
                entry["extraction"] = str(exc)
        if mu is None and opts.deep_membership:
            verdict = check_moment_membership(res.y_star, lp.K, opts)
            entry["member"] = verdict.kind
            if verdict.kind == MEMBER:
                mu = verdict.measure
        elif mu is not None:
            entry["member"] = MEMBER
        if mu is not None:
            return LinOptOutcome(OPTIMAL, k, res.y_star, mu, res.lambda_star,
                                 riesz_pairing(lp.c, res.y_star), float(lp.b @ res.lambda_star),
                                 bool(gap), history, res.witness, res.w_star)
    solved = any(e.get("c_k") is not None for e in history)
    out = LinOptOutcome(ORDER_LIMIT, last, history=history,
                        message="maximum order reached" if solved else
                        "no order solved to optimality: likely unbounded or not strictly feasible")
    if res is not None and res.is_optimal:
        out.y_star, out.lambda_star, out.w_star = res.y_star, res.lambda_star, res.w_star
        out.c_min, out.b_max = float(res.c_k), float(res.b_k)
        out.gap_closed = abs(res.c_k - res.b_k) <= opts.tol_gap * (1.0 + abs(res.c_k))
    return out


@dataclass
class SpanProblem:
    """``max ell' lam`` s.t. ``z0 - Z lam in R_A(K)`` recast as a ``MomentLP``."""

    lp: MomentLP
    Z: np.ndarray
    z0: np.ndarray
    ell: np.ndarray
    pinv: np.ndarray

    def recover(self, y: Tms | np.ndarray) -> np.ndarray:
        """``lam = (Z'Z)^{-1} Z'(z0 - y)``."""
        v = y.values if isinstance(y, Tms) else np.asarray(y, dtype=float)
        return self.pinv @ (self.z0 - v)

    def objective(self, lam) -> float:
        return float(self.ell @ np.asarray(lam, dtype=float))


def reformulate_span_problem(z0: Tms, Z: Sequence[Tms], ell, A: Support,
                             K: SemialgSet) -> tuple[MomentLP, Callable[[Tms], np.ndarray]]:
    """Equivalent ``MomentLP`` and the map ``y -> lam`` (see ``SpanProblem``)."""
    sp = span_problem(z0, Z, ell, A, K)
    return sp.lp, sp.recover


def span_problem(z0: Tms, Z: Sequence[Tms], ell, A: Support, K: SemialgSet) -> SpanProblem:
    def vec(z: Tms) -> np.ndarray:
        return np.array([z.get(a) for a in A.indices])

    z0v = vec(z0)
    Zm = np.column_stack([vec(z) for z in Z]) if len(Z) else np.zeros((len(A), 0))
    ell = np.asarray(ell, dtype=float).ravel()
    if ell.shape[0] != Zm.shape[1]:
        raise ValueError("ell must have one entry per column of Z")
    sv = np.linalg.svd(Zm, compute_uv=False) if Zm.size else np.zeros(0)
    if Zm.shape[1] and (sv[-1] <= 1e-10 * max(1.0, sv[0])):
        raise RankDeficient("columns of Z are linearly dependent")
    pinv = np.linalg.solve(Zm.T @ Zm, Zm.T) if Zm.shape[1] else np.zeros((0, len(A)))
    # orthonormal basis of the complement of span(Z)
    U, s, _ = np.linalg.svd(Zm, full_matrices=True) if Zm.shape[1] else (np.eye(len(A)), None, None)
    Pc = U[:, Zm.shape[1]:]
    a = [Poly.from_vector(A, Pc[:, i]) for i in range(Pc.shape[1])]
    b = Pc.T @ z0v
    c = Poly.from_vector(A, ell @ pinv)
    return SpanProblem(MomentLP(A, a, b, c, K), Zm, z0v, ell, pinv)
