"""Membership tests for the moment cone R_A(K) and the nonnegative cone P_A(K).

Moment side: for increasing ``k`` minimize a generic SOS objective ``R``
over the tms' ``w`` of order ``k`` that extend ``y`` and satisfy the
localizing conditions of ``K`` augmented by a ball.  Infeasibility proves
``y`` is not in the cone; a flat truncation of the minimizer yields a
representing measure.

Polynomial side: Lasserre lower bounds ``f_k``; ``f_k >= 0`` proves
nonnegativity, a flat moment-side minimizer with a negative value gives a
point of ``K`` where ``f`` is negative.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import sdp
from .algebra import AtomicMeasure, Poly, Support, Tms, basis, restrict
from .errors import ExtractionFailure, NumericalFailure
from .extraction import extract_atoms, flat_truncation, verified_measure
from .hierarchy import SosWitness, assemble, scale_witness, gram_to_poly, lasserre_lower_bound, moment_vector, ray_certificate
from .momkit import SemialgSet, d_K
from .options import Options

MEMBER = "Member"
NOT_MEMBER = "NotMember"
INCONCLUSIVE = "Inconclusive"
# loose acceptance inside extraction; the refined measure is verified at the user tolerance
EXTRACT_ATOL = 1e-3


@dataclass
class MomentVerdict:
    """Outcome of ``check_moment_membership``.

    ``kind`` is ``Member`` (with ``measure``), ``NotMember`` (with the
    order and a certificate ``lambda`` such that ``sum lambda_a x^a`` lies
    in the quadratic module while ``<lambda, y> < 0``) or ``Inconclusive``.
    """

    kind: str
    order: int | None = None
    measure: AtomicMeasure | None = None
    flat_order: int | None = None
    certificate: np.ndarray | None = None
    witness: SosWitness | None = None
    history: list = field(default_factory=list)
    message: str = ""


def random_sos_objective(n: int, d: int, seed: int) -> Poly:
    """``R = v' U'U v`` with ``v`` the monomials of degree ``<= d/2`` and seeded ``U``."""
    B = basis(n, d // 2)
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((len(B), len(B)))
    G = U.T @ U / len(B)
    return gram_to_poly(B, G)


def _ball_set(K: SemialgSet, opts: Options) -> SemialgSet:
    rho = opts.ball_radius if opts.ball_radius is not None else K.ball_radius
    if rho is None:
        raise ValueError("a ball radius is required (set K.ball_radius or options.ball_radius)")
    return K.with_ball(rho)


def start_order(A: Support, K: SemialgSet) -> int:
    """``d/2`` with ``d = 2 ceil((deg A + 1)/2)``, raised to cover the degrees of ``K``."""
    d = 2 * math.ceil((A.degree + 1) / 2)
    return max(d // 2, math.ceil(K.max_degree / 2), 1)


def check_moment_membership(y: Tms, K: SemialgSet, opts: Options | None = None) -> MomentVerdict:
    """Decide ``y in R_A(K)`` with randomized moment relaxations."""
    opts = opts or Options()
    KB = _ball_set(K, opts)
    A = y.support
    n = A.n
    k0 = start_order(A, KB)
    objectives = [random_sos_objective(n, 2 * k0, opts.seed + j) for j in range(max(1, opts.membership_tries))]
    mons = [Poly.monomial(alpha) for alpha in A.indices]
    t_min = max(d_K(KB), math.ceil(A.degree / 2))
    history = []
    last = opts.last_order(k0)
    tol = max(opts.tol_feas, 1e-9)
    delta = 0.5 * tol * (1.0 + float(np.abs(y.values).max(initial=0.0)))
    for k in range(k0, last + 1):
        for j, R in enumerate(objectives):
            p = assemble(KB, k, R, mons, y.values, lam_slack=delta)
            try:
                sol = sdp.solve(p, opts.solver)
            except NumericalFailure as exc:
                history.append({"k": k, "try": j, "status": "NumericalFailure", "message": str(exc)})
                continue
            entry = {"k": k, "try": j, "status": sol.status}
            history.append(entry)
            if sol.status == sdp.DUAL_INFEASIBLE:
                # infeasibility does not depend on the objective: no retry
                lam, wit, rep = ray_certificate(p, sol.ray["X"], sol.ray["x_free"], mons)
                val = float(lam @ y.values)
                entry["ray_residual"] = rep.residual
                if not (rep and val < -delta * float(np.abs(lam).sum())):
                    entry["status"] = "DualInfeasible (unconfirmed ray)"
                    break
                return MomentVerdict(NOT_MEMBER, k, certificate=lam / -val,
                                     witness=scale_witness(wit, 1.0 / -val),
                                     history=history, message="moment relaxation infeasible")
            if not sol.is_optimal:
                continue
            w = Tms(p.meta["ambient"], moment_vector(p, sol.u))
            prof = flat_truncation(w, KB, t_min, opts.tol_rank)
            entry["flat"] = prof.flat_at if prof else None
            if prof is None:
                continue
            zt = restrict(w, basis(n, 2 * prof.flat_at))
            try:
                mu = extract_atoms(zt, K, opts.tol_rank, opts.seed + j, t=prof.flat_at, atol=EXTRACT_ATOL)
            except ExtractionFailure as exc:
                entry["extraction"] = str(exc)
                continue
            mu, rep = verified_measure(mu, y, K, tol)
            entry["verified"] = bool(rep)
            entry["moment_error"] = rep.moment_error
            if rep:
                return MomentVerdict(MEMBER, k, mu, prof.flat_at, history=history)
    return MomentVerdict(INCONCLUSIVE, last, history=history, message="maximum order reached")


@dataclass
class PolyVerdict:
    """Outcome of ``check_poly_membership``.

    ``Member`` carries the order, ``f_k`` and an SOS witness of ``f - f_k``;
    ``NotMember`` carries a point ``u`` of ``K`` with ``f(u) < 0``.
    """

    kind: str
    order: int | None = None
    f_k: float | None = None
    witness: SosWitness | None = None
    point: np.ndarray | None = None
    value: float | None = None
    history: list = field(default_factory=list)
    message: str = ""


def check_poly_membership(f: Poly, K: SemialgSet, opts: Options | None = None,
                          tol: float = 1e-7) -> PolyVerdict:
    """Decide ``f >= 0`` on ``K`` with the Lasserre hierarchy."""
    opts = opts or Options()
    k0 = max(math.ceil(f.degree / 2), math.ceil(K.max_degree / 2), 1)
    last = opts.last_order(k0)
    history = []
    for k in range(k0, last + 1):
        res = lasserre_lower_bound(f, K, k, opts.solver, return_result=True)
        fk = float(res.b_k) if res.is_optimal else None
        history.append({"k": k, "status": res.status, "f_k": fk})
        if res.status == "Infeasible":
            return PolyVerdict(MEMBER, k, math.inf, None, history=history, message="K is empty")
        if not res.is_optimal:
            continue
        if fk >= -tol and res.witness is not None:
            return PolyVerdict(MEMBER, k, fk, res.witness, history=history)
        prof = flat_truncation(res.w_star, K, max(d_K(K), k0), opts.tol_rank)
        if prof is None:
            continue
        try:
            mu = extract_atoms(restrict(res.w_star, basis(K.n, 2 * prof.flat_at)), K, opts.tol_rank,
                               opts.seed, t=prof.flat_at)
        except ExtractionFailure:
            continue
        vals = [f(u) for u in mu.atoms]
        if vals:
            i = int(np.argmin(vals))
            if vals[i] < -tol and K.violation(mu.atoms[i]) <= 1e-6:
                return PolyVerdict(NOT_MEMBER, k, fk, point=np.array(mu.atoms[i]), value=float(vals[i]),
                                   history=history)
    return PolyVerdict(INCONCLUSIVE, last, history=history, message="maximum order reached")
