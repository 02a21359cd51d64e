"""Feasibility search and infeasibility certificates.

Moment side: ``<a_i, y> = b_i, y in R_A(K)`` is searched with Algorithm
4.1 for a positive objective; it is refuted by ``lam`` with ``b' lam < 0``
and ``sum lam_i a_i in Q_k(g) + I_2k(h)``.

Polynomial side: ``c - sum lam_i a_i in P_A(K)`` is searched through SOS
feasibility problems; it is refuted by a tms ``y in R_A(K)`` with
``<c, y> = -1`` and ``<a_i, y> = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import sdp
from .algebra import AtomicMeasure, Poly, Support, Tms, restrict
from .errors import DecodeFailure, DimensionMismatch, NumericalFailure
from .hierarchy import (MomentLP, SosWitness, WITNESS_TOL, _decode_witness, assemble, sos_membership,
                        verify_sos_witness)
from .linopt import INFEASIBLE_KIND, OPTIMAL, solve_moment_lp
from .momkit import SemialgSet
from .options import Options

FEASIBLE_POINT = "FeasiblePoint"
MOMENT_INFEASIBLE = "MomentInfeasible"
DUAL_INFEASIBLE = "DualInfeasible"
KFULL_WITNESS = "KFullWitness"
NOT_FULL = "NotFull"
INCONCLUSIVE = "Inconclusive"


@dataclass
class Certificate:
    """Verdict of a feasibility search together with its evidence.

    Attributes
    ----------
    kind : str
        ``FeasiblePoint``, ``MomentInfeasible``, ``DualInfeasible``,
        ``KFullWitness``, ``NotFull`` or ``Inconclusive``.
    lam : ndarray, optional
        Multipliers: a refutation of the moment system, or a feasible
        point of the polynomial system.
    sos_witness : SosWitness, optional
        Gram matrices certifying the membership attached to ``lam``.
    y_witness : Tms, optional
        A feasible tms (moment feasibility or dual refutation).
    measure : AtomicMeasure, optional
        Representing measure of ``y_witness``.
    order : int, optional
        Relaxation order at which the evidence was found.
    residual : float
        Coefficient residual of the re-verified SOS witness, or moment
        mismatch of the measure.
    """

    kind: str
    lam: np.ndarray | None = None
    sos_witness: SosWitness | None = None
    y_witness: Tms | None = None
    measure: AtomicMeasure | None = None
    order: int | None = None
    residual: float = 0.0
    history: list = field(default_factory=list)
    message: str = ""

    @property
    def definitive(self) -> bool:
        return self.kind != INCONCLUSIVE

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "order": self.order,
            "lambda": None if self.lam is None else [float(v) for v in self.lam],
            "residual": self.residual,
            "sos_witness": None if self.sos_witness is None else self.sos_witness.to_json(),
            "y_witness": None if self.y_witness is None else {
                "support": [list(a) for a in self.y_witness.support.indices],
                "values": [float(v) for v in self.y_witness.values]},
            "measure": None if self.measure is None else {
                "atoms": self.measure.atoms.tolist(), "weights": self.measure.weights.tolist()},
            "history": self.history,
            "message": self.message,
        }


def _support_of(polys: Sequence[Poly], n: int) -> Support:
    idx = set()
    for p in polys:
        idx.update(p.terms)
    return Support(n, idx)


def _with_zero(A: Support) -> Support:
    zero = (0,) * A.n
    return A if zero in A else A.union(Support(A.n, [zero]))


def positive_objective(A: Support) -> Poly:
    """``1 + sum`` of the monomials of ``A`` whose exponents are all even."""
    terms = {(0,) * A.n: 1.0}
    for alpha in A.indices:
        if all(e % 2 == 0 for e in alpha):
            terms[alpha] = terms.get(alpha, 0.0) + 1.0
    return Poly(A.n, terms)


def _combo(lam, polys: Sequence[Poly], n: int) -> Poly:
    out = Poly(n)
    for li, p in zip(lam, polys):
        out = out + float(li) * p
    return out


def verify_moment_certificate(lam, a: Sequence[Poly], b, wit: SosWitness,
                              tol: float = WITNESS_TOL) -> bool:
    """``b' lam < 0`` and the witness certifies ``sum lam_i a_i in Q_k(g) + I_2k(h)``."""
    lam = np.asarray(lam, dtype=float)
    if not float(np.asarray(b, dtype=float) @ lam) < 0:
        return False
    return bool(verify_sos_witness(_combo(lam, a, a[0].n), wit, tol))


def certify_moment_infeasible(a: Sequence[Poly], b, K: SemialgSet,
                              opts: Options | None = None) -> Certificate | None:
    """Search ``lam`` with ``b' lam = -1`` and ``sum lam_i a_i in Q_k(g) + I_2k(h)``."""
    opts = opts or Options()
    a = list(a)
    b = np.asarray(b, dtype=float).ravel()
    if len(a) != b.shape[0]:
        raise DimensionMismatch("a and b must have the same length")
    n = K.n
    k0 = max(math.ceil(max((p.degree for p in a), default=0) / 2), math.ceil(K.max_degree / 2), 1)
    zero = Poly(n)
    history = []
    for k in range(k0, opts.last_order(k0) + 1):
        # the SOS side encodes 0 - sum mu_i a_i; with b' mu = 1 the certificate is lam = -mu
        p = assemble(K, k, zero, a, np.zeros(len(a)), extra_rows=[(b, 1.0)])
        try:
            sol = sdp.solve(p, opts.solver)
        except NumericalFailure as exc:
            history.append({"k": k, "status": "NumericalFailure", "message": str(exc)})
            continue
        history.append({"k": k, "status": sol.status})
        if not sol.is_optimal:
            continue
        try:
            mu, wit = _decode_witness(p, sol.X, sol.x_free, zero, a, WITNESS_TOL)
        except DecodeFailure:
            continue
        lam = -mu
        rep = verify_sos_witness(_combo(lam, a, n), wit)
        if rep and float(b @ lam) < 0:
            return Certificate(MOMENT_INFEASIBLE, lam, wit, order=k, residual=rep.residual, history=history)
    return None


def find_feasible_moment(a: Sequence[Poly], b, A: Support, K: SemialgSet,
                         opts: Options | None = None, c: Poly | None = None) -> Certificate:
    """Find ``y in R_A(K)`` with ``<a_i, y> = b_i``, or a certificate that none exists."""
    opts = opts or Options()
    a = list(a)
    b = np.asarray(b, dtype=float).ravel()
    n = A.n
    if np.all(b == 0):
        return Certificate(FEASIBLE_POINT, y_witness=Tms(A, np.zeros(len(A))),
                           measure=AtomicMeasure.empty(n), order=0, message="b = 0: the zero measure")
    A1 = _with_zero(A)
    c = positive_objective(A1) if c is None else c
    # any point of R_A(K) will do, so a non-flat minimizer is always handed
    # to the randomized membership check
    out = solve_moment_lp(MomentLP(A1, a, b, c, K), replace(opts, deep_membership=True))
    if out.kind == OPTIMAL:
        y = restrict(out.y_star, A)
        return Certificate(FEASIBLE_POINT, y_witness=y, measure=out.measure, order=out.order,
                           history=out.history)
    if out.kind == INFEASIBLE_KIND and out.lambda_star is not None and out.witness is not None:
        lam = np.asarray(out.lambda_star, dtype=float)
        rep = verify_sos_witness(_combo(lam, a, n), out.witness)
        if rep and float(b @ lam) < 0:
            return Certificate(MOMENT_INFEASIBLE, lam, out.witness, order=out.order,
                               residual=rep.residual, history=out.history)
    cert = certify_moment_infeasible(a, b, K, opts) if out.kind == INFEASIBLE_KIND else None
    if cert is not None:
        cert.history = out.history + cert.history
        return cert
    return Certificate(INCONCLUSIVE, history=out.history, message=out.message or out.kind)


def _dual_orders(k0: int, opts: Options) -> range:
    # the SOS search is cheap per order but grows fast; without an explicit
    # max_order only two extra orders are tried before looking for a refutation
    return range(k0, (opts.max_order if opts.max_order is not None else k0 + 2) + 1)


def find_feasible_dual(c: Poly, a: Sequence[Poly], K: SemialgSet,
                       opts: Options | None = None) -> Certificate:
    """Find ``lam`` with ``c - sum lam_i a_i in Q_k(g) + I_2k(h)``, or refute the system."""
    opts = opts or Options()
    a = list(a)
    A = _support_of([c] + a, c.n)
    k0 = max(math.ceil(A.degree / 2), math.ceil(K.max_degree / 2), 1)
    history = []
    for k in _dual_orders(k0, opts):
        try:
            cert = sos_membership(c, a, K, k, opts.solver)
        except NumericalFailure as exc:
            history.append({"k": k, "status": "NumericalFailure", "message": str(exc)})
            continue
        history.append({"k": k, "status": "Feasible" if cert else "NotFound"})
        if cert is not None:
            return Certificate(FEASIBLE_POINT, cert.lam, cert.witness, order=k,
                               residual=cert.residual, history=history)
    ref = certify_dual_infeasible(c, a, K, opts)
    if ref is not None:
        ref.history = history + ref.history
        return ref
    return Certificate(INCONCLUSIVE, history=history, message="no SOS point and no refuting tms found")


def verify_dual_refutation(c: Poly, a: Sequence[Poly], y: Tms, tol: float = 1e-6) -> bool:
    """``<c, y> = -1`` and ``<a_i, y> = 0`` to ``tol``."""
    from .algebra import riesz_pairing
    ok = abs(riesz_pairing(c, y) + 1.0) <= tol
    return ok and all(abs(riesz_pairing(p, y)) <= tol for p in a)


def certify_dual_infeasible(c: Poly, a: Sequence[Poly], K: SemialgSet,
                            opts: Options | None = None) -> Certificate | None:
    """Look for ``y in R_A(K)`` with ``<c, y> = -1`` and ``<a_i, y> = 0``."""
    opts = opts or Options()
    a = list(a)
    A = _support_of([c] + a, c.n)
    b = np.zeros(len(a) + 1)
    b[0] = -1.0
    res = find_feasible_moment([c] + a, b, A, K, opts)
    if res.kind != FEASIBLE_POINT or res.measure is None:
        return None
    from .extraction import verify_measure
    y = res.y_witness
    rep = verify_measure(res.measure, y, K, max(opts.tol_feas, 1e-6))
    if not (rep and verify_dual_refutation(c, a, y, max(opts.tol_feas, 1e-6))):
        return None
    return Certificate(DUAL_INFEASIBLE, y_witness=y, measure=res.measure, order=res.order,
                       residual=rep.moment_error, history=res.history)


def k_fullness(A: Support, K: SemialgSet, opts: Options | None = None) -> Certificate:
    """Decide whether ``R[x]_A`` contains a polynomial positive on ``K``.

    Searches ``lam`` with ``sum lam_a x^a - 1`` nonnegative on ``K``; a
    ``NotFull`` verdict carries a tms ``y`` with ``y_0 = 1`` and ``y_a = 0``
    for every ``a`` in ``A``.
    """
    opts = opts or Options()
    n = A.n
    zero = (0,) * n
    if zero in A:
        lam = np.zeros(len(A))
        lam[A.index(zero)] = 2.0
        k = max(math.ceil(K.max_degree / 2), 1)
        cert = sos_membership(Poly.constant(n, 1.0), [], K, k, opts.solver)
        if cert is not None:
            return Certificate(KFULL_WITNESS, lam, cert.witness, order=k, residual=cert.residual)
    c = Poly.constant(n, -1.0)
    mons = [Poly.monomial(alpha, -1.0) for alpha in A.indices]
    res = find_feasible_dual(c, mons, K, opts)
    if res.kind == FEASIBLE_POINT:
        res.kind = KFULL_WITNESS
    elif res.kind == DUAL_INFEASIBLE:
        res.kind = NOT_FULL
    return res
