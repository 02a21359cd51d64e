"""Order-k moment relaxations of linear moment problems and their SOS duals.

The linear problem over the moment cone is::

    min <c, y>  s.t.  <a_i, y> = b_i,  y in R_A(K)

and its dual asks for the largest ``b' lam`` with ``c - sum lam_i a_i``
nonnegative on ``K``.  At order ``k`` the moment side replaces ``R_A(K)``
by the truncations of tms' ``w`` on ``basis(n, 2k)`` with PSD localizing
matrices and vanishing ideal rows; the SOS side replaces nonnegativity by
membership in ``Q_k(g) + I_2k(h)``.

Both sides come out of a single block SDP.  The SOS side is the SDP
primal (one Gram block per ``g_j``, free ``lam`` and ideal multipliers,
one equality per monomial of degree ``<= 2k``); the moment vector is the
negated SDP dual vector.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import sdp
from .algebra import Poly, Support, Tms, basis, mi_add, restrict
from .errors import DecodeFailure, DimensionMismatch, OrderTooSmall
from .momkit import SemialgSet, localizing_operator

OPTIMAL = "Optimal"
NEAR_OPTIMAL = "NearOptimal"
INFEASIBLE = "Infeasible"      # moment side infeasible
UNBOUNDED = "Unbounded"        # moment side unbounded below (SOS side infeasible)
UNKNOWN = "Unknown"

WITNESS_TOL = 1e-6


@dataclass
class MomentLP:
    """``min <c, y> s.t. <a_i, y> = b_i, y in R_A(K)``."""

    A: Support
    a: list
    b: np.ndarray
    c: Poly
    K: SemialgSet

    def __post_init__(self):
        self.a = list(self.a)
        self.b = np.asarray(self.b, dtype=float).ravel()
        if len(self.a) != len(self.b):
            raise DimensionMismatch(f"{len(self.a)} constraint polynomials but {len(self.b)} right-hand sides")
        for p in self.a + [self.c]:
            if p.n != self.A.n or p.n != self.K.n:
                raise DimensionMismatch("polynomials, support and K must share the number of variables")
            if not p.support.issubset(self.A):
                raise DimensionMismatch("polynomial has terms outside the support A")

    @property
    def n(self) -> int:
        return self.A.n

    @property
    def m(self) -> int:
        return len(self.a)

    def min_order(self) -> int:
        """Smallest order the relaxation accepts."""
        return max(math.ceil(self.A.degree / 2), math.ceil(self.K.max_degree / 2), 1)

    def c_of(self, lam) -> Poly:
        """``c(lam) = c - sum lam_i a_i``."""
        out = self.c
        for li, ai in zip(lam, self.a):
            out = out - float(li) * ai
        return out


@dataclass
class SosWitness:
    """``target = sum_j g_j v_j' G_j v_j + sum_i h_i phi_i`` with ``g_0 = 1``."""

    gram_supports: list
    grams: list
    g: list
    h: list
    phi: list

    def sigma(self, j: int) -> Poly:
        return gram_to_poly(self.gram_supports[j], self.grams[j])

    def expand(self) -> Poly:
        n = self.gram_supports[0].n
        total = Poly(n)
        for j, gj in enumerate(self.g):
            total = total + gj * self.sigma(j)
        for hi, ph in zip(self.h, self.phi):
            total = total + hi * ph
        return total

    def min_eigenvalues(self) -> list[float]:
        return [float(np.linalg.eigvalsh(G)[0]) if G.size else 0.0 for G in self.grams]

    def to_json(self) -> dict:
        return {
            "grams": [G.tolist() for G in self.grams],
            "gram_supports": [[list(a) for a in s.indices] for s in self.gram_supports],
            "phi": [p.to_terms() for p in self.phi],
        }


@dataclass
class WitnessReport:
    ok: bool
    residual: float
    min_eig: float

    def __bool__(self):
        return self.ok


def scale_witness(wit: SosWitness, t: float) -> SosWitness:
    return SosWitness(wit.gram_supports, [t * G for G in wit.grams], wit.g, wit.h, [t * p for p in wit.phi])


def gram_to_poly(sup: Support, G: np.ndarray) -> Poly:
    terms: dict = {}
    idx = sup.indices
    for i in range(len(idx)):
        for j in range(len(idx)):
            if G[i, j] != 0.0:
                key = mi_add(idx[i], idx[j])
                terms[key] = terms.get(key, 0.0) + float(G[i, j])
    return Poly(sup.n, terms)


def verify_sos_witness(target: Poly, wit: SosWitness, tol: float = WITNESS_TOL,
                       psd_tol: float | None = None) -> WitnessReport:
    """Expand ``wit`` and compare with ``target`` coefficientwise.

    Gram blocks must have smallest eigenvalue at least ``-psd_tol`` times
    their scale (default: ``tol``).
    """
    res = target.max_abs_diff(wit.expand())
    psd_tol = tol if psd_tol is None else psd_tol
    mins = [e / max(1.0, float(np.abs(G).max()) if G.size else 1.0)
            for e, G in zip(wit.min_eigenvalues(), wit.grams)]
    me = min(mins, default=0.0)
    return WitnessReport(bool(res <= tol and me >= -psd_tol), float(res), float(me))


@dataclass
class RelaxationResult:
    k: int
    status: str
    y_star: Tms | None = None
    w_star: Tms | None = None
    lambda_star: np.ndarray | None = None
    c_k: float = float("nan")
    b_k: float = float("nan")
    witness: SosWitness | None = None
    witness_residual: float = float("nan")
    ray: dict | None = None
    solution: sdp.SdpSolution | None = field(default=None, repr=False)
    message: str = ""

    @property
    def is_optimal(self) -> bool:
        return self.status in (OPTIMAL, NEAR_OPTIMAL)


# ---------------------------------------------------------------- assembly

def _check_order(n: int, k: int, K: SemialgSet, polys: Sequence[Poly]):
    if k < 1:
        raise OrderTooSmall("relaxation order must be at least 1")
    for p in list(polys) + list(K.h) + list(K.g):
        if p.degree > 2 * k:
            raise OrderTooSmall(f"order {k} too small for a polynomial of degree {p.degree}")


def _ideal_face(h_list: Sequence[Poly], rows: Support, tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis of the complement of ``span{h_i p : deg(h_i p) <= deg(rows)}``.

    Those vectors lie in the kernel of every localizing matrix of a tms
    satisfying the ideal rows, so Gram blocks can be restricted to the
    complement without changing either side of the relaxation.
    """
    s = len(rows)
    top = rows.degree
    vecs = []
    for h in h_list:
        if h.degree > top:
            continue
        for beta in basis(rows.n, top - h.degree).indices:
            v = np.zeros(s)
            for gamma, c in h.terms.items():
                v[rows.index(mi_add(gamma, beta))] += c
            vecs.append(v)
    if not vecs:
        return np.eye(s)
    U, sv, _ = np.linalg.svd(np.array(vecs).T, full_matrices=True)
    r = int(np.sum(sv > tol * max(1.0, sv[0])))
    return U[:, r:]


def assemble(K: SemialgSet, k: int, c: Poly, a: Sequence[Poly], lam_cost,
             extra_rows: Sequence[tuple] = (), face_reduce: bool = True,
             lam_slack: float | None = None) -> sdp.SdpProblem:
    """SOS-side SDP: ``min -lam_cost' lam`` s.t. ``c - sum lam_i a_i in Q_k(g) + I_2k(h)``.

    The monomial equations are projected onto the orthogonal complement of
    the ideal columns (removing the ideal multipliers) and every Gram block
    is restricted to the face left free by the ideal.  ``extra_rows`` holds
    ``(coeffs over lam, rhs)`` pairs appended as equalities on ``lam``.  The
    layout needed for decoding is stored in ``meta``.

    With ``lam_slack = delta`` the moment-side equalities ``<a_i, w> = b_i``
    become ``|<a_i, w> - b_i| <= delta``; on the SOS side ``lam`` is split
    into nonnegative parts (1x1 blocks) and the objective gains
    ``-delta |lam|_1``.
    """
    if lam_slack is not None and extra_rows:
        raise ValueError("lam_slack and extra_rows cannot be combined")
    n = K.n
    _check_order(n, k, K, list(a) + [c])
    amb = basis(n, 2 * k)
    N = len(amb)
    one = Poly.constant(n, 1.0)
    gs = [one] + list(K.g)
    ops = [localizing_operator(g, k, amb) for g in gs]
    tensors = [op.tensor() for op in ops]
    faces = [_ideal_face(K.h, op.row_support) if face_reduce else np.eye(op.size) for op in ops]

    m = len(a)
    A_lam = np.zeros((N, m))
    for i, ai in enumerate(a):
        for alpha, v in ai.terms.items():
            A_lam[amb.index(alpha), i] += v
    mults = [basis(n, 2 * k - h.degree) for h in K.h]
    cols = []
    for h, ms in zip(K.h, mults):
        for beta in ms.indices:
            v = np.zeros(N)
            for gamma, cf in h.terms.items():
                v[amb.index(mi_add(gamma, beta))] += cf
            cols.append(v)
    A_phi = np.array(cols).T if cols else np.zeros((N, 0))
    if A_phi.shape[1]:
        U, sv, _ = np.linalg.svd(A_phi, full_matrices=True)
        r = int(np.sum(sv > 1e-10 * max(1.0, sv[0])))
        P = U[:, r:].T
    else:
        P = np.eye(N)

    c_full = c.coefficients(amb)
    rhs = P @ c_full
    A_free = P @ A_lam
    red = [np.tensordot(P, np.einsum("ia,gij,jb->gab", V, T, V), axes=(1, 0))
           for V, T in zip(faces, tensors)]
    keep_blocks = [j for j, V in enumerate(faces) if V.shape[1] > 0]
    A_blocks = [red[j] for j in keep_blocks]
    if extra_rows:
        E = np.array([np.asarray(coef, dtype=float) for coef, _ in extra_rows]).reshape(len(extra_rows), m)
        A_free = np.vstack([A_free, E])
        rhs = np.concatenate([rhs, [float(v) for _, v in extra_rows]])
        A_blocks = [np.concatenate([T, np.zeros((len(extra_rows),) + T.shape[1:])]) for T in A_blocks]
    blocks = [faces[j].shape[1] for j in keep_blocks]
    C_blocks = [np.zeros((s, s)) for s in blocks]
    cost = np.asarray(lam_cost, dtype=float)
    if lam_slack is not None:
        for sign in (1.0, -1.0):
            for i in range(m):
                blocks.append(1)
                C_blocks.append(np.array([[-sign * cost[i] + lam_slack]]))
                A_blocks.append((sign * A_free[:, i]).reshape(-1, 1, 1))
        p = sdp.SdpProblem(blocks, 0, C_blocks, np.zeros(0), A_blocks, np.zeros((len(rhs), 0)), rhs)
    else:
        p = sdp.SdpProblem(blocks, m, C_blocks, -cost, A_blocks, A_free, rhs)
    p.meta = {"lam_mode": "split" if lam_slack is not None else "free", "n_gram": len(keep_blocks), "k": k, "n": n, "ambient": amb, "gram_supports": [op.row_support for op in ops],
              "g": gs, "h": list(K.h), "mults": mults, "m": m, "n_extra": len(extra_rows),
              "P": P, "faces": faces, "keep_blocks": keep_blocks, "tensors": tensors,
              "A_lam": A_lam, "A_phi": A_phi, "c_full": c_full}
    return p


def lam_from(p: sdp.SdpProblem, X, xf) -> np.ndarray:
    """The ``lam`` part of an SDP primal point (or ray)."""
    m = p.meta["m"]
    if p.meta["lam_mode"] == "split":
        vals = np.array([float(B[0, 0]) for B in X[p.meta["n_gram"]:]])
        return vals[:m] - vals[m:]
    return np.asarray(xf[:m], dtype=float)


def moment_vector(p: sdp.SdpProblem, u: np.ndarray) -> np.ndarray:
    """Moment-side tms values on ``basis(n, 2k)`` from the SDP dual vector."""
    P = p.meta["P"]
    return -(P.T @ u[:P.shape[0]])


def build_relaxation(lp: MomentLP, k: int) -> sdp.SdpProblem:
    """Order-``k`` relaxation of ``lp`` as a block SDP (see module docstring)."""
    if 2 * k < lp.A.degree:
        raise OrderTooSmall(f"order {k} below deg(A)/2 = {lp.A.degree / 2}")
    return assemble(lp.K, k, lp.c, lp.a, lp.b)


# ---------------------------------------------------------------- decoding

def _witness_from(p: sdp.SdpProblem, Y, lam, homogeneous: bool = False) -> SosWitness:
    """Lift reduced Gram blocks and solve for the ideal multipliers.

    With ``homogeneous`` the target is ``-sum lam_i a_i`` (a ray) instead
    of ``c - sum lam_i a_i``.
    """
    meta = p.meta
    grams = []
    Yit = iter(Y)
    for j, V in enumerate(meta["faces"]):
        if j in meta["keep_blocks"]:
            Yj = next(Yit)
            grams.append(V @ Yj @ V.T)
        else:
            grams.append(np.zeros((V.shape[0], V.shape[0])))
    resid = -meta["A_lam"] @ lam
    if not homogeneous:
        resid = resid + meta["c_full"]
    for T, G in zip(meta["tensors"], grams):
        resid = resid - np.tensordot(T, G, axes=([1, 2], [0, 1]))
    phi = []
    if meta["A_phi"].shape[1]:
        coef = np.linalg.lstsq(meta["A_phi"], resid, rcond=None)[0]
        col = 0
        for ms in meta["mults"]:
            phi.append(Poly.from_vector(ms, coef[col:col + len(ms)]))
            col += len(ms)
    return SosWitness(list(meta["gram_supports"]), grams, list(meta["g"]), list(meta["h"]), phi)


def polish(p: sdp.SdpProblem, X, xf, rhs: np.ndarray | None = None):
    """Least-norm correction so that the equalities hold to machine precision."""
    Xv = np.concatenate([Xj.ravel() for Xj in X] + [np.asarray(xf, dtype=float)])
    M = p.constraint_matrix()
    r = (p.b if rhs is None else rhs) - M @ Xv
    Xv = Xv + np.linalg.lstsq(M, r, rcond=None)[0]
    out, pos = [], 0
    for s in p.blocks:
        G = Xv[pos:pos + s * s].reshape(s, s)
        out.append(0.5 * (G + G.T))
        pos += s * s
    return out, Xv[pos:]


def ray_certificate(p: sdp.SdpProblem, X, xf, a: Sequence[Poly], tol: float = WITNESS_TOL):
    """Turn an SDP primal ray into ``(lam, witness, report)``.

    The ray satisfies ``sum lam_i a_i in Q_k(g) + I_2k(h)`` with
    ``lam = -lam_ray``; ``witness`` reproduces ``sum lam_i a_i``.  The
    ray is scaled so that ``|lam|_inf = 1`` before polishing.
    """
    lam_ray = lam_from(p, X, xf)
    scale = max(float(np.abs(lam_ray).max(initial=0.0)), 1e-300)
    X2, xf2 = polish(p, [Xj / scale for Xj in X], np.asarray(xf, dtype=float) / scale, np.zeros(p.m))
    lam_ray = lam_from(p, X2, xf2)
    wit = _witness_from(p, X2, lam_ray, homogeneous=True)
    lam = -lam_ray
    target = Poly(p.meta["n"])
    for li, ai in zip(lam, a):
        target = target + float(li) * ai
    rep = verify_sos_witness(target, wit, tol)
    return lam, wit, rep


def recover_dual_multipliers(lp: MomentLP, k: int, sol: sdp.SdpSolution, p: sdp.SdpProblem | None = None,
                             tol: float = WITNESS_TOL):
    """``(lam, witness)`` from an optimal solve of ``build_relaxation(lp, k)``.

    Raises ``DecodeFailure`` when the re-expanded witness misses ``c(lam)``
    by more than ``tol`` or a Gram block is not PSD to that tolerance.
    """
    if not sol.is_optimal:
        raise DecodeFailure(f"solution status {sol.status} carries no multipliers")
    p = p if p is not None else build_relaxation(lp, k)
    return _decode_witness(p, sol.X, sol.x_free, lp.c, lp.a, tol)


def _decode_witness(p, X, xf, c, a, tol):
    X2, xf2 = polish(p, X, xf)
    lam = lam_from(p, X2, xf2)
    wit = _witness_from(p, X2, lam)
    target = c
    for li, ai in zip(lam, a):
        target = target - float(li) * ai
    rep = verify_sos_witness(target, wit, tol)
    if not rep.ok:
        raise DecodeFailure(f"SOS witness fails re-verification (residual {rep.residual:.2e}, "
                            f"min eigenvalue {rep.min_eig:.2e})")
    return lam, wit


def solve_relaxation(lp: MomentLP, k: int, opts: sdp.SolverOptions | None = None) -> RelaxationResult:
    """Solve the order-``k`` pair and decode both sides."""
    p = build_relaxation(lp, k)
    sol = sdp.solve(p, opts)
    amb = p.meta["ambient"]
    if sol.status == sdp.DUAL_INFEASIBLE:
        # SOS side unbounded above: a ray lam' = -lam_ray certifies the moment side infeasible
        lam, wit, rep = ray_certificate(p, sol.ray["X"], sol.ray["x_free"], lp.a)
        bl = float(lp.b @ lam)
        if bl < 0:
            lam = lam / -bl
            wit = scale_witness(wit, 1.0 / -bl)
        return RelaxationResult(k, INFEASIBLE, lambda_star=lam, witness=wit if rep else None,
                                witness_residual=rep.residual,
                                ray={"lambda": lam, "b_dot_lambda": float(lp.b @ lam), "verified": bool(rep) and bl < 0},
                                solution=sol, message=sol.message)
    if sol.status == sdp.PRIMAL_INFEASIBLE:
        w = Tms(amb, moment_vector(p, sol.ray["u"]))
        return RelaxationResult(k, UNBOUNDED, ray={"w": w}, solution=sol, message=sol.message)
    if not sol.is_optimal:
        return RelaxationResult(k, UNKNOWN, solution=sol, message=sol.message)
    w = Tms(amb, moment_vector(p, sol.u))
    y = restrict(w, lp.A)
    status = OPTIMAL if sol.status == sdp.OPTIMAL else NEAR_OPTIMAL
    msg = sol.message
    try:
        lam, wit = recover_dual_multipliers(lp, k, sol, p)
        resid = verify_sos_witness(lp.c_of(lam), wit).residual
    except DecodeFailure as exc:
        lam, wit, resid = np.asarray(sol.x_free[:lp.m]), None, float("nan")
        status = NEAR_OPTIMAL
        msg = f"{msg}; {exc}"
    return RelaxationResult(k, status, y, w, lam, -sol.dual_objective, -sol.primal_objective,
                            wit, resid, None, sol, msg)


# ---------------------------------------------------------------- standalone programs

def lasserre_lower_bound(f: Poly, K: SemialgSet, k: int, opts: sdp.SolverOptions | None = None,
                         return_result: bool = False):
    """``f_k = max gamma`` s.t. ``f - gamma in Q_k(g) + I_2k(h)``; ``-inf`` if infeasible.

    With ``return_result`` the full ``RelaxationResult`` is returned
    (its ``w_star`` is the moment-side minimizer, ``lambda_star = [f_k]``).
    """
    if f.n != K.n:
        raise DimensionMismatch("f and K differ in the number of variables")
    A = basis(K.n, 2 * k)
    lp = MomentLP(A, [Poly.constant(K.n, 1.0)], [1.0], f, K)
    res = solve_relaxation(lp, k, opts)
    if return_result:
        return res
    if res.status == UNBOUNDED:
        return -math.inf
    if res.is_optimal:
        return float(res.b_k)
    if res.status == INFEASIBLE:
        # empty K at this order: every gamma is feasible
        return math.inf
    raise DecodeFailure(f"Lasserre relaxation at order {k} ended with {res.status}: {res.message}")


@dataclass
class SosCertificate:
    lam: np.ndarray
    witness: SosWitness
    k: int
    residual: float


def sos_membership(f: Poly, lin: Sequence[Poly], K: SemialgSet, k: int,
                   opts: sdp.SolverOptions | None = None) -> SosCertificate | None:
    """Find ``lam`` with ``f - sum lam_i lin_i in Q_k(g) + I_2k(h)``; ``None`` when infeasible at order ``k``."""
    lin = list(lin)
    for p in lin:
        if p.n != f.n:
            raise DimensionMismatch("f and lin must share the number of variables")
    p = assemble(K, k, f, lin, np.zeros(len(lin)))
    sol = sdp.solve(p, opts)
    if not sol.is_optimal:
        return None
    try:
        lam, wit = _decode_witness(p, sol.X, sol.x_free, f, lin, WITNESS_TOL)
    except DecodeFailure:
        return None
    target = f
    for li, ai in zip(lam, lin):
        target = target - float(li) * ai
    return SosCertificate(lam, wit, k, verify_sos_witness(target, wit).residual)
