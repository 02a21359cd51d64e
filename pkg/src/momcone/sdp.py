"""Dense primal-dual interior-point solver for block semidefinite programs.

Problem form (``SdpProblem``)::

    primal:  min  <C, X> + c_f' x_f
             s.t. <A_i, X> + (A_f x_f)_i = b_i,   X = diag(X_1..X_p) >= 0,  x_f free
    dual:    max  b' u
             s.t. S = C - sum_i u_i A_i >= 0,   c_f - A_f' u = 0

The solver runs Mehrotra predictor-corrector steps with Nesterov-Todd
scaling on the homogeneous self-dual embedding of this pair, so
infeasibility shows up as an improving ray rather than divergence:

* ``PrimalInfeasible``: a dual ray ``u`` with ``b'u = 1``, ``A_f'u = 0``
  and ``-sum_i u_i A_i >= 0``.
* ``DualInfeasible``: a primal ray ``(X, x_f)`` with ``X >= 0``,
  ``<A_i, X> + (A_f x_f)_i = 0`` and ``<C, X> + c_f'x_f = -1``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .errors import NumericalFailure

log = logging.getLogger(__name__)

OPTIMAL = "Optimal"
NEAR_OPTIMAL = "NearOptimal"
PRIMAL_INFEASIBLE = "PrimalInfeasible"
DUAL_INFEASIBLE = "DualInfeasible"
UNKNOWN = "Unknown"


@dataclass
class SolverOptions:
    tol_feas: float = 1e-8
    tol_gap: float = 1e-8
    tol_infeas: float = 1e-8
    tol_near: float = 1e-5
    max_iter: int = 200
    step_fraction: float = 0.99
    regularization: float = 1e-12
    verbose: bool = False


@dataclass
class SdpProblem:
    """Dense block SDP in primal standard form with free variables.

    ``A_blocks[j]`` has shape ``(m, n_j, n_j)`` and holds the symmetric
    coefficient matrices of block ``j`` for every constraint; ``A_free``
    has shape ``(m, free_dim)``.
    """

    blocks: list
    free_dim: int
    C_blocks: list
    c_free: np.ndarray
    A_blocks: list
    A_free: np.ndarray
    b: np.ndarray
    meta: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.blocks = [int(s) for s in self.blocks]
        if any(s < 1 for s in self.blocks):
            raise ValueError("block sizes must be >= 1")
        self.b = np.asarray(self.b, dtype=float).ravel()
        m = self.b.shape[0]
        self.c_free = np.asarray(self.c_free, dtype=float).ravel()
        self.A_free = np.asarray(self.A_free, dtype=float).reshape(m, self.free_dim)
        if self.c_free.shape[0] != self.free_dim:
            raise ValueError("free objective has the wrong length")
        if len(self.C_blocks) != len(self.blocks) or len(self.A_blocks) != len(self.blocks):
            raise ValueError("one objective and one constraint array per block required")
        Cs, As = [], []
        for s, C, A in zip(self.blocks, self.C_blocks, self.A_blocks):
            C = np.asarray(C, dtype=float).reshape(s, s)
            A = np.asarray(A, dtype=float).reshape(m, s, s)
            Cs.append(0.5 * (C + C.T))
            As.append(0.5 * (A + A.transpose(0, 2, 1)))
        self.C_blocks, self.A_blocks = Cs, As

    @property
    def m(self) -> int:
        return self.b.shape[0]

    @classmethod
    def empty(cls, blocks: Sequence[int], free_dim: int = 0) -> "SdpProblem":
        return cls(list(blocks), free_dim, [np.zeros((s, s)) for s in blocks], np.zeros(free_dim),
                   [np.zeros((0, s, s)) for s in blocks], np.zeros((0, free_dim)), np.zeros(0))

    def add_constraint(self, block_coeffs: Sequence, free_coeffs, rhs: float) -> int:
        """Append one equality; ``block_coeffs[j]`` is a matrix or None."""
        for j, s in enumerate(self.blocks):
            Aj = np.zeros((1, s, s)) if block_coeffs[j] is None else np.asarray(block_coeffs[j], float).reshape(1, s, s)
            self.A_blocks[j] = np.concatenate([self.A_blocks[j], 0.5 * (Aj + Aj.transpose(0, 2, 1))])
        fc = np.zeros((1, self.free_dim)) if free_coeffs is None else np.asarray(free_coeffs, float).reshape(1, self.free_dim)
        self.A_free = np.vstack([self.A_free, fc])
        self.b = np.append(self.b, float(rhs))
        return self.m - 1

    # linear maps
    def apply_A(self, X: Sequence[np.ndarray], xf: np.ndarray) -> np.ndarray:
        out = self.A_free @ xf if self.free_dim else np.zeros(self.m)
        for A, Xj in zip(self.A_blocks, X):
            out = out + np.tensordot(A, Xj, axes=([1, 2], [0, 1]))
        return out

    def apply_At(self, u: np.ndarray) -> list[np.ndarray]:
        return [np.tensordot(u, A, axes=(0, 0)) for A in self.A_blocks]

    def primal_cost(self, X, xf) -> float:
        return float(sum(np.vdot(C, Xj) for C, Xj in zip(self.C_blocks, X)) + self.c_free @ xf)

    def constraint_matrix(self) -> np.ndarray:
        """Rows of all constraints as vectors over (vec(X_1)...vec(X_p), x_f)."""
        parts = [A.reshape(self.m, s * s) for A, s in zip(self.A_blocks, self.blocks)] + [self.A_free]
        return np.hstack(parts) if parts else np.zeros((self.m, 0))

    def objective_vector(self) -> np.ndarray:
        return np.concatenate([C.ravel() for C in self.C_blocks] + [self.c_free])


@dataclass
class SdpSolution:
    status: str
    X: list | None = None
    x_free: np.ndarray | None = None
    u: np.ndarray | None = None
    S: list | None = None
    primal_objective: float = float("nan")
    dual_objective: float = float("nan")
    residuals: tuple = (float("nan"),) * 3
    ray: dict | None = None
    iterations: int = 0
    message: str = ""
    history: list = field(default_factory=list)

    @property
    def primal_values(self):
        return self.X, self.x_free

    @property
    def dual_values(self):
        return self.u, self.S

    @property
    def is_optimal(self) -> bool:
        return self.status in (OPTIMAL, NEAR_OPTIMAL)


# ---------------------------------------------------------------- helpers

def _sym(M):
    return 0.5 * (M + M.T)


def _chol(M):
    try:
        return np.linalg.cholesky(_sym(M))
    except np.linalg.LinAlgError:
        return None


def _psd_step(lmbda: np.ndarray, D: np.ndarray) -> float:
    """Largest alpha with diag(lmbda) + alpha * D >= 0."""
    r = 1.0 / np.sqrt(lmbda)
    E = np.linalg.eigvalsh(_sym(r[:, None] * D * r[None, :]))
    return np.inf if E[0] >= 0 else -1.0 / E[0]


def _jordan(A, B):
    return 0.5 * (A @ B + B @ A)


def _jordan_div(lmbda: np.ndarray, R: np.ndarray) -> np.ndarray:
    """Solve ``lmbda o X = R`` for diagonal lmbda."""
    return 2.0 * R / (lmbda[:, None] + lmbda[None, :])


@dataclass
class _Scaling:
    R: np.ndarray   # W z = R' z R,  W^T v = R v R'
    Q: np.ndarray   # W^{-1} v = Q v Q',  W^{-T} v = Q' v Q
    lmbda: np.ndarray


def _nt_scaling(X: np.ndarray, S: np.ndarray) -> _Scaling | None:
    Lx, Ls = _chol(X), _chol(S)
    if Lx is None or Ls is None:
        return None
    U, lam, Vt = np.linalg.svd(Lx.T @ Ls)
    if lam[-1] <= 0:
        return None
    isq = 1.0 / np.sqrt(lam)
    R = Ls @ Vt.T * isq[None, :]
    Q = Lx @ U * isq[None, :]
    return _Scaling(R, Q, lam)


def _reduce_rows(p: SdpProblem, tol: float):
    """Drop linearly dependent constraints; detect inconsistent ones.

    Returns (kept row indices, inconsistency ray or None).
    """
    m = p.m
    if m == 0:
        return np.arange(0), None
    M = p.constraint_matrix()
    scale = max(1.0, float(np.abs(M).max(initial=0.0)))
    Qf, Rf, piv = sla.qr(M.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(Rf)) if Rf.size else np.zeros(0)
    rank = int(np.sum(diag > tol * scale * max(M.shape)))
    if rank == m:
        return np.arange(m), None
    keep = np.sort(piv[:rank])
    drop = np.setdiff1d(np.arange(m), keep)
    # express dropped rows in terms of kept rows
    coef, *_ = np.linalg.lstsq(M[keep].T, M[drop].T, rcond=None)
    mismatch = p.b[drop] - coef.T @ p.b[keep]
    bscale = 1.0 + np.abs(p.b).max(initial=0.0)
    j = int(np.argmax(np.abs(mismatch)))
    if abs(mismatch[j]) > 1e3 * tol * bscale:
        u = np.zeros(m)
        u[drop[j]] = 1.0
        u[keep] = -coef[:, j]
        u /= float(p.b @ u)
        return keep, u
    return keep, None


def _reduce_free(A_free: np.ndarray, c_free: np.ndarray, tol: float):
    """Drop dependent free columns; return (kept cols, unbounded free ray or None)."""
    f = A_free.shape[1]
    if f == 0:
        return np.arange(0), None
    scale = max(1.0, float(np.abs(A_free).max(initial=0.0)))
    Qf, Rf, piv = sla.qr(A_free, mode="economic", pivoting=True)
    diag = np.abs(np.diag(Rf)) if Rf.size else np.zeros(0)
    rank = int(np.sum(diag > tol * scale * max(A_free.shape)))
    if rank == f:
        return np.arange(f), None
    keep = np.sort(piv[:rank])
    drop = np.setdiff1d(np.arange(f), keep)
    coef, *_ = np.linalg.lstsq(A_free[:, keep], A_free[:, drop], rcond=None)
    cscale = 1.0 + np.abs(c_free).max(initial=0.0)
    for j, d in enumerate(drop):
        xi = np.zeros(f)
        xi[d] = 1.0
        xi[keep] = -coef[:, j]
        cost = float(c_free @ xi)
        if abs(cost) > 1e3 * tol * cscale:
            return keep, -xi / cost
    return keep, None


class _KKT:
    """Factorization of the reduced Newton system for one scaling."""

    def __init__(self, A_blocks, A_free, scal, reg):
        self.A_blocks, self.A_free, self.scal = A_blocks, A_free, scal
        m = A_free.shape[0]
        H = np.zeros((m, m))
        self.At = []
        for A, sc in zip(A_blocks, scal):
            At = sc.Q.T @ A @ sc.Q            # Q' A_i Q
            F = At.reshape(m, At.shape[1] * At.shape[2])
            H += F @ F.T
            self.At.append(At)
        self.H = H
        self.f = A_free.shape[1]
        Hs = H + A_free @ A_free.T if self.f else H.copy()
        d = np.diag(Hs)
        dscale = max(1.0, float(d.max(initial=1.0)))
        self.L = None
        self.m = m
        if m == 0:
            return
        for attempt in range(6):
            shift = reg * dscale * (100.0 ** attempt)
            try:
                self.L = sla.cho_factor(Hs + shift * np.eye(m), lower=True, check_finite=False)
                break
            except (np.linalg.LinAlgError, ValueError):
                continue
        if self.L is None:
            raise NumericalFailure("Schur complement factorization failed after regularization retries")
        if self.f:
            Y = sla.cho_solve(self.L, A_free, check_finite=False)
            T = A_free.T @ Y
            T = _sym(T)
            self.Lt = None
            for attempt in range(6):
                shift = reg * max(1.0, float(np.diag(T).max(initial=1.0))) * (100.0 ** attempt)
                try:
                    self.Lt = sla.cho_factor(T + shift * np.eye(self.f), lower=True, check_finite=False)
                    break
                except (np.linalg.LinAlgError, ValueError):
                    continue
            if self.Lt is None:
                raise NumericalFailure("free-variable Schur complement factorization failed")

    def _winv(self, V_blocks):
        # (W'W)^{-1} V = N V N with N = Q Q'
        out = []
        for V, sc in zip(V_blocks, self.scal):
            N = sc.Q @ sc.Q.T
            out.append(N @ V @ N)
        return out

    def _solve_once(self, dx, dy, dz):
        m = dx.shape[0]
        r1 = dx.copy()
        for A, Wz in zip(self.A_blocks, self._winv(dz)):
            r1 += np.tensordot(A, Wz, axes=([1, 2], [0, 1]))
        if m == 0:
            dxf = np.zeros(0)
            du = np.zeros(0)
        elif self.f:
            r1 = r1 + self.A_free @ dy
            v = sla.cho_solve(self.L, r1, check_finite=False)
            dxf = sla.cho_solve(self.Lt, self.A_free.T @ v - dy, check_finite=False)
            du = sla.cho_solve(self.L, r1 - self.A_free @ dxf, check_finite=False)
        else:
            dxf = np.zeros(0)
            du = sla.cho_solve(self.L, r1, check_finite=False)
        Gu = [np.tensordot(du, A, axes=(0, 0)) for A in self.A_blocks]
        dZ = self._winv([g - z for g, z in zip(Gu, dz)])
        return du, dxf, dZ

    def _residual(self, du, dxf, dZ, dx, dy, dz):
        rx = dx - (self.A_free @ dxf if self.f else 0.0)
        for A, Z in zip(self.A_blocks, dZ):
            rx = rx - np.tensordot(A, Z, axes=([1, 2], [0, 1]))
        ry = dy - (self.A_free.T @ du if self.f else np.zeros(0))
        rz = []
        for A, Z, z, sc in zip(self.A_blocks, dZ, dz, self.scal):
            P = sc.R @ sc.R.T
            rz.append(z - (np.tensordot(du, A, axes=(0, 0)) - P @ Z @ P))
        return rx, ry, rz

    def solve(self, dx, dy, dz, refine: int = 2):
        du, dxf, dZ = self._solve_once(dx, dy, dz)
        for _ in range(refine):
            rx, ry, rz = self._residual(du, dxf, dZ, dx, dy, dz)
            cu, cf, cZ = self._solve_once(rx, ry, rz)
            du, dxf = du + cu, dxf + cf
            dZ = [a + b for a, b in zip(dZ, cZ)]
        return du, dxf, [_sym(Z) for Z in dZ]


# ---------------------------------------------------------------- solver

def solve(p: SdpProblem, opts: SolverOptions | None = None) -> SdpSolution:
    """Solve ``p`` with the homogeneous self-dual interior-point method."""
    opts = opts or SolverOptions()
    m_full, f_full = p.m, p.free_dim

    keep_rows, row_ray = _reduce_rows(p, 1e-10)
    if row_ray is not None:
        return _finish_primal_infeasible(p, row_ray, 0, "inconsistent linear equalities")
    keep_free, free_ray = _reduce_free(p.A_free[keep_rows], p.c_free, 1e-10)
    if free_ray is not None:
        return _finish_dual_infeasible(p, [np.zeros((s, s)) for s in p.blocks], free_ray, 0,
                                       "free variables give an unbounded direction")

    b = p.b[keep_rows]
    A_blocks = [A[keep_rows] for A in p.A_blocks]
    A_free = p.A_free[np.ix_(keep_rows, keep_free)]
    c_free = p.c_free[keep_free]
    C = p.C_blocks
    m, f = b.shape[0], c_free.shape[0]
    nu = sum(p.blocks)

    def At(u):
        return [np.tensordot(u, A, axes=(0, 0)) for A in A_blocks]

    def Aop(X, xf):
        out = A_free @ xf if f else np.zeros(m)
        for A, Xj in zip(A_blocks, X):
            out = out + np.tensordot(A, Xj, axes=([1, 2], [0, 1]))
        return out

    def inner(U, V):
        return float(sum(np.vdot(a, c) for a, c in zip(U, V)))

    norm_b = max(1.0, float(np.linalg.norm(b)))
    norm_c = max(1.0, float(np.sqrt(inner(C, C) + c_free @ c_free)))

    xi = 1.0 + max(float(np.abs(b).max(initial=0.0)),
                   max((float(np.abs(Cj).max(initial=0.0)) for Cj in C), default=0.0),
                   float(np.abs(c_free).max(initial=0.0)))
    X = [xi * np.eye(s) for s in p.blocks]
    S = [xi * np.eye(s) for s in p.blocks]
    u = np.zeros(m)
    xf = np.zeros(f)
    tau, kappa = 1.0, 1.0

    best = None
    history = []
    status, message = UNKNOWN, "iteration limit reached"
    it = 0
    for it in range(opts.max_iter + 1):
        # residuals of the embedding
        Rx = Aop(X, xf) - b * tau
        Ry = c_free * tau - (A_free.T @ u if f else np.zeros(0))
        AtU = At(u)
        Rz = [Cj * tau - G - Sj for Cj, G, Sj in zip(C, AtU, S)]
        pcost_raw = inner(C, X) + float(c_free @ xf)
        dcost_raw = float(b @ u)
        Rt = dcost_raw - pcost_raw - kappa
        gap_raw = inner(S, X)
        mu = (gap_raw + tau * kappa) / (nu + 1)

        if not tau > 1e-150 * max(1.0, kappa):
            message = "homogenizing variable vanished (problem likely weakly infeasible)"
            break
        pres = float(np.linalg.norm(Rx)) / tau / norm_b
        dres = float(np.sqrt(inner(Rz, Rz) + Ry @ Ry)) / tau / norm_c
        pobj, dobj = pcost_raw / tau, dcost_raw / tau
        gap = gap_raw / tau ** 2
        relgap = max(abs(pobj - dobj), gap) / (1.0 + abs(pobj) + abs(dobj))
        history.append((it, pobj, dobj, pres, dres, relgap, tau, kappa))
        if opts.verbose:
            log.info("%3d pobj %.9e dobj %.9e pres %.2e dres %.2e gap %.2e tau %.2e kap %.2e",
                     it, pobj, dobj, pres, dres, relgap, tau, kappa)

        score = max(pres, dres, relgap)
        if best is None or score < best[0]:
            best = (score, [x / tau for x in X], xf / tau, u / tau, [s / tau for s in S], pobj, dobj,
                    (pres, dres, relgap))

        if pres <= opts.tol_feas and dres <= opts.tol_feas and relgap <= opts.tol_gap:
            status, message = OPTIMAL, "converged"
            break
        # infeasibility tests on the unnormalized iterate
        if dcost_raw > 0:
            ray_res = max(float(np.linalg.norm(A_free.T @ u)) / max(1.0, float(np.linalg.norm(c_free))) if f else 0.0,
                          float(np.sqrt(sum(np.sum((G + Sj) ** 2) for G, Sj in zip(AtU, S)))) / norm_c)
            if ray_res / dcost_raw <= opts.tol_infeas:
                uu = np.zeros(m_full)
                uu[keep_rows] = u
                return _finish_primal_infeasible(p, uu / dcost_raw, it, "dual improving ray", history)
        if pcost_raw < 0:
            ray_res = float(np.linalg.norm(Aop(X, xf))) / norm_b
            if ray_res / (-pcost_raw) <= opts.tol_infeas:
                xff = np.zeros(f_full)
                xff[keep_free] = xf
                return _finish_dual_infeasible(p, [x / -pcost_raw for x in X], xff / -pcost_raw, it,
                                               "primal improving ray", history)
        if it == opts.max_iter:
            break

        scal = [_nt_scaling(Xj, Sj) for Xj, Sj in zip(X, S)]
        if any(s is None for s in scal):
            message = "lost positive definiteness"
            break
        try:
            kkt = _KKT(A_blocks, A_free, scal, opts.regularization)
        except NumericalFailure as exc:
            if it == 0:
                raise
            message = str(exc)
            break

        # first solve: direction of tau
        u1, f1, Z1 = kkt.solve(b, c_free, C)
        wz1 = sum(float(np.sum((sc.R.T @ Z @ sc.R) ** 2)) for Z, sc in zip(Z1, scal))
        lam = [sc.lmbda for sc in scal]

        def direction(eta, rs, rk):
            dzs = [eta * rz - sc.R @ _jordan_div(sc.lmbda, r) @ sc.R.T for rz, r, sc in zip(Rz, rs, scal)]
            u2, f2, Z2 = kkt.solve(-eta * Rx, eta * Ry, dzs)
            num = (-eta * Rt + rk / tau - float(b @ u2) + float(c_free @ f2) + inner(C, Z2))
            dtau = num / (wz1 + kappa / tau)
            du = u2 + dtau * u1
            dxf = f2 + dtau * f1
            dX = [a + dtau * c for a, c in zip(Z2, Z1)]
            dS = []
            for Zb, r, sc in zip(dX, rs, scal):
                P = sc.R @ sc.R.T
                dS.append(_sym(sc.R @ _jordan_div(sc.lmbda, r) @ sc.R.T - P @ Zb @ P))
            dkappa = (rk - kappa * dtau) / tau
            return du, dxf, dX, dS, dtau, dkappa

        def max_step(dX, dS, dtau, dkappa):
            amax = np.inf
            for Zb, Sb, sc in zip(dX, dS, scal):
                amax = min(amax, _psd_step(sc.lmbda, sc.R.T @ Zb @ sc.R), _psd_step(sc.lmbda, sc.Q.T @ Sb @ sc.Q))
            if dtau < 0:
                amax = min(amax, -tau / dtau)
            if dkappa < 0:
                amax = min(amax, -kappa / dkappa)
            return amax

        # predictor
        rs_aff = [-np.diag(l ** 2) for l in lam]
        aff = direction(1.0, rs_aff, -tau * kappa)
        a_aff = min(1.0, max_step(*aff[2:]))
        sigma = (1.0 - a_aff) ** 3
        # corrector
        rs = []
        for l, Zb, Sb, sc in zip(lam, aff[2], aff[3], scal):
            dz_s = sc.R.T @ Zb @ sc.R
            ds_s = sc.Q.T @ Sb @ sc.Q
            rs.append(sigma * mu * np.eye(len(l)) - np.diag(l ** 2) - _jordan(ds_s, dz_s))
        rk = sigma * mu - tau * kappa - aff[4] * aff[5]
        du, dxf, dX, dS, dtau, dkappa = direction(1.0 - sigma, rs, rk)
        alpha = min(1.0, opts.step_fraction * max_step(dX, dS, dtau, dkappa))
        if not np.isfinite(alpha) or alpha < 1e-10:
            message = "step length collapsed"
            break
        # keep iterates strictly interior
        for _ in range(20):
            Xn = [_sym(Xj + alpha * d) for Xj, d in zip(X, dX)]
            Sn = [_sym(Sj + alpha * d) for Sj, d in zip(S, dS)]
            if all(_chol(M) is not None for M in Xn + Sn):
                break
            alpha *= 0.8
        else:
            message = "could not stay interior"
            break
        X, S = Xn, Sn
        u = u + alpha * du
        xf = xf + alpha * dxf
        tau = tau + alpha * dtau
        kappa = kappa + alpha * dkappa

    # return the best iterate seen
    score, Xb, xfb, ub, Sb, pobj, dobj, res = best
    if status != OPTIMAL:
        status = NEAR_OPTIMAL if score <= opts.tol_near else UNKNOWN
    else:
        Xb, xfb, ub, Sb = [x / tau for x in X], xf / tau, u / tau, [s / tau for s in S]
        pobj, dobj, res = pcost_raw / tau, dcost_raw / tau, (pres, dres, relgap)
    uu = np.zeros(m_full)
    uu[keep_rows] = ub
    xff = np.zeros(f_full)
    xff[keep_free] = xfb
    return SdpSolution(status, Xb, xff, uu, Sb, pobj, dobj, res, None, it, message, history)


def _finish_primal_infeasible(p, u, it, message, history=None):
    S = [-G for G in p.apply_At(u)]
    return SdpSolution(PRIMAL_INFEASIBLE, u=u, S=S, ray={"u": u, "S": S}, iterations=it,
                       message=message, history=history or [])


def _finish_dual_infeasible(p, X, xf, it, message, history=None):
    return SdpSolution(DUAL_INFEASIBLE, X=X, x_free=xf, ray={"X": X, "x_free": xf}, iterations=it,
                       message=message, history=history or [])


# ---------------------------------------------------------------- verification

@dataclass
class CertificateReport:
    ok: bool
    status: str
    checks: dict

    def __bool__(self):
        return self.ok


def _min_eig(M) -> float:
    return float(np.linalg.eigvalsh(_sym(M))[0]) if M.size else 0.0


def verify_certificate(p: SdpProblem, s: SdpSolution, opts: SolverOptions | None = None,
                       factor: float = 10.0) -> CertificateReport:
    """Recompute residuals or ray inequalities from scratch.

    A check fails when it is violated by more than ``factor`` times the
    declared tolerance (``tol_near`` for NearOptimal solutions).
    """
    opts = opts or SolverOptions()
    checks = {}
    if s.status in (OPTIMAL, NEAR_OPTIMAL):
        tol = factor * (opts.tol_feas if s.status == OPTIMAL else opts.tol_near)
        gtol = factor * (opts.tol_gap if s.status == OPTIMAL else opts.tol_near)
        X, xf, u, S = s.X, s.x_free, s.u, s.S
        norm_b = max(1.0, float(np.linalg.norm(p.b)))
        norm_c = max(1.0, float(np.linalg.norm(p.objective_vector())))
        pres = float(np.linalg.norm(p.apply_A(X, xf) - p.b)) / norm_b
        Rz = [C - G - Sj for C, G, Sj in zip(p.C_blocks, p.apply_At(u), S)]
        Ry = p.c_free - p.A_free.T @ u
        dres = float(np.sqrt(sum(np.sum(r ** 2) for r in Rz) + Ry @ Ry)) / norm_c
        pobj, dobj = p.primal_cost(X, xf), float(p.b @ u)
        relgap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        xmin = min((_min_eig(Xj) / max(1.0, np.abs(Xj).max()) for Xj in X), default=0.0)
        smin = min((_min_eig(Sj) / max(1.0, np.abs(Sj).max()) for Sj in S), default=0.0)
        checks = {
            "primal_residual": (pres, pres <= tol),
            "dual_residual": (dres, dres <= tol),
            "relative_gap": (relgap, relgap <= gtol),
            "primal_psd": (xmin, xmin >= -tol),
            "dual_psd": (smin, smin >= -tol),
            "weak_duality": (pobj - dobj, pobj >= dobj - 1e-6 * (1 + abs(pobj))),
        }
    elif s.status == PRIMAL_INFEASIBLE:
        u = s.ray["u"]
        tol = factor * opts.tol_infeas * 100
        bu = float(p.b @ u)
        scale = max(abs(bu), 1e-300)
        negAt = [-G for G in p.apply_At(u)]
        eig = min((_min_eig(G) for G in negAt), default=0.0) / scale
        free_res = float(np.linalg.norm(p.A_free.T @ u)) / scale if p.free_dim else 0.0
        checks = {
            "b_dot_u_positive": (bu, bu > 0),
            "dual_cone": (eig, eig >= -tol),
            "free_rows": (free_res, free_res <= tol),
        }
    elif s.status == DUAL_INFEASIBLE:
        X, xf = s.ray["X"], s.ray["x_free"]
        tol = factor * opts.tol_infeas * 100
        cost = p.primal_cost(X, xf)
        scale = max(abs(cost), 1e-300)
        res = float(np.linalg.norm(p.apply_A(X, xf))) / scale
        eig = min((_min_eig(Xj) for Xj in X), default=0.0) / scale
        checks = {
            "cost_negative": (cost, cost < 0),
            "homogeneous_feasible": (res, res <= tol),
            "primal_cone": (eig, eig >= -tol),
        }
    else:
        checks = {"status": (s.status, False)}
    ok = all(v[1] for v in checks.values())
    return CertificateReport(ok, s.status, checks)


# ---------------------------------------------------------------- SDPA dump

def write_sdpa(p: SdpProblem, path) -> None:
    """Write ``p`` in SDPA sparse format (see README for the convention).

    SDPA solves ``max <F0, Y> s.t. <F_i, Y> = c_i, Y >= 0``; we emit
    ``F0 = -C``, ``F_i = A_i`` and ``c = b``.  Free variables become a
    diagonal block of size ``2 * free_dim`` holding ``x_f = x+ - x-``.
    """
    blocks = list(p.blocks)
    sizes = [str(s) for s in blocks]
    if p.free_dim:
        sizes.append(str(-2 * p.free_dim))
    lines = [f"* momcone SDP dump: {p.m} constraints, {len(blocks)} PSD blocks, {p.free_dim} free",
             str(p.m), str(len(sizes)), " ".join(sizes), " ".join(f"{v:.17g}" for v in p.b)]

    def emit(mat_no, blk, M):
        iu = np.triu_indices(M.shape[0])
        for i, j in zip(*iu):
            if M[i, j] != 0:
                lines.append(f"{mat_no} {blk} {i + 1} {j + 1} {M[i, j]:.17g}")

    for j, C in enumerate(p.C_blocks):
        emit(0, j + 1, -C)
    if p.free_dim:
        for k, c in enumerate(p.c_free):
            if c:
                lines.append(f"0 {len(blocks) + 1} {k + 1} {k + 1} {-c:.17g}")
                lines.append(f"0 {len(blocks) + 1} {p.free_dim + k + 1} {p.free_dim + k + 1} {c:.17g}")
    for i in range(p.m):
        for j, A in enumerate(p.A_blocks):
            emit(i + 1, j + 1, A[i])
        if p.free_dim:
            for k, a in enumerate(p.A_free[i]):
                if a:
                    lines.append(f"{i + 1} {len(blocks) + 1} {k + 1} {k + 1} {a:.17g}")
                    lines.append(f"{i + 1} {len(blocks) + 1} {p.free_dim + k + 1} {p.free_dim + k + 1} {-a:.17g}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
