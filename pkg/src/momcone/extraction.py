"""Numerical rank, flatness and atom extraction from flat tms'.

Extraction follows the multiplication-operator approach: a column basis
of the moment matrix spans the quotient space of polynomials modulo the
kernel, the shift maps ``p -> x_i p`` act on it as ``r x r`` matrices
``N_i`` and their common eigenvectors give the atoms.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import nnls

from .algebra import AtomicMeasure, Tms, basis, mi_add, restrict, tms_from_atoms, unit
from .errors import ExtractionFailure, OrderTooSmall
from .momkit import SemialgSet, d_K, localizing_matrix, moment_matrix_fast

RANK_TOL = 1e-6
BORDERLINE_FACTOR = 10.0


def numeric_rank(M: np.ndarray, tol: float = RANK_TOL) -> int:
    """Number of singular values ``>= tol * max(sigma_max, 1)``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s >= tol * max(s[0], 1.0)))


def _ambiguous(M: np.ndarray, tol: float, factor: float) -> bool:
    """Some singular value sits within ``factor`` of the rank threshold."""
    if M.size == 0:
        return False
    s = np.linalg.svd(M, compute_uv=False)
    thr = tol * max(s[0], 1.0)
    return bool(np.any((s >= thr / factor) & (s < thr * factor)))


def _order_of(z: Tms) -> int:
    return z.support.degree // 2


@dataclass
class RankProfile:
    """Ranks of ``M_t(z)`` for ``t = 0..k`` and the flatness verdict."""

    k: int
    ranks: list
    tol: float
    flat_at: int | None = None
    d_K: int = 1
    localizing_ok: bool = True
    borderline: bool = False
    details: dict = field(default_factory=dict)

    @property
    def is_flat(self) -> bool:
        return self.flat_at is not None

    @property
    def rank(self) -> int:
        return self.ranks[self.flat_at] if self.flat_at is not None else self.ranks[-1]


def rank_profile(z: Tms, k: int, tol: float = RANK_TOL) -> list[int]:
    return [numeric_rank(moment_matrix_fast(t, z), tol) for t in range(k + 1)]


def is_flat(z: Tms, K: SemialgSet, tol: float = RANK_TOL, k: int | None = None,
            borderline_factor: float = BORDERLINE_FACTOR) -> RankProfile:
    """Flatness of ``z`` at order ``k`` (default: the largest order ``z`` covers).

    Checks ``L_h(z) = 0``, ``L_g(z) >= 0`` and
    ``rank M_{k - d_K}(z) = rank M_k(z)``, all relative to the scale of
    ``M_k(z)``.  A rank decision with a singular value within
    ``borderline_factor`` of the threshold is reported as not flat.
    """
    k = _order_of(z) if k is None else k
    dk = d_K(K)
    if k < dk:
        raise OrderTooSmall(f"flatness needs k >= d_K = {dk}, got {k}")
    Mk = moment_matrix_fast(k, z)
    scale = max(1.0, float(np.abs(Mk).max(initial=0.0)))
    ranks = rank_profile(z, k, tol)
    details = {}
    ok = True
    for i, h in enumerate(K.h):
        L = localizing_matrix(h, k, z)
        err = float(np.abs(L).max(initial=0.0)) / scale
        details[f"h{i}"] = err
        ok &= err <= tol
    for j, g in enumerate(K.g):
        L = localizing_matrix(g, k, z)
        e = float(np.linalg.eigvalsh(L)[0]) / scale if L.size else 0.0
        details[f"g{j}"] = e
        ok &= e >= -tol
    e0 = float(np.linalg.eigvalsh(Mk)[0]) / scale if Mk.size else 0.0
    details["moment_min_eig"] = e0
    ok &= e0 >= -tol
    prof = RankProfile(k, ranks, tol, None, dk, bool(ok), False, details)
    if not ok or ranks[k - dk] != ranks[k]:
        return prof
    if ranks[k] > 0 and (_ambiguous(Mk, tol, borderline_factor)
                         or _ambiguous(moment_matrix_fast(k - dk, z), tol, borderline_factor)):
        prof.borderline = True
        return prof
    prof.flat_at = k
    return prof


def flat_truncation(w: Tms, K: SemialgSet, t_min: int, tol: float = RANK_TOL,
                    borderline_factor: float = BORDERLINE_FACTOR) -> RankProfile | None:
    """Smallest ``t`` in ``[max(t_min, d_K), k]`` with ``w|_{2t}`` flat, or ``None``."""
    k = _order_of(w)
    for t in range(max(t_min, d_K(K)), k + 1):
        zt = restrict(w, basis(w.support.n, 2 * t))
        prof = is_flat(zt, K, tol, t, borderline_factor)
        if prof.is_flat:
            return prof
    return None


def extract_atoms(z: Tms, K: SemialgSet, tol: float = RANK_TOL, seed: int = 0,
                  t: int | None = None, atol: float = 1e-6) -> AtomicMeasure:
    """Recover the finitely atomic measure of a flat tms.

    ``t`` is the flat order (default: checked with ``is_flat``).  Raises
    ``ExtractionFailure`` when eigenvalues cluster, atoms leave ``K`` by
    more than ``atol`` or the weights cannot reproduce ``z|_{2t}`` to
    ``atol`` relative accuracy.
    """
    n = z.support.n
    if t is None:
        prof = is_flat(z, K, tol)
        if not prof.is_flat:
            raise ExtractionFailure("tms is not flat")
        t = prof.flat_at
    zt = restrict(z, basis(n, 2 * t))
    M = moment_matrix_fast(t, zt)
    r = numeric_rank(M, tol)
    if r == 0:
        return AtomicMeasure.empty(n)
    lam, V = np.linalg.eigh(M)
    lam, V = lam[::-1][:r], V[:, ::-1][:, :r]
    if lam[-1] <= 0:
        raise ExtractionFailure("moment matrix is not positive semidefinite on its range")
    F = V * np.sqrt(lam)[None, :]
    rows = basis(n, t)
    low = len(basis(n, t - 1))
    # pick r well-conditioned rows of degree <= t-1 as the quotient basis
    _, Rq, piv = sla.qr(F[:low].T, mode="economic", pivoting=True)
    if Rq.shape[0] < r or abs(Rq[r - 1, r - 1]) < tol * max(1.0, abs(Rq[0, 0])):
        raise ExtractionFailure("no degree-bounded monomial basis of the required rank")
    B = np.sort(piv[:r])
    U = np.linalg.solve(F[B].T, F.T).T      # rows: x^a in terms of x^B
    Bidx = [rows.indices[i] for i in B]
    Ns = []
    for i in range(n):
        Ni = np.array([U[rows.index(mi_add(beta, unit(n, i)))] for beta in Bidx])
        Ns.append(Ni)
    rng = np.random.default_rng(seed)
    coef = rng.random(n)
    coef /= coef.sum()
    Nc = sum(ci * Ni for ci, Ni in zip(coef, Ns))
    T, Q = sla.schur(Nc, output="real")
    sub = np.abs(np.diag(T, -1))
    if np.any(sub > 1e-8 * max(1.0, np.abs(T).max())):
        raise ExtractionFailure("complex eigenvalues in the multiplication matrix")
    ev = np.diag(T)
    if r > 1:
        gaps = np.abs(ev[:, None] - ev[None, :])[~np.eye(r, dtype=bool)]
        if gaps.min() < 1e-6 * max(1.0, np.abs(ev).max()):
            raise ExtractionFailure("clustered eigenvalues: atoms are not separated")
    atoms = np.array([[Q[:, j] @ Ni @ Q[:, j] for Ni in Ns] for j in range(r)])
    atoms, weights = _fit_weights(atoms, zt, atol)
    viol = max((K.violation(u) for u in atoms), default=0.0)
    if viol > atol * max(1.0, float(np.abs(atoms).max(initial=0.0))):
        raise ExtractionFailure(f"extracted atom violates K by {viol:.2e}")
    return AtomicMeasure(atoms, weights)


def _fit_weights(atoms: np.ndarray, z: Tms, atol: float):
    exps = z.support.exponents
    Vd = np.prod(atoms[None, :, :] ** exps[:, None, :], axis=2)
    zs = z.values
    scale = max(1.0, float(np.abs(zs).max()))
    wts, _ = nnls(Vd, zs)
    res = float(np.abs(Vd @ wts - zs).max()) / scale
    if res > atol:
        raise ExtractionFailure(f"weights reproduce the moments only to {res:.2e}")
    keep = wts > min(atol, 1e-8) * scale
    if not np.any(keep) and np.abs(zs).max() > atol:
        raise ExtractionFailure("all weights vanished")
    return atoms[keep], wts[keep]


def refine_measure(mu: AtomicMeasure, y: Tms, K: SemialgSet, max_nfev: int = 200) -> AtomicMeasure:
    """Locally adjust atoms and weights so the moments of ``mu`` match ``y``.

    Extraction works on a numerically flat truncation, so the atoms carry
    the rank-truncation error of the relaxation.  This runs a bounded
    least-squares fit of ``(atoms, weights)`` to the entries of ``y``, with
    the equations ``h(u) = 0`` and hinge terms ``min(g(u), 0)`` added as
    residuals.  The result is not trusted: callers re-run ``verify_measure``.
    """
    from scipy.optimize import least_squares

    if len(mu) == 0:
        return mu
    exps = y.support.exponents
    r, n = mu.atoms.shape
    scale = max(1.0, float(np.abs(y.values).max()))
    wscale = max(1.0, float(mu.weights.max()))

    def unpack(v):
        return v[:r * n].reshape(r, n), v[r * n:] * wscale

    def resid(v):
        U, w = unpack(v)
        mom = (np.prod(U[None, :, :] ** exps[:, None, :], axis=2) @ w - y.values) / scale
        hs = [h(u) for h in K.h for u in U]
        gs = [min(g(u), 0.0) for g in K.g for u in U]
        return np.concatenate([mom, np.array(hs, dtype=float), np.array(gs, dtype=float)])

    v0 = np.concatenate([mu.atoms.ravel(), mu.weights / wscale])
    lo = np.concatenate([np.full(r * n, -np.inf), np.zeros(r)])
    sol = least_squares(resid, v0, bounds=(lo, np.full(v0.shape, np.inf)), method="trf",
                        xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev)
    U, w = unpack(sol.x)
    keep = w > 0
    return AtomicMeasure(U[keep], w[keep]) if np.any(keep) else mu


@dataclass
class MeasureReport:
    ok: bool
    moment_error: float
    max_violation: float

    def __bool__(self):
        return self.ok


def verify_measure(mu: AtomicMeasure, y: Tms, K: SemialgSet, tol: float = 1e-6) -> MeasureReport:
    """Moment match ``|tms(mu) - y|_inf <= tol (1 + |y|_inf)`` and support in ``K``."""
    z = tms_from_atoms(mu, y.support)
    err = float(np.abs(z.values - y.values).max(initial=0.0))
    viol = max((K.violation(u) for u in mu.atoms), default=0.0)
    ok = err <= tol * (1.0 + float(np.abs(y.values).max(initial=0.0))) and viol <= tol
    return MeasureReport(bool(ok), err, float(viol))


def verified_measure(mu: AtomicMeasure, y: Tms, K: SemialgSet,
                     tol: float = 1e-6) -> tuple[AtomicMeasure, MeasureReport]:
    """``verify_measure`` on ``mu`` and on its ``refine_measure`` polish.

    The polished measure is returned when it verifies with a smaller
    moment error (or when ``mu`` itself fails).
    """
    rep = verify_measure(mu, y, K, tol)
    if len(mu) == 0:
        return mu, rep
    mu2 = refine_measure(mu, y, K)
    rep2 = verify_measure(mu2, y, K, tol)
    if rep2.moment_error < rep.moment_error and (rep2 or not rep):
        return mu2, rep2
    return mu, rep
