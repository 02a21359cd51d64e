"""Problem adapters: standard sets, CP/copositive matrices and SOEP forms.

Symmetric matrices are tms' on the degree-2 homogeneous monomials
(``y_{2e_i} = C_ii``, ``y_{e_i+e_j} = C_ij``), so that ``C`` is completely
positive iff its tms has a representing measure on the simplex.  A form
``f = sum f_a x^a`` of even degree ``d`` is a sum of ``d``-th powers of
linear forms iff the tms ``f_a / multinomial(d; a)`` has a representing
measure on the unit sphere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import least_squares

from .algebra import AtomicMeasure, Poly, Support, Tms, homogeneous_basis, tms_from_atoms
from .errors import DimensionMismatch
from .hierarchy import MomentLP
from .linopt import INFEASIBLE_KIND, OPTIMAL, LinOptOutcome, solve_moment_lp, span_problem
from .momkit import SemialgSet
from .options import Options


# ------------------------------------------------------------------ sets

def _var(n, i):
    return Poly.var(n, i)


def _norm2(n):
    return sum((_var(n, i) * _var(n, i) for i in range(n)), Poly(n))


def simplex_set(n: int) -> SemialgSet:
    """``{x >= 0 : x_1 + ... + x_n = 1}``."""
    s = sum((_var(n, i) for i in range(n)), Poly(n)) - Poly.constant(n, 1.0)
    return SemialgSet(n, [s], [_var(n, i) for i in range(n)], ball_radius=1.0, name=f"simplex({n})")


def sphere_set(n: int) -> SemialgSet:
    """Unit sphere ``|x|^2 = 1``."""
    return SemialgSet(n, [_norm2(n) - Poly.constant(n, 1.0)], [], ball_radius=1.0, name=f"sphere({n})")


def half_sphere_set(n: int) -> SemialgSet:
    """Unit sphere cut by ``x_1 + ... + x_n >= 0``.

    Measures on the sphere and on this half have the same even-degree
    moments after reflecting atoms through the origin, so the two sets give
    the same cone for forms of even degree; the cut removes the symmetric
    copies and helps flatness.
    """
    s = sum((_var(n, i) for i in range(n)), Poly(n))
    return SemialgSet(n, [_norm2(n) - Poly.constant(n, 1.0)], [s], ball_radius=1.0,
                      name=f"half_sphere({n})")


def cube_set(n: int) -> SemialgSet:
    """``[-1, 1]^n`` as ``1 - x_i^2 >= 0``."""
    g = [Poly.constant(n, 1.0) - _var(n, i) * _var(n, i) for i in range(n)]
    return SemialgSet(n, [], g, ball_radius=math.sqrt(n), name=f"cube({n})")


def ball_set(n: int) -> SemialgSet:
    """Closed unit ball."""
    return SemialgSet(n, [], [Poly.constant(n, 1.0) - _norm2(n)], ball_radius=1.0, name=f"ball({n})")


def _app_options(opts: Options | None) -> Options:
    # the adapters target boundary points of their cones, where flat
    # truncations are rare; the randomized membership check is on by default
    return Options(deep_membership=True) if opts is None else opts


PRESETS = {"simplex": simplex_set, "sphere": sphere_set, "half_sphere": half_sphere_set,
           "cube": cube_set, "ball": ball_set}


# ------------------------------------------------------------------ matrices

def _pair(n, i, j):
    alpha = [0] * n
    alpha[i] += 1
    alpha[j] += 1
    return tuple(alpha)


def matrix_to_tms(C) -> Tms:
    """Tms on ``homogeneous_basis(n, 2)`` with ``y_{e_i+e_j} = C_ij``."""
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise DimensionMismatch("C must be square")
    if not np.allclose(C, C.T, rtol=0, atol=1e-12 * max(1.0, np.abs(C).max(initial=0.0))):
        raise ValueError("C must be symmetric")
    n = C.shape[0]
    A = homogeneous_basis(n, 2)
    vals = np.zeros(len(A))
    for i in range(n):
        for j in range(i, n):
            vals[A.index(_pair(n, i, j))] = C[i, j]
    return Tms(A, vals)


def tms_to_matrix(y: Tms) -> np.ndarray:
    n = y.support.n
    C = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            C[i, j] = C[j, i] = y.get(_pair(n, i, j))
    return C


@dataclass
class PartialSymMatrix:
    """Symmetric matrix with some cells specified; ``known[(i, j)]`` with ``i <= j``."""

    n: int
    known: dict = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for (i, j), v in dict(self.known).items():
            i, j = int(i), int(j)
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise DimensionMismatch(f"cell ({i}, {j}) outside a {self.n}x{self.n} matrix")
            key = (min(i, j), max(i, j))
            if key in clean and clean[key] != float(v):
                raise ValueError(f"conflicting values for cell {key}")
            clean[key] = float(v)
        self.known = clean

    @classmethod
    def from_rows(cls, rows) -> "PartialSymMatrix":
        """From a dense array with ``None`` for unknown cells."""
        n = len(rows)
        known = {}
        for i, row in enumerate(rows):
            if len(row) != n:
                raise DimensionMismatch("matrix rows must all have length n")
            for j, v in enumerate(row):
                if v is not None:
                    known[(i, j)] = v
        return cls(n, known)


@dataclass
class CpResult:
    """A completion ``C = sum_k f_k f_k'`` with nonnegative factors ``f_k``."""

    outcome: LinOptOutcome
    matrix: np.ndarray | None = None
    factors: np.ndarray | None = None

    @property
    def kind(self) -> str:
        return self.outcome.kind

    @property
    def c_min(self):
        return self.outcome.c_min

    def factorization_error(self) -> float:
        if self.matrix is None or self.factors is None:
            return math.nan
        return float(np.abs(self.matrix - self.factors.T @ self.factors).max(initial=0.0))


def cp_moment_lp(P: PartialSymMatrix, objective: str = "MinTrace") -> MomentLP:
    """The moment problem behind ``cp_completion``."""
    n = P.n
    A = homogeneous_basis(n, 2)
    a, b = [], []
    for (i, j), v in sorted(P.known.items()):
        a.append(Poly.monomial(_pair(n, i, j)))
        b.append(v)
    if objective == "MinTrace":
        c = _norm2(n)
    elif objective == "Feasibility":
        # (sum x)^2 is 1 on the simplex: the objective is the total mass
        s = sum((_var(n, i) for i in range(n)), Poly(n))
        c = s * s
    else:
        raise ValueError("objective must be 'MinTrace' or 'Feasibility'")
    if not a:
        a, b = [c], [0.0]
    return MomentLP(A, a, np.array(b, dtype=float), c, simplex_set(n))


def cp_completion(P: PartialSymMatrix, objective: str = "MinTrace",
                  opts: Options | None = None) -> CpResult:
    """Completely positive completion of ``P`` (minimum trace or any completion).

    An atom ``u`` of the simplex with weight ``w`` contributes ``w u u'``;
    the factors are reported as ``sqrt(w) u`` (one per row of ``factors``).
    """
    out = solve_moment_lp(cp_moment_lp(P, objective), _app_options(opts))
    res = CpResult(out)
    if out.kind == OPTIMAL and out.measure is not None:
        res.matrix = tms_to_matrix(out.y_star)
        mu = out.measure
        res.factors = np.sqrt(mu.weights)[:, None] * np.clip(mu.atoms, 0.0, None)
    return res


def copositivity_lp(B, directions: Sequence, ell) -> MomentLP:
    """The moment problem behind ``copositivity_margin``."""
    B = np.asarray(B, dtype=float)
    n = B.shape[0]

    def qform(M):
        M = np.asarray(M, dtype=float)
        if M.shape != (n, n):
            raise DimensionMismatch("all matrices must be n x n")
        terms = {}
        for i in range(n):
            for j in range(n):
                key = _pair(n, i, j)
                terms[key] = terms.get(key, 0.0) + 0.5 * (M[i, j] + M[j, i])
        return Poly(n, terms)

    ell = np.asarray(ell, dtype=float).ravel()
    return MomentLP(homogeneous_basis(n, 2), [qform(D) for D in directions], ell, qform(B), simplex_set(n))


def copositivity_margin(B, directions: Sequence, ell, opts: Options | None = None) -> LinOptOutcome:
    """``max ell' lam`` such that ``B - sum lam_i D_i`` is copositive.

    Solved through the moment problem ``min <x'Bx, y>`` s.t.
    ``<x'D_i x, y> = ell_i``, ``y`` completely positive.  When that problem
    is infeasible the margin is unbounded; ``b_max`` is then ``inf``.
    """
    out = solve_moment_lp(copositivity_lp(B, directions, ell), _app_options(opts))
    if out.kind == INFEASIBLE_KIND:
        out.b_max = math.inf
        out.message = "moment side infeasible: the margin is unbounded along the given directions"
    return out


# ------------------------------------------------------------------ SOEP

@dataclass
class SoepForm:
    """Homogeneous form of even degree ``d`` in ``n`` variables."""

    n: int
    d: int
    coeffs: dict

    def __post_init__(self):
        if self.d % 2:
            raise ValueError("SOEP forms must have even degree")
        clean = {}
        for alpha, v in dict(self.coeffs).items():
            alpha = tuple(int(e) for e in alpha)
            if len(alpha) != self.n:
                raise DimensionMismatch(f"exponent {alpha} has length {len(alpha)}, expected {self.n}")
            if sum(alpha) != self.d:
                raise ValueError(f"term {alpha} is not of degree {self.d}")
            clean[alpha] = clean.get(alpha, 0.0) + float(v)
        self.coeffs = clean

    @classmethod
    def from_poly(cls, p: Poly, d: int | None = None) -> "SoepForm":
        d = p.degree if d is None else d
        return cls(p.n, d, dict(p.terms))

    def to_poly(self) -> Poly:
        return Poly(self.n, self.coeffs)

    @property
    def support(self) -> Support:
        return homogeneous_basis(self.n, self.d)

    def to_tms(self) -> Tms:
        """``f_a / multinomial(d; a)`` on all degree-``d`` monomials."""
        A = self.support
        return Tms(A, np.array([self.coeffs.get(a, 0.0) / multinomial(self.d, a) for a in A.indices]))

    @classmethod
    def from_tms(cls, y: Tms) -> "SoepForm":
        d = y.support.degree
        return cls(y.support.n, d, {a: v * multinomial(d, a) for a, v in zip(y.support.indices, y.values)})


def multinomial(d: int, alpha) -> int:
    out = math.factorial(d)
    for e in alpha:
        out //= math.factorial(e)
    return out


def _canonical_sign(u: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(u) > 1e-12)
    return -u if nz.size and u[nz[0]] < 0 else u


def powers_to_form(L: np.ndarray, n: int, d: int) -> Poly:
    """``sum_k (L_k . x)^d``."""
    A = homogeneous_basis(n, d)
    vals = tms_from_atoms(AtomicMeasure(np.asarray(L, dtype=float), np.ones(len(L))), A).values
    return SoepForm.from_tms(Tms(A, vals)).to_poly()


@dataclass
class SoepResult:
    """Optimal ``lam`` and a decomposition ``f - sum lam_i lin_i = sum_k (L_k . x)^d``."""

    outcome: LinOptOutcome
    lam: np.ndarray | None = None
    linear_forms: np.ndarray | None = None
    residual: float = math.nan

    @property
    def kind(self) -> str:
        return self.outcome.kind

    @property
    def value(self):
        return None if self.lam is None else self.outcome.b_max


# weight keeping the refitted multipliers near the relaxation's values
LAM_ANCHOR = 1e-3


def _refit(L0: np.ndarray, lam0: np.ndarray, z0: np.ndarray, Z: np.ndarray,
           A: Support) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares refinement of ``(L, lam)`` in ``z0 - Z lam = sum_k tms(L_k)``.

    The extracted atoms inherit the truncation error of the relaxation;
    fitting the multipliers together with the forms makes the
    decomposition an exact certificate for the returned ``lam``.
    """
    exps = A.exponents
    r, n = L0.shape
    m = Z.shape[1]

    def resid(v):
        L = v[:r * n].reshape(r, n)
        mom = np.prod(L[None, :, :] ** exps[:, None, :], axis=2).sum(axis=1) + Z @ v[r * n:] - z0
        return np.concatenate([mom, LAM_ANCHOR * (v[r * n:] - lam0)])

    v0 = np.concatenate([L0.ravel(), lam0])
    method = "lm" if v0.size <= len(z0) + m else "trf"
    sol = least_squares(resid, v0, method=method, xtol=1e-15, ftol=1e-15, gtol=1e-15)
    if np.abs(resid(sol.x)[:len(z0)]).max() > np.abs(resid(v0)[:len(z0)]).max():
        return L0, lam0
    return sol.x[:r * n].reshape(r, n), sol.x[r * n:]


def decompose_measure(mu: AtomicMeasure, d: int, tol: float = 1e-6) -> np.ndarray:
    """Linear forms ``w^(1/d) u`` for the atoms ``u`` and weights ``w`` of ``mu``.

    Atoms on a common line through the origin (``u`` and ``-u`` on the
    sphere) give parallel forms; these are merged, since
    ``(a v)^d + (b v)^d = ((a^d + b^d)^(1/d) v)^d`` for even ``d``.
    """
    L = mu.atoms * (mu.weights ** (1.0 / d))[:, None]
    L = np.array([_canonical_sign(row) for row in L]).reshape(len(mu), mu.n)
    dirs, scales = [], []
    for row in L:
        s = float(np.linalg.norm(row))
        if s == 0.0:
            continue
        v = row / s
        for j, w in enumerate(dirs):
            if np.linalg.norm(v - w) <= tol:
                scales[j] = (scales[j] ** d + s ** d) ** (1.0 / d)
                break
        else:
            dirs.append(v)
            scales.append(s)
    return np.array([s * v for s, v in zip(scales, dirs)]).reshape(len(dirs), mu.n)


def soep_check(f: SoepForm, lin: Sequence[SoepForm] = (), ell=(), opts: Options | None = None,
               K: SemialgSet | None = None) -> SoepResult:
    """``max ell' lam`` such that ``f - sum lam_i lin_i`` is a sum of ``d``-th powers.

    With no ``lin`` this is a plain membership test (``lam`` is empty).
    ``K`` defaults to the unit sphere; ``half_sphere_set`` gives the same
    answer for even ``d``.  The decomposition is refined by least squares so
    that it re-expands to the target coefficients.
    """
    lin = list(lin)
    for q in lin:
        if q.n != f.n or q.d != f.d:
            raise DimensionMismatch("all forms must share n and d")
    n, d = f.n, f.d
    K = sphere_set(n) if K is None else K
    A = f.support
    z0 = f.to_tms()
    sp = span_problem(z0, [q.to_tms() for q in lin], ell, A, K)
    out = solve_moment_lp(sp.lp, _app_options(opts))
    res = SoepResult(out)
    if out.y_star is None:
        return res
    lam = sp.recover(out.y_star)
    res.lam = lam
    if lin:
        out.b_max = sp.objective(lam)
    if out.kind != OPTIMAL or out.measure is None:
        return res
    L, lam = _refit(decompose_measure(out.measure, d), lam, z0.values, sp.Z, A)
    L = np.array([_canonical_sign(row) for row in L])
    res.lam, res.linear_forms = lam, L
    if lin:
        out.b_max = sp.objective(lam)
    target_poly = f.to_poly()
    for li, q in zip(lam, lin):
        target_poly = target_poly - float(li) * q.to_poly()
    res.residual = powers_to_form(L, n, d).max_abs_diff(target_poly)
    return res
