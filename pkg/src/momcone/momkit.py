"""Moment and localizing matrices, numeric and symbolic.

The localizing matrix of ``q`` at order ``k`` has rows and columns indexed
by ``basis(n, k - ceil(deg q / 2))`` and entry ``sum_g q_g z[g + a + b]``
at cell ``(a, b)``, so that ``p' L p = <q p^2, z>``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .algebra import Poly, Support, Tms, basis, mi_add, poly_eval
from .errors import DimensionMismatch, OrderTooSmall


def half_degree(q: Poly) -> int:
    return math.ceil(q.degree / 2)


@dataclass(frozen=True)
class SemialgSet:
    """``K = {x : h_i(x) = 0, g_j(x) >= 0}`` with an optional enclosing ball radius."""

    n: int
    h: tuple = ()
    g: tuple = ()
    ball_radius: float | None = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "h", tuple(self.h))
        object.__setattr__(self, "g", tuple(self.g))
        for p in self.h + self.g:
            if p.n != self.n:
                raise DimensionMismatch(f"constraint polynomial in {p.n} variables, set has {self.n}")
        if self.ball_radius is not None and not self.ball_radius > 0:
            raise ValueError("ball_radius must be strictly positive")

    @property
    def d_K(self) -> int:
        return d_K(self)

    @property
    def max_degree(self) -> int:
        return max((p.degree for p in self.h + self.g), default=0)

    def contains(self, u, tol: float = 1e-6) -> bool:
        return (all(abs(poly_eval(p, u)) <= tol for p in self.h)
                and all(poly_eval(p, u) >= -tol for p in self.g))

    def violation(self, u) -> float:
        """Largest constraint violation at ``u`` (0 when inside K)."""
        v = [abs(poly_eval(p, u)) for p in self.h] + [max(0.0, -poly_eval(p, u)) for p in self.g]
        return max(v, default=0.0)

    def with_ball(self, radius: float | None = None) -> "SemialgSet":
        """Append ``rho^2 - |x|^2 >= 0`` to ``g``."""
        rho = radius if radius is not None else self.ball_radius
        if rho is None:
            raise ValueError("no ball radius available for this set")
        ball = Poly.constant(self.n, rho * rho)
        for i in range(self.n):
            ball = ball - Poly.var(self.n, i) ** 2
        return SemialgSet(self.n, self.h, self.g + (ball,), rho, self.name)

    def with_constraints(self, h=(), g=()) -> "SemialgSet":
        return SemialgSet(self.n, self.h + tuple(h), self.g + tuple(g), self.ball_radius, self.name)


def d_K(K: SemialgSet) -> int:
    return max([1] + [half_degree(p) for p in K.h + K.g])


def localizing_rows(q: Poly, k: int) -> Support:
    if 2 * k < q.degree:
        raise OrderTooSmall(f"order {k} too small for a polynomial of degree {q.degree}")
    return basis(q.n, k - half_degree(q))


@dataclass(frozen=True)
class LocalizingOperator:
    """Symbolic ``z -> L_q^(k)(z)``.

    ``cells`` lists the distinct (row, col, target, coeff) contributions on
    the upper triangle, with targets indexed into ``ambient``.
    """

    q: Poly
    k: int
    row_support: Support
    ambient: Support
    rows: np.ndarray
    cols: np.ndarray
    targets: np.ndarray
    coeffs: np.ndarray

    @property
    def size(self) -> int:
        return len(self.row_support)

    def entry_map(self, alpha, beta) -> list[tuple[tuple, float]]:
        i, j = self.row_support.index(alpha), self.row_support.index(beta)
        i, j = min(i, j), max(i, j)
        mask = (self.rows == i) & (self.cols == j)
        return [(self.ambient.indices[t], float(c)) for t, c in zip(self.targets[mask], self.coeffs[mask])]

    def apply(self, z: Tms | np.ndarray) -> np.ndarray:
        vals = z.values if isinstance(z, Tms) else np.asarray(z, dtype=float)
        if isinstance(z, Tms) and z.support != self.ambient:
            vals = np.array([z[a] for a in self.ambient.indices])
        m = self.size
        L = np.zeros((m, m))
        np.add.at(L, (self.rows, self.cols), self.coeffs * vals[self.targets])
        return L + np.triu(L, 1).T

    def tensor(self) -> np.ndarray:
        """Dense array ``B`` with ``L(z) = sum_g z_g B[g]``."""
        m = self.size
        B = np.zeros((len(self.ambient), m, m))
        np.add.at(B, (self.targets, self.rows, self.cols), self.coeffs)
        off = self.rows != self.cols
        np.add.at(B, (self.targets[off], self.cols[off], self.rows[off]), self.coeffs[off])
        return B


def localizing_operator(q: Poly, k: int, ambient: Support | None = None) -> LocalizingOperator:
    rows_sup = localizing_rows(q, k)
    n = q.n
    if ambient is None:
        ambient = basis(n, 2 * k)
    if ambient.n != n:
        raise DimensionMismatch("ambient support dimension differs from the polynomial")
    acc: dict = {}
    idx = rows_sup.indices
    for i, a in enumerate(idx):
        for j in range(i, len(idx)):
            ab = mi_add(a, idx[j])
            for gamma, c in q.terms.items():
                t = ambient.index(mi_add(gamma, ab))
                key = (i, j, t)
                acc[key] = acc.get(key, 0.0) + c
    items = [(i, j, t, c) for (i, j, t), c in acc.items() if c != 0.0]
    if items:
        r, cidx, t, c = (np.array(v) for v in zip(*items))
    else:
        r = cidx = t = np.zeros(0, dtype=int)
        c = np.zeros(0)
    return LocalizingOperator(q, k, rows_sup, ambient, r.astype(int), cidx.astype(int), t.astype(int), c.astype(float))


def localizing_matrix(q: Poly, k: int, z: Tms) -> np.ndarray:
    """Numeric ``L_q^(k)(z)`` by direct summation."""
    rows_sup = localizing_rows(q, k)
    if z.support.n != q.n:
        raise DimensionMismatch("tms and polynomial dimensions differ")
    idx = rows_sup.indices
    m = len(idx)
    L = np.zeros((m, m))
    for i in range(m):
        for j in range(i, m):
            ab = mi_add(idx[i], idx[j])
            L[i, j] = L[j, i] = sum(c * z[mi_add(gamma, ab)] for gamma, c in q.terms.items())
    return L


def moment_matrix(k: int, z: Tms) -> np.ndarray:
    return localizing_matrix(Poly.constant(z.support.n, 1.0), k, z)


def moment_matrix_fast(k: int, z: Tms) -> np.ndarray:
    """``M_k(z)`` via index arithmetic; requires ``basis(n, 2k)`` inside ``z.support``."""
    B = basis(z.support.n, k)
    exps = B.exponents
    m = len(B)
    M = np.empty((m, m))
    for i in range(m):
        for j in range(i, m):
            M[i, j] = M[j, i] = z[tuple(exps[i] + exps[j])]
    return M


def ideal_rows(h: Poly, k: int, ambient: Support) -> tuple[Support, np.ndarray]:
    """Rows ``<h x^b, w> = 0`` for ``|b| <= 2k - deg h``, as a coefficient matrix on ``ambient``."""
    if 2 * k < h.degree:
        raise OrderTooSmall(f"order {k} too small for an equality of degree {h.degree}")
    mult = basis(h.n, 2 * k - h.degree)
    R = np.zeros((len(mult), len(ambient)))
    for r, b in enumerate(mult.indices):
        for gamma, c in h.terms.items():
            R[r, ambient.index(mi_add(gamma, b))] += c
    return mult, R


def localizing_matrices(K: SemialgSet, k: int, z: Tms) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """(equality localizing matrices, inequality localizing matrices incl. g0 = 1)."""
    one = Poly.constant(K.n, 1.0)
    hs = [localizing_matrix(h, k, z) for h in K.h]
    gs = [localizing_matrix(g, k, z) for g in (one,) + K.g]
    return hs, gs


def check_necessary(K: SemialgSet, k: int, z: Tms) -> tuple[float, float]:
    """(max |L_h entry|, min eigenvalue over L_g incl. the moment matrix)."""
    hs, gs = localizing_matrices(K, k, z)
    hmax = max((float(np.max(np.abs(H))) for H in hs if H.size), default=0.0)
    gmin = min((float(np.linalg.eigvalsh(G)[0]) for G in gs if G.size), default=0.0)
    return hmax, gmin


def poly_degrees_ok(polys: Sequence[Poly], k: int) -> bool:
    return all(p.degree <= 2 * k for p in polys)
