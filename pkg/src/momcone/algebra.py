"""Multi-indices, monomial supports, sparse polynomials and truncated moment sequences.

Exponent vectors are plain tuples of nonnegative ints. Supports are kept in
graded lexicographic order (total degree first, then lexicographically
decreasing exponents), so ``basis(n, d)`` lists every degree block
contiguously and ``basis(n, t)`` is a prefix of ``basis(n, d)`` for t <= d.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DimensionMismatch, UnsupportedMonomial

MultiIndex = tuple

ATOM_MERGE_TOL = 1e-8


def mi_degree(alpha: MultiIndex) -> int:
    return sum(alpha)


def grlex_key(alpha: MultiIndex):
    return (sum(alpha), tuple(-a for a in alpha))


def mi_add(alpha: MultiIndex, beta: MultiIndex) -> MultiIndex:
    return tuple(a + b for a, b in zip(alpha, beta))


def unit(n: int, i: int) -> MultiIndex:
    return tuple(1 if j == i else 0 for j in range(n))


class Support:
    """Ordered, duplicate-free set of exponent vectors in ``n`` variables."""

    __slots__ = ("n", "indices", "_pos")

    def __init__(self, n: int, indices: Iterable[Sequence[int]], *, sort: bool = True):
        idx = []
        for alpha in indices:
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != n:
                raise DimensionMismatch(f"exponent {alpha} has length {len(alpha)}, expected {n}")
            if any(a < 0 for a in alpha):
                raise ValueError(f"negative exponent in {alpha}")
            idx.append(alpha)
        idx = sorted(set(idx), key=grlex_key) if sort else list(dict.fromkeys(idx))
        self.n = n
        self.indices = tuple(idx)
        self._pos = {a: i for i, a in enumerate(self.indices)}

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, alpha):
        return tuple(alpha) in self._pos

    def __eq__(self, other):
        return isinstance(other, Support) and self.n == other.n and self.indices == other.indices

    def __hash__(self):
        return hash((self.n, self.indices))

    def __repr__(self):
        return f"Support(n={self.n}, size={len(self)}, degree={self.degree})"

    def index(self, alpha) -> int:
        try:
            return self._pos[tuple(alpha)]
        except KeyError:
            raise UnsupportedMonomial(f"monomial {tuple(alpha)} not in support") from None

    @property
    def degree(self) -> int:
        return max((sum(a) for a in self.indices), default=0)

    @property
    def exponents(self) -> np.ndarray:
        return np.array(self.indices, dtype=int).reshape(len(self), self.n)

    def union(self, other: "Support") -> "Support":
        if other.n != self.n:
            raise DimensionMismatch("supports live in different dimensions")
        return Support(self.n, list(self.indices) + list(other.indices))

    def issubset(self, other: "Support") -> bool:
        return all(a in other for a in self.indices)


def basis(n: int, d: int) -> Support:
    """All exponents with total degree at most ``d``, in graded lex order."""
    if n < 1 or d < 0:
        raise ValueError("need n >= 1 and d >= 0")
    out = []
    for k in range(d + 1):
        out.extend(homogeneous_basis(n, k).indices)
    return Support(n, out, sort=False)


def homogeneous_basis(n: int, d: int) -> Support:
    if n < 1 or d < 0:
        raise ValueError("need n >= 1 and d >= 0")
    out = []
    for combo in combinations_with_replacement(range(n), d):
        alpha = [0] * n
        for i in combo:
            alpha[i] += 1
        out.append(tuple(alpha))
    # combinations_with_replacement yields lexicographically decreasing exponents
    return Support(n, out, sort=False)


def monomial_values(exps: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Matrix ``V[i, j] = points[i] ** exps[j]`` (product over coordinates)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    exps = np.asarray(exps, dtype=int)
    if exps.size == 0:
        return np.ones((points.shape[0], exps.shape[0]))
    return np.prod(points[:, None, :] ** exps[None, :, :], axis=2)


class Poly:
    """Sparse real polynomial: a map from exponent tuples to nonzero coefficients."""

    __slots__ = ("n", "terms")

    def __init__(self, n: int, terms: Mapping[Sequence[int], float] | None = None):
        self.n = int(n)
        clean = {}
        for alpha, c in (terms or {}).items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != self.n:
                raise DimensionMismatch(f"exponent {alpha} has length {len(alpha)}, expected {self.n}")
            c = float(c)
            if c != 0.0:
                clean[alpha] = clean.get(alpha, 0.0) + c
        self.terms = {a: c for a, c in clean.items() if c != 0.0}

    # constructors
    @classmethod
    def constant(cls, n: int, c: float) -> "Poly":
        return cls(n, {(0,) * n: c})

    @classmethod
    def var(cls, n: int, i: int) -> "Poly":
        return cls(n, {unit(n, i): 1.0})

    @classmethod
    def monomial(cls, alpha: Sequence[int], c: float = 1.0) -> "Poly":
        return cls(len(alpha), {tuple(alpha): c})

    @classmethod
    def from_vector(cls, support: Support, coeffs) -> "Poly":
        return cls(support.n, dict(zip(support.indices, np.asarray(coeffs, dtype=float))))

    @classmethod
    def from_terms(cls, n: int, terms: Iterable[Mapping]) -> "Poly":
        """Build from ``[{"exponents": [...], "coeff": c}, ...]``."""
        out = {}
        for t in terms:
            alpha = tuple(int(a) for a in t["exponents"])
            if len(alpha) != n:
                raise DimensionMismatch(f"exponent {alpha} has length {len(alpha)}, expected {n}")
            out[alpha] = out.get(alpha, 0.0) + float(t["coeff"])
        return cls(n, out)

    def to_terms(self) -> list[dict]:
        return [{"exponents": list(a), "coeff": c} for a, c in sorted(self.terms.items(), key=lambda t: grlex_key(t[0]))]

    # queries
    @property
    def degree(self) -> int:
        return max((sum(a) for a in self.terms), default=0)

    @property
    def support(self) -> Support:
        return Support(self.n, self.terms.keys())

    def is_zero(self) -> bool:
        return not self.terms

    def coeff(self, alpha) -> float:
        return self.terms.get(tuple(alpha), 0.0)

    def coefficients(self, support: Support) -> np.ndarray:
        """Dense coefficient vector on ``support``; raises if a term falls outside."""
        v = np.zeros(len(support))
        for alpha, c in self.terms.items():
            v[support.index(alpha)] = c
        return v

    def norm2(self) -> float:
        """Euclidean norm of the coefficient vector."""
        return math.sqrt(sum(c * c for c in self.terms.values()))

    def __call__(self, u) -> float:
        return poly_eval(self, u)

    # arithmetic
    def _check(self, other: "Poly"):
        if other.n != self.n:
            raise DimensionMismatch(f"polynomials in {self.n} and {other.n} variables")

    def __add__(self, other):
        if not isinstance(other, Poly):
            other = Poly.constant(self.n, other)
        self._check(other)
        out = dict(self.terms)
        for a, c in other.terms.items():
            out[a] = out.get(a, 0.0) + c
        return Poly(self.n, out)

    __radd__ = __add__

    def __neg__(self):
        return Poly(self.n, {a: -c for a, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Poly):
            return Poly(self.n, {a: c * float(other) for a, c in self.terms.items()})
        self._check(other)
        out: dict = {}
        for a, c in self.terms.items():
            for b, d in other.terms.items():
                ab = mi_add(a, b)
                out[ab] = out.get(ab, 0.0) + c * d
        return Poly(self.n, out)

    __rmul__ = __mul__

    def __truediv__(self, s):
        return self * (1.0 / float(s))

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative power")
        out = Poly.constant(self.n, 1.0)
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other):
        return isinstance(other, Poly) and self.n == other.n and self.terms == other.terms

    def __repr__(self):
        return f"Poly({format_poly(self)!r})"

    def max_abs_diff(self, other: "Poly") -> float:
        d = self - other
        return max((abs(c) for c in d.terms.values()), default=0.0)


def format_poly(p: Poly, precision: int = 6) -> str:
    if p.is_zero():
        return "0"
    parts = []
    for alpha, c in sorted(p.terms.items(), key=lambda t: grlex_key(t[0])):
        mono = "*".join(f"x{i + 1}" + (f"^{a}" if a > 1 else "") for i, a in enumerate(alpha) if a)
        coef = f"{c:.{precision}g}"
        parts.append(coef if not mono else (mono if c == 1 else f"{coef}*{mono}"))
    return " + ".join(parts).replace("+ -", "- ")


_TERM = re.compile(r"([+-]?)\s*([^+-]+)")


def parse_poly(text: str, n: int) -> Poly:
    """Parse a flat expression like ``"x1^2*x2 - 3*x3 + 0.5"``.

    Only sums of products of numbers and powers of ``x1..xn`` are accepted;
    no parentheses.
    """
    src = text.replace(" ", "").replace("**", "^")
    if not src:
        raise ValueError("empty polynomial expression")
    # protect exponent-notation numbers like 1e-3 from the term splitter
    src = re.sub(r"(\d)[eE]([+-])(\d)", lambda m: f"{m.group(1)}E{'P' if m.group(2) == '+' else 'M'}{m.group(3)}", src)
    out = Poly(n)
    pos = 0
    for m in _TERM.finditer(src):
        if m.start() != pos:
            raise ValueError(f"cannot parse {text!r} near position {pos}")
        pos = m.end()
        sign = -1.0 if m.group(1) == "-" else 1.0
        coef = sign
        alpha = [0] * n
        for factor in m.group(2).split("*"):
            fm = re.fullmatch(r"x(\d+)(?:\^(\d+))?", factor)
            if fm:
                i = int(fm.group(1)) - 1
                if not 0 <= i < n:
                    raise ValueError(f"variable x{i + 1} out of range for n={n}")
                alpha[i] += int(fm.group(2) or 1)
            else:
                try:
                    coef *= float(factor.replace("EP", "e+").replace("EM", "e-"))
                except ValueError:
                    raise ValueError(f"bad factor {factor!r} in {text!r}") from None
        out = out + Poly(n, {tuple(alpha): coef})
    if pos != len(src):
        raise ValueError(f"cannot parse {text!r}")
    return out


def poly_eval(p: Poly, u) -> float:
    u = np.asarray(u, dtype=float).ravel()
    if u.shape[0] != p.n:
        raise DimensionMismatch(f"point has dimension {u.shape[0]}, polynomial has {p.n}")
    total = 0.0
    for alpha, c in p.terms.items():
        total += c * float(np.prod(u ** np.array(alpha)))
    return total


@dataclass(frozen=True)
class Tms:
    """A truncated moment sequence: one real value per index of ``support``."""

    support: Support
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float).ravel()
        if vals.shape[0] != len(self.support):
            raise DimensionMismatch(f"{vals.shape[0]} values for a support of size {len(self.support)}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __getitem__(self, alpha) -> float:
        return float(self.values[self.support.index(alpha)])

    def __len__(self):
        return len(self.support)

    @property
    def n(self) -> int:
        return self.support.n

    def get(self, alpha, default=0.0) -> float:
        a = tuple(alpha)
        return float(self.values[self.support.index(a)]) if a in self.support else default

    def scaled(self, t: float) -> "Tms":
        return Tms(self.support, t * self.values)

    def __add__(self, other: "Tms") -> "Tms":
        if other.support != self.support:
            raise DimensionMismatch("tms supports differ")
        return Tms(self.support, self.values + other.values)

    def __sub__(self, other: "Tms") -> "Tms":
        return self + other.scaled(-1.0)

    def as_dict(self) -> dict:
        return dict(zip(self.support.indices, self.values.tolist()))

    @classmethod
    def from_dict(cls, support: Support, entries: Mapping, default: float = 0.0) -> "Tms":
        vals = np.full(len(support), float(default))
        for alpha, v in entries.items():
            vals[support.index(alpha)] = v
        return cls(support, vals)


def riesz_pairing(p: Poly, y: Tms) -> float:
    """Apply the Riesz functional of ``y`` to ``p``: sum of p_a * y_a."""
    if p.n != y.support.n:
        raise DimensionMismatch("polynomial and tms dimensions differ")
    total = 0.0
    for alpha, c in p.terms.items():
        if alpha not in y.support:
            raise UnsupportedMonomial(f"term {alpha} of the polynomial lies outside the tms support")
        total += c * y.values[y.support.index(alpha)]
    return float(total)


def restrict(z: Tms, A: Support) -> Tms:
    """The subvector of ``z`` indexed by ``A``."""
    if A.n != z.support.n:
        raise DimensionMismatch("support dimensions differ")
    idx = [z.support.index(a) for a in A.indices]
    return Tms(A, z.values[idx])


@dataclass(frozen=True)
class AtomicMeasure:
    """Finitely atomic measure ``sum_i weights[i] * delta(atoms[i])``.

    Atoms closer than ``ATOM_MERGE_TOL`` are merged (weights added).
    """

    atoms: np.ndarray
    weights: np.ndarray
    merge_tol: float = field(default=ATOM_MERGE_TOL, compare=False)

    def __post_init__(self):
        atoms = np.atleast_2d(np.array(self.atoms, dtype=float))
        weights = np.array(self.weights, dtype=float).ravel()
        if atoms.size == 0:
            atoms = atoms.reshape(0, atoms.shape[-1] if atoms.ndim == 2 else 0)
        if atoms.shape[0] != weights.shape[0]:
            raise DimensionMismatch(f"{atoms.shape[0]} atoms but {weights.shape[0]} weights")
        if np.any(weights <= 0) or not np.all(np.isfinite(weights)):
            raise ValueError("atomic measure weights must be strictly positive")
        merged_a, merged_w = [], []
        for u, w in zip(atoms, weights):
            for j, v in enumerate(merged_a):
                if np.linalg.norm(u - v) <= self.merge_tol:
                    merged_w[j] += w
                    break
            else:
                merged_a.append(u.copy())
                merged_w.append(w)
        atoms = np.array(merged_a).reshape(len(merged_a), atoms.shape[1])
        weights = np.array(merged_w)
        atoms.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @property
    def n(self) -> int:
        return self.atoms.shape[1]

    def __len__(self):
        return self.atoms.shape[0]

    def integrate(self, p: Poly) -> float:
        return float(sum(w * poly_eval(p, u) for u, w in zip(self.atoms, self.weights)))

    def scaled(self, t: float) -> "AtomicMeasure":
        return AtomicMeasure(self.atoms, t * self.weights)

    @classmethod
    def empty(cls, n: int) -> "AtomicMeasure":
        return cls(np.zeros((0, n)), np.zeros(0))


def tms_from_atoms(mu: AtomicMeasure, A: Support) -> Tms:
    """Moments ``y_a = sum_i w_i u_i^a`` of an atomic measure on support ``A``."""
    if len(mu) and mu.n != A.n:
        raise DimensionMismatch(f"atoms have dimension {mu.n}, support has {A.n}")
    if len(mu) == 0:
        return Tms(A, np.zeros(len(A)))
    V = monomial_values(A.exponents, mu.atoms)
    return Tms(A, mu.weights @ V)
