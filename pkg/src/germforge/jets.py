"""Exact truncated multivariate Taylor arithmetic.

A jet stores the Taylor coefficients c_alpha = d^alpha f(P) / alpha! of a
scalar function at a point, for all multi-indices |alpha| <= K.  Sums,
products, and compositions of jets are the truncated sums, convolutions,
and substitutions of the corresponding Taylor series, so every partial
derivative that comes out of a jet computation is exact up to roundoff;
no finite differencing is involved anywhere downstream.

Coefficients live in a dense vector indexed by the graded lexicographic
enumeration of multi-indices.  Because the enumeration is graded, the
order-k coefficients of an order-K jet are simply a prefix of the vector,
which makes truncation a slice.

Two layers are provided:

* array-level helpers (``jmul``, ``jet_einsum``, ``jpartial``, ...) that act
  on plain ndarrays whose last axis is the coefficient axis; tensor-valued
  fields use these for speed,
* a scalar ``Jet`` value class with operator overloading for convenience.

All jets are immutable values; nothing here holds mutable shared state, so
concurrent evaluation from multiple threads is safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

MAX_ORDER = 4
MAX_DIM = 8

_ELEMENTARY = ("exp", "sin", "cos", "sqrt", "reciprocal", "log")


class JetError(ValueError):
    """Invalid jet operation (dimension/order mismatch, bad index)."""


class JetDomainError(JetError):
    """Elementary function applied outside its domain at the constant term."""


def _check_dim_order(m: int, order: int) -> None:
    if not (1 <= m <= MAX_DIM):
        raise JetError(f"jet dimension must be in [1, {MAX_DIM}], got {m}")
    if not (0 <= order <= MAX_ORDER):
        raise JetError(f"jet order must be in [0, {MAX_ORDER}], got {order}")


@lru_cache(maxsize=None)
def multi_indices(m: int, order: int) -> tuple[tuple[int, ...], ...]:
    """All multi-indices of length m with |alpha| <= order, graded lex order."""
    _check_dim_order(m, order)
    out: list[tuple[int, ...]] = []
    for total in range(order + 1):
        grade: list[tuple[int, ...]] = []

        def rec(prefix: tuple[int, ...], remaining: int, slots: int) -> None:
            if slots == 1:
                grade.append(prefix + (remaining,))
                return
            for e in range(remaining, -1, -1):
                rec(prefix + (e,), remaining - e, slots - 1)

        rec((), total, m)
        out.extend(sorted(grade, reverse=True))
    return tuple(out)


@lru_cache(maxsize=None)
def index_lookup(m: int, order: int) -> dict[tuple[int, ...], int]:
    return {alpha: i for i, alpha in enumerate(multi_indices(m, order))}


@lru_cache(maxsize=None)
def n_coeffs(m: int, order: int) -> int:
    return len(multi_indices(m, order))


@lru_cache(maxsize=None)
def factorials(m: int, order: int) -> np.ndarray:
    """alpha! for every stored multi-index."""
    facs = [math.prod(math.factorial(e) for e in alpha)
            for alpha in multi_indices(m, order)]
    return np.array(facs, dtype=float)


@lru_cache(maxsize=None)
def _mul_table(m: int, ka: int, kb: int, kout: int):
    """Sparse truncated-convolution table.

    Returns (ia, ib, starts) where the k-th segment of (ia, ib), delimited
    by ``starts``, lists the coefficient pairs with alpha + beta equal to
    the k-th output multi-index.  Segment k is never empty (beta = 0 always
    qualifies), so np.add.reduceat is safe.
    """
    la, lb = multi_indices(m, ka), multi_indices(m, kb)
    lout = index_lookup(m, kout)
    triples: list[tuple[int, int, int]] = []
    for i, alpha in enumerate(la):
        for j, beta in enumerate(lb):
            gamma = tuple(a + b for a, b in zip(alpha, beta))
            k = lout.get(gamma)
            if k is not None:
                triples.append((k, i, j))
    triples.sort()
    ks = np.array([t[0] for t in triples])
    ia = np.array([t[1] for t in triples])
    ib = np.array([t[2] for t in triples])
    starts = np.searchsorted(ks, np.arange(len(lout)))
    return ia, ib, starts


@lru_cache(maxsize=None)
def _diff_table(m: int, order: int):
    """Per-direction (source index, multiplier) maps realizing d/dx_c."""
    src_lookup = index_lookup(m, order)
    lower = multi_indices(m, order - 1)
    tables = []
    for c in range(m):
        src = np.empty(len(lower), dtype=int)
        fac = np.empty(len(lower), dtype=float)
        for k, alpha in enumerate(lower):
            up = list(alpha)
            up[c] += 1
            src[k] = src_lookup[tuple(up)]
            fac[k] = up[c]
        tables.append((src, fac))
    return tuple(tables)


# ---------------------------------------------------------------------------
# array-level operations (last axis = coefficient axis)
# ---------------------------------------------------------------------------

def jconst(m: int, order: int, value) -> np.ndarray:
    """Constant jet(s); ``value`` may carry leading tensor axes."""
    value = np.asarray(value, dtype=float)
    out = np.zeros(value.shape + (n_coeffs(m, order),))
    out[..., 0] = value
    return out


def jvar(m: int, order: int, i: int, value: float) -> np.ndarray:
    if not 0 <= i < m:
        raise JetError(f"coordinate index {i} out of range for dimension {m}")
    out = np.zeros(n_coeffs(m, order))
    out[0] = value
    if order >= 1:
        e_i = tuple(1 if j == i else 0 for j in range(m))
        out[index_lookup(m, order)[e_i]] = 1.0
    return out


def jpoint(m: int, order: int, point: Sequence[float]) -> np.ndarray:
    """Stack of coordinate jets at ``point``, shape (m, n)."""
    return np.stack([jvar(m, order, i, float(point[i])) for i in range(m)])


def jtruncate(A: np.ndarray, m: int, k_to: int) -> np.ndarray:
    """Keep coefficients of order <= k_to (a prefix in graded order)."""
    return A[..., : n_coeffs(m, k_to)]


def jmul(m: int, A: np.ndarray, ka: int, B: np.ndarray, kb: int,
         kout: int | None = None) -> np.ndarray:
    """Componentwise jet product with truncation at kout (default min)."""
    if kout is None:
        kout = min(ka, kb)
    ia, ib, starts = _mul_table(m, ka, kb, kout)
    prod = A[..., ia] * B[..., ib]
    return np.add.reduceat(prod, starts, axis=-1)


def jet_einsum(spec: str, A: np.ndarray, ka: int, B: np.ndarray, kb: int,
               m: int, kout: int | None = None) -> np.ndarray:
    """np.einsum over tensor axes of two jet arrays, with jet products.

    ``spec`` addresses only the tensor axes, e.g. ``'ij,jk->ik'``; the
    coefficient axis is handled internally.
    """
    if kout is None:
        kout = min(ka, kb)
    ia, ib, starts = _mul_table(m, ka, kb, kout)
    lhs, rhs = spec.split("->")
    a_sub, b_sub = lhs.split(",")
    prod = np.einsum(f"{a_sub}t,{b_sub}t->{rhs}t", A[..., ia], B[..., ib])
    return np.add.reduceat(prod, starts, axis=-1)


def jpartial(m: int, A: np.ndarray, k: int, c: int) -> np.ndarray:
    """d/dx_c of a jet array; result has order k - 1."""
    if k < 1:
        raise JetError("cannot differentiate an order-0 jet")
    src, fac = _diff_table(m, k)[c]
    return A[..., src] * fac


def jgradient(m: int, A: np.ndarray, k: int) -> np.ndarray:
    """Stack of partials; new axis is inserted before the coefficient axis
    at position -2 ... shape (..., m, n_{k-1})."""
    return np.stack([jpartial(m, A, k, c) for c in range(m)], axis=-2)


def jvalue(A: np.ndarray) -> np.ndarray:
    return np.array(A[..., 0])


def _taylor_seq(tag: str, c: np.ndarray, order: int) -> list[np.ndarray]:
    """t_n = f^(n)(c)/n! for n = 0..order, vectorized over c."""
    if tag == "exp":
        e = np.exp(c)
        return [e / math.factorial(n) for n in range(order + 1)]
    if tag in ("sin", "cos"):
        s, co = np.sin(c), np.cos(c)
        cycle = [s, co, -s, -co] if tag == "sin" else [co, -s, -co, s]
        return [cycle[n % 4] / math.factorial(n) for n in range(order + 1)]
    if tag == "sqrt":
        if np.any(c <= 0):
            raise JetDomainError("sqrt requires a positive constant term")
        out, coef = [], 1.0
        for n in range(order + 1):
            out.append(coef * c ** (0.5 - n))
            coef *= (0.5 - n) / (n + 1)
        return out
    if tag == "reciprocal":
        if np.any(c == 0) or np.any(~np.isfinite(1.0 / np.where(c == 0, 1.0, c))):
            raise JetDomainError("reciprocal requires a nonzero constant term")
        return [(-1.0) ** n * c ** (-(n + 1)) for n in range(order + 1)]
    if tag == "log":
        if np.any(c <= 0):
            raise JetDomainError("log requires a positive constant term")
        return [np.log(c)] + [(-1.0) ** (n + 1) / (n * c ** n)
                              for n in range(1, order + 1)]
    raise JetError(f"unknown elementary function tag {tag!r}; "
                   f"expected one of {_ELEMENTARY}")


def japply_array(tag: str, m: int, A: np.ndarray, k: int) -> np.ndarray:
    """Elementary function of a jet array via Horner in the nilpotent part."""
    c = np.array(A[..., 0])
    coeffs = _taylor_seq(tag, c, k)
    delta = A.copy()
    delta[..., 0] = 0.0
    res = jconst(m, k, coeffs[k])
    for n in range(k - 1, -1, -1):
        res = jmul(m, res, k, delta, k)
        res[..., 0] += coeffs[n]
    return res


def jreciprocal(m: int, A: np.ndarray, k: int) -> np.ndarray:
    return japply_array("reciprocal", m, A, k)


def jcompose(f: np.ndarray, m_in: int, base: Sequence[float],
             args: np.ndarray, m_out: int, k: int) -> np.ndarray:
    """Substitute jets into a jet: Taylor coefficients of f(a(x)).

    ``f``: coefficients of f at ``base``, shape (..., n(m_in, k)).
    ``args``: jets of the m_in argument functions in the outer variables,
    shape (m_in, n(m_out, k)), with args[i][0] == base[i].

    Exact to order k because the substituted increments are nilpotent.
    """
    if args.shape[0] != m_in:
        raise JetError("argument count does not match inner dimension")
    if not np.allclose(args[:, 0], np.asarray(base, dtype=float), atol=1e-9):
        raise JetError("argument values do not match the jet's base point")
    h = args.copy()
    h[:, 0] = 0.0
    idx_in = multi_indices(m_in, k)
    # powers h_i^p, p = 0..k
    pows = []
    for i in range(m_in):
        p_list = [jconst(m_out, k, 1.0)]
        for _ in range(k):
            p_list.append(jmul(m_out, p_list[-1], k, h[i], k))
        pows.append(p_list)
    # monomial products in graded order: prod(alpha) = prod(alpha - e_i) * h_i
    mono: dict[tuple[int, ...], np.ndarray] = {idx_in[0]: pows[0][0]}
    for alpha in idx_in[1:]:
        i = next(j for j, e in enumerate(alpha) if e > 0)
        prev = list(alpha)
        prev[i] -= 1
        mono[alpha] = jmul(m_out, mono[tuple(prev)], k, h[i], k)
    out = np.zeros(f.shape[:-1] + (n_coeffs(m_out, k),))
    for pos, alpha in enumerate(idx_in):
        out += f[..., pos, None] * mono[alpha]
    return out


def jmat_inv(m: int, A: np.ndarray, k: int) -> np.ndarray:
    """Inverse of a square matrix of jets, shape (d, d, n).

    Writes A = A0 (I + N) with N nilpotent (no constant term) and sums the
    finite Neumann series; exact to order k.
    """
    d = A.shape[0]
    A0 = A[..., 0]
    B0 = np.linalg.inv(A0)
    N = jet_einsum("ij,jk->ik", jconst(m, k, B0), k, A, k, m)
    N[..., 0] -= np.eye(d)
    term = jconst(m, k, np.eye(d))
    acc = term.copy()
    for _ in range(k):
        term = jet_einsum("ij,jk->ik", -term, k, N, k, m)
        acc += term
    return jet_einsum("ij,jk->ik", acc, k, jconst(m, k, B0), k, m)


# ---------------------------------------------------------------------------
# scalar Jet value class
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Jet:
    """Truncated Taylor expansion of a scalar at a point."""

    dimension: int
    order: int
    coefficients: np.ndarray = field(repr=False)

    def __post_init__(self):
        _check_dim_order(self.dimension, self.order)
        coeffs = np.asarray(self.coefficients, dtype=float)
        if coeffs.shape != (n_coeffs(self.dimension, self.order),):
            raise JetError("coefficient vector has the wrong length")
        coeffs = coeffs.copy()
        coeffs.setflags(write=False)
        object.__setattr__(self, "coefficients", coeffs)

    # -- accessors ---------------------------------------------------------
    @property
    def value(self) -> float:
        return float(self.coefficients[0])

    def coefficient(self, alpha: Iterable[int]) -> float:
        alpha = tuple(int(a) for a in alpha)
        pos = index_lookup(self.dimension, self.order).get(alpha)
        if pos is None:
            raise JetError(f"multi-index {alpha} not stored at order {self.order}")
        return float(self.coefficients[pos])

    def derivative(self, alpha: Iterable[int]) -> float:
        """Raw partial derivative d^alpha f(P) = alpha! * coefficient."""
        alpha = tuple(int(a) for a in alpha)
        fac = math.prod(math.factorial(a) for a in alpha)
        return fac * self.coefficient(alpha)

    def partial(self, c: int) -> "Jet":
        return Jet(self.dimension, self.order - 1,
                   jpartial(self.dimension, self.coefficients, self.order, c))

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise JetError("cannot raise the order of a jet")
        return Jet(self.dimension, order,
                   jtruncate(self.coefficients, self.dimension, order))

    # -- arithmetic ---------------------------------------------------------
    def _align(self, other: "Jet") -> tuple["Jet", "Jet"]:
        if self.dimension != other.dimension:
            raise JetError("jet dimensions differ")
        k = min(self.order, other.order)
        return self.truncate(k), other.truncate(k)

    def __add__(self, other):
        if isinstance(other, Jet):
            a, b = self._align(other)
            return Jet(a.dimension, a.order, a.coefficients + b.coefficients)
        out = np.array(self.coefficients)
        out[0] += float(other)
        return Jet(self.dimension, self.order, out)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.dimension, self.order, -self.coefficients)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Jet) else -float(other))

    def __rsub__(self, other):
        return (-self) + float(other)

    def __mul__(self, other):
        if isinstance(other, Jet):
            a, b = self._align(other)
            return Jet(a.dimension, a.order,
                       jmul(a.dimension, a.coefficients, a.order,
                            b.coefficients, b.order))
        return Jet(self.dimension, self.order, self.coefficients * float(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * jet_apply("reciprocal", other)
        return self * (1.0 / float(other))

    def __rtruediv__(self, other):
        return float(other) * jet_apply("reciprocal", self)


def jet_variable(i: int, value: float, m: int, order: int) -> Jet:
    """The i-th coordinate function as a jet at the given base value."""
    return Jet(m, order, jvar(m, order, i, value))


def jet_constant(value: float, m: int, order: int) -> Jet:
    return Jet(m, order, jconst(m, order, value))


def jet_apply(tag: str, x: Jet) -> Jet:
    """Elementary function of a jet (exp, sin, cos, sqrt, reciprocal, log)."""
    return Jet(x.dimension, x.order,
               japply_array(tag, x.dimension, x.coefficients, x.order))


def jet_extract(x: Jet, alpha: Iterable[int]) -> float:
    """Raw partial derivative d^alpha at the base point."""
    return x.derivative(alpha)
