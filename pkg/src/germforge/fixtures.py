"""Seeded generators for reproducible test structures.

The CLI and the test suite never ship large data files; every random
structure is regenerated from a seed with the recipes below.

Recipe for random polynomial tensors: coefficients of each total degree d
are drawn uniformly from [-1, 1] and scaled by bound / n_d, where n_d is
the number of degree-d monomials, so the total perturbation on the unit
ball stays below ``bound`` per degree and nondegeneracy is preserved.
"""

from __future__ import annotations

import numpy as np

from .fields import (
    ChartSpec,
    EndoField,
    MetricField,
    PolynomialField,
    constant_field,
    polynomial_connection,
    polynomial_metric,
    polynomial_oneform,
    poly_indices,
)
from .normalforms import standard_endo, standard_metric


def _random_component_poly(rng, m, degrees, bound):
    """dict alpha -> coeff for the requested total degrees."""
    out = {}
    for d in degrees:
        alphas = [a for a in poly_indices(m, d) if sum(a) == d]
        for alpha in alphas:
            out[alpha] = rng.uniform(-1, 1) * bound / len(alphas)
    return out


def random_polynomial_metric(m: int, signature: tuple[int, int], seed: int,
                             degree: int = 4, bound: float = 0.1,
                             normalized: bool = True,
                             radius: float = 1.0) -> MetricField:
    """eps + random symmetric polynomial perturbation.

    With ``normalized`` the perturbation starts at degree 2, so the germ has
    g(0) = eps and vanishing first derivatives at 0.
    """
    rng = np.random.default_rng(seed)
    chart = ChartSpec(m, radius)
    eps = standard_metric(m, signature)
    coeffs = {}
    for i in range(m):
        for j in range(i, m):
            if eps[i, j] != 0.0:
                coeffs[((i, j), (0,) * m)] = eps[i, j]
    lowest = 2 if normalized else 1
    for i in range(m):
        for j in range(i, m):
            for alpha, v in _random_component_poly(
                    rng, m, range(lowest, degree + 1), bound).items():
                coeffs[((i, j), alpha)] = coeffs.get(((i, j), alpha), 0.0) + v
                if i != j:
                    coeffs[((j, i), alpha)] = coeffs[((i, j), alpha)]
    return polynomial_metric(chart, coeffs, signature)


def standard_endo_field(chart: ChartSpec, kind: str) -> EndoField:
    return constant_field(chart, standard_endo(chart.dimension, kind),
                          EndoField, kind=kind)


def average_with_constant_endo(g: PolynomialField, J_mat: np.ndarray,
                               kind: str) -> MetricField:
    """Coefficient-level pullback average for a constant J: the result is
    again polynomial of the same degree."""
    sign = -1.0 if kind == "para" else 1.0
    m = g.chart.dimension
    new: dict = {}
    for (comp, alpha), v in g.coefficients.items():
        i, j = comp
        new[(comp, alpha)] = new.get((comp, alpha), 0.0) + 0.5 * v
        for a in range(m):
            for b in range(m):
                w = 0.5 * sign * J_mat[a, i] * J_mat[b, j] * v
                if w:
                    key = ((a, b), alpha)
                    new[key] = new.get(key, 0.0) + w
    new = {k: v for k, v in new.items() if abs(v) > 0.0}
    return polynomial_metric(g.chart, new, g.signature, degree=g.degree)


def random_almost_hermitian(m: int, seed: int, kind: str = "complex",
                            bound: float = 0.1, degree: int = 4,
                            normalized: bool = True
                            ) -> tuple[MetricField, EndoField]:
    """Random (g, J) with the standard constant J; generically not Kahler."""
    sig = _hermitian_signature(m, kind)
    g0 = random_polynomial_metric(m, sig, seed, degree=degree, bound=bound,
                                  normalized=normalized)
    J_mat = standard_endo(m, kind)
    g = average_with_constant_endo(g0, J_mat, kind)
    return g, standard_endo_field(g.chart, kind)


def _hermitian_signature(m: int, kind: str) -> tuple[int, int]:
    return (m // 2, m // 2) if kind == "para" else (0, m)


def kahler_surface_product(seed: int, kind: str = "complex",
                           bound: float = 0.2, degree: int = 4
                           ) -> tuple[MetricField, EndoField]:
    """Non-flat normalized (para-)Kahler structure on R^4.

    Product of two conformally flat surfaces adapted to the invariant
    planes of the standard J (pairs (x1, x3) and (x2, x4)); each conformal
    factor is 1 + higher-order terms in its own two variables, so the
    Kahler form is closed and the germ is normalized at the origin.
    """
    m = 4
    rng = np.random.default_rng(seed)
    chart = ChartSpec(m, 1.0)
    sign0 = -1.0 if kind == "para" else 1.0
    # diag entries per block: para block metric is f * (-dx_a^2 + dx_b^2)
    coeffs: dict = {}
    for (a, b) in ((0, 2), (1, 3)):
        factor = {(0,) * m: 1.0}
        for d in range(2, degree + 1):
            alphas = [al for al in poly_indices(2, d) if sum(al) == d]
            for al in alphas:
                full = [0, 0, 0, 0]
                full[a], full[b] = al
                factor[tuple(full)] = rng.uniform(-1, 1) * bound / len(alphas)
        for alpha, v in factor.items():
            coeffs[((a, a), alpha)] = sign0 * v
            coeffs[((b, b), alpha)] = v
    sig = _hermitian_signature(m, kind)
    g = polynomial_metric(chart, coeffs, sig)
    return g, standard_endo_field(chart, kind)


def random_connection_germ(m: int, seed: int, bound: float = 0.3,
                           degree: int = 3, normalized: bool = True,
                           radius: float = 1.0):
    """Random torsion-free polynomial connection; Gamma(0) = 0 if normalized."""
    rng = np.random.default_rng(seed)
    chart = ChartSpec(m, radius)
    coeffs = {}
    lowest = 1 if normalized else 0
    for i in range(m):
        for j in range(i, m):
            for k in range(m):
                for alpha, v in _random_component_poly(
                        rng, m, range(lowest, degree + 1), bound).items():
                    coeffs[((i, j, k), alpha)] = v
                    if i != j:
                        coeffs[((j, i, k), alpha)] = v
    return polynomial_connection(chart, coeffs)


def random_oneform(m: int, seed: int, bound: float = 0.2, degree: int = 2,
                   radius: float = 1.0):
    rng = np.random.default_rng(seed)
    chart = ChartSpec(m, radius)
    coeffs = {}
    for i in range(m):
        for alpha, v in _random_component_poly(
                rng, m, range(0, degree + 1), bound).items():
            coeffs[((i,), alpha)] = v
    return polynomial_oneform(chart, coeffs)


def conjugated_endo(m: int, kind: str, seed: int, bound: float = 0.2,
                    radius: float = 1.0) -> EndoField:
    """Non-constant J with exact J^2 = +-Id: T(x) J0 T(x)^(-1) for a
    polynomial frame change T = Id + low-degree perturbation."""
    rng = np.random.default_rng(seed)
    chart = ChartSpec(m, radius)
    J0 = standard_endo(m, kind)
    n_entries = m * m
    lin = rng.uniform(-1, 1, size=(m, m, m)) * bound / n_entries
    quad = rng.uniform(-1, 1, size=(m, m, m, m)) * bound / n_entries

    from .jets import jconst, jet_einsum, jmat_inv, jpoint

    def ev(point, order):
        xs = jpoint(m, order, point)
        T = jconst(m, order, np.eye(m))
        for c in range(m):
            T = T + lin[..., c, None] * xs[c][None, None, :]
            for d in range(m):
                T = T + quad[..., c, d, None] * \
                    jet_einsum(",->", xs[c], order, xs[d], order, m)[None, None, :]
        Tinv = jmat_inv(m, T, order)
        TJ = jet_einsum("ab,bc->ac", T, order, jconst(m, order, J0), order, m)
        M = jet_einsum("ab,bc->ac", TJ, order, Tinv, order, m)
        # matrix M acts on column vectors; component layout J[i, a] with
        # J(d_i) = J[i, a] d_a means J[i, a] = M[a, i]
        return M.transpose(1, 0, 2)

    return EndoField(chart, ev, kind)
