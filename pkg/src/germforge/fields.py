"""Tensor fields on a coordinate chart.

A field is a map from chart points to jets of its components, so every
consumer (curvature, transplantation, geodesics) sees exact derivatives to
the requested order.  Polynomial fields carry an explicit coefficient table
and are the serializable subcase; generic smooth fields wrap an arbitrary
jet evaluator (mesa bumps, blends, conformal factors, transplant outputs).

Component layout: covariant slots first, then contravariant.  Thus a metric
is ``g[i, j]``, an endomorphism is ``J[i, a]`` meaning J(d_i) = J[i, a] d_a,
a connection is ``Gamma[i, j, k]`` for Gamma_ij^k, and a one-form is
``w[i]``.

Fields are immutable after construction and their evaluators are pure;
concurrent evaluation is safe.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

from .jets import (
    JetError,
    japply_array,
    jconst,
    jcompose,
    jet_einsum,
    jmul,
    jpoint,
    index_lookup,
    multi_indices,
    n_coeffs,
)

GERM_KINDS = ("metric", "endo", "connection", "oneform", "scalar")


class FieldError(ValueError):
    """Invalid field construction or incompatible field combination."""


@dataclass(frozen=True)
class ChartSpec:
    """A coordinate chart: dimension and transplant radius.

    The working domain is the ball of radius 3r; norms and invariant checks
    sample there unless told otherwise.
    """

    dimension: int
    radius: float = 1.0

    def __post_init__(self):
        if self.dimension < 1:
            raise FieldError("chart dimension must be >= 1")
        if not self.radius > 0:
            raise FieldError("chart radius must be positive")


# ---------------------------------------------------------------------------
# deterministic sampling and sampled sup-norms
# ---------------------------------------------------------------------------

@lru_cache(maxsize=32)
def _unit_ball_points(m: int, n: int) -> np.ndarray:
    """Deterministic quasi-random points in the unit ball (Halton)."""
    sampler = qmc.Halton(d=m, scramble=False)
    pts: list[np.ndarray] = []
    while len(pts) < n:
        batch = 2.0 * sampler.random(4 * n) - 1.0
        keep = batch[np.sum(batch * batch, axis=1) <= 1.0]
        pts.extend(keep)
    return np.array(pts[:n])


def ball_points(m: int, radius: float, n: int = 2048) -> np.ndarray:
    return radius * _unit_ball_points(m, n)


def sup_norms(field: "SmoothField", radius: float | None = None,
              n: int = 2048) -> tuple[float, float]:
    """Sampled C0 and C1 sup-norms over the ball of the given radius.

    These estimate sup |h_I(x)| and sup |h_I| + sup |d_j h_I| by evaluating
    order-1 jets on a quasi-random point set; all downstream uses are
    monotone bounds, so sampling is adequate.
    """
    m = field.chart.dimension
    if radius is None:
        radius = 3.0 * field.chart.radius
    c0 = 0.0
    c1 = 0.0
    for p in ball_points(m, radius, n):
        j = field.jets(p, 1)
        c0 = max(c0, float(np.max(np.abs(j[..., 0]))))
        c1 = max(c1, float(np.max(np.abs(j[..., 1:m + 1]))))
    return c0, c0 + c1


def deviation_norms(a: "SmoothField", b: "SmoothField",
                    radius: float | None = None, n: int = 2048
                    ) -> tuple[float, float]:
    """Sampled C0/C1 norms of a - b."""
    _require_compatible(a, b)
    m = a.chart.dimension
    if radius is None:
        radius = 3.0 * a.chart.radius
    c0 = 0.0
    d1 = 0.0
    for p in ball_points(m, radius, n):
        diff = a.jets(p, 1) - b.jets(p, 1)
        c0 = max(c0, float(np.max(np.abs(diff[..., 0]))))
        d1 = max(d1, float(np.max(np.abs(diff[..., 1:m + 1]))))
    return c0, c0 + d1


# ---------------------------------------------------------------------------
# smooth fields
# ---------------------------------------------------------------------------

Symmetry = tuple[str, tuple[int, int]]   # ('sym'|'antisym', (slot, slot))


class SmoothField:
    """A chart-domain tensor field evaluable to component jets."""

    def __init__(self, chart: ChartSpec, valence: tuple[int, int],
                 eval_jets: Callable[[np.ndarray, int], np.ndarray],
                 symmetries: Sequence[Symmetry] = ()):
        self.chart = chart
        self.valence = (int(valence[0]), int(valence[1]))
        self.rank = self.valence[0] + self.valence[1]
        self._eval = eval_jets
        self.symmetries = tuple(symmetries)

    def jets(self, point, order: int) -> np.ndarray:
        point = np.asarray(point, dtype=float)
        if point.shape != (self.chart.dimension,):
            raise FieldError("point dimension does not match the chart")
        out = self._eval(point, order)
        expected = (self.chart.dimension,) * self.rank \
            + (n_coeffs(self.chart.dimension, order),)
        if out.shape != expected:
            raise FieldError(f"evaluator returned shape {out.shape}, "
                             f"expected {expected}")
        return out

    def values(self, point) -> np.ndarray:
        return self.jets(point, 0)[..., 0]

    def symmetry_defect(self, points, tol: float = 1e-10) -> float:
        """Largest violation of the declared symmetry tags on the points."""
        worst = 0.0
        for p in np.atleast_2d(points):
            v = self.values(p)
            for kind, (s1, s2) in self.symmetries:
                swapped = np.swapaxes(v, s1, s2)
                sign = 1.0 if kind == "sym" else -1.0
                worst = max(worst, float(np.max(np.abs(v - sign * swapped))))
        return worst


class ScalarField(SmoothField):
    def __init__(self, chart, eval_jets):
        super().__init__(chart, (0, 0), eval_jets)


class MetricField(SmoothField):
    """Symmetric 2-tensor g_ij with a declared signature (p, q)."""

    def __init__(self, chart, eval_jets, signature: tuple[int, int]):
        super().__init__(chart, (2, 0), eval_jets,
                         symmetries=(("sym", (0, 1)),))
        p, q = int(signature[0]), int(signature[1])
        if p + q != chart.dimension:
            raise FieldError("signature does not sum to the dimension")
        self.signature = (p, q)

    def signature_at(self, point) -> tuple[int, int]:
        eig = np.linalg.eigvalsh(self.values(point))
        if np.min(np.abs(eig)) <= 1e-12:
            raise FieldError("metric is degenerate at the point")
        return int(np.sum(eig < 0)), int(np.sum(eig > 0))


class EndoField(SmoothField):
    """Endomorphism J with J^2 = +Id ('para', trace 0) or -Id ('complex')."""

    def __init__(self, chart, eval_jets, kind: str):
        if kind not in ("para", "complex"):
            raise FieldError("endo kind must be 'para' or 'complex'")
        super().__init__(chart, (1, 1), eval_jets)
        self.kind = kind

    @property
    def square_sign(self) -> float:
        return 1.0 if self.kind == "para" else -1.0

    def square_defect(self, point) -> float:
        J = self.values(point)
        m = self.chart.dimension
        # (J o J)(d_i) = J[i,a] J[a,b] d_b
        sq = np.einsum("ia,ab->ib", J, J)
        return float(np.max(np.abs(sq - self.square_sign * np.eye(m))))


class ConnectionField(SmoothField):
    """Christoffel symbols Gamma_ij^k of an affine connection."""

    def __init__(self, chart, eval_jets, torsion_free: bool = True):
        sym = (("sym", (0, 1)),) if torsion_free else ()
        super().__init__(chart, (2, 1), eval_jets, symmetries=sym)
        self.torsion_free = torsion_free


class OneFormField(SmoothField):
    def __init__(self, chart, eval_jets):
        super().__init__(chart, (1, 0), eval_jets)


def constant_field(chart: ChartSpec, values: np.ndarray, cls=SmoothField,
                   **kw) -> SmoothField:
    values = np.asarray(values, dtype=float)
    rank = values.ndim
    m = chart.dimension

    def ev(point, order):
        return jconst(m, order, values)

    if cls is SmoothField:
        return SmoothField(chart, (rank, 0), ev, **kw)
    return cls(chart, ev, **kw)


# ---------------------------------------------------------------------------
# polynomial fields
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def poly_indices(m: int, degree: int) -> tuple[tuple[int, ...], ...]:
    """Graded-lex monomial exponents up to the given total degree
    (no order cap: polynomial storage may exceed the max jet order)."""
    out: list[tuple[int, ...]] = []
    for total in range(degree + 1):
        grade: list[tuple[int, ...]] = []

        def rec(prefix, remaining, slots):
            if slots == 1:
                grade.append(prefix + (remaining,))
                return
            for e in range(remaining, -1, -1):
                rec(prefix + (e,), remaining - e, slots - 1)

        rec((), total, m)
        out.extend(sorted(grade, reverse=True))
    return tuple(out)


@lru_cache(maxsize=None)
def _shift_table(m: int, degree: int, order: int):
    """Pairs (monomial j, jet coeff k, power index, binomial factor) with
    alpha_k <= beta_j; realizes the Taylor shift of a polynomial to a point."""
    betas = poly_indices(m, degree)
    alphas = multi_indices(m, order)
    alpha_pos = {a: i for i, a in enumerate(alphas)}
    diffs: dict[tuple[int, ...], int] = {}
    jj, kk, dd, bb = [], [], [], []
    for j, beta in enumerate(betas):
        for alpha, k in alpha_pos.items():
            if any(a > b for a, b in zip(alpha, beta)):
                continue
            diff = tuple(b - a for a, b in zip(alpha, beta))
            d = diffs.setdefault(diff, len(diffs))
            jj.append(j)
            kk.append(k)
            dd.append(d)
            bb.append(math.prod(math.comb(b, a) for a, b in zip(alpha, beta)))
    dexp = np.array(sorted(diffs, key=diffs.get), dtype=int).reshape(len(diffs), m)
    return (np.array(jj), np.array(kk), np.array(dd),
            np.array(bb, dtype=float), dexp, len(betas), len(alphas))


class PolynomialField(SmoothField):
    """Field whose components are polynomials, stored as a coefficient table.

    ``coefficients`` maps (component tuple, exponent tuple) -> value.
    Evaluation produces exact jets through the binomial Taylor shift.
    """

    def __init__(self, chart: ChartSpec, valence, coefficients: dict,
                 degree: int | None = None, symmetries=(), field_cls=None,
                 **field_kw):
        self.coefficients = {}
        m = chart.dimension
        rank = valence[0] + valence[1]
        for (comp, alpha), v in coefficients.items():
            comp = tuple(int(c) for c in comp)
            alpha = tuple(int(a) for a in alpha)
            if len(comp) != rank or len(alpha) != m:
                raise FieldError("malformed coefficient key")
            if any(not 0 <= c < m for c in comp) or any(a < 0 for a in alpha):
                raise FieldError("coefficient key out of range")
            if v != 0.0:
                self.coefficients[(comp, alpha)] = float(v)
        max_deg = max((sum(a) for (_, a) in self.coefficients), default=0)
        self.degree = max_deg if degree is None else int(degree)
        if self.degree < max_deg:
            raise FieldError("declared degree below stored monomial degree")
        self._dense: dict[int, np.ndarray] = {}
        super().__init__(chart, valence, self._poly_jets, symmetries=symmetries)
        # allow wrapping as a specific kind while reusing the evaluator
        if field_cls is not None:
            self.__class__ = type(field_cls.__name__ + "Poly",
                                  (PolynomialField, field_cls), {})
            field_cls.__init__(self, chart, self._poly_jets, **field_kw)

    def _dense_coeffs(self) -> np.ndarray:
        m = self.chart.dimension
        key = self.degree
        if key not in self._dense:
            betas = {b: i for i, b in enumerate(poly_indices(m, self.degree))}
            flat = np.zeros((m ** self.rank, len(betas)))
            for (comp, alpha), v in self.coefficients.items():
                ci = int(np.ravel_multi_index(comp, (m,) * self.rank)) \
                    if self.rank else 0
                flat[ci, betas[alpha]] = v
            self._dense[key] = flat
        return self._dense[key]

    def _poly_jets(self, point, order):
        m = self.chart.dimension
        jj, kk, dd, bb, dexp, npoly, njet = _shift_table(m, self.degree, order)
        powers = np.prod(point[None, :] ** dexp, axis=1)
        shift = np.zeros((npoly, njet))
        shift[jj, kk] = bb * powers[dd]
        flat = self._dense_coeffs() @ shift
        return flat.reshape((m,) * self.rank + (njet,))

    def equals(self, other) -> bool:
        return (isinstance(other, PolynomialField)
                and self.chart == other.chart
                and self.valence == other.valence
                and self.coefficients == other.coefficients)


def polynomial_metric(chart, coefficients, signature, degree=None):
    return PolynomialField(chart, (2, 0), coefficients, degree=degree,
                           field_cls=MetricField, signature=signature)


def polynomial_endo(chart, coefficients, kind, degree=None):
    return PolynomialField(chart, (1, 1), coefficients, degree=degree,
                           field_cls=EndoField, kind=kind)


def polynomial_connection(chart, coefficients, degree=None, torsion_free=True):
    return PolynomialField(chart, (2, 1), coefficients, degree=degree,
                           field_cls=ConnectionField, torsion_free=torsion_free)


def polynomial_oneform(chart, coefficients, degree=None):
    return PolynomialField(chart, (1, 0), coefficients, degree=degree,
                           field_cls=OneFormField)


def polynomial_scalar(chart, coefficients, degree=None):
    return PolynomialField(chart, (0, 0), coefficients, degree=degree,
                           field_cls=ScalarField)


# ---------------------------------------------------------------------------
# mesa bump
# ---------------------------------------------------------------------------

class MesaBump(ScalarField):
    """Smooth radial cutoff: identically 1 on B_inner, 0 outside B_outer.

    The profile is a function of s = |x|^2 (so it is smooth at the origin),
    built from psi(t) = exp(-1/t) through the standard smooth step
    h = psi(t) / (psi(t) + psi(1-t)).  On the plateaus the returned jets are
    exactly constant 1 or 0; the transition region is evaluated through jet
    arithmetic, so all derivatives are exact.
    """

    def __init__(self, chart: ChartSpec, inner: float, outer: float | None = None):
        if not inner > 0:
            raise FieldError("mesa radius must be positive")
        outer = 2.0 * inner if outer is None else float(outer)
        if not outer > inner:
            raise FieldError("outer radius must exceed inner radius")
        self.inner = float(inner)
        self.outer = outer
        super().__init__(chart, self._mesa_jets)

    @property
    def radius(self) -> float:
        return self.inner

    def _mesa_jets(self, point, order):
        m = self.chart.dimension
        s_val = float(np.dot(point, point))
        lo, hi = self.inner ** 2, self.outer ** 2
        if s_val <= lo:
            return jconst(m, order, 1.0)
        if s_val >= hi:
            return jconst(m, order, 0.0)
        xs = jpoint(m, order, point)
        s = np.zeros(n_coeffs(m, order))
        for i in range(m):
            s = s + jmul(m, xs[i], order, xs[i], order)
        t = (s - _delta0(m, order, lo)) / (hi - lo)
        one_minus_t = _delta0(m, order, 1.0) - t
        psi_t = _psi(m, t, order)
        psi_c = _psi(m, one_minus_t, order)
        denom = psi_t + psi_c
        h = jmul(m, psi_t, order,
                 japply_array("reciprocal", m, denom, order), order)
        return _delta0(m, order, 1.0) - h


def _delta0(m, order, value):
    out = np.zeros(n_coeffs(m, order))
    out[0] = value
    return out


def _psi(m, t, order):
    """exp(-1/t) for a jet with constant term in (0, 1)."""
    inv = japply_array("reciprocal", m, t, order)
    return japply_array("exp", m, -inv, order)


def mesa(r: float, chart: ChartSpec) -> MesaBump:
    """The cutoff phi_r: 1 on B_r, 0 outside B_2r, smooth in between."""
    return MesaBump(chart, r)


# ---------------------------------------------------------------------------
# combinators
# ---------------------------------------------------------------------------

def _require_compatible(a: SmoothField, b: SmoothField) -> None:
    if a.chart.dimension != b.chart.dimension:
        raise FieldError("fields live on charts of different dimension")
    if a.valence != b.valence:
        raise FieldError(f"valence mismatch: {a.valence} vs {b.valence}")


def _is_const(jets_arr, value) -> bool:
    return jets_arr[0] == value and not np.any(jets_arr[1:])


def blend(a: SmoothField, b: SmoothField, phi: MesaBump) -> SmoothField:
    """phi*a + (1-phi)*b, equal to a on the inner plateau and to b outside.

    Computed as b + phi*(a - b) with exact branches on the plateaus, so the
    agreement regions carry zero floating-point error and blending a field
    with itself returns it bit-exactly.
    """
    _require_compatible(a, b)
    if set(a.symmetries) != set(b.symmetries):
        raise FieldError("symmetry tags differ between blended fields")
    m = a.chart.dimension

    def ev(point, order):
        pj = phi.jets(point, order)
        if _is_const(pj, 1.0):
            return a.jets(point, order)
        if _is_const(pj, 0.0):
            return b.jets(point, order)
        aj = a.jets(point, order)
        bj = b.jets(point, order)
        return bj + jmul(m, pj, order, aj - bj, order)

    return SmoothField(a.chart, a.valence, ev, symmetries=a.symmetries)


def pullback_average(g: MetricField, J: EndoField,
                     tol: float = 1e-8) -> MetricField:
    """Average a metric over the J action: (g -+ J*g)/2.

    The result satisfies g~(Jx, Jy) = -g~(x, y) in the para case and
    g~(Jx, Jy) = g~(x, y) in the complex case, and equals g wherever g was
    already compatible.
    """
    if g.chart.dimension != J.chart.dimension:
        raise FieldError("metric and endomorphism charts differ")
    m = g.chart.dimension
    sign = -J.square_sign          # para: subtract, complex: add

    def ev(point, order):
        if J.square_defect(point) > tol:
            raise FieldError("endomorphism fails J^2 = +-Id at a point")
        gj = g.jets(point, order)
        Jj = J.jets(point, order)
        JgJ = jet_einsum("ia,ab->ib", Jj, order, gj, order, m)
        JgJ = jet_einsum("jb,ib->ij", Jj, order, JgJ, order, m)
        return 0.5 * (gj + sign * JgJ)

    return MetricField(g.chart, ev, g.signature)


def compose_with_rescaled_argument(theta: SmoothField,
                                   phi: MesaBump) -> SmoothField:
    """x -> theta(phi(x) * x): equals theta on the inner plateau and the
    frozen value theta(0) outside the outer radius."""
    if theta.chart.dimension != phi.chart.dimension:
        raise FieldError("field and bump charts differ")
    m = theta.chart.dimension

    def ev(point, order):
        pj = phi.jets(point, order)
        if _is_const(pj, 1.0):
            return theta.jets(point, order)
        xs = jpoint(m, order, point)
        args = np.stack([jmul(m, pj, order, xs[i], order) for i in range(m)])
        base = args[:, 0]
        fj = theta.jets(base, order)
        return jcompose(fj, m, base, args, m, order)

    return SmoothField(theta.chart, theta.valence, ev,
                       symmetries=theta.symmetries)


def scalar_multiply(s: SmoothField, t: SmoothField) -> SmoothField:
    """Product of a scalar field with a tensor field."""
    if s.rank != 0:
        raise FieldError("first factor must be a scalar field")
    m = t.chart.dimension

    def ev(point, order):
        return jmul(m, s.jets(point, order), order, t.jets(point, order), order)

    return SmoothField(t.chart, t.valence, ev, symmetries=t.symmetries)


def field_sum(*terms: SmoothField) -> SmoothField:
    for t in terms[1:]:
        _require_compatible(terms[0], t)

    def ev(point, order):
        return sum(t.jets(point, order) for t in terms)

    return SmoothField(terms[0].chart, terms[0].valence, ev)


# ---------------------------------------------------------------------------
# germ file format
# ---------------------------------------------------------------------------

_VALENCE_BY_KIND = {"metric": (2, 0), "endo": (1, 1), "connection": (2, 1),
                    "oneform": (1, 0), "scalar": (0, 0)}
_SYM_SLOTS = {"metric": (0, 1), "connection": (0, 1)}


def germ_to_dict(field: PolynomialField, kind: str) -> dict:
    if kind not in GERM_KINDS:
        raise FieldError(f"unknown germ kind {kind!r}")
    entries = [{"component": list(comp), "multi_index": list(alpha), "value": v}
               for (comp, alpha), v in sorted(field.coefficients.items())]
    sig = list(getattr(field, "signature", ())) or None
    return {"kind": kind,
            "dimension": field.chart.dimension,
            "signature": sig,
            "degree": field.degree,
            "coefficients": entries}


def save_germ(field: PolynomialField, kind: str, path) -> None:
    with open(path, "w") as fh:
        json.dump(germ_to_dict(field, kind), fh, indent=1)
        fh.write("\n")


def germ_from_dict(data: dict, radius: float = 1.0) -> PolynomialField:
    try:
        kind = data["kind"]
        m = int(data["dimension"])
        entries = data["coefficients"]
    except (KeyError, TypeError) as exc:
        raise FieldError(f"malformed germ file: missing {exc}") from exc
    if kind not in _VALENCE_BY_KIND:
        raise FieldError(f"unknown germ kind {kind!r}")
    valence = _VALENCE_BY_KIND[kind]
    coeffs: dict = {}
    for e in entries:
        key = (tuple(e["component"]), tuple(e["multi_index"]))
        if key in coeffs and coeffs[key] != float(e["value"]):
            raise FieldError(f"duplicate conflicting coefficient {key}")
        coeffs[key] = float(e["value"])
    sym = _SYM_SLOTS.get(kind)
    if sym is not None:
        coeffs = _symmetrize_components(coeffs, sym)
    chart = ChartSpec(m, radius)
    degree = data.get("degree")
    if kind == "metric":
        sig = data.get("signature")
        if sig is None:
            raise FieldError("metric germ requires a signature")
        f = polynomial_metric(chart, coeffs, (int(sig[0]), int(sig[1])),
                              degree=degree)
        if f.signature_at(np.zeros(m)) != f.signature:
            raise FieldError("metric signature at the origin does not match "
                             "the declared signature")
        return f
    if kind == "endo":
        probe = PolynomialField(chart, valence, coeffs, degree=degree)
        J0 = probe.values(np.zeros(m))
        sq = np.einsum("ia,ab->ib", J0, J0)
        if np.allclose(sq, np.eye(m), atol=1e-8):
            kind_str = "para"
        elif np.allclose(sq, -np.eye(m), atol=1e-8):
            kind_str = "complex"
        else:
            raise FieldError("endo germ does not square to +-Id at 0")
        return polynomial_endo(chart, coeffs, kind_str, degree=degree)
    if kind == "connection":
        return polynomial_connection(chart, coeffs, degree=degree)
    if kind == "oneform":
        return polynomial_oneform(chart, coeffs, degree=degree)
    return polynomial_scalar(chart, coeffs, degree=degree)


def load_germ(path, radius: float = 1.0) -> PolynomialField:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FieldError(f"germ file is not valid JSON: {exc}") from exc
    return germ_from_dict(data, radius=radius)


def _symmetrize_components(coeffs: dict, slots: tuple[int, int]) -> dict:
    """Mirror symmetric components stored once; reject contradictions."""
    s1, s2 = slots
    out = dict(coeffs)
    for (comp, alpha), v in coeffs.items():
        mirror = list(comp)
        mirror[s1], mirror[s2] = mirror[s2], mirror[s1]
        mkey = (tuple(mirror), alpha)
        if mkey not in out:
            out[mkey] = v
        elif out[mkey] != v:
            raise FieldError(
                f"symmetry violation: components {comp} and {tuple(mirror)} "
                f"disagree for monomial {alpha}")
    return out
