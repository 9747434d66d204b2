"""Pointwise differential-geometry kernel.

Everything is computed from exact jets of the input fields at a point:
Christoffel symbols, the full curvature tensor, Ricci data and the quadratic
contractions entering the curvature identities, covariant derivatives of
arbitrary tensors, the (para)-Kahler form, exterior derivative and
codifferential, the Nijenhuis tensor, and the Ricci star tensor.

Sign conventions (frozen by calibration tests):

* R(X, Y) = [nabla_X, nabla_Y] - nabla_[X,Y], lowered as
  R_ijkl = g(R(d_i, d_j) d_k, d_l); with this choice the quadratic metric
  eps - (1/3) A_ijlk x^j x^l reproduces curvature A at the origin exactly.
* ricci_jk = g^il R_ijkl (positive on round spheres).
* rho*_ij = (1/2) tr(Z -> R(d_i, J d_j) J Z); the overall sign is the one
  that makes rho* equal rho on Kahler inputs.
* delta = -trace_g nabla, so that delta(df) = -laplacian(f) on flat space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import (
    ChartSpec,
    ConnectionField,
    EndoField,
    FieldError,
    MetricField,
    SmoothField,
)
from .jets import jconst, jet_einsum, jmat_inv, jmul, jpartial, jtruncate, n_coeffs

STAR_RICCI_SIGN = 1.0


class GeometryError(ValueError):
    """Geometric precondition violated (degenerate metric, bad order, ...)."""


# ---------------------------------------------------------------------------
# jet-level kernel
# ---------------------------------------------------------------------------

def metric_jets(g: MetricField, point, order: int) -> np.ndarray:
    gj = g.jets(point, order)
    det = np.linalg.det(gj[..., 0])
    if abs(det) <= 1e-12:
        raise GeometryError("metric is singular at the evaluation point")
    return gj


def inverse_metric_jets(m: int, gj: np.ndarray, order: int) -> np.ndarray:
    return jmat_inv(m, gj, order)


def christoffel_jets(m: int, gj: np.ndarray, order: int) -> np.ndarray:
    """Gamma[i, j, k] = Gamma_ij^k as jets of order ``order - 1``."""
    if order < 1:
        raise GeometryError("christoffel symbols need metric jets of order >= 1")
    k1 = order - 1
    ginv = jtruncate(inverse_metric_jets(m, gj, order), m, k1)
    dg = np.stack([jpartial(m, gj, order, c) for c in range(m)])  # dg[c,i,j]
    # sym[i,j,l] = d_i g_jl + d_j g_il - d_l g_ij
    sym = dg + dg.transpose(1, 0, 2, 3) - dg.transpose(1, 2, 0, 3)
    return 0.5 * jet_einsum("kl,ijl->ijk", ginv, k1, sym, k1, m)


def riemann_jets(m: int, gj: np.ndarray, order: int) -> np.ndarray:
    """Fully covariant R[i, j, k, l] as jets of order ``order - 2``."""
    if order < 2:
        raise GeometryError("curvature needs metric jets of order >= 2")
    gamma = christoffel_jets(m, gj, order)
    k1, k2 = order - 1, order - 2
    dG = np.stack([jpartial(m, gamma, k1, c) for c in range(m)])  # dG[c,j,k,l]
    quad = jet_einsum("isl,jks->ijkl", gamma, k1, gamma, k1, m, kout=k2)
    up = dG - dG.transpose(1, 0, 2, 3, 4) + quad - quad.transpose(1, 0, 2, 3, 4)
    return jet_einsum("ijks,sl->ijkl", up, k2, jtruncate(gj, m, k2), k2, m)


def cov_der_jets(m: int, T: np.ndarray, order: int, variance: str,
                 gamma: np.ndarray, gamma_order: int) -> np.ndarray:
    """Covariant derivative of a jet tensor; new covariant slot comes first.

    ``variance`` is one letter per slot, 'd' (covariant) or 'u'
    (contravariant).  The result has order ``order - 1``.
    """
    if order < 1:
        raise GeometryError("insufficient jet order for a covariant derivative")
    rank = len(variance)
    if T.ndim - 1 != rank:
        raise GeometryError("variance string does not match tensor rank")
    k1 = order - 1
    out = np.stack([jpartial(m, T, order, c) for c in range(m)])
    letters = "abcdefgh"[:rank]
    gam = jtruncate(gamma, m, k1) if gamma_order > k1 else gamma
    Tt = jtruncate(T, m, k1)
    for slot, var in enumerate(variance):
        L = letters[slot]
        dummy = letters[:slot] + "s" + letters[slot + 1:]
        if var == "d":
            corr = jet_einsum(f"z{L}s,{dummy}->z{letters}", gam, k1, Tt, k1, m)
            out = out - corr
        else:
            corr = jet_einsum(f"zs{L},{dummy}->z{letters}", gam, k1, Tt, k1, m)
            out = out + corr
    return out


# ---------------------------------------------------------------------------
# bundled evaluation at a point
# ---------------------------------------------------------------------------

@dataclass
class PointGeometry:
    """Jets of the basic curvature objects of (g[, J]) at one point."""

    m: int
    point: np.ndarray
    order: int
    g: np.ndarray
    ginv: np.ndarray
    gamma: np.ndarray          # order - 1
    riemann: np.ndarray        # order - 2, fully covariant
    ricci: np.ndarray          # order - 2
    tau: np.ndarray            # order - 2 scalar jet
    J: np.ndarray | None = None
    kind: str | None = None

    @property
    def curvature_order(self) -> int:
        return self.order - 2


def point_geometry(g: MetricField, point, order: int = 4,
                   J: EndoField | None = None) -> PointGeometry:
    m = g.chart.dimension
    point = np.asarray(point, dtype=float)
    gj = metric_jets(g, point, order)
    ginv = inverse_metric_jets(m, gj, order)
    gamma = christoffel_jets(m, gj, order)
    R = riemann_jets(m, gj, order)
    k2 = order - 2
    rho = jet_einsum("il,ijkl->jk", jtruncate(ginv, m, k2), k2, R, k2, m)
    tau = jet_einsum("jk,jk->", jtruncate(ginv, m, k2), k2, rho, k2, m)
    Jj = kind = None
    if J is not None:
        Jj = J.jets(point, order)
        kind = J.kind
    return PointGeometry(m, point, order, gj, ginv, gamma, R, rho, tau,
                         Jj, kind)


# ---------------------------------------------------------------------------
# point results with invariant checks
# ---------------------------------------------------------------------------

@dataclass
class CurvatureAtPoint:
    components: np.ndarray     # R_ijkl
    point: np.ndarray
    dimension: int

    def symmetry_defects(self) -> dict[str, float]:
        R = self.components
        return {
            "antisymmetry_xy": float(np.max(np.abs(R + R.transpose(1, 0, 2, 3)))),
            "antisymmetry_zw": float(np.max(np.abs(R + R.transpose(0, 1, 3, 2)))),
            "first_bianchi": float(np.max(np.abs(
                R + R.transpose(1, 2, 0, 3) + R.transpose(2, 0, 1, 3)))),
            "pair_symmetry": float(np.max(np.abs(R - R.transpose(2, 3, 0, 1)))),
        }

    def check(self, tol: float = 1e-9) -> bool:
        scale = 1.0 + float(np.max(np.abs(self.components)))
        return all(d <= tol * scale for d in self.symmetry_defects().values())


@dataclass
class RicciData:
    rho: np.ndarray
    tau: float
    norm_R2: float
    norm_rho2: float
    R_check: np.ndarray        # R_abci R^abc_j
    rho_check: np.ndarray      # rho_ai rho^a_j
    L_rho: np.ndarray          # 2 R_iabj rho^ab


@dataclass
class StarRicciData:
    rho_star: np.ndarray
    tau_star: float


def levi_civita(g: MetricField, point) -> np.ndarray:
    """Christoffel symbols Gamma[i, j, k] = Gamma_ij^k at a point."""
    m = g.chart.dimension
    gj = metric_jets(g, point, 1)
    return christoffel_jets(m, gj, 1)[..., 0]


def riemann(g: MetricField, point, order: int = 2) -> CurvatureAtPoint:
    m = g.chart.dimension
    gj = metric_jets(g, point, order)
    R = riemann_jets(m, gj, order)[..., 0]
    return CurvatureAtPoint(R, np.asarray(point, dtype=float), m)


def ricci_data(g: MetricField, point) -> RicciData:
    geo = point_geometry(g, point, order=2)
    R = geo.riemann[..., 0]
    gi = geo.ginv[..., 0]
    rho = geo.ricci[..., 0]
    tau = float(geo.tau[0])
    norm_R2 = float(np.einsum("ijkl,ia,jb,kc,ld,abcd->", R, gi, gi, gi, gi, R))
    norm_rho2 = float(np.einsum("ij,ia,jb,ab->", rho, gi, gi, rho))
    R_check = np.einsum("abci,ap,bq,cr,pqrj->ij", R, gi, gi, gi, R)
    rho_check = np.einsum("ai,ab,bj->ij", rho, gi, rho)
    L_rho = 2.0 * np.einsum("iabj,ap,bq,pq->ij", R, gi, gi, rho)
    return RicciData(rho, tau, norm_R2, norm_rho2, R_check, rho_check, L_rho)


def covariant_derivative(T: SmoothField, source, point,
                         order: int = 1) -> np.ndarray:
    """First or second covariant derivative of a tensor field at a point.

    ``source`` is a MetricField (Levi-Civita) or a ConnectionField.  New
    derivative slots are prepended, so the result of order 2 is
    (nabla_a nabla_b T) indexed [a, b, ...].
    """
    if order not in (1, 2):
        raise GeometryError("derivative order must be 1 or 2")
    m = T.chart.dimension
    variance = "d" * T.valence[0] + "u" * T.valence[1]
    Tj = T.jets(point, order)
    gamma = connection_jets(source, point, order - 1)
    out = cov_der_jets(m, Tj, order, variance, gamma, order - 1)
    if order == 2:
        out = cov_der_jets(m, out, 1, "d" + variance, gamma, order - 1)
    return out[..., 0]


def connection_jets(source, point, order: int) -> np.ndarray:
    if isinstance(source, MetricField):
        gj = metric_jets(source, point, order + 1)
        return christoffel_jets(source.chart.dimension, gj, order + 1)
    if isinstance(source, ConnectionField):
        return source.jets(point, order)
    raise GeometryError("connection source must be a metric or a connection")


# ---------------------------------------------------------------------------
# (para)-Hermitian operators
# ---------------------------------------------------------------------------

def hermitian_defect(g: MetricField, J: EndoField, point) -> float:
    gv = g.values(point)
    Jv = J.values(point)
    target = -J.square_sign
    JgJ = np.einsum("ia,jb,ab->ij", Jv, Jv, gv)
    return float(np.max(np.abs(JgJ - target * gv)))


def _require_hermitian(g, J, point, tol=1e-8):
    scale = 1.0 + float(np.max(np.abs(g.values(point))))
    if hermitian_defect(g, J, point) > tol * scale:
        raise GeometryError("(g, J) is not almost (para)-Hermitian at the point")


def kahler_form_jets(g: MetricField, J: EndoField, point,
                     order: int) -> np.ndarray:
    """Omega_ab = g(d_a, J d_b) as jets."""
    m = g.chart.dimension
    gj = g.jets(point, order)
    Jj = J.jets(point, order)
    return jet_einsum("bc,ac->ab", Jj, order, gj, order, m)


def kahler_form(g: MetricField, J: EndoField, point) -> np.ndarray:
    _require_hermitian(g, J, point)
    return kahler_form_jets(g, J, point, 0)[..., 0]


def kahler_form_field(g: MetricField, J: EndoField) -> SmoothField:
    def ev(point, order):
        return kahler_form_jets(g, J, point, order)

    return SmoothField(g.chart, (2, 0), ev,
                       symmetries=(("antisym", (0, 1)),))


def exterior_derivative(omega: SmoothField, point) -> np.ndarray:
    """d of a p-form field: alternating sum of partial derivatives."""
    p = omega.rank
    m = omega.chart.dimension
    if p + 1 > m:
        raise GeometryError("no nonzero (p+1)-forms in this dimension")
    oj = omega.jets(point, 1)
    grad = np.stack([jpartial(m, oj, 1, c)[..., 0] for c in range(m)])
    out = np.zeros((m,) * (p + 1))
    for q in range(p + 1):
        out += (-1.0) ** q * np.moveaxis(grad, 0, q)
    return out


def exterior_derivative_field(omega: SmoothField) -> SmoothField:
    m = omega.chart.dimension
    p = omega.rank

    def ev(point, order):
        oj = omega.jets(point, order + 1)
        grad = np.stack([jpartial(m, oj, order + 1, c) for c in range(m)])
        out = np.zeros((m,) * (p + 1) + (n_coeffs(m, order),))
        for q in range(p + 1):
            out += (-1.0) ** q * np.moveaxis(grad, 0, q)
        return out

    return SmoothField(omega.chart, (p + 1, 0), ev)


def codifferential(omega: SmoothField, g: MetricField, point) -> np.ndarray:
    """delta omega = -trace_g nabla omega (flat calibration: delta d = -lap)."""
    m = g.chart.dimension
    nabla = covariant_derivative(omega, g, point, order=1)
    gi = np.linalg.inv(g.values(point))
    return -np.einsum("ab,ab...->...", gi, nabla)


def nijenhuis(J: EndoField, point, tol: float = 1e-8) -> np.ndarray:
    """N[i, j, k]: the Nijenhuis tensor on coordinate fields, N(d_i, d_j)^k."""
    if J.square_defect(point) > tol:
        raise GeometryError("endomorphism fails J^2 = +-Id at the point")
    m = J.chart.dimension
    eps = J.square_sign
    Jj = J.jets(point, 1)
    Jv = Jj[..., 0]
    dJ = np.stack([jpartial(m, Jj, 1, c)[..., 0] for c in range(m)])  # dJ[c,i,a]
    term = (np.einsum("jia,ak->ijk", dJ, Jv)
            - np.einsum("ija,ak->ijk", dJ, Jv)
            + np.einsum("ia,ajk->ijk", Jv, dJ)
            - np.einsum("ja,aik->ijk", Jv, dJ))
    return eps * term


def star_ricci_jets(geo: PointGeometry, order: int) -> tuple[np.ndarray, np.ndarray]:
    """(rho*, tau*) as jets of the given order (<= geo.order - 2).

    The para case carries an extra sign so that the calibration anchor
    rho* = rho holds on (para-)Kahler inputs for both kinds.
    """
    if geo.J is None:
        raise GeometryError("star-Ricci needs an endomorphism")
    m = geo.m
    kind_sign = 1.0 if geo.kind == "complex" else -1.0
    R = jtruncate(geo.riemann, m, order)
    Jt = jtruncate(geo.J, m, order)
    gi = jtruncate(geo.ginv, m, order)
    RJ = jet_einsum("ibsl,jb->ijsl", R, order, Jt, order, m)
    Jup = jet_einsum("ks,lk->ls", Jt, order, gi, order, m)   # J^l_. s = g^lk J_k^s
    rho_star = 0.5 * STAR_RICCI_SIGN * kind_sign * \
        jet_einsum("ijsl,ls->ij", RJ, order, Jup, order, m)
    tau_star = jet_einsum("ij,ij->", gi, order, rho_star, order, m)
    return rho_star, tau_star


def star_ricci(g: MetricField, J: EndoField, point) -> StarRicciData:
    _require_hermitian(g, J, point)
    geo = point_geometry(g, point, order=2, J=J)
    rs, ts = star_ricci_jets(geo, 0)
    return StarRicciData(rs[..., 0], float(ts[0]))


def kahler_symmetry_defect(g: MetricField, J: EndoField, point) -> float:
    """Max-abs violation of R_ijkl = -+ R_ijab J_k^a J_l^b (para: -)."""
    R = riemann(g, point).components
    Jv = J.values(point)
    twist = np.einsum("ijab,ka,lb->ijkl", R, Jv, Jv)
    sign = -J.square_sign
    return float(np.max(np.abs(R - sign * twist)))


def kahler_criteria(g: MetricField, J: EndoField, points,
                    tol: float = 1e-8) -> dict:
    """The three equivalent Kahler conditions, each sampled at the points:
    nabla Omega = 0; nabla J = 0; N_J = 0 and d Omega = 0."""
    omega = kahler_form_field(g, J)
    d_nabla_omega = d_nabla_J = d_nijenhuis = d_domega = 0.0
    for p in np.atleast_2d(points):
        scale = 1.0 + float(np.max(np.abs(g.values(p))))
        d_nabla_omega = max(d_nabla_omega, float(np.max(np.abs(
            covariant_derivative(omega, g, p)))) / scale)
        d_nabla_J = max(d_nabla_J, float(np.max(np.abs(
            covariant_derivative(J, g, p)))) / scale)
        d_nijenhuis = max(d_nijenhuis, float(np.max(np.abs(nijenhuis(J, p)))))
        d_domega = max(d_domega, float(np.max(np.abs(
            exterior_derivative(omega, p)))) / scale)
    checks = {
        "nabla_omega": d_nabla_omega,
        "nabla_J": d_nabla_J,
        "nijenhuis_and_domega": max(d_nijenhuis, d_domega),
    }
    return {"defects": checks,
            "verdicts": {k: v <= tol for k, v in checks.items()}}


def is_kahler(g: MetricField, J: EndoField, points, tol: float = 1e-8) -> bool:
    return all(kahler_criteria(g, J, points, tol)["verdicts"].values())
