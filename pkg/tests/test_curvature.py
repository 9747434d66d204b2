import numpy as np
import pytest

from germforge.curvature import (
    GeometryError,
    codifferential,
    covariant_derivative,
    exterior_derivative,
    exterior_derivative_field,
    hermitian_defect,
    is_kahler,
    kahler_criteria,
    kahler_form,
    kahler_form_field,
    kahler_symmetry_defect,
    levi_civita,
    nijenhuis,
    point_geometry,
    riemann,
    star_ricci,
)
from germforge.fields import (
    ChartSpec,
    ball_points,
    constant_field,
    polynomial_metric,
    polynomial_oneform,
    polynomial_scalar,
    EndoField,
    MetricField,
)
from germforge.fixtures import (
    conjugated_endo,
    kahler_surface_product,
    random_almost_hermitian,
    random_oneform,
    random_polynomial_metric,
    standard_endo_field,
)
from germforge.normalforms import standard_endo, standard_metric


def flat_metric(m, signature=None):
    chart = ChartSpec(m, 1.0)
    sig = signature or (0, m)
    vals = standard_metric(m, sig)
    return constant_field(chart, vals, MetricField, signature=sig)


# ---------------------------------------------------------------------------
# Levi-Civita
# ---------------------------------------------------------------------------

def test_flat_christoffels_vanish():
    g = flat_metric(3, (1, 2))
    assert np.max(np.abs(levi_civita(g, np.array([0.3, -0.2, 0.5])))) == 0.0


def test_polar_style_christoffels():
    chart = ChartSpec(2, 1.0)
    g = polynomial_metric(chart, {((0, 0), (0, 0)): 1.0,
                                  ((1, 1), (2, 0)): 1.0}, (0, 2))
    G = levi_civita(g, np.array([2.0, 0.7]))
    assert G[1, 1, 0] == pytest.approx(-2.0)
    assert G[0, 1, 1] == pytest.approx(0.5)
    assert G[1, 0, 1] == pytest.approx(0.5)


def test_singular_metric_raises():
    chart = ChartSpec(2, 1.0)
    g = polynomial_metric(chart, {((0, 0), (0, 0)): 1.0,
                                  ((1, 1), (2, 0)): 1.0}, (0, 2))
    with pytest.raises(GeometryError):
        levi_civita(g, np.zeros(2))


def test_quadratic_metric_has_zero_christoffels_at_origin():
    g = random_polynomial_metric(3, (0, 3), seed=1, normalized=True)
    assert np.max(np.abs(levi_civita(g, np.zeros(3)))) == 0.0


# ---------------------------------------------------------------------------
# Riemann tensor
# ---------------------------------------------------------------------------

def test_flat_curvature_zero():
    g = flat_metric(4, (1, 3))
    R = riemann(g, np.array([0.1, 0.2, -0.3, 0.4]))
    assert np.max(np.abs(R.components)) == 0.0


def test_finite_difference_oracle_for_curvature():
    g = random_polynomial_metric(3, (0, 3), seed=2, normalized=False)
    p = np.array([0.1, -0.2, 0.15])
    h = 1e-6
    m = 3
    dG = np.zeros((m, m, m, m))
    for c in range(m):
        dp = np.zeros(m)
        dp[c] = h
        dG[c] = (levi_civita(g, p + dp) - levi_civita(g, p - dp)) / (2 * h)
    G = levi_civita(g, p)
    up = (np.einsum("ijkl->ijkl", dG[:, :, :, :]) * 0.0)
    # R_ijk^l = d_i G_jk^l - d_j G_ik^l + G_is^l G_jk^s - G_js^l G_ik^s
    up = dG.transpose(0, 1, 2, 3) - dG.transpose(1, 0, 2, 3) \
        + np.einsum("isl,jks->ijkl", G, G) - np.einsum("jsl,iks->ijkl", G, G)
    expected = np.einsum("ijks,sl->ijkl", up, g.values(p))
    got = riemann(g, p).components
    assert np.max(np.abs(got - expected)) <= 1e-5


@pytest.mark.parametrize("m,sig,seed", [(2, (0, 2), 3), (3, (1, 2), 4),
                                        (4, (0, 4), 5), (4, (2, 2), 6)])
def test_curvature_symmetries_random_metrics(m, sig, seed):
    g = random_polynomial_metric(m, sig, seed, normalized=False)
    for p in ball_points(m, 1.0, 10):
        cp = riemann(g, p)
        scale = 1.0 + np.max(np.abs(cp.components))
        for name, defect in cp.symmetry_defects().items():
            assert defect <= 1e-9 * scale, name


# ---------------------------------------------------------------------------
# covariant derivatives
# ---------------------------------------------------------------------------

def test_metricity():
    g = random_polynomial_metric(3, (1, 2), seed=7, normalized=False)
    for p in ball_points(3, 1.0, 20):
        nabla_g = covariant_derivative(g, g, p)
        assert np.max(np.abs(nabla_g)) <= 1e-9


def test_gradient_of_scalar():
    chart = ChartSpec(2, 1.0)
    s = polynomial_scalar(chart, {((), (2, 1)): 3.0})   # 3 x^2 y
    g = flat_metric(2)
    p = np.array([0.5, -0.4])
    grad = covariant_derivative(s, g, p)
    assert grad[0] == pytest.approx(6 * p[0] * p[1])
    assert grad[1] == pytest.approx(3 * p[0] ** 2)


def test_second_covariant_derivative_of_linear_scalar_flat():
    chart = ChartSpec(3, 1.0)
    s = polynomial_scalar(chart, {((), (1, 0, 0)): 2.0, ((), (0, 0, 1)): -1.0})
    g = flat_metric(3)
    hess = covariant_derivative(s, g, np.array([0.2, 0.1, -0.3]), order=2)
    assert np.max(np.abs(hess)) == 0.0


# ---------------------------------------------------------------------------
# Kahler form, exterior derivative, codifferential
# ---------------------------------------------------------------------------

def test_flat_kahler_form_is_constant_symplectic():
    m = 4
    g = flat_metric(m, (0, 4))
    J = standard_endo_field(g.chart, "complex")
    om = kahler_form(g, J, np.array([0.1, 0.2, 0.3, 0.4]))
    expected = np.einsum("bc,ac->ab", standard_endo(m, "complex"), np.eye(m))
    assert np.allclose(om, expected)
    assert np.allclose(om, -om.T)


def test_kahler_form_para_direct_contraction_oracle():
    from germforge.normalforms import eigen_para_endo, eigen_para_metric
    m = 4
    chart = ChartSpec(m, 1.0)
    g = constant_field(chart, eigen_para_metric(m), MetricField,
                       signature=(2, 2))
    J = constant_field(chart, eigen_para_endo(m), EndoField, kind="para")
    om = kahler_form(g, J, np.zeros(m))
    expected = np.einsum("ac,bc->ab", eigen_para_metric(m),
                         eigen_para_endo(m).T * 0 + eigen_para_endo(m))
    direct = np.einsum("bc,ac->ab", eigen_para_endo(m), eigen_para_metric(m))
    assert np.allclose(om, direct)


def test_kahler_form_rejects_incompatible_pair():
    m = 4
    g = flat_metric(m, (1, 3))     # not Hermitian for the standard complex J
    J = standard_endo_field(g.chart, "complex")
    assert hermitian_defect(g, J, np.zeros(m)) > 1e-3
    with pytest.raises(GeometryError):
        kahler_form(g, J, np.zeros(m))


def test_exterior_derivative_basics():
    chart = ChartSpec(2, 1.0)
    const = polynomial_oneform(chart, {((0,), (0, 0)): 2.0})
    assert np.max(np.abs(exterior_derivative(const, np.array([0.3, 0.4])))) == 0.0
    w = polynomial_oneform(chart, {((1,), (1, 0)): 1.0})    # x^1 dx^2
    d = exterior_derivative(w, np.array([0.5, -0.2]))
    assert d[0, 1] == pytest.approx(1.0)
    assert d[1, 0] == pytest.approx(-1.0)


def test_d_squared_zero_on_random_one_forms():
    for seed in range(3):
        w = random_oneform(3, seed=seed + 10, degree=3)
        dw = exterior_derivative_field(w)
        for p in ball_points(3, 1.0, 10):
            dd = exterior_derivative(dw, p)
            assert np.max(np.abs(dd)) <= 1e-13


def test_codifferential_flat_calibration():
    # delta(df) = -laplacian(f) on flat R^2
    chart = ChartSpec(2, 1.0)
    f = polynomial_scalar(chart, {((), (2, 0)): 1.0, ((), (0, 2)): 2.0,
                                  ((), (1, 1)): -1.0})
    g = flat_metric(2)
    df = polynomial_oneform(chart, {((0,), (1, 0)): 2.0, ((0,), (0, 1)): -1.0,
                                    ((1,), (0, 1)): 4.0, ((1,), (1, 0)): -1.0})
    p = np.array([0.3, 0.7])
    lap = 2.0 + 4.0
    assert codifferential(df, g, p) == pytest.approx(-lap)


def test_codifferential_of_constant_form_vanishes():
    chart = ChartSpec(3, 1.0)
    g = flat_metric(3)
    w = polynomial_oneform(chart, {((0,), (0, 0, 0)): 1.0})
    assert np.max(np.abs(codifferential(w, g, np.array([0.1, 0.2, 0.3])))) == 0.0


def test_codifferential_of_kahler_form_vanishes():
    g, J = kahler_surface_product(seed=21, kind="complex")
    om = kahler_form_field(g, J)
    for p in ball_points(4, 1.0, 10):
        assert np.max(np.abs(codifferential(om, g, p))) <= 1e-10


# ---------------------------------------------------------------------------
# Nijenhuis tensor
# ---------------------------------------------------------------------------

def test_nijenhuis_constant_structures_vanish():
    chart = ChartSpec(4, 1.0)
    for kind in ("complex", "para"):
        J = standard_endo_field(chart, kind)
        N = nijenhuis(J, np.array([0.2, -0.1, 0.4, 0.3]))
        assert np.max(np.abs(N)) == 0.0


def test_nijenhuis_against_finite_difference_brackets():
    J = conjugated_endo(4, "complex", seed=3, bound=0.4)
    p = np.array([0.2, -0.3, 0.1, 0.25])
    N = nijenhuis(J, p)
    assert np.max(np.abs(N)) > 1e-4     # genuinely non-integrable

    h = 1e-6

    def Jv(x):
        return J.values(x)

    def bracket(f_field, g_field, x):
        # [F, G]^k = F^a d_a G^k - G^a d_a F^k via central differences
        out = np.zeros(4)
        F, G = f_field(x), g_field(x)
        for a in range(4):
            dp = np.zeros(4)
            dp[a] = h
            dG = (g_field(x + dp) - g_field(x - dp)) / (2 * h)
            dF = (f_field(x + dp) - f_field(x - dp)) / (2 * h)
            out += F[a] * dG - G[a] * dF
        return out

    eps = J.square_sign
    for i, j in ((0, 1), (1, 3), (0, 2)):
        Ei = lambda x, i=i: np.eye(4)[i]
        Ej = lambda x, j=j: np.eye(4)[j]
        JEi = lambda x, i=i: Jv(x)[i]
        JEj = lambda x, j=j: Jv(x)[j]
        lie_jij = bracket(JEi, Ej, p)
        lie_ijj = bracket(Ei, JEj, p)
        lie_jijj = bracket(JEi, JEj, p)
        expected = (-eps * (np.einsum("a,ak->k", lie_jij, Jv(p))
                            + np.einsum("a,ak->k", lie_ijj, Jv(p)))
                    + eps * lie_jijj)
        assert np.allclose(N[i, j], expected, atol=1e-5)


def test_nijenhuis_rejects_bad_endo():
    chart = ChartSpec(2, 1.0)
    bad = constant_field(chart, np.array([[0.0, 1.0], [1.0, 0.5]]),
                         EndoField, kind="para")
    with pytest.raises(GeometryError):
        nijenhuis(bad, np.zeros(2))


# ---------------------------------------------------------------------------
# star-Ricci and the Kahler curvature symmetry
# ---------------------------------------------------------------------------

def test_star_ricci_flat_kahler_zero():
    g = flat_metric(4, (0, 4))
    J = standard_endo_field(g.chart, "complex")
    data = star_ricci(g, J, np.array([0.1, 0.0, -0.2, 0.3]))
    assert np.max(np.abs(data.rho_star)) == 0.0
    assert data.tau_star == 0.0


@pytest.mark.parametrize("kind,seed", [("complex", 31), ("para", 32)])
def test_star_ricci_kahler_calibration(kind, seed):
    g, J = kahler_surface_product(seed=seed, kind=kind)
    for p in ball_points(4, 0.8, 10):
        geo = point_geometry(g, p, order=2, J=J)
        data = star_ricci(g, J, p)
        assert np.allclose(data.rho_star, geo.ricci[..., 0], atol=1e-8)
        assert data.tau_star == pytest.approx(float(geo.tau[0]), abs=1e-8)


def test_kahler_symmetry_defect():
    g, J = kahler_surface_product(seed=33, kind="complex")
    for p in ball_points(4, 0.8, 5):
        assert kahler_symmetry_defect(g, J, p) <= 1e-10
    g2, J2 = random_almost_hermitian(4, seed=34, kind="complex")
    defects = [kahler_symmetry_defect(g2, J2, p) for p in ball_points(4, 0.8, 5)]
    assert max(defects) > 1e-6


# ---------------------------------------------------------------------------
# Prop-style equivalence of the three Kahler criteria
# ---------------------------------------------------------------------------

def test_kahler_criteria_agree():
    pts = ball_points(4, 0.8, 8)
    for seed in range(41, 51):
        g, J = kahler_surface_product(seed=seed, kind="complex")
        res = kahler_criteria(g, J, pts)
        assert all(res["verdicts"].values()), res["defects"]
    for seed in range(51, 61):
        g, J = random_almost_hermitian(4, seed=seed, kind="complex")
        res = kahler_criteria(g, J, pts)
        # all three criteria must fail together on generic inputs
        assert not any(res["verdicts"].values()), res["defects"]
