import numpy as np
import pytest

from lcrlab.errors import DescriptorError, DimensionError, DomainError, LabError
from lcrlab.maps import (
    MapSpec,
    composed_map,
    derivative,
    derivative_check,
    derivative_fd,
    derivative_lipschitz,
    derivative_sup,
    evaluate,
    lip1_estimate,
    lip2_estimate,
    lipschitz_from_witness,
    linear_map,
    omega_estimate,
    quadratic_map,
    second_difference,
    shear_map,
)
from lcrlab.spaces import euclidean, lp, norm, sample_ball


def test_evaluate_examples():
    np.testing.assert_allclose(evaluate(shear_map(1.0), [0.2, 0.3]), [0.2, 0.32], atol=1e-15)
    np.testing.assert_array_equal(evaluate(linear_map(2 * np.eye(2), radius=2.0), [1.0, 1.0]), [2.0, 2.0])
    Q = [np.zeros((2, 2)), np.diag([1.0, 0.0])]
    np.testing.assert_allclose(evaluate(quadratic_map(Q), [0.5, 0.0]), [0.5, 0.25])


def test_evaluate_distinguishes_domain_and_dimension_errors():
    m = shear_map(1.0)
    with pytest.raises(DomainError):
        evaluate(m, [1.0, 1.0])
    with pytest.raises(DimensionError):
        evaluate(m, [0.1, 0.1, 0.1])
    assert not issubclass(DomainError, DimensionError) and not issubclass(DimensionError, DomainError)


def test_second_difference_examples():
    np.testing.assert_allclose(second_difference(shear_map(2.0), [0.0, 0.0], [0.1, 0.0]), [0.0, 0.02], atol=1e-15)
    rng = np.random.default_rng(0)
    for k in (0.5, 3.0):
        for _ in range(50):
            x = rng.uniform(-0.3, 0.3, 2)
            h = rng.uniform(-0.3, 0.3, 2)
            np.testing.assert_allclose(second_difference(shear_map(k), x, h), [0.0, k * h[0] ** 2], atol=1e-14)
    d = second_difference(linear_map([[1.0, 2.0], [3.0, 4.0]], [1.0, -1.0]), [0.1, 0.2], [0.3, -0.4])
    np.testing.assert_allclose(d, 0.0, atol=1e-14)


def test_second_difference_segment_check():
    with pytest.raises(DomainError):
        second_difference(shear_map(1.0), [0.5, 0.0], [0.6, 0.0])


def test_derivative_examples():
    np.testing.assert_allclose(derivative(shear_map(1.0), [0.5, 0.0]), [[1.0, 0.0], [0.5, 1.0]])
    A = np.array([[2.0, 1.0], [0.0, 0.5]])
    np.testing.assert_array_equal(derivative(linear_map(A), [0.3, -0.2]), A)
    J = derivative(shear_map(3.0, space=euclidean(3)), [0.2, 0.1, 0.0])
    expected = np.eye(3)
    expected[2, 0] = 0.6
    np.testing.assert_allclose(J, expected)


@pytest.mark.parametrize("name", ["shear-2", "shear-3d", "quadratic", "linear", "composed"])
def test_finite_difference_jacobian_agreement(maps, name):
    m = maps[name]
    pts = m.domain.c + sample_ball(m.domain_space, 0.999 * m.domain.radius, 1000, 9)
    J = m.jac(pts)
    for x, Jx in zip(pts, J):
        np.testing.assert_allclose(derivative_fd(m, x), Jx, atol=1e-6)


def test_analytic_inverse_roundtrip(maps):
    for name in ("shear-1", "shear-4", "shear-3d", "linear", "composed"):
        m = maps[name]
        assert m.has_inverse
        x = m.domain.c + sample_ball(m.domain_space, m.domain.radius, 500, 2)
        np.testing.assert_allclose(m.inverse(m.f(x)), x, atol=1e-10)
    assert not maps["quadratic"].has_inverse
    assert not linear_map([[1.0, 1.0], [1.0, 1.0]]).has_inverse


@pytest.mark.parametrize("k", [0.5, 1.0, 2.0, 4.0])
def test_omega2_shear_exact_for_t_up_to_radius(k):
    m = shear_map(k)
    grid = [1.0 * 2.0**-j for j in range(12)]
    est = omega_estimate(m, 2, grid, 2000, 0)
    for t, w in zip(est.t_grid, est.omega_values):
        assert (1 - 1e-3) * k * t * t <= w <= k * t * t * (1 + 1e-12)


def test_omega_values_nondecreasing_and_witness_reproduces(maps):
    for name in ("shear-2", "quadratic", "composed", "shear-lp1.5"):
        m = maps[name]
        for order in (1, 2):
            est = omega_estimate(m, order, None, 800, 3)
            vals = [w for _, w in sorted(zip(est.t_grid, est.omega_values))]
            assert all(a <= b for a, b in zip(vals, vals[1:]))
            assert lipschitz_from_witness(m, est) == pytest.approx(est.lip_constant, abs=1e-10)
            assert est.bias == "lower-bound-of-supremum"


def test_lip2_of_linear_map_is_zero():
    est = lip2_estimate(linear_map([[2.0, 1.0], [0.0, 0.5]], [3.0, 1.0]), 1000, 0)
    assert est.lip_constant == 0.0


def test_lip1_of_linear_map_is_largest_singular_value():
    A = np.array([[2.0, 1.0], [0.0, 0.5]])
    # power iteration on A^T A as the oracle
    v = np.array([1.0, 0.3])
    for _ in range(200):
        v = A.T @ A @ v
        v /= np.linalg.norm(v)
    sigma = float(np.linalg.norm(A @ v))
    est = lip1_estimate(linear_map(A), 2000, 0)
    assert est.lip_constant == pytest.approx(sigma, rel=1e-6)
    assert est.lip_constant <= sigma * (1 + 1e-12)


def test_omega_grid_validation():
    m = shear_map(1.0)
    with pytest.raises(LabError):
        omega_estimate(m, 3, [0.1], 100, 0)
    with pytest.raises(LabError):
        omega_estimate(m, 2, [3.0], 100, 0)
    with pytest.raises(LabError):
        omega_estimate(m, 2, [], 100, 0)


@pytest.mark.parametrize("k", [0.5, 2.0])
def test_derivative_check_shear_values(k):
    dc = derivative_check(shear_map(k), 2000, 0)
    assert dc.lip1_of_derivative.value == pytest.approx(k, rel=1e-6)
    assert dc.frechet_residual_max == pytest.approx(k / 2, rel=1e-6)
    # ||[[1, 0], [k x1, 1]]|| is largest at |x1| = 1
    s = np.linalg.norm([[1.0, 0.0], [k, 1.0]], 2)
    assert dc.operator_norm_sup.value == pytest.approx(s, rel=1e-6)


def test_derivative_check_linear_map():
    dc = derivative_check(linear_map([[2.0, 1.0], [0.0, 0.5]]), 1000, 0)
    assert dc.lip1_of_derivative.value == 0.0
    assert dc.frechet_residual_max <= 1e-9
    assert dc.operator_norm_sup.value == pytest.approx(np.linalg.norm([[2.0, 1.0], [0.0, 0.5]], 2), rel=1e-9)


def test_derivative_estimates_nonnegative_and_tagged(maps):
    for name in ("quadratic", "shear-linf", "shear-lp1.5"):
        dc = derivative_check(maps[name], 500, 1)
        assert dc.frechet_residual_max >= 0
        assert dc.lip1_of_derivative.value >= 0
        assert dc.operator_norm_sup.value >= 0
        assert dc.operator_norm_sup.bias == "lower-bound-of-supremum"


def test_non_euclidean_operator_norm_is_lower_bound():
    # Riesz-Thorin: ||T||_p <= max(row sum, column sum) = 1 + |x1| <= 2, and
    # f'(x) - f'(y) = (x1 - y1) e2 e1^T has norm |x1 - y1| <= ||x - y||_p
    m = shear_map(1.0, space=lp(2, 50.0))
    sup = derivative_sup(m, 500, 0).value
    assert 1.9 <= sup <= 2.0 + 1e-9
    assert 0.9 <= derivative_lipschitz(m, 500, 0).value <= 1.0 + 1e-9


# -- descriptors -------------------------------------------------------------


@pytest.mark.parametrize(
    "desc, field",
    [
        ({"family": "parabolic_shear", "params": {"k": "big"}}, "map.params.k"),
        ({"family": "parabolic_shear", "params": {"k": -1.0}}, "map.params.k"),
        ({"family": "spiral", "params": {}}, "map.family"),
        ({"family": "linear", "params": {"A": [[1.0, 0.0, 0.0]]}}, "map.params"),
        ({"family": "parabolic_shear", "params": {"k": 1.0}, "domain": {"radius": 0}}, "map.domain.radius"),
    ],
)
def test_map_descriptor_errors_name_the_field(desc, field):
    with pytest.raises(DescriptorError) as exc:
        MapSpec.from_dict(desc, euclidean(2))
    assert exc.value.field == field


def test_map_descriptor_roundtrip():
    m = composed_map([[1.0, 0.5], [0.0, 1.0]], shear_map(1.0))
    again = MapSpec.from_dict(m.to_dict(), m.domain_space)
    x = sample_ball(euclidean(2), 1.0, 20, 0)
    np.testing.assert_array_equal(again.f(x), m.f(x))
    assert norm(euclidean(2), again.f(x)[0]) == norm(euclidean(2), m.f(x)[0])
