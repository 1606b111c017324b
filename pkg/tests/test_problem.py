"""Problem families: oracle consistency, closed forms, and solvers."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gossipbo.problem import (
    FEATURE_HALF_WIDTH,
    FEATURE_VAR,
    LowerSolveDiverged,
    RidgeTuningSpec,
    SingularHessian,
    dense_lower_hessian,
    hypergradient_exact,
    lower_solve,
    make_logcosh,
    make_quadratic,
    make_ridge_tuning,
    phi_value,
    trivial_quadratic,
    z_star,
)


def fd_grad(fn, v, h=1e-6):
    """Central finite-difference gradient of a scalar function."""
    out = np.empty(len(v))
    for k in range(len(v)):
        e = np.zeros(len(v))
        e[k] = h
        out[k] = (fn(v + e) - fn(v - e)) / (2.0 * h)
    return out


@pytest.fixture(scope="module")
def quad():
    return make_quadratic(11, n_nodes=3, d=2, p=4, conditioning=6.0, heterogeneity=0.4)


@pytest.fixture(scope="module")
def ridge():
    return make_ridge_tuning(5, RidgeTuningSpec(dim_p=6, sigma_omega=0.5), 4)


@pytest.fixture(scope="module")
def logcosh():
    return make_logcosh(3, n_nodes=3, d=2, p=5)


@pytest.mark.parametrize("family", ["quad", "ridge", "logcosh"])
def test_gradients_match_finite_differences(family, request):
    prob = request.getfixturevalue(family)
    rng = np.random.default_rng(0)
    x = rng.standard_normal(prob.dim_x)
    if family == "ridge":
        x = np.abs(x) + 0.1  # keep away from the |x| kink
    y = rng.standard_normal(prob.dim_y)
    for i in range(prob.n_nodes):
        assert np.allclose(
            prob.grad_y_f(i, x, y), fd_grad(lambda v: prob.f_value(i, x, v), y), atol=1e-5
        )
        assert np.allclose(
            prob.grad_y_g(i, x, y), fd_grad(lambda v: prob.g_value(i, x, v), y), atol=1e-5
        )
        assert np.allclose(
            prob.grad_x_g(i, x, y), fd_grad(lambda v: prob.g_value(i, v, y), x), atol=1e-5
        )


@pytest.mark.parametrize("family", ["quad", "ridge", "logcosh"])
def test_second_order_products_match_gradient_differences(family, request):
    prob = request.getfixturevalue(family)
    rng = np.random.default_rng(1)
    x = rng.standard_normal(prob.dim_x)
    if family == "ridge":
        x = np.abs(x) + 0.1
    y = rng.standard_normal(prob.dim_y)
    v = rng.standard_normal(prob.dim_y)
    h = 1e-6
    for i in range(prob.n_nodes):
        hv = (prob.grad_y_g(i, x, y + h * v) - prob.grad_y_g(i, x, y - h * v)) / (2 * h)
        assert np.allclose(prob.hess_yy_g(i, x, y, v), hv, atol=1e-5)
        cv = (prob.grad_x_g(i, x, y + h * v) - prob.grad_x_g(i, x, y - h * v)) / (2 * h)
        assert np.allclose(prob.cross_xy_g(i, x, y, v), cv, atol=1e-5)


def test_trivial_instance_ground_truth():
    prob = trivial_quadratic(dim=3, n_nodes=2)
    x = np.array([1.0, -2.0, 0.5])
    assert np.allclose(lower_solve(prob, x), x, atol=1e-12)
    assert np.allclose(hypergradient_exact(prob, x), x, atol=1e-10)
    assert abs(phi_value(prob, x) - 0.5 * x @ x) < 1e-12


def test_quadratic_y_star_solves_lower_level(quad):
    rng = np.random.default_rng(2)
    for _ in range(5):
        x = rng.standard_normal(quad.dim_x)
        y = quad.y_star(x)
        assert np.linalg.norm(quad.mean_grad_y_g(x, y)) < 1e-10 * max(
            1.0, np.linalg.norm(y)
        )


def test_quadratic_x_opt_is_stationary(quad):
    g = hypergradient_exact(quad, quad.x_opt())
    assert np.linalg.norm(g) < 1e-8


def test_quadratic_phi_star_is_minimal(quad):
    star = quad.phi_star()
    rng = np.random.default_rng(3)
    for _ in range(10):
        x = quad.x_opt() + rng.standard_normal(quad.dim_x)
        assert phi_value(quad, x) >= star - 1e-9


def test_dense_lower_hessian_matches_family_matrix(quad):
    x = np.zeros(quad.dim_x)
    y = np.zeros(quad.dim_y)
    H = dense_lower_hessian(quad, x, y)
    assert np.allclose(H, quad.A_bar, atol=1e-12)


def test_z_star_solves_linear_system(quad):
    x = np.array([0.3, -0.7])
    y = lower_solve(quad, x)
    z = z_star(quad, x)
    H = dense_lower_hessian(quad, x, y)
    assert np.allclose(H @ z, quad.mean_grad_y_f(x, y), atol=1e-9)


def test_lower_solve_newton_on_nonquadratic(logcosh):
    x = np.array([0.4, -0.2])
    y = lower_solve(logcosh, x)
    res = np.linalg.norm(logcosh.mean_grad_y_g(x, y))
    assert res <= 1e-10 * max(1.0, np.linalg.norm(y))


def test_hypergradient_matches_fd_on_nonquadratic(logcosh):
    x = np.array([0.25, -0.5])
    h = 1e-5
    fd = fd_grad(lambda v: phi_value(logcosh, v), x, h=h)
    g = hypergradient_exact(logcosh, x)
    assert np.linalg.norm(g - fd) < 1e-6 * max(1.0, np.linalg.norm(g))


def test_singular_hessian_raises():
    prob = trivial_quadratic(dim=2, n_nodes=1)
    with pytest.raises(ValueError):
        # Zero lower curvature is rejected at construction.
        prob.spec.A[:] = 0.0
        type(prob)(prob.spec)


def test_ridge_constants():
    assert abs(FEATURE_HALF_WIDTH - 2.0 * 1.5 ** (1 / 3)) < 1e-15
    assert abs(FEATURE_VAR - FEATURE_HALF_WIDTH**2 / 3.0) < 1e-15


def test_ridge_population_oracles_match_monte_carlo(ridge):
    # The deterministic oracles are population expectations of the
    # streaming-sample losses; check both value and gradient by averaging
    # many stochastic draws at a fixed point.
    rng = np.random.default_rng(7)
    x = np.array([0.8])
    y = rng.standard_normal(ridge.dim_y)
    i = 1
    n_samples = 200_000
    feats = rng.uniform(-FEATURE_HALF_WIDTH, FEATURE_HALF_WIDTH, (n_samples, ridge.dim_y))
    labels = feats @ ridge.omega[i] + rng.standard_normal(n_samples)
    resid = feats @ y - labels
    mc_f = np.mean(resid**2)
    assert abs(mc_f - ridge.f_value(i, x, y)) < 0.05 * ridge.f_value(i, x, y)
    mc_grad = (2.0 * resid[:, None] * feats).mean(axis=0)
    assert np.allclose(mc_grad, ridge.grad_y_f(i, x, y), atol=0.3)


def test_ridge_y_star_and_phi_star(ridge):
    x = np.array([1.3])
    y = ridge.y_star(x)
    assert np.linalg.norm(ridge.mean_grad_y_g(x, y)) < 1e-10 * max(
        1.0, np.linalg.norm(y)
    )
    # At x = 0 the lower solution is the mean weight vector and the upper
    # objective attains its analytic optimum.
    assert abs(phi_value(ridge, np.zeros(1)) - ridge.phi_star()) < 1e-10
    assert phi_value(ridge, np.array([0.5])) > ridge.phi_star()


def test_ridge_sign_zero_freezes_regularizer_gradient(ridge):
    y = np.ones(ridge.dim_y)
    assert ridge.grad_x_g(0, np.zeros(1), y) == pytest.approx(0.0)
    assert ridge.cross_xy_g(0, np.zeros(1), y, y) == pytest.approx(0.0)


@given(st.integers(min_value=0, max_value=2**31))
@settings(max_examples=25, deadline=None)
def test_ridge_stochastic_gradient_unbiased_in_sample_mean(seed):
    prob = make_ridge_tuning(9, RidgeTuningSpec(dim_p=4, sigma_omega=1.0), 3)
    rng = np.random.default_rng(seed)
    x = np.array([0.2])
    y = rng.standard_normal(prob.dim_y)
    grads = np.zeros(prob.dim_y)
    k = 4000
    for _ in range(k):
        zeta = prob.draw_g_sample(0, rng)
        grads += prob.sgrad_y_g(0, x, y, zeta)
    grads /= k
    # Loose CLT-scale agreement with the population gradient (whose norm
    # is an order of magnitude larger than this bound).
    assert np.linalg.norm(grads - prob.grad_y_g(0, x, y)) < 4.0


def test_quadratic_stochastic_noise_is_zero_mean(quad):
    noisy = make_quadratic(
        11, n_nodes=3, d=2, p=4, conditioning=6.0, heterogeneity=0.4, noise_scale=0.3
    )
    rng = np.random.default_rng(12)
    x = rng.standard_normal(noisy.dim_x)
    y = rng.standard_normal(noisy.dim_y)
    acc = np.zeros(noisy.dim_y)
    k = 20000
    for _ in range(k):
        zeta = noisy.draw_g_sample(0, rng)
        acc += noisy.sgrad_y_g(0, x, y, zeta)
    assert np.linalg.norm(acc / k - noisy.grad_y_g(0, x, y)) < 0.05


def test_logcosh_hessian_lipschitz_constant_vs_sampling(logcosh):
    # Third derivative of the separable part is lam * d/du(1 - tanh^2 u);
    # scan densely for its maximum magnitude.
    u = np.linspace(-4, 4, 200001)
    vals = np.abs(-2.0 * np.tanh(u) * (1.0 - np.tanh(u) ** 2))
    measured = logcosh.lam * vals.max()
    assert measured <= logcosh.hessian_lipschitz + 1e-9
    assert measured >= logcosh.hessian_lipschitz - 1e-6


def test_make_quadratic_validates_args():
    with pytest.raises(ValueError):
        make_quadratic(0, 2, 0, 3)
    with pytest.raises(ValueError):
        make_quadratic(0, 2, 2, 3, conditioning=0.5)


def test_lower_solve_diverged_propagates():
    prob = make_logcosh(3, n_nodes=2, d=2, p=3)
    with pytest.raises(LowerSolveDiverged):
        lower_solve(prob, np.array([0.1, 0.1]), tol=1e-10, max_iter=0)
