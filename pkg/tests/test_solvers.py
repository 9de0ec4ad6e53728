import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from oracles import lp_vertex_bp, piecewise_linear_min, prox_grad_elastic_net, ridge_closed_form
from sparseloc.solvers import (DesignSystem, InfeasibleSystemError, Method, PenaltyProfile,
                               SolverOptions, augment_outliers, destandardize, elastic_net_kkt,
                               elastic_net_objective, estimate, method_penalty, soft_threshold,
                               solve_basis_pursuit, solve_weighted_elastic_net, standardize)


def random_system(rng, n=10, p=30):
    return DesignSystem(H=rng.standard_normal((n, p)), y=rng.standard_normal(n))


def test_soft_threshold_examples():
    assert soft_threshold(3.0, 1.0) == 2.0
    assert soft_threshold(-0.5, 1.0) == 0.0
    assert soft_threshold(-3.0, 1.0) == -2.0
    assert soft_threshold(1.7, 0.0) == 1.7


def test_one_dimensional_lasso():
    sys = DesignSystem(H=[[1.0]], y=[2.0])
    sol = solve_weighted_elastic_net(sys, PenaltyProfile.lasso(1, 1.0))
    assert sol.theta[0] == pytest.approx(1.5, abs=1e-12)
    assert sol.converged


def test_one_dimensional_glmnet():
    sys = DesignSystem(H=[[1.0]], y=[2.0])
    sol = solve_weighted_elastic_net(sys, PenaltyProfile.glmnet(1, 1.0, 0.5))
    assert sol.theta[0] == pytest.approx(7 / 6, abs=1e-12)


def test_oracle_agreement(rng):
    for _ in range(5):
        sys = random_system(rng)
        l1 = rng.uniform(0.05, 0.5, 30)
        l2 = rng.uniform(0.0, 0.2, 30)
        pen = PenaltyProfile().with_weights(l1, l2)
        sol = solve_weighted_elastic_net(sys, pen, SolverOptions(tolerance=1e-10))
        _, f_ref = prox_grad_elastic_net(sys.H, sys.y, l1, l2)
        assert abs(sol.objective - f_ref) <= 1e-6 * abs(f_ref)


def test_objective_is_direct_evaluation(rng):
    sys = random_system(rng)
    pen = PenaltyProfile.glmnet(30, 0.3, 0.7)
    sol = solve_weighted_elastic_net(sys, pen)
    direct = elastic_net_objective(sys, pen, sol.theta)
    assert sol.objective == pytest.approx(direct, rel=1e-10)


def test_objective_monotone(rng):
    sys = random_system(rng, 15, 40)
    sol = solve_weighted_elastic_net(sys, PenaltyProfile.lasso(40, 0.05))
    assert np.all(np.diff(sol.history) <= 1e-12 * np.abs(sol.history[:-1]))


def test_kkt_certificate(rng):
    opt = SolverOptions()
    for _ in range(10):
        sys = random_system(rng)
        pen = PenaltyProfile.glmnet(30, rng.uniform(0.01, 1), rng.uniform(0, 1))
        sol = solve_weighted_elastic_net(sys, pen, opt)
        assert sol.converged
        assert sol.kkt_residual <= opt.tolerance
        assert elastic_net_kkt(sys, pen, sol.theta) <= opt.tolerance


def test_large_lambda_gives_zero(rng):
    sys = random_system(rng)
    lam_max = np.abs(2.0 / sys.n * sys.H.T @ sys.y).max()
    sol = solve_weighted_elastic_net(sys, PenaltyProfile.lasso(30, lam_max))
    assert_array_equal(sol.theta, 0.0)


def test_ridge_endpoint(rng):
    for _ in range(3):
        sys = random_system(rng)
        sol = estimate("glmnet", sys, PenaltyProfile(lam=0.4, alpha=0.0), standardized=False,
                       opt=SolverOptions(tolerance=1e-12, max_iterations=100_000))
        assert_allclose(sol.theta, ridge_closed_form(sys.H, sys.y, 0.4), atol=1e-6)


def test_lasso_endpoint(rng):
    sys = random_system(rng)
    a = estimate("glmnet", sys, PenaltyProfile(lam=0.2, alpha=1.0), standardized=False)
    b = estimate("lasso", sys, PenaltyProfile(lam=0.2), standardized=False)
    assert_allclose(a.theta, b.theta, atol=1e-12)


def test_estimate_lasso_is_engine(rng):
    sys = random_system(rng)
    a = estimate("lasso", sys, PenaltyProfile(lam=0.3, alpha=0.5), standardized=False)
    b = solve_weighted_elastic_net(sys, PenaltyProfile.lasso(30, 0.3))
    assert_array_equal(a.theta, b.theta)


def test_estimate_m_lasso_is_lasso_on_augmented(rng):
    sys = random_system(rng)
    pen = PenaltyProfile(lam=0.3, mu=0.2)
    a = estimate("m-lasso", sys, pen)
    aug, aug_pen = augment_outliers(sys, method_penalty(Method.LASSO, sys.p, pen))
    std = standardize(aug)
    raw = solve_weighted_elastic_net(std, aug_pen)
    coef, icpt = destandardize(raw.theta, std.standardization)
    assert_allclose(a.theta, coef[:30], atol=1e-12)
    assert_allclose(a.kappa, coef[30:], atol=1e-12)
    assert a.intercept == pytest.approx(icpt)


def test_augment_shapes_and_weights(rng):
    sys = random_system(rng, 4, 6)
    aug, pen = augment_outliers(sys, PenaltyProfile.glmnet(6, 1.0, 0.5).__class__(
        lam=1.0, alpha=0.5, mu=0.7, l1=np.full(6, 0.5), l2=np.full(6, 0.5)))
    assert aug.H.shape == (4, 10)
    assert_array_equal(aug.H[:, 6:], np.eye(4))
    assert_allclose(pen.l1[6:], 0.7)
    assert_allclose(pen.l2[6:], 0.0)


def test_standardize_roundtrip(rng):
    sys = DesignSystem(H=rng.normal(-70, 8, (10, 5)), y=rng.normal(-70, 8, 10))
    std = standardize(sys)
    assert_allclose(std.H.mean(axis=0), 0.0, atol=1e-12)
    assert_allclose(np.linalg.norm(std.H, axis=0), 1.0)
    theta_std = rng.standard_normal(5)
    theta, icpt = destandardize(theta_std, std.standardization)
    assert_allclose(std.H @ theta_std + std.standardization.response_shift, sys.H @ theta + icpt)


def test_degenerate_column_pinned(rng):
    H = rng.standard_normal((8, 4))
    H[:, 2] = -60.0
    sol = estimate("lasso", DesignSystem(H=H, y=rng.standard_normal(8)), PenaltyProfile(lam=0.01))
    assert sol.theta[2] == 0.0
    assert sol.degenerate == (2,)


def test_bp_identity():
    sol = solve_basis_pursuit(DesignSystem(H=np.eye(3), y=[0.0, 5.0, 0.0]), np.ones(3))
    assert_allclose(sol.theta, [0.0, 5.0, 0.0], atol=1e-7)
    assert sol.converged


def test_bp_against_vertex_lp(rng):
    opt = SolverOptions()
    for t in range(15):
        H = rng.standard_normal((3, 6))
        y = H @ np.where(rng.random(6) < 0.4, rng.standard_normal(6), 0.0) + 0.1 * rng.standard_normal(3)
        w = rng.uniform(0.2, 2.0, 6)
        if t % 3 == 0:
            w[rng.integers(6)] = 0.0  # one free coordinate
        sol = solve_basis_pursuit(DesignSystem(H=H, y=y), w, opt)
        _, best = lp_vertex_bp(H, y, w)
        assert sol.converged
        assert sol.objective == pytest.approx(best, rel=1e-6, abs=1e-7)
        assert np.abs(H @ sol.theta - y).max() <= opt.admm_primal_tol


def test_bp_free_coordinate_absorbs():
    H = np.array([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0]])
    y = np.array([1.0, 1.0])
    sol = solve_basis_pursuit(DesignSystem(H=H, y=y), np.array([1.0, 0.0, 1.0]))
    assert_allclose(sol.theta, [0.0, 1.0, 0.0], atol=1e-7)
    assert sol.objective == pytest.approx(0.0, abs=1e-7)


def test_bp_kkt(rng):
    opt = SolverOptions()
    for _ in range(10):
        H = rng.standard_normal((8, 20))
        sol = solve_basis_pursuit(DesignSystem(H=H, y=H[:, 3] * 2.0), np.ones(20), opt)
        assert sol.converged
        assert sol.kkt_residual <= 10 * opt.admm_dual_tol


def test_bp_infeasible():
    H = np.array([[1.0, 2.0], [2.0, 4.0]])
    with pytest.raises(InfeasibleSystemError):
        solve_basis_pursuit(DesignSystem(H=H, y=[1.0, 0.0]), np.ones(2))


def test_m_cs_example():
    sys = DesignSystem(H=[[1.0], [1.0]], y=[1.0, 11.0])
    sol = estimate("m-cs", sys, PenaltyProfile(mu=1.0), standardized=False)
    f = lambda t: abs(t) + abs(1 - t) + abs(11 - t)
    t_ref, _ = piecewise_linear_min([0.0, 1.0, 11.0], f)
    assert sol.theta[0] == pytest.approx(t_ref, abs=1e-6)
    assert_allclose(sol.kappa, [0.0, 10.0], atol=1e-6)


@pytest.mark.parametrize("method", ["lasso", "glmnet"])
def test_huge_mu_kills_kappa(rng, method):
    sys = random_system(rng)
    pen = PenaltyProfile(lam=0.2, alpha=0.9, mu=1e9)
    robust = estimate("m-" + method, sys, pen)
    plain = estimate(method, sys, pen)
    assert_array_equal(robust.kappa, 0.0)
    assert_allclose(robust.theta, plain.theta, atol=1e-7)


def test_outlier_absorbed_by_kappa(rng):
    H = rng.standard_normal((12, 5))
    y = H @ np.array([0.0, 2.0, 0.0, 0.0, 0.0])
    y[4] += 30.0
    sol = estimate("m-lasso", DesignSystem(H=H, y=y), PenaltyProfile(lam=0.05, mu=0.5))
    assert np.argmax(np.abs(sol.kappa)) == 4
    assert abs(sol.kappa[4]) > 20


def test_method_parse():
    assert Method.parse("M_LASSO") is Method.M_LASSO
    assert Method.M_CS.uses_basis_pursuit and Method.M_CS.robust
    assert Method.M_GLMNET.base is Method.GLMNET
    with pytest.raises(ValueError):
        Method.parse("ridge")


def test_penalty_validation():
    with pytest.raises(ValueError):
        PenaltyProfile(lam=-1.0)
    with pytest.raises(ValueError):
        PenaltyProfile(alpha=1.5)
    with pytest.raises(ValueError):
        PenaltyProfile(l1=[-1.0])
    with pytest.raises(ValueError):
        solve_weighted_elastic_net(DesignSystem(H=np.eye(2), y=[1.0, 1.0]), PenaltyProfile())


def test_design_validation():
    with pytest.raises(ValueError):
        DesignSystem(H=np.ones((3, 2)), y=np.ones(2))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 8), st.integers(1, 12), st.floats(0.0, 1.0), st.floats(1e-3, 2.0),
       st.integers(0, 2 ** 32 - 1))
def test_cd_matches_oracle_property(n, p, alpha, lam, seed):
    r = np.random.default_rng(seed)
    sys = DesignSystem(H=r.standard_normal((n, p)), y=r.standard_normal(n))
    pen = PenaltyProfile.glmnet(p, lam, alpha)
    sol = solve_weighted_elastic_net(sys, pen, SolverOptions(tolerance=1e-10, max_iterations=100_000))
    _, f_ref = prox_grad_elastic_net(sys.H, sys.y, pen.l1, pen.l2)
    assert sol.converged
    assert sol.objective <= f_ref + 1e-6 * max(1.0, abs(f_ref))
