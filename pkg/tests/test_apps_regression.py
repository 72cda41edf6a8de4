import numpy as np
import pytest

from saaconic.errors import InputContractError
from saaconic.penalty import PenaltyPathConfig, solve_penalty_path
from saaconic.program import ScenarioSet, draw_scenarios, saa_objective
from saaconic.prox import check_gradient
from saaconic.apps import build_program
from saaconic.apps.regression import h1_gram, interp_weights


def test_param_contracts():
    with pytest.raises(InputContractError):
        build_program("regression", {"radius": 0.0})
    with pytest.raises(InputContractError):
        build_program("regression", {"n": 2})


def test_zero_data_zero_objective():
    prog = build_program("regression", {"n": 16})
    xi_rows = np.column_stack([np.linspace(0, 1, 9), np.zeros(9)])  # y = 0 data
    scen = ScenarioSet(xi=xi_rows, base_seed=0)
    val, grad = saa_objective(prog, scen, np.zeros(prog.n))
    assert val == 0.0
    assert np.all(grad == 0.0)


def test_single_sample_interpolates():
    prog = build_program("regression", {"n": 32})
    scen = ScenarioSet(xi=np.array([[0.5, 1.0]]), base_seed=0)
    # penalty inactive at the fit (value 1 > 0), so a plain composite solve works
    from saaconic.prox import solve_composite

    fun = lambda u: saa_objective(prog, scen, u)
    res = solve_composite(fun, prog.psi, np.zeros(prog.n), tol=1e-12, max_iter=20000)
    j, theta = interp_weights(np.array([0.5]), prog.n)
    fitted = res.u_star[j[0]] * (1 - theta[0]) + res.u_star[j[0] + 1] * theta[0]
    assert fitted == pytest.approx(1.0, abs=1e-5)
    assert prog.psi.domain_norm(res.u_star) <= prog.psi.radius + 1e-9


def test_gradient_finite_differences():
    prog = build_program("regression", {"n": 24})
    rng = np.random.default_rng(0)
    for t in range(5):
        u = prog.psi.project(rng.standard_normal(prog.n))
        xi = prog.sample(np.random.default_rng(t))
        err = check_gradient(lambda v: prog.j_value_grad(v, xi), u, step=1e-6)
        assert err <= 1e-6


def test_batch_hooks_match_loops():
    prog = build_program("regression", {"n": 24})
    scen = draw_scenarios(prog, 32, 4)
    rng = np.random.default_rng(1)
    u = prog.psi.project(rng.standard_normal(prog.n))
    vals, grads = prog.j_batch(u, scen.xi)
    mu = rng.standard_normal((scen.N, 1))
    rows = prog.g_jac_t_batch(u, scen.xi, mu)
    for i in range(scen.N):
        v_ref, g_ref = prog.j_value_grad(u, scen[i])
        assert vals[i] == pytest.approx(v_ref, abs=1e-15)
        assert np.array_equal(grads[i], g_ref)
        assert np.array_equal(rows[i], prog.g_jacobian_transpose_apply(u, scen[i], mu[i]))
        assert np.array_equal(prog.g_batch(u, scen.xi)[i], prog.g_value(u, scen[i]))


def test_ball_projection_norm_correct():
    prog = build_program("regression", {"n": 40})
    rng = np.random.default_rng(2)
    for _ in range(10):
        v = 3 * rng.standard_normal(prog.n)
        z = prog.psi.project(v)
        assert prog.psi.domain_norm(z) <= prog.psi.radius + 1e-10
        assert np.allclose(prog.psi.project(z), z, atol=1e-9)


def test_gram_matches_quadrature_oracle():
    # H1 norm of the interpolant of sin(pi x): compare the quadratic form
    # against dense trapezoid quadrature of the piecewise-linear function
    n = 65
    gram = h1_gram(n)
    x = np.linspace(0, 1, n)
    u = np.sin(np.pi * x)
    form = float(u @ gram @ u)
    xx = np.linspace(0, 1, 40_001)
    uu = np.interp(xx, x, u)
    du = np.gradient(uu, xx)
    # the interpolant's derivative is piecewise constant; quadrature of the
    # dense samples converges to the exact element sums
    quad = np.trapezoid(uu**2, xx) + np.trapezoid(du**2, xx)
    assert form == pytest.approx(quad, rel=5e-3)


def test_responses_bounded():
    prog = build_program("regression", {"noise": 0.8})
    scen = draw_scenarios(prog, 500, 9)
    assert np.all(scen.xi[:, 1] >= -1.0) and np.all(scen.xi[:, 1] <= 1.0)
    assert np.all(scen.xi[:, 0] >= 0.0) and np.all(scen.xi[:, 0] <= 1.0)


def test_penalty_path_activates_constraint():
    # the target dips below zero, so the sign constraint binds and the
    # recovered multipliers are nonzero
    prog = build_program("regression", {"n": 32})
    cfg = PenaltyPathConfig(c_gamma=8.0, tol_per_stage=1e-7)
    path = solve_penalty_path(prog, 64, 0, cfg, accelerate=True)
    from saaconic.kkt import aggregate_multiplier_norm
    from saaconic.penalty import recover_multipliers

    mus = recover_multipliers(prog, path.scenarios, path.u, path.gamma_final)
    assert aggregate_multiplier_norm(mus) > 1e-4
