import numpy as np
import pytest

from saaconic.errors import InputContractError
from saaconic.penalty import (
    PenaltyPathConfig,
    assemble_penalized,
    gamma_schedule,
    recover_multipliers,
    solve_penalty_path,
)
from saaconic.program import draw_scenarios, saa_constraint_residual, saa_objective
from saaconic.apps import build_program
from saaconic.apps.scalar import path_point

from helpers import finite_atom_program


class TestSchedule:
    def test_fourth_root_growth(self):
        assert gamma_schedule(16, PenaltyPathConfig(c_gamma=1.0)) == pytest.approx(2.0)

    def test_single_sample(self):
        assert gamma_schedule(1, PenaltyPathConfig(c_gamma=3.0)) == pytest.approx(3.0)

    def test_scaled(self):
        assert gamma_schedule(10_000, PenaltyPathConfig(c_gamma=0.5)) == pytest.approx(5.0)

    def test_config_invariants(self):
        with pytest.raises(InputContractError):
            PenaltyPathConfig(exponent=1.5)
        with pytest.raises(InputContractError):
            PenaltyPathConfig(exponent=0.0)
        with pytest.raises(InputContractError):
            PenaltyPathConfig(c_gamma=-1.0)
        with pytest.raises(InputContractError):
            PenaltyPathConfig(gamma_stages=[4.0, 2.0])


@pytest.fixture(scope="module")
def toy():
    return finite_atom_program(
        atoms=[[1.5, 1.0], [2.0, 0.5], [1.0, 1.5]],
        probs=[0.4, 0.4, 0.2],
    )


class TestAssemble:
    def test_feasible_point_reduces_to_saa(self, toy):
        scen = draw_scenarios(toy, 5, 1)
        fun = assemble_penalized(toy, scen, gamma=3.0)
        u = np.array([-0.5, -0.5])  # strictly feasible for every level
        val, grad = fun(u)
        val_ref, grad_ref = saa_objective(toy, scen, u)
        assert val == pytest.approx(val_ref, abs=1e-15)
        assert np.array_equal(grad, grad_ref)

    def test_zero_gamma_rejected(self, toy):
        scen = draw_scenarios(toy, 2, 1)
        with pytest.raises(InputContractError):
            assemble_penalized(toy, scen, gamma=0.0)

    def test_gradient_finite_differences(self, toy):
        scen = draw_scenarios(toy, 4, 3)
        fun = assemble_penalized(toy, scen, gamma=7.0)
        rng = np.random.default_rng(0)
        u = rng.normal(size=2) + 1.0  # in the violating region
        _, grad = fun(u)
        step = 1e-6
        for i in range(2):
            e = np.zeros(2)
            e[i] = step
            fd = (fun(u + e)[0] - fun(u - e)[0]) / (2 * step)
            assert abs(fd - grad[i]) <= 1e-6 * max(1.0, abs(grad[i]))

    def test_gradient_fd_semilinear(self):
        prog = build_program("semilinear", {"n": 15})
        scen = draw_scenarios(prog, 4, 5)
        fun = assemble_penalized(prog, scen, gamma=7.0)
        rng = np.random.default_rng(1)
        u = prog.psi.project(8.0 * rng.normal(size=prog.n) + 6.0)
        _, grad = fun(u)
        step = 1e-6
        idx = rng.choice(prog.n, size=5, replace=False)
        for i in idx:
            e = np.zeros(prog.n)
            e[i] = step
            fd = (fun(u + e)[0] - fun(u - e)[0]) / (2 * step)
            assert abs(fd - grad[i]) <= 1e-4 * max(1e-6, abs(grad[i]))


class TestPath:
    def test_inactive_constraint_constant_path(self):
        prog = build_program("scalar", {"target": 0.25, "bound": 1.0})
        cfg = PenaltyPathConfig(gamma_stages=[1.0, 4.0, 16.0], tol_per_stage=1e-11)
        path = solve_penalty_path(prog, 1, 0, cfg)
        solutions = [r.u_star[0] for r in path.stage_results]
        for u in solutions:
            assert abs(u - solutions[0]) <= 1e-8
        assert abs(solutions[-1] - 0.25) <= 1e-8

    def test_closed_form_path_tracking(self):
        prog = build_program("scalar", {})
        stages = [4.0, 8.0, 16.0, 32.0, 64.0, 128.0]
        cfg = PenaltyPathConfig(gamma_stages=stages, tol_per_stage=1e-10)
        path = solve_penalty_path(prog, 1, 0, cfg)
        for gamma, res in zip(path.stage_gammas, path.stage_results):
            assert abs(res.u_star[0] - path_point(2.0, 1.0, gamma)) <= 1e-6

    def test_penalty_bound_against_feasible_point(self, toy):
        # mean penalty at the returned point is at most (objective of any
        # feasible point) / gamma
        cfg = PenaltyPathConfig(c_gamma=4.0, tol_per_stage=1e-9)
        path = solve_penalty_path(toy, 16, 3, cfg)
        scen = path.scenarios
        for u_feas in (np.array([-1.0, 0.0]), np.array([0.0, -2.0])):
            val, _ = saa_objective(toy, scen, u_feas)
            bound = (val + toy.psi.value(u_feas)) / path.gamma_final
            _, mean_pen = saa_constraint_residual(toy, scen, path.u)
            assert mean_pen <= bound + 1e-12

    def test_monotone_penalty_along_stages(self, toy):
        cfg = PenaltyPathConfig(gamma_stages=[1.0, 2.0, 4.0, 8.0, 16.0],
                                tol_per_stage=1e-10)
        path = solve_penalty_path(toy, 8, 11, cfg)
        pens = path.stage_penalties
        assert all(b <= a + 1e-12 for a, b in zip(pens, pens[1:]))


class TestMultipliers:
    def test_strictly_feasible_all_zero(self, toy):
        scen = draw_scenarios(toy, 6, 2)
        mus = recover_multipliers(toy, scen, np.array([-1.0, -1.0]), gamma=5.0)
        assert all(np.all(mu == 0.0) for mu in mus)

    def test_scalar_value(self):
        # K nonpositive, constraint image 0.5, gamma 4 -> multiplier 2
        prog = finite_atom_program(atoms=[[0.0, 0.0]], probs=[1.0])
        scen = draw_scenarios(prog, 1, 0)
        u = np.array([1.0, 0.0])  # G = 1.0 - 0.5 = 0.5
        mus = recover_multipliers(prog, scen, u, gamma=4.0)
        assert mus[0][0] == pytest.approx(2.0, abs=1e-14)

    def test_polar_residual_vanishes(self, toy):
        scen = draw_scenarios(toy, 10, 4)
        rng = np.random.default_rng(3)
        u = rng.normal(size=2) + 1.0
        for mu in recover_multipliers(toy, scen, u, gamma=3.0):
            assert toy.cone.polar_residual(mu) <= 1e-12

    def test_homogeneous_in_gamma(self, toy):
        scen = draw_scenarios(toy, 10, 4)
        u = np.array([1.4, 0.9])
        once = recover_multipliers(toy, scen, u, gamma=3.0)
        twice = recover_multipliers(toy, scen, u, gamma=6.0)
        for a, b in zip(once, twice):
            assert np.array_equal(2.0 * a, b)

    def test_gamma_contract(self, toy):
        scen = draw_scenarios(toy, 2, 0)
        with pytest.raises(InputContractError):
            recover_multipliers(toy, scen, np.zeros(2), gamma=0.0)


def test_penalty_bound_semilinear_feasible_zero():
    # zero control is feasible (zero state is below the ceiling); the mean
    # penalty of the path solution obeys the feasible-point bound
    prog = build_program("semilinear", {"n": 31})
    cfg = PenaltyPathConfig(c_gamma=2.0, tol_per_stage=1e-7)
    path = solve_penalty_path(prog, 32, 5, cfg, accelerate=True)
    u_bar = np.zeros(prog.n)
    val, _ = saa_objective(prog, path.scenarios, u_bar)
    bound = (val + prog.psi.value(u_bar)) / path.gamma_final
    _, mean_pen = saa_constraint_residual(prog, path.scenarios, path.u)
    assert mean_pen <= bound + 1e-12
