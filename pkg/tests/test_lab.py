import math

import numpy as np
import pytest

from saaconic.errors import InputContractError
from saaconic.lab import (
    certify_epsilon_feasibility,
    estimate_error_measure,
    gradient_variance_estimates,
    greedy_covering_number,
    path_stage_records,
    run_consistency_sweep,
    sample_size_for_feasibility,
)
from saaconic.penalty import PenaltyPathConfig, solve_penalty_path
from saaconic.program import derive_seed, draw_scenarios
from saaconic.apps import build_program
from saaconic.apps.scalar import oracle_value

from helpers import finite_atom_program


class TestSampleSize:
    def test_reference_values(self):
        assert sample_size_for_feasibility(0.1, 0.05, 100) == 77
        assert sample_size_for_feasibility(0.5, 0.5, 1) == 2

    def test_direct_evaluation_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            eps = rng.uniform(0.01, 0.9)
            delta = rng.uniform(0.01, 0.9)
            Q = int(rng.integers(1, 10_000))
            got = sample_size_for_feasibility(eps, delta, Q)
            exact = (math.log(1 / delta) + math.log(Q)) / eps
            assert got - 1 < exact <= got

    def test_doubling_q_adds_log_two_over_eps(self):
        for eps in (0.5, 0.2, 0.07):
            for Q in (1, 3, 10, 64):
                base = sample_size_for_feasibility(eps, 0.1, Q)
                double = sample_size_for_feasibility(eps, 0.1, 2 * Q)
                increment = math.log(2.0) / eps
                assert math.floor(increment) <= double - base <= math.ceil(increment)

    def test_monotonicity(self):
        n_eps = [sample_size_for_feasibility(e, 0.1, 50) for e in (0.05, 0.1, 0.2, 0.4)]
        assert all(b <= a for a, b in zip(n_eps, n_eps[1:]))
        n_q = [sample_size_for_feasibility(0.1, 0.1, q) for q in (1, 10, 100, 1000)]
        assert all(b >= a for a, b in zip(n_q, n_q[1:]))

    def test_range_contracts(self):
        with pytest.raises(InputContractError):
            sample_size_for_feasibility(0.0, 0.1, 5)
        with pytest.raises(InputContractError):
            sample_size_for_feasibility(0.1, 1.0, 5)
        with pytest.raises(InputContractError):
            sample_size_for_feasibility(0.1, 0.1, 0)


class TestGreedyCovering:
    def test_identical_points(self):
        pts = np.ones((30, 2))
        assert greedy_covering_number(pts, 0.1) == 1

    def test_two_separated_points(self):
        assert greedy_covering_number(np.array([[0.0], [1.0]]), 0.4) == 2

    def test_uniform_interval(self):
        rng = np.random.default_rng(3)
        pts = rng.uniform(0, 1, size=(100, 1))
        q = greedy_covering_number(pts, 0.25)
        assert q in (2, 3)

    def test_covers_every_point(self):
        rng = np.random.default_rng(5)
        pts = rng.normal(size=(200, 3))
        nu = 1.2
        q = greedy_covering_number(pts, nu)
        # replay the greedy construction and verify the net property
        centers = [0]
        dmin = np.linalg.norm(pts - pts[0], axis=1)
        while dmin.max() > nu:
            far = int(np.argmax(dmin))
            centers.append(far)
            dmin = np.minimum(dmin, np.linalg.norm(pts - pts[far], axis=1))
        assert len(centers) == q
        assert dmin.max() <= nu


class TestSweep:
    def test_deterministic_atom_constant_values(self):
        prog = build_program("scalar", {})
        cfg = PenaltyPathConfig(gamma_stages=[8.0, 32.0], tol_per_stage=1e-10)
        records = run_consistency_sweep(prog, [1, 2, 4], [0, 1], "my-path", cfg,
                                        validation_M=16)
        values = {f"{r.opt_value:.12f}" for r in records}
        assert len(values) == 1  # single-atom scenario space: SAA is exact

    def test_oracle_method_scalar(self):
        prog = build_program("scalar", {})
        records = run_consistency_sweep(prog, [1, 2], [0], "saa-oracle", None,
                                        validation_M=16)
        for rec in records:
            assert rec.opt_value == pytest.approx(oracle_value(prog), abs=1e-12)
            assert rec.stationarity <= 1e-9

    def test_oracle_method_requires_solver(self):
        prog = build_program("regression", {"n": 16})
        with pytest.raises(InputContractError, match="exact solver"):
            run_consistency_sweep(prog, [4], [0], "saa-oracle", None)

    def test_n_list_must_increase(self):
        prog = build_program("scalar", {})
        with pytest.raises(InputContractError):
            run_consistency_sweep(prog, [32, 8], [0], "my-path", None)

    def test_cell_failure_recorded_not_raised(self):
        prog = finite_atom_program(atoms=[[0.4, 0.2]], probs=[1.0])
        import dataclasses

        def explode(u, xi):
            raise RuntimeError("synthetic breakdown")

        bad = dataclasses.replace(prog, j_value_grad=explode, j_batch=None)
        records = run_consistency_sweep(bad, [2], [0, 1], "my-path",
                                        PenaltyPathConfig())
        assert len(records) == 2
        assert all("synthetic breakdown" in r.error for r in records)

    def test_dist_to_reference(self):
        prog = build_program("scalar", {})
        cfg = PenaltyPathConfig(gamma_stages=[64.0], tol_per_stage=1e-10)
        ref = np.array([1.0])
        records = run_consistency_sweep(prog, [1], [0], "my-path", cfg,
                                        reference=ref, validation_M=16)
        assert records[0].dist_to_reference == pytest.approx(
            abs(records[0].opt_value * 0 + (2 + 64) / 65 - 1.0), abs=1e-6
        )

    def test_stage_records(self):
        prog = build_program("scalar", {})
        cfg = PenaltyPathConfig(gamma_stages=[4.0, 16.0, 64.0], tol_per_stage=1e-10)
        path = solve_penalty_path(prog, 1, 0, cfg)
        records = path_stage_records(prog, path, seed=0)
        assert [r.gamma for r in records] == [4.0, 16.0, 64.0]
        viols = [r.primal_feasibility for r in records]
        assert all(b < a for a, b in zip(viols, viols[1:]))


class TestErrorMeasure:
    def test_large_level_gives_zero(self):
        prog = build_program("scalar", {})
        est = estimate_error_measure(prog, s=100.0, M=8, seed=0)
        assert est.value == 0.0

    def test_zero_at_oracle_value(self):
        prog = build_program("scalar", {"target": 1.1, "bound": 1.0})
        s_star = oracle_value(prog)
        est = estimate_error_measure(prog, s_star, M=8, seed=0, tol=1e-10)
        assert est.converged
        assert est.value <= 1e-3

    def test_positive_below_oracle_value(self):
        prog = build_program("scalar", {"target": 1.1, "bound": 1.0})
        s_star = oracle_value(prog)
        est = estimate_error_measure(prog, s_star - 0.1, M=8, seed=0, tol=1e-10)
        # unconstrained floor dominates: phi = 0.1 - s_star
        assert est.value == pytest.approx(0.1 - s_star, abs=1e-4)

    def test_closed_form_crossing(self):
        # target 2, bound 1, s = 0: branches 0.5(u-2)^2 and 0.5(u-1)_+^2
        # cross at u = 1.5 with balanced slopes; phi(0) = 0.125
        prog = build_program("scalar", {})
        est = estimate_error_measure(prog, 0.0, M=8, seed=0, tol=1e-10)
        # independent oracle: dense scan plus local refinement
        grid = np.linspace(0.5, 3.0, 200_001)
        branch_a = 0.5 * (grid - 2.0) ** 2
        branch_b = 0.5 * np.maximum(grid - 1.0, 0.0) ** 2
        oracle = float(np.min(np.maximum(branch_a, branch_b)))
        assert abs(oracle - 0.125) <= 1e-8
        assert abs(est.value - oracle) <= 1e-4

    def test_level_must_be_finite(self):
        prog = build_program("scalar", {})
        with pytest.raises(InputContractError):
            estimate_error_measure(prog, float("inf"))


class TestCertify:
    def test_always_feasible_program(self):
        # every box point satisfies u <= 50: success rate is exactly one
        prog = build_program("scalar", {"target": 0.5, "bound": 50.0})
        cert = certify_epsilon_feasibility(
            prog, epsilon=0.2, rho=0.05, delta=0.2, trials=20, base_seed=0,
            validation_M=256, n_cover_points=64,
        )
        assert cert.empirical_rate == 1.0
        assert cert.passed
        assert cert.required_N == sample_size_for_feasibility(
            0.2, 0.2, cert.covering_number
        )

    def test_missing_lipschitz_instructs(self):
        prog = build_program("semilinear", {"n": 15})
        with pytest.raises(InputContractError, match="estimate_lipschitz"):
            certify_epsilon_feasibility(prog, 0.1, 0.05, 0.1, 20, 0)

    def test_forced_small_N_degrades(self):
        # controlled negative check: with a single sampled pair constraint the
        # transport potentials run to the box corners and violate almost every
        # unsampled constraint, so the epsilon-feasibility rate collapses
        prog = build_program("kantorovich", {"m": 3})
        kwargs = dict(
            epsilon=0.1, rho=0.05, delta=0.1, trials=20, base_seed=3,
            validation_M=4000, n_cover_points=200, tol=1e-5,
        )
        weak = certify_epsilon_feasibility(prog, required_N_override=1, **kwargs)
        strong = certify_epsilon_feasibility(prog, **kwargs)
        assert weak.empirical_rate < strong.empirical_rate
        assert strong.passed and not weak.passed

    def test_trials_contract(self):
        prog = build_program("scalar", {})
        with pytest.raises(InputContractError):
            certify_epsilon_feasibility(prog, 0.1, 0.05, 0.1, trials=5, base_seed=0)


class TestVarianceDiagnostics:
    def test_exact_uniform_variance(self):
        # jittered scalar target: grad J = u - target - xi, so the
        # scenario-wise gradient variance equals Var(xi) = jitter^2 / 3
        prog = build_program("scalar", {"jitter": 0.6})
        est = gradient_variance_estimates(prog, np.array([0.5]), M=200_000, seed=4)
        exact = 0.6**2 / 3.0
        assert est["var_grad_objective"] == pytest.approx(exact, rel=0.02)
        assert est["var_grad_penalty"] == 0.0  # deterministic constraint

    def test_contract(self):
        prog = build_program("scalar", {})
        with pytest.raises(InputContractError):
            gradient_variance_estimates(prog, np.array([0.0]), M=1, seed=0)


class TestQualitativeRates:
    def test_error_measure_mean_decreases_with_sixteenfold_N(self):
        # strongly convex jittered instance, fourth-root schedule: the mean
        # estimated error measure at the solved values drops when N grows 16x
        prog = build_program("scalar", {"target": 1.3, "bound": 1.0, "jitter": 0.5})
        s_star = oracle_value(prog)

        def mean_phi(N):
            cfg = PenaltyPathConfig(c_gamma=1.0, tol_per_stage=1e-9)
            vals = []
            for seed in range(8):
                path = solve_penalty_path(prog, N, derive_seed(seed, N), cfg, tol=1e-9)
                value = path.result.objective  # F_hat + psi + gamma * penalty
                est = estimate_error_measure(prog, value, M=4096, seed=17, tol=1e-9)
                vals.append(est.value)
            return float(np.mean(vals))

        low, high = mean_phi(8), mean_phi(128)
        assert high < low

    def test_penalty_value_approaches_oracle_with_N(self):
        # convex transport instance: the penalized value's gap to the exact
        # per-sample LP value shrinks as N (and the schedule weight) grow
        prog = build_program("kantorovich", {"m": 3})
        cfg = PenaltyPathConfig(c_gamma=2.0, tol_per_stage=1e-8)

        def median_gap(N):
            gaps = []
            for seed in range(4):
                scen_seed = derive_seed(seed, N)
                scen = draw_scenarios(prog, N, scen_seed)
                sol = prog.exact_solver(scen)
                path = solve_penalty_path(prog, N, scen_seed, cfg, tol=1e-8,
                                          scenarios=scen, accelerate=True)
                gaps.append(abs(path.result.objective - sol.value))
            return float(np.median(gaps))

        assert median_gap(1024) <= median_gap(16)
