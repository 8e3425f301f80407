import math

import numpy as np
import pytest

from swipt.errors import ConvergenceError, InfeasibleError, InvalidParameterError, UnboundedObjectiveError
from swipt.fading import JointFadingDistribution, discretize_exponential, joint_product
from swipt.solver import (
    Multipliers,
    SolverOptions,
    feasibility_check,
    fixed_point_fractions,
    per_state_allocation,
    region_contains,
    solve_boundary,
    trace_region,
)
from swipt.system import HarvestFractions, SystemConfig

from oracles import state_lagrangian_grid_max, waterfilling_rate


def make_cfg(L=2, noise=(1.0, 2.0), rho=(0.0, 0.0), deficits=(0.0, 0.0),
             arch=None, eta=1e-4, budget=10.0):
    arch = arch or ("ideal",) * L
    return SystemConfig(num_users=L, noise_vars=list(noise)[:L],
                        min_rates=list(rho)[:L], deficits=list(deficits)[:L],
                        efficiency=eta, tx_budget=budget, architectures=arch)


def single_state(gains):
    return JointFadingDistribution.from_states([(np.asarray(gains, float), 1.0)])


class TestPerStateAllocation:
    def test_pure_cost_stays_at_floor(self):
        cfg = make_cfg()
        r, T = per_state_allocation(np.array([1.0, 1.0]), np.zeros(2),
                                    Multipliers(0.3, np.zeros(2)), cfg)
        np.testing.assert_array_equal(r, [0.0, 0.0])
        np.testing.assert_array_equal(T, [0.0, 0.0])

    def test_single_user_water_filling_form(self):
        cfg = make_cfg(L=1, noise=(1.0,))
        lam, mu, h = 0.08, 1.0, 2.0
        r, T = per_state_allocation(np.array([h]), np.array([mu]),
                                    Multipliers(lam, np.zeros(1)), cfg)
        want = max(mu / (2 * lam) - 1.0 / h, 0.0)
        assert T[0] == pytest.approx(want, rel=1e-12)
        # cross-check against a fine grid
        grid = np.arange(0.0, 5.0, 1e-4)
        val = mu * 0.5 * np.log1p(h * grid) - lam * grid
        assert (mu * r[0] - lam * T[0]) >= val.max() - 1e-8

    def test_unbounded_objective_detected(self):
        cfg = make_cfg(eta=0.5)
        with pytest.raises(UnboundedObjectiveError):
            per_state_allocation(np.array([1.0, 1.0]), np.ones(2),
                                 Multipliers(0.1, np.array([0.0, 1.0])), cfg)

    @pytest.mark.parametrize("seed", range(6))
    def test_two_user_grid_oracle(self, seed):
        rng = np.random.default_rng(100 + seed)
        rho = rng.uniform(0.0, 0.3, 2)
        cfg = make_cfg(noise=tuple(rng.uniform(0.5, 2.0, 2)), rho=tuple(rho),
                       eta=1e-3)
        gains = rng.uniform(0.3, 3.0, 2)
        theta = rng.uniform(0.0, 0.5, 2)
        lam = float(theta.max() * cfg.efficiency * gains.max() * 4 + rng.uniform(0.05, 0.2))
        mu = rng.uniform(0.2, 1.0, 2)
        r, T = per_state_allocation(gains, mu, Multipliers(lam, theta), cfg)
        got = float(mu @ r + theta @ (cfg.efficiency * gains * T) - lam * T.sum())
        best, _ = state_lagrangian_grid_max(
            gains, cfg.noise_vars, np.ones(2), np.ones(2), mu, lam, theta,
            cfg.efficiency, rho, r_cap=(5.0, 5.0), step=1e-3)
        assert got >= best - 1e-6
        assert got <= best + 1e-5  # grid resolution slack near the optimum


class TestFeasibility:
    def test_unconstrained_always_feasible(self, small_joint):
        cfg = make_cfg()
        assert feasibility_check(cfg, small_joint).ok

    def test_budget_below_min_rate_cost(self, small_joint):
        cfg = make_cfg(rho=(1.5, 1.2), budget=0.5)
        report = feasibility_check(cfg, small_joint)
        assert not report.ok
        assert any("min-rate" in f for f in report.failures)

    def test_undeliverable_deficit(self, small_joint):
        cfg = make_cfg(deficits=(0.5, 0.0), budget=2.0)
        report = feasibility_check(cfg, small_joint)
        assert not report.ok
        assert any("rf-delivery" in f for f in report.failures)

    def test_paper_config_feasible(self, paper_config, paper_joint):
        report = feasibility_check(paper_config, paper_joint)
        assert report.ok
        assert report.metrics["min_rate_spend"] < paper_config.tx_budget


class TestSolveBoundary:
    def test_single_state_corner(self):
        cfg = make_cfg(noise=(1.0, 2.0), budget=10.0)
        pt = solve_boundary(cfg, single_state([1.0, 1.0]), np.array([1.0, 0.0]))
        assert pt.rates[0] == pytest.approx(0.5 * math.log(11.0), abs=1e-9)
        assert pt.rates[1] == 0.0
        assert pt.policy.avg_spend == pytest.approx(10.0, rel=1e-8)

    def test_ergodic_water_filling_reduction(self):
        m = discretize_exponential(0.8, 0.1, 10.0)
        dist = joint_product([m])
        cfg = make_cfg(L=1, noise=(1.0,), budget=3.0)
        pt = solve_boundary(cfg, dist, np.array([1.0]))
        want, _ = waterfilling_rate(dist.gains[:, 0], dist.probs, 1.0, 3.0)
        assert pt.rates[0] == pytest.approx(want, abs=1e-5)

    def test_min_rate_floor_holds_everywhere(self, small_joint):
        cfg = make_cfg(noise=(0.8, 1.6), rho=(0.2, 0.1), deficits=(6e-5, 3e-5))
        pt = solve_boundary(cfg, small_joint, np.array([1.0, 0.4]))
        assert np.all(pt.policy.rates >= cfg.min_rates[None, :] - 1e-9)
        assert np.all(pt.rates >= cfg.min_rates - 1e-9)

    def test_budget_and_delivery_with_slackness(self, small_joint):
        cfg = make_cfg(noise=(0.8, 1.6), rho=(0.2, 0.1), deficits=(6e-5, 3e-5))
        pt = solve_boundary(cfg, small_joint, np.array([0.8, 0.6]))
        d = pt.diagnostics
        assert pt.policy.avg_spend <= cfg.tx_budget + 1e-6
        assert np.all(pt.policy.delivered >= cfg.deficits - 1e-9)
        assert d["cs_budget"] < 1e-6
        assert np.all(d["cs_delivery"] < 1e-6)

    def test_delivery_reward_activates(self):
        # zero floors and a corner weight force the reward to carry user 2
        m1 = discretize_exponential(0.8, 0.5, 4.0, user=0)
        m2 = discretize_exponential(0.5, 0.5, 4.0, user=1)
        dist = joint_product([m1, m2])
        cfg = make_cfg(noise=(0.8, 1.6), deficits=(0.0, 2e-4), budget=6.0)
        pt = solve_boundary(cfg, dist, np.array([1.0, 0.02]))
        assert pt.policy.delivered[1] >= cfg.deficits[1] - 1e-9
        tax = pt.diagnostics["closure_tax"]
        assert pt.multipliers.theta[1] > 0.0 or tax[1] > 0.0

    def test_closure_tax_at_degenerate_corner(self):
        m1 = discretize_exponential(0.8, 0.5, 4.0, user=0)
        m2 = discretize_exponential(0.5, 0.5, 4.0, user=1)
        dist = joint_product([m1, m2])
        cfg = make_cfg(noise=(0.8, 1.6), deficits=(0.0, 2e-4), budget=6.0)
        pt = solve_boundary(cfg, dist, np.array([1.0, 0.0]))
        h2max = dist.gains[:, 1].max()
        assert pt.diagnostics["closure_tax"][1] == pytest.approx(
            cfg.deficits[1] / (cfg.efficiency * h2max), rel=1e-6)
        assert pt.policy.delivered[1] >= cfg.deficits[1] * (1 - 1e-9)
        assert pt.policy.avg_spend <= cfg.tx_budget + 1e-6

    @pytest.mark.parametrize("seed", range(10))
    def test_dual_certificate_small_instances(self, seed):
        """Weighted objective within 1e-4 of the exhaustive per-state
        rate-grid dual bound on <= 9-state instances."""
        rng = np.random.default_rng(500 + seed)
        m1 = discretize_exponential(rng.uniform(0.4, 1.2), 1.0, 3.0, user=0)
        m2 = discretize_exponential(rng.uniform(0.4, 1.2), 1.0, 3.0, user=1)
        dist = joint_product([m1, m2])
        rho = rng.uniform(0.0, 0.15, 2)
        cfg = make_cfg(noise=tuple(rng.uniform(0.6, 1.8, 2)), rho=tuple(rho),
                       deficits=tuple(rng.uniform(0.0, 5e-5, 2)),
                       budget=float(rng.uniform(1.0, 3.0)))
        mu = rng.uniform(0.1, 1.0, 2)
        pt = solve_boundary(cfg, dist, mu)
        lam = pt.multipliers.lam
        theta = pt.multipliers.theta
        dual = lam * cfg.tx_budget - float(theta @ cfg.deficits)
        for gains, p in dist.states:
            best, _ = state_lagrangian_grid_max(
                gains, cfg.noise_vars, np.ones(2), np.ones(2), mu, lam, theta,
                cfg.efficiency, rho, r_cap=(4.0, 4.0), step=2e-3)
            dual += p * best
        primal = float(mu @ pt.rates)
        assert primal >= dual - 1e-4
        assert primal <= dual + 1e-4

    def test_invalid_weights_rejected(self, small_joint):
        cfg = make_cfg()
        with pytest.raises(InvalidParameterError):
            solve_boundary(cfg, small_joint, np.array([1.0, -0.2]))


class TestFixedPointFractions:
    def test_requires_adaptive_user(self, small_joint):
        cfg = make_cfg()
        with pytest.raises(InvalidParameterError):
            fixed_point_fractions(cfg, small_joint, np.array([1.0, 1.0]))

    def test_zero_deficit_reduces_to_ideal(self, small_joint):
        cfg = make_cfg(arch=("time_switching", "time_switching"),
                       rho=(0.1, 0.05))
        fr, pt = fixed_point_fractions(cfg, small_joint, np.array([1.0, 1.0]))
        np.testing.assert_array_equal(fr.harvest, [0.0, 0.0])
        ideal = solve_boundary(make_cfg(rho=(0.1, 0.05)).replace(
            noise_vars=cfg.noise_vars), small_joint, np.array([1.0, 1.0]))
        np.testing.assert_allclose(pt.rates, ideal.rates, atol=1e-12)

    def test_single_state_closed_form(self):
        dist = single_state([0.9])
        delta = 2e-4
        cfg = SystemConfig(num_users=1, noise_vars=[1.0], min_rates=[0.0],
                           deficits=[delta], efficiency=1e-3, tx_budget=4.0,
                           architectures=["time_switching"])
        fr, pt = fixed_point_fractions(cfg, dist, np.array([1.0]))
        want = delta / (1e-3 * 0.9 * 4.0)
        assert fr.harvest[0] == pytest.approx(want, abs=1e-7)
        assert pt.policy.avg_spend == pytest.approx(4.0, rel=1e-7)

    def test_consistency_at_convergence(self, small_joint):
        cfg = make_cfg(noise=(0.8, 1.6), rho=(0.2, 0.1),
                       deficits=(6e-5, 3e-5),
                       arch=("time_switching", "power_splitting"))
        fr, pt = fixed_point_fractions(cfg, small_joint, np.array([1.0, 1.0]))
        target = cfg.deficits / pt.policy.delivered
        np.testing.assert_allclose(fr.harvest, target, atol=1e-7)
        assert np.all(fr.harvest > 0.0) and np.all(fr.harvest < 1.0)


class TestTraceRegion:
    def test_requires_two_points(self, small_joint):
        cfg = make_cfg()
        with pytest.raises(InvalidParameterError):
            trace_region(cfg, small_joint, 1)

    def test_infeasible_rejected(self, small_joint):
        cfg = make_cfg(rho=(1.5, 1.2), budget=0.5)
        with pytest.raises(InfeasibleError):
            trace_region(cfg, small_joint, 5)

    def test_sweep_endpoints_are_corners(self, small_joint):
        # deficits sized so the minimum-rate layers cover them even at the
        # corners (the strong user's floor layer delivers eta*sigma^2*p only)
        cfg = make_cfg(noise=(0.8, 1.6), rho=(0.2, 0.1), deficits=(3e-5, 1.5e-5))
        trace = trace_region(cfg, small_joint, 9)
        assert not trace.failures
        np.testing.assert_allclose(trace.points[0].weights, [1.0, 0.0], atol=1e-15)
        # at the corners the unweighted user sits at its floor
        assert trace.points[0].rates[1] == pytest.approx(cfg.min_rates[1], abs=1e-9)
        assert trace.points[-1].rates[0] == pytest.approx(cfg.min_rates[0], abs=1e-9)

    def test_constraint_free_region_contains_constrained(self, small_joint):
        cfg_free = make_cfg(noise=(0.8, 1.6))
        cfg_tight = make_cfg(noise=(0.8, 1.6), rho=(0.2, 0.1),
                             deficits=(6e-5, 3e-5))
        tr_free = trace_region(cfg_free, small_joint, 17)
        tr_tight = trace_region(cfg_tight, small_joint, 9)
        rep = region_contains(tr_free, tr_tight.rates_matrix(), tol=1e-6)
        assert rep["all_inside"]

    def test_ideal_trace_convexity(self, small_joint):
        cfg = make_cfg(noise=(0.8, 1.6), rho=(0.2, 0.1), deficits=(6e-5, 3e-5))
        trace = trace_region(cfg, small_joint, 17)
        assert trace.convexity_depth() <= 1e-6

    def test_csv_schema_and_determinism(self, small_joint, tmp_path):
        cfg = make_cfg(noise=(0.8, 1.6), rho=(0.2, 0.1), deficits=(3e-5, 1.5e-5))
        trace = trace_region(cfg, small_joint, 5)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        trace.to_csv(p1)
        trace.to_csv(p2)
        assert p1.read_bytes() == p2.read_bytes()
        header = p1.read_text().splitlines()[0].split(",")
        assert header == [
            "phi", "mu1", "mu2", "R1_nats", "R2_nats", "R1_kbps", "R2_kbps",
            "lambda", "theta1", "theta2", "piE1", "piE2", "avg_spend",
            "delivered1", "delivered2",
        ]
        body = p1.read_text().splitlines()[1:]
        assert len(body) == 5

    def test_simplex_grid_for_three_users(self):
        m = [discretize_exponential(0.8, 1.0, 2.0, user=i) for i in range(3)]
        dist = joint_product(m)
        cfg = SystemConfig(num_users=3, noise_vars=[1.0, 1.5, 2.0],
                           min_rates=[0.0] * 3, deficits=[0.0] * 3,
                           efficiency=1e-4, tx_budget=3.0,
                           architectures=["ideal"] * 3)
        trace = trace_region(cfg, dist, 3)
        assert len(trace.points) >= 3
        for pt in trace.points:
            assert pt.policy.avg_spend <= cfg.tx_budget + 1e-6
