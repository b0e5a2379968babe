import math

import numpy as np
import pytest

from mvgoal.frontier import (
    EfficientStrategy,
    InfeasibleTarget,
    allocation,
    barrier_constants,
    discounted_target,
    gamma,
    min_variance,
)
from mvgoal.market import AssumptionViolation, MarketModel
from mvgoal.simulate import SimConfig, simulate_phi

# Direct 30-digit evaluations for x0=1, r=0.06, theta=0.4, T=1, z=1.10.
GAMMA_REF = 1.31994848643484536589772933476
ALLOC_T0_X1 = 0.648215121820125815458574969641
VAR_REF = 0.00839399382447482164755266713922
DISC_T0 = 1.0359409869426735804908680616
C_REF = -1.63195462302527325468721071352


class TestGamma:
    def test_reference(self, ref_strategy):
        assert gamma(ref_strategy) == pytest.approx(GAMMA_REF, rel=1e-14)

    def test_riskless_boundary(self, ref_market):
        z = math.exp(0.06)
        assert gamma(EfficientStrategy(ref_market, 1.0, z)) == z

    def test_near_boundary(self, ref_market):
        s = EfficientStrategy(ref_market, 1.0, 1.061837)
        assert s.gamma == pytest.approx(1.061837, abs=1e-5)
        assert s.gamma > s.target

    def test_affine_increasing(self, ref_market):
        zs = [1.08, 1.10, 1.20]
        gs = [EfficientStrategy(ref_market, 1.0, z).gamma for z in zs]
        assert gs[0] < gs[1] < gs[2]
        slope1 = (gs[1] - gs[0]) / (zs[1] - zs[0])
        slope2 = (gs[2] - gs[1]) / (zs[2] - zs[1])
        assert slope1 == pytest.approx(slope2, rel=1e-10)
        assert slope1 == pytest.approx(1 / (1 - math.exp(-0.16)), rel=1e-10)

    def test_at_least_target(self, ref_market):
        for z in np.linspace(1.0619, 3.0, 20):
            assert EfficientStrategy(ref_market, 1.0, z).gamma >= z

    def test_infeasible(self, ref_market):
        with pytest.raises(InfeasibleTarget):
            EfficientStrategy(ref_market, 1.0, 1.0)

    def test_zero_price_of_risk(self):
        m = MarketModel.constant(0.06, 0.06, 0.2, 1.0)
        with pytest.raises(AssumptionViolation):
            EfficientStrategy(m, 1.0, 1.1).gamma

    def test_nonpositive_wealth(self, ref_market):
        with pytest.raises(ValueError):
            EfficientStrategy(ref_market, 0.0, 1.1)


class TestAllocation:
    def test_reference_value(self, ref_strategy):
        assert allocation(ref_strategy, 0.0, 1.0)[0] == pytest.approx(ALLOC_T0_X1, rel=1e-13)

    def test_zero_on_gamma_line(self, ref_strategy):
        t = 0.37
        x = ref_strategy.gamma * math.exp(-0.06 * (1 - t))
        assert abs(allocation(ref_strategy, t, x)[0]) < 1e-13

    def test_linear_in_gap(self, ref_strategy):
        t = 0.2
        line = ref_strategy.gamma * math.exp(-0.06 * (1 - t))
        a = allocation(ref_strategy, t, line - 0.1)
        b = allocation(ref_strategy, t, line - 0.2)
        np.testing.assert_allclose(b, 2 * a, rtol=1e-12)

    def test_multi_asset_diffusion_along_theta(self):
        sigma = np.array([[0.2, 0.0], [0.05, 0.3]])
        m = MarketModel.constant(0.03, [0.09, 0.12], sigma, 1.0)
        s = EfficientStrategy(m, 1.0, 1.2)
        x = 0.9
        gap = x - s.gamma * math.exp(-m.rate_integral(0.5, 1.0))
        pi = allocation(s, 0.5, x)
        # pi' sigma = -gap theta
        np.testing.assert_allclose(pi @ sigma, -gap * m.theta_at(0.5), atol=1e-13)

    def test_zero_investment_fixed_point(self):
        m = MarketModel(
            horizon=1.0,
            rate={"breakpoints": [0, 0.4, 1], "values": [0.03, 0.07]},
            appreciation=(0.12,),
            volatility=((0.2,),),
        )
        s = EfficientStrategy(m, 1.0, 1.3)
        t0 = 0.25
        x = s.gamma * math.exp(-m.rate_integral(t0, 1.0))
        ts = np.concatenate([np.linspace(t0, 0.4, 50, endpoint=False), np.linspace(0.4, 1.0, 151)])
        for t, u in zip(ts[:-1], ts[1:]):
            pi = allocation(s, t, x)
            assert abs(pi[0]) < 1e-10
            x = x * math.exp(m.rate(t) * (u - t))
        assert x == pytest.approx(s.gamma, rel=1e-12)


class TestMinVariance:
    def test_reference(self, ref_strategy):
        assert min_variance(ref_strategy) == pytest.approx(VAR_REF, rel=1e-13)

    def test_riskless(self, ref_market):
        assert min_variance(EfficientStrategy(ref_market, 1.0, math.exp(0.06))) == 0.0

    def test_quadratic_in_excess(self, ref_market):
        base = math.exp(0.06)
        v1 = min_variance(EfficientStrategy(ref_market, 1.0, base + 0.05))
        v2 = min_variance(EfficientStrategy(ref_market, 1.0, base + 0.10))
        assert v2 == pytest.approx(4 * v1, rel=1e-9)


class TestDiscountedTarget:
    def test_values(self, ref_strategy):
        assert discounted_target(ref_strategy, 1.0) == pytest.approx(1.10, rel=1e-15)
        assert discounted_target(ref_strategy, 0.0) == pytest.approx(DISC_T0, rel=1e-14)

    def test_zero_rate(self):
        m = MarketModel.constant(0.0, 0.1, 0.2, 1.0)
        s = EfficientStrategy(m, 1.0, 1.2)
        np.testing.assert_array_equal(discounted_target(s, np.linspace(0, 1, 5)), 1.2)


def _bisect_zero_wealth(strategy, t):
    lo, hi = -50.0, strategy.market.beta_T
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if strategy.wealth_from_phi(t, mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


class TestBarriers:
    def test_reference(self, ref_strategy):
        bc = barrier_constants(ref_strategy)
        assert bc.goal == pytest.approx(0.16, rel=1e-14)
        assert bc.bankruptcy == pytest.approx(C_REF, rel=1e-13)

    @pytest.mark.parametrize("z", [1.08, 1.10, 1.5, 3.0])
    def test_bankruptcy_level_matches_root_of_wealth(self, ref_market, z):
        s = EfficientStrategy(ref_market, 1.0, z)
        for t in (0.0, 0.5, 1.0):
            assert _bisect_zero_wealth(s, t) == pytest.approx(s.barrier_constants().bankruptcy, abs=1e-10)

    def test_ordering_and_z_independence(self, ref_market):
        goals = set()
        for z in (1.07, 1.10, 2.0, 10.0):
            bc = EfficientStrategy(ref_market, 1.0, z).barrier_constants()
            assert bc.bankruptcy < 0 < bc.goal
            goals.add(bc.goal)
        assert len(goals) == 1

    def test_riskless_target_rejected(self, ref_market):
        with pytest.raises(InfeasibleTarget, match="no bankruptcy"):
            EfficientStrategy(ref_market, 1.0, math.exp(0.06)).barrier_constants()


class TestWealthMap:
    def test_initial_condition(self, ref_strategy):
        assert ref_strategy.wealth_from_phi(0.0, 0.0) == pytest.approx(1.0, abs=1e-12)

    def test_goal_level_gives_discounted_target(self, ref_strategy):
        for t in (0.1, 0.5, 0.9):
            x = ref_strategy.wealth_from_phi(t, 0.16)
            assert x == pytest.approx(ref_strategy.discounted_target(t), abs=1e-14)

    def test_bankruptcy_level_gives_zero(self, ref_strategy):
        c = ref_strategy.barrier_constants().bankruptcy
        assert abs(ref_strategy.wealth_from_phi(0.4, c)) < 1e-10

    def test_inverse(self, ref_strategy):
        phi = np.linspace(-3, 0.15, 50)
        x = ref_strategy.wealth_from_phi(0.3, phi)
        np.testing.assert_allclose(ref_strategy.phi_from_wealth(0.3, x), phi, atol=1e-10)

    def test_barrier_equivalence_on_paths(self):
        from mvgoal.market import reference_market

        m = reference_market(theta=1.5)
        s = EfficientStrategy(m, 1.0, 1.8)
        bc = s.barrier_constants()
        times, phi = simulate_phi(m, SimConfig(n_paths=100, n_steps=200, seed=3))
        x = s.wealth_from_phi(times, phi)
        above = x - s.discounted_target(times)
        tol = 1e-10
        clear_goal = np.abs(phi - bc.goal) > tol
        clear_bank = np.abs(phi - bc.bankruptcy) > tol
        assert np.array_equal((above >= 0)[clear_goal], (phi >= bc.goal)[clear_goal])
        assert np.array_equal((x <= 0)[clear_bank], (phi <= bc.bankruptcy)[clear_bank])
        # the paths must actually visit both regions for this to mean anything
        assert (phi >= bc.goal).any() and (phi <= bc.bankruptcy).any()
