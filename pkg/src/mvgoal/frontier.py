"""Mean-variance efficient feedback portfolio for a deterministic market."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .market import AssumptionViolation, MarketModel

# relative slack when deciding whether z sits on the riskless boundary
_BOUNDARY_RTOL = 1e-12


class InfeasibleTarget(ValueError):
    """Target below the riskless terminal wealth, or at it where strictness is required."""


@dataclass(frozen=True)
class BarrierConstants:
    """Levels of phi(t) = 1.5 beta(t) + int theta dW that mark goal and bankruptcy.

    ``goal`` is beta(T); ``bankruptcy`` is beta(T) + ln(1 - z/gamma).
    """

    goal: float
    bankruptcy: float


@dataclass(frozen=True, eq=False)
class EfficientStrategy:
    market: MarketModel
    x0: float
    target: float

    def __post_init__(self):
        if not self.x0 > 0:
            raise ValueError(f"initial wealth must be positive, got {self.x0}")
        floor = self.riskless_terminal
        if self.target < floor and not self.is_riskless:
            raise InfeasibleTarget(
                f"target {self.target} is below the riskless terminal wealth {floor:.12g}"
            )

    @cached_property
    def riskless_terminal(self) -> float:
        """x0 grown in the bank account to T."""
        return self.x0 * math.exp(self.market.rate_integral(0.0, self.market.horizon))

    @property
    def is_riskless(self) -> bool:
        floor = self.riskless_terminal
        return abs(self.target - floor) <= _BOUNDARY_RTOL * max(1.0, abs(floor))

    def _require_price_of_risk(self) -> float:
        beta_T = self.market.beta_T
        if not beta_T > 0:
            raise AssumptionViolation(f"beta(T) = {beta_T} must be positive")
        return beta_T

    @cached_property
    def gamma(self) -> float:
        """The constant gamma >= z in the feedback law; equals z on the riskless boundary."""
        beta_T = self._require_price_of_risk()
        if self.is_riskless:
            return float(self.target)
        rate_T = self.market.rate_integral(0.0, self.market.horizon)
        num = self.target - self.x0 * math.exp(rate_T - beta_T)
        return num / -math.expm1(-beta_T)

    @cached_property
    def excess_scale(self) -> float:
        """(z - x0 e^{int r}) / (e^{beta(T)} - 1), which also equals gamma - z."""
        beta_T = self._require_price_of_risk()
        if self.is_riskless:
            return 0.0
        return (self.target - self.riskless_terminal) / math.expm1(beta_T)

    def discounted_target(self, t):
        """z exp(-int_t^T r): the wealth at t that grows risk-free to z."""
        return self.target * np.exp(-self.market.rate_integral_to_horizon(t))

    def allocation(self, t: float, x: float) -> np.ndarray:
        """Money held in each stock at time t when wealth is x."""
        k = self.market.piece_index(t)
        self.market._require_elliptic(k)
        s = self.market.sigma_values[k]
        b = self.market.excess_values[k]
        gap = x - self.gamma * math.exp(-self.market.rate_integral(t, self.market.horizon))
        return -np.linalg.solve(s @ s.T, b) * gap

    def min_variance(self) -> float:
        beta_T = self._require_price_of_risk()
        if self.is_riskless:
            return 0.0
        return (self.target - self.riskless_terminal) ** 2 / math.expm1(beta_T)

    def barrier_constants(self) -> BarrierConstants:
        beta_T = self._require_price_of_risk()
        if self.is_riskless:
            raise InfeasibleTarget(
                "target equals the riskless terminal wealth: the efficient strategy holds "
                "no stock, so no bankruptcy is possible and the goal is met trivially"
            )
        # ln(1 - z/gamma) = ln(K / (z + K)) with K = gamma - z
        k = self.excess_scale
        return BarrierConstants(goal=beta_T, bankruptcy=beta_T + math.log(k / (self.target + k)))

    def require_strict(self):
        if self.is_riskless:
            raise InfeasibleTarget(
                "goal-probability routines need z strictly above the riskless terminal wealth"
            )

    def wealth_from_phi(self, t, phi):
        """Efficient wealth at times ``t`` given the driving process phi at those times.

        Uses x(t) = e^{-int_t^T r} [z - K (e^{beta(T) - phi(t)} - 1)], with K = gamma - z,
        which is exact: no discretisation error enters beyond that of phi itself.
        """
        self.require_strict()
        disc = np.exp(-self.market.rate_integral_to_horizon(t))
        growth = np.expm1(self.market.beta_T - np.asarray(phi, dtype=float))
        return disc * (self.target - self.excess_scale * growth)

    def phi_from_wealth(self, t, x):
        """Inverse of :meth:`wealth_from_phi`; +inf once wealth reaches gamma e^{-int_t^T r}."""
        self.require_strict()
        grown = np.asarray(x, dtype=float) * np.exp(self.market.rate_integral_to_horizon(t))
        arg = 1.0 + (self.target - grown) / self.excess_scale
        with np.errstate(divide="ignore", invalid="ignore"):
            phi = self.market.beta_T - np.log(arg)
        return np.where(arg > 0, phi, np.inf)


def gamma(strategy: EfficientStrategy) -> float:
    return strategy.gamma


def allocation(strategy: EfficientStrategy, t: float, x: float) -> np.ndarray:
    return strategy.allocation(t, x)


def min_variance(strategy: EfficientStrategy) -> float:
    return strategy.min_variance()


def discounted_target(strategy: EfficientStrategy, t):
    return strategy.discounted_target(t)


def barrier_constants(strategy: EfficientStrategy) -> BarrierConstants:
    return strategy.barrier_constants()
