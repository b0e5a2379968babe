"""Goal-achieving probability of continuous-time mean-variance efficient portfolios."""

from .analytics import (
    BoundConstants,
    ProbabilityCurve,
    bound_constants,
    f,
    goal_prob,
    horizon_scan,
    minimize_f,
    reflection_hitting_prob,
)
from .frontier import BarrierConstants, EfficientStrategy, InfeasibleTarget
from .market import (
    AssumptionViolation,
    CoefficientCurve,
    MarketModel,
    ValidationReport,
    reference_market,
    validate,
)
from .simulate import McReport, SimConfig, SimulationResult, simulate
from .special import erfc, erfcx, norm_cdf

__version__ = "0.1.0"
