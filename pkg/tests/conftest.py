import pytest

from mvgoal.frontier import EfficientStrategy
from mvgoal.market import MarketModel, reference_market


@pytest.fixture
def ref_market():
    """r=0.06, mu=0.12, sigma=0.15, T=1: theta=0.4, beta(T)=0.16."""
    return reference_market()


@pytest.fixture
def ref_strategy(ref_market):
    return EfficientStrategy(ref_market, 1.0, 1.10)


@pytest.fixture
def unit_beta_market():
    """Same bank account, theta=1 so beta(T)=1."""
    return reference_market(theta=1.0)


@pytest.fixture
def two_piece_market():
    """|theta|^2 = 0.16 on [0, 0.5) and 0.04 on [0.5, 1]."""
    return MarketModel(
        horizon=1.0,
        rate={"breakpoints": [0, 0.5, 1], "values": [0.04, 0.08]},
        appreciation=({"breakpoints": [0, 0.5, 1], "values": [0.04 + 0.4 * 0.2, 0.08 + 0.2 * 0.2]},),
        volatility=((0.2,),),
    )
