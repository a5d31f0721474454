"""Two-hop connectivity to a roadside unit in a 1D soft random geometric graph."""

from vanet_twohop.analytic import (
    ChannelModel,
    FiniteInterval,
    InfiniteLine,
    PrecisionExhausted,
    RoadScenario,
    SeriesEvaluation,
    expected_n2,
    mean_degree,
)

__version__ = "0.1.0"

__all__ = [
    "ChannelModel",
    "FiniteInterval",
    "InfiniteLine",
    "PrecisionExhausted",
    "RoadScenario",
    "SeriesEvaluation",
    "expected_n2",
    "mean_degree",
]
