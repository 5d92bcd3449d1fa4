"""Propensity-score weighting, matching and treatment-effect estimators."""

from ._core import (
    CausalMatchError,
    Decomposition,
    EffectEstimate,
    StratifiedSlopes,
    StratumSlope,
    __version__,
    analytic_effects,
    analyze,
    decompose,
    default_spec,
    estimate_effects,
    estimate_ps,
    simpson,
    simulate,
    smd,
    weighted_quantiles,
    weights,
)

__all__ = [
    "CausalMatchError",
    "Decomposition",
    "EffectEstimate",
    "StratifiedSlopes",
    "StratumSlope",
    "__version__",
    "analytic_effects",
    "analyze",
    "decompose",
    "default_spec",
    "estimate_effects",
    "estimate_ps",
    "simpson",
    "simulate",
    "smd",
    "weighted_quantiles",
    "weights",
]
