from ._core import (
    NumericalError,
    ValidationError,
    density,
    estimate,
    observation,
    pseudospectrum,
    simulate,
    steering_vector,
    support,
    validate,
)

__all__ = [
    "NumericalError",
    "ValidationError",
    "density",
    "estimate",
    "observation",
    "pseudospectrum",
    "simulate",
    "steering_vector",
    "support",
    "validate",
]
