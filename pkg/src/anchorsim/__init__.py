"""Constellation-backed mobile network simulator and anchor placement toolkit."""

from . import classifier, constellation, distribution, harness, latency, signaling
from .errors import (
    AnchorSimError,
    CoverageGapError,
    EstablishmentTimeoutError,
    IncompleteMeasurementError,
    InputError,
    InstanceTooLargeError,
    RuleTableError,
    ScenarioError,
    TeidMismatchError,
)

__version__ = "0.1.0"

__all__ = [
    "classifier",
    "constellation",
    "distribution",
    "harness",
    "latency",
    "signaling",
    "AnchorSimError",
    "CoverageGapError",
    "EstablishmentTimeoutError",
    "IncompleteMeasurementError",
    "InputError",
    "InstanceTooLargeError",
    "RuleTableError",
    "ScenarioError",
    "TeidMismatchError",
    "__version__",
]
