"""Deterministic intent-driven RAN control stack with a flow-level simulator."""

__version__ = "0.1.0"

from .policy import (AGENT_ENERGY, AGENT_LOAD, AGENT_QOE, EnergyPolicy, GuardrailSpec,
                     LoadPolicy, PolicyInstance, PolicyStore, QoePolicy)
from .telemetry import KpiSample, KpiView, TelemetryStore, percentile

__all__ = [
    "AGENT_ENERGY", "AGENT_LOAD", "AGENT_QOE", "EnergyPolicy", "GuardrailSpec",
    "LoadPolicy", "PolicyInstance", "PolicyStore", "QoePolicy",
    "KpiSample", "KpiView", "TelemetryStore", "percentile", "__version__",
]
