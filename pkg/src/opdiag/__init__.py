"""Workload inference and bottleneck diagnosis from OS performance counters.

The toolkit predicts performance-monitor counters from a workload
description via a calibrated operational model, inverts that model to
recover the most probable workload from observed counters, and diagnoses
the system bottleneck, its cause, and the remedy.
"""

from .model import KERNEL_BACKEND, compute_demands, flatten, predict_counters, unflatten
from .types import (
    COUNTER_NAMES,
    DEFAULT_PROFILE,
    WORKLOAD_COMPONENTS,
    CounterVector,
    HardwareProfile,
    ResourceDemands,
    Stream,
    WorkloadVector,
)

__version__ = "0.1.0"

__all__ = [
    "COUNTER_NAMES",
    "DEFAULT_PROFILE",
    "KERNEL_BACKEND",
    "WORKLOAD_COMPONENTS",
    "CounterVector",
    "HardwareProfile",
    "ResourceDemands",
    "Stream",
    "WorkloadVector",
    "compute_demands",
    "flatten",
    "predict_counters",
    "unflatten",
    "__version__",
]
