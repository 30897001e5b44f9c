"""Forward model: workload + hardware profile -> predicted counters.

The numeric kernel ships in two interchangeable forms: a compiled extension
(``opdiag._kernel``, built from Cython) and a pure-Python fallback
(``opdiag._kernel_py``).  Selection happens once at import; set
``OPDIAG_PURE=1`` to force the fallback.  Both produce identical results;
``benchmarks/bench_kernel.py`` compares their throughput.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import _kernel_py
from .types import (
    N_COMPONENTS,
    N_COUNTERS,
    WORKLOAD_COMPONENTS,
    ConvergenceError,
    CounterVector,
    HardwareProfile,
    InvalidWorkloadError,
    ResourceDemands,
    Stream,
    WorkloadVector,
)

if os.environ.get("OPDIAG_PURE") == "1":
    _kernel = _kernel_py
    KERNEL_BACKEND = "python"
else:
    try:
        from . import _kernel  # type: ignore[attr-defined]

        KERNEL_BACKEND = "compiled"
    except ImportError:
        _kernel = _kernel_py
        KERNEL_BACKEND = "python"

N_EXTRAS = _kernel_py.N_EXTRAS

_STATUS_MESSAGES = {
    2: "workload violates an invariant (negative component, affinity > 1, or extent < record)",
    3: "degenerate stream cycle: per-op time below 1e-9 s",
}


@dataclass(frozen=True)
class DemandBreakdown:
    """Where the per-cycle disk demand comes from, for cause auditing."""

    disk_seq_read: float
    disk_seq_write: float
    disk_rand_read: float
    disk_rand_write: float
    disk_paging: float
    cpu_streams: float
    cpu_paging: float

    @property
    def disk_total(self) -> float:
        return (
            self.disk_seq_read
            + self.disk_seq_write
            + self.disk_rand_read
            + self.disk_rand_write
            + self.disk_paging
        )

    def paging_share(self) -> float:
        total = self.disk_total
        return self.disk_paging / total if total > 0 else 0.0

    def rand_read_share(self) -> float:
        total = self.disk_total
        return self.disk_rand_read / total if total > 0 else 0.0


@dataclass(frozen=True)
class ModelEvaluation:
    """Counters, demands, and the internal state they were assembled from."""

    counters: CounterVector
    demands: ResourceDemands
    breakdown: DemandBreakdown
    stream_rates: dict[str, float]
    hit_seq_read: float
    hit_rand_read: float
    pages_per_op: float
    cache_bytes: float
    shortfall_bytes: float
    busy_cpu: float
    busy_disk: float
    iterations: int


def flatten(w: WorkloadVector) -> np.ndarray:
    """Flatten a workload to the fixed 12-component numeric view.

    Component order follows ``types.WORKLOAD_COMPONENTS``; absent streams
    contribute zeros.
    """
    v = np.zeros(N_COMPONENTS)
    if w.seq_read is not None:
        v[0] = w.seq_read.inter_op_cpu_s
        v[1] = w.seq_read.record_bytes
    if w.seq_write is not None:
        v[2] = w.seq_write.inter_op_cpu_s
        v[3] = w.seq_write.record_bytes
    if w.rand_read is not None:
        v[4] = w.rand_read.inter_op_cpu_s
        v[5] = w.rand_read.record_bytes
        v[6] = w.rand_read.extent_bytes
    if w.rand_write is not None:
        v[7] = w.rand_write.inter_op_cpu_s
        v[8] = w.rand_write.record_bytes
        v[9] = w.rand_write.extent_bytes
    v[10] = w.ram_demand_bytes
    v[11] = w.local_paging_affinity
    return v


def unflatten(v) -> WorkloadVector:
    """Rebuild a workload from its flattened view.

    A stream is present iff its record-size component is positive; the
    other components of an absent stream are dropped.  Raises on wrong
    length or negative components.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (N_COMPONENTS,):
        raise InvalidWorkloadError(
            f"flattened workload must have length {N_COMPONENTS}, got {v.shape}"
        )
    if np.any(v < 0):
        bad = int(np.argmin(v >= 0))
        raise InvalidWorkloadError(
            f"negative component {WORKLOAD_COMPONENTS[bad]} = {v[bad]}"
        )
    f = [float(c) for c in v]
    return WorkloadVector(
        seq_read=Stream(f[0], f[1]) if f[1] > 0 else None,
        seq_write=Stream(f[2], f[3]) if f[3] > 0 else None,
        rand_read=Stream(f[4], f[5], f[6]) if f[5] > 0 else None,
        rand_write=Stream(f[7], f[8], f[9]) if f[8] > 0 else None,
        ram_demand_bytes=f[10],
        local_paging_affinity=f[11],
    )


def evaluate_flat(v: np.ndarray, prof: np.ndarray, counters: np.ndarray, extras: np.ndarray) -> int:
    """Low-level kernel call on preallocated buffers; returns the status code.

    This is the hot path for optimizers; no validation beyond the kernel's
    own invariant checks, no dataclass construction.
    """
    return _kernel.evaluate(v, prof, counters, extras)


def _evaluate_arrays(v: np.ndarray, hw: HardwareProfile) -> tuple[np.ndarray, np.ndarray]:
    counters = np.empty(N_COUNTERS)
    extras = np.empty(N_EXTRAS)
    status = _kernel.evaluate(v, hw.as_array(), counters, extras)
    if status == 1:
        raise ConvergenceError(
            f"paging fixed point did not converge within {_kernel_py.FP_MAX_ITER} "
            "iterations (degenerate profile?)"
        )
    if status != 0:
        raise InvalidWorkloadError(_STATUS_MESSAGES.get(status, f"kernel status {status}"))
    return counters, extras


def evaluate_model(w: WorkloadVector, hw: HardwareProfile) -> ModelEvaluation:
    """Full model evaluation with demands and auditing internals."""
    w.validate()
    counters, x = _evaluate_arrays(flatten(w), hw)
    k = _kernel_py
    return ModelEvaluation(
        counters=CounterVector.from_array(counters),
        demands=ResourceDemands(cpu=float(x[k.X_D_CPU]), disk=float(x[k.X_D_DISK])),
        breakdown=DemandBreakdown(
            disk_seq_read=float(x[k.X_DISK_SEQ_READ]),
            disk_seq_write=float(x[k.X_DISK_SEQ_WRITE]),
            disk_rand_read=float(x[k.X_DISK_RAND_READ]),
            disk_rand_write=float(x[k.X_DISK_RAND_WRITE]),
            disk_paging=float(x[k.X_DISK_PAGING]),
            cpu_streams=float(x[k.X_CPU_STREAMS]),
            cpu_paging=float(x[k.X_CPU_PAGING]),
        ),
        stream_rates={
            "seq_read": float(x[k.X_RATE_SEQ_READ]),
            "seq_write": float(x[k.X_RATE_SEQ_WRITE]),
            "rand_read": float(x[k.X_RATE_RAND_READ]),
            "rand_write": float(x[k.X_RATE_RAND_WRITE]),
        },
        hit_seq_read=float(x[k.X_HIT_SEQ_READ]),
        hit_rand_read=float(x[k.X_HIT_RAND_READ]),
        pages_per_op=float(x[k.X_PAGES_PER_OP]),
        cache_bytes=float(x[k.X_CACHE_BYTES]),
        shortfall_bytes=float(x[k.X_SHORTFALL_BYTES]),
        busy_cpu=float(x[k.X_BUSY_CPU]),
        busy_disk=float(x[k.X_BUSY_DISK]),
        iterations=int(x[k.X_ITERATIONS]),
    )


def predict_counters(w: WorkloadVector, hw: HardwareProfile) -> CounterVector:
    """Predict the steady-state counter vector for a workload."""
    return evaluate_model(w, hw).counters


def compute_demands(w: WorkloadVector, hw: HardwareProfile) -> ResourceDemands:
    """Per-cycle CPU and disk demand, consistent with predict_counters."""
    return evaluate_model(w, hw).demands
