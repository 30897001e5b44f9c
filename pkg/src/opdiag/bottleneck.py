"""Operational-law diagnosis: bottleneck, cause, remedy, what-if.

Built on two measurement identities that hold over any observation
interval: utilizations are proportional to demands (U_i / U_j = D_i / D_j),
and system throughput obeys T = U_i / D_i, so the resource with the largest
per-transaction demand saturates first and caps throughput at 1 / max_i D_i.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .model import evaluate_model, flatten, unflatten
from .types import (
    RESOURCES,
    WORKLOAD_COMPONENTS,
    CounterVector,
    HardwareProfile,
    InputError,
    ResourceDemands,
    WorkloadVector,
)

CAUSE_CPU = "cpu_bound"
CAUSE_SEQUENTIAL = "disk_file_sequential"
CAUSE_CACHE_STARVED = "disk_file_random_cache_starved"
CAUSE_PAGING = "disk_paging"

REMEDIES = {
    CAUSE_CPU: "faster processor",
    CAUSE_SEQUENTIAL: "faster disk / stripe disks",
    CAUSE_CACHE_STARVED: "add RAM (larger cache)",
    CAUSE_PAGING: "add RAM",
}


@dataclass(frozen=True)
class CauseThresholds:
    """Classification cutoffs; reported alongside the raw shares so every
    classification is auditable."""

    paging_share: float = 0.5
    rand_read_share: float = 0.5
    hit_fraction: float = 0.5


DEFAULT_THRESHOLDS = CauseThresholds()


def identify_bottleneck(d: ResourceDemands) -> tuple[str, float, bool]:
    """Return (resource, max system throughput, tie flag).

    The bottleneck is the resource with the largest demand (smallest
    per-resource maximum throughput); ties break in fixed resource order
    (cpu before disk) with the flag set.
    """
    demands = d.as_dict()
    if all(v <= 0 for v in demands.values()):
        raise InputError("all demands are zero; nothing to diagnose")
    best = max(RESOURCES, key=lambda r: demands[r])
    d_max = demands[best]
    tie = sum(1 for r in RESOURCES if demands[r] == d_max) > 1
    return best, 1.0 / d_max, tie


def utilizations(d: ResourceDemands, throughput: float) -> dict[str, float]:
    """Per-resource utilization U_i = T * D_i at the given throughput."""
    if throughput < 0:
        raise InputError("throughput must be >= 0")
    demands = d.as_dict()
    positive = [v for v in demands.values() if v > 0]
    if positive and throughput > 1.0 / max(positive) + 1e-12:
        raise InputError("throughput exceeds the system maximum")
    return {r: throughput * demands[r] for r in RESOURCES}


def classify_cause(
    w_star: WorkloadVector,
    c_pred: CounterVector,
    bottleneck: str,
    hw: HardwareProfile,
    thresholds: CauseThresholds = DEFAULT_THRESHOLDS,
) -> tuple[str, str]:
    """Classify what drives the bottleneck and name the remedy.

    A CPU bottleneck is simply cpu_bound.  For disk: paging demand above
    the paging-share cutoff means the disk traffic is really a RAM
    shortage; otherwise random reads dominating with a low cache hit
    fraction point to a starved file cache; everything else is treated as
    sequential-style file traffic that only a faster disk can absorb.
    """
    if bottleneck not in RESOURCES:
        raise InputError(f"unknown bottleneck resource {bottleneck!r}")
    if bottleneck == "cpu":
        return CAUSE_CPU, REMEDIES[CAUSE_CPU]
    ev = evaluate_model(w_star, hw)
    b = ev.breakdown
    if b.paging_share() > thresholds.paging_share:
        return CAUSE_PAGING, REMEDIES[CAUSE_PAGING]
    if (
        b.rand_read_share() > thresholds.rand_read_share
        and ev.hit_rand_read < thresholds.hit_fraction
    ):
        return CAUSE_CACHE_STARVED, REMEDIES[CAUSE_CACHE_STARVED]
    return CAUSE_SEQUENTIAL, REMEDIES[CAUSE_SEQUENTIAL]


@dataclass(frozen=True)
class DiagnosisReport:
    """Operational summary plus the classified cause and remedy."""

    demands: dict[str, float]
    max_throughput: dict[str, float]  # per resource, inf encoded as None in JSON
    throughput: float
    utilizations: dict[str, float]
    bottleneck: str
    tie: bool
    cause: str | None
    remedy: str | None
    shares: dict[str, float] = field(default_factory=dict)
    workload: WorkloadVector | None = None

    def to_json_dict(self) -> dict:
        return {
            "demands": dict(self.demands),
            "max_throughput": {
                r: (v if np.isfinite(v) else None) for r, v in self.max_throughput.items()
            },
            "throughput": self.throughput,
            "utilizations": dict(self.utilizations),
            "bottleneck": self.bottleneck,
            "tie": self.tie,
            "cause": self.cause,
            "remedy": self.remedy,
            "shares": dict(self.shares),
            "workload": self.workload.to_dict() if self.workload is not None else None,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "DiagnosisReport":
        return cls(
            demands={k: float(v) for k, v in data["demands"].items()},
            max_throughput={
                k: (float(v) if v is not None else np.inf)
                for k, v in data["max_throughput"].items()
            },
            throughput=float(data["throughput"]),
            utilizations={k: float(v) for k, v in data["utilizations"].items()},
            bottleneck=data["bottleneck"],
            tie=bool(data["tie"]),
            cause=data.get("cause"),
            remedy=data.get("remedy"),
            shares={k: float(v) for k, v in data.get("shares", {}).items()},
            workload=(
                WorkloadVector.from_dict(data["workload"])
                if data.get("workload") is not None
                else None
            ),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "DiagnosisReport":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
        return cls.from_json_dict(data)

    def render_text(self) -> str:
        lines = ["resource      demand_s     T_max_tx_s   utilization"]
        for r in RESOURCES:
            tmax = self.max_throughput.get(r, np.inf)
            tmax_s = f"{tmax:12.6g}" if np.isfinite(tmax) else "         inf"
            mark = " <- bottleneck" if r == self.bottleneck else ""
            lines.append(
                f"{r:<12} {self.demands.get(r, 0.0):12.6g} {tmax_s} "
                f"{self.utilizations.get(r, 0.0):11.4f}{mark}"
            )
        lines.append(f"throughput: {self.throughput:.6g} tx/s"
                     + ("  (tie)" if self.tie else ""))
        if self.cause is not None:
            lines.append(f"cause: {self.cause}")
            lines.append(f"remedy: {self.remedy}")
        if self.shares:
            shares = ", ".join(f"{k}={v:.3f}" for k, v in self.shares.items())
            lines.append(f"shares: {shares}")
        return "\n".join(lines)


def diagnose_demands(d: ResourceDemands) -> DiagnosisReport:
    """Operational-law report from demands alone (no cause classification)."""
    d.validate()
    bottleneck, throughput, tie = identify_bottleneck(d)
    demands = d.as_dict()
    return DiagnosisReport(
        demands=demands,
        max_throughput={
            r: (1.0 / v if v > 0 else np.inf) for r, v in demands.items()
        },
        throughput=throughput,
        utilizations=utilizations(d, throughput),
        bottleneck=bottleneck,
        tie=tie,
        cause=None,
        remedy=None,
    )


def diagnose(
    w: WorkloadVector,
    hw: HardwareProfile,
    thresholds: CauseThresholds = DEFAULT_THRESHOLDS,
) -> DiagnosisReport:
    """Full diagnosis of a workload: demands, bottleneck, cause, remedy."""
    ev = evaluate_model(w, hw)
    report = diagnose_demands(ev.demands)
    cause, remedy = classify_cause(w, ev.counters, report.bottleneck, hw, thresholds)
    return DiagnosisReport(
        demands=report.demands,
        max_throughput=report.max_throughput,
        throughput=report.throughput,
        utilizations=report.utilizations,
        bottleneck=report.bottleneck,
        tie=report.tie,
        cause=cause,
        remedy=remedy,
        shares={
            "disk_paging_share": ev.breakdown.paging_share(),
            "disk_rand_read_share": ev.breakdown.rand_read_share(),
            "rand_read_hit_fraction": ev.hit_rand_read,
            "seq_read_hit_fraction": ev.hit_seq_read,
        },
        workload=w,
    )


def what_if(
    w_star: WorkloadVector,
    delta: dict[str, float],
    hw: HardwareProfile,
    thresholds: CauseThresholds = DEFAULT_THRESHOLDS,
) -> DiagnosisReport:
    """Diagnose the workload after applying an increment.

    ``delta`` maps flattened component names to signed increments; the
    incremented workload must still be valid.
    """
    v = flatten(w_star)
    for name, change in delta.items():
        if name not in WORKLOAD_COMPONENTS:
            raise InputError(f"unknown workload component {name!r}")
        v[WORKLOAD_COMPONENTS.index(name)] += change
    if np.any(v < 0):
        raise InputError("increment drives a workload component negative")
    w = unflatten(v)
    w.validate()
    return diagnose(w, hw, thresholds)
