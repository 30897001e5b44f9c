"""Profile calibration and model verification.

Calibration fits hardware/OS constants from primitive-operation samples
(simple linear regressions and means); verification sweeps one workload
parameter at a time and compares predicted counters against a logged
actual-counter series.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .model import flatten, predict_counters, unflatten
from .types import (
    COUNTER_NAMES,
    N_COUNTERS,
    WORKLOAD_COMPONENTS,
    CounterVector,
    HardwareProfile,
    InputError,
    WorkloadVector,
)

PRIMITIVES = ("disk_read_overhead", "disk_service", "syscall", "page_fault")

_REL_DEV_FLOOR = 1e-9


@dataclass(frozen=True)
class CalibrationSample:
    """One measured primitive cost: x is the independent value (bytes for
    the regressions, unused for the means), y the cost in seconds."""

    primitive: str
    x: float
    y: float

    def __post_init__(self):
        if self.primitive not in PRIMITIVES:
            raise InputError(f"unknown primitive {self.primitive!r}")
        if self.x < 0:
            raise InputError("sample x must be >= 0")
        if not np.isfinite(self.y):
            raise InputError("sample y must be finite")


@dataclass(frozen=True)
class RegressionFit:
    slope: float
    intercept: float
    r_squared: float
    residual_std: float
    sample_count: int


def fit_linear(points) -> RegressionFit:
    """Ordinary least squares y = intercept + slope * x.

    Requires at least two points with two distinct x values; collinear data
    yields r_squared = 1.
    """
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < 2:
        raise InputError("need at least 2 points")
    xs = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    if np.ptp(xs) == 0:
        raise InputError("need at least 2 distinct x values")
    n = len(pts)
    x_mean = xs.mean()
    y_mean = ys.mean()
    sxx = float(np.sum((xs - x_mean) ** 2))
    sxy = float(np.sum((xs - x_mean) * (ys - y_mean)))
    slope = sxy / sxx
    intercept = y_mean - slope * x_mean
    residuals = ys - (intercept + slope * xs)
    ss_res = float(np.sum(residuals**2))
    ss_tot = float(np.sum((ys - y_mean) ** 2))
    r_squared = 1.0 if ss_tot == 0 else max(0.0, 1.0 - ss_res / ss_tot)
    residual_std = float(np.sqrt(ss_res / (n - 2))) if n > 2 else 0.0
    return RegressionFit(slope, intercept, r_squared, residual_std, n)


def calibrate_profile(samples, base: HardwareProfile) -> HardwareProfile:
    """Fit profile constants from primitive samples; untouched fields keep
    their values from ``base``.

    disk_read_overhead regresses CPU seconds against transfer bytes (the
    per-transfer overhead line); disk_service regresses per-op disk seconds
    against bytes, giving the fixed positioning time (intercept) and the
    transfer rate (1/slope); syscall and page_fault costs are sample means.
    """
    by_primitive: dict[str, list[CalibrationSample]] = {p: [] for p in PRIMITIVES}
    for s in samples:
        by_primitive[s.primitive].append(s)

    changes: dict[str, float] = {}
    if by_primitive["disk_read_overhead"]:
        fit = fit_linear([(s.x, s.y) for s in by_primitive["disk_read_overhead"]])
        changes["cpu_overhead_slope_s_per_byte"] = fit.slope
        changes["cpu_overhead_intercept_s"] = fit.intercept
    if by_primitive["disk_service"]:
        fit = fit_linear([(s.x, s.y) for s in by_primitive["disk_service"]])
        if fit.slope <= 0:
            raise InputError("disk_service fit implies a nonpositive transfer rate")
        changes["disk_fixed_s"] = fit.intercept
        changes["disk_transfer_bytes_per_s"] = 1.0 / fit.slope
    if by_primitive["syscall"]:
        changes["cpu_syscall_s"] = float(np.mean([s.y for s in by_primitive["syscall"]]))
    if by_primitive["page_fault"]:
        changes["cpu_page_fault_s"] = float(
            np.mean([s.y for s in by_primitive["page_fault"]])
        )
    profile = base.replace(**changes)
    profile.validate()
    return profile


@dataclass(frozen=True)
class SweepSpec:
    """A one-dimensional workload series: vary one flattened component over
    ``values`` while holding the rest of ``base`` fixed."""

    param: str
    values: tuple[float, ...]
    base: WorkloadVector

    def __post_init__(self):
        if self.param not in WORKLOAD_COMPONENTS:
            raise InputError(f"unknown workload component {self.param!r}")
        if len(self.values) == 0:
            raise InputError("sweep needs at least one value")

    def workloads(self) -> list[WorkloadVector]:
        idx = WORKLOAD_COMPONENTS.index(self.param)
        out = []
        for value in self.values:
            v = flatten(self.base)
            v[idx] = value
            out.append(unflatten(v))
        return out

    def to_json_dict(self) -> dict:
        return {
            "param": self.param,
            "values": list(self.values),
            "base": self.base.to_dict(),
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "SweepSpec":
        return cls(
            param=data["param"],
            values=tuple(float(v) for v in data["values"]),
            base=WorkloadVector.from_dict(data["base"]),
        )


@dataclass(frozen=True)
class VerificationReport:
    """Predicted-vs-actual counter series over a sweep, with per-counter
    deviation summaries (relative to the actual value)."""

    param: str
    values: tuple[float, ...]
    predicted: tuple[CounterVector, ...]
    actual: tuple[CounterVector, ...]
    max_rel_dev: dict[str, float] = field(default_factory=dict)
    mean_rel_dev: dict[str, float] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "param": self.param,
            "values": list(self.values),
            "predicted": [c.to_dict() for c in self.predicted],
            "actual": [c.to_dict() for c in self.actual],
            "max_rel_dev": dict(self.max_rel_dev),
            "mean_rel_dev": dict(self.mean_rel_dev),
        }


def verify(profile: HardwareProfile, sweep: SweepSpec, actual) -> VerificationReport:
    """Predict counters at each sweep point and compare with the actual log.

    ``actual`` is a sequence of (sweep_value, CounterVector); alignment is
    by exact sweep-value equality, no interpolation.
    """
    actual = list(actual)
    if len(actual) != len(sweep.values):
        raise InputError(
            f"sweep has {len(sweep.values)} points but log has {len(actual)}"
        )
    logged = {v: c for v, c in actual}
    aligned = []
    for v in sweep.values:
        if v not in logged:
            raise InputError(f"log is missing sweep value {v!r}")
        aligned.append(logged[v])

    predicted = [predict_counters(w, profile) for w in sweep.workloads()]
    pred_arr = np.array([c.as_array() for c in predicted])
    act_arr = np.array([c.as_array() for c in aligned])
    denom = np.maximum(np.abs(act_arr), _REL_DEV_FLOOR)
    rel = np.abs(pred_arr - act_arr) / denom
    return VerificationReport(
        param=sweep.param,
        values=tuple(sweep.values),
        predicted=tuple(predicted),
        actual=tuple(aligned),
        max_rel_dev={name: float(rel[:, j].max()) for j, name in enumerate(COUNTER_NAMES)},
        mean_rel_dev={name: float(rel[:, j].mean()) for j, name in enumerate(COUNTER_NAMES)},
    )


# ---------------------------------------------------------------------------
# CSV I/O


def load_samples_csv(path) -> list[CalibrationSample]:
    """Read calibration samples from a ``primitive,x,y`` CSV."""
    samples = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if lineno == 1 and row and row[0].strip() == "primitive":
                continue
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 3:
                raise InputError(f"{path}: line {lineno}: expected 3 columns")
            try:
                samples.append(
                    CalibrationSample(row[0].strip(), float(row[1]), float(row[2]))
                )
            except (ValueError, InputError) as exc:
                raise InputError(f"{path}: line {lineno}: {exc}") from exc
    return samples


def write_samples_csv(path, samples) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["primitive", "x", "y"])
        for s in samples:
            writer.writerow([s.primitive, repr(s.x), repr(s.y)])


def read_counter_log(path) -> list[tuple[float, CounterVector]]:
    """Read a ``sweep_value,<14 counters>`` CSV (headers in schema order)."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise InputError(f"{path}: empty file")
        expected = ["sweep_value", *COUNTER_NAMES]
        if [h.strip() for h in header] != expected:
            raise InputError(f"{path}: line 1: header must be {','.join(expected)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 1 + N_COUNTERS:
                raise InputError(
                    f"{path}: line {lineno}: expected {1 + N_COUNTERS} columns"
                )
            try:
                value = float(row[0])
                counters = CounterVector.from_array([float(c) for c in row[1:]])
            except ValueError as exc:
                raise InputError(f"{path}: line {lineno}: {exc}") from exc
            rows.append((value, counters))
    return rows


def write_counter_log(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sweep_value", *COUNTER_NAMES])
        for value, counters in rows:
            writer.writerow([repr(float(value)), *(repr(v) for v in counters.as_array())])
