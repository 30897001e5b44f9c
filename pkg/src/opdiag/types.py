"""Domain types shared across the toolkit.

Three vectors flow through every pipeline stage: the application workload
description, the 14 observable performance counters, and the calibrated
hardware/OS profile.  Their component orders are part of the on-disk schema
(see docs/schemas.md) and must not be reordered without bumping
SCHEMA_VERSION.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from typing import Iterator, Optional

import numpy as np

SCHEMA_VERSION = 1

# Counter schema order.  Names match the monitoring tool's object.counter
# notation verbatim; CSV headers and JSON keys use these strings.
COUNTER_NAMES: tuple[str, ...] = (
    "System.PctPriv",
    "System.PctUser",
    "System.SystemCallRate",
    "Disk.DiskReadByteRate",
    "Disk.DiskReadRate",
    "Disk.DiskWriteByteRate",
    "Disk.DiskWriteRate",
    "Cache.CopyReadHitsPct",
    "Cache.CopyReadsPerSec",
    "Cache.LazyWritePgsPerSec",
    "Memory.PgFaultsPerSec",
    "Memory.CacheFaultsPerSec",
    "Memory.PagesInputPerSec",
    "Memory.PagesOutputPerSec",
)

N_COUNTERS = len(COUNTER_NAMES)

# Percentage-valued counters (bounded above by 100).
_PCT_COUNTERS = frozenset({"System.PctPriv", "System.PctUser", "Cache.CopyReadHitsPct"})

# Flattened workload component order (length m = 12).  Absent streams
# flatten to zeros; a stream is present iff its record size is positive.
WORKLOAD_COMPONENTS: tuple[str, ...] = (
    "seq_read.inter_op_cpu_s",
    "seq_read.record_bytes",
    "seq_write.inter_op_cpu_s",
    "seq_write.record_bytes",
    "rand_read.inter_op_cpu_s",
    "rand_read.record_bytes",
    "rand_read.extent_bytes",
    "rand_write.inter_op_cpu_s",
    "rand_write.record_bytes",
    "rand_write.extent_bytes",
    "ram_demand_bytes",
    "local_paging_affinity",
)

N_COMPONENTS = len(WORKLOAD_COMPONENTS)

RESOURCES: tuple[str, ...] = ("cpu", "disk")


class OpdiagError(Exception):
    """Base class for toolkit errors."""


class InvalidWorkloadError(OpdiagError, ValueError):
    """Workload violates a type invariant (negative value, extent < record, ...)."""


class InvalidProfileError(OpdiagError, ValueError):
    """Hardware profile violates a type invariant."""


class ConvergenceError(OpdiagError, RuntimeError):
    """The paging feedback fixed point failed to converge within the cap."""


class InputError(OpdiagError, ValueError):
    """Malformed external input (CSV/JSON)."""


@dataclass(frozen=True)
class Stream:
    """One file-access stream: think of a loop issuing one operation, doing
    ``inter_op_cpu_s`` of application CPU work, and repeating."""

    inter_op_cpu_s: float
    record_bytes: float
    extent_bytes: Optional[float] = None  # random streams only

    def validate(self, name: str, needs_extent: bool) -> None:
        if self.inter_op_cpu_s < 0:
            raise InvalidWorkloadError(f"{name}: inter_op_cpu_s must be >= 0")
        if self.record_bytes <= 0:
            raise InvalidWorkloadError(f"{name}: present stream needs record_bytes > 0")
        if needs_extent:
            if self.extent_bytes is None:
                raise InvalidWorkloadError(f"{name}: random stream needs an extent")
            if self.extent_bytes < self.record_bytes:
                raise InvalidWorkloadError(
                    f"{name}: extent_bytes ({self.extent_bytes}) < record_bytes "
                    f"({self.record_bytes})"
                )
        elif self.extent_bytes is not None:
            raise InvalidWorkloadError(f"{name}: sequential stream takes no extent")


@dataclass(frozen=True)
class WorkloadVector:
    """Application workload: up to four access streams plus memory pressure.

    ``ram_demand_bytes`` is the RAM the application touches at steady state;
    ``local_paging_affinity`` is the fraction of paging traffic served by the
    local disk (the remainder leaves the modeled system).
    """

    seq_read: Optional[Stream] = None
    seq_write: Optional[Stream] = None
    rand_read: Optional[Stream] = None
    rand_write: Optional[Stream] = None
    ram_demand_bytes: float = 0.0
    local_paging_affinity: float = 1.0

    _SLOTS = ("seq_read", "seq_write", "rand_read", "rand_write")
    _RANDOM = frozenset({"rand_read", "rand_write"})

    def validate(self) -> None:
        for slot in self._SLOTS:
            stream = getattr(self, slot)
            if stream is not None:
                stream.validate(slot, needs_extent=slot in self._RANDOM)
        if self.ram_demand_bytes < 0:
            raise InvalidWorkloadError("ram_demand_bytes must be >= 0")
        if not 0.0 <= self.local_paging_affinity <= 1.0:
            raise InvalidWorkloadError("local_paging_affinity must lie in [0, 1]")

    def active_streams(self) -> Iterator[tuple[str, Stream]]:
        for slot in self._SLOTS:
            stream = getattr(self, slot)
            if stream is not None:
                yield slot, stream

    @property
    def is_empty(self) -> bool:
        return next(self.active_streams(), None) is None and self.ram_demand_bytes == 0

    def to_dict(self) -> dict:
        out: dict = {}
        for slot in self._SLOTS:
            stream = getattr(self, slot)
            if stream is None:
                out[slot] = None
            else:
                entry = {
                    "inter_op_cpu_s": stream.inter_op_cpu_s,
                    "record_bytes": stream.record_bytes,
                }
                if stream.extent_bytes is not None:
                    entry["extent_bytes"] = stream.extent_bytes
                out[slot] = entry
        out["ram_demand_bytes"] = self.ram_demand_bytes
        out["local_paging_affinity"] = self.local_paging_affinity
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "WorkloadVector":
        kwargs: dict = {}
        for slot in cls._SLOTS:
            entry = data.get(slot)
            if entry is None:
                kwargs[slot] = None
            else:
                kwargs[slot] = Stream(
                    inter_op_cpu_s=float(entry["inter_op_cpu_s"]),
                    record_bytes=float(entry["record_bytes"]),
                    extent_bytes=(
                        float(entry["extent_bytes"]) if "extent_bytes" in entry else None
                    ),
                )
        kwargs["ram_demand_bytes"] = float(data.get("ram_demand_bytes", 0.0))
        kwargs["local_paging_affinity"] = float(data.get("local_paging_affinity", 1.0))
        w = cls(**kwargs)
        w.validate()
        return w


@dataclass(frozen=True)
class CounterVector:
    """The 14 observable performance counters, in schema order."""

    pct_priv: float = 0.0
    pct_user: float = 0.0
    system_call_rate: float = 0.0
    disk_read_byte_rate: float = 0.0
    disk_read_rate: float = 0.0
    disk_write_byte_rate: float = 0.0
    disk_write_rate: float = 0.0
    copy_read_hits_pct: float = 0.0
    copy_reads_per_sec: float = 0.0
    lazy_write_pages_per_sec: float = 0.0
    page_faults_per_sec: float = 0.0
    cache_faults_per_sec: float = 0.0
    pages_input_per_sec: float = 0.0
    pages_output_per_sec: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f.name) for f in fields(self)], dtype=float)

    @classmethod
    def from_array(cls, values) -> "CounterVector":
        values = np.asarray(values, dtype=float)
        if values.shape != (N_COUNTERS,):
            raise InputError(f"counter vector must have length {N_COUNTERS}")
        return cls(*(float(v) for v in values))

    def validate(self) -> None:
        arr = self.as_array()
        if np.any(arr < 0):
            raise InputError("counters must be nonnegative")
        for name, value in zip(COUNTER_NAMES, arr):
            if name in _PCT_COUNTERS and value > 100.0 + 1e-9:
                raise InputError(f"{name} exceeds 100%")
        if self.pct_priv + self.pct_user > 100.0 + 1e-9:
            raise InputError("PctPriv + PctUser exceeds 100%")

    def to_dict(self) -> dict:
        return dict(zip(COUNTER_NAMES, (float(v) for v in self.as_array())))

    @classmethod
    def from_dict(cls, data: dict) -> "CounterVector":
        try:
            return cls(*(float(data[name]) for name in COUNTER_NAMES))
        except KeyError as exc:
            raise InputError(f"missing counter {exc.args[0]!r}") from exc


# Profile constants in the order the numeric kernel consumes them.
PROFILE_FIELD_ORDER: tuple[str, ...] = (
    "ram_total_bytes",
    "os_resident_bytes",
    "cache_max_bytes",
    "cache_min_bytes",
    "page_bytes",
    "read_ahead_bytes",
    "lazy_write_cluster_bytes",
    "disk_fixed_s",
    "disk_transfer_bytes_per_s",
    "cpu_overhead_slope_s_per_byte",
    "cpu_overhead_intercept_s",
    "cpu_syscall_s",
    "cpu_page_fault_s",
    "paging_refault_fraction",
    "dirty_page_fraction",
)


@dataclass(frozen=True)
class HardwareProfile:
    """Calibrated hardware and OS constants, fixed at calibration time.

    Default magnitudes describe a small mid-1990s server; they are fixture
    data used by the synthetic test system, not measurements.
    """

    ram_total_bytes: float = 64 * 1024 * 1024
    os_resident_bytes: float = 16 * 1024 * 1024
    cache_max_bytes: float = 16 * 1024 * 1024
    cache_min_bytes: float = 1 * 1024 * 1024
    page_bytes: float = 4096
    read_ahead_bytes: float = 65536
    lazy_write_cluster_bytes: float = 65536
    disk_fixed_s: float = 0.012
    disk_transfer_bytes_per_s: float = 4 * 1024 * 1024
    cpu_overhead_slope_s_per_byte: float = 2e-9
    cpu_overhead_intercept_s: float = 5e-4
    cpu_syscall_s: float = 2e-5
    cpu_page_fault_s: float = 5e-4
    paging_refault_fraction: float = 0.01
    dirty_page_fraction: float = 0.5

    def validate(self) -> None:
        positive = (
            "ram_total_bytes",
            "os_resident_bytes",
            "cache_max_bytes",
            "cache_min_bytes",
            "page_bytes",
            "read_ahead_bytes",
            "lazy_write_cluster_bytes",
            "disk_fixed_s",
            "disk_transfer_bytes_per_s",
            "cpu_syscall_s",
            "cpu_page_fault_s",
        )
        for name in positive:
            if getattr(self, name) <= 0:
                raise InvalidProfileError(f"{name} must be positive")
        if self.cpu_overhead_slope_s_per_byte < 0 or self.cpu_overhead_intercept_s < 0:
            raise InvalidProfileError("disk CPU overhead regression must be nonnegative")
        if self.paging_refault_fraction < 0:
            raise InvalidProfileError("paging_refault_fraction must be >= 0")
        if not 0.0 <= self.dirty_page_fraction <= 1.0:
            raise InvalidProfileError("dirty_page_fraction must lie in [0, 1]")
        if not (
            self.cache_min_bytes
            <= self.cache_max_bytes
            <= self.ram_total_bytes - self.os_resident_bytes
        ):
            raise InvalidProfileError(
                "need cache_min <= cache_max <= ram_total - os_resident"
            )
        ratio = self.read_ahead_bytes / self.page_bytes
        if abs(ratio - round(ratio)) > 1e-9:
            raise InvalidProfileError("page_bytes must divide read_ahead_bytes")

    def as_array(self) -> np.ndarray:
        return np.array(
            [getattr(self, name) for name in PROFILE_FIELD_ORDER], dtype=float
        )

    def to_json_dict(self) -> dict:
        out = {"schema_version": SCHEMA_VERSION}
        out.update({name: float(getattr(self, name)) for name in PROFILE_FIELD_ORDER})
        return out

    @classmethod
    def from_json_dict(cls, data: dict) -> "HardwareProfile":
        kwargs = {}
        for name in PROFILE_FIELD_ORDER:
            if name not in data:
                raise InputError(f"profile is missing field {name!r}")
            kwargs[name] = float(data[name])
        profile = cls(**kwargs)
        profile.validate()
        return profile

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "HardwareProfile":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
        return cls.from_json_dict(data)

    def replace(self, **changes) -> "HardwareProfile":
        return replace(self, **changes)


DEFAULT_PROFILE = HardwareProfile()


@dataclass(frozen=True)
class ResourceDemands:
    """Seconds of busy time each resource needs per transaction cycle.

    A cycle is one pass in which every active stream completes exactly one
    operation (plus the paging activity that pass induces).
    """

    cpu: float = 0.0
    disk: float = 0.0

    def as_dict(self) -> dict[str, float]:
        return {"cpu": self.cpu, "disk": self.disk}

    def validate(self) -> None:
        if self.cpu < 0 or self.disk < 0:
            raise InputError("demands must be nonnegative")
