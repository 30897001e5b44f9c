"""Synthetic ground-truth system and the end-to-end experiment suite.

The harness stands in for a real measured machine: a "truth" profile
perturbed from the calibrated one (systematic model error), per-counter
multiplicative bias (measurement overhead), and multiplicative Gaussian
noise.  Scenario fixtures with labeled bottlenecks drive round-trip
experiments: simulate counters on the truth system, infer the workload
with the calibrated model, diagnose, and compare against the labels.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields as dc_fields
from importlib import resources

import numpy as np

from .bottleneck import DiagnosisReport, diagnose
from .calibration import CalibrationSample
from .error_model import ErrorModel, estimate_error_model
from .inference import InferenceConfig, InferenceResult, invert, mpe
from .model import compute_demands, predict_counters
from .priors import WorkloadPrior, default_prior, sample_prior
from .types import (
    N_COUNTERS,
    CounterVector,
    HardwareProfile,
    InputError,
    WorkloadVector,
)

SCENARIO_NAMES = (
    "SequentialRead",
    "SequentialWrite",
    "RandomRead",
    "RandomWrite",
    "Paging",
)

# Profile constants the truth system perturbs.  Memory-geometry fields
# (sizes that carry divisibility or ordering invariants) stay fixed.
PERTURBED_FIELDS = (
    "disk_fixed_s",
    "disk_transfer_bytes_per_s",
    "cpu_overhead_slope_s_per_byte",
    "cpu_overhead_intercept_s",
    "cpu_syscall_s",
    "cpu_page_fault_s",
    "paging_refault_fraction",
    "dirty_page_fraction",
)

_PCT_IDX = (0, 1, 7)  # PctPriv, PctUser, CopyReadHitsPct


@dataclass(frozen=True)
class GroundTruthSystem:
    """The system being measured: perturbed physics, biased noisy metering."""

    profile: HardwareProfile
    counter_bias: tuple[float, ...] = tuple([1.0] * N_COUNTERS)
    noise_std: tuple[float, ...] = tuple([0.0] * N_COUNTERS)

    def __post_init__(self):
        if len(self.counter_bias) != N_COUNTERS or len(self.noise_std) != N_COUNTERS:
            raise InputError(f"bias and noise need {N_COUNTERS} entries")
        if any(b <= 0 for b in self.counter_bias):
            raise InputError("counter bias factors must be positive")
        if any(s < 0 for s in self.noise_std):
            raise InputError("noise stds must be >= 0")


def default_truth(
    base: HardwareProfile,
    seed: int,
    profile_bias_range: tuple[float, float] = (0.95, 1.05),
    noise_std: float = 0.02,
) -> GroundTruthSystem:
    """Perturb a calibrated profile into a plausible truth system.

    Each continuous profile constant gets an independent multiplicative
    bias drawn once from ``profile_bias_range``; counters get iid relative
    noise of ``noise_std``.
    """
    rng = np.random.default_rng(seed)
    changes = {}
    for name in PERTURBED_FIELDS:
        factor = rng.uniform(*profile_bias_range)
        changes[name] = getattr(base, name) * factor
    changes["dirty_page_fraction"] = min(changes["dirty_page_fraction"], 1.0)
    profile = base.replace(**changes)
    profile.validate()
    return GroundTruthSystem(
        profile=profile,
        noise_std=tuple([noise_std] * N_COUNTERS),
    )


def simulate_counters(w: WorkloadVector, truth: GroundTruthSystem, seed) -> CounterVector:
    """Measure the truth system under workload w.

    c_a = bias * f_truth(w) * (1 + noise); clamped to the counter
    invariants (nonnegative, percentages <= 100, PctPriv + PctUser <= 100).
    Deterministic for a given seed.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    base = predict_counters(w, truth.profile).as_array()
    bias = np.asarray(truth.counter_bias)
    noise = np.asarray(truth.noise_std) * rng.standard_normal(N_COUNTERS)
    c = bias * base * (1.0 + noise)
    c = np.maximum(c, 0.0)
    for i in _PCT_IDX:
        c[i] = min(c[i], 100.0)
    busy = c[0] + c[1]
    if busy > 100.0:
        c[0] *= 100.0 / busy
        c[1] *= 100.0 / busy
    return CounterVector.from_array(c)


def generate_error_dataset(
    sampler,
    truth: GroundTruthSystem,
    model_profile: HardwareProfile,
    count: int,
    seed: int,
) -> list[tuple[CounterVector, CounterVector]]:
    """Controlled runs for error-model estimation.

    ``sampler(rng) -> WorkloadVector`` supplies the known workloads; each
    pair is (actual from the truth system, predicted by the model profile).
    """
    if count < 2:
        raise InputError("need count >= 2 for a usable error dataset")
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(count):
        w = sampler(rng)
        c_p = predict_counters(w, model_profile)
        c_a = simulate_counters(w, truth, rng)
        pairs.append((c_a, c_p))
    return pairs


def prior_sampler(prior: WorkloadPrior):
    """Workload sampler drawing from a prior (for generate_error_dataset)."""

    def sampler(rng: np.random.Generator) -> WorkloadVector:
        return sample_prior(prior, rng)

    return sampler


def verification_sampler(prior: WorkloadPrior, profile: HardwareProfile):
    """One-dimensional controlled workloads, verification style.

    Draws cycle deterministically through the five exercised services (one
    stream each, or paging pressure driven by a random-read stream) with
    sizes and extents from the prior and inter-operation times swept over
    the operating range.  This mirrors how error data is collected on a
    real machine and keeps the estimated covariance scaled to
    scenario-like counter magnitudes.
    """
    from .model import flatten as _flatten
    from .model import unflatten as _unflatten

    threshold = (
        profile.ram_total_bytes - profile.os_resident_bytes - profile.cache_min_bytes
    )
    keep_indices = {
        0: (0, 1),  # seq_read
        1: (2, 3),  # seq_write
        2: (4, 5, 6),  # rand_read
        3: (7, 8, 9),  # rand_write
        4: (4, 5, 6),  # paging: rand_read activity + RAM pressure
    }
    time_slots = (0, 2, 4, 7)
    state = {"draw": 0}

    def sampler(rng: np.random.Generator) -> WorkloadVector:
        kind = state["draw"] % len(keep_indices)
        state["draw"] += 1
        v = _flatten(sample_prior(prior, rng))
        masked = np.zeros_like(v)
        for i in keep_indices[kind]:
            masked[i] = v[i]
        for i in time_slots:
            if masked[i] > 0 or (i in keep_indices[kind]):
                masked[i] = rng.uniform(0.0005, 0.012)
        if kind == 4:
            masked[10] = threshold * rng.uniform(1.005, 1.25)
        else:
            masked[10] = threshold * rng.uniform(0.0, 0.6)
        masked[11] = v[11]
        return _unflatten(masked)

    return sampler


def generate_calibration_samples(
    truth: GroundTruthSystem,
    seed: int,
    sizes=tuple(4096 * k for k in range(1, 33)),
    repeats: int = 1,
    noise_std: float = 0.01,
) -> list[CalibrationSample]:
    """Primitive-cost measurements of the truth system, for calibration.

    Costs come from the truth profile's constants with ``noise_std``
    relative measurement noise.
    """
    rng = np.random.default_rng(seed)
    p = truth.profile
    samples = []
    for _ in range(repeats):
        for s in sizes:
            y = p.cpu_overhead_intercept_s + p.cpu_overhead_slope_s_per_byte * s
            samples.append(
                CalibrationSample(
                    "disk_read_overhead", s, y * (1.0 + noise_std * rng.standard_normal())
                )
            )
        for s in sizes:
            y = p.disk_fixed_s + s / p.disk_transfer_bytes_per_s
            samples.append(
                CalibrationSample(
                    "disk_service", s, y * (1.0 + noise_std * rng.standard_normal())
                )
            )
        for _ in range(8):
            samples.append(
                CalibrationSample(
                    "syscall",
                    0.0,
                    p.cpu_syscall_s * (1.0 + noise_std * rng.standard_normal()),
                )
            )
            samples.append(
                CalibrationSample(
                    "page_fault",
                    0.0,
                    p.cpu_page_fault_s * (1.0 + noise_std * rng.standard_normal()),
                )
            )
    return samples


# ---------------------------------------------------------------------------
# Scenarios


@dataclass(frozen=True)
class Scenario:
    """A named workload with its labeled bottleneck and cause."""

    name: str
    workload: WorkloadVector
    expected_bottleneck: str
    expected_cause: str

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "workload": self.workload.to_dict(),
            "expected_bottleneck": self.expected_bottleneck,
            "expected_cause": self.expected_cause,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "Scenario":
        try:
            return cls(
                name=data["name"],
                workload=WorkloadVector.from_dict(data["workload"]),
                expected_bottleneck=data["expected_bottleneck"],
                expected_cause=data["expected_cause"],
            )
        except KeyError as exc:
            raise InputError(f"scenario is missing field {exc.args[0]!r}") from exc

    @classmethod
    def load(cls, path) -> "Scenario":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
        return cls.from_json_dict(data)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)
            fh.write("\n")


_SCENARIO_FILES = {
    "SequentialRead": "sequential_read.json",
    "SequentialWrite": "sequential_write.json",
    "RandomRead": "random_read.json",
    "RandomWrite": "random_write.json",
    "Paging": "paging.json",
}


def builtin_scenarios() -> list[Scenario]:
    """The five shipped scenario fixtures, in suite order."""
    out = []
    for name in SCENARIO_NAMES:
        text = (
            resources.files("opdiag")
            .joinpath(f"data/scenarios/{_SCENARIO_FILES[name]}")
            .read_text()
        )
        out.append(Scenario.from_json_dict(json.loads(text)))
    return out


# ---------------------------------------------------------------------------
# Suite runner


@dataclass(frozen=True)
class SuiteRow:
    scenario: str
    method: str
    expected_bottleneck: str
    inferred_bottleneck: str
    bottleneck_correct: bool
    expected_cause: str
    inferred_cause: str
    actual_demands: dict[str, float]
    inferred_demands: dict[str, float]
    demand_rel_err: dict[str, float]
    actual_utilizations: dict[str, float]
    inferred_utilizations: dict[str, float]
    objective: float
    evaluations: int

    def to_json_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dc_fields(self)}


@dataclass(frozen=True)
class SuiteReport:
    rows: tuple[SuiteRow, ...]
    accuracy: dict[str, float] = field(default_factory=dict)  # per method
    error_model_count: int = 0

    def to_json_dict(self) -> dict:
        return {
            "rows": [r.to_json_dict() for r in self.rows],
            "accuracy": dict(self.accuracy),
            "error_model_count": self.error_model_count,
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)
            fh.write("\n")

    def render_text(self) -> str:
        header = (
            f"{'scenario':<16} {'method':<10} {'bneck':<6} {'ok':<3} "
            f"{'D_cpu act':>11} {'D_cpu inf':>11} {'D_disk act':>11} "
            f"{'D_disk inf':>11} {'evals':>7}"
        )
        lines = [header, "-" * len(header)]
        for r in self.rows:
            lines.append(
                f"{r.scenario:<16} {r.method:<10} {r.inferred_bottleneck:<6} "
                f"{'y' if r.bottleneck_correct else 'N':<3} "
                f"{r.actual_demands['cpu']:>11.5g} {r.inferred_demands['cpu']:>11.5g} "
                f"{r.actual_demands['disk']:>11.5g} {r.inferred_demands['disk']:>11.5g} "
                f"{r.evaluations:>7d}"
            )
        for method, acc in self.accuracy.items():
            lines.append(f"accuracy[{method}]: {acc:.2f}")
        return "\n".join(lines)


def _rel_err(inferred: float, actual: float) -> float:
    if actual == 0:
        return 0.0 if inferred == 0 else np.inf
    return abs(inferred - actual) / abs(actual)


def run_suite(
    scenarios,
    truth: GroundTruthSystem,
    methods=("inversion", "mpe"),
    cfg: InferenceConfig | None = None,
    model_profile: HardwareProfile | None = None,
    prior: WorkloadPrior | None = None,
    em: ErrorModel | None = None,
    error_count: int = 40,
    seed: int = 0,
) -> SuiteReport:
    """Run every scenario through every method and score the round trip.

    Per scenario: simulate counters on the truth system, infer the
    workload against the calibrated model profile, compare inferred
    demands/utilizations/bottleneck with the truth system's actuals.  The
    MPE error model is estimated from ``error_count`` generated pairs when
    not supplied.
    """
    scenarios = list(scenarios)
    methods = tuple(methods)
    for m in methods:
        if m not in ("inversion", "mpe"):
            raise InputError(f"unknown method {m!r}")
    if cfg is None:
        cfg = InferenceConfig()
    if model_profile is None:
        model_profile = HardwareProfile()
    if not scenarios:
        return SuiteReport(rows=(), accuracy={m: float("nan") for m in methods})

    if "mpe" in methods:
        if prior is None:
            prior = default_prior()
        if em is None:
            pairs = generate_error_dataset(
                verification_sampler(prior, model_profile),
                truth,
                model_profile,
                error_count,
                seed + 7919,
            )
            em = estimate_error_model(pairs)

    ss = np.random.SeedSequence(seed)
    scenario_seeds = [int(s.generate_state(1)[0]) for s in ss.spawn(len(scenarios))]

    rows = []
    correct: dict[str, int] = {m: 0 for m in methods}
    for scenario, sim_seed in zip(scenarios, scenario_seeds):
        c_a = simulate_counters(scenario.workload, truth, sim_seed)
        actual_report = diagnose(scenario.workload, truth.profile)
        for method in methods:
            if method == "inversion":
                result = invert(c_a, model_profile, cfg)
            else:
                result = mpe(c_a, model_profile, prior, em, cfg)
            inferred_report = diagnose(result.workload, model_profile)
            ok = inferred_report.bottleneck == scenario.expected_bottleneck
            correct[method] += 1 if ok else 0
            rows.append(
                SuiteRow(
                    scenario=scenario.name,
                    method=method,
                    expected_bottleneck=scenario.expected_bottleneck,
                    inferred_bottleneck=inferred_report.bottleneck,
                    bottleneck_correct=ok,
                    expected_cause=scenario.expected_cause,
                    inferred_cause=inferred_report.cause or "",
                    actual_demands=actual_report.demands,
                    inferred_demands=inferred_report.demands,
                    demand_rel_err={
                        r: _rel_err(inferred_report.demands[r], actual_report.demands[r])
                        for r in ("cpu", "disk")
                    },
                    actual_utilizations=actual_report.utilizations,
                    inferred_utilizations=inferred_report.utilizations,
                    objective=result.objective,
                    evaluations=result.evaluations,
                )
            )
    accuracy = {m: correct[m] / len(scenarios) for m in methods}
    return SuiteReport(
        rows=tuple(rows),
        accuracy=accuracy,
        error_model_count=em.sample_count if em is not None else 0,
    )
