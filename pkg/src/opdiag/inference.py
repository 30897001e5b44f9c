"""Workload recovery from observed counters.

Two methods share one derivative-free search engine:

* inversion -- minimize the weighted squared residual between observed and
  predicted counters (weights default to inverse squared counter
  magnitudes, i.e. relative error);
* most probable explanation (MPE) -- maximize the Gaussian error-model log
  likelihood plus the workload log prior.

The model surface has thresholds and integer-granularity steps, so the
search is a bounded simplex method with shrink restarts, run from a Latin
hypercube of start points (prior-guided for MPE, uniform in the bounds box
for inversion).  Everything is deterministic for a given seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .error_model import ErrorModel, log_likelihood
from .model import N_EXTRAS, evaluate_flat, unflatten
from .priors import NEG_INF, WorkloadPrior
from .types import (
    N_COMPONENTS,
    N_COUNTERS,
    WORKLOAD_COMPONENTS,
    CounterVector,
    HardwareProfile,
    InputError,
    WorkloadVector,
)

WEIGHT_FLOOR = 1e-6

# Search-box defaults per flattened component.  The inter-op-time ceiling is
# deliberately low: the slowest representable stream still runs tens of ops
# per second, so no stream can hide below the measurement-bias level while
# polluting the per-cycle demands.
DEFAULT_BOUNDS: dict[str, tuple[float, float]] = {
    "seq_read.inter_op_cpu_s": (0.0, 0.02),
    "seq_read.record_bytes": (0.0, 262144.0),
    "seq_write.inter_op_cpu_s": (0.0, 0.02),
    "seq_write.record_bytes": (0.0, 262144.0),
    "rand_read.inter_op_cpu_s": (0.0, 0.02),
    "rand_read.record_bytes": (0.0, 262144.0),
    "rand_read.extent_bytes": (0.0, 268435456.0),
    "rand_write.inter_op_cpu_s": (0.0, 0.02),
    "rand_write.record_bytes": (0.0, 262144.0),
    "rand_write.extent_bytes": (0.0, 268435456.0),
    "ram_demand_bytes": (0.0, 67108864.0),
    "local_paging_affinity": (0.0, 1.0),
}

# Stream-activation subspaces the per-start cascade explores.  The squared
# residuals on a pure workload's zero counters wall off the "stream absent"
# subspaces, so a simplex wandering the full space rarely reaches them;
# searching each masked subspace directly (frozen components pinned at 0)
# removes that barrier while the unmasked pass keeps mixed workloads
# reachable.
_STREAM_SLOTS = ((0, 1), (2, 3), (4, 5, 6), (7, 8, 9))
_CASCADE_PATTERNS: tuple[tuple[int, ...], ...] = (
    (0, 1, 2, 3),  # every stream live
    (0,),  # seq_read only
    (1,),  # seq_write only
    (2,),  # rand_read only
    (3,),  # rand_write only
    (),  # no streams (memory pressure only)
)
_FULL_PATTERN_SHARE = 0.2  # fraction of the per-start budget for the full space
_RESTART_SHRINK = 0.55  # simplex scale factor between restart passes


def _pattern_free_dims(live: tuple[int, ...], m: int) -> np.ndarray:
    frozen = set()
    for s, slot in enumerate(_STREAM_SLOTS):
        if s not in live:
            frozen.update(slot)
    return np.array([i for i in range(m) if i not in frozen], dtype=int)


@dataclass(frozen=True)
class InferenceConfig:
    start_count: int = 8
    max_evals: int = 37500  # per start, across the whole pattern cascade
    xtol: float = 1e-6  # simplex diameter in unit-cube coordinates
    simplex_scale: float = 0.2
    restarts: int = 5  # extra shrink-restarted simplex passes per sub-start
    objective_tol: float = 1e-8  # "converged" threshold for noiseless fits
    bounds: dict[str, tuple[float, float]] = field(
        default_factory=lambda: dict(DEFAULT_BOUNDS)
    )
    seed: int = 0
    weights: tuple[float, ...] | None = None  # inversion only; None = relative

    def bounds_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.empty(N_COMPONENTS)
        hi = np.empty(N_COMPONENTS)
        for i, name in enumerate(WORKLOAD_COMPONENTS):
            if name not in self.bounds:
                raise InputError(f"bounds missing component {name!r}")
            lo[i], hi[i] = self.bounds[name]
            if not lo[i] < hi[i]:
                raise InputError(f"bounds for {name} need lo < hi")
        return lo, hi

    def validate(self) -> None:
        if self.start_count < 1:
            raise InputError("start_count must be >= 1")
        if self.max_evals < N_COMPONENTS + 2:
            raise InputError("max_evals too small for a simplex pass")
        self.bounds_arrays()


@dataclass(frozen=True)
class StartTrace:
    start: tuple[float, ...]
    value: float
    evaluations: int


@dataclass(frozen=True)
class InferenceResult:
    workload: WorkloadVector
    objective: float  # inversion: minimized residual; mpe: maximized log posterior
    evaluations: int
    method: str
    traces: tuple[StartTrace, ...]

    def to_json_dict(self) -> dict:
        return {
            "method": self.method,
            "objective": self.objective,
            "evaluations": self.evaluations,
            "workload": self.workload.to_dict(),
            "traces": [
                {"start": list(t.start), "value": t.value, "evaluations": t.evaluations}
                for t in self.traces
            ],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "InferenceResult":
        return cls(
            workload=WorkloadVector.from_dict(data["workload"]),
            objective=float(data["objective"]),
            evaluations=int(data["evaluations"]),
            method=data["method"],
            traces=tuple(
                StartTrace(tuple(t["start"]), float(t["value"]), int(t["evaluations"]))
                for t in data.get("traces", [])
            ),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "InferenceResult":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
        return cls.from_json_dict(data)


# ---------------------------------------------------------------------------
# Simplex search.  Decisions are pure f-value comparisons and termination is
# geometric (simplex diameter), so any strictly increasing affine transform
# of the objective leaves the trajectory unchanged.

_RHO, _CHI, _PSI, _SHRINK = 1.0, 2.0, 0.5, 0.5


def _nelder_mead(f, u0, budget, xtol, scale):
    """One simplex pass in the unit cube from u0; returns (u, f(u), evals)."""
    n = u0.shape[0]
    evals = 0

    def call(u):
        nonlocal evals
        evals += 1
        v = f(u)
        return np.inf if np.isnan(v) else v

    verts = [np.clip(u0, 0.0, 1.0)]
    for i in range(n):
        v = verts[0].copy()
        v[i] = v[i] + scale if v[i] + scale <= 1.0 else v[i] - scale
        verts.append(np.clip(v, 0.0, 1.0))
    fvals = []
    for v in verts:
        if evals >= budget:
            fvals.append(np.inf)
            continue
        fvals.append(call(v))

    order = sorted(range(n + 1), key=lambda i: fvals[i])
    verts = [verts[i] for i in order]
    fvals = [fvals[i] for i in order]

    while evals < budget:
        diameter = max(np.max(np.abs(v - verts[0])) for v in verts[1:])
        if diameter < xtol:
            break

        centroid = np.mean(verts[:-1], axis=0)
        direction = centroid - verts[-1]
        xr = np.clip(centroid + _RHO * direction, 0.0, 1.0)
        fr = call(xr)

        if fr < fvals[0]:
            if evals < budget:
                xe = np.clip(centroid + _CHI * direction, 0.0, 1.0)
                fe = call(xe)
                if fe < fr:
                    xr, fr = xe, fe
            verts[-1], fvals[-1] = xr, fr
        elif fr < fvals[-2]:
            verts[-1], fvals[-1] = xr, fr
        else:
            if fr < fvals[-1]:  # outside contraction
                xc = np.clip(centroid + _PSI * _RHO * direction, 0.0, 1.0)
                fc = call(xc) if evals < budget else np.inf
                accept = fc <= fr
            else:  # inside contraction
                xc = np.clip(centroid - _PSI * direction, 0.0, 1.0)
                fc = call(xc) if evals < budget else np.inf
                accept = fc < fvals[-1]
            if accept:
                verts[-1], fvals[-1] = xc, fc
            else:
                for i in range(1, n + 1):
                    verts[i] = np.clip(
                        verts[0] + _SHRINK * (verts[i] - verts[0]), 0.0, 1.0
                    )
                    fvals[i] = call(verts[i]) if evals < budget else np.inf

        order = sorted(range(n + 1), key=lambda i: fvals[i])
        verts = [verts[i] for i in order]
        fvals = [fvals[i] for i in order]

    return verts[0], fvals[0], evals


def _latin_hypercube(rng: np.random.Generator, count: int, dims: int) -> np.ndarray:
    u = np.empty((count, dims))
    for j in range(dims):
        u[:, j] = (rng.permutation(count) + rng.uniform(size=count)) / count
    return u


def _nm_with_restarts(g, u0, budget, cfg: InferenceConfig):
    """Simplex passes with shrink restarts until the budget runs out."""
    n = u0.shape[0]
    u, fv = u0, np.inf
    used = 0
    scale = cfg.simplex_scale
    for _ in range(cfg.restarts + 1):
        if budget - used < n + 2:
            break
        u_new, f_new, n_ev = _nelder_mead(g, u, budget - used, cfg.xtol, scale)
        used += n_ev
        if f_new < fv:
            u, fv = u_new, f_new
        scale *= _RESTART_SHRINK
    return u, fv, used


def _search_subspace(g_full, u0, free, budget, cfg: InferenceConfig):
    """Restricted simplex search: components outside ``free`` stay pinned.

    Runs three deterministic sub-starts derived from the draw (the draw
    itself, its antipode, and its fold) to cover separated local basins
    such as the page-granularity stairs in record size.
    """
    template = u0.copy()

    def g(u_free):
        u = template.copy()
        u[free] = u_free
        return g_full(u)

    s0 = u0[free]
    sub_starts = (s0, 1.0 - s0, np.abs(1.0 - 2.0 * s0))
    per_sub = budget // len(sub_starts)
    best_u, best_f, used = None, np.inf, 0
    for start in sub_starts:
        u_free, fv, n_ev = _nm_with_restarts(g, start, per_sub, cfg)
        used += n_ev
        if best_u is None or fv < best_f:
            best_u, best_f = u_free, fv
    u = template.copy()
    u[free] = best_u
    return u, best_f, used


def multi_start_search(objective, cfg: InferenceConfig, quantile_map=None, cascade=False):
    """Minimize ``objective`` over the bounds box from multiple starts.

    ``objective`` takes a point in the original (bounds) space; +/-inf and
    NaN values are treated as worst-case, never raised.  Start points come
    from a Latin hypercube over the box, optionally pushed through
    ``quantile_map`` to sample them from a prior.  With ``cascade`` each
    start additionally searches every stream-activation subspace of its
    draw and keeps the best.  Deterministic for a given cfg.seed; returns
    (best point, best value, total evaluations, traces) with evaluation
    counts equal to exact objective call counts.
    """
    cfg.validate()
    lo, hi = cfg.bounds_arrays()
    width = hi - lo
    m = lo.shape[0]

    def to_x(u):
        return np.minimum(np.maximum(lo + u * width, lo), hi)

    def g(u):
        return objective(to_x(u))

    rng = np.random.default_rng(cfg.seed)
    starts_u = _latin_hypercube(rng, cfg.start_count, m)
    if quantile_map is not None:
        for k in range(cfg.start_count):
            x = np.minimum(np.maximum(quantile_map(starts_u[k]), lo), hi)
            starts_u[k] = (x - lo) / width

    full_budget = int(cfg.max_evals * _FULL_PATTERN_SHARE)
    masked_budget = (cfg.max_evals - full_budget) // (len(_CASCADE_PATTERNS) - 1)

    best_u, best_f = None, np.inf
    total_evals = 0
    traces = []
    for k in range(cfg.start_count):
        u0 = starts_u[k]
        if not cascade:
            u, fv, used = _nm_with_restarts(g, u0, cfg.max_evals, cfg)
        else:
            u, fv, used = None, np.inf, 0
            for live in _CASCADE_PATTERNS:
                free = _pattern_free_dims(live, m)
                u_start = u0.copy()
                mask = np.ones(m, dtype=bool)
                mask[free] = False
                u_start[mask] = 0.0
                if len(free) == m:
                    u_new, f_new, n_ev = _nm_with_restarts(g, u_start, full_budget, cfg)
                else:
                    u_new, f_new, n_ev = _search_subspace(g, u_start, free, masked_budget, cfg)
                used += n_ev
                if u is None or f_new < fv:
                    u, fv = u_new, f_new
        total_evals += used
        traces.append(StartTrace(tuple(float(v) for v in to_x(u0)), float(fv), used))
        if best_u is None or fv < best_f:
            best_u, best_f = u, fv
    return to_x(best_u), float(best_f), total_evals, tuple(traces)


# ---------------------------------------------------------------------------
# Objectives


def default_weights(c_a: CounterVector) -> np.ndarray:
    """Relative-error weights 1 / max(c_a, floor)^2 per counter."""
    c = c_a.as_array()
    return 1.0 / np.maximum(c, WEIGHT_FLOOR) ** 2


def _weights_from_cfg(cfg: InferenceConfig, c_a: CounterVector) -> np.ndarray:
    if cfg.weights is None:
        return default_weights(c_a)
    w = np.asarray(cfg.weights, dtype=float)
    if w.shape != (N_COUNTERS,):
        raise InputError(f"weights must have length {N_COUNTERS}")
    if np.any(w < 0):
        raise InputError("weights must be nonnegative")
    if not np.any(w > 0):
        raise InputError("at least one weight must be positive")
    return w


def invert(c_a: CounterVector, hw: HardwareProfile, cfg: InferenceConfig) -> InferenceResult:
    """Weighted least-squares workload recovery."""
    weights = _weights_from_cfg(cfg, c_a)
    prof = hw.as_array()
    ca = c_a.as_array()

    def objective(x):
        counters = np.empty(N_COUNTERS)
        extras = np.empty(N_EXTRAS)
        if evaluate_flat(x, prof, counters, extras) != 0:
            return np.inf
        r = counters - ca
        return float(weights @ (r * r))

    x, fv, evals, traces = multi_start_search(objective, cfg, cascade=True)
    return InferenceResult(
        workload=unflatten(x),
        objective=fv,
        evaluations=evals,
        method="inversion",
        traces=traces,
    )


def mpe(
    c_a: CounterVector,
    hw: HardwareProfile,
    prior: WorkloadPrior,
    em: ErrorModel,
    cfg: InferenceConfig,
) -> InferenceResult:
    """Most probable explanation: maximize log likelihood + log prior.

    The reported objective is the log posterior up to the additive
    evidence constant, which is never computed.
    """
    em._cho  # validate positive definiteness up front
    prof = hw.as_array()
    ca = c_a.as_array()

    def objective(x):
        lp = prior.log_prior_flat(x)
        if lp == NEG_INF:
            return np.inf
        counters = np.empty(N_COUNTERS)
        extras = np.empty(N_EXTRAS)
        if evaluate_flat(x, prof, counters, extras) != 0:
            return np.inf
        return -(log_likelihood(ca, counters, em) + lp)

    x, fv, evals, traces = multi_start_search(
        objective, cfg, quantile_map=prior.quantile_flat, cascade=True
    )
    return InferenceResult(
        workload=unflatten(x),
        objective=-fv,
        evaluations=evals,
        method="mpe",
        traces=traces,
    )
