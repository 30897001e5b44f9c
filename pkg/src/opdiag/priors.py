"""Prior distributions over workload parameters.

Components are marginally independent; each is either uniform or a shifted
lognormal parameterized by logarithmic mean, logarithmic standard
deviation, and a minimum value.  The shipped defaults
(data/default_prior.json) are assessed fixture values: lognormals on sizes,
extents, and RAM demand (with minimums shifted slightly below zero so that
an absent stream, component value 0, stays inside the support) and uniforms
on inter-operation times and paging affinity.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from typing import Union

import numpy as np
from scipy.special import ndtri

from .model import flatten, unflatten
from .types import N_COMPONENTS, WORKLOAD_COMPONENTS, InputError, WorkloadVector

NEG_INF = float("-inf")

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise InputError("uniform prior needs lo < hi")

    def log_pdf(self, x: float) -> float:
        if x < self.lo or x > self.hi:
            return NEG_INF
        return -math.log(self.hi - self.lo)

    def sample(self, rng: np.random.Generator) -> float:
        return float(rng.uniform(self.lo, self.hi))

    def quantile(self, u: float) -> float:
        return self.lo + u * (self.hi - self.lo)

    def to_json_dict(self) -> dict:
        return {"dist": "uniform", "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class Lognormal:
    """Shifted lognormal: ln(x - minimum) ~ N(mu, sigma^2) on (minimum, inf)."""

    mu: float
    sigma: float
    minimum: float = 0.0

    def __post_init__(self):
        if self.sigma <= 0:
            raise InputError("lognormal prior needs sigma > 0")

    def log_pdf(self, x: float) -> float:
        d = x - self.minimum
        if d <= 0:
            return NEG_INF
        z = (math.log(d) - self.mu) / self.sigma
        return -math.log(self.sigma * d) - _LOG_SQRT_2PI - 0.5 * z * z

    def sample(self, rng: np.random.Generator) -> float:
        return self.minimum + math.exp(self.mu + self.sigma * rng.standard_normal())

    def quantile(self, u: float) -> float:
        return self.minimum + math.exp(self.mu + self.sigma * float(ndtri(u)))

    @property
    def mode(self) -> float:
        return self.minimum + math.exp(self.mu - self.sigma**2)

    @property
    def mean(self) -> float:
        return self.minimum + math.exp(self.mu + 0.5 * self.sigma**2)

    def to_json_dict(self) -> dict:
        return {
            "dist": "lognormal",
            "mu": self.mu,
            "sigma": self.sigma,
            "minimum": self.minimum,
        }


Component = Union[Uniform, Lognormal]


def _component_from_json(name: str, data: dict) -> Component:
    kind = data.get("dist")
    if kind == "uniform":
        return Uniform(lo=float(data["lo"]), hi=float(data["hi"]))
    if kind == "lognormal":
        return Lognormal(
            mu=float(data["mu"]),
            sigma=float(data["sigma"]),
            minimum=float(data.get("minimum", 0.0)),
        )
    raise InputError(f"{name}: unknown distribution {kind!r}")


@dataclass(frozen=True)
class WorkloadPrior:
    """One distribution per flattened workload component."""

    components: tuple[Component, ...]

    def __post_init__(self):
        if len(self.components) != N_COMPONENTS:
            raise InputError(
                f"prior needs {N_COMPONENTS} components, got {len(self.components)}"
            )

    def component(self, name: str) -> Component:
        return self.components[WORKLOAD_COMPONENTS.index(name)]

    def log_prior_flat(self, v) -> float:
        v = np.asarray(v, dtype=float)
        if v.shape != (N_COMPONENTS,):
            raise InputError(f"flattened workload must have length {N_COMPONENTS}")
        total = 0.0
        for dist, x in zip(self.components, v):
            lp = dist.log_pdf(float(x))
            if lp == NEG_INF:
                return NEG_INF
            total += lp
        return total

    def quantile_flat(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return np.array(
            [dist.quantile(float(ui)) for dist, ui in zip(self.components, u)]
        )

    def to_json_dict(self) -> dict:
        return {
            "schema_version": 1,
            "components": {
                name: dist.to_json_dict()
                for name, dist in zip(WORKLOAD_COMPONENTS, self.components)
            },
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "WorkloadPrior":
        entries = data.get("components")
        if not isinstance(entries, dict):
            raise InputError("prior JSON needs a 'components' object")
        components = []
        for name in WORKLOAD_COMPONENTS:
            if name not in entries:
                raise InputError(f"prior is missing component {name!r}")
            components.append(_component_from_json(name, entries[name]))
        return cls(components=tuple(components))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "WorkloadPrior":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
        return cls.from_json_dict(data)


def log_prior(w, prior: WorkloadPrior) -> float:
    """Sum of componentwise log densities; -inf if any component is outside
    its support."""
    v = flatten(w) if isinstance(w, WorkloadVector) else w
    return prior.log_prior_flat(v)


def sample_prior(prior: WorkloadPrior, seed) -> WorkloadVector:
    """Draw one workload from the prior, deterministically for a given seed.

    Components are clamped to be nonnegative and random-stream extents are
    floored at their record size so the draw is always a valid workload.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    v = np.array([dist.sample(rng) for dist in prior.components])
    v = np.maximum(v, 0.0)
    if v[5] > 0:
        v[6] = max(v[6], v[5])  # rand_read extent >= record
    if v[8] > 0:
        v[9] = max(v[9], v[8])  # rand_write extent >= record
    v[11] = min(v[11], 1.0)
    return unflatten(v)


def default_prior() -> WorkloadPrior:
    """Load the shipped default prior configuration."""
    text = resources.files("opdiag").joinpath("data/default_prior.json").read_text()
    return WorkloadPrior.from_json_dict(json.loads(text))
