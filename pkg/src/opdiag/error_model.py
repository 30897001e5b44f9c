"""Multivariate Gaussian model of counter prediction error.

The residual between actual and predicted counters is modeled as
e ~ N(mu_eps, Sigma).  Both moments are estimated from controlled runs
(sample mean and unbiased sample covariance); diagonal shrinkage keeps
Sigma positive definite at small sample counts.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .types import COUNTER_NAMES, N_COUNTERS, CounterVector, InputError

DEFAULT_SHRINKAGE = 0.1
VARIANCE_FLOOR = 1e-12

_LOG_2PI = float(np.log(2.0 * np.pi))


class NotPositiveDefiniteError(InputError):
    """Covariance is not positive definite even after shrinkage."""


@dataclass(frozen=True)
class ErrorModel:
    """Mean error vector and covariance of the counter residuals."""

    mu_eps: np.ndarray
    sigma: np.ndarray
    sample_count: int
    shrinkage: float

    @property
    def n(self) -> int:
        return self.mu_eps.shape[0]

    @cached_property
    def _cho(self):
        try:
            return cho_factor(self.sigma, lower=True)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError(
                "covariance is not positive definite; increase shrinkage"
            ) from exc

    @cached_property
    def _log_det(self) -> float:
        c, _ = self._cho
        return 2.0 * float(np.sum(np.log(np.diag(c))))

    def to_json_dict(self) -> dict:
        return {
            "mu_eps": [float(v) for v in self.mu_eps],
            "sigma": [[float(v) for v in row] for row in self.sigma],
            "sample_count": self.sample_count,
            "shrinkage": self.shrinkage,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "ErrorModel":
        mu = np.asarray(data["mu_eps"], dtype=float)
        sigma = np.asarray(data["sigma"], dtype=float)
        if sigma.shape != (mu.shape[0], mu.shape[0]):
            raise InputError("sigma shape does not match mu_eps")
        return cls(
            mu_eps=mu,
            sigma=sigma,
            sample_count=int(data["sample_count"]),
            shrinkage=float(data["shrinkage"]),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "ErrorModel":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
        return cls.from_json_dict(data)


def _as_error_matrix(pairs) -> np.ndarray:
    errors = []
    for actual, predicted in pairs:
        a = actual.as_array() if isinstance(actual, CounterVector) else np.asarray(actual, dtype=float)
        p = predicted.as_array() if isinstance(predicted, CounterVector) else np.asarray(predicted, dtype=float)
        if a.shape != p.shape:
            raise InputError("actual/predicted dimension mismatch")
        errors.append(a - p)
    return np.array(errors)


def estimate_error_model(pairs, shrinkage: float = DEFAULT_SHRINKAGE) -> ErrorModel:
    """Estimate the error model from (actual, predicted) counter pairs.

    mu_eps is the sample mean error; sigma is the unbiased sample covariance
    plus ``shrinkage * diag(sample variances + floor)``.  Raises if fewer
    than two pairs are given or the result is still not positive definite.
    """
    if shrinkage < 0:
        raise InputError("shrinkage must be >= 0")
    errors = _as_error_matrix(pairs)
    count = errors.shape[0]
    if count < 2:
        raise InputError("need at least 2 pairs to estimate an error model")
    mu = errors.mean(axis=0)
    centered = errors - mu
    sigma = centered.T @ centered / (count - 1)
    sigma = (sigma + sigma.T) / 2.0  # exact symmetry
    sigma = sigma + shrinkage * np.diag(np.diag(sigma) + VARIANCE_FLOOR)
    em = ErrorModel(mu_eps=mu, sigma=sigma, sample_count=count, shrinkage=shrinkage)
    em._cho  # fail fast if not positive definite
    return em


def log_likelihood(c_a, c_p, em: ErrorModel) -> float:
    """Log density of the observed counters given the prediction.

    Evaluates -n/2 ln(2 pi) - 1/2 ln|Sigma| - 1/2 (r - mu)' Sigma^-1 (r - mu)
    with r = c_a - c_p, via the cached Cholesky factorization (Sigma is
    never inverted explicitly).
    """
    a = c_a.as_array() if isinstance(c_a, CounterVector) else np.asarray(c_a, dtype=float)
    p = c_p.as_array() if isinstance(c_p, CounterVector) else np.asarray(c_p, dtype=float)
    r = (a - p) - em.mu_eps
    if r.shape != (em.n,):
        raise InputError("counter dimension does not match the error model")
    quad = float(r @ cho_solve(em._cho, r))
    return -0.5 * (em.n * _LOG_2PI + em._log_det + quad)


# ---------------------------------------------------------------------------
# CSV I/O: 28 columns, actual then predicted, schema order.

_PAIR_HEADER = [f"actual.{n}" for n in COUNTER_NAMES] + [
    f"predicted.{n}" for n in COUNTER_NAMES
]


def load_error_pairs(path) -> list[tuple[CounterVector, CounterVector]]:
    pairs = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise InputError(f"{path}: empty file")
        if [h.strip() for h in header] != _PAIR_HEADER:
            raise InputError(f"{path}: line 1: expected 28 actual/predicted columns")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 2 * N_COUNTERS:
                raise InputError(
                    f"{path}: line {lineno}: expected {2 * N_COUNTERS} columns"
                )
            try:
                values = [float(c) for c in row]
            except ValueError as exc:
                raise InputError(f"{path}: line {lineno}: {exc}") from exc
            pairs.append(
                (
                    CounterVector.from_array(values[:N_COUNTERS]),
                    CounterVector.from_array(values[N_COUNTERS:]),
                )
            )
    return pairs


def write_error_pairs(path, pairs) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_PAIR_HEADER)
        for actual, predicted in pairs:
            writer.writerow(
                [repr(v) for v in actual.as_array()]
                + [repr(v) for v in predicted.as_array()]
            )
