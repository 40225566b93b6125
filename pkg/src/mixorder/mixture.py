"""Gaussian mixture representation, log-domain density evaluation, sampling.

All likelihood arithmetic stays in the log domain throughout the package:
the test statistics routinely reach magnitudes like e^300 and p-values below
double-precision underflow, so linear-domain products are never formed.

Domain objects validate their invariants at construction and are immutable
afterwards; they are safe to share across threads and processes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import (
    DimensionError,
    EmptyDataError,
    InvariantError,
    PositiveDefiniteError,
)

_LOG_2PI = float(np.log(2.0 * np.pi))

WEIGHT_SUM_TOL = 1e-10
SYMMETRY_RTOL = 1e-12


def _readonly(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GaussianComponent:
    """One mixture component: mean vector and full covariance matrix.

    The covariance must be symmetric (relative tolerance 1e-12) and positive
    definite; both are checked once here so downstream code can rely on a
    Cholesky factorisation existing.
    """

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = _readonly(self.mean)
        cov = _readonly(self.covariance)
        if mean.ndim != 1:
            raise DimensionError(f"mean must be a vector, got shape {mean.shape}")
        d = mean.shape[0]
        if cov.shape != (d, d):
            raise DimensionError(
                f"covariance shape {cov.shape} does not match mean dimension {d}")
        if not np.all(np.isfinite(mean)) or not np.all(np.isfinite(cov)):
            raise InvariantError("component parameters must be finite")
        scale = np.max(np.abs(cov))
        if scale > 0 and np.max(np.abs(cov - cov.T)) > SYMMETRY_RTOL * scale:
            raise PositiveDefiniteError("covariance is not symmetric")
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise PositiveDefiniteError(
                f"covariance is not positive definite: {exc}") from exc
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class MixtureParams:
    """Weights plus components of a g-component Gaussian mixture."""

    weights: np.ndarray
    components: tuple[GaussianComponent, ...]

    def __post_init__(self):
        weights = _readonly(self.weights)
        comps = tuple(self.components)
        if weights.ndim != 1 or len(comps) != weights.shape[0]:
            raise DimensionError("need one weight per component")
        if len(comps) == 0:
            raise InvariantError("a mixture needs at least one component")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise InvariantError("weights must be nonnegative and finite")
        if abs(float(weights.sum()) - 1.0) > WEIGHT_SUM_TOL:
            raise InvariantError(
                f"weights sum to {weights.sum()!r}, not 1 within {WEIGHT_SUM_TOL}")
        d = comps[0].dim
        for c in comps:
            if c.dim != d:
                raise DimensionError("all components must share one dimension")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "components", comps)

    @property
    def g(self) -> int:
        return len(self.components)

    @property
    def dim(self) -> int:
        return self.components[0].dim

    def means_array(self) -> np.ndarray:
        return np.array([c.mean for c in self.components])

    def covs_array(self) -> np.ndarray:
        return np.array([c.covariance for c in self.components])


@dataclass(frozen=True)
class Dataset:
    """An n-by-d matrix of observations; entries must be finite."""

    rows: np.ndarray

    def __post_init__(self):
        rows = _readonly(self.rows)
        if rows.ndim == 1:
            rows = _readonly(rows.reshape(-1, 1))
        if rows.ndim != 2:
            raise DimensionError(f"rows must be 2-d, got shape {rows.shape}")
        if rows.shape[0] < 1 or rows.shape[1] < 1:
            raise EmptyDataError("dataset must have at least one row and column")
        if not np.all(np.isfinite(rows)):
            raise InvariantError("dataset entries must all be finite")
        object.__setattr__(self, "rows", rows)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]

    def subset(self, indices) -> "Dataset":
        return Dataset(self.rows[np.asarray(indices, dtype=np.intp)])


def log_density_gaussian(x, comp: GaussianComponent) -> float:
    """Gaussian log density at x, computed through a Cholesky factor."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.shape != comp.mean.shape:
        raise DimensionError(
            f"x has shape {x.shape}, component has dimension {comp.dim}")
    L = np.linalg.cholesky(comp.covariance)
    y = np.linalg.solve(L, x - comp.mean)
    return float(-0.5 * (comp.dim * _LOG_2PI + y @ y) - np.log(np.diag(L)).sum())


def _raw_row_log_densities(X, weights, means, covs):
    """Per-row mixture log density for raw float64 arrays (kernel-backed).

    Components with weight exactly 0 are dropped before the kernel call so
    they contribute nothing, no matter what their parameters are.
    """
    weights = np.asarray(weights, dtype=np.float64)
    live = weights > 0.0
    if not np.any(live):
        raise InvariantError("all mixture weights are zero")
    if not np.all(live):
        weights = weights[live]
        means = np.asarray(means)[live]
        covs = np.asarray(covs)[live]
    log_dens = backend.component_log_densities(X, means, covs)
    wlog = log_dens + np.log(weights)
    row_max = np.max(wlog, axis=1)
    return row_max + np.log(np.exp(wlog - row_max[:, None]).sum(axis=1))


def log_mixture_density(x, params: MixtureParams) -> float:
    """log of sum_z pi_z phi(x; mu_z, Sigma_z), via log-sum-exp."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.shape[0] != params.dim:
        raise DimensionError(
            f"x has dimension {x.shape[0]}, mixture has dimension {params.dim}")
    out = _raw_row_log_densities(
        x[None, :], params.weights, params.means_array(), params.covs_array())
    return float(out[0])


def log_likelihood(data: Dataset, params: MixtureParams) -> float:
    """Sum of per-row mixture log densities."""
    if data.n == 0:
        raise EmptyDataError("cannot evaluate the likelihood of no data")
    if data.d != params.dim:
        raise DimensionError(
            f"data has dimension {data.d}, mixture has dimension {params.dim}")
    rows = _raw_row_log_densities(
        data.rows, params.weights, params.means_array(), params.covs_array())
    return float(rows.sum())


def sample(params: MixtureParams, n: int, rng: np.random.Generator) -> Dataset:
    """Draw n rows: component index from the weights, then the Gaussian.

    Reproducible given the generator state; the draws are made in component
    order so the output is independent of how the rng splits labels.
    """
    if n < 1:
        raise InvariantError("n must be at least 1")
    labels = rng.choice(params.g, size=n, p=params.weights)
    out = np.empty((n, params.dim), dtype=np.float64)
    for z, comp in enumerate(params.components):
        idx = np.nonzero(labels == z)[0]
        if idx.size == 0:
            continue
        L = np.linalg.cholesky(comp.covariance)
        noise = rng.standard_normal((idx.size, params.dim))
        out[idx] = comp.mean + noise @ L.T
    return Dataset(out)
