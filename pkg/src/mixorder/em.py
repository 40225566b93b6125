"""Maximum-likelihood fitting of Gaussian mixtures by EM with restarts.

Each restart starts from k-means++ seeded means, the pooled data covariance,
and uniform weights, then iterates kernel-backed E/M sweeps until the
relative log-likelihood change drops below ``rel_tol``. The best restart by
final log-likelihood wins. A restart whose smallest weight underflows or
whose covariances lose positive definiteness is discarded and reseeded; if
every restart collapses the fit raises DegenerateFitError.

Covariance regularization: every M-step adds ``cov_ridge * (tr(S)/d) * I``
to each component covariance, where S is the covariance of the data being
fitted. Tying the ridge to the data scale (rather than to the shrinking
per-component scatter) is what keeps the mixture likelihood bounded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import DegenerateFitError, InsufficientDataError, InvariantError
from .mixture import Dataset, GaussianComponent, MixtureParams, _raw_row_log_densities

COLLAPSE_WEIGHT = 1e-10
_RESEEDS_PER_RESTART = 4
MONOTONE_SLACK = 1e-9


@dataclass(frozen=True)
class FitConfig:
    """Knobs for one EM fit; ``seed`` makes the whole fit deterministic."""

    restarts: int = 8
    max_iters: int = 1000
    rel_tol: float = 1e-8
    cov_ridge: float = 1e-6
    min_weight_floor: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.restarts < 1:
            raise InvariantError("restarts must be >= 1")
        if self.rel_tol <= 0:
            raise InvariantError("rel_tol must be positive")
        if self.max_iters < 1:
            raise InvariantError("max_iters must be >= 1")
        if self.cov_ridge < 0 or self.min_weight_floor < 0:
            raise InvariantError("ridge and weight floor must be nonnegative")


@dataclass(frozen=True)
class FitResult:
    """Outcome of fit_mle; ``loglik_path`` is the per-iteration objective."""

    params: MixtureParams
    log_likelihood: float
    converged: bool
    iterations: int
    restart_index: int
    loglik_path: tuple[float, ...] = ()


def _kmeanspp_means(X, g, rng):
    n = X.shape[0]
    centers = np.empty((g, X.shape[1]), dtype=np.float64)
    centers[0] = X[rng.integers(n)]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for z in range(1, g):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)  # all remaining points coincide
        centers[z] = X[idx]
        d2 = np.minimum(d2, ((X - centers[z]) ** 2).sum(axis=1))
    return centers


def _run_em(X, g, cfg, rng, ridge_add, pooled_cov):
    n, d = X.shape
    weights = np.full(g, 1.0 / g)
    means = _kmeanspp_means(X, g, rng)
    covs = np.broadcast_to(pooled_cov, (g, d, d)).copy()

    path = []
    prev = -np.inf
    converged = False
    iterations = 0
    for _ in range(cfg.max_iters):
        ll, weights, means, covs = backend.em_step(X, weights, means, covs, ridge_add)
        iterations += 1
        path.append(ll)
        if ll < prev:
            # Exact EM never decreases the objective. With a ridge the
            # M-step is perturbed off the maximizer, so a tiny dip can
            # appear on a converged plateau; treat that as convergence and
            # only crash on decreases no rounding or ridge can explain.
            gross = MONOTONE_SLACK if ridge_add == 0.0 else 1e-3 * max(1.0, abs(prev))
            if ll < prev - gross:
                raise AssertionError(
                    f"EM objective decreased from {prev} to {ll}")
            converged = True
            break
        if cfg.min_weight_floor > 0.0:
            floored = np.maximum(weights, cfg.min_weight_floor)
            weights = floored / floored.sum()
        elif weights.min() < COLLAPSE_WEIGHT:
            raise np.linalg.LinAlgError("component weight underflow")
        if np.isfinite(prev) and abs(ll - prev) <= cfg.rel_tol * max(abs(ll), 1.0):
            converged = True
            break
        prev = ll

    final_ll = float(_raw_row_log_densities(X, weights, means, covs).sum())
    path.append(final_ll)
    return final_ll, weights, means, covs, converged, iterations, tuple(path)


def fit_mle(data: Dataset, g: int, cfg: FitConfig) -> FitResult:
    """Best-of-restarts EM estimate of the g-component mixture MLE."""
    if g < 1:
        raise InvariantError("g must be >= 1")
    if data.n < g:
        raise InsufficientDataError(
            f"cannot fit {g} components to {data.n} rows")
    X = np.ascontiguousarray(data.rows, dtype=np.float64)
    n, d = X.shape

    centered = X - X.mean(axis=0)
    pooled = (centered.T @ centered) / n
    pooled = 0.5 * (pooled + pooled.T)
    ridge_add = cfg.cov_ridge * (np.trace(pooled) / d)
    pooled_init = pooled + np.eye(d) * max(ridge_add, 1e-12 * (1.0 + np.trace(pooled) / d))

    # Seeds depend only on (cfg.seed, g) so a fit is reproducible regardless
    # of when or where it runs; reseeds for collapsed restarts come from the
    # same spawn sequence.
    children = np.random.SeedSequence([int(cfg.seed) & (2**63 - 1), int(g)]).spawn(
        cfg.restarts * _RESEEDS_PER_RESTART)

    best = None
    child_iter = iter(children)
    for restart in range(cfg.restarts):
        result = None
        for _attempt in range(_RESEEDS_PER_RESTART):
            try:
                rng = np.random.default_rng(next(child_iter))
            except StopIteration:
                break
            try:
                result = _run_em(X, g, cfg, rng, ridge_add, pooled_init)
                break
            except np.linalg.LinAlgError:
                continue  # collapsed: discard and reseed
        if result is None:
            continue
        final_ll, weights, means, covs, converged, iterations, path = result
        if best is None or final_ll > best[0]:
            best = (final_ll, weights, means, covs, converged, iterations, restart, path)

    if best is None:
        raise DegenerateFitError(
            f"all {cfg.restarts} EM restarts collapsed for g={g} "
            f"(n={n}, d={d}, cov_ridge={cfg.cov_ridge})")

    final_ll, weights, means, covs, converged, iterations, restart, path = best
    weights = weights / weights.sum()  # exact renormalisation for the invariant check
    params = MixtureParams(
        weights=weights,
        components=tuple(GaussianComponent(means[z], covs[z]) for z in range(g)),
    )
    return FitResult(
        params=params,
        log_likelihood=final_ll,
        converged=converged,
        iterations=iterations,
        restart_index=restart,
        loglik_path=path,
    )
