"""Random mixture generation with a calibrated pairwise-overlap level.

The separation knob is the average pairwise misclassification overlap: for
an ordered component pair (i, j), omega_{j|i} is the probability that a draw
from component i is more plausible under weighted component j, and the
summary statistic averages omega_{j|i} + omega_{i|j} over unordered pairs.
Rather than computing these probabilities analytically, this module
estimates them by Monte Carlo and calibrates a common covariance scale by
bisection until the estimate hits the requested level. The achieved value is
always recorded alongside the parameters so scenarios stay auditable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    DimensionError,
    InsufficientComponentsError,
    InvariantError,
    OverlapUnreachableError,
)
from .mixture import GaussianComponent, MixtureParams, _raw_row_log_densities, sample

# Relative half-width of the acceptance band around the overlap target.
OVERLAP_REL_TOL = 0.05
_MAX_EVALS = 60
_TIE_TOL = 1e-9


@dataclass(frozen=True)
class GenSpec:
    """Recipe for one random mixture: order, dimension, overlap target.

    ``min_weight`` defaults to 1/(2 g0). The mean box and eigenvalue range
    rarely need changing; they are exposed for overlap targets the defaults
    cannot reach.
    """

    g0: int
    d: int
    omega_bar_target: float
    seed: int
    min_weight: Optional[float] = None
    mc_samples: int = 20000
    mean_low: float = 0.0
    mean_high: float = 1.0
    eig_low: float = 0.05
    eig_high: float = 1.0

    def __post_init__(self):
        if self.g0 < 2:
            raise InsufficientComponentsError(
                "overlap control needs at least 2 components")
        if self.d < 1:
            raise InvariantError("d must be >= 1")
        if not (0.0 < self.omega_bar_target < 1.0):
            raise InvariantError("omega_bar_target must lie in (0, 1)")
        if self.mc_samples < 1:
            raise InvariantError("mc_samples must be positive")
        mw = self.resolved_min_weight
        if not (0.0 <= mw <= 1.0 / self.g0):
            raise InvariantError("min_weight must lie in [0, 1/g0]")
        if not (self.mean_low < self.mean_high):
            raise InvariantError("mean box is empty")
        if not (0.0 < self.eig_low <= self.eig_high):
            raise InvariantError("eigenvalue range is invalid")

    @property
    def resolved_min_weight(self) -> float:
        if self.min_weight is None:
            return 1.0 / (2.0 * self.g0)
        return self.min_weight


@dataclass(frozen=True)
class GeneratedMixture:
    params: MixtureParams
    achieved_omega_bar: float
    target_omega_bar: float
    cov_scale: float

    def to_json_dict(self) -> dict:
        from .dataio import params_to_json_dict

        out = params_to_json_dict(self.params)
        out["achieved_omega_bar"] = self.achieved_omega_bar
        out["target"] = self.target_omega_bar
        out["cov_scale"] = self.cov_scale
        return out


@dataclass(frozen=True)
class KLEstimate:
    value: float
    std_error: float


def _conditional_overlap(logw_i, mu_i, cov_i, logw_j, mu_j, cov_j, Z):
    """Fraction of N(mu_i, cov_i) draws that component j explains at least
    as well; Z holds the standard-normal innovations, one row per draw."""
    L_i = np.linalg.cholesky(cov_i)
    L_j = np.linalg.cholesky(cov_j)
    quad_i = np.einsum("ij,ij->i", Z, Z)
    lp_i = logw_i - np.log(np.diag(L_i)).sum() - 0.5 * quad_i
    X = mu_i + Z @ L_i.T
    Y = (X - mu_j) @ np.linalg.inv(L_j).T
    quad_j = np.einsum("ij,ij->i", Y, Y)
    lp_j = logw_j - np.log(np.diag(L_j)).sum() - 0.5 * quad_j
    # Ties count as misclassification; the tolerance only matters when the
    # two sides are equal up to rounding (e.g. identical components).
    tol = _TIE_TOL * (1.0 + np.abs(lp_i))
    return float(np.mean(lp_j >= lp_i - tol))


def _overlap_from_arrays(weights, means, covs, m, pair_rng):
    g = len(weights)
    with np.errstate(divide="ignore"):
        logw = np.log(weights)
    raw = 0.0
    for i in range(g):
        for j in range(g):
            if i == j:
                continue
            Z = pair_rng(i, j).standard_normal((m, means.shape[1]))
            raw += _conditional_overlap(
                logw[i], means[i], covs[i], logw[j], means[j], covs[j], Z)
    return raw * 2.0 / (g * (g - 1))


def pairwise_overlap_mc(params: MixtureParams, m: int, rng: np.random.Generator,
                        with_flag: bool = False):
    """Monte Carlo estimate of the average pairwise overlap in [0, 1].

    The raw average of omega_{j|i} + omega_{i|j} over unordered pairs can
    exceed 1 only for (near-)identical components; such estimates are
    clamped to 1 and, with ``with_flag=True``, reported as degenerate.
    """
    if params.g < 2:
        raise InsufficientComponentsError(
            "pairwise overlap needs at least 2 components")
    if m < 1:
        raise InvariantError("m must be positive")
    means = params.means_array()
    covs = params.covs_array()
    streams = rng.spawn(params.g * params.g)
    g = params.g
    raw = _overlap_from_arrays(
        params.weights, means, covs, m,
        lambda i, j: streams[i * g + j])
    clamped = min(raw, 1.0)
    if with_flag:
        return clamped, raw > 1.0
    return clamped


def _sample_simplex_weights(g0, min_weight, rng):
    for _ in range(200000):
        w = rng.exponential(size=g0)
        w /= w.sum()
        if w.min() >= min_weight:
            return w
    raise InvariantError(
        f"could not draw weights with min >= {min_weight} for g0={g0}")


def _random_covariance(d, eig_low, eig_high, rng):
    lam = np.exp(rng.uniform(np.log(eig_low), np.log(eig_high), size=d))
    if d == 1:
        return np.array([[lam[0]]])
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    q = q * np.sign(np.diag(r))
    cov = (q * lam) @ q.T
    return 0.5 * (cov + cov.T)


def _calibrate_scale(weights, means, covs, target, m, calib_seed):
    """Common covariance multiplier whose overlap estimate hits the target.

    Uses common random numbers: the innovations for pair (i, j) are a pure
    function of (calib_seed, i, j), so the objective is a deterministic,
    effectively monotone function of the scale and bisection is stable.
    """

    def pair_rng(i, j):
        return np.random.default_rng(
            np.random.SeedSequence([calib_seed, i, j]))

    def f(c):
        return _overlap_from_arrays(weights, means, c * covs, m, pair_rng)

    band = OVERLAP_REL_TOL * target
    evals = 0

    def measure(c):
        nonlocal evals
        evals += 1
        if evals > _MAX_EVALS:
            raise OverlapUnreachableError(
                f"overlap {target} not reached within {_MAX_EVALS} evaluations",
                achieved_low=f_lo, achieved_high=f_hi)
        return f(c)

    c = 1.0
    val = f(c)
    evals = 1
    if abs(val - target) <= band:
        return c, val
    if val < target:
        lo, f_lo = c, val
        hi, f_hi = c, val
        while f_hi < target:
            hi *= 4.0
            f_hi = measure(hi)
            if hi > 1e12 and f_hi < target:
                raise OverlapUnreachableError(
                    f"overlap saturates near {f_hi:.4g}, below target {target}",
                    achieved_low=f_lo, achieved_high=f_hi)
    else:
        hi, f_hi = c, val
        lo, f_lo = c, val
        while f_lo > target:
            lo /= 4.0
            f_lo = measure(lo)
            if lo < 1e-12 and f_lo > target:
                raise OverlapUnreachableError(
                    f"overlap stays above target {target} even at scale {lo:.3g}",
                    achieved_low=f_lo, achieved_high=f_hi)

    best_c, best_val = (lo, f_lo) if abs(f_lo - target) < abs(f_hi - target) else (hi, f_hi)
    while evals < _MAX_EVALS:
        mid = math.sqrt(lo * hi)
        f_mid = measure(mid)
        if abs(f_mid - target) < abs(best_val - target):
            best_c, best_val = mid, f_mid
        if abs(f_mid - target) <= band:
            return mid, f_mid
        if f_mid < target:
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
        if hi / lo < 1.0 + 1e-12:
            break
    if abs(best_val - target) <= band:
        return best_c, best_val
    raise OverlapUnreachableError(
        f"bisection stalled at overlap {best_val:.5g} for target {target}",
        achieved_low=f_lo, achieved_high=f_hi)


def generate_mixture_params(spec: GenSpec,
                            rng: Optional[np.random.Generator] = None) -> GeneratedMixture:
    """Draw mixture parameters whose overlap estimate matches the target.

    Weights are uniform on the simplex rejection-sampled to the minimum
    weight; means are uniform in the mean box; covariance shapes use random
    orthogonal eigenvectors with log-uniform eigenvalues, then all
    covariances are scaled by one calibrated factor.
    """
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    weights = _sample_simplex_weights(spec.g0, spec.resolved_min_weight, rng)
    means = rng.uniform(spec.mean_low, spec.mean_high, size=(spec.g0, spec.d))
    covs = np.stack([
        _random_covariance(spec.d, spec.eig_low, spec.eig_high, rng)
        for _ in range(spec.g0)])
    calib_seed = int(rng.integers(2**63))
    scale, achieved = _calibrate_scale(
        weights, means, covs, spec.omega_bar_target, spec.mc_samples, calib_seed)
    params = MixtureParams(
        weights=weights,
        components=tuple(
            GaussianComponent(means[z], scale * covs[z]) for z in range(spec.g0)),
    )
    return GeneratedMixture(
        params=params,
        achieved_omega_bar=achieved,
        target_omega_bar=spec.omega_bar_target,
        cov_scale=scale,
    )


def kl_mc(f0: MixtureParams, f: MixtureParams, m: int,
          rng: np.random.Generator) -> KLEstimate:
    """Monte Carlo Kullback-Leibler divergence estimate D(f0, f) with SE."""
    if f0.dim != f.dim:
        raise DimensionError("mixtures must share a dimension")
    if m < 2:
        raise InvariantError("m must be >= 2")
    draws = sample(f0, m, rng)
    lp0 = _raw_row_log_densities(
        draws.rows, f0.weights, f0.means_array(), f0.covs_array())
    lp1 = _raw_row_log_densities(
        draws.rows, f.weights, f.means_array(), f.covs_array())
    diff = lp0 - lp1
    return KLEstimate(value=float(diff.mean()),
                      std_error=float(diff.std(ddof=1) / math.sqrt(m)))
