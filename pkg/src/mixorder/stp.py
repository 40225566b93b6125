"""Sequential order selection with a confidence guarantee, plus AIC/BIC.

The sequential procedure tests the 1-component null, then the 2-component
null, and so on, each at level alpha on the same data split, stopping at the
first non-rejection. Because the model classes are nested, this is exactly a
closed testing procedure, so the output g_hat satisfies
Pr(true order >= g_hat) >= 1 - alpha at every sample size.

The output is a confidence lower bound, not a point estimate; the AIC/BIC
table computed on the full data complements it with point estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .em import FitConfig, fit_mle
from .errors import (
    DegenerateFitError,
    InsufficientDataError,
    InvariantError,
    MixOrderError,
)
from .mixture import Dataset
from .ordertests import (
    FitCache,
    SplitPlan,
    TestConfig,
    TestOutcome,
    random_split,
    run_order_test,
)

DEFAULT_G_MAX = 20


@dataclass(frozen=True)
class AlphaSchedule:
    """Either a fixed level or the shrinking level n1 ** -kappa."""

    kind: str
    alpha: float = 0.0
    kappa: float = 0.0

    def __post_init__(self):
        if self.kind == "fixed":
            if not (0.0 < self.alpha < 1.0):
                raise InvariantError("fixed schedule needs 0 < alpha < 1")
        elif self.kind == "power":
            if self.kappa <= 0.0:
                raise InvariantError("power schedule needs kappa > 0")
        else:
            raise InvariantError(f"unknown schedule kind {self.kind!r}")

    @classmethod
    def fixed(cls, alpha: float) -> "AlphaSchedule":
        return cls(kind="fixed", alpha=alpha)

    @classmethod
    def power(cls, kappa: float) -> "AlphaSchedule":
        return cls(kind="power", kappa=kappa)


def resolve_alpha(schedule: AlphaSchedule, n1: int) -> float:
    """Level used at split size n1; power levels are clamped into (0, 0.5]."""
    if schedule.kind == "fixed":
        return schedule.alpha
    if n1 < 2:
        raise InvariantError("power schedule needs n1 >= 2")
    return min(float(n1) ** (-schedule.kappa), 0.5)


@dataclass(frozen=True)
class StpOutcome:
    """Estimated order plus the per-level trail that produced it."""

    g_hat: int
    trail: tuple[TestOutcome, ...]
    alpha_used: float
    hit_cap: bool

    def __post_init__(self):
        for outcome in self.trail[:-1]:
            if outcome.p > self.alpha_used:
                raise InvariantError("non-final trail entry failed to reject")
        if self.trail and not self.hit_cap:
            if self.trail[-1].p <= self.alpha_used:
                raise InvariantError("final trail entry rejected but no cap was hit")
            if self.g_hat != len(self.trail):
                raise InvariantError("g_hat must equal the trail length")

    def to_json_dict(self) -> dict:
        return {
            "g_hat": self.g_hat,
            "alpha_used": self.alpha_used,
            "hit_cap": self.hit_cap,
            "trail": [t.to_json_dict() for t in self.trail],
        }


def run_stp(data: Dataset, test_cfg: TestConfig, schedule: AlphaSchedule,
            g_max: int = DEFAULT_G_MAX, rng: Optional[np.random.Generator] = None,
            n1: Optional[int] = None, plan: Optional[SplitPlan] = None) -> StpOutcome:
    """Run the sequential procedure on one random split of the data.

    A single split (default half/half) is drawn once and shared by every
    level. Stops at the first level whose p-value exceeds the resolved
    alpha; if every level up to g_max rejects, the result is capped there
    and flagged.
    """
    if g_max < 1:
        raise InvariantError("g_max must be >= 1")
    if plan is None:
        if rng is None:
            raise InvariantError("run_stp needs an rng when no plan is given")
        if n1 is None:
            n1 = data.n // 2
        plan = random_split(data.n, n1, rng)
    if min(plan.n1, plan.n2) < g_max + test_cfg.l:
        raise InsufficientDataError(
            f"halves of sizes ({plan.n1}, {plan.n2}) cannot fit "
            f"{g_max + test_cfg.l} components; lower g_max")

    alpha = resolve_alpha(schedule, plan.n1)
    cache = FitCache(data, plan, test_cfg.fit_cfg)
    trail = []
    for g in range(1, g_max + 1):
        try:
            outcome = run_order_test(data, plan, g, test_cfg, cache=cache)
        except MixOrderError as exc:
            raise type(exc)(f"while testing the {g}-component null: {exc}") from exc
        trail.append(outcome)
        if outcome.p > alpha:
            return StpOutcome(g_hat=g, trail=tuple(trail),
                              alpha_used=alpha, hit_cap=False)
    return StpOutcome(g_hat=g_max, trail=tuple(trail),
                      alpha_used=alpha, hit_cap=True)


def dim_g(g: int, d: int) -> int:
    """Free parameters of a g-component full-covariance Gaussian mixture."""
    if g < 1 or d < 1:
        raise InvariantError("g and d must be >= 1")
    return (g - 1) + g * d + g * (d * (d + 1)) // 2


@dataclass(frozen=True)
class ICRow:
    g: int
    dim: int
    log_likelihood: Optional[float]
    aic: Optional[float]
    bic: Optional[float]
    error: Optional[str] = None


@dataclass(frozen=True)
class ICTable:
    """Per-g AIC/BIC values on the full data, with argmin point estimates."""

    rows: tuple[ICRow, ...]
    g_aic: int
    g_bic: int
    n: int

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "g_aic": self.g_aic,
            "g_bic": self.g_bic,
            "rows": [
                {"g": r.g, "dim": r.dim, "log_likelihood": r.log_likelihood,
                 "aic": r.aic, "bic": r.bic, "error": r.error}
                for r in self.rows
            ],
        }


def ic_values(loglik: float, g: int, d: int, n: int) -> tuple[float, float]:
    """(AIC, BIC) from a log-likelihood, in per-observation form."""
    k = dim_g(g, d)
    aic = (2.0 / n) * k - (2.0 / n) * loglik
    bic = (math.log(n) / n) * k - (2.0 / n) * loglik
    return aic, bic


def information_criteria(data: Dataset, g_max: int, cfg: FitConfig) -> ICTable:
    """Fit 1..g_max components on the full data and tabulate AIC/BIC.

    Orders whose fit collapses are kept in the table with their error and
    excluded from the argmins. Ties break toward the smaller order.
    """
    if g_max < 1:
        raise InvariantError("g_max must be >= 1")
    if data.n < g_max:
        raise InsufficientDataError(
            f"cannot fit up to {g_max} components on {data.n} rows")
    n, d = data.n, data.d
    rows = []
    for g in range(1, g_max + 1):
        try:
            fit = fit_mle(data, g, cfg)
        except DegenerateFitError as exc:
            rows.append(ICRow(g=g, dim=dim_g(g, d), log_likelihood=None,
                              aic=None, bic=None, error=str(exc)))
            continue
        aic, bic = ic_values(fit.log_likelihood, g, d, n)
        rows.append(ICRow(g=g, dim=dim_g(g, d),
                          log_likelihood=fit.log_likelihood, aic=aic, bic=bic))
    usable = [r for r in rows if r.aic is not None]
    if not usable:
        raise DegenerateFitError("every order failed to fit; no criteria available")
    g_aic = min(usable, key=lambda r: (r.aic, r.g)).g
    g_bic = min(usable, key=lambda r: (r.bic, r.g)).g
    return ICTable(rows=tuple(rows), g_aic=g_aic, g_bic=g_bic, n=n)
