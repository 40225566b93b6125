"""Finite-sample order tests built from likelihood ratios across a data split.

For a candidate order g the data are split in two. The "split" statistic on
half k compares the likelihood of half k under a richer (g+l)-component fit
trained on the *other* half against the g-component maximum-likelihood fit
trained on half k itself. The "swapped" statistic averages the two split
statistics. Both are nonnegative-mean-bounded betting scores under the
g-component null, so min(1/statistic, 1) is a finite-sample valid p-value at
every sample size. Everything is carried in the log domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .em import FitConfig, FitResult, fit_mle
from .errors import (
    EmptyAggregateError,
    InsufficientDataError,
    InvalidStatisticError,
    InvariantError,
)
from .mixture import Dataset, log_likelihood

VARIANTS = ("split_k1", "split_k2", "swapped")


@dataclass(frozen=True)
class SplitPlan:
    """Partition of row indices 0..n-1 into two nonempty halves."""

    indices_1: np.ndarray
    indices_2: np.ndarray

    def __post_init__(self):
        i1 = np.array(sorted(int(i) for i in np.asarray(self.indices_1).ravel()), dtype=np.intp)
        i2 = np.array(sorted(int(i) for i in np.asarray(self.indices_2).ravel()), dtype=np.intp)
        if i1.size < 1 or i2.size < 1:
            raise InsufficientDataError("both halves must be nonempty")
        union = np.concatenate([i1, i2])
        n = union.size
        if np.intersect1d(i1, i2).size:
            raise InvariantError("split halves overlap")
        if not np.array_equal(np.sort(union), np.arange(n)):
            raise InvariantError("split halves must cover exactly 0..n-1")
        i1.setflags(write=False)
        i2.setflags(write=False)
        object.__setattr__(self, "indices_1", i1)
        object.__setattr__(self, "indices_2", i2)

    @property
    def n1(self) -> int:
        return self.indices_1.size

    @property
    def n2(self) -> int:
        return self.indices_2.size

    @property
    def n(self) -> int:
        return self.n1 + self.n2

    def half(self, k: int) -> np.ndarray:
        if k == 1:
            return self.indices_1
        if k == 2:
            return self.indices_2
        raise InvariantError(f"half index must be 1 or 2, got {k}")


def random_split(n: int, n1: int, rng: np.random.Generator) -> SplitPlan:
    """Uniformly random partition of {0..n-1} into sizes (n1, n-n1)."""
    if not (1 <= n1 < n):
        raise InsufficientDataError(
            f"need 1 <= n1 < n, got n1={n1}, n={n}")
    perm = rng.permutation(n)
    return SplitPlan(indices_1=perm[:n1], indices_2=perm[n1:])


@dataclass(frozen=True)
class TestConfig:
    """Order-test configuration: alternative offset, variant, fit knobs."""

    __test__ = False  # domain class, not a pytest case

    l: int = 2
    variant: str = "swapped"
    fit_cfg: FitConfig = field(default_factory=FitConfig)

    def __post_init__(self):
        if self.l < 1:
            raise InvariantError("l must be >= 1")
        if self.variant not in VARIANTS:
            raise InvariantError(
                f"variant must be one of {VARIANTS}, got {self.variant!r}")


@dataclass(frozen=True)
class TestOutcome:
    """Result of testing the g-component null on one split of the data."""

    __test__ = False  # domain class, not a pytest case

    g: int
    variant: str
    l: int
    log_statistic: float
    log_p: float
    p: float
    seed: int
    n1: int
    n2: int
    null_fit_1: Optional[FitResult] = None
    null_fit_2: Optional[FitResult] = None
    alt_fit_1: Optional[FitResult] = None
    alt_fit_2: Optional[FitResult] = None

    def to_json_dict(self) -> dict:
        return {
            "g": self.g,
            "variant": self.variant,
            "l": self.l,
            "log_statistic": self.log_statistic,
            "log_p": self.log_p,
            "p": self.p,
            "seed": self.seed,
            "split": {"n1": self.n1, "n2": self.n2},
        }


class FitCache:
    """Memo of EM fits keyed by (half, component count).

    Within one sequential run the richer fit at level g doubles as the null
    fit at level g + l on the same half (same data, same model class, same
    seeded fitting procedure), so caching avoids refitting identical models.
    Tests can also pre-populate the cache to inject stub fits.
    """

    def __init__(self, data: Dataset, plan: SplitPlan, fit_cfg: FitConfig):
        self.data = data
        self.plan = plan
        self.fit_cfg = fit_cfg
        self._halves = {1: data.subset(plan.indices_1), 2: data.subset(plan.indices_2)}
        self._fits: dict[tuple[int, int], FitResult] = {}

    def half_data(self, k: int) -> Dataset:
        return self._halves[k]

    def put(self, k: int, m: int, fit: FitResult) -> None:
        self._fits[(k, m)] = fit

    def fit(self, k: int, m: int) -> FitResult:
        key = (k, m)
        if key not in self._fits:
            self._fits[key] = fit_mle(self._halves[k], m, self.fit_cfg)
        return self._fits[key]


def _require_rows(plan: SplitPlan, g: int, l: int):
    need = g + l
    if min(plan.n1, plan.n2) < need:
        raise InsufficientDataError(
            f"testing order {g} with offset {l} needs at least {need} rows "
            f"per half; split has ({plan.n1}, {plan.n2})")


def _split_log_stat(cache: FitCache, g: int, l: int, k: int) -> float:
    other = 3 - k
    null_fit = cache.fit(k, g)
    alt_fit = cache.fit(other, g + l)
    alt_ll_on_k = log_likelihood(cache.half_data(k), alt_fit.params)
    return float(alt_ll_on_k - null_fit.log_likelihood)


def split_statistic_log(data: Dataset, plan: SplitPlan, g: int, cfg: TestConfig,
                        k: int, cache: Optional[FitCache] = None) -> float:
    """log of the split likelihood-ratio statistic evaluated on half k."""
    if k not in (1, 2):
        raise InvariantError(f"k must be 1 or 2, got {k}")
    _require_rows(plan, g, cfg.l)
    if cache is None:
        cache = FitCache(data, plan, cfg.fit_cfg)
    return _split_log_stat(cache, g, cfg.l, k)


def swapped_log_from_split_logs(log_v1: float, log_v2: float) -> float:
    """log of the arithmetic mean of two statistics given in log form."""
    m = max(log_v1, log_v2)
    if m == -math.inf:
        return -math.inf
    return m + math.log(math.exp(log_v1 - m) + math.exp(log_v2 - m)) - math.log(2.0)


def swapped_statistic_log(data: Dataset, plan: SplitPlan, g: int, cfg: TestConfig,
                          cache: Optional[FitCache] = None) -> float:
    """log of the swapped statistic: the mean of both split statistics."""
    _require_rows(plan, g, cfg.l)
    if cache is None:
        cache = FitCache(data, plan, cfg.fit_cfg)
    v1 = _split_log_stat(cache, g, cfg.l, 1)
    v2 = _split_log_stat(cache, g, cfg.l, 2)
    return swapped_log_from_split_logs(v1, v2)


def p_value_from_log_stat(log_v: float) -> tuple[float, float]:
    """(p, log p) with p = min(1/statistic, 1), all in the log domain.

    p is exp(log_p) and can underflow to exactly 0.0 for enormous
    statistics; log_p is preserved exactly for those cases.
    """
    log_v = float(log_v)
    if math.isnan(log_v):
        raise InvalidStatisticError("test statistic is NaN")
    log_p = min(-log_v, 0.0)
    return math.exp(log_p), log_p


def aggregate_e_values(log_e_values) -> float:
    """log of the arithmetic mean of e-values given in log form.

    The average of e-values over several data splits is again an e-value, so
    feeding the result to p_value_from_log_stat gives a p-value that no
    longer depends on any single split.
    """
    logs = [float(v) for v in log_e_values]
    if not logs:
        raise EmptyAggregateError("no e-values to aggregate")
    if any(math.isnan(v) for v in logs):
        raise InvalidStatisticError("e-value log is NaN")
    m = max(logs)
    if m == -math.inf:
        return -math.inf
    return m + math.log(sum(math.exp(v - m) for v in logs)) - math.log(len(logs))


def run_order_test(data: Dataset, plan: SplitPlan, g: int, cfg: TestConfig,
                   cache: Optional[FitCache] = None) -> TestOutcome:
    """Test the g-component null with the configured variant on one split."""
    _require_rows(plan, g, cfg.l)
    if cache is None:
        cache = FitCache(data, plan, cfg.fit_cfg)

    fits: dict[str, Optional[FitResult]] = {
        "null_fit_1": None, "null_fit_2": None, "alt_fit_1": None, "alt_fit_2": None}
    if cfg.variant == "split_k1":
        log_stat = _split_log_stat(cache, g, cfg.l, 1)
        fits["null_fit_1"] = cache.fit(1, g)
        fits["alt_fit_2"] = cache.fit(2, g + cfg.l)
    elif cfg.variant == "split_k2":
        log_stat = _split_log_stat(cache, g, cfg.l, 2)
        fits["null_fit_2"] = cache.fit(2, g)
        fits["alt_fit_1"] = cache.fit(1, g + cfg.l)
    else:
        v1 = _split_log_stat(cache, g, cfg.l, 1)
        v2 = _split_log_stat(cache, g, cfg.l, 2)
        log_stat = swapped_log_from_split_logs(v1, v2)
        fits["null_fit_1"] = cache.fit(1, g)
        fits["null_fit_2"] = cache.fit(2, g)
        fits["alt_fit_1"] = cache.fit(1, g + cfg.l)
        fits["alt_fit_2"] = cache.fit(2, g + cfg.l)

    p, log_p = p_value_from_log_stat(log_stat)
    return TestOutcome(
        g=g, variant=cfg.variant, l=cfg.l,
        log_statistic=float(log_stat), log_p=log_p, p=p,
        seed=cfg.fit_cfg.seed, n1=plan.n1, n2=plan.n2, **fits)
