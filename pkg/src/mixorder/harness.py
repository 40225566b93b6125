"""Replicated simulation driver: scenario execution, metrics, persistence.

A scenario fixes (g0, overlap, d, n1, l, variant, alpha schedule, r) and a
base seed. Each replicate derives its own seed from (base_seed, index) via
numpy's SeedSequence spawn keys, so any single replicate can be re-run in
isolation and reproduces its result exactly. Replicates draw fresh mixture
parameters by default; ``fixed_params=True`` draws one parameter set for the
whole scenario instead (seeded separately, spawn key (1, 0)).

Metrics per scenario: the fraction of replicates whose estimate did not
exceed the true order (cov_prop), the average estimate (mean_comp), and the
fraction that hit the true order exactly (corr_prop), plus the same
mean/corr summaries for the AIC and BIC point estimates when enabled.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .em import FitConfig
from .errors import InvariantError, MixOrderError, ScenarioError
from .mixture import MixtureParams, sample
from .ordertests import VARIANTS, TestConfig
from .simgen import GeneratedMixture, GenSpec, generate_mixture_params
from .stp import AlphaSchedule, information_criteria, resolve_alpha, run_stp

MAX_FAILURE_FRACTION = 0.05

RESULT_COLUMNS = [
    "scenario_id", "g0", "omega_bar", "d", "n1", "l", "variant", "alpha", "r",
    "cov_prop", "mean_comp", "corr_prop",
    "aic_mean_comp", "aic_corr_prop", "bic_mean_comp", "bic_corr_prop",
    "failures",
]


@dataclass(frozen=True)
class Scenario:
    """One simulation cell; see module docstring for seeding rules."""

    g0: int
    d: int
    omega_bar: float
    n1: int
    l: int
    variant: str
    alpha_schedule: AlphaSchedule
    r: int
    base_seed: int
    n2: Optional[int] = None
    run_ic: bool = False
    ic_g_max: Optional[int] = None
    g_max: int = 20
    fixed_params: bool = False
    restarts: int = 8
    max_iters: int = 1000
    rel_tol: float = 1e-8
    cov_ridge: float = 1e-6
    min_weight: Optional[float] = None
    mc_samples: int = 20000
    scenario_id: str = ""

    def __post_init__(self):
        if self.r < 1:
            raise InvariantError("r must be >= 1")
        if self.g0 < 1 or self.d < 1 or self.n1 < 1 or self.l < 1:
            raise InvariantError("g0, d, n1, l must all be >= 1")
        if self.variant not in VARIANTS:
            raise InvariantError(f"variant must be one of {VARIANTS}")
        if not self.scenario_id:
            object.__setattr__(self, "scenario_id", self.default_id())

    def default_id(self) -> str:
        return (f"g{self.g0}_w{self.omega_bar:g}_d{self.d}_n{self.n1}"
                f"_l{self.l}_{self.variant}")

    @property
    def n2_resolved(self) -> int:
        return self.n1 if self.n2 is None else self.n2

    @property
    def ic_g_max_resolved(self) -> int:
        return self.g0 + 3 if self.ic_g_max is None else self.ic_g_max

    def fit_config(self, seed: int) -> FitConfig:
        return FitConfig(restarts=self.restarts, max_iters=self.max_iters,
                         rel_tol=self.rel_tol, cov_ridge=self.cov_ridge,
                         seed=seed)


@dataclass(frozen=True)
class ReplicateRecord:
    """Everything needed to audit or replay one replicate."""

    index: int
    g_hat: Optional[int] = None
    hit_cap: bool = False
    alpha_used: Optional[float] = None
    p_values: tuple[float, ...] = ()
    log_ps: tuple[float, ...] = ()
    log_statistics: tuple[float, ...] = ()
    g_aic: Optional[int] = None
    g_bic: Optional[int] = None
    achieved_omega_bar: Optional[float] = None
    error: Optional[str] = None

    def to_json_dict(self) -> dict:
        return {
            "index": self.index,
            "g_hat": self.g_hat,
            "hit_cap": self.hit_cap,
            "alpha_used": self.alpha_used,
            "p_values": list(self.p_values),
            "log_ps": list(self.log_ps),
            "log_statistics": list(self.log_statistics),
            "g_aic": self.g_aic,
            "g_bic": self.g_bic,
            "achieved_omega_bar": self.achieved_omega_bar,
            "error": self.error,
        }


@dataclass(frozen=True)
class MetricsRow:
    """Aggregated metrics for one scenario."""

    scenario: Scenario
    alpha_used: float
    cov_prop: float
    mean_comp: float
    corr_prop: float
    aic_mean_comp: Optional[float]
    aic_corr_prop: Optional[float]
    bic_mean_comp: Optional[float]
    bic_corr_prop: Optional[float]
    g_hats: tuple[int, ...]
    failures: int
    records: tuple[ReplicateRecord, ...]

    def __post_init__(self):
        if self.corr_prop > self.cov_prop + 1e-12:
            raise InvariantError("corr_prop cannot exceed cov_prop")


def replicate_seed(base_seed: int, index: int) -> np.random.SeedSequence:
    """Seed for replicate ``index``: SeedSequence(base_seed, spawn_key=(0, index))."""
    return np.random.SeedSequence(base_seed, spawn_key=(0, index))


def fixed_params_seed(base_seed: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(base_seed, spawn_key=(1, 0))


def _generate_for_scenario(s: Scenario, seed: int) -> GeneratedMixture:
    spec = GenSpec(g0=s.g0, d=s.d, omega_bar_target=s.omega_bar, seed=seed,
                   min_weight=s.min_weight, mc_samples=s.mc_samples)
    return generate_mixture_params(spec)


def run_replicate(s: Scenario, index: int,
                  fixed: Optional[GeneratedMixture] = None) -> ReplicateRecord:
    """Run one replicate; fully determined by (scenario, index)."""
    rng = np.random.default_rng(replicate_seed(s.base_seed, index))
    gen_seed = int(rng.integers(2**63))
    fit_seed = int(rng.integers(2**63))

    if s.fixed_params:
        gen = fixed if fixed is not None else _generate_for_scenario(
            s, int(np.random.default_rng(fixed_params_seed(s.base_seed)).integers(2**63)))
    else:
        gen = _generate_for_scenario(s, gen_seed)

    data = sample(gen.params, s.n1 + s.n2_resolved, rng)
    fit_cfg = s.fit_config(fit_seed)
    test_cfg = TestConfig(l=s.l, variant=s.variant, fit_cfg=fit_cfg)
    stp_out = run_stp(data, test_cfg, s.alpha_schedule, g_max=s.g_max,
                      rng=rng, n1=s.n1)

    g_aic = g_bic = None
    if s.run_ic:
        table = information_criteria(data, s.ic_g_max_resolved, fit_cfg)
        g_aic, g_bic = table.g_aic, table.g_bic

    return ReplicateRecord(
        index=index,
        g_hat=stp_out.g_hat,
        hit_cap=stp_out.hit_cap,
        alpha_used=stp_out.alpha_used,
        p_values=tuple(t.p for t in stp_out.trail),
        log_ps=tuple(t.log_p for t in stp_out.trail),
        log_statistics=tuple(t.log_statistic for t in stp_out.trail),
        g_aic=g_aic,
        g_bic=g_bic,
        achieved_omega_bar=gen.achieved_omega_bar,
    )


def _replicate_task(args) -> ReplicateRecord:
    s, index, fixed = args
    try:
        return run_replicate(s, index, fixed=fixed)
    except MixOrderError as exc:
        return ReplicateRecord(index=index, error=f"{type(exc).__name__}: {exc}")


def aggregate_metrics(s: Scenario, records, alpha_used: float) -> MetricsRow:
    """Symmetric aggregation of replicate records into one MetricsRow."""
    records = tuple(sorted(records, key=lambda rec: rec.index))
    ok = [rec for rec in records if rec.error is None]
    failures = len(records) - len(ok)
    if not ok:
        raise ScenarioError(f"scenario {s.scenario_id}: every replicate failed")
    g_hats = tuple(rec.g_hat for rec in ok)
    arr = np.asarray(g_hats, dtype=float)
    cov_prop = float(np.mean(arr <= s.g0))
    mean_comp = float(np.mean(arr))
    corr_prop = float(np.mean(arr == s.g0))
    # arithmetic sanity bound; a violation means the aggregation is broken
    assert mean_comp <= s.g0 + (1.0 - cov_prop) * s.g_max + 1e-9

    aic_mean = aic_corr = bic_mean = bic_corr = None
    aics = [rec.g_aic for rec in ok if rec.g_aic is not None]
    bics = [rec.g_bic for rec in ok if rec.g_bic is not None]
    if aics:
        aic_mean = float(np.mean(aics))
        aic_corr = float(np.mean(np.asarray(aics) == s.g0))
    if bics:
        bic_mean = float(np.mean(bics))
        bic_corr = float(np.mean(np.asarray(bics) == s.g0))

    return MetricsRow(
        scenario=s, alpha_used=alpha_used,
        cov_prop=cov_prop, mean_comp=mean_comp, corr_prop=corr_prop,
        aic_mean_comp=aic_mean, aic_corr_prop=aic_corr,
        bic_mean_comp=bic_mean, bic_corr_prop=bic_corr,
        g_hats=g_hats, failures=failures, records=records)


def run_scenario(s: Scenario, threads: int = 1,
                 progress: Optional[Callable[[str], None]] = None) -> MetricsRow:
    """Execute all replicates of a scenario and aggregate the metrics.

    Replicates are embarrassingly parallel; results are keyed by index so
    the output is identical for any thread count. Fails if more than 5% of
    replicates error out.
    """
    fixed = None
    if s.fixed_params:
        fixed_seed = int(np.random.default_rng(
            fixed_params_seed(s.base_seed)).integers(2**63))
        fixed = _generate_for_scenario(s, fixed_seed)

    tasks = [(s, i, fixed) for i in range(s.r)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(_replicate_task, tasks, chunksize=1))
    else:
        records = []
        for t in tasks:
            records.append(_replicate_task(t))
            if progress is not None and (t[1] + 1) % 10 == 0:
                progress(f"  {s.scenario_id}: replicate {t[1] + 1}/{s.r}")

    failures = sum(1 for rec in records if rec.error is not None)
    if failures > MAX_FAILURE_FRACTION * s.r:
        details = "; ".join(rec.error for rec in records if rec.error)[:500]
        raise ScenarioError(
            f"scenario {s.scenario_id}: {failures}/{s.r} replicates failed "
            f"(> {MAX_FAILURE_FRACTION:.0%}): {details}")

    alpha_used = resolve_alpha(s.alpha_schedule, s.n1)
    return aggregate_metrics(s, records, alpha_used)


def fwer_oracle(g0: int, d: int, params: MixtureParams, n1: int, n2: int,
                variant: str, l: int, alpha: float, r: int, seed: int,
                fit_cfg: Optional[FitConfig] = None,
                g_max: Optional[int] = None) -> float:
    """Brute-force estimate of Pr(g_hat > g0) for a fixed generating mixture.

    This is the direct empirical check of the familywise-error guarantee:
    it runs the full sequential procedure on r independent datasets drawn
    from ``params`` and counts how often the estimate overshoots the truth.
    """
    if params.g != g0:
        raise InvariantError(f"params has {params.g} components, expected {g0}")
    if params.dim != d:
        raise InvariantError(f"params has dimension {params.dim}, expected {d}")
    if g_max is None:
        g_max = g0 + 5
    overshoot = 0
    done = 0
    for i in range(r):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0, i)))
        fit_seed = int(rng.integers(2**63))
        cfg = fit_cfg if fit_cfg is not None else FitConfig()
        test_cfg = TestConfig(l=l, variant=variant,
                              fit_cfg=replace(cfg, seed=fit_seed))
        data = sample(params, n1 + n2, rng)
        out = run_stp(data, test_cfg, AlphaSchedule.fixed(alpha),
                      g_max=g_max, rng=rng, n1=n1)
        overshoot += int(out.g_hat > g0)
        done += 1
    return overshoot / done


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_results(rows, csv_path, sidecar_path: Optional[str] = None) -> str:
    """Write the scenario metrics CSV plus a JSON sidecar with replicate detail.

    Rows are sorted by (d, n1, l) for a stable, table-like layout. Returns
    the sidecar path. Floats are written with repr so the CSV re-parses to
    identical values.
    """
    rows = list(rows)
    if not rows:
        raise InvariantError("no rows to emit")
    rows.sort(key=lambda row: (row.scenario.d, row.scenario.n1, row.scenario.l,
                               row.scenario.scenario_id))
    if sidecar_path is None:
        base, _ = os.path.splitext(str(csv_path))
        sidecar_path = base + ".replicates.json"

    try:
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(RESULT_COLUMNS)
            for row in rows:
                s = row.scenario
                writer.writerow([
                    s.scenario_id, s.g0, _fmt(s.omega_bar), s.d, s.n1, s.l,
                    s.variant, _fmt(row.alpha_used), s.r,
                    _fmt(row.cov_prop), _fmt(row.mean_comp), _fmt(row.corr_prop),
                    _fmt(row.aic_mean_comp), _fmt(row.aic_corr_prop),
                    _fmt(row.bic_mean_comp), _fmt(row.bic_corr_prop),
                    row.failures,
                ])
        sidecar = {
            "columns": RESULT_COLUMNS,
            "scenarios": [
                {
                    "scenario_id": row.scenario.scenario_id,
                    "base_seed": row.scenario.base_seed,
                    "seed_rule": "SeedSequence(base_seed, spawn_key=(0, index))",
                    "params_mode": "fixed" if row.scenario.fixed_params else "fresh",
                    "g_hats": list(row.g_hats),
                    "replicates": [rec.to_json_dict() for rec in row.records],
                }
                for row in rows
            ],
        }
        with open(sidecar_path, "w", encoding="utf-8") as fh:
            json.dump(sidecar, fh, indent=1, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise MixOrderError(f"could not write results near {csv_path}: {exc}") from exc
    return sidecar_path
