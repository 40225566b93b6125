import json
import math

import numpy as np
import pytest

import mixorder.harness
from mixorder import (
    AlphaSchedule,
    FitConfig,
    InvariantError,
    MixOrderError,
    Scenario,
    ScenarioError,
    emit_results,
    fwer_oracle,
    run_scenario,
)
from mixorder.dataio import load_results_csv
from mixorder.harness import ReplicateRecord, aggregate_metrics, run_replicate

from conftest import make_univariate


def small_scenario(**overrides):
    kwargs = dict(
        g0=2, d=1, omega_bar=0.2, n1=100, l=1, variant="split_k1",
        alpha_schedule=AlphaSchedule.fixed(0.05), r=4, base_seed=31415,
        restarts=2, mc_samples=3000, g_max=4)
    kwargs.update(overrides)
    return Scenario(**kwargs)


def _stub_records(g_hats, g0=None, g_aics=None, g_bics=None):
    records = []
    for i, g in enumerate(g_hats):
        records.append(ReplicateRecord(
            index=i, g_hat=g, alpha_used=0.05,
            g_aic=None if g_aics is None else g_aics[i],
            g_bic=None if g_bics is None else g_bics[i]))
    return records


class TestMetricArithmetic:
    def test_perfect_replicate(self):
        s = small_scenario(g0=5, r=1)
        row = aggregate_metrics(s, _stub_records([5]), 0.05)
        assert row.cov_prop == 1.0
        assert row.corr_prop == 1.0
        assert row.mean_comp == 5.0

    def test_mixed_replicates(self):
        s = small_scenario(g0=5, r=3)
        row = aggregate_metrics(s, _stub_records([4, 5, 5]), 0.05)
        assert row.cov_prop == 1.0
        assert row.mean_comp == pytest.approx(14.0 / 3.0, abs=1e-12)
        assert row.corr_prop == pytest.approx(2.0 / 3.0, abs=1e-12)

    def test_cov_prop_is_one_minus_fwer(self):
        s = small_scenario(g0=2, r=5)
        g_hats = [1, 2, 3, 2, 4]
        row = aggregate_metrics(s, _stub_records(g_hats), 0.05)
        fwer = sum(1 for g in g_hats if g > 2) / len(g_hats)
        assert row.cov_prop == pytest.approx(1.0 - fwer, abs=1e-12)

    def test_ic_metrics(self):
        s = small_scenario(g0=2, r=2)
        row = aggregate_metrics(
            s, _stub_records([2, 2], g_aics=[2, 3], g_bics=[2, 2]), 0.05)
        assert row.aic_mean_comp == 2.5
        assert row.aic_corr_prop == 0.5
        assert row.bic_mean_comp == 2.0
        assert row.bic_corr_prop == 1.0

    def test_failed_replicates_excluded(self):
        s = small_scenario(g0=2, r=3)
        records = _stub_records([2, 2]) + [ReplicateRecord(index=2, error="boom")]
        row = aggregate_metrics(s, records, 0.05)
        assert row.failures == 1
        assert row.mean_comp == 2.0


class TestRunScenario:
    def test_replay_determinism(self):
        s = small_scenario()
        row = run_scenario(s)
        assert row.failures == 0
        for rec in row.records:
            again = run_replicate(s, rec.index)
            assert again.g_hat == rec.g_hat
            assert again.p_values == rec.p_values
            assert again.log_statistics == rec.log_statistics
            assert again.achieved_omega_bar == rec.achieved_omega_bar

    def test_thread_count_does_not_change_results(self):
        s = small_scenario(r=3)
        a = run_scenario(s, threads=1)
        b = run_scenario(s, threads=2)
        assert a.g_hats == b.g_hats
        assert [r.log_statistics for r in a.records] == \
               [r.log_statistics for r in b.records]

    def test_fixed_params_mode_shares_parameters(self):
        s = small_scenario(fixed_params=True, r=3)
        row = run_scenario(s)
        omegas = {rec.achieved_omega_bar for rec in row.records}
        assert len(omegas) == 1

    def test_fresh_params_mode_redraws(self):
        s = small_scenario(r=3)
        row = run_scenario(s)
        omegas = {rec.achieved_omega_bar for rec in row.records}
        assert len(omegas) == 3

    def test_failure_policy(self, monkeypatch):
        s = small_scenario(r=10)
        real = mixorder.harness.run_replicate

        def flaky(scenario, index, fixed=None):
            if index < 2:
                raise MixOrderError(f"synthetic failure {index}")
            return real(scenario, index, fixed=fixed)

        monkeypatch.setattr(mixorder.harness, "run_replicate", flaky)
        with pytest.raises(ScenarioError):
            run_scenario(s)

    def test_failures_within_budget_tolerated(self, monkeypatch):
        s = small_scenario(r=20)
        real = mixorder.harness.run_replicate

        def flaky(scenario, index, fixed=None):
            if index == 0:
                raise MixOrderError("synthetic failure")
            return real(scenario, index, fixed=fixed)

        monkeypatch.setattr(mixorder.harness, "run_replicate", flaky)
        row = run_scenario(s)
        assert row.failures == 1
        assert len(row.g_hats) == 19


class TestFwerOracleMonteCarlo:
    # direct empirical checks of the familywise-error guarantee; these are
    # the slowest tests in this file (r=400 full sequential runs each)

    BOUND = 0.05 + 3 * math.sqrt(0.05 * 0.95 / 400)

    def test_single_component_null(self):
        params = make_univariate([0.0], [1.0], [1.0])
        est = fwer_oracle(g0=1, d=1, params=params, n1=250, n2=250,
                          variant="split_k1", l=1, alpha=0.05, r=400, seed=100)
        assert est <= self.BOUND

    def test_separated_two_component_null(self):
        params = make_univariate([-5.0, 5.0], [1.0, 1.0], [0.5, 0.5])
        est = fwer_oracle(g0=2, d=1, params=params, n1=250, n2=250,
                          variant="split_k1", l=1, alpha=0.05, r=400, seed=101)
        assert est <= self.BOUND


class TestFwerOracle:
    def test_tiny_alpha_never_overshoots(self):
        params = make_univariate([0.0], [1.0], [1.0])
        est = fwer_oracle(g0=1, d=1, params=params, n1=40, n2=40,
                          variant="split_k1", l=1, alpha=1e-6, r=5, seed=0,
                          fit_cfg=FitConfig(restarts=2), g_max=3)
        assert est == 0.0

    def test_component_count_checked(self):
        params = make_univariate([0.0], [1.0], [1.0])
        with pytest.raises(InvariantError):
            fwer_oracle(g0=2, d=1, params=params, n1=40, n2=40,
                        variant="split_k1", l=1, alpha=0.05, r=2, seed=0)


class TestEmitResults:
    def test_round_trip_single_row(self, tmp_path):
        s = small_scenario(r=2)
        row = run_scenario(s)
        csv_path = tmp_path / "out.csv"
        sidecar = emit_results([row], csv_path)
        parsed = load_results_csv(csv_path)
        assert len(parsed) == 1
        got = parsed[0]
        assert got["scenario_id"] == s.scenario_id
        assert got["cov_prop"] == row.cov_prop
        assert got["mean_comp"] == row.mean_comp
        assert got["corr_prop"] == row.corr_prop
        assert got["failures"] == 0
        meta = json.loads(open(sidecar).read())
        reps = meta["scenarios"][0]["replicates"]
        assert len(reps) == 2
        assert meta["scenarios"][0]["params_mode"] == "fresh"

    def test_rows_sorted_on_emit(self, tmp_path):
        rows = []
        for d, n1, l in [(2, 200, 2), (1, 100, 1), (1, 300, 1)]:
            s = small_scenario(d=d, n1=n1, l=l, r=1,
                               omega_bar=0.2 if d == 1 else 0.1)
            rows.append(run_scenario(s))
        csv_path = tmp_path / "sorted.csv"
        emit_results(rows, csv_path)
        parsed = load_results_csv(csv_path)
        keys = [(r["d"], r["n1"], r["l"]) for r in parsed]
        assert keys == sorted(keys)

    def test_replay_from_sidecar_seed_rule(self, tmp_path):
        s = small_scenario(r=2)
        row = run_scenario(s)
        sidecar = emit_results([row], tmp_path / "r.csv")
        meta = json.loads(open(sidecar).read())
        block = meta["scenarios"][0]
        assert "SeedSequence(base_seed, spawn_key=(0, index))" == block["seed_rule"]
        rec = block["replicates"][1]
        again = run_replicate(s, rec["index"])
        assert again.g_hat == rec["g_hat"]
        assert list(again.p_values) == rec["p_values"]

    def test_empty_rows_rejected(self, tmp_path):
        with pytest.raises(InvariantError):
            emit_results([], tmp_path / "x.csv")


def test_mean_comp_bound_assertion():
    # mean_comp <= g0 + (1 - cov_prop) * g_max holds for any g_hat list
    s = small_scenario(g0=2, r=4, g_max=4)
    row = aggregate_metrics(s, _stub_records([1, 2, 4, 4]), 0.05)
    assert row.mean_comp <= s.g0 + (1 - row.cov_prop) * s.g_max + 1e-9


def test_metrics_row_validation():
    s = small_scenario(r=1)
    with pytest.raises(InvariantError):
        mixorder.harness.MetricsRow(
            scenario=s, alpha_used=0.05, cov_prop=0.5, mean_comp=2.0,
            corr_prop=0.9, aic_mean_comp=None, aic_corr_prop=None,
            bic_mean_comp=None, bic_corr_prop=None, g_hats=(2,),
            failures=0, records=())
