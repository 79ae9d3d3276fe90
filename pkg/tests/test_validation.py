import json
import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from conformal_scenario.scenario import IntervalFamily, Uniform
from conformal_scenario.validation import (
    ConfigError,
    TrialConfig,
    csv_text,
    file_stem,
    ks_statistic,
    ks_threshold,
    load_experiment_file,
    retry_seed,
    run_experiment,
    run_prop1_equivalence,
    summary,
    summary_text,
    trial_seed,
    write_report,
)
from conformal_scenario.validation import experiments


def cfg(**kw):
    return TrialConfig.model_validate(kw)


class TestConfig:
    def test_rationals_are_exact(self):
        c = cfg(experiment="prop1_equivalence", family="interval", spec={"m": 19, "d": 2, "delta": "2/20"}, trials=1)
        assert c.spec.delta == Fraction(1, 10)
        assert cfg(experiment="vanilla_coverage", family="order", spec={"m": 19, "delta": 0.1}, trials=1).spec.delta == Fraction(1, 10)
        assert c.echo()["spec"]["delta"] == "1/10"

    @pytest.mark.parametrize(
        "doc,field",
        [
            ({"spec": {"m": 19, "delta": 0.1}, "trials": 10, "bogus": 1}, "bogus"),
            ({"spec": {"m": 19, "delta": 1.5}, "trials": 10}, "delta"),
            ({"spec": {"m": 19}, "trials": 0}, "trials"),
            ({"spec": {"m": 19, "d": 2}, "trials": 10}, "spec.d"),
            ({"spec": {"m": 3, "r": 3}, "trials": 10}, "r=3"),
            ({"spec": {"m": 19}}, "trials"),
            ({"spec": {"m": 19}, "trials": 1, "distribution": "cauchy"}, "distribution"),
        ],
    )
    def test_errors_name_the_field(self, tmp_path, doc, field):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"experiment": "vanilla_coverage", "family": "order"} | doc))
        with pytest.raises(ConfigError, match=field.replace(".", r"\.")):
            load_experiment_file(path)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="JSON"):
            load_experiment_file(path)


class TestKS:
    def test_trivial_cases(self):
        assert ks_statistic([0.5], lambda x: x) == 0.5
        assert ks_statistic([0.0] * 10, lambda x: x) == 1.0

    def test_matches_scipy(self):
        x = np.random.default_rng(0).beta(2, 18, size=500)
        ref = stats.kstest(x, stats.beta(2, 18).cdf).statistic
        assert ks_statistic(x, stats.beta(2, 18).cdf) == pytest.approx(ref, abs=1e-12)

    def test_threshold(self):
        assert ks_threshold(2000) == pytest.approx(0.0304, abs=5e-5)

    def test_null_rejection_rate(self):
        rng = np.random.default_rng(1)
        reps = 300
        accepted = sum(ks_statistic(rng.uniform(size=2000), lambda v: v) < ks_threshold(2000) for _ in range(reps))
        # the asymptotic band should hold at about 95%; allow three binomial standard errors
        assert accepted / reps >= 0.95 - 3 * math.sqrt(0.95 * 0.05 / reps)


class TestSeeds:
    def test_deterministic_and_distinct(self):
        assert trial_seed(7, 3) == trial_seed(7, 3)
        assert len({trial_seed(7, i) for i in range(1000)}) == 1000
        assert retry_seed(7) != 7 and retry_seed(7) == retry_seed(7)


class TestVanilla:
    def test_infinite_quantile_never_miscovers(self):
        rep = run_experiment(cfg(experiment="vanilla_coverage", family="order", spec={"m": 9, "delta": 0.05}, trials=200))
        assert rep.passed
        assert all(rec.r_p == math.inf and not rec.miscovered for rec in rep.records)
        assert rep.extras["quantile_kind"] == "infinite"

    def test_exact_rate_is_floor_formula(self):
        rep = run_experiment(cfg(experiment="vanilla_coverage", family="order", spec={"m": 10, "delta": 0.35}, trials=3000))
        check = rep.checks[0]
        assert check.expected_exact == "3/11"
        assert rep.passed

    def test_requires_order_family(self):
        with pytest.raises(ConfigError):
            run_experiment(cfg(experiment="vanilla_coverage", family="interval", spec={"m": 9, "d": 2, "delta": 0.1}, trials=5))


class TestViolation:
    def test_cdf_prediction(self):
        rep = run_experiment(
            cfg(experiment="violation_cdf", family="order", spec={"m": 10, "r": 4, "epsilon": 0.5}, trials=2000)
        )
        frac = next(c for c in rep.checks if c.name == "fraction_V_at_most_eps")
        assert frac.expected == pytest.approx(1 - 386 / 1024, abs=1e-15)
        assert rep.passed

    def test_cdf_rejects_monte_carlo(self):
        with pytest.raises(ConfigError, match="n_test"):
            run_experiment(cfg(experiment="violation_cdf", family="order", spec={"m": 10}, trials=5, n_test=100))

    def test_mean_order(self):
        rep = run_experiment(cfg(experiment="violation_mean", family="order", spec={"m": 99, "r": 0}, trials=500))
        assert rep.checks[0].expected_exact == "1/100"
        assert rep.passed and rep.extras["not_tight_trials"] == 0

    def test_mean_monte_carlo_mode(self):
        rep = run_experiment(
            cfg(experiment="violation_mean", family="interval", spec={"m": 19, "d": 2}, trials=300, n_test=2000)
        )
        assert rep.passed

    def test_cascade_needs_multiple_of_d(self):
        with pytest.raises(ConfigError, match="multiple"):
            run_experiment(cfg(experiment="violation_mean", family="interval", spec={"m": 19, "d": 2, "r": 3}, trials=5))


class TestMembershipEquivalence:
    def test_order_family_frequency(self):
        rep = run_experiment(cfg(experiment="prop1_equivalence", family="order", spec={"m": 9}, trials=1000, test_points=5))
        assert rep.passed
        assert rep.extras["membership_pairs"] == 5000

    def test_wrong_delta_rejected(self):
        with pytest.raises(ConfigError, match="d/\\(m\\+1\\)"):
            run_experiment(cfg(experiment="prop1_equivalence", family="order", spec={"m": 9, "delta": 0.2}, trials=5))

    def test_ties_are_excluded_and_counted(self):
        class Grid(IntervalFamily):
            # coarse grid makes a repeated sample likely
            def draw(self, rng, m):
                return rng.integers(0, 30, size=m) / 30.0

        rep = run_prop1_equivalence(
            cfg(experiment="prop1_equivalence", family="interval", spec={"m": 9, "d": 2}, trials=50, test_points=5),
            family=Grid(Uniform()),
        )
        assert rep.exclusions.get("tie", 0) > 0
        assert all("tie" in rec.flags for rec in rep.records if rec.excluded == "tie")
        assert rep.recorded + sum(rep.exclusions.values()) == 50

    def test_mismatch_fails_without_retry(self, monkeypatch):
        monkeypatch.setattr(experiments, "feasibility_set_contains", lambda *a, **k: False)
        rep = run_experiment(cfg(experiment="prop1_equivalence", family="interval", spec={"m": 9, "d": 2}, trials=5, test_points=4))
        assert not rep.passed
        assert len(rep.attempts) == 1
        replay = rep.extras["mismatch_replays"][0]
        assert replay["delta"] == "1/5" and len(replay["samples"]) == 9 and "program" in replay


class TestCCC:
    def test_uncorrected(self):
        rep = run_experiment(cfg(experiment="ccc_coverage", family="order", spec={"m": 19, "epsilon": 0.1}, trials=2000))
        assert rep.checks[0].expected == pytest.approx(1 - 0.4202649788315975, abs=1e-14)
        assert rep.passed

    def test_corrected_is_one_sided(self):
        rep = run_experiment(
            cfg(experiment="ccc_coverage", family="order", spec={"m": 1000, "epsilon": 0.1, "delta": 0.05}, trials=300, corrected=True)
        )
        assert rep.checks[0].kind == "one_sided_3sigma"
        assert rep.checks[0].observed >= 0.95

    def test_infeasible_bucket(self):
        rep = run_experiment(
            cfg(experiment="ccc_coverage", family="order", spec={"m": 10, "epsilon": 0.05, "delta": 0.01}, trials=20, corrected=True),
            retry=False,
        )
        assert rep.exclusions == {"infeasible_quantile": 20}
        assert rep.recorded == 0 and not rep.passed


class TestReports:
    config = cfg(experiment="thm4_miscoverage", family="interval", spec={"m": 19, "d": 2}, trials=300, root_seed=11)

    def test_thread_count_does_not_change_output(self):
        a = run_experiment(self.config, threads=1)
        b = run_experiment(self.config, threads=4)
        assert csv_text(a) == csv_text(b)
        assert summary_text(a) == summary_text(b)

    def test_exclusion_accounting(self):
        rep = run_experiment(self.config)
        s = summary(rep)
        assert s["trials"] == s["recorded"] + s["excluded_total"] == 300

    def test_forced_failure_retries_once(self):
        rep = run_experiment(self.config.model_copy(update={"expected_override": Fraction(1, 2)}))
        assert not rep.passed
        assert [a["root_seed"] for a in rep.attempts] == [11, retry_seed(11)]

    def test_files(self, tmp_path):
        rep = run_experiment(self.config)
        csv_path, json_path = write_report(rep, tmp_path)
        assert file_stem(rep) == "thm4_miscoverage_19_0_11"
        assert csv_path.name == "thm4_miscoverage_19_0_11.csv" and json_path.exists()
        header = csv_path.read_text().splitlines()[0]
        assert header == "trial_index,seed,V,r_p,miscovered,flags"
        assert len(csv_path.read_text().splitlines()) == 301
