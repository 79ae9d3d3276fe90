"""Acceptance criteria 1-9, each at its stated tolerance.

Every test records a one-line PASS/FAIL verdict, printed in the
"acceptance criteria" section of the pytest summary (and immediately with
``-s``). Running this file directly also prints the verdicts.
"""

import itertools
import json
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from conformal_scenario.bounds import beta_cdf, binomial_tail, quantile_index
from conformal_scenario.cli import main as cli_main
from conformal_scenario.conformal import conformal_quantile, identity_measure, predictor_contains
from conformal_scenario.scenario import (
    Gaussian,
    Uniform,
    gen_interval_cover,
    gen_order_problem,
    gen_random_lp,
    solve,
    solve_order_program,
    support_set,
)
from conformal_scenario.validation import TrialConfig, run_experiment

from conftest import ACCEPTANCE_LINES


def verdict(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def experiment(**kw):
    return run_experiment(TrialConfig.model_validate({"root_seed": 2024} | kw))


def test_criterion_1_vanilla_coverage():
    start = time.perf_counter()
    rep = experiment(experiment="vanilla_coverage", family="order", spec={"m": 19, "delta": "1/10"}, trials=5000)
    elapsed = time.perf_counter() - start
    rate = rep.checks[0]
    sigma = math.sqrt(0.1 * 0.9 / 5000)
    in_band = 0.1 - 3 * sigma <= rate.observed <= 0.1 + 3 * sigma
    ok = rep.passed and in_band and rate.expected_exact == "1/10" and elapsed < 5.0
    verdict(1, ok, f"miscoverage {rate.observed:.4f} in [{0.1 - 3 * sigma:.4f}, {0.1 + 3 * sigma:.4f}], {elapsed:.2f}s")


@pytest.mark.parametrize(
    "family,spec,exact",
    [
        ("order", {"m": 99, "r": 0}, "1/100"),
        ("order", {"m": 99, "r": 9}, "1/10"),
        ("interval", {"m": 19, "d": 2, "r": 0}, "1/10"),
    ],
    ids=["order-r0", "order-r9", "interval-r0"],
)
def test_criterion_2_expected_violation(family, spec, exact):
    rep = experiment(experiment="violation_mean", family=family, spec=spec, trials=2000)
    mean = rep.checks[0]
    ok = rep.passed and mean.expected_exact == exact
    verdict(2, ok, f"{family} {spec}: mean V {mean.observed:.5f} vs {exact} (allowed +/- {mean.allowed:.5f})")


@pytest.mark.parametrize("r,beta", [(1, (2, 18)), (0, (1, 19))])
def test_criterion_3_violation_distribution(r, beta):
    rep = experiment(experiment="violation_cdf", family="order", spec={"m": 19, "r": r}, trials=2000)
    ks = rep.checks[0]
    ok = rep.passed and ks.observed < 0.0304 and ks.expected_exact == f"Beta({beta[0]}, {beta[1]})"
    verdict(3, ok, f"r={r}: KS {ks.observed:.4f} vs Beta{beta} < 0.0304")


@pytest.mark.parametrize("m,eps,exact", [(10, "1/2", 1 - 386 / 1024), (19, "1/10", 0.579735)])
def test_criterion_4_calibration_conditional(m, eps, exact):
    rep = experiment(experiment="ccc_coverage", family="order", spec={"m": m, "epsilon": eps}, trials=2000)
    frac = rep.checks[0]
    ok = rep.passed and abs(frac.expected - exact) < 1e-6
    verdict(4, ok, f"m={m}, eps={eps}: P(V<=eps) {frac.observed:.4f} vs {frac.expected:.6f} (+/- {frac.allowed:.4f})")


def test_criterion_5_predictor_equals_feasibility_set():
    rep = experiment(
        experiment="prop1_equivalence", family="interval", spec={"m": 19, "d": 2, "delta": "2/20"}, trials=500, test_points=20
    )
    mismatches = rep.extras["mismatch_count"]
    pairs = rep.extras["membership_pairs"]
    ok = mismatches == 0 and pairs + 20 * sum(rep.exclusions.values()) == 10_000
    detail = f"{mismatches} mismatches over {pairs} pairs, exclusions {rep.exclusions}"
    if mismatches:
        detail += " replay: " + json.dumps(rep.extras["mismatch_replays"][0])
    verdict(5, ok, detail)


@pytest.mark.parametrize("family,spec", [("order", {"m": 9}), ("interval", {"m": 19, "d": 2})])
def test_criterion_6_fresh_draw_miscoverage(family, spec):
    rep = experiment(experiment="thm4_miscoverage", family=family, spec=spec, trials=5000)
    rate = rep.checks[0]
    verdict(6, rep.passed and rate.expected_exact == "1/10", f"{family}: {rate.observed:.4f} vs 0.1 (+/- {rate.allowed:.4f}), exclusions {rep.exclusions}")


def test_criterion_7_bridge_and_duality():
    rng = np.random.default_rng(7)
    compared = bridge_failures = 0
    while compared < 1000:
        m = int(rng.integers(1, 60))
        delta = Fraction(int(rng.integers(1, 1000)), 1000)
        idx = quantile_index(m, delta)
        if idx.p > m:
            continue
        scores = rng.normal(size=m)
        compared += 1
        bridge_failures += conformal_quantile(scores, delta).r_p != solve_order_program(scores, m - idx.p).r_p

    duality_failures = checked = 0
    for m in range(1, 8):
        for scores in itertools.combinations_with_replacement(range(4), m):
            cal = np.asarray(scores, dtype=float)
            for k in range(1, 2 * m + 2):
                delta = Fraction(k, 2 * (m + 1))
                r_p = conformal_quantile(cal, delta).r_p
                for test in np.arange(-0.5, 4.0, 0.5):
                    checked += 1
                    if test > r_p and predictor_contains(cal, test, delta, identity_measure):
                        duality_failures += 1
                    if test <= r_p and not predictor_contains(cal, test, delta, identity_measure):
                        duality_failures += 1
    ok = bridge_failures == 0 and duality_failures == 0
    verdict(7, ok, f"bridge {bridge_failures}/1000 disagreements; duality {duality_failures}/{checked} failures")


def test_criterion_8_oracle_identities(capsys):
    # the binomial tail is defined on the open interval; the endpoints are pinned separately
    worst = 0.0
    endpoints_ok = True
    for a in range(1, 21):
        for b in range(1, 21):
            for x in np.round(np.arange(0.01, 1.0, 0.01), 2):
                worst = max(worst, abs(beta_cdf(a, b, x) - binomial_tail(a + b - 1, a - 1, x)))
            endpoints_ok &= beta_cdf(a, b, 0.0) == 0.0 and beta_cdf(a, b, 1.0) == 1.0
    identity_ok = worst <= 1e-10 and endpoints_ok

    audit = {}
    generators = {
        "order": lambda s: gen_order_problem(Uniform(), 20, s),
        "interval": lambda s: gen_interval_cover(Gaussian(), 20, s),
        "random_lp": lambda s: gen_random_lp(3, 50, s),
    }
    for name, gen in generators.items():
        agree = 0
        for seed in range(1000):
            program = gen(seed)[0]
            sol = solve(program)
            agree += support_set(program, sol) == sol.support_indices
        audit[name] = agree
    audit_ok = all(v == 1000 for v in audit.values())

    outputs = []
    for argv in (
        ["calc", "sample-size-vanilla", "--r", "0", "--delta", "0.05"],
        ["calc", "sample-size-ccc", "--r", "0", "--eps", "0.1", "--delta", "0.01"],
        ["calc", "expected-violation", "--m", "99", "--r", "0", "--d", "1"],
        ["calc", "ccc-delta", "--m", "10", "--eps", "0.5"],
    ):
        assert cli_main(argv) == 0
        outputs.append(capsys.readouterr().out.split()[0])
    calc_ok = outputs == ["19", "93", "0.01", "0.376953125"]
    with capsys.disabled():
        verdict(
            8,
            identity_ok and audit_ok and calc_ok,
            f"identity max err {worst:.2e}; fast==removal {audit}/1000; calculators {outputs}",
        )


def test_criterion_9_determinism(tmp_path, capsys):
    configs = {
        "vanilla": {"experiment": "vanilla_coverage", "family": "order", "spec": {"m": 19, "delta": 0.1}, "trials": 1000},
        "membership": {"experiment": "prop1_equivalence", "family": "interval", "spec": {"m": 19, "d": 2}, "trials": 60},
        "mean": {"experiment": "violation_mean", "family": "random_lp", "spec": {"m": 30, "d": 3, "r": 3}, "trials": 100},
    }
    identical = []
    for name, cfg in configs.items():
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(cfg))
        for threads in ("1", "4"):
            cli_main(["validate", name, "--config", str(path), "--seed", "99", "--threads", threads, "--out-dir", str(tmp_path / threads)])
        capsys.readouterr()
        files = sorted(p.name for p in (tmp_path / "1").iterdir() if p.name.startswith(cfg["experiment"]))
        identical.append(all((tmp_path / "1" / f).read_bytes() == (tmp_path / "4" / f).read_bytes() for f in files) and len(files) == 2)
    with capsys.disabled():
        verdict(9, all(identical), f"1 vs 4 threads byte-identical for {dict(zip(configs, identical))}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
