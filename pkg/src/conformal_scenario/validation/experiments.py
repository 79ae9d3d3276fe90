"""Monte Carlo experiments that check each exact prediction at desk scale.

Every trial gets its own generator seeded from ``(root_seed, trial_index)``
so results do not depend on scheduling: trials may run on any number of
threads and are assembled in index order. Each experiment returns a
:class:`Report` whose checks compare observed statistics with exact values
computed by :mod:`conformal_scenario.bounds`.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable

import numpy as np

from ..bounds import beta_cdf, binomial_tail, ccc_delta, expected_violation_fraction, lindemann_r, quantile_index
from ..conformal import (
    MeasureEvaluationError,
    ScenarioMeasure,
    ScoreVector,
    ccc_quantile,
    conformal_quantile,
    feasibility_set_contains,
    on_feasibility_boundary,
    predictor_contains,
)
from ..scenario.engine import cascade_discard, solve
from ..scenario.families import OrderFamily, ProgramFamily, violation_probability
from ..scenario.program import InfeasibleProgram
from .config import ConfigError, Experiment, TrialConfig
from .stats import (
    Check,
    binomial_rate,
    count_is_zero,
    estimators_agree,
    ks_check,
    mean_within,
    one_sided_at_least,
)

#: replay instances kept in a report when membership mismatches occur
MAX_REPLAYS = 10


def trial_seed(root_seed: int, trial_index: int) -> int:
    return int(np.random.SeedSequence([root_seed, trial_index]).generate_state(1, np.uint64)[0])


def retry_seed(root_seed: int) -> int:
    """Fresh root seed for the single re-run after a statistical miss."""
    return int(np.random.SeedSequence(root_seed, spawn_key=(1,)).generate_state(1, np.uint64)[0])


@dataclass
class TrialRecord:
    trial_index: int
    seed: int
    V: float = math.nan
    r_p: float = math.nan
    miscovered: bool | None = None
    flags: tuple[str, ...] = ()
    excluded: str | None = None
    data: dict[str, Any] = field(default_factory=dict)


@dataclass
class Report:
    experiment: Experiment
    config: TrialConfig
    r: int  # effective discard count, used in file names
    records: list[TrialRecord]
    checks: list[Check]
    extras: dict[str, Any] = field(default_factory=dict)
    attempts: list[dict[str, Any]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def exclusions(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for rec in self.records:
            if rec.excluded:
                out[rec.excluded] = out.get(rec.excluded, 0) + 1
        return dict(sorted(out.items()))

    @property
    def recorded(self) -> int:
        return sum(1 for rec in self.records if rec.excluded is None)


def _run_trials(config: TrialConfig, trial: Callable[[np.random.Generator], TrialRecord], threads: int) -> list[TrialRecord]:
    def one(i: int) -> TrialRecord:
        seed = trial_seed(config.root_seed, i)
        try:
            rec = trial(np.random.default_rng(seed))
        except InfeasibleProgram:
            rec = TrialRecord(0, 0, excluded="infeasible")
        rec.trial_index, rec.seed = i, seed
        return rec

    if threads <= 1:
        return [one(i) for i in range(config.trials)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, range(config.trials)))


def _kept(records: list[TrialRecord]) -> list[TrialRecord]:
    return [rec for rec in records if rec.excluded is None]


def _column(records: list[TrialRecord], name: str) -> np.ndarray:
    if name == "miscovered":
        return np.array([bool(rec.miscovered) for rec in records], dtype=float)
    return np.array([getattr(rec, name) for rec in records], dtype=float)


def _expected(config: TrialConfig, exact: Fraction | float) -> Fraction | float:
    return exact if config.expected_override is None else config.expected_override


def _violation(x: np.ndarray, family: ProgramFamily, config: TrialConfig, rng: np.random.Generator) -> float:
    if config.n_test == 0:
        return violation_probability(x, family, "analytic").value
    return violation_probability(x, family, "monte_carlo", config.n_test, rng).value


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


def _require_analytic(config: TrialConfig, family: ProgramFamily, why: str) -> None:
    _require(family.has_analytic, f"family: {family.name} has no closed-form violation probability ({why})")
    _require(config.n_test == 0, f"n_test: {why} needs analytic violation probabilities (n_test = 0)")


# ---------------------------------------------------------------------------
# vanilla coverage


def run_vanilla_coverage(config: TrialConfig, threads: int = 1) -> Report:
    """Fresh-draw miscoverage of the conformal quantile against floor(delta(m+1))/(m+1)."""
    family = config.make_family()
    _require(isinstance(family, OrderFamily), "family: vanilla coverage runs on the order family")
    delta = config.spec.delta
    _require(delta is not None, "spec.delta: required for vanilla coverage")
    m = config.spec.m
    idx = quantile_index(m, delta)

    def trial(rng: np.random.Generator) -> TrialRecord:
        scores = ScoreVector(family.draw(rng, m))
        q = conformal_quantile(scores, delta)
        test = float(family.draw(rng, 1)[0])
        V = 0.0 if q.infinite else _violation(np.array([q.r_p]), family, config, rng)
        ties = scores.tie_count + int(np.any(scores.values == test))
        return TrialRecord(
            0, 0, V=V, r_p=q.r_p, miscovered=test > q.r_p,
            flags=("tie",) if ties else (), excluded="tie" if ties else None,
        )

    records = _run_trials(config, trial, threads)
    kept = _kept(records)
    exact = Fraction(m + 1 - idx.p, m + 1)
    hits, V = _column(kept, "miscovered"), _column(kept, "V")
    checks = [
        binomial_rate("miscoverage_rate", _expected(config, exact), hits),
        estimators_agree("mean_V_matches_fresh_draw_rate", V, hits),
    ]
    extras = {"p": idx.p, "quantile_kind": idx.kind.value, "mean_V": float(np.mean(V)) if V.size else math.nan}
    return Report(config.experiment, config, idx.r, records, checks, extras)


# ---------------------------------------------------------------------------
# violation distribution and mean under cascade discarding


def _cascade_trial(family: ProgramFamily, config: TrialConfig) -> Callable[[np.random.Generator], TrialRecord]:
    m, r = config.spec.m, config.spec.r

    def trial(rng: np.random.Generator) -> TrialRecord:
        result = cascade_discard(family.build(family.draw(rng, m)), r)
        sol = result.solution
        V = _violation(sol.x_star, family, config, rng)
        flags = tuple(name for name, on in (("degenerate", result.degenerate), ("not_tight", not result.tight)) if on)
        return TrialRecord(0, 0, V=V, r_p=float(sol.objective), flags=flags, excluded=flags[0] if flags else None)

    return trial


def _beta_parameters(config: TrialConfig) -> tuple[int, int]:
    s = config.spec
    return s.r + s.d, s.m + 1 - s.r - s.d


def run_violation_cdf(config: TrialConfig, threads: int = 1) -> Report:
    """KS distance between observed V and Beta(r+d, m+1-r-d); P{V <= eps} against its exact value."""
    family = config.make_family()
    _require_analytic(config, family, "the KS comparison")
    a, b = _beta_parameters(config)
    records = _run_trials(config, _cascade_trial(family, config), threads)
    V = _column(_kept(records), "V")
    checks = [ks_check("ks_vs_beta", V, lambda v: beta_cdf(a, b, min(max(v, 0.0), 1.0)), f"Beta({a}, {b})")]
    if config.expected_override is not None:
        checks[0] = ks_check("ks_vs_beta", V, lambda v: float(config.expected_override), "override")
    eps = config.spec.epsilon
    if eps is not None:
        s = config.spec
        exact = binomial_tail(s.m, s.r + s.d - 1, eps)
        checks.append(binomial_rate("fraction_V_at_most_eps", exact, (V <= float(eps)).astype(float)))
    extras = {"beta": [a, b], "mean_V": float(np.mean(V)) if V.size else math.nan}
    return Report(config.experiment, config, config.spec.r, records, checks, extras)


def run_violation_mean(config: TrialConfig, threads: int = 1) -> Report:
    """Mean V against (r+d)/(m+1), plus per-stage tightness of every cascade."""
    family = config.make_family()
    s = config.spec
    _require(s.r % s.d == 0, f"spec.r: cascaded discarding removes d={s.d} samples per stage, r={s.r} is not a multiple")
    records = _run_trials(config, _cascade_trial(family, config), threads)
    V = _column(_kept(records), "V")
    exact = expected_violation_fraction(s.bound_spec())
    checks = [mean_within("mean_V", _expected(config, exact), V)]
    not_tight = sum(1 for rec in records if "not_tight" in rec.flags)
    if family.name in ("order", "interval"):
        checks.append(count_is_zero("cascade_stages_tight", not_tight, len(records)))
    extras = {"not_tight_trials": not_tight}
    return Report(config.experiment, config, s.r, records, checks, extras)


# ---------------------------------------------------------------------------
# scenario predictor versus the feasibility set


def _membership_delta(config: TrialConfig) -> Fraction:
    s = config.spec
    natural = Fraction(s.d, s.m + 1)
    _require(s.r == 0, "spec.r: the predictor comparison uses the undiscarded program (r = 0)")
    _require(
        s.delta is None or s.delta == natural,
        f"spec.delta: the predictor and the feasibility set coincide only at d/(m+1) = {natural}",
    )
    return natural


def _replay(samples: np.ndarray, omega: np.ndarray, family: ProgramFamily, delta: Fraction) -> dict[str, Any]:
    return {
        "family": family.name,
        "delta": str(delta),
        "samples": np.asarray(samples).tolist(),
        "omega": np.asarray(omega).tolist(),
        "program": family.build(samples).to_dict(),
    }


def run_prop1_equivalence(config: TrialConfig, threads: int = 1, family: ProgramFamily | None = None) -> Report:
    """Membership in the scenario predictor equals membership in {w : g(x*(S), w) <= 0}.

    Every trial draws S and ``test_points`` fresh samples. Any disagreement
    fails the report and is serialized for replay. The first test point of
    each trial also feeds the fresh-draw violation frequency, compared with
    d/(m+1). ``family`` overrides the configured one (used by tests).
    """
    family = family if family is not None else config.make_family()
    delta = _membership_delta(config)
    m, K = config.spec.m, config.test_points
    measure = ScenarioMeasure(family)

    def trial(rng: np.random.Generator) -> TrialRecord:
        S = family.draw(rng, m)
        omegas = family.draw(rng, K)
        sol = measure.solve(S)
        if sol.degenerate:
            return TrialRecord(0, 0, flags=("degenerate",), excluded="degenerate")
        flat_S = S.reshape(m, -1)
        if any(np.any(np.all(flat_S == np.reshape(w, (1, -1)), axis=1)) for w in omegas):
            return TrialRecord(0, 0, flags=("tie",), excluded="tie")
        mismatches, boundary = [], 0
        try:
            for w in omegas:
                in_predictor = predictor_contains(S, w, delta, measure)
                in_u = feasibility_set_contains(sol, family, w)
                boundary += on_feasibility_boundary(sol, family, w)
                if in_predictor != in_u:
                    mismatches.append(_replay(S, w, family, delta) | {"predictor": in_predictor, "feasibility_set": in_u})
        except MeasureEvaluationError:
            return TrialRecord(0, 0, flags=("measure_error",), excluded="measure_error")
        first = omegas[:1]
        miscovered = bool(family.constraint(sol.x_star, first)[0] > 0)
        flags = tuple(name for name, on in (("mismatch", mismatches), ("boundary", boundary)) if on)
        V = _violation(sol.x_star, family, config, rng) if family.has_analytic or config.n_test else math.nan
        return TrialRecord(
            0, 0, V=V, r_p=float(sol.objective), miscovered=miscovered, flags=flags,
            data={"mismatches": mismatches, "boundary": boundary, "pairs": K},
        )

    records = _run_trials(config, trial, threads)
    kept = _kept(records)
    mismatches = [mm for rec in kept for mm in rec.data["mismatches"]]
    pairs = sum(rec.data["pairs"] for rec in kept)
    exact = Fraction(config.spec.d, m + 1)
    checks = [
        count_is_zero("membership_mismatches", len(mismatches), pairs),
        binomial_rate("fresh_draw_violation_rate", _expected(config, exact), _column(kept, "miscovered")),
    ]
    extras = {
        "delta": str(delta),
        "membership_pairs": pairs,
        "boundary_hits": sum(rec.data["boundary"] for rec in kept),
        "mismatch_count": len(mismatches),
        "mismatch_replays": mismatches[:MAX_REPLAYS],
    }
    return Report(config.experiment, config, 0, records, checks, extras)


def run_thm4_miscoverage(config: TrialConfig, threads: int = 1) -> Report:
    """P{g(x*(S), w) > 0} for one fresh w per trial against (r+d)/(m+1).

    With r = 0 this is the plain scenario program; a positive r discards by
    cascade first. When V is available the mean of V is also compared with
    the fresh-draw frequency.
    """
    family = config.make_family()
    s = config.spec
    _require(s.r % s.d == 0, f"spec.r: r={s.r} is not a multiple of d={s.d}")

    def trial(rng: np.random.Generator) -> TrialRecord:
        program = family.build(family.draw(rng, s.m))
        if s.r:
            result = cascade_discard(program, s.r)
            sol, degenerate = result.solution, result.degenerate or not result.tight
        else:
            sol = solve(program)
            degenerate = sol.degenerate
        if degenerate:
            return TrialRecord(0, 0, flags=("degenerate",), excluded="degenerate")
        miscovered = bool(family.constraint(sol.x_star, family.draw(rng, 1))[0] > 0)
        V = _violation(sol.x_star, family, config, rng) if family.has_analytic or config.n_test else math.nan
        return TrialRecord(0, 0, V=V, r_p=float(sol.objective), miscovered=miscovered)

    records = _run_trials(config, trial, threads)
    kept = _kept(records)
    hits, V = _column(kept, "miscovered"), _column(kept, "V")
    exact = expected_violation_fraction(s.bound_spec())
    checks = [binomial_rate("fresh_draw_violation_rate", _expected(config, exact), hits)]
    if not np.any(np.isnan(V)):
        checks.append(estimators_agree("mean_V_matches_fresh_draw_rate", V, hits))
    return Report(config.experiment, config, s.r, records, checks)


# ---------------------------------------------------------------------------
# calibration-conditional coverage


def run_ccc_coverage(config: TrialConfig, threads: int = 1) -> Report:
    """Fraction of calibration sets with V <= eps.

    Uncorrected, the fraction must match 1 - ccc_delta(m, eps) exactly.
    Corrected, it only has to reach 1 - delta (one-sided). Trials whose
    corrected quantile is infeasible are counted in their own bucket.
    """
    family = config.make_family()
    _require(isinstance(family, OrderFamily), "family: calibration-conditional coverage runs on the order family")
    _require_analytic(config, family, "classifying V <= eps")
    s = config.spec
    eps, delta = s.epsilon, s.delta
    _require(eps is not None, "spec.epsilon: required for calibration-conditional coverage")
    _require(not config.corrected or delta is not None, "spec.delta: the corrected quantile needs delta")
    idx = lindemann_r(s.m, eps, delta) if config.corrected else quantile_index(s.m, eps)

    def trial(rng: np.random.Generator) -> TrialRecord:
        scores = family.draw(rng, s.m)
        q = ccc_quantile(scores, eps, corrected=config.corrected, delta=delta)
        if q.infeasible:
            return TrialRecord(0, 0, r_p=q.r_p, flags=("infeasible_quantile",), excluded="infeasible_quantile")
        V = 0.0 if q.infinite else _violation(np.array([q.r_p]), family, config, rng)
        return TrialRecord(0, 0, V=V, r_p=q.r_p, miscovered=V > eps)

    records = _run_trials(config, trial, threads)
    covered = (_column(_kept(records), "V") <= float(eps)).astype(float)
    if config.corrected:
        bound = _expected(config, 1 - delta)
        sigma = math.sqrt(float(bound) * (1 - float(bound)) / max(covered.size, 1))
        check = one_sided_at_least("fraction_V_at_most_eps", bound, float(np.mean(covered)) if covered.size else math.nan, sigma, covered.size)
    else:
        check = binomial_rate("fraction_V_at_most_eps", _expected(config, 1.0 - ccc_delta(s.m, eps)), covered)
    extras = {"p": idx.p, "quantile_kind": idx.kind.value}
    return Report(config.experiment, config, idx.r, records, [check], extras)


RUNNERS: dict[Experiment, Callable[..., Report]] = {
    Experiment.VANILLA_COVERAGE: run_vanilla_coverage,
    Experiment.VIOLATION_CDF: run_violation_cdf,
    Experiment.VIOLATION_MEAN: run_violation_mean,
    Experiment.PROP1_EQUIVALENCE: run_prop1_equivalence,
    Experiment.THM4_MISCOVERAGE: run_thm4_miscoverage,
    Experiment.CCC_COVERAGE: run_ccc_coverage,
}


def run_experiment(config: TrialConfig, threads: int = 1, retry: bool = True) -> Report:
    """Run the configured experiment; on a statistical miss, re-run once with a derived seed.

    Only retryable checks (statistical bands) justify a re-run; a hard
    counterexample such as a membership mismatch fails immediately.
    """
    runner = RUNNERS[config.experiment]
    report = runner(config, threads)
    attempts = [{"root_seed": config.root_seed, "passed": report.passed}]
    failed = [c for c in report.checks if not c.passed]
    if retry and failed and all(c.retryable for c in failed):
        second = runner(config.with_seed(retry_seed(config.root_seed)), threads)
        attempts.append({"root_seed": second.config.root_seed, "passed": second.passed})
        report = second
    report.attempts = attempts
    return report
