"""Nonconformity scores, p-values, the vanilla set predictor and conformal quantiles."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .bounds import CEIL_GUARD, QuantileKind, Real, lindemann_r, quantile_index
from .scenario.engine import solve
from .scenario.families import ProgramFamily
from .scenario.program import FEAS_TOL, InfeasibleProgram, ScenarioSolution


class MeasureEvaluationError(RuntimeError):
    """A nonconformity measure could not be evaluated on its input."""


@dataclass(frozen=True, eq=False)
class ScoreVector:
    """Scores in original sample order plus a stable sorted view (ties by index)."""

    values: np.ndarray
    order: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float).reshape(-1)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "order", np.argsort(values, kind="stable"))

    def __len__(self) -> int:
        return self.values.size

    @property
    def sorted(self) -> np.ndarray:
        return self.values[self.order]

    @property
    def tie_count(self) -> int:
        return int(self.values.size - np.unique(self.values).size)

    def to_json(self) -> str:
        return json.dumps([float(v) for v in self.values])

    @classmethod
    def from_json(cls, text: str) -> "ScoreVector":
        data = json.loads(text)
        if not isinstance(data, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in data):
            raise ValueError("score vector must be a JSON array of numbers")
        return cls(np.asarray(data, dtype=float))


def _as_scores(scores: ScoreVector | Sequence[float]) -> ScoreVector:
    return scores if isinstance(scores, ScoreVector) else ScoreVector(np.asarray(scores, dtype=float))


def f_value(calibration: ScoreVector | Sequence[float], test_score: float) -> Fraction:
    """|{i in 1..m+1 : R_i >= R}| / (m + 1), the test score counting itself."""
    cal = _as_scores(calibration)
    count = int(np.count_nonzero(cal.values >= test_score)) + 1
    return Fraction(count, len(cal) + 1)


def exceeds(f: Fraction, delta: Real) -> bool:
    """f > delta, treating a float delta within the relative guard of f as equal to it."""
    if isinstance(delta, (int, Fraction)):
        return f > delta
    return float(f) - delta > CEIL_GUARD * max(1.0, abs(delta))


NonconformityMeasure = Callable[[np.ndarray], np.ndarray]
"""Maps a batch of samples (first axis) to one score per sample, permutation-invariantly."""


def identity_measure(samples: np.ndarray) -> np.ndarray:
    """Samples that already are scores."""
    return np.asarray(samples, dtype=float).reshape(-1)


def predictor_contains(
    S: np.ndarray, omega, delta: Real, measure: NonconformityMeasure
) -> bool:
    """Is omega in the vanilla set predictor {w : f(w; S) > delta}?

    All m + 1 scores are computed jointly from S with omega appended; the
    last one is the test score.
    """
    S = np.asarray(S, dtype=float)
    joint = np.concatenate([S, np.asarray(omega, dtype=float).reshape((1,) + S.shape[1:])])
    try:
        scores = np.asarray(measure(joint), dtype=float)
    except InfeasibleProgram as exc:
        raise MeasureEvaluationError(f"measure failed on the augmented sample set: {exc}") from exc
    if scores.shape != (len(joint),):
        raise MeasureEvaluationError(f"measure returned shape {scores.shape}, expected ({len(joint)},)")
    return exceeds(f_value(scores[:-1], scores[-1]), delta)


@dataclass(frozen=True)
class QuantileResult:
    r_p: float
    p: int
    r: int
    kind: QuantileKind = QuantileKind.FINITE

    @property
    def infinite(self) -> bool:
        return self.kind is QuantileKind.INFINITE

    @property
    def infeasible(self) -> bool:
        return self.kind is QuantileKind.INFEASIBLE


def _quantile_at(cal: ScoreVector, p: int, r: int, kind: QuantileKind) -> QuantileResult:
    if kind is QuantileKind.FINITE:
        return QuantileResult(float(cal.sorted[p - 1]), p, r, kind)
    return QuantileResult(math.inf if kind is QuantileKind.INFINITE else math.nan, p, r, kind)


def conformal_quantile(calibration: ScoreVector | Sequence[float], delta: Real) -> QuantileResult:
    """Quantile_{1-delta}(R_1, ..., R_m, +inf): the p-th smallest score, p = ceil((1-delta)(m+1))."""
    cal = _as_scores(calibration)
    idx = quantile_index(len(cal), delta)
    return _quantile_at(cal, idx.p, idx.r, idx.kind)


def ccc_quantile(
    calibration: ScoreVector | Sequence[float], eps: Real, corrected: bool = False, delta: Real | None = None
) -> QuantileResult:
    """Calibration-conditional quantile.

    Uncorrected it is the level 1 - eps conformal quantile. The corrected
    variant raises the level by sqrt(ln(1/delta)/(2m)); when that pushes the
    rank past the appended infinity the result is marked infeasible (r_p is
    NaN).
    """
    cal = _as_scores(calibration)
    if not corrected:
        return conformal_quantile(cal, eps)
    if delta is None:
        raise ValueError("the corrected quantile needs delta")
    idx = lindemann_r(len(cal), eps, delta)
    return _quantile_at(cal, idx.p, idx.r, idx.kind)


class ScenarioMeasure:
    """Scores g(x*(T), w) for every w in T, with x*(T) the scenario optimizer on T.

    Samples are put in a canonical order before the program is built, so
    the optimizer (and hence every score) is bit-identical under any
    permutation of the input.
    """

    def __init__(self, family: ProgramFamily):
        self.family = family

    def solve(self, samples: np.ndarray) -> ScenarioSolution:
        samples = np.asarray(samples, dtype=float)
        order = self.family.canonical_order(samples)
        return solve(self.family.build(samples[order]))

    def __call__(self, samples: np.ndarray) -> np.ndarray:
        samples = np.asarray(samples, dtype=float)
        x = self.solve(samples).x_star
        return np.asarray(self.family.constraint(x, samples), dtype=float)


def scenario_nonconformity(family: ProgramFamily) -> ScenarioMeasure:
    return ScenarioMeasure(family)


def feasibility_set_contains(solution: ScenarioSolution, family: ProgramFamily, omega, tol: float = FEAS_TOL) -> bool:
    """Is omega in U = {w : g(x*(S), w) <= 0}, up to the feasibility tolerance?"""
    return bool(family.constraint(solution.x_star, np.asarray([omega], dtype=float))[0] <= tol)


def on_feasibility_boundary(solution: ScenarioSolution, family: ProgramFamily, omega, tol: float = FEAS_TOL) -> bool:
    return bool(abs(family.constraint(solution.x_star, np.asarray([omega], dtype=float))[0]) <= tol)
