"""Statistical pass/fail checks: 3-sigma bands and the Kolmogorov-Smirnov distance."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Sequence

import numpy as np

#: number of standard errors in every two- and one-sided band
N_SIGMA = 3.0
#: asymptotic 95% quantile of the scaled KS statistic
KS_95 = 1.36


def ks_statistic(samples: Sequence[float], cdf: Callable[[float], float]) -> float:
    """sup |F_n - F| evaluated at the order statistics.

    Uses ``max(i/n - F(x_(i)), F(x_(i)) - (i-1)/n)`` over i = 1..n.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n == 0:
        raise ValueError("ks_statistic needs at least one sample")
    F = np.array([cdf(float(v)) for v in x])
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def ks_threshold(n: int) -> float:
    return KS_95 / math.sqrt(n)


def binomial_se(p: float, n: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


def mean_se(values: np.ndarray) -> float:
    """Standard error of the mean from the sample standard deviation."""
    if values.size < 2:
        return 0.0
    return float(np.std(values, ddof=1) / math.sqrt(values.size))


@dataclass(frozen=True)
class Check:
    """One pass/fail comparison in a report.

    ``allowed`` is the largest admissible deviation (two-sided), the lowest
    admissible value (one-sided) or the KS limit. A check is ``retryable``
    when a fresh seed may legitimately change its outcome.
    """

    name: str
    kind: str
    expected: float
    observed: float
    sigma: float
    allowed: float
    passed: bool
    expected_exact: str | None = None
    n: int = 0
    retryable: bool = True

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "kind": self.kind,
            "expected": self.expected,
            "expected_exact": self.expected_exact,
            "observed": self.observed,
            "sigma": self.sigma,
            "allowed": self.allowed,
            "n": self.n,
            "passed": self.passed,
        }


def _exact_text(value: float | Fraction) -> str | None:
    return str(value) if isinstance(value, Fraction) else None


def _empty(name: str, kind: str, expected: float | Fraction) -> Check:
    return Check(name, kind, float(expected), math.nan, math.nan, math.nan, False, _exact_text(expected), 0)


def two_sided(name: str, expected: float | Fraction, observed: float, sigma: float, n: int) -> Check:
    """|observed - expected| <= 3 sigma. With sigma = 0 only equality passes."""
    if n == 0:
        return _empty(name, "two_sided_3sigma", expected)
    allowed = N_SIGMA * sigma
    passed = abs(observed - float(expected)) <= allowed + 1e-15
    return Check(name, "two_sided_3sigma", float(expected), observed, sigma, allowed, passed, _exact_text(expected), n)


def one_sided_at_least(name: str, bound: float | Fraction, observed: float, sigma: float, n: int) -> Check:
    """observed >= bound - 3 sigma."""
    if n == 0:
        return _empty(name, "one_sided_3sigma", bound)
    allowed = float(bound) - N_SIGMA * sigma
    return Check(name, "one_sided_3sigma", float(bound), observed, sigma, allowed, observed >= allowed, _exact_text(bound), n)


def binomial_rate(name: str, expected: float | Fraction, hits: np.ndarray) -> Check:
    """Event frequency against an exact probability, sigma from the exact p."""
    n = int(hits.size)
    if n == 0:
        return _empty(name, "two_sided_3sigma", expected)
    return two_sided(name, expected, float(np.mean(hits)), binomial_se(float(expected), n), n)


def mean_within(name: str, expected: float | Fraction, values: np.ndarray) -> Check:
    """Sample mean against an exact mean, sigma = sample std / sqrt(n)."""
    n = int(values.size)
    if n == 0:
        return _empty(name, "two_sided_3sigma", expected)
    return two_sided(name, expected, float(np.mean(values)), mean_se(values), n)


def estimators_agree(name: str, values: np.ndarray, hits: np.ndarray) -> Check:
    """Mean of V and the fresh-draw event frequency agree within 3 combined standard errors."""
    n = int(values.size)
    if n == 0:
        return _empty(name, "two_sided_3sigma", 0.0)
    freq = float(np.mean(hits))
    sigma = math.hypot(mean_se(values), binomial_se(freq, n))
    return two_sided(name, 0.0, float(np.mean(values)) - freq, sigma, n)


def ks_check(name: str, samples: np.ndarray, cdf: Callable[[float], float], label: str) -> Check:
    n = int(samples.size)
    if n == 0:
        return _empty(name, "ks_95", 0.0)
    stat = ks_statistic(samples, cdf)
    limit = ks_threshold(n)
    return Check(name, "ks_95", 0.0, stat, math.nan, limit, stat < limit, label, n)


def count_is_zero(name: str, count: int, n: int) -> Check:
    """A hard equality claim: no counterexamples at all. Never retried."""
    return Check(name, "exact", 0.0, float(count), 0.0, 0.0, count == 0, "0", n, retryable=False)
