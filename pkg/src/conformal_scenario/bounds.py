"""Closed-form probability expressions for scenario programs and conformal quantiles.

Everything here is a pure function of its arguments. Binomial sums are
evaluated in log space with an incremental term ratio, so they stay
accurate for sample counts up to about a million. Beta distributions are
restricted to integer shapes, which is all the scenario/conformal bridge
ever needs.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Union

import numpy as np

Real = Union[float, int, Fraction]

#: floating-point residue tolerated outside [0, 1] before clamping
PROBABILITY_RESIDUE = 2.0**-40
#: relative guard used when taking ceilings of products like (1 - delta)(m + 1)
CEIL_GUARD = 1e-12


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of a formula."""


class VacuousBoundWarning(UserWarning):
    """A bound evaluated to something larger than 1 and carries no information."""


def clamp_probability(value: float) -> float:
    if -PROBABILITY_RESIDUE <= value < 0.0:
        return 0.0
    if 1.0 < value <= 1.0 + PROBABILITY_RESIDUE:
        return 1.0
    if not 0.0 <= value <= 1.0:
        raise DomainError(f"probability {value!r} outside [0, 1]")
    return float(value)


def ceil_guarded(value: Real) -> int:
    """Ceiling that snaps values within a 1e-12 relative guard onto the integer.

    Fractions and ints are handled exactly; only floats go through the guard.
    """
    if isinstance(value, (int, Fraction)):
        return math.ceil(value)
    nearest = round(value)
    if abs(value - nearest) <= CEIL_GUARD * max(1.0, abs(value)):
        return int(nearest)
    return math.ceil(value)


def _check_open_unit(name: str, value: Real) -> None:
    if not 0 < value < 1:
        raise DomainError(f"{name} must lie in (0, 1), got {value}")


def _log_binomial_pmf(m: int, eps: float) -> np.ndarray:
    """log P{Bin(m, eps) = i} for i = 0..m via the term ratio (m-i)/(i+1) * eps/(1-eps)."""
    i = np.arange(m, dtype=float)
    steps = np.log((m - i) / (i + 1.0)) + (math.log(eps) - math.log1p(-eps))
    logs = np.empty(m + 1)
    logs[0] = m * math.log1p(-eps)
    logs[1:] = logs[0] + np.cumsum(steps)
    return logs


def _logsumexp(values: np.ndarray) -> float:
    if values.size == 0:
        return -math.inf
    top = float(values.max())
    return top + math.log(float(np.exp(values - top).sum()))


def _validate_binomial(m: int, k: int, eps: Real) -> None:
    if m < 0 or k < 0:
        raise DomainError("m and k must be non-negative")
    if k > m:
        raise DomainError(f"k={k} exceeds m={m}")
    _check_open_unit("eps", eps)


def _split_sums(m: int, k: int, eps: float) -> tuple[float, float]:
    # each side accumulated separately; callers complement the smaller one
    logs = _log_binomial_pmf(m, eps)
    return math.exp(_logsumexp(logs[: k + 1])), math.exp(_logsumexp(logs[k + 1 :]))


def binomial_tail(m: int, k: int, eps: Real) -> float:
    """Return ``1 - sum_{i=0}^{k} C(m, i) eps^i (1 - eps)^(m - i)``.

    Whichever side of the sum is smaller is accumulated directly and the
    other obtained as its complement, so tails near 0 keep relative accuracy.

    Examples
    --------
    >>> round(binomial_tail(10, 1, 0.5), 6)
    0.989258
    """
    _validate_binomial(m, k, eps)
    if k == m:
        return 0.0
    lower, upper = _split_sums(m, k, float(eps))
    return clamp_probability(upper if upper < 0.5 else 1.0 - lower)


def binomial_cdf(m: int, k: int, eps: Real) -> float:
    """Lower sum ``sum_{i=0}^{k} C(m, i) eps^i (1 - eps)^(m - i)``."""
    _validate_binomial(m, k, eps)
    if k == m:
        return 1.0
    lower, upper = _split_sums(m, k, float(eps))
    return clamp_probability(lower if lower < 0.5 else 1.0 - upper)


def _check_shapes(a: int, b: int, x: Real) -> None:
    if int(a) != a or int(b) != b or a < 1 or b < 1:
        raise DomainError(f"Beta shapes must be integers >= 1, got ({a!r}, {b!r})")
    if not 0 <= x <= 1:
        raise DomainError(f"x must lie in [0, 1], got {x!r}")


def beta_pdf(a: int, b: int, x: Real) -> float:
    """Density of Beta(a, b) for integer shapes.

    Uses ``1 / B(a, b) = a * C(a + b - 1, a)`` with an exact integer binomial
    coefficient, so no gamma function is involved.
    """
    _check_shapes(a, b, x)
    n = a + b - 1
    log_norm = math.log(a) + math.log(math.comb(n, a))
    x = float(x)
    if x == 0.0:
        return float(b) if a == 1 else 0.0
    if x == 1.0:
        return float(a) if b == 1 else 0.0
    return math.exp(log_norm + (a - 1) * math.log(x) + (b - 1) * math.log1p(-x))


def beta_cdf(a: int, b: int, x: Real) -> float:
    """CDF of Beta(a, b) for integer shapes.

    Evaluated through the negative-binomial expansion
    ``I_x(a, b) = 1 - (1 - x)^b * sum_{j<a} C(b - 1 + j, j) x^j``,
    which is a different sum from the binomial tail it must agree with.
    """
    _check_shapes(a, b, x)
    x = float(x)
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    j = np.arange(a - 1, dtype=float)
    steps = np.log((b + j) / (j + 1.0)) + math.log(x)
    logs = np.empty(a)
    logs[0] = b * math.log1p(-x)
    logs[1:] = logs[0] + np.cumsum(steps)
    return clamp_probability(1.0 - math.exp(_logsumexp(logs)))


@dataclass(frozen=True)
class BoundSpec:
    """Parameters (m, d, r, epsilon, delta) shared by the scenario bounds."""

    m: int
    d: int = 1
    r: int = 0
    epsilon: Real | None = None
    delta: Real | None = None

    def __post_init__(self) -> None:
        if self.m < 1 or self.d < 1:
            raise DomainError("m and d must be positive")
        if not 0 <= self.r <= self.m - self.d:
            raise DomainError(f"r={self.r} must satisfy 0 <= r <= m - d = {self.m - self.d}")
        if self.epsilon is not None:
            _check_open_unit("epsilon", self.epsilon)
        if self.delta is not None:
            _check_open_unit("delta", self.delta)


def expected_violation_fraction(spec: BoundSpec) -> Fraction:
    return Fraction(spec.r + spec.d, spec.m + 1)


def expected_violation_bound(spec: BoundSpec) -> float:
    """(r + d) / (m + 1): mean of Beta(r + d, m + 1 - r - d)."""
    return float(expected_violation_fraction(spec))


class GenericBound(NamedTuple):
    value: float
    vacuous: bool


def generic_discarding_bound(spec: BoundSpec, expectation: bool = False) -> GenericBound:
    """Bounds for an arbitrary (non-cascade) discarding mechanism.

    The CDF form is ``1 - C(r+d-1, r) * sum_{i<r+d} C(m,i) eps^i (1-eps)^(m-i)``,
    clamped to [0, 1]. With ``expectation=True`` the mean bound
    ``C(r+d-1, r) (r+d)/(m+1)`` is returned unclamped; values above 1 are
    flagged vacuous and emit a :class:`VacuousBoundWarning`.
    """
    factor = math.comb(spec.r + spec.d - 1, spec.r)
    if expectation:
        value = float(factor * expected_violation_fraction(spec))
        vacuous = value > 1.0
    else:
        if spec.epsilon is None:
            raise DomainError("epsilon is required for the CDF form")
        lower = binomial_cdf(spec.m, spec.r + spec.d - 1, spec.epsilon)
        raw = 1.0 - factor * lower
        value = min(max(raw, 0.0), 1.0)
        vacuous = raw <= 0.0
    if vacuous:
        warnings.warn(f"generic discarding bound {value:.6g} is vacuous", VacuousBoundWarning, stacklevel=2)
    return GenericBound(value, vacuous)


class QuantileKind(str, enum.Enum):
    FINITE = "finite"
    INFINITE = "infinite"  # quantile falls on the appended +infinity
    INFEASIBLE = "infeasible"


class QuantileIndex(NamedTuple):
    """Rank ``p`` (1-based) in the sorted scores and implied discard count ``r = m - p``."""

    p: int
    r: int
    kind: QuantileKind

    @property
    def finite(self) -> bool:
        return self.kind is QuantileKind.FINITE


def _index_from_rank(m: int, p: int) -> QuantileIndex:
    p = max(p, 1)
    if p <= m:
        return QuantileIndex(p, m - p, QuantileKind.FINITE)
    if p == m + 1:
        return QuantileIndex(p, m - p, QuantileKind.INFINITE)
    return QuantileIndex(p, m - p, QuantileKind.INFEASIBLE)


def quantile_index(m: int, delta: Real) -> QuantileIndex:
    """p = ceil((1 - delta)(m + 1)) and r = m - p.

    ``p == m + 1`` (delta < 1/(m+1)) is reported as ``QuantileKind.INFINITE``:
    the quantile is the appended infinity and r = -1. Pass ``delta`` as a
    :class:`~fractions.Fraction` for exact arithmetic.
    """
    if m < 1:
        raise DomainError("m must be positive")
    _check_open_unit("delta", delta)
    return _index_from_rank(m, ceil_guarded((1 - delta) * (m + 1)))


def sample_size_vanilla(r: int, delta: Real) -> int:
    """Smallest m with (r + 1)/(m + 1) <= delta."""
    if r < 0:
        raise DomainError("r must be non-negative")
    _check_open_unit("delta", delta)
    m = ceil_guarded(Fraction(r + 1) / delta - 1 if isinstance(delta, Fraction) else (r + 1) / delta - 1)
    return max(m, 1)


def sample_size_ccc(r: int, eps: Real, delta: Real) -> int:
    """m = ceil((2/eps)(r + ln(1/delta))); sufficient, not necessary."""
    if r < 0:
        raise DomainError("r must be non-negative")
    _check_open_unit("eps", eps)
    _check_open_unit("delta", delta)
    return max(ceil_guarded(2.0 / float(eps) * (r - math.log(float(delta)))), 1)


def ccc_delta(m: int, eps: Real) -> float:
    """Failure probability sum_{i<=r} C(m,i) eps^i (1-eps)^(m-i), r = m - ceil((1-eps)(m+1)).

    When the quantile falls on the appended infinity the violation is zero
    for every calibration set, so the failure probability is 0.
    """
    idx = quantile_index(m, eps)
    if idx.r < 0:
        return 0.0
    return binomial_cdf(m, idx.r, eps)


def ccc_delta_exact(m: int, eps: Fraction) -> Fraction:
    """Rational form of :func:`ccc_delta`; intended for small m."""
    idx = quantile_index(m, eps)
    if idx.r < 0:
        return Fraction(0)
    return sum((math.comb(m, i) * eps**i * (1 - eps) ** (m - i) for i in range(idx.r + 1)), Fraction(0))


def lindemann_r(m: int, eps: Real, delta: Real) -> QuantileIndex:
    """Discard count for the confidence-corrected quantile level 1 - eps + sqrt(ln(1/delta)/(2m)).

    The result is ``INFINITE`` when the rank lands on the appended infinity and
    ``INFEASIBLE`` when it lands beyond it; both are values, not errors.
    """
    if m < 1:
        raise DomainError("m must be positive")
    _check_open_unit("eps", eps)
    _check_open_unit("delta", delta)
    level = 1.0 - float(eps) + math.sqrt(-math.log(float(delta)) / (2.0 * m))
    return _index_from_rank(m, ceil_guarded(level * (m + 1)))
