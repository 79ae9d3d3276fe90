"""Sample distributions, scenario-program families and violation probabilities.

A family turns a batch of raw samples into a :class:`LinearScenarioProgram`
and knows how to evaluate the constraint function on fresh samples. Families
whose violation probability has a closed form expose it through
:meth:`ProgramFamily.analytic_violation`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .program import LinearScenarioProgram, ScenarioSolution

#: half-width of the default box; far outside the range of any generated sample
BOX_HALF_WIDTH = 1e4


class AnalyticUnavailable(RuntimeError):
    """The family has no closed-form violation probability; use Monte Carlo mode."""


def _phi(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


@dataclass(frozen=True)
class Uniform:
    low: float = 0.0
    high: float = 1.0
    name = "uniform"

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.uniform(self.low, self.high, size)

    def cdf(self, x: float) -> float:
        return min(max((x - self.low) / (self.high - self.low), 0.0), 1.0)


@dataclass(frozen=True)
class Gaussian:
    mean: float = 0.0
    std: float = 1.0
    name = "gaussian"

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.normal(self.mean, self.std, size)

    def cdf(self, x: float) -> float:
        if math.isinf(x):
            return 1.0 if x > 0 else 0.0
        return _phi((x - self.mean) / self.std)


@dataclass(frozen=True)
class Exponential:
    rate: float = 1.0
    name = "exponential"

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.exponential(1.0 / self.rate, size)

    def cdf(self, x: float) -> float:
        return 0.0 if x <= 0 else -math.expm1(-self.rate * x)


Distribution = Uniform | Gaussian | Exponential
DISTRIBUTIONS = {"uniform": Uniform, "gaussian": Gaussian, "exponential": Exponential}


def make_distribution(name: str, **params: float) -> Distribution:
    try:
        return DISTRIBUTIONS[name](**params)
    except KeyError:
        raise ValueError(f"unknown distribution {name!r}; choose from {sorted(DISTRIBUTIONS)}") from None


class ProgramFamily:
    """Base class: samples -> program, and constraint evaluation on fresh samples."""

    name: str
    dimension: int

    def draw(self, rng: np.random.Generator, m: int) -> np.ndarray:
        raise NotImplementedError

    def build(self, samples: np.ndarray) -> LinearScenarioProgram:
        raise NotImplementedError

    def constraint(self, x: np.ndarray, samples: np.ndarray) -> np.ndarray:
        """g(x, w) for each fresh sample w."""
        raise NotImplementedError

    def analytic_violation(self, x: np.ndarray) -> float:
        raise AnalyticUnavailable(f"{self.name} has no closed-form violation probability; use monte_carlo mode")

    @property
    def has_analytic(self) -> bool:
        return type(self).analytic_violation is not ProgramFamily.analytic_violation

    def canonical_order(self, samples: np.ndarray) -> np.ndarray:
        """Permutation sorting samples into a canonical order (lexicographic)."""
        s = np.asarray(samples, dtype=float)
        if s.ndim == 1:
            return np.argsort(s, kind="stable")
        return np.lexsort(s.T[::-1])


@dataclass(frozen=True)
class OrderFamily(ProgramFamily):
    """One-dimensional program: minimize x subject to x >= R_i."""

    dist: Distribution = Uniform()
    name = "order"
    dimension = 1

    def draw(self, rng, m):
        return self.dist.sample(rng, m)

    def build(self, samples):
        s = np.asarray(samples, dtype=float).reshape(-1)
        half = max(BOX_HALF_WIDTH, 10.0 * float(np.max(np.abs(s), initial=0.0)))
        return LinearScenarioProgram(cost=[1.0], A=-np.ones((s.size, 1)), b=-s, box=[[-half, half]])

    def constraint(self, x, samples):
        return np.asarray(samples, dtype=float) - float(np.asarray(x).reshape(-1)[0])

    def analytic_violation(self, x):
        return 1.0 - self.dist.cdf(float(np.asarray(x).reshape(-1)[0]))


@dataclass(frozen=True)
class IntervalFamily(ProgramFamily):
    """Smallest interval covering scalar samples: minimize rho s.t. |t - w_i| <= rho, x = (t, rho)."""

    dist: Distribution = Uniform()
    name = "interval"
    dimension = 2

    def draw(self, rng, m):
        return self.dist.sample(rng, m)

    def build(self, samples):
        s = np.asarray(samples, dtype=float).reshape(-1)
        A = np.empty((2 * s.size, 2))
        A[0::2] = (1.0, -1.0)  # t - rho <= w
        A[1::2] = (-1.0, -1.0)  # -t - rho <= -w
        b = np.empty(2 * s.size)
        b[0::2] = s
        b[1::2] = -s
        half = max(BOX_HALF_WIDTH, 10.0 * float(np.max(np.abs(s), initial=0.0)))
        return LinearScenarioProgram(
            cost=[0.0, 1.0], A=A, b=b, box=[[-half, half], [-half, half]], groups=np.repeat(np.arange(s.size), 2)
        )

    def constraint(self, x, samples):
        t, rho = np.asarray(x, dtype=float).reshape(-1)
        return np.abs(np.asarray(samples, dtype=float) - t) - rho

    def analytic_violation(self, x):
        t, rho = np.asarray(x, dtype=float).reshape(-1)
        return min(max(1.0 - (self.dist.cdf(t + rho) - self.dist.cdf(t - rho)), 0.0), 1.0)


@dataclass(frozen=True)
class RandomLPFamily(ProgramFamily):
    """minimize -x_d subject to a_i.x <= 1 with a_i ~ N(0, I_d).

    Fully supported only empirically (the box or a near-singular vertex can
    break it), so trials audit the support size. a.x* ~ N(0, |x*|^2) gives
    the closed form V = 1 - Phi(1/|x*|).
    """

    d: int = 3
    name = "random_lp"

    @property
    def dimension(self) -> int:  # type: ignore[override]
        return self.d

    def draw(self, rng, m):
        return rng.standard_normal((m, self.d))

    def build(self, samples):
        a = np.asarray(samples, dtype=float).reshape(-1, self.d)
        cost = np.zeros(self.d)
        cost[-1] = -1.0
        box = np.tile([-BOX_HALF_WIDTH, BOX_HALF_WIDTH], (self.d, 1))
        return LinearScenarioProgram(cost=cost, A=a, b=np.ones(len(a)), box=box)

    def constraint(self, x, samples):
        return np.asarray(samples, dtype=float).reshape(-1, self.d) @ np.asarray(x, dtype=float) - 1.0

    def analytic_violation(self, x):
        norm = float(np.linalg.norm(x))
        return 0.0 if norm == 0.0 else 1.0 - _phi(1.0 / norm)


FAMILIES = {"order": OrderFamily, "interval": IntervalFamily, "random_lp": RandomLPFamily}


def gen_order_problem(dist: Distribution, m: int, seed: int) -> tuple[LinearScenarioProgram, np.ndarray, OrderFamily]:
    family = OrderFamily(dist)
    samples = family.draw(np.random.default_rng(seed), m)
    return family.build(samples), samples, family


def gen_interval_cover(
    dist: Distribution, m: int, seed: int
) -> tuple[LinearScenarioProgram, np.ndarray, IntervalFamily]:
    if m < 2:
        raise ValueError("interval covering needs m >= d = 2")
    family = IntervalFamily(dist)
    samples = family.draw(np.random.default_rng(seed), m)
    return family.build(samples), samples, family


def gen_random_lp(d: int, m: int, seed: int) -> tuple[LinearScenarioProgram, np.ndarray, RandomLPFamily]:
    if m < d:
        raise ValueError("need m >= d")
    family = RandomLPFamily(d)
    samples = family.draw(np.random.default_rng(seed), m)
    return family.build(samples), samples, family


class ViolationEstimate(NamedTuple):
    value: float
    std_error: float
    n_test: int  # 0 for analytic


def violation_probability(
    solution: ScenarioSolution | np.ndarray,
    family: ProgramFamily,
    mode: str = "analytic",
    n_test: int = 0,
    rng: np.random.Generator | None = None,
) -> ViolationEstimate:
    """V = P{g(x*, w) > 0}, exactly or from ``n_test`` fresh draws.

    Monte Carlo mode reports the binomial standard error sqrt(V(1-V)/n).
    """
    x = solution.x_star if isinstance(solution, ScenarioSolution) else np.asarray(solution, dtype=float)
    if mode == "analytic":
        return ViolationEstimate(family.analytic_violation(x), 0.0, 0)
    if mode != "monte_carlo":
        raise ValueError(f"mode must be 'analytic' or 'monte_carlo', got {mode!r}")
    if n_test < 1:
        raise ValueError("monte_carlo mode needs n_test >= 1")
    rng = rng if rng is not None else np.random.default_rng()
    hits = int(np.count_nonzero(family.constraint(x, family.draw(rng, n_test)) > 0))
    v = hits / n_test
    return ViolationEstimate(v, math.sqrt(v * (1 - v) / n_test), n_test)
