"""Strictly validated experiment configuration.

Probabilities (``epsilon``, ``delta``) accept JSON numbers, integers or
``"a/b"`` strings and are stored as exact :class:`~fractions.Fraction`
values; a decimal literal such as ``0.1`` becomes exactly 1/10. Knife-edge
quantities like ``delta = d/(m+1)`` can therefore be written without
ceiling hazards.
"""

from __future__ import annotations

import json
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Annotated, Any

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, PlainSerializer, ValidationError, model_validator

from ..bounds import BoundSpec, DomainError
from ..scenario.families import DISTRIBUTIONS, FAMILIES, ProgramFamily, make_distribution

__all__ = [
    "ConfigError",
    "Experiment",
    "ExperimentFile",
    "SpecModel",
    "TrialConfig",
    "load_experiment_file",
]

MAX_SEED = 2**64 - 1


class ConfigError(ValueError):
    """The experiment configuration is malformed or inconsistent."""


class Experiment(str, Enum):
    VANILLA_COVERAGE = "vanilla_coverage"
    VIOLATION_CDF = "violation_cdf"
    VIOLATION_MEAN = "violation_mean"
    PROP1_EQUIVALENCE = "prop1_equivalence"
    THM4_MISCOVERAGE = "thm4_miscoverage"
    CCC_COVERAGE = "ccc_coverage"


def _to_fraction(value: Any) -> Any:
    if value is None or isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ValueError("expected a number or an 'a/b' string")
    if isinstance(value, (int, float, str)):
        try:
            # str() keeps the decimal a user typed: 0.1 -> 1/10, not the nearest double
            return Fraction(str(value).strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"cannot read {value!r} as a rational number") from exc
    raise ValueError("expected a number or an 'a/b' string")


def _fraction_text(value: Fraction) -> str:
    return str(value)


Rational = Annotated[Fraction, BeforeValidator(_to_fraction), PlainSerializer(_fraction_text, return_type=str)]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, arbitrary_types_allowed=True)


class SpecModel(_Strict):
    m: int = Field(ge=1)
    d: int = Field(default=1, ge=1)
    r: int = Field(default=0, ge=0)
    epsilon: Rational | None = None
    delta: Rational | None = None

    @model_validator(mode="after")
    def _check(self) -> "SpecModel":
        for name in ("epsilon", "delta"):
            value = getattr(self, name)
            if value is not None and not 0 < value < 1:
                raise ValueError(f"{name} must lie strictly between 0 and 1")
        if self.r > self.m - self.d:
            raise ValueError(f"r={self.r} must not exceed m - d = {self.m - self.d}")
        return self

    def bound_spec(self) -> BoundSpec:
        try:
            return BoundSpec(self.m, self.d, self.r, self.epsilon, self.delta)
        except DomainError as exc:  # pragma: no cover - mirrored by the validator above
            raise ConfigError(str(exc)) from exc


class TrialConfig(_Strict):
    """One Monte Carlo experiment.

    ``n_test = 0`` selects analytic violation probabilities; a positive
    value estimates each V from that many fresh draws. ``expected_override``
    replaces the exact prediction of the primary check and exists only so
    the harness can demonstrate that it does fail.
    """

    experiment: Experiment
    family: str
    distribution: str = "uniform"
    spec: SpecModel
    trials: int = Field(ge=1)
    n_test: int = Field(default=0, ge=0)
    root_seed: int = Field(default=0, ge=0, le=MAX_SEED)
    test_points: int = Field(default=20, ge=1)
    corrected: bool = False
    expected_override: Rational | None = None

    @model_validator(mode="after")
    def _check(self) -> "TrialConfig":
        if self.family not in FAMILIES:
            raise ValueError(f"family: unknown {self.family!r}; choose from {sorted(FAMILIES)}")
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(f"distribution: unknown {self.distribution!r}; choose from {sorted(DISTRIBUTIONS)}")
        natural = {"order": 1, "interval": 2}.get(self.family)
        if natural is not None and self.spec.d != natural:
            raise ValueError(f"spec.d: the {self.family} family has dimension {natural}, got {self.spec.d}")
        if self.family == "random_lp" and self.distribution != "uniform":
            raise ValueError("distribution: the random_lp family always draws standard normal rows")
        return self

    def make_family(self) -> ProgramFamily:
        if self.family == "random_lp":
            return FAMILIES["random_lp"](self.spec.d)
        return FAMILIES[self.family](make_distribution(self.distribution))

    def with_seed(self, root_seed: int) -> "TrialConfig":
        return self.model_copy(update={"root_seed": root_seed})

    def echo(self) -> dict[str, Any]:
        """JSON-ready copy of every parameter, for provenance in reports."""
        return self.model_dump(mode="json")


class ExperimentFile(TrialConfig):
    """A TrialConfig plus the directory that receives the CSV and JSON outputs."""

    out_dir: str = "."

    def trial_config(self) -> TrialConfig:
        return TrialConfig.model_validate(self.model_dump(exclude={"out_dir"}))


def _format_validation_error(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        where = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{where}: {err['msg']}")
    return "; ".join(lines)


def load_experiment_file(path: str | Path, defaults: dict[str, Any] | None = None, **overrides: Any) -> ExperimentFile:
    """Parse an experiment JSON file; raises :class:`ConfigError` naming the offending field.

    ``defaults`` fill fields the file leaves out; non-None ``overrides``
    replace fields the file sets.
    """
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    doc = (defaults or {}) | doc | {k: v for k, v in overrides.items() if v is not None}
    try:
        return ExperimentFile.model_validate(doc)
    except ValidationError as exc:
        raise ConfigError(_format_validation_error(exc)) from None
