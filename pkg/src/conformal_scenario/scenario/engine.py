"""Solving scenario programs, support sets and cascade discarding."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .lp import DUAL_TOL, solve_lp
from .program import (
    ACTIVE_TOL,
    FEAS_TOL,
    MOVE_TOL,
    InfeasibleProgram,
    LinearScenarioProgram,
    ScenarioSolution,
)


@dataclass(frozen=True)
class CascadeResult:
    """Final solution of a cascade plus what happened at each stage.

    ``stage_tight[k]`` is True when every sample removed at stage ``k`` is
    violated by all later interim solutions and by the final one.
    """

    solution: ScenarioSolution
    stages: tuple[tuple[int, ...], ...]
    stage_objectives: tuple[float, ...]
    stage_tight: tuple[bool, ...]
    degenerate: bool

    @property
    def tight(self) -> bool:
        return all(self.stage_tight)


def _fast_support(
    program: LinearScenarioProgram, basis: Sequence[int], multipliers: np.ndarray, active: Sequence[int]
) -> tuple[tuple[int, ...], bool]:
    """Support set read off the optimal basis.

    Valid when the active samples are exactly the samples of basic rows
    with strictly positive multipliers; anything else (extra active rows,
    zero multipliers) is reported as degenerate.
    """
    n_rows = len(program.b)
    basic_samples = {int(program.groups[i]) for i, y in zip(basis, multipliers) if i < n_rows and y > DUAL_TOL}
    zero_basic = any(i < n_rows and y <= DUAL_TOL for i, y in zip(basis, multipliers))
    ok = basic_samples == set(active) and not zero_basic
    return tuple(sorted(basic_samples)), not ok


def solve(
    program: LinearScenarioProgram,
    discarded: Iterable[int] = (),
    warm_basis: tuple[int, ...] | None = None,
) -> ScenarioSolution:
    """Unique (tie-broken) minimizer of the program with the given samples removed.

    The support set stored on the result comes from the optimal basis; use
    :func:`support_set` for the removal-test ground truth.
    """
    discarded = tuple(int(i) for i in discarded)
    enabled = program.without(discarded) if discarded else None
    res = solve_lp(
        program.cost,
        program.A,
        program.b,
        program.box[:, 0],
        program.box[:, 1],
        enabled,
        warm_basis,
        stacked=program.stacked_rows,
    )
    x = res.x
    g = program.constraint_values(x)
    keep = np.ones(program.n_samples, dtype=bool)
    keep[list(discarded)] = False
    active = tuple(int(i) for i in np.flatnonzero(keep & (np.abs(g) <= ACTIVE_TOL)))
    support, degenerate = _fast_support(program, res.basis, res.multipliers, active)
    degenerate = degenerate or res.tie_broken or len(support) != program.dimension
    return ScenarioSolution(
        x_star=x,
        objective=float(program.cost @ x),
        active_indices=active,
        support_indices=support,
        discarded_indices=discarded,
        degenerate=degenerate,
        basis=res.basis,
    )


def support_set(program: LinearScenarioProgram, solution: ScenarioSolution) -> tuple[int, ...]:
    """Removal test: samples whose deletion moves the optimizer by more than ``MOVE_TOL``.

    Every retained sample is deleted in turn and the program re-solved
    (warm-started from the optimal basis, which only shortcuts the search,
    not the answer).
    """
    out = []
    retained = sorted(set(range(program.n_samples)) - set(solution.discarded_indices))
    for i in retained:
        other = solve(program, solution.discarded_indices + (i,), warm_basis=solution.basis)
        if np.max(np.abs(other.x_star - solution.x_star)) > MOVE_TOL:
            out.append(i)
    return tuple(out)


def cascade_discard(program: LinearScenarioProgram, r: int, audit: bool = False) -> CascadeResult:
    """Remove ``r`` samples in ``r/d`` stages, dropping the whole support set each stage.

    With ``audit=True`` every stage's support set is taken from the removal
    test instead of the optimal basis.
    """
    d = program.dimension
    if r < 0 or r % d:
        raise ValueError(f"r={r} must be a non-negative multiple of d={d}")
    if r > program.n_samples - d:
        raise ValueError(f"r={r} exceeds m - d = {program.n_samples - d}")
    discarded: tuple[int, ...] = ()
    stages: list[tuple[int, ...]] = []
    interim: list[ScenarioSolution] = []
    degenerate = False
    sol = solve(program)
    for _ in range(r // d):
        support = support_set(program, sol) if (audit or sol.degenerate) else sol.support_indices
        if len(support) != d:
            degenerate = True
        if not support:
            raise InfeasibleProgram("empty support set: discarding cannot change the solution")
        stages.append(tuple(support))
        interim.append(sol)
        discarded = discarded + tuple(support)
        sol = solve(program, discarded)
    degenerate = degenerate or sol.degenerate
    interim.append(sol)

    tight = []
    for k, removed in enumerate(stages):
        idx = list(removed)
        tight.append(all(bool(np.all(program.constraint_values(s_.x_star)[idx] > FEAS_TOL)) for s_ in interim[k + 1 :]))
    final = replace(sol, discarded_indices=discarded)
    return CascadeResult(
        solution=final,
        stages=tuple(stages),
        stage_objectives=tuple(s_.objective for s_ in interim),
        stage_tight=tuple(tight),
        degenerate=degenerate,
    )


@dataclass(frozen=True)
class OrderProgramResult:
    r_p: float
    p_index: int
    discarded_scores: tuple[float, ...]
    discarded_indices: tuple[int, ...]
    tie_count: int = 0


def _stable_order(scores: np.ndarray) -> np.ndarray:
    # ties broken by original sample index
    return np.argsort(scores, kind="stable")


def solve_order_program(scores: Sequence[float], r: int, appended_infinity: bool = False) -> OrderProgramResult:
    """Minimize R_bar subject to R_i <= R_bar after discarding the r largest scores.

    The cascade is run literally: the current maximum is removed ``r``
    times and the remaining maximum is the optimizer, i.e. the (m - r)-th
    smallest score. ``r == m`` leaves no constraint and is rejected unless
    ``appended_infinity`` asks for the +inf quantile.
    """
    values = np.asarray(getattr(scores, "values", scores), dtype=float).reshape(-1)
    m = values.size
    if not 0 <= r <= m:
        raise ValueError(f"r={r} must lie in [0, m={m}]")
    tie_count = m - np.unique(values).size
    order = _stable_order(values)
    remaining = list(order)
    removed_idx = []
    for _ in range(r):
        removed_idx.append(int(remaining.pop()))
    removed = tuple(float(values[i]) for i in removed_idx)
    if r == m:
        if not appended_infinity:
            raise ValueError("r = m discards every constraint; use the conformal quantile for +inf")
        return OrderProgramResult(math.inf, m + 1, removed, tuple(removed_idx), tie_count)
    return OrderProgramResult(float(values[remaining[-1]]), m - r, removed, tuple(removed_idx), tie_count)
