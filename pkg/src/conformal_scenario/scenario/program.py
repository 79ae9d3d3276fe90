"""Linear scenario programs and their solutions."""

from __future__ import annotations

import json
from functools import cached_property
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

#: retained constraints must hold to within this slack at the optimizer
FEAS_TOL = 1e-9
#: |g(x*, w)| below this counts as active
ACTIVE_TOL = 1e-7
#: infinity-norm movement of the optimizer that marks a sample as support
MOVE_TOL = 1e-7


class InfeasibleProgram(Exception):
    """The retained constraints and the box have an empty intersection."""


class ProgramSchemaError(ValueError):
    """A program JSON document does not follow the expected schema."""


@dataclass(frozen=True, eq=False)
class LinearScenarioProgram:
    """minimize c.x over a box subject to one affine group per sample.

    Row ``k`` encodes ``A[k] . x - b[k] <= 0`` and belongs to sample
    ``groups[k]``. The constraint function of sample ``i`` is the maximum of
    its rows, so a sample may contribute more than one half-space (e.g. the
    two sides of ``|t - w| <= rho``). Without ``groups`` every row is its own
    sample.
    """

    cost: np.ndarray
    A: np.ndarray
    b: np.ndarray
    box: np.ndarray
    groups: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        cost = np.asarray(self.cost, dtype=float).reshape(-1)
        d = cost.size
        A = np.asarray(self.A, dtype=float).reshape(-1, d) if d else np.zeros((0, 0))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        box = np.asarray(self.box, dtype=float).reshape(-1, 2)
        groups = np.arange(len(b)) if self.groups is None else np.asarray(self.groups, dtype=int).reshape(-1)
        if d < 1:
            raise ValueError("dimension must be positive")
        if A.shape != (len(b), d):
            raise ValueError(f"constraint matrix has shape {A.shape}, expected ({len(b)}, {d})")
        if box.shape != (d, 2) or not np.all(np.isfinite(box)) or not np.all(box[:, 0] < box[:, 1]):
            raise ValueError("box must hold one finite (lo, hi) pair per coordinate with lo < hi")
        if groups.shape != b.shape:
            raise ValueError("groups must label every constraint row")
        if len(groups) and (groups.min() < 0 or set(np.unique(groups)) != set(range(groups.max() + 1))):
            raise ValueError("groups must label samples 0..m-1 without gaps")
        for name, value in (("cost", cost), ("A", A), ("b", b), ("box", box), ("groups", groups)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def dimension(self) -> int:
        return self.cost.size

    @property
    def n_samples(self) -> int:
        return int(self.groups.max()) + 1 if len(self.groups) else 0

    @cached_property
    def _contiguous_groups(self) -> np.ndarray | None:
        # start offsets when each sample's rows are adjacent and in order
        g = self.groups
        if len(g) == 0 or g[0] != 0 or np.any(np.diff(g) < 0) or np.any(np.diff(g) > 1):
            return None
        return np.flatnonzero(np.r_[True, np.diff(g) > 0])

    @cached_property
    def stacked_rows(self) -> tuple[np.ndarray, np.ndarray]:
        from .lp import stack_rows

        return stack_rows(self.A, self.b, self.box[:, 0], self.box[:, 1])

    def constraint_values(self, x: np.ndarray) -> np.ndarray:
        """g(x, w_i) for every sample i: the max over that sample's rows."""
        rows = self.A @ np.asarray(x, dtype=float) - self.b
        starts = self._contiguous_groups
        if starts is not None:
            return rows if len(starts) == len(rows) else np.maximum.reduceat(rows, starts)
        out = np.full(self.n_samples, -np.inf)
        np.maximum.at(out, self.groups, rows)
        return out

    def without(self, samples: Sequence[int]) -> np.ndarray:
        """Boolean row mask that drops every row of the given samples."""
        samples = np.asarray(list(samples), dtype=int)
        if self._contiguous_groups is not None and len(self._contiguous_groups) == len(self.b):
            mask = np.ones(len(self.b), dtype=bool)
            mask[samples] = False
            return mask
        return ~np.isin(self.groups, samples)

    # JSON: {dimension, cost[], constraints[[a...], b][], box[[lo, hi]...]} (+ optional groups[])
    def to_dict(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "dimension": self.dimension,
            "cost": self.cost.tolist(),
            "constraints": [[row.tolist(), float(bk)] for row, bk in zip(self.A, self.b)],
            "box": self.box.tolist(),
        }
        if not np.array_equal(self.groups, np.arange(len(self.b))):
            doc["groups"] = self.groups.tolist()
        return doc

    @classmethod
    def from_dict(cls, doc: Any) -> "LinearScenarioProgram":
        if not isinstance(doc, dict):
            raise ProgramSchemaError("program document must be a JSON object")
        allowed = {"dimension", "cost", "constraints", "box", "groups"}
        unknown = sorted(set(doc) - allowed)
        if unknown:
            raise ProgramSchemaError(f"unknown field(s): {', '.join(unknown)}")
        missing = sorted({"dimension", "cost", "constraints", "box"} - set(doc))
        if missing:
            raise ProgramSchemaError(f"missing field(s): {', '.join(missing)}")
        d = doc["dimension"]
        if not isinstance(d, int) or isinstance(d, bool) or d < 1:
            raise ProgramSchemaError("dimension: expected a positive integer")
        try:
            cost = np.asarray(doc["cost"], dtype=float)
            rows = doc["constraints"]
            A = np.asarray([r[0] for r in rows], dtype=float).reshape(len(rows), -1) if rows else np.zeros((0, d))
            b = np.asarray([r[1] for r in rows], dtype=float)
            box = np.asarray(doc["box"], dtype=float)
        except (TypeError, ValueError, IndexError, KeyError) as exc:
            raise ProgramSchemaError(f"malformed numeric field: {exc}") from exc
        if cost.shape != (d,):
            raise ProgramSchemaError(f"cost: expected {d} entries")
        if A.shape[1:] != (d,) or any(len(r) != 2 for r in rows):
            raise ProgramSchemaError(f"constraints: each entry must be [[a_1..a_{d}], b]")
        if box.shape != (d, 2):
            raise ProgramSchemaError(f"box: expected {d} [lo, hi] pairs")
        try:
            return cls(cost=cost, A=A, b=b, box=box, groups=doc.get("groups"))
        except ValueError as exc:
            raise ProgramSchemaError(str(exc)) from exc

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def load(cls, path: str | Path) -> "LinearScenarioProgram":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ProgramSchemaError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(doc)


@dataclass(frozen=True)
class ScenarioSolution:
    x_star: np.ndarray
    objective: float
    active_indices: tuple[int, ...]
    support_indices: tuple[int, ...]
    discarded_indices: tuple[int, ...] = ()
    degenerate: bool = False
    basis: tuple[int, ...] = ()  # optimal basis rows, kept for warm starts
