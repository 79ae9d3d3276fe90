"""Dense dual simplex for small boxed LPs.

Solves ``min c.x  s.t.  G x <= h`` where the last ``2d`` rows of ``G`` are
the box faces. Working on the dual ``min h.y, G^T y = -c, y >= 0`` means a
basis is a set of ``d`` rows whose intersection point is the current
primal iterate; the box faces give a dual-feasible starting basis for free,
so no phase one is needed. The most violated row enters; after a
degenerate pivot the solver switches to Bland's rule (smallest violated
index) until the objective moves again, which rules out cycling.

When the optimal face is not a single point the solver applies a
lexicographic tie-break: among optimal points it minimizes x_1, then x_2,
and so on. The returned optimizer is therefore a function of the program
alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .program import FEAS_TOL, InfeasibleProgram

PIVOT_TOL = 1e-12
DUAL_TOL = 1e-12


@dataclass(frozen=True)
class LPResult:
    x: np.ndarray
    basis: tuple[int, ...]
    multipliers: np.ndarray  # dual values of the basis rows, same order
    iterations: int
    tie_broken: bool


def box_rows(lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d = lo.size
    eye = np.eye(d)
    return np.vstack([eye, -eye]), np.concatenate([hi, -lo])


def _initial_basis(c: np.ndarray, n_rows: int) -> list[int]:
    # upper face of coordinate j when c_j < 0, lower face otherwise
    d = c.size
    return [n_rows + j if c[j] < 0 else n_rows + d + j for j in range(d)]


def _dual_simplex(
    c: np.ndarray,
    G: np.ndarray,
    h: np.ndarray,
    enabled: np.ndarray,
    basis: list[int],
    max_iter: int,
) -> tuple[np.ndarray, list[int], np.ndarray, int]:
    bland = False
    for it in range(max_iter):
        B_inv = np.linalg.inv(G[basis])
        y = -(B_inv.T @ c)
        x = B_inv @ h[basis]
        slack = np.where(enabled, h - G @ x, np.inf)
        violated = np.flatnonzero(slack < -FEAS_TOL)
        if violated.size == 0:
            return x, basis, y, it
        enter = int(violated[0]) if bland else int(np.argmin(slack))
        u = B_inv.T @ G[enter]
        cand = np.flatnonzero(u > PIVOT_TOL)
        if cand.size == 0:
            raise InfeasibleProgram("no point of the box satisfies all retained constraints")
        ratios = np.maximum(y[cand], 0.0) / u[cand]
        best = ratios.min()
        ties = cand[ratios <= best * (1 + 1e-12) + 1e-300]
        leave = min(ties, key=lambda i: basis[i])
        # degenerate pivot: stay on Bland's rule until the objective moves again
        bland = best <= DUAL_TOL
        basis = basis.copy()
        basis[leave] = enter
    raise RuntimeError(f"dual simplex did not converge in {max_iter} iterations")


def stack_rows(A: np.ndarray, b: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """[A; I; -I] and [b; hi; -lo]: sample rows first, then upper and lower box faces."""
    Gb, hb = box_rows(np.asarray(lo, float), np.asarray(hi, float))
    d = Gb.shape[1]
    return np.vstack([np.asarray(A, float).reshape(-1, d), Gb]), np.concatenate([np.asarray(b, float), hb])


def solve_lp(
    c: np.ndarray,
    A: np.ndarray,
    b: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    enabled: np.ndarray | None = None,
    warm_basis: tuple[int, ...] | None = None,
    stacked: tuple[np.ndarray, np.ndarray] | None = None,
) -> LPResult:
    """Minimize ``c.x`` subject to the enabled rows of ``A x <= b`` and ``lo <= x <= hi``.

    ``warm_basis`` (row indices into ``[A; I; -I]``) is used as the starting
    basis when it is dual feasible and contains no disabled row; otherwise
    the solver starts from the box faces. ``stacked`` may carry a
    precomputed :func:`stack_rows` result. Raises
    :class:`~conformal_scenario.scenario.program.InfeasibleProgram`.
    """
    c = np.asarray(c, dtype=float)
    d = c.size
    n = len(b)
    G, h = stacked if stacked is not None else stack_rows(A, b, lo, hi)
    mask = np.ones(n + 2 * d, dtype=bool)
    if enabled is not None:
        mask[:n] = enabled
    max_iter = 50 * (n + 2 * d) + 100

    basis = _initial_basis(c, n)
    if warm_basis is not None and len(warm_basis) == d and all(mask[i] for i in warm_basis):
        try:
            if np.all(np.linalg.solve(G[list(warm_basis)].T, -c) >= -DUAL_TOL):
                basis = list(warm_basis)
        except np.linalg.LinAlgError:
            pass
    x, basis, y, iterations = _dual_simplex(c, G, h, mask, basis, max_iter)

    # canonical row order so x depends only on the basis set
    order = np.argsort(basis)
    basis = [basis[i] for i in order]
    y = y[order]
    x = np.linalg.solve(G[basis], h[basis])

    tie_broken = False
    if np.any(y <= DUAL_TOL):
        x = _lexicographic_refine(c, G, h, mask, x, max_iter)
        tie_broken = True
    return LPResult(x=x, basis=tuple(int(i) for i in basis), multipliers=y, iterations=iterations, tie_broken=tie_broken)


def _lexicographic_refine(
    c: np.ndarray, G: np.ndarray, h: np.ndarray, mask: np.ndarray, x: np.ndarray, max_iter: int
) -> np.ndarray:
    """Lexicographically smallest point of the optimal face {x feasible : c.x <= c.x*}."""
    d = c.size
    n_rows = G.shape[0] - 2 * d
    extra_G = [c]
    extra_h = [float(c @ x)]
    for k in range(d):
        Gk = np.vstack([G[:n_rows], np.asarray(extra_G), G[n_rows:]])
        hk = np.concatenate([h[:n_rows], extra_h, h[n_rows:]])
        mk = np.concatenate([mask[:n_rows], np.ones(len(extra_G), bool), mask[n_rows:]])
        ek = np.zeros(d)
        ek[k] = 1.0
        start = _initial_basis(ek, Gk.shape[0] - 2 * d)
        x, _, _, _ = _dual_simplex(ek, Gk, hk, mk, start, max_iter)
        extra_G.append(ek)
        extra_h.append(float(x[k]))
    return x
