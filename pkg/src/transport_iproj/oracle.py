"""Slow, independent minimiser of ``D(T || S)`` over a transportation polytope.

Frank-Wolfe over the enumerated vertices, with exact line search.  It shares
nothing with the IPF path beyond the vertex list and exists to cross-check it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DimensionError, JointTable, Polytope, kl_array, support
from .projection import ConvergenceError, UndefinedProjectionError, vertices_within

LINE_SEARCH_TOL = 1e-14


@dataclass(frozen=True)
class OracleResult:
    table: JointTable
    objective: float
    iterations: int
    duality_gap: float
    objectives: tuple = ()


def _derivative(gamma: float, x: np.ndarray, d: np.ndarray, s: np.ndarray) -> float:
    y = x + gamma * d
    moving = d != 0
    if np.any(moving & (y <= 0)):
        # Some coordinate hits zero while shrinking: slope is +inf there.
        return math.inf
    live = y > 0
    return float(np.dot(d[live], np.log(y[live] / s[live]) + 1.0))


def _line_search(x: np.ndarray, d: np.ndarray, s: np.ndarray) -> float:
    if _derivative(1.0, x, d, s) <= 0:
        return 1.0
    lo, hi = 0.0, 1.0
    while hi - lo > LINE_SEARCH_TOL:
        mid = 0.5 * (lo + hi)
        if _derivative(mid, x, d, s) > 0:
            hi = mid
        else:
            lo = mid
    return lo


def fw_minimize(source: JointTable, target: Polytope, gap_tol: float = 1e-8,
                max_iter: int = 100_000) -> OracleResult:
    """Frank-Wolfe on ``D(. || source)`` over the vertices of ``target`` that
    fit inside the source support, started at their barycenter."""
    if source.shape != target.shape:
        raise DimensionError(f"source is {source.shape}, target is {target.shape}")
    verts = vertices_within(target, support(source, 0))
    if len(verts) == 0:
        raise UndefinedProjectionError("no table of the target fits inside the source support")
    shape = target.shape
    V = verts.reshape(len(verts), -1)
    s = source.as_array().ravel()
    x = V.mean(axis=0)
    gap = math.inf
    history = []
    for it in range(max_iter + 1):
        history.append(kl_array(x, s))
        pos = x > 0
        grad = np.zeros_like(x)
        grad[pos] = np.log(x[pos] / s[pos]) + 1.0
        scores = V @ grad
        k = int(np.argmin(scores))
        gap = max(0.0, float(grad @ x - scores[k]))
        if gap <= gap_tol:
            table = JointTable.from_array(x.reshape(shape))
            return OracleResult(table, history[-1], it, gap, tuple(history))
        if it == max_iter:
            break
        d = V[k] - x
        x = x + _line_search(x, d, s) * d
    raise ConvergenceError(f"Frank-Wolfe gap {gap:.3e} above {gap_tol:.1e} after {max_iter} steps",
                           last=x.reshape(shape), residual=gap)
