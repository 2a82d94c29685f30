"""I-projections between transportation polytopes, and checks on them.

The projection of a source table onto ``C(P, Q)`` is computed by iterative
proportional fitting.  Before fitting, the source is cut down to the support
of the face ``{T : supp(T) within supp(source)}`` of the target, found
exactly by max-flow.  That both decides existence and keeps the fit on a
face whose relative interior holds the answer, where IPF converges
geometrically instead of crawling towards a boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .core import (
    DimensionError,
    JointTable,
    Polytope,
    TransportError,
    ValidationError,
    kl_array,
    support,
)
from .polytope import face_support, fh_lower, fh_upper

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 10**6


class ConvergenceError(TransportError):
    """Iteration budget exhausted before the stopping rule was met."""

    def __init__(self, message: str, last=None, residual: float = math.nan):
        super().__init__(message)
        self.last = last
        self.residual = residual


class UndefinedProjectionError(TransportError):
    """A projection needed by a composite operation does not exist."""


class PreconditionError(TransportError, ValueError):
    pass


@dataclass(frozen=True)
class ProjectionReport:
    """Result of :func:`project`.

    ``result`` is ``None`` when no table of the target has support inside the
    source's support, in which case ``feasibility`` is False and
    ``divergence_value`` is infinite.
    """

    result: JointTable | None
    iterations: int
    marginal_residual: float
    divergence_value: float
    feasibility: bool
    pythagorean_residual: float | None = None

    @property
    def defined(self) -> bool:
        return self.result is not None


def _targets(target: Polytope) -> tuple[np.ndarray, np.ndarray]:
    exact = target.to_exact()
    return exact.row_marginal.as_array(), exact.col_marginal.as_array()


def marginal_residuals(a: np.ndarray, p: np.ndarray, q: np.ndarray) -> tuple[float, float]:
    return float(np.abs(a.sum(axis=1) - p).sum()), float(np.abs(a.sum(axis=0) - q).sum())


def ipf_sweeps(start: np.ndarray, p: np.ndarray, q: np.ndarray) -> Iterator[tuple[np.ndarray, float, float]]:
    """Endless iterative proportional fitting.

    Each step rescales rows to ``p`` and then columns to ``q``, and yields
    the table with its row and column L1 residuals.  Rows or columns with
    zero target mass are zeroed.
    """
    a = np.array(start, dtype=float)
    while True:
        rs = a.sum(axis=1)
        f = np.divide(p, rs, out=np.zeros_like(p), where=rs > 0)
        a *= f[:, None]
        cs = a.sum(axis=0)
        g = np.divide(q, cs, out=np.zeros_like(q), where=cs > 0)
        a *= g[None, :]
        yield (a, *marginal_residuals(a, p, q))


def project(source: JointTable, target: Polytope, tol: float = DEFAULT_TOL,
            max_iter: int = DEFAULT_MAX_ITER) -> ProjectionReport:
    """I-projection of ``source`` onto ``target``.

    Stops once the summed row and column L1 residuals are at most ``tol``.
    Raises :class:`ConvergenceError` if that takes more than ``max_iter``
    sweeps.
    """
    if source.shape != target.shape:
        raise DimensionError(f"source is {source.shape}, target is {target.shape}")
    if not tol > 0:
        raise ValidationError("tol must be positive")
    face = face_support(target, support(source, 0))
    if face is None:
        return ProjectionReport(None, 0, math.nan, math.inf, False)

    s = source.as_array()
    p, q = _targets(target)
    a = np.where(face.mask(), s, 0.0)
    residual = sum(marginal_residuals(a, p, q))
    iterations = 0
    if residual > tol:
        for a, rr, cr in ipf_sweeps(a, p, q):
            iterations += 1
            residual = rr + cr
            if residual <= tol:
                break
            if iterations >= max_iter:
                raise ConvergenceError(
                    f"IPF residual {residual:.3e} above {tol:.1e} after {max_iter} sweeps",
                    last=a.copy(), residual=residual)
    result = JointTable.from_array(a)
    return ProjectionReport(result, iterations, residual, kl_array(a, s), True)


def sample_in_face(vertex_arrays: np.ndarray, rng: np.random.Generator, size: int = 1) -> np.ndarray:
    """Random convex combinations of the given vertices (flat uniform
    Dirichlet weights).  Returns an array of shape ``(size, n, m)``."""
    vertex_arrays = np.asarray(vertex_arrays, dtype=float)
    w = rng.dirichlet(np.ones(len(vertex_arrays)), size=size)
    return np.tensordot(w, vertex_arrays, axes=1)


def vertices_within(target: Polytope, mask) -> np.ndarray:
    """Float arrays of the target's vertices whose support lies inside ``mask``."""
    verts = [v.table.as_array() for v in target.to_exact().vertices
             if v.support.issubset(mask)]
    return np.array(verts, dtype=float).reshape(len(verts), *target.shape)


def certify_pythagorean(source: JointTable, report: ProjectionReport, target: Polytope,
                        samples: int = 100, rng: np.random.Generator | None = None) -> float:
    """Largest violation of ``D(T||S) = D(S*||S) + D(T||S*)`` over random
    ``T`` in the target with support inside the source's support."""
    if not report.defined:
        raise PreconditionError("projection is undefined; nothing to certify")
    if samples < 1:
        raise PreconditionError("samples must be at least 1")
    if rng is None:
        rng = np.random.default_rng(0)
    verts = vertices_within(target, support(source, 0))
    if len(verts) == 0:
        raise PreconditionError("no vertex of the target fits inside the source support")
    s = source.as_array()
    star = report.result.as_array()
    base = kl_array(star, s)
    worst = 0.0
    for t in sample_in_face(verts, rng, samples):
        worst = max(worst, abs(kl_array(t, s) - base - kl_array(t, star)))
    return worst


def roundtrip(source: JointTable, c1: Polytope, c2: Polytope, tol: float = DEFAULT_TOL,
              max_iter: int = DEFAULT_MAX_ITER) -> float:
    """L1 distance between ``source`` and its projection onto ``c2``
    projected back onto ``c1``."""
    if not c1.contains(source, tol=1e-9):
        raise PreconditionError("source does not lie in c1")
    forward = project(source, c2, tol, max_iter)
    if not forward.defined:
        raise UndefinedProjectionError("projection onto c2 is undefined")
    back = project(forward.result, c1, tol, max_iter)
    if not back.defined:
        raise UndefinedProjectionError("projection back onto c1 is undefined")
    return back.result.l1_distance(source)


def continuity_probe(point: JointTable, direction, target: Polytope, steps: int = 20,
                     tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> list[float]:
    """``||proj(point + h d) - proj(point)||_1`` for ``h = 2**-1, ..., 2**-steps``."""
    d = np.asarray(direction, dtype=float)
    if d.shape != point.shape:
        raise DimensionError(f"direction is {d.shape}, point is {point.shape}")
    base = project(point, target, tol, max_iter)
    if not base.defined:
        raise UndefinedProjectionError("projection of the base point is undefined")
    x0 = point.as_array()
    b = base.result.as_array()
    profile = []
    for k in range(1, steps + 1):
        x = JointTable.from_array(x0 + 2.0 ** -k * d)
        r = project(x, target, tol, max_iter)
        if not r.defined:
            raise UndefinedProjectionError(f"projection undefined at step h=2^-{k}")
        profile.append(float(np.abs(r.result.as_array() - b).sum()))
    return profile


@dataclass(frozen=True)
class FHMappingCheck:
    """``ok`` is the verdict; ``vacuous`` lists bounds ("upper", "lower")
    whose projection does not exist and so pass trivially."""

    ok: bool
    upper_error: float | None
    lower_error: float | None
    vacuous: tuple = ()

    def __bool__(self) -> bool:
        return self.ok


def fh_mapping_check(c1: Polytope, c2: Polytope, tol: float = 1e-9,
                     ipf_tol: float = DEFAULT_TOL) -> FHMappingCheck:
    """Does projecting each Frechet-Hoeffding bound of ``c1`` onto ``c2``
    land on the matching bound of ``c2``?"""
    errors = {}
    vacuous = []
    for name, bound in (("upper", fh_upper), ("lower", fh_lower)):
        src, dst = bound(c1.to_exact()), bound(c2.to_exact())
        r = project(src.table, c2, ipf_tol)
        if not r.defined:
            errors[name] = None
            vacuous.append(name)
            continue
        errors[name] = r.result.l1_distance(dst.table)
    ok = all(e is None or e <= tol for e in errors.values())
    return FHMappingCheck(ok, errors["upper"], errors["lower"], tuple(vacuous))
