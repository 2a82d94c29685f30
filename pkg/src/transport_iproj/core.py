"""Distributions, joint tables, supports and relative entropy.

Every container comes in one of two numeric modes.  Exact mode stores
``fractions.Fraction`` values and never rounds; float mode stores Python
floats.  A container is homogeneous in mode.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence, Union

import numpy as np

Scalar = Union[Fraction, float]

FLOAT_SUM_TOL = 1e-12
FLOAT_SUPPORT_THRESHOLD = 1e-12

DEFAULT_CELL_CAP = 25
DEFAULT_VERTEX_CAP = 64
CAP_ENV_VAR = "TRANSPORT_IPROJ_CAP"


class TransportError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(TransportError, ValueError):
    """Invalid probability data (negative mass, wrong total, bad token)."""


class DimensionError(TransportError, ValueError):
    """Operands have incompatible shapes."""


class CapacityError(TransportError):
    """A combinatorial computation exceeds the configured size cap."""


class ModeError(TransportError, TypeError):
    """An operation requires exact-mode input."""


def size_caps() -> tuple[int, int]:
    """Return ``(cell_cap, vertex_cap)``, honouring ``TRANSPORT_IPROJ_CAP``.

    The variable holds either a single integer (cell cap) or two
    comma-separated integers (cell cap, vertex cap).
    """
    raw = os.environ.get(CAP_ENV_VAR, "").strip()
    if not raw:
        return DEFAULT_CELL_CAP, DEFAULT_VERTEX_CAP
    parts = [p.strip() for p in raw.split(",") if p.strip()]
    try:
        values = [int(p) for p in parts]
    except ValueError:
        raise ValidationError(f"{CAP_ENV_VAR} must hold integers, got {raw!r}") from None
    if len(values) == 1:
        return values[0], DEFAULT_VERTEX_CAP
    if len(values) == 2:
        return values[0], values[1]
    raise ValidationError(f"{CAP_ENV_VAR} takes one or two integers, got {raw!r}")


def _as_scalar(x, exact: bool) -> Scalar:
    if exact:
        if isinstance(x, float):
            # Decimal expansion of the shortest repr, so 0.1 becomes 1/10.
            return Fraction(repr(x))
        return Fraction(x)
    return float(x)


def _infer_exact(values: Iterable) -> bool:
    return all(isinstance(v, (int, Fraction)) and not isinstance(v, bool) for v in values)


def to_exact_masses(values: Sequence[Scalar]) -> tuple[Fraction, ...]:
    """Convert masses to rationals that sum to exactly one.

    Floats go through their decimal repr and the vector is renormalised,
    which moves each mass by at most the float summation error.
    """
    fr = [Fraction(repr(v)) if isinstance(v, float) else Fraction(v) for v in values]
    total = sum(fr)
    if total == 0:
        raise ValidationError("cannot normalise a zero vector")
    if total == 1:
        return tuple(fr)
    return tuple(v / total for v in fr)


@dataclass(frozen=True)
class Distribution:
    """Probability vector over ``{0, ..., n-1}``."""

    masses: tuple
    exact: bool

    def __init__(self, masses: Iterable, exact: bool | None = None):
        masses = list(masses)
        if exact is None:
            exact = _infer_exact(masses)
        values = tuple(_as_scalar(m, exact) for m in masses)
        object.__setattr__(self, "masses", values)
        object.__setattr__(self, "exact", exact)
        self._validate()

    def _validate(self) -> None:
        if not self.masses:
            raise ValidationError("a distribution needs at least one mass")
        for v in self.masses:
            if not self.exact and not math.isfinite(v):
                raise ValidationError(f"non-finite mass {v!r}")
            if v < 0:
                raise ValidationError(f"negative mass {v}")
        total = sum(self.masses) if self.exact else math.fsum(self.masses)
        if self.exact and total != 1:
            raise ValidationError(f"masses sum to {total}, not 1")
        if not self.exact and abs(total - 1.0) > FLOAT_SUM_TOL:
            raise ValidationError(f"masses sum to {total!r}, not 1 within {FLOAT_SUM_TOL}")

    def __len__(self) -> int:
        return len(self.masses)

    def __getitem__(self, i: int) -> Scalar:
        return self.masses[i]

    def __iter__(self):
        return iter(self.masses)

    def to_exact(self) -> Distribution:
        if self.exact:
            return self
        return Distribution(to_exact_masses(self.masses), exact=True)

    def to_float(self) -> Distribution:
        if not self.exact:
            return self
        return Distribution([float(m) for m in self.masses], exact=False)

    def as_array(self) -> np.ndarray:
        return np.array([float(m) for m in self.masses], dtype=float)

    def support(self) -> frozenset[int]:
        return frozenset(i for i, m in enumerate(self.masses) if m > 0)


@dataclass(frozen=True, order=True)
class SupportPattern:
    """Set of cells ``(i, j)`` carrying positive mass in an ``rows x cols`` grid.

    The same object is read as a bipartite graph with row nodes and column
    nodes, one edge per cell.  Patterns order lexicographically by their
    sorted cell list.
    """

    key: tuple
    rows: int
    cols: int

    def __init__(self, rows: int, cols: int, cells: Iterable[tuple[int, int]]):
        cells = frozenset((int(i), int(j)) for i, j in cells)
        for i, j in cells:
            if not (0 <= i < rows and 0 <= j < cols):
                raise DimensionError(f"cell {(i, j)} outside a {rows}x{cols} grid")
        object.__setattr__(self, "key", tuple(sorted(cells)))
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)

    @classmethod
    def full(cls, rows: int, cols: int) -> SupportPattern:
        return cls(rows, cols, ((i, j) for i in range(rows) for j in range(cols)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    @cached_property
    def cells(self) -> frozenset[tuple[int, int]]:
        return frozenset(self.key)

    def __len__(self) -> int:
        return len(self.key)

    def __iter__(self):
        return iter(self.key)

    def __contains__(self, cell) -> bool:
        return cell in self.cells

    def issubset(self, other: SupportPattern) -> bool:
        return self.cells <= other.cells

    def union(self, other: SupportPattern) -> SupportPattern:
        _check_same_shape(self.shape, other.shape)
        return SupportPattern(self.rows, self.cols, self.cells | other.cells)

    def rows_touched(self) -> frozenset[int]:
        return frozenset(i for i, _ in self.key)

    def cols_touched(self) -> frozenset[int]:
        return frozenset(j for _, j in self.key)

    def components(self) -> int:
        """Connected components of the graph spanned by the cells (isolated
        untouched nodes are not counted)."""
        parent: dict = {}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for i, j in self.key:
            a, b = ("r", i), ("c", j)
            parent.setdefault(a, a)
            parent.setdefault(b, b)
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb
        return len({find(x) for x in parent})

    def is_forest(self) -> bool:
        nodes = len(self.rows_touched()) + len(self.cols_touched())
        return len(self.key) == nodes - self.components()

    def mask(self) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        for i, j in self.key:
            m[i, j] = True
        return m

    def to_list(self) -> list[list[int]]:
        return [[i, j] for i, j in self.key]


@dataclass(frozen=True)
class JointTable:
    """Nonnegative ``n x m`` table with grand total one."""

    entries: tuple
    exact: bool

    def __init__(self, rows: Iterable[Iterable], exact: bool | None = None):
        rows = [list(r) for r in rows]
        if not rows or not rows[0]:
            raise ValidationError("a table needs at least one cell")
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            raise ValidationError("ragged table: rows have different lengths")
        if exact is None:
            exact = _infer_exact(v for r in rows for v in r)
        entries = tuple(tuple(_as_scalar(v, exact) for v in r) for r in rows)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "exact", exact)
        self._validate()

    @classmethod
    def from_array(cls, array) -> JointTable:
        a = np.asarray(array, dtype=float)
        if a.ndim != 2:
            raise DimensionError(f"expected a 2-d array, got shape {a.shape}")
        return cls(a.tolist(), exact=False)

    def _validate(self) -> None:
        flat = [v for r in self.entries for v in r]
        for v in flat:
            if not self.exact and not math.isfinite(v):
                raise ValidationError(f"non-finite entry {v!r}")
            if v < 0:
                raise ValidationError(f"negative entry {v}")
        if self.exact:
            if sum(flat) != 1:
                raise ValidationError(f"entries sum to {sum(flat)}, not 1")
        else:
            total = math.fsum(flat)
            if abs(total - 1.0) > FLOAT_SUM_TOL:
                raise ValidationError(f"entries sum to {total!r}, not 1 within {FLOAT_SUM_TOL}")

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.entries), len(self.entries[0])

    def __getitem__(self, ij: tuple[int, int]) -> Scalar:
        i, j = ij
        return self.entries[i][j]

    def as_array(self) -> np.ndarray:
        return np.array([[float(v) for v in r] for r in self.entries], dtype=float)

    def to_float(self) -> JointTable:
        if not self.exact:
            return self
        return JointTable([[float(v) for v in r] for r in self.entries], exact=False)

    def to_exact(self) -> JointTable:
        if self.exact:
            return self
        n, m = self.shape
        flat = to_exact_masses([v for r in self.entries for v in r])
        return JointTable([flat[i * m:(i + 1) * m] for i in range(n)], exact=True)

    def l1_distance(self, other: JointTable) -> float:
        _check_same_shape(self.shape, other.shape)
        if self.exact and other.exact:
            return float(sum(abs(a - b) for ra, rb in zip(self.entries, other.entries)
                             for a, b in zip(ra, rb)))
        return float(np.abs(self.as_array() - other.as_array()).sum())


@dataclass(frozen=True)
class Polytope:
    """The transportation polytope of tables with the given row and column
    marginals."""

    row_marginal: Distribution
    col_marginal: Distribution

    def __post_init__(self):
        if self.row_marginal.exact != self.col_marginal.exact:
            object.__setattr__(self, "row_marginal", self.row_marginal.to_float())
            object.__setattr__(self, "col_marginal", self.col_marginal.to_float())

    @classmethod
    def of(cls, p, q, exact: bool | None = None) -> Polytope:
        if not isinstance(p, Distribution):
            p = Distribution(p, exact=exact)
        if not isinstance(q, Distribution):
            q = Distribution(q, exact=exact)
        return cls(p, q)

    @property
    def exact(self) -> bool:
        return self.row_marginal.exact

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.row_marginal), len(self.col_marginal)

    def to_exact(self) -> Polytope:
        if self.exact:
            return self
        return Polytope(self.row_marginal.to_exact(), self.col_marginal.to_exact())

    def to_float(self) -> Polytope:
        return Polytope(self.row_marginal.to_float(), self.col_marginal.to_float())

    def contains(self, t: JointTable, tol: float = 1e-10) -> bool:
        _check_same_shape(self.shape, t.shape)
        p, q = marginals(t)
        if self.exact and t.exact:
            return p.masses == self.row_marginal.masses and q.masses == self.col_marginal.masses
        err = (np.abs(p.as_array() - self.row_marginal.as_array()).sum()
               + np.abs(q.as_array() - self.col_marginal.as_array()).sum())
        return bool(err <= tol)

    @cached_property
    def vertices(self):
        """Vertex list, computed on first access with the default caps."""
        from .polytope import enumerate_vertices

        return enumerate_vertices(self)


def _check_same_shape(a: tuple, b: tuple) -> None:
    if a != b:
        raise DimensionError(f"shape mismatch: {a} vs {b}")


def _values(x) -> tuple[tuple, list]:
    if isinstance(x, JointTable):
        return x.shape, [v for r in x.entries for v in r]
    if isinstance(x, Distribution):
        return (len(x),), list(x.masses)
    a = np.asarray(x, dtype=float)
    return a.shape, a.ravel().tolist()


def kl_divergence(t, s) -> float:
    """Relative entropy ``D(t || s)`` in nats.

    Uses ``0 log(0/q) = 0`` and ``p log(p/0) = inf`` for ``p > 0``.  Accepts
    joint tables, distributions, or plain arrays of matching shape.
    Returns ``math.inf`` rather than raising when the support of ``t`` is
    not contained in the support of ``s``.
    """
    shape_t, tv = _values(t)
    shape_s, sv = _values(s)
    _check_same_shape(shape_t, shape_s)
    terms = []
    for a, b in zip(tv, sv):
        if a == 0:
            continue
        if b == 0:
            return math.inf
        if isinstance(a, Fraction) and isinstance(b, Fraction):
            ratio = a / b
            if ratio == 1:
                continue
            terms.append(float(a) * math.log(ratio))
        else:
            terms.append(float(a) * math.log(float(a) / float(b)))
    return max(0.0, math.fsum(terms))


def kl_array(t: np.ndarray, s: np.ndarray) -> float:
    """Vectorised ``D(t || s)`` for float arrays, same zero conventions."""
    pos = t > 0
    if np.any(s[pos] <= 0):
        return math.inf
    tp = t[pos]
    return max(0.0, math.fsum((tp * np.log(tp / s[pos])).tolist()))


def marginals(t: JointTable) -> tuple[Distribution, Distribution]:
    """Row sums and column sums of ``t``, exact in exact mode."""
    if t.exact:
        rows = [sum(r, Fraction(0)) for r in t.entries]
        cols = [sum(c, Fraction(0)) for c in zip(*t.entries)]
        return Distribution(rows, exact=True), Distribution(cols, exact=True)
    rows = [math.fsum(r) for r in t.entries]
    cols = [math.fsum(c) for c in zip(*t.entries)]
    return Distribution(rows, exact=False), Distribution(cols, exact=False)


def support(t: JointTable, threshold: float | None = None) -> SupportPattern:
    """Cells of ``t`` strictly above ``threshold``.

    The default threshold is 0 for exact tables and 1e-12 for float ones.
    """
    if threshold is None:
        threshold = 0 if t.exact else FLOAT_SUPPORT_THRESHOLD
    if threshold < 0:
        raise ValidationError("threshold must be nonnegative")
    n, m = t.shape
    return SupportPattern(n, m, ((i, j) for i in range(n) for j in range(m)
                                 if t.entries[i][j] > threshold))


def product_table(p: Distribution, q: Distribution) -> JointTable:
    """Independent coupling with entries ``p_i * q_j``."""
    exact = p.exact and q.exact
    if exact:
        return JointTable([[a * b for b in q.masses] for a in p.masses], exact=True)
    pa, qa = p.as_array(), q.as_array()
    return JointTable.from_array(np.outer(pa, qa))
