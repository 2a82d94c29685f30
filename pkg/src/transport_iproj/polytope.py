"""Exact combinatorics of two-way transportation polytopes.

All routines here work in exact rational arithmetic.  Float polytopes are
converted with :meth:`Polytope.to_exact` where that is harmless (feasibility
checks); vertex and face computations insist on exact input.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Iterator, NamedTuple

import networkx as nx

from .core import (
    CapacityError,
    DimensionError,
    JointTable,
    ModeError,
    Polytope,
    SupportPattern,
    size_caps,
    support,
)


@dataclass(frozen=True)
class Vertex:
    table: JointTable
    support: SupportPattern


@dataclass(frozen=True)
class Face:
    support: SupportPattern
    vertex_indices: frozenset
    dimension: int


@dataclass(frozen=True)
class FaceLattice:
    """Nonempty faces of a polytope, each identified by its vertex set.

    ``faces`` is sorted by dimension, then vertex count, then vertex indices,
    so that inclusion always points forward in the list.
    """

    vertices: tuple
    faces: tuple

    def f_vector(self) -> tuple[int, ...]:
        if not self.faces:
            return ()
        top = max(f.dimension for f in self.faces)
        counts = [0] * (top + 1)
        for f in self.faces:
            counts[f.dimension] += 1
        return tuple(counts)

    def vertex_sets(self) -> frozenset:
        return frozenset(f.vertex_indices for f in self.faces)


class Equivalence(NamedTuple):
    """Outcome of :func:`geometrically_equivalent`.

    ``witness`` is the first vertex support (in sorted order) present in one
    polytope but not the other, and ``side`` says which polytope (1 or 2) it
    came from.
    """

    equivalent: bool
    witness: SupportPattern | None = None
    side: int | None = None

    def __bool__(self) -> bool:
        return self.equivalent


def _require_exact(c: Polytope) -> None:
    if not c.exact:
        raise ModeError("operation requires an exact-mode polytope; convert with to_exact()")


def _integer_marginals(c: Polytope) -> tuple[list[int], list[int], int]:
    """Scale both marginals by their common denominator."""
    values = list(c.row_marginal.masses) + list(c.col_marginal.masses)
    den = 1
    for v in values:
        den = den * v.denominator // math.gcd(den, v.denominator)
    p = [int(v * den) for v in c.row_marginal.masses]
    q = [int(v * den) for v in c.col_marginal.masses]
    return p, q, den


def spanning_trees(n: int, m: int) -> Iterator[tuple[tuple[int, int], ...]]:
    """Yield every spanning tree of the complete bipartite graph ``K_{n,m}``
    as a tuple of cells, in lexicographic order of cell lists."""
    cells = [(i, j) for i in range(n) for j in range(m)]
    need = n + m - 1
    parent = list(range(n + m))
    size = [1] * (n + m)

    def find(x: int) -> int:
        while parent[x] != x:
            x = parent[x]
        return x

    chosen: list[tuple[int, int]] = []

    def rec(k: int) -> Iterator[tuple[tuple[int, int], ...]]:
        if len(chosen) == need:
            yield tuple(chosen)
            return
        if len(cells) - k < need - len(chosen):
            return
        i, j = cells[k]
        a, b = find(i), find(n + j)
        if a != b:
            if size[a] > size[b]:
                a, b = b, a
            parent[a] = b
            size[b] += size[a]
            chosen.append((i, j))
            yield from rec(k + 1)
            chosen.pop()
            size[b] -= size[a]
            parent[a] = a
        yield from rec(k + 1)

    if n == 0 or m == 0:
        return
    yield from rec(0)


def solve_tree(edges, p: list, q: list) -> dict | None:
    """Unique table supported on a spanning tree, by leaf stripping.

    Returns ``{cell: value}`` or ``None`` as soon as a negative value shows up.
    """
    n = len(p)
    adj: dict[int, list] = {v: [] for v in range(n + len(q))}
    for i, j in edges:
        adj[i].append((i, j))
        adj[n + j].append((i, j))
    rem = list(p) + list(q)
    degree = {v: len(es) for v, es in adj.items()}
    used: set = set()
    leaves = deque(v for v, d in degree.items() if d == 1)
    values: dict = {}
    while leaves:
        v = leaves.popleft()
        if degree[v] != 1:
            continue
        edge = next(e for e in adj[v] if e not in used)
        value = rem[v]
        if value < 0:
            return None
        used.add(edge)
        values[edge] = value
        i, j = edge
        u = n + j if v == i else i
        rem[v] = 0
        rem[u] -= value
        degree[v] = 0
        degree[u] -= 1
        if degree[u] == 1:
            leaves.append(u)
    if any(r != 0 for r in rem):
        return None
    return values


def _vertex_from_values(values: dict, n: int, m: int, den: int) -> Vertex:
    rows = [[Fraction(0)] * m for _ in range(n)]
    for (i, j), v in values.items():
        rows[i][j] = Fraction(v, den)
    table = JointTable(rows, exact=True)
    return Vertex(table, support(table, 0))


def enumerate_vertices(c: Polytope, cap: int | None = None) -> list[Vertex]:
    """All vertices of ``c``, sorted by support pattern.

    Every spanning tree of ``K_{n,m}`` is solved by leaf stripping; trees
    with a nonnegative solution give a vertex, and trees that collapse onto
    the same degenerate support are deduplicated.
    """
    _require_exact(c)
    n, m = c.shape
    if cap is None:
        cap = size_caps()[0]
    if n * m > cap:
        raise CapacityError(f"{n}x{m} polytope exceeds the cell cap of {cap}")
    p, q, den = _integer_marginals(c)
    found: dict[tuple, dict] = {}
    for tree in spanning_trees(n, m):
        values = solve_tree(tree, p, q)
        if values is None:
            continue
        key = tuple(sorted(e for e, v in values.items() if v > 0))
        if key not in found:
            found[key] = {e: v for e, v in values.items() if v > 0}
    return [_vertex_from_values(found[k], n, m, den) for k in sorted(found)]


def has_crossing(s: SupportPattern, reverse_cols: bool = False) -> bool:
    """True if two cells ``(i, j)``, ``(k, l)`` have ``i < k`` and ``j > l``."""
    cells = s.key
    if reverse_cols:
        cells = [(i, s.cols - 1 - j) for i, j in cells]
    for (i, j), (k, l) in combinations(cells, 2):
        if (i < k and j > l) or (k < i and l > j):
            return True
    return False


def northwest_corner(p, q) -> list[list]:
    """Northwest-corner rule on exact marginals in natural index order."""
    n, m = len(p), len(q)
    rows = [[Fraction(0)] * m for _ in range(n)]
    rp, rq = list(p), list(q)
    i = j = 0
    while i < n and j < m:
        x = min(rp[i], rq[j])
        rows[i][j] = x
        rp[i] -= x
        rq[j] -= x
        if rp[i] == 0:
            i += 1
        if rq[j] == 0:
            j += 1
    return rows


def fh_upper(c: Polytope) -> Vertex:
    """Upper Frechet-Hoeffding bound: the crossing-free vertex."""
    _require_exact(c)
    table = JointTable(northwest_corner(c.row_marginal.masses, c.col_marginal.masses), exact=True)
    return Vertex(table, support(table, 0))


def fh_lower(c: Polytope) -> Vertex:
    """Lower Frechet-Hoeffding bound: northwest corner against the reversed
    column marginal, columns flipped back afterwards."""
    _require_exact(c)
    rows = northwest_corner(c.row_marginal.masses, c.col_marginal.masses[::-1])
    table = JointTable([r[::-1] for r in rows], exact=True)
    return Vertex(table, support(table, 0))


def _max_flow(c: Polytope, mask: SupportPattern) -> tuple[Fraction, dict]:
    """Edmonds-Karp on source -> rows -> (mask cells) -> cols -> sink.

    Cell arcs are uncapacitated; the bound 2 is never binding because no cell
    can carry more than total mass 1.
    """
    ce = c.to_exact()
    n, m = ce.shape
    if mask.shape != (n, m):
        raise DimensionError(f"mask is {mask.shape}, polytope is {(n, m)}")
    p, q, den = _integer_marginals(ce)
    big = 2 * den
    src, snk = n + m, n + m + 1
    cap: dict = {}
    adj: dict = {v: set() for v in range(n + m + 2)}

    def arc(u, v, w):
        cap[(u, v)] = cap.get((u, v), 0) + w
        cap.setdefault((v, u), 0)
        adj[u].add(v)
        adj[v].add(u)

    for i in range(n):
        arc(src, i, p[i])
    for j in range(m):
        arc(n + j, snk, q[j])
    for i, j in mask:
        arc(i, n + j, big)

    total = 0
    while True:
        prev = {src: None}
        queue = deque([src])
        while queue and snk not in prev:
            u = queue.popleft()
            for v in sorted(adj[u]):
                if v not in prev and cap[(u, v)] > 0:
                    prev[v] = u
                    queue.append(v)
        if snk not in prev:
            break
        bottleneck = None
        v = snk
        while prev[v] is not None:
            u = prev[v]
            r = cap[(u, v)]
            bottleneck = r if bottleneck is None else min(bottleneck, r)
            v = u
        v = snk
        while prev[v] is not None:
            u = prev[v]
            cap[(u, v)] -= bottleneck
            cap[(v, u)] += bottleneck
            v = u
        total += bottleneck
    flow = {(i, j): Fraction(cap[(n + j, i)], den) for i, j in mask}
    return Fraction(total, den), flow


def feasible_within_support(c: Polytope, mask: SupportPattern) -> bool:
    """Whether some table of ``c`` has support inside ``mask`` (exact max-flow)."""
    value, _ = _max_flow(c, mask)
    return value == 1


def face_support(c: Polytope, mask: SupportPattern) -> SupportPattern | None:
    """Largest support realised by a table of ``c`` inside ``mask``.

    This is the support of the face ``{T in c : supp(T) within mask}``, or
    ``None`` when that face is empty.  A masked cell can carry positive mass
    iff it lies on a cycle of the residual graph of a feasible flow, i.e. its
    row and column share a strongly connected component.
    """
    value, flow = _max_flow(c, mask)
    if value != 1:
        return None
    g = nx.DiGraph()
    for i, j in mask:
        g.add_edge(("r", i), ("c", j))
        if flow[(i, j)] > 0:
            g.add_edge(("c", j), ("r", i))
    component = {}
    for k, comp in enumerate(nx.strongly_connected_components(g)):
        for node in comp:
            component[node] = k
    cells = [(i, j) for i, j in mask if component[("r", i)] == component[("c", j)]]
    return SupportPattern(mask.rows, mask.cols, cells)


def geometrically_equivalent(c1: Polytope, c2: Polytope) -> Equivalence:
    """Compare the sets of vertex supports of two same-shape polytopes."""
    if c1.shape != c2.shape:
        raise DimensionError(f"shape mismatch: {c1.shape} vs {c2.shape}")
    s1 = [v.support for v in enumerate_vertices(c1)]
    s2 = [v.support for v in enumerate_vertices(c2)]
    set1, set2 = set(s1), set(s2)
    for s in s1:
        if s not in set2:
            return Equivalence(False, s, 1)
    for s in s2:
        if s not in set1:
            return Equivalence(False, s, 2)
    return Equivalence(True)


def is_generic(c: Polytope) -> bool:
    """Nondegenerate: every vertex support is a spanning tree."""
    n, m = c.shape
    return all(len(v.support) == n + m - 1 for v in enumerate_vertices(c))


def face_dimension(s: SupportPattern) -> int:
    return len(s) - len(s.rows_touched()) - len(s.cols_touched()) + s.components()


def _bits(s: SupportPattern) -> int:
    out = 0
    for i, j in s:
        out |= 1 << (i * s.cols + j)
    return out


def face_lattice(c: Polytope, cap: int | None = None) -> FaceLattice:
    """Nonempty faces of ``c``, generated by joins starting from the vertices
    and the whole polytope."""
    vertices = enumerate_vertices(c)
    if cap is None:
        cap = size_caps()[1]
    if len(vertices) > cap:
        raise CapacityError(f"{len(vertices)} vertices exceed the lattice cap of {cap}")
    n, m = c.shape
    vbits = [_bits(v.support) for v in vertices]
    everything = frozenset(range(len(vertices)))

    def close(indices) -> frozenset:
        union = 0
        for k in indices:
            union |= vbits[k]
        return frozenset(k for k, b in enumerate(vbits) if b & ~union == 0)

    faces = {frozenset([k]) for k in range(len(vertices))}
    faces.add(close(everything))
    # Every face is an iterated join of vertices, so joining with atoms
    # reaches the same fixpoint as closing under all pairwise joins.
    work = deque(faces)
    while work:
        f = work.popleft()
        for k in range(len(vertices)):
            if k in f:
                continue
            g = close(f | {k})
            if g not in faces:
                faces.add(g)
                work.append(g)

    out = []
    for f in faces:
        cells = set()
        for k in f:
            cells |= vertices[k].support.cells
        s = SupportPattern(n, m, cells)
        out.append(Face(s, f, face_dimension(s)))
    out.sort(key=lambda f: (f.dimension, len(f.vertex_indices), sorted(f.vertex_indices)))
    return FaceLattice(tuple(vertices), tuple(out))


def _pair_table(lat: FaceLattice) -> list[list[tuple]]:
    """(dimension, size) of the smallest face containing each vertex pair."""
    nv = len(lat.vertices)
    best = [[None] * nv for _ in range(nv)]
    for f in lat.faces:  # sorted smallest first
        idx = sorted(f.vertex_indices)
        for a in idx:
            for b in idx:
                if best[a][b] is None:
                    best[a][b] = (f.dimension, len(idx))
    return best


def combinatorially_equivalent(l1: FaceLattice, l2: FaceLattice, cap: int | None = None) -> bool:
    """Search for a vertex bijection carrying the faces of ``l1`` exactly
    onto the faces of ``l2``.

    Face lattices are atomic, so a poset isomorphism is determined by what it
    does to the vertices.
    """
    if cap is None:
        cap = size_caps()[1]
    nv = len(l1.vertices)
    if max(nv, len(l2.vertices)) > cap:
        raise CapacityError(f"lattice with more than {cap} vertices")
    if nv != len(l2.vertices) or len(l1.faces) != len(l2.faces):
        return False

    def profile(lat):
        return sorted((f.dimension, len(f.vertex_indices)) for f in lat.faces)

    if profile(l1) != profile(l2):
        return False

    def signatures(lat):
        sig = [[] for _ in range(len(lat.vertices))]
        for f in lat.faces:
            for k in f.vertex_indices:
                sig[k].append((f.dimension, len(f.vertex_indices)))
        return [tuple(sorted(s)) for s in sig]

    sig1, sig2 = signatures(l1), signatures(l2)
    if sorted(sig1) != sorted(sig2):
        return False
    pair1, pair2 = _pair_table(l1), _pair_table(l2)
    target_faces = l2.vertex_sets()
    candidates = {a: [b for b in range(nv) if sig2[b] == sig1[a]] for a in range(nv)}
    order = sorted(range(nv), key=lambda a: len(candidates[a]))
    image: dict[int, int] = {}
    taken: set[int] = set()

    def extend(pos: int) -> bool:
        if pos == nv:
            return all(frozenset(image[k] for k in f.vertex_indices) in target_faces
                       for f in l1.faces)
        a = order[pos]
        for b in candidates[a]:
            if b in taken:
                continue
            if any(pair1[a][x] != pair2[b][image[x]] for x in image):
                continue
            image[a] = b
            taken.add(b)
            if extend(pos + 1):
                return True
            del image[a]
            taken.discard(b)
        return False

    return extend(0)
