"""Random instance generators shared by the test modules."""

from fractions import Fraction

import numpy as np

from transport_iproj import JointTable, Polytope, SupportPattern, geometrically_equivalent, is_generic
from transport_iproj.projection import sample_in_face, vertices_within


def rational_distribution(rng, n, low=1, high=20):
    k = rng.integers(low, high, size=n)
    total = int(k.sum())
    if total == 0:
        k[0] = 1
        total = 1
    return [Fraction(int(a), total) for a in k]


def random_polytope(rng, n, m, low=1, high=20):
    return Polytope.of(rational_distribution(rng, n, low, high), rational_distribution(rng, m, low, high))


def random_generic_polytope(rng, n, m):
    while True:
        c = random_polytope(rng, n, m)
        if is_generic(c):
            return c


def _shift(masses, rng, eps):
    masses = list(masses)
    a, b = rng.choice(len(masses), size=2, replace=False)
    masses[a] += eps
    masses[b] -= eps
    return masses, min(masses) > 0


def perturbed_equivalent(c, rng, eps=Fraction(1, 40)):
    """Shift mass between two entries of each marginal by eps, halving eps
    until the result is geometrically equivalent to ``c`` (checked exactly)."""
    n, m = c.shape
    for _ in range(40):
        q2, okq = _shift(c.col_marginal.masses, rng, eps) if m > 1 else (list(c.col_marginal.masses), True)
        p2, okp = _shift(c.row_marginal.masses, rng, eps) if n > 1 else (list(c.row_marginal.masses), True)
        if okq and okp:
            c2 = Polytope.of(p2, q2)
            if geometrically_equivalent(c, c2):
                return c2
        eps /= 2
    raise RuntimeError("no equivalent perturbation found")


def equivalent_pair(rng, n, m):
    c1 = random_generic_polytope(rng, n, m)
    return c1, perturbed_equivalent(c1, rng)


def interior_sources(c, rng, count):
    """Random full-support points of ``c`` (Dirichlet mixtures of all vertices)."""
    n, m = c.shape
    verts = vertices_within(c, SupportPattern.full(n, m))
    return [JointTable.from_array(a) for a in sample_in_face(verts, rng, count)]


def random_table(rng, n, m, zero_prob=0.0):
    a = rng.random((n, m)) + 0.05
    a[rng.random((n, m)) < zero_prob] = 0.0
    if a.sum() == 0:
        a[0, 0] = 1.0
    return JointTable.from_array(a / a.sum())
