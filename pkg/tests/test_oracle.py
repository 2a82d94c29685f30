import math
from fractions import Fraction as F

import numpy as np
import pytest

from transport_iproj import (
    ConvergenceError,
    JointTable,
    Polytope,
    UndefinedProjectionError,
    feasible_within_support,
    fw_minimize,
    kl_divergence,
    project,
    support,
)

from helpers import random_polytope, random_table

HALF = [F(1, 2), F(1, 2)]
C1 = Polytope.of(HALF, [F(1, 3), F(2, 3)])
C2 = Polytope.of(HALF, HALF)
U1 = JointTable([[F(1, 3), F(1, 6)], [0, F(1, 2)]])
V1 = JointTable([[F(1, 2), 0], [0, F(1, 2)]])


def feasible_instances(seed, count, zero_prob=0.0, max_size=4):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        n, m = rng.integers(2, max_size + 1, size=2)
        src = random_table(rng, n, m, zero_prob)
        c = random_polytope(rng, n, m)
        if feasible_within_support(c, support(src, 0)):
            out.append((src, c))
    return out


def test_segment_pair_unique_point():
    o = fw_minimize(U1, C2)
    assert o.table.l1_distance(V1) <= 1e-15
    # 1/2 ln(3/2), evaluated by hand from the divergence formula
    assert o.objective == pytest.approx(0.2027325540540822, abs=1e-15)


def test_source_in_target():
    s = JointTable([[F(1, 5), F(3, 10)], [F(2, 15), F(11, 30)]])
    o = fw_minimize(s, C1, gap_tol=1e-13)
    assert o.objective <= 1e-13
    assert o.table.l1_distance(s) <= 1e-6


def test_infeasible():
    with pytest.raises(UndefinedProjectionError):
        fw_minimize(V1, C1)


def test_nonconvergence():
    src, c = feasible_instances(0, 1)[0]
    with pytest.raises(ConvergenceError):
        fw_minimize(src, c, gap_tol=1e-15, max_iter=2)


@pytest.mark.parametrize("src, c", feasible_instances(21, 6, zero_prob=0.25))
def test_objective_nonincreasing_and_gap_bounds(src, c):
    o = fw_minimize(src, c, gap_tol=1e-10)
    assert all(b <= a + 1e-15 for a, b in zip(o.objectives, o.objectives[1:]))
    assert 0 <= o.duality_gap <= 1e-10
    optimum = project(src, c, tol=1e-14).divergence_value
    assert o.objective - optimum <= o.duality_gap + 1e-13
    assert c.contains(o.table, tol=1e-10)


@pytest.mark.parametrize("src, c", feasible_instances(22, 5, max_size=3))
def test_agrees_with_ipf_three_by_three(src, c):
    o = fw_minimize(src, c, gap_tol=1e-12)
    r = project(src, c, tol=1e-13)
    assert o.table.l1_distance(r.result) <= 1e-6
    assert kl_divergence(o.table, src) == pytest.approx(r.divergence_value, abs=1e-10)
