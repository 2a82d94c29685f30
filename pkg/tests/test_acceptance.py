"""Exit criteria.  Each test carries a ``criterion`` marker; the terminal
summary prints one PASS/FAIL line per criterion."""

import json
import time
from fractions import Fraction as F

import numpy as np
import pytest

from transport_iproj import (
    JointTable,
    Polytope,
    combinatorially_equivalent,
    enumerate_vertices,
    face_lattice,
    feasible_within_support,
    fh_lower,
    fh_mapping_check,
    fh_upper,
    fw_minimize,
    geometrically_equivalent,
    has_crossing,
    product_table,
    project,
    roundtrip,
    support,
    certify_pythagorean,
    continuity_probe,
)
from transport_iproj.cli import main

from helpers import (
    equivalent_pair,
    interior_sources,
    perturbed_equivalent,
    random_generic_polytope,
    random_polytope,
    random_table,
)

HALF = [F(1, 2), F(1, 2)]
C1 = Polytope.of(HALF, [F(1, 3), F(2, 3)])
C2 = Polytope.of(HALF, HALF)
U = [JointTable([[F(1, 3), F(1, 6)], [0, F(1, 2)]]), JointTable([[0, F(1, 2)], [F(1, 3), F(1, 6)]])]
V = [JointTable([[F(1, 2), 0], [0, F(1, 2)]]), JointTable([[0, F(1, 2)], [F(1, 2), 0]])]

PAIR_SHAPES = [(2, 2), (2, 3), (3, 2), (3, 3), (2, 4), (4, 2), (3, 3), (3, 4), (4, 3), (3, 3)]


@pytest.fixture(scope="module")
def pairs():
    """Ten equivalent pairs built by small marginal shifts, verified exactly."""
    rng = np.random.default_rng(2015)
    out = [equivalent_pair(rng, n, m) for n, m in PAIR_SHAPES]
    for c1, c2 in out:
        assert geometrically_equivalent(c1, c2)
    return out


@pytest.fixture(scope="module")
def pair_sources(pairs):
    rng = np.random.default_rng(6)
    return [interior_sources(c1, rng, 50) for c1, _ in pairs]


@pytest.mark.criterion(1, "segment-pair vertices reproduced exactly; pair not equivalent")
def test_c1_segment_pair_vertices():
    start = time.perf_counter()
    assert [v.table for v in enumerate_vertices(C1)] == U
    assert [v.table for v in enumerate_vertices(C2)] == V
    assert not geometrically_equivalent(C1, C2)
    assert time.perf_counter() - start < 1.0


@pytest.mark.criterion(2, "segment-pair projections U_i -> V_i; V_i -> C1 undefined (CLI exit 2)")
def test_c2_segment_pair_projections(tmp_path, capsys):
    start = time.perf_counter()
    for u, v in zip(U, V):
        assert project(u, C2).result.l1_distance(v) <= 1e-10
    for v in V:
        assert not project(v, C1).defined
    elapsed = time.perf_counter() - start
    for k, v in enumerate(V):
        path = tmp_path / f"v{k}.csv"
        path.write_text("\n".join(",".join(str(x) for x in r) for r in v.entries))
        code = main(["project", "--source", str(path), "--target-p", "1/2,1/2", "--target-q", "1/3,2/3"])
        assert code == 2 and json.loads(capsys.readouterr().out)["undefined"] is True
    assert elapsed < 1.0


@pytest.mark.criterion(3, "product projection P1xQ1 -> P2xQ2 and Pythagorean identity, 20 instances")
def test_c3_product_identity():
    rng = np.random.default_rng(3)
    for _ in range(20):
        n, m = rng.integers(2, 5, size=2)
        a, b = random_polytope(rng, n, m), random_polytope(rng, n, m)
        src = product_table(a.row_marginal, a.col_marginal)
        expected = product_table(b.row_marginal, b.col_marginal)
        r = project(src, b, tol=1e-13)
        assert r.result.l1_distance(expected) <= 1e-9
        assert certify_pythagorean(src, r, b, 100, rng) <= 1e-9


@pytest.mark.criterion(4, "Pythagorean residual <= 1e-9 on 50 instances up to 4x4, under 30 s")
def test_c4_pythagorean():
    start = time.perf_counter()
    rng = np.random.default_rng(4)
    worst = 0.0
    instances = 0
    while instances < 50:
        n, m = rng.integers(2, 5, size=2)
        c1, c2 = equivalent_pair(rng, n, m)
        for src in interior_sources(c1, rng, 2):
            r = project(src, c2, tol=1e-13)
            worst = max(worst, certify_pythagorean(src, r, c2, 100, rng))
            instances += 1
    assert worst <= 1e-9
    assert time.perf_counter() - start < 30.0


@pytest.mark.criterion(5, "round trip through an equivalent polytope, 10 pairs x 50 sources, L1 <= 1e-8")
def test_c5_roundtrip(pairs, pair_sources):
    worst = 0.0
    for (c1, c2), sources in zip(pairs, pair_sources):
        for src in sources:
            worst = max(worst, roundtrip(src, c1, c2, tol=1e-13))
    assert worst <= 1e-8


@pytest.mark.criterion(6, "vertices map to equal-support vertices; interior supports preserved")
def test_c6_vertex_mapping(pairs, pair_sources):
    for (c1, c2), sources in zip(pairs, pair_sources):
        image = {v.support: v.table for v in enumerate_vertices(c2)}
        for v in enumerate_vertices(c1):
            r = project(v.table, c2, tol=1e-13)
            assert support(r.result, 1e-9) == v.support
            assert r.result.l1_distance(image[v.support]) <= 1e-9
        for src in sources:
            assert support(project(src, c2, tol=1e-13).result, 1e-9) == support(src, 0)


@pytest.mark.criterion(7, "F-H bounds map to F-H bounds; bounds crossing-free on 100 polytopes up to 5x5")
def test_c7_fh(pairs):
    for c1, c2 in pairs:
        check = fh_mapping_check(c1, c2)
        assert check.ok and check.vacuous == ()
    rng = np.random.default_rng(7)
    for k in range(100):
        n, m = rng.integers(1, 6, size=2)
        # every other polytope uses coarse masses (zeros and ties) to force degeneracy
        c = random_polytope(rng, n, m, low=0, high=4) if k % 2 else random_polytope(rng, n, m)
        up, lo = fh_upper(c), fh_lower(c)
        assert not has_crossing(up.support)
        assert not has_crossing(lo.support, reverse_cols=True)
        assert c.contains(up.table) and c.contains(lo.table)


def _all_vertices_project(a, b):
    return all(feasible_within_support(b, v.support) for v in enumerate_vertices(a))


@pytest.mark.criterion(8, "equivalence <=> mutual vertex projectability on 20 mixed pairs")
def test_c8_equivalence_criterion():
    rng = np.random.default_rng(8)
    verdicts = []
    for k in range(20):
        n, m = rng.integers(2, 4, size=2)
        if k % 2 == 0:
            c1 = random_generic_polytope(rng, n, m)
            c2 = perturbed_equivalent(c1, rng)
        else:
            c1, c2 = random_polytope(rng, n, m, high=6), random_polytope(rng, n, m, high=6)
        eq = bool(geometrically_equivalent(c1, c2))
        assert eq == (_all_vertices_project(c1, c2) and _all_vertices_project(c2, c1))
        verdicts.append(eq)
    assert any(verdicts) and not all(verdicts)


@pytest.mark.criterion(9, "IPF agrees with Frank-Wolfe within 1e-6 L1 on 30 instances, under 60 s")
def test_c9_oracle_agreement():
    start = time.perf_counter()
    rng = np.random.default_rng(9)
    done = 0
    worst = 0.0
    while done < 30:
        n, m = rng.integers(2, 5, size=2)
        src = random_table(rng, n, m, zero_prob=0.3 if done % 2 else 0.0)
        c = random_polytope(rng, n, m)
        if not feasible_within_support(c, support(src, 0)):
            continue
        r = project(src, c, tol=1e-13)
        o = fw_minimize(src, c, gap_tol=1e-12)
        worst = max(worst, r.result.l1_distance(o.table))
        done += 1
    assert worst <= 1e-6
    assert time.perf_counter() - start < 60.0


@pytest.mark.criterion(10, "geometric => combinatorial equivalence; segment pair is only combinatorial")
def test_c10_face_lattices(pairs):
    for c1, c2 in pairs:
        assert combinatorially_equivalent(face_lattice(c1), face_lattice(c2))
    assert combinatorially_equivalent(face_lattice(C1), face_lattice(C2))
    assert not geometrically_equivalent(C1, C2)


@pytest.mark.criterion(11, "continuity profiles eventually decrease and drop below 1e-6 at h = 2^-20")
def test_c11_continuity(pairs):
    rng = np.random.default_rng(11)
    for c1, c2 in pairs:
        x, y = interior_sources(c1, rng, 2)
        d = (y.as_array() - x.as_array()) / 4
        profile = continuity_probe(x, d, c2, steps=20)
        assert profile[-1] < 1e-6
        tail = profile[10:]
        assert all(b < a for a, b in zip(tail, tail[1:]))
