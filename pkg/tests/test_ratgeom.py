from fractions import Fraction as F
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from superhedging.errors import DimensionMismatch, DimensionTooLarge, EmptyInput, InvalidRepresentation
from superhedging.ratgeom.dd import cone_generators
from superhedging.ratgeom.lp import certified_feasible, solve_lp, solve_lp_lexmin
from superhedging.ratgeom.polyhedron import (
    HRep,
    Polyhedron,
    VRep,
    contains_point,
    dd_convert,
    intersect,
    intersect_all,
    is_subset,
    minkowski_sum,
    set_equal,
)

small = st.fractions(min_value=-5, max_value=5, max_denominator=6)


def points(d, n_min=1, n_max=4):
    return st.lists(st.tuples(*[small] * d), min_size=n_min, max_size=n_max)


def polyhedra(d=2):
    rays = st.lists(st.tuples(*[small] * d).filter(any), max_size=3)
    return st.builds(lambda v, r: Polyhedron.from_v(d, v, r), points(d), rays)


# ---------------------------------------------------------------------------
# double description


def test_unit_square_round_trip():
    sq = Polyhedron.from_h(2, [((1, 0), 0), ((-1, 0), -1), ((0, 1), 0), ((0, -1), -1)])
    assert set(sq.vertices) == {(F(0), F(0)), (F(1), F(0)), (F(0), F(1)), (F(1), F(1))}
    assert sq.rays == ()
    back = Polyhedron(2, h=dd_convert(sq.v))
    assert set_equal(back, sq)


def test_cone_generators_orthant_and_line():
    lin, rays = cone_generators([(1, 0, 0), (0, 1, 0)], 3)
    assert lin == [(0, 0, 1)] or lin == [(0, 0, -1)]
    assert sorted(rays) == [(0, 1, 0), (1, 0, 0)]


def test_redundant_rows_are_dropped():
    p = Polyhedron.from_h(2, [((1, 0), 0), ((0, 1), 0), ((1, 1), -3), ((2, 2), -1)])
    assert len(p.minimized().inequalities) == 2


def test_empty_h_gives_empty_polyhedron():
    p = Polyhedron.from_h(2, [((1, 0), 1), ((-1, 0), 0)])
    assert p.is_empty
    assert not contains_point(p, (0, 0))


def test_halfspace_has_lines():
    p = Polyhedron.from_h(2, [((1, 1), 1)])
    assert len(p.vertices) == 1
    dirs = {r for r in p.rays}
    assert (F(1), F(-1)) in dirs and (F(-1), F(1)) in dirs


@settings(max_examples=60, deadline=None)
@given(points(3, 1, 5), st.lists(st.tuples(small, small, small).filter(any), max_size=3))
def test_v_h_v_round_trip(verts, rays):
    p = Polyhedron.from_v(3, verts, rays)
    q = Polyhedron(3, h=dd_convert(p.v))
    r = Polyhedron(3, v=dd_convert(q.h))
    assert set_equal(p, q) and set_equal(q, r)
    # every input generator is in the set
    for v in verts:
        assert contains_point(q, v)


def test_dimension_limits_and_validation():
    with pytest.raises(DimensionTooLarge):
        dd_convert(HRep.make(7, [((1,) + (0,) * 6, 0)]))
    with pytest.raises(EmptyInput):
        Polyhedron.from_v(2, [], [(1, 0)])
    with pytest.raises(InvalidRepresentation):
        HRep.make(2, [((0, 0), 1)])
    with pytest.raises(InvalidRepresentation):
        VRep.make(2, [(0, 0)], [(0, 0)])
    with pytest.raises(DimensionMismatch):
        minkowski_sum(Polyhedron.point((0, 0)), Polyhedron.point((0, 0, 0)))


# ---------------------------------------------------------------------------
# set algebra


def _brute_sum_contains(a, b, x):
    """x in a + b  iff  (x - b) meets a, decided with an exact LP in the
    generator weights of both sets."""
    gens = [(1, v, "a") for v in a.vertices] + [(0, r, "a") for r in a.rays]
    gens += [(1, v, "b") for v in b.vertices] + [(0, r, "b") for r in b.rays]
    d = a.dim
    A_eq = [[g[1][i] for g in gens] for i in range(d)]
    b_eq = list(x)
    A_eq.append([1 if (g[0] and g[2] == "a") else 0 for g in gens])
    b_eq.append(1)
    A_eq.append([1 if (g[0] and g[2] == "b") else 0 for g in gens])
    b_eq.append(1)
    return solve_lp([0] * len(gens), A_eq=A_eq, b_eq=b_eq).status == "optimal"


@settings(max_examples=40, deadline=None)
@given(polyhedra(), polyhedra(), polyhedra())
def test_minkowski_commutative_associative(a, b, c):
    ab = minkowski_sum(a, b)
    assert set_equal(ab, minkowski_sum(b, a))
    assert set_equal(minkowski_sum(ab, c), minkowski_sum(a, minkowski_sum(b, c)))


@settings(max_examples=30, deadline=None)
@given(polyhedra(), polyhedra(), st.tuples(small, small))
def test_minkowski_membership_matches_lp(a, b, x):
    assert contains_point(minkowski_sum(a, b), x) == _brute_sum_contains(a, b, x)


@settings(max_examples=40, deadline=None)
@given(polyhedra(), polyhedra(), st.tuples(small, small))
def test_intersection_membership(a, b, x):
    assert contains_point(intersect(a, b), x) == (contains_point(a, x) and contains_point(b, x))


@settings(max_examples=40, deadline=None)
@given(polyhedra(), st.tuples(small, small))
def test_contains_point_h_vs_v(p, x):
    """H-side membership against a V-side LP on the generators."""
    gens = [(1, v) for v in p.vertices] + [(0, r) for r in p.rays]
    A_eq = [[g[1][i] for g in gens] for i in range(2)] + [[g[0] for g in gens]]
    res = solve_lp([0] * len(gens), A_eq=A_eq, b_eq=list(x) + [1])
    assert contains_point(p, x) == (res.status == "optimal")


def test_intersect_all_and_subset():
    a = Polyhedron.from_h(2, [((1, 0), 0), ((0, 1), 0)])
    b = Polyhedron.from_h(2, [((1, 0), 1)])
    c = Polyhedron.from_h(2, [((0, 1), 2)])
    abc = intersect_all([a, b, c])
    assert abc.vertices == ((F(1), F(2)),)
    assert is_subset(abc, a) and not is_subset(a, abc)
    assert intersect_all([a, Polyhedron.empty(2)]).is_empty


def test_translate_scale_diag():
    p = Polyhedron.from_v(2, [(0, 0), (1, 0)], [(0, 1)])
    t = p.translate((1, 1))
    assert set(t.vertices) == {(F(1), F(1)), (F(2), F(1))}
    s = p.scale(F(3, 2))
    assert (F(3, 2), F(0)) in s.vertices
    dimg = p.diag_image((2, 3))
    assert set_equal(dimg, Polyhedron.from_v(2, [(0, 0), (2, 0)], [(0, 1)]))
    with pytest.raises(ValueError):
        p.scale(0)


def test_json_round_trip_is_bit_exact():
    p = Polyhedron.from_v(2, [(F(1, 3), F(-2, 7))], [(1, F(-10, 11)), (-1, F(10, 9))])
    text = p.to_json()
    q = Polyhedron.from_json(text)
    assert set_equal(p, q)
    assert q.to_json() == text
    assert '"1/3"' in text


def test_whole_and_orthant():
    w = Polyhedron.whole(2)
    assert contains_point(w, (-100, 100))
    o = Polyhedron.orthant(3)
    assert contains_point(o, (0, 0, 0)) and not contains_point(o, (0, -1, 0))
    assert set_equal(minkowski_sum(o, o), o)


# ---------------------------------------------------------------------------
# linear programming


def test_solve_lp_textbook():
    # max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18  ->  (2, 6), 36
    res = solve_lp([-3, -5], [[1, 0], [0, 2], [3, 2]], [4, 12, 18])
    assert res.status == "optimal"
    assert res.x == (F(2), F(6)) and res.fun == F(-36)


def test_solve_lp_infeasible_and_unbounded():
    assert solve_lp([0, 0], [[1, 1]], [-1]).status == "infeasible"
    assert solve_lp([-1, 0], [[0, 1]], [1]).status == "unbounded"
    assert solve_lp([1], A_eq=[[1]], b_eq=[F(2, 3)]).x == (F(2, 3),)


def test_lexmin_breaks_ties():
    # every point of x + y = 1 is optimal for c = 0; lexmin picks x = 0
    res = solve_lp_lexmin([0, 0], A_eq=[[1, 1]], b_eq=[1])
    assert res.x == (F(0), F(1))


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.lists(st.integers(-4, 4), min_size=3, max_size=3), min_size=1, max_size=4),
    st.lists(st.integers(-3, 6), min_size=4, max_size=4),
    st.lists(st.integers(-3, 3), min_size=3, max_size=3),
)
def test_solve_lp_matches_highs(A, b, c):
    b = b[: len(A)]
    mine = solve_lp(c, A, b)
    ref = linprog(c, A_ub=np.array(A, float), b_ub=np.array(b, float), bounds=(0, None), method="highs")
    expected = {0: "optimal", 2: "infeasible", 3: "unbounded"}[ref.status]
    assert mine.status == expected
    if expected == "optimal":
        assert abs(float(mine.fun) - ref.fun) < 1e-7
        x = mine.x
        assert all(v >= 0 for v in x)
        assert all(sum(a * v for a, v in zip(row, x)) <= bi for row, bi in zip(A, b))


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.lists(st.integers(-4, 4), min_size=3, max_size=3), min_size=1, max_size=4),
    st.lists(st.fractions(-3, 6, max_denominator=5), min_size=4, max_size=4),
)
def test_certified_feasibility_agrees_with_exact_simplex(A, b):
    b = b[: len(A)]
    cert = certified_feasible(A, b)
    exact = solve_lp([0, 0, 0], A, b)
    assert cert.feasible == (exact.status == "optimal")
    if cert.feasible:
        assert all(v >= 0 for v in cert.x)
        assert all(sum(a * v for a, v in zip(row, cert.x)) <= bi for row, bi in zip(A, b))
    elif cert.y is not None:
        y = cert.y
        assert all(v >= 0 for v in y)
        assert all(sum(A[i][j] * y[i] for i in range(len(A))) >= 0 for j in range(3))
        assert sum(bi * yi for bi, yi in zip(b, y)) < 0


def test_certified_with_equalities():
    cert = certified_feasible(A_eq=[[1, 1, 0], [0, 1, 1]], b_eq=[1, F(3, 2)])
    assert cert.feasible
    x = cert.x
    assert x[0] + x[1] == 1 and x[1] + x[2] == F(3, 2)
    assert not certified_feasible(A_eq=[[1, 1]], b_eq=[-1]).feasible


def test_integer_grid_membership_exhaustive():
    """A triangle: membership of every point of a small grid."""
    tri = Polyhedron.from_v(2, [(0, 0), (4, 0), (0, 4)])
    for x, y in product(range(-1, 6), repeat=2):
        assert contains_point(tri, (x, y)) == (x >= 0 and y >= 0 and x + y <= 4)
