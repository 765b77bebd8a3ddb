from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from superhedging.errors import BadEvent, BudgetExceeded, LevelOutOfRange, UnsupportedDimension
from superhedging.market import Claim, MarketModel, build_tree
from superhedging.ratgeom.lp import solve_lp
from superhedging.ratgeom.polyhedron import contains_point, minkowski_sum, set_equal
from superhedging.solvency import ExchangeMatrix, build_cone, physical_cone
from superhedging.superhedge import (
    EpsQuery,
    EpsSolver,
    SuperhedgeOracle,
    backward_sets,
    check_axioms,
    concentration_check,
    conditional_probabilities,
    dpp_check,
    minimal_subsets,
    mutate_level_set,
)
from superhedging.verify import _uniform_tree, probe_points, random_claim, random_exchange, random_model


def test_one_period_root_by_hand(spec10, tree1, unit_claim):
    """Owing one unit of asset 1 at T: the cheapest position is (1, 0) and the
    set is (1, 0) plus the solvency cone at the (common) root price."""
    root = backward_sets(tree1, spec10, unit_claim).root
    assert root.vertices == ((F(1), F(0)),)
    assert set(root.rays) == {(F(-1), F(10, 9)), (F(1), F(-10, 11))}
    assert set(root.inequalities) == {((F(1), F(9, 10)), F(1)), ((F(1), F(11, 10)), F(1))}


def test_zero_claim_contains_origin(spec10, tree2):
    res = backward_sets(tree2, spec10, Claim("constant-physical", vector=(0, 0)))
    for s in res.sets.values():
        assert contains_point(s, (0, 0)) and not contains_point(s, (F(-1, 100), 0))


def test_deterministic_prices_collapse_to_one_cone(spec10):
    """With zero volatility every node has the root price, so the set is
    Xhat + Khat(s0) however many periods there are."""
    flat = build_tree(MarketModel.constant((1.0, 1.0), 0.0, [0.0], [[0.0], [0.0]], 1.0), 3)
    x = (F(2), F(-1, 3))
    root = backward_sets(flat, spec10, Claim("constant-physical", vector=x)).root
    assert set_equal(root, physical_cone(spec10, (1, 1)).translate(x))


# ---------------------------------------------------------------------------
# brute-force oracle and the dynamic programming principle


def test_oracle_on_the_golden_root(spec10, tree1, unit_claim):
    oracle = SuperhedgeOracle(tree1, spec10, unit_claim)
    assert oracle.member((1, 0))
    assert not oracle.member((F(99, 100), 0))
    cert = oracle.certificate((F(99, 100), 0))
    assert not cert.feasible


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([(2, 2), (2, 3), (3, 2)]))
def test_recursion_matches_oracle(seed, dP):
    d, P = dP
    rng = np.random.default_rng(seed)
    spec = build_cone(random_exchange(rng, d))
    tree = build_tree(random_model(rng, d), P)
    claim = random_claim(rng, d)
    root = backward_sets(tree, spec, claim).root
    oracle = SuperhedgeOracle(tree, spec, claim)
    for x in probe_points(rng, root, 8):
        assert oracle.member(x) == contains_point(root, x)


def test_dpp_and_a_mutation_is_caught(spec10, tree2, call2):
    res = backward_sets(tree2, spec10, call2)
    assert dpp_check(res, 1)
    # growing one intermediate set by a direction outside it changes the root
    node = tree2.levels[1][0]
    bad = mutate_level_set(res, 1, node, (-1, 0))
    assert not dpp_check(res, 1, bad, method="recursion")
    assert not dpp_check(res, 1, bad, method="lp")
    with pytest.raises(LevelOutOfRange):
        dpp_check(res, 0)
    with pytest.raises(LevelOutOfRange):
        dpp_check(res, 2)


def test_budgets(spec10):
    d4 = build_cone(ExchangeMatrix.constant(4, F(1, 10)))
    m4 = MarketModel.constant([1.0] * 4, 0, [0.0] * 3, [[0, 0, 0], [0.2, 0, 0], [0, 0.2, 0], [0, 0, 0.2]], 1)
    with pytest.raises(UnsupportedDimension):
        backward_sets(build_tree(m4, 1), d4, Claim("constant-physical", vector=(0, 0, 0, 0)))
    big = build_tree(MarketModel.constant((1.0, 1.0), 0, [0.0], [[0.0], [0.2]], 1.0), 10)
    with pytest.raises(BudgetExceeded):
        backward_sets(big, spec10, Claim("constant-physical", vector=(0, 0)))


# ---------------------------------------------------------------------------
# epsilon-relaxed membership


def test_minimal_subsets():
    q = F(1, 4)
    assert minimal_subsets([q] * 4, F(1, 2)) == [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    assert minimal_subsets([F(1, 2), F(1, 2)], 0) == [()]
    assert minimal_subsets([F(1, 2), F(1, 2)], 1) == [(0, 1)]


@pytest.mark.parametrize("eps", [0.05, 0.2])
def test_exact_members_are_eps_members(spec10, tree2, call2, eps):
    root = backward_sets(tree2, spec10, call2).root
    solver = EpsSolver(tree2, spec10, call2, eps)
    for v in root.vertices:
        assert solver.member(EpsQuery(tuple(float(x) for x in v), eps))


def test_free_lunch_at_large_eps(spec10, tree1, unit_claim):
    """At eps = 1/2 the relaxed cones contain (-1, 1/2) and (7/10, -1) at
    every node; their sum (-3/10, -1/2) gives something for nothing, so every
    position is accepted."""
    solver = EpsSolver(tree1, spec10, unit_claim, F(1, 2))
    a, b = (F(-1), F(1, 2)), (F(7, 10), F(-1))
    for nid in range(3):
        assert solver.in_eps_cone(nid, a) and solver.in_eps_cone(nid, b)
    t = 1000
    xi = (F(-100), F(-100))
    for leaf in tree1.levels[-1]:
        # xi - t a - t b + eps 1 >= Xhat
        left = [xi[i] - t * a[i] - t * b[i] + F(1, 2) for i in range(2)]
        assert left[0] >= 1 and left[1] >= 0
    assert solver.member(EpsQuery((-100.0, -100.0), 0.5))


def test_exterior_point_with_dual_certificate(spec10, tree1, unit_claim):
    """(0, 0) does not eps-superhedge one unit of asset 1 at eps = 0.05.

    Certificate: Z at each leaf, in the dual of the convex hull of that
    leaf's eps cone, whose mean lies in the dual at the root. Pairing Z with
    any admissible trades gives E[Z.(xi + eps - Xhat)] >= 0, and here that
    mean is negative. Both leaves are needed (each has probability 1/2).
    """
    eps = 0.05
    solver = EpsSolver(tree1, spec10, unit_claim, eps)
    assert not solver.member(EpsQuery((0.0, 0.0), eps))
    leaves = tree1.levels[-1]
    gens = {nid: [g for piece in solver.pieces[nid] for g in piece] for nid in range(3)}
    # variables: Z_leafA (2), Z_leafB (2), all >= 0
    A_ub, b_ub = [], []
    for j, lid in enumerate(leaves):
        for g in gens[lid]:
            row = [F(0)] * 4
            row[2 * j], row[2 * j + 1] = -g[0], -g[1]
            A_ub.append(row)
            b_ub.append(0)
    for g in gens[0]:
        A_ub.append([-g[0], -g[1], -g[0], -g[1]])
        b_ub.append(0)
    cushion = F(eps)
    rhs = {lid: [cushion - 1, cushion] for lid in leaves}
    c = [rhs[leaves[0]][0], rhs[leaves[0]][1], rhs[leaves[1]][0], rhs[leaves[1]][1]]
    res = solve_lp(c, A_ub, b_ub, A_eq=[[1, 0, 1, 0]], b_eq=[2])
    assert res.status == "optimal" and res.fun < 0
    Z = res.x
    # re-verify the certificate exactly, independent of the LP
    for j, lid in enumerate(leaves):
        assert all(Z[2 * j] * g[0] + Z[2 * j + 1] * g[1] >= 0 for g in gens[lid])
    z0 = (Z[0] + Z[2], Z[1] + Z[3])
    assert all(z0[0] * g[0] + z0[1] * g[1] >= 0 for g in gens[0])
    assert sum(ci * zi for ci, zi in zip(c, Z)) < 0


def test_eps_acceptance_is_stable_under_small_shifts(spec10, tree1, call2):
    """Accepted at eps' implies xi + delta accepted at eps for
    |delta| <= eps - eps' (the cushion grows by at least that much)."""
    rng = np.random.default_rng(17)
    lo, hi = 0.05, 0.1
    s_lo, s_hi = EpsSolver(tree1, spec10, call2, lo), EpsSolver(tree1, spec10, call2, hi)
    v = backward_sets(tree1, spec10, call2).root.vertices[0]
    accepted = 0
    for _ in range(50):
        xi = tuple(float(x) - rng.uniform(-0.1, 0.3) for x in v)
        if not s_lo.member(EpsQuery(xi, lo)):
            continue
        accepted += 1
        delta = rng.uniform(-(hi - lo), hi - lo, size=2)
        assert s_hi.member(EpsQuery(tuple(np.add(xi, delta)), hi))
    assert accepted > 0


def test_eps_query_validation(spec10, tree1, unit_claim):
    with pytest.raises(ValueError):
        EpsQuery((0.0, 0.0), 0.0)
    with pytest.raises(ValueError):
        EpsQuery((0.0, 0.0), 0.1, L=0.5)
    with pytest.raises(ValueError):
        EpsSolver(tree1, spec10, unit_claim, 0.1).member(EpsQuery((0.0, 0.0), 0.2))
    big = build_tree(MarketModel.constant((1.0, 1.0), 0, [0.0], [[0.0], [0.2]], 1.0), 4)
    with pytest.raises(BudgetExceeded):
        EpsSolver(big, spec10, unit_claim, 0.1).member(EpsQuery((0.0, 0.0), 0.1))


# ---------------------------------------------------------------------------
# concentration


def test_concentration_by_hand():
    tree = _uniform_tree(1, 3)
    leaf = tree.levels[-1][0]
    cond = conditional_probabilities(tree, [leaf], 1)
    first, second = tree.levels[1]
    assert cond == {first: F(1, 4), second: F(0)}
    assert concentration_check(tree, [leaf], F(1, 8), 1)
    with pytest.raises(BadEvent):
        concentration_check(tree, tree.levels[-1][:2], F(1, 8), 1)
    with pytest.raises(BadEvent):
        concentration_check(tree, [0], F(1, 8), 1)
    with pytest.raises(LevelOutOfRange):
        concentration_check(tree, [leaf], F(1, 8), 4)


@settings(max_examples=500, deadline=None)
@given(st.data(), st.sampled_from([(1, 3), (2, 2)]))
def test_concentration_sweep(data, mP):
    tree = _uniform_tree(*mP)
    leaves = tree.levels[-1]
    A = data.draw(st.lists(st.sampled_from(leaves), unique=True))
    pA = F(len(A), len(leaves))
    eps = data.draw(st.fractions(max(pA, F(1, 50)), 1, max_denominator=64))
    u = data.draw(st.integers(0, tree.periods))
    assert concentration_check(tree, A, eps, u)


# ---------------------------------------------------------------------------
# risk-measure axioms


def test_axioms_on_a_call(spec10, tree2, call2):
    rep = check_axioms(tree2, spec10, call2, shift=(F(1, 2), F(-1)), bump=(F(1, 10), 0), lam=F(3, 2))
    assert rep.ok
    with pytest.raises(ValueError):
        check_axioms(tree2, spec10, call2, shift=(0, 0), bump=(-1, 0), lam=1)


def test_upper_set_property(spec10, tree2, call2):
    root = backward_sets(tree2, spec10, call2).root
    from superhedging.ratgeom.polyhedron import Polyhedron

    assert set_equal(minkowski_sum(root, Polyhedron.orthant(2)), root)
