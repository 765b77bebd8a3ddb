from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from superhedging.errors import (
    DegenerateCone,
    DimensionMismatch,
    Infeasible,
    InvalidCostMatrix,
    NonpositivePrice,
    PreconditionViolated,
)
from superhedging.ratgeom.polyhedron import contains_point
from superhedging.rational import scale_first_unit
from superhedging.solvency import (
    EpsCone,
    ExchangeMatrix,
    apply_transfers,
    build_cone,
    decompose,
    dual_cone_rows,
    dual_membership,
    dual_membership_generators,
    eps_inclusion_check,
    eps_membership,
    eps_pieces,
    physical_cone,
    transfer_matrix_for,
)
from superhedging.verify import random_exchange


def rays_of(*vs):
    return {scale_first_unit(tuple(F(x) for x in v)) for v in vs}


# ---------------------------------------------------------------------------
# the d = 2, mu = 1/10 fixture, by hand


def test_exchange_matrix_fixture(spec10):
    assert spec10.exchange.pi == ((F(1), F(11, 10)), (F(-9, 10), F(0)))
    assert spec10.exchange.generator(0, 1) == (F(11, 10), F(-1))
    assert spec10.exchange.generator(1, 0) == (F(-9, 10), F(1))


def test_cone_generators_and_duals(spec10):
    assert rays_of(*spec10.extreme_rays) == rays_of((F(11, 10), -1), (F(-9, 10), 1))
    # normals w with w.g >= 0 on both generators: w = (1, 9/10) and (1, 11/10)
    assert set(spec10.dual_generators) == {(F(1), F(9, 10)), (F(1), F(11, 10))}
    for w in spec10.dual_generators:
        assert all(sum(a * b for a, b in zip(w, g)) >= 0 for g in spec10.extreme_rays)


def test_decompose_unit_vectors(spec10):
    # b12 (11/10, -1) + b21 (-9/10, 1) = alpha has the unique solution
    # b12 = 5 (alpha1 + 9/10 alpha2), b21 = b12 + alpha2
    B = decompose(spec10, (1, 1))
    assert (B[0][1], B[1][0]) == (F(19, 2), F(21, 2))
    B = decompose(spec10, (1, 0))
    assert (B[0][1], B[1][0]) == (F(5), F(5))
    assert apply_transfers(spec10.exchange, B) == (F(1), F(0))


def test_physical_cone_at_prices(spec10):
    pc = physical_cone(spec10, (1, 2))
    assert rays_of(*pc.rays) == rays_of((F(-9, 10), F(1, 2)), (F(11, 10), F(-1, 2)))
    # the halfspaces scale with the prices: (1, 9/5) and (1, 11/5)
    normals = {scale_first_unit(a) for a, _ in pc.inequalities}
    assert normals == {(F(1), F(9, 5)), (F(1), F(11, 5))}


def test_dual_membership_ratio_form(spec10):
    y = (1, 1)
    assert dual_membership(spec10, y, (1, 1))
    assert dual_membership(spec10, y, (1, F(9, 10))) and dual_membership(spec10, y, (1, F(11, 10)))
    assert not dual_membership(spec10, y, (1, F(12, 10)))
    assert not dual_membership(spec10, y, (1, F(8, 10)))
    assert not dual_membership(spec10, y, (-1, -1))


# ---------------------------------------------------------------------------
# validation


def test_invalid_cost_matrices():
    with pytest.raises(InvalidCostMatrix):
        ExchangeMatrix.from_rows([[0, "0.1"], ["0.1", "0.2"]])
    with pytest.raises(InvalidCostMatrix):
        ExchangeMatrix.from_rows([[0, 1], [F(1, 10), 0]])
    with pytest.raises(InvalidCostMatrix):
        ExchangeMatrix.from_rows([[0, "0.3", "0.01"], ["0.1", 0, "0.1"], ["0.1", "0.01", 0]])
    with pytest.raises(InvalidCostMatrix):
        ExchangeMatrix.from_rows([[0]])


def test_degenerate_cone_rejected_unless_allowed():
    with pytest.raises(DegenerateCone):
        ExchangeMatrix.constant(3, 0)
    spec = build_cone(ExchangeMatrix.constant(2, 0, allow_degenerate=True))
    # without costs the pair generators are +-(1, -1): the cone is a line and
    # no longer contains the orthant
    assert {scale_first_unit(a) for a, _ in spec.halfspaces.rows} == {(F(1), F(1)), (F(-1), F(-1))}
    with pytest.raises(Infeasible):
        decompose(spec, (1, 0))


def test_price_validation(spec10):
    with pytest.raises(NonpositivePrice):
        physical_cone(spec10, (1, 0))
    with pytest.raises(DimensionMismatch):
        physical_cone(spec10, (1, 1, 1))


# ---------------------------------------------------------------------------
# properties on random cost matrices

seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=100, deadline=None)
@given(seeds, st.sampled_from([2, 3, 4]), st.lists(st.fractions(0, 5, max_denominator=9), min_size=4, max_size=4))
def test_orthant_decomposition(seed, d, alpha):
    spec = build_cone(random_exchange(np.random.default_rng(seed), d))
    alpha = tuple(alpha[:d])
    B = decompose(spec, alpha)
    assert all(x >= 0 for row in B for x in row)
    assert all(B[i][i] == 0 for i in range(d))
    assert apply_transfers(spec.exchange, B) == alpha
    assert contains_point(spec.cone, alpha)


@settings(max_examples=100, deadline=None)
@given(seeds, st.sampled_from([2, 3, 4]))
def test_dual_generators_strictly_positive(seed, d):
    spec = build_cone(random_exchange(np.random.default_rng(seed), d))
    assert all(x > 0 for w in spec.dual_generators for x in w)


@settings(max_examples=500, deadline=None)
@given(
    seeds,
    st.sampled_from([2, 3]),
    st.lists(st.fractions(-2, 3, max_denominator=12), min_size=3, max_size=3),
    st.lists(st.fractions(F(1, 4), 4, max_denominator=8), min_size=2, max_size=2),
)
def test_ratio_inequalities_match_definition(seed, d, z, ys):
    spec = build_cone(random_exchange(np.random.default_rng(seed), d))
    y = (F(1),) + tuple(ys[: d - 1])
    z = tuple(z[:d])
    by_ratio = dual_membership(spec, y, z)
    assert by_ratio == dual_membership_generators(spec, y, z)
    # and the LP rows describe the same set
    assert by_ratio == all(sum(a * b for a, b in zip(row, z)) >= 0 for row, _ in dual_cone_rows(spec, y))


@settings(max_examples=60, deadline=None)
@given(seeds, st.sampled_from([2, 3]), st.lists(st.fractions(-3, 3, max_denominator=7), min_size=3, max_size=3))
def test_transfer_matrix_exists_iff_in_cone(seed, d, x):
    ex = random_exchange(np.random.default_rng(seed), d)
    spec = build_cone(ex)
    x = tuple(x[:d])
    B = transfer_matrix_for(ex, x)
    assert (B is not None) == contains_point(spec.cone, x)
    if B is not None:
        assert apply_transfers(ex, B) == x


# ---------------------------------------------------------------------------
# epsilon cones


def test_eps_cone_examples(spec10):
    c = EpsCone.of(spec10, (1, 1), 0.5)
    # unit normals (0.743, 0.669) and (0.673, 0.740): -0.743 < -0.5
    assert not eps_membership(c, (-1, 0))
    assert eps_membership(c, (-1, 0.4))
    assert eps_membership(c, (0, 0))


@settings(max_examples=200, deadline=None)
@given(st.tuples(st.floats(-3, 3), st.floats(-3, 3)), st.floats(0, 1), st.floats(0, 1))
def test_eps_cone_monotone_in_eps(spec10, x, e1, e2):
    lo, hi = sorted((e1, e2))
    if eps_membership(EpsCone.of(spec10, (1, 1.3), lo), x):
        assert eps_membership(EpsCone.of(spec10, (1, 1.3), hi), x)


@settings(max_examples=200, deadline=None)
@given(st.tuples(st.fractions(-3, 3, max_denominator=10), st.fractions(-3, 3, max_denominator=10)))
def test_eps_zero_is_the_exact_cone(spec10, x):
    exact = contains_point(physical_cone(spec10, (1, 1)), x)
    assert eps_membership(EpsCone.of(spec10, (1, 1), 0.0), [float(v) for v in x]) == exact


@settings(max_examples=300, deadline=None)
@given(
    st.tuples(st.fractions(-3, 3, max_denominator=10), st.fractions(-3, 3, max_denominator=10)),
    st.fractions(0, 1, max_denominator=20),
)
def test_eps_pieces_cover_the_eps_cone(spec10, x, eps):
    a = [tuple(F(v) for v in w) for w in spec10.unit_normals]
    norm = max(abs(v) for v in x)
    in_cone = all(sum(ai * xi for ai, xi in zip(w, x)) >= -eps * norm for w in a)
    in_union = any(all(sum(ai * xi for ai, xi in zip(r, x)) >= 0 for r in rows) for rows in eps_pieces(a, eps))
    assert in_cone == in_union


def test_eps_inclusion_under_price_shift(spec10):
    assert eps_inclusion_check(spec10, (1, 1), (1, 1.05), 0.05, 0.1, samples=1000, rng_seed=1)
    with pytest.raises(PreconditionViolated):
        eps_inclusion_check(spec10, (1, 1), (1, 1.2), 0.05, 0.1)


@settings(max_examples=20, deadline=None)
@given(seeds, st.floats(0.01, 0.2), st.floats(0, 0.3), st.floats(0, 1))
def test_eps_inclusion_random(seed, eps1, eps2, frac):
    rng = np.random.default_rng(seed)
    spec = build_cone(random_exchange(rng, 3))
    y = np.r_[1.0, rng.uniform(0.5, 2, size=2)]
    u = rng.normal(size=3)
    yp = y + frac * eps1 * u / np.linalg.norm(u)
    if np.any(yp <= 0):
        return
    assert eps_inclusion_check(spec, y, yp, eps1, eps2, samples=200, rng_seed=seed)
