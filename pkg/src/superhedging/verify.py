"""Property suite: one function per acceptance criterion.

Each check draws its fixtures from a seeded generator, runs the exact (or
Monte Carlo) computation and returns a ``CheckResult``. The CLI ``verify``
command and the acceptance tests share these functions; ``quick=True``
shrinks the sample counts for smoke runs.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .errors import DegenerateCone
from .market import Claim, MarketModel, build_tree, simulate_paths
from .portfolio import convergence_study, k_to_theta, simulate_value, theta_to_k
from .pricing import (
    find_consistent_Z,
    mc_consistent_Z,
    mc_supermartingale_check,
    root_Z,
    supermartingale_check,
)
from .ratgeom.polyhedron import contains_point
from .rational import scale_first_unit
from .solvency import (
    ExchangeMatrix,
    apply_transfers,
    build_cone,
    decompose,
    dual_membership,
    dual_membership_generators,
    eps_inclusion_check,
    physical_cone,
    physical_generators,
)
from .superhedge import (
    EpsQuery,
    EpsSolver,
    SuperhedgeOracle,
    backward_sets,
    check_axioms,
    concentration_check,
    dpp_check,
    mutate_level_set,
)


@dataclass
class CheckResult:
    number: int
    name: str
    ok: bool
    seconds: float
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        info = ", ".join(f"{k}={v}" for k, v in self.detail.items())
        return f"[{status}] criterion {self.number}: {self.name} ({self.seconds:.2f}s) {info}".rstrip()

    def to_dict(self) -> dict:
        return {"criterion": self.number, "name": self.name, "ok": self.ok, "seconds": round(self.seconds, 3), "detail": self.detail}


def _timed(number: int, name: str, fn: Callable[[], tuple[bool, dict]]) -> CheckResult:
    t0 = time.perf_counter()
    ok, detail = fn()
    return CheckResult(number, name, bool(ok), time.perf_counter() - t0, detail)


# ---------------------------------------------------------------------------
# random fixtures


def random_rational(rng: np.random.Generator, lo: float, hi: float, den: int = 1000) -> Fraction:
    return Fraction(int(rng.integers(math.ceil(lo * den), math.floor(hi * den) + 1)), den)


def random_exchange(rng: np.random.Generator, d: int, lo: float = 0.01, hi: float = 0.3) -> ExchangeMatrix:
    """Random costs in ``[lo, hi]``, then closed under the triangle rule
    (``1 + mu_ij`` replaced by the cheapest product along detours)."""
    mu = [[Fraction(0) if i == j else random_rational(rng, lo, hi) for j in range(d)] for i in range(d)]
    for k in range(d):
        for i in range(d):
            for j in range(d):
                if len({i, j, k}) == 3:
                    mu[i][j] = min(mu[i][j], (1 + mu[i][k]) * (1 + mu[k][j]) - 1)
    return ExchangeMatrix.from_rows(mu)


def random_model(rng: np.random.Generator, d: int, T: float = 1.0) -> MarketModel:
    s0 = [1.0] + [float(rng.uniform(0.5, 2.0)) for _ in range(d - 1)]
    r = float(rng.uniform(0.0, 0.05))
    b = [float(rng.uniform(-0.05, 0.1)) for _ in range(d - 1)]
    sigma = np.zeros((d, d - 1))
    sigma[1:] = rng.uniform(-0.1, 0.1, size=(d - 1, d - 1)) + np.diag(rng.uniform(0.1, 0.4, size=d - 1))
    return MarketModel.constant(s0, r, b, sigma.tolist(), T)


def random_claim(rng: np.random.Generator, d: int) -> Claim:
    kind = rng.integers(3)
    if kind == 0:
        return Claim("constant-physical", vector=tuple(random_rational(rng, -1, 1, 10) for _ in range(d)))
    if kind == 1:
        return Claim("vanilla-call", asset=int(rng.integers(2, d + 1)), strike=random_rational(rng, 0.5, 1.5, 20))
    return Claim("linear-basket", weights=tuple(random_rational(rng, -1, 1, 10) for _ in range(d)))


def _same_rays(a, b) -> bool:
    return {scale_first_unit(r) for r in a} == {scale_first_unit(r) for r in b}


# ---------------------------------------------------------------------------
# 1. cone fixture


def check_cone_fixture(quick: bool = False) -> CheckResult:
    def run():
        spec = build_cone(ExchangeMatrix.constant(2, Fraction(1, 10)))
        F = Fraction
        gens = _same_rays(spec.extreme_rays, [(F(11, 10), F(-1)), (F(-9, 10), F(1))])
        duals = set(spec.dual_generators) == {(F(1), F(9, 10)), (F(1), F(11, 10))}
        # ratio inequalities vs. the generator definition on a rational grid
        agree, n = True, 0
        for y in [(F(1), F(1)), (F(1), F(2)), (F(1), F(1, 3))]:
            for p in range(-20, 41, 3):
                for q in range(-20, 41, 3):
                    z = (F(p, 20), F(q, 20))
                    if any(z):
                        n += 1
                        agree &= dual_membership(spec, y, z) == dual_membership_generators(spec, y, z)
        # the dual generators themselves, at unit prices, pass the ratio test
        on_boundary = all(dual_membership(spec, (1, 1), w) for w in spec.dual_generators)
        pc = physical_cone(spec, (1, 2))
        phys = _same_rays(pc.rays, [(F(-9, 10), F(1, 2)), (F(11, 10), F(-1, 2))])
        dec = decompose(spec, (1, 1))
        decomp = apply_transfers(spec.exchange, dec) == (F(1), F(1)) and (dec[0][1], dec[1][0]) == (F(19, 2), F(21, 2))
        ok = gens and duals and agree and on_boundary and phys and decomp
        return ok, {"generators": gens, "duals": duals, "ratio_vs_definition": f"{n} points", "physical": phys, "decompose": decomp}

    return _timed(1, "cone correctness (d=2, mu=1/10)", run)


# ---------------------------------------------------------------------------
# 2. decomposition


def check_decomposition(quick: bool = False, seed: int = 2) -> CheckResult:
    n = 100 if quick else 1000

    def run():
        rng = np.random.default_rng(seed)
        specs = {}
        failures = 0
        for k in range(n):
            d = (2, 3, 4)[k % 3]
            if d not in specs or k % 30 < 3:
                specs[d] = build_cone(random_exchange(rng, d))
            spec = specs[d]
            alpha = tuple(random_rational(rng, 0, 5, 7) for _ in range(d))
            B = decompose(spec, alpha)
            if any(x < 0 for row in B for x in row) or apply_transfers(spec.exchange, B) != alpha:
                failures += 1
        try:
            ExchangeMatrix.constant(2, 0)
            degenerate = False
        except DegenerateCone:
            degenerate = True
        return failures == 0 and degenerate, {"alphas": n, "failures": failures, "degenerate_rejected": degenerate}

    return _timed(2, "orthant decomposition", run)


# ---------------------------------------------------------------------------
# 3. dual generators positive


def check_dual_positivity(quick: bool = False, seed: int = 3) -> CheckResult:
    n = 20 if quick else 100

    def run():
        rng = np.random.default_rng(seed)
        bad = 0
        for k in range(n):
            spec = build_cone(random_exchange(rng, (2, 3, 4)[k % 3]))
            bad += sum(1 for w in spec.dual_generators if not all(x > 0 for x in w))
        return bad == 0, {"fixtures": n, "nonpositive_generators": bad}

    return _timed(3, "dual generators strictly positive", run)


# ---------------------------------------------------------------------------
# 4. strategy representations


def random_khat(rng: np.random.Generator, spec, S_coarse: np.ndarray, scale: float = 0.5) -> np.ndarray:
    """Physical-units rates ``diag(S)^-1 k`` with ``k`` a random nonnegative
    combination of the cone generators, one per path and coarse step."""
    gens = np.asarray([[float(x) for x in g] for g in spec.generators.rays])
    n_paths, n_steps = S_coarse.shape[0], S_coarse.shape[1] - 1
    lam = rng.exponential(scale, size=(n_paths, n_steps, len(gens)))
    k = lam @ gens
    return k / S_coarse[:, :-1, :]


def check_strategy_equivalence(quick: bool = False, seed: int = 4) -> CheckResult:
    n_fix = 20 if quick else 100
    n_paths = 300 if quick else 2000

    def run():
        rng = np.random.default_rng(seed)
        trips = 0
        for k in range(n_fix):
            d = (2, 3, 4)[k % 3]
            ex = random_exchange(rng, d)
            theta = [[Fraction(0) if i == j else random_rational(rng, 0, 2, 9) for j in range(d)] for i in range(d)]
            k1 = theta_to_k(theta, ex)
            k2 = theta_to_k(k_to_theta(k1, ex), ex)
            trips += k1 == k2
        spec = build_cone(random_exchange(rng, 2))
        model = MarketModel.constant((1.0, 1.0), 0.02, [0.05], [[0.0], [0.3]], 1.0)
        fine = simulate_paths(model, n_paths, 128, seed)
        coarse_S = fine.S[:, ::16, :]
        khat = random_khat(rng, spec, coarse_S)
        dts, errs, order = convergence_study(model, khat, (1.0, 1.0), fine, [16, 8, 4, 2, 1])
        ok = trips == n_fix and order >= 0.9
        return ok, {"round_trips": f"{trips}/{n_fix}", "order": round(order, 3), "errors": [f"{e:.2e}" for e in errs]}

    return _timed(4, "strategy representations and value convergence", run)


# ---------------------------------------------------------------------------
# 5. supermartingale


def random_tree_strategy(rng, tree, spec):
    """Per internal node, a random nonnegative rational combination of the
    generators of the physical cone there."""
    out = {}
    for level in tree.levels[:-1]:
        for nid in level:
            gens = physical_generators(spec, tree.nodes[nid].qprice)
            k = [Fraction(0)] * spec.d
            for g in gens:
                w = random_rational(rng, 0, 1, 8)
                k = [a + w * b for a, b in zip(k, g)]
            out[nid] = k
    return out


def check_supermartingale(quick: bool = False, seed: int = 5) -> CheckResult:
    n_fix = 10 if quick else 50
    n_paths = 10_000 if quick else 100_000

    def run():
        rng = np.random.default_rng(seed)
        violations = 0
        for k in range(n_fix):
            d, P = (2, 3)[k % 2], 1 + k % 3
            spec = build_cone(random_exchange(rng, d))
            tree = build_tree(random_model(rng, d), P)
            cpp = find_consistent_Z(tree, spec)
            strat = random_tree_strategy(rng, tree, spec)
            v0 = [random_rational(rng, -2, 2, 10) for _ in range(d)]
            rep = supermartingale_check(tree, cpp, strat, v0, spec)
            violations += rep.violations
        model = MarketModel.constant((1.0, 1.2), 0.03, [0.08], [[0.0], [0.25]], 1.0)
        spec = build_cone(ExchangeMatrix.constant(2, Fraction(1, 20)))
        n_steps = 16
        paths = simulate_paths(model, n_paths, n_steps, seed)
        khat = random_khat(rng, spec, paths.S)
        vp = simulate_value(model, khat, (1.0, 1.0), paths)
        z0 = [float(x) for x in root_Z(spec, [Fraction(x) for x in model.s0])]
        Z = mc_consistent_Z(model, paths, z0)
        mc = mc_supermartingale_check(Z, vp.Vhat, spec, paths.S)
        ok = violations == 0 and mc.ok
        return ok, {"tree_fixtures": n_fix, "violations": violations, "mc_mean": round(mc.mean, 5), "mc_bound": round(mc.bound, 5), "mc_se": f"{mc.se:.1e}", "dual_violations": mc.dual_violations}

    return _timed(5, "price-process supermartingale", run)


# ---------------------------------------------------------------------------
# 6. dynamic programming principle


def check_dpp(quick: bool = False, seed: int = 6) -> CheckResult:
    draws = 3 if quick else 20

    def run():
        rng = np.random.default_rng(seed)
        checked, failures, mutations_caught, mutations = 0, 0, 0, 0
        for k in range(draws):
            for d in (2, 3):
                for P in (2, 3):
                    spec = build_cone(random_exchange(rng, d))
                    tree = build_tree(random_model(rng, d), P)
                    res = backward_sets(tree, spec, random_claim(rng, d))
                    for u in range(1, P):
                        checked += 1
                        failures += not dpp_check(res, u)
                    if (d, P) == (2, 2) or k < 2:
                        u = 1
                        nid = tree.levels[u][0]
                        # -e_1 points out of every superhedging set
                        ray = (Fraction(-1),) + (Fraction(0),) * (d - 1)
                        mutations += 1
                        mutations_caught += not dpp_check(res, u, mutate_level_set(res, u, nid, ray))
        ok = failures == 0 and mutations_caught == mutations
        return ok, {"checks": checked, "failures": failures, "mutations_caught": f"{mutations_caught}/{mutations}"}

    return _timed(6, "dynamic programming principle", run)


# ---------------------------------------------------------------------------
# 7. oracle equivalence


def probe_points(rng: np.random.Generator, poly, n: int) -> list[tuple[Fraction, ...]]:
    """Rational points inside, on the boundary of, and outside ``poly``."""
    verts, rays = list(poly.vertices), list(poly.rays)
    d = poly.dim
    out = []
    for k in range(n):
        v = verts[int(rng.integers(len(verts)))]
        kind = k % 4
        if kind == 0:  # a vertex (boundary)
            out.append(tuple(v))
        elif kind == 1:  # vertex plus a random combination of rays (inside or on)
            x = list(v)
            for r in rays:
                w = random_rational(rng, 0, 2, 5)
                x = [a + w * b for a, b in zip(x, r)]
            out.append(tuple(x))
        elif kind == 2:  # just below a vertex (outside)
            delta = Fraction(1, int(rng.integers(2, 1000)))
            out.append(tuple(a - delta for a in v))
        else:  # a random perturbation either way
            out.append(tuple(a + random_rational(rng, -0.5, 0.5, 64) for a in v))
    return out


def check_oracle(quick: bool = False, seed: int = 7) -> CheckResult:
    probes = 40 if quick else 200
    reps = 1 if quick else 2

    def run():
        rng = np.random.default_rng(seed)
        total, mismatches, inside = 0, 0, 0
        for _ in range(reps):
            for d in (2, 3):
                for P in (1, 2, 3):
                    spec = build_cone(random_exchange(rng, d))
                    tree = build_tree(random_model(rng, d), P)
                    claim = random_claim(rng, d)
                    root = backward_sets(tree, spec, claim).root
                    oracle = SuperhedgeOracle(tree, spec, claim)
                    for xi in probe_points(rng, root, probes):
                        a = contains_point(root, xi)
                        b = oracle.member(xi)
                        total += 1
                        inside += a
                        mismatches += a != b
        return mismatches == 0, {"probes": total, "inside": inside, "mismatches": mismatches}

    return _timed(7, "recursion vs. brute-force oracle", run)


# ---------------------------------------------------------------------------
# 8. epsilon machinery


EPS_GRID = (0.05, 0.1, 0.2, 0.4)


def check_eps_machinery(quick: bool = False, seed: int = 8) -> CheckResult:
    n_fix = 10 if quick else 50
    n_conc = 100 if quick else 500
    n_queries = 10 if quick else 50

    def run():
        rng = np.random.default_rng(seed)
        # perturbed-cone inclusion
        incl_fail = 0
        for k in range(n_fix):
            d = (2, 3)[k % 2]
            spec = build_cone(random_exchange(rng, d))
            y = np.r_[1.0, rng.uniform(0.5, 2.0, size=d - 1)]
            eps1 = float(rng.uniform(0.01, 0.2))
            direction = rng.normal(size=d)
            yp = y + eps1 * float(rng.uniform(0, 1)) * direction / np.linalg.norm(direction)
            yp = np.maximum(yp, 1e-3)
            if np.linalg.norm(yp - y) > eps1:
                yp = y
            eps2 = float(rng.uniform(0.0, 0.3))
            incl_fail += not eps_inclusion_check(spec, y, yp, eps1, eps2, samples=1000, rng_seed=k)
        # concentration
        conc_fail = 0
        for k in range(n_conc):
            m, P = (1, 2)[k % 2], (3, 2)[k % 2]
            tree = _uniform_tree(m, P)
            leaves = tree.levels[-1]
            size = int(rng.integers(0, len(leaves) + 1))
            A = [int(x) for x in rng.choice(leaves, size=size, replace=False)]
            pA = Fraction(len(A), len(leaves))
            eps = min(Fraction(1), pA + random_rational(rng, 0, 0.3, 97))
            if eps == 0:
                eps = Fraction(1, 97)
            u = int(rng.integers(0, P + 1))
            conc_fail += not concentration_check(tree, A, eps, u)
        # monotonicity in eps
        inversions, accepted = 0, [0] * len(EPS_GRID)
        spec = build_cone(ExchangeMatrix.constant(2, Fraction(1, 10)))
        fixtures = []
        for P in (1, 2):
            tree = build_tree(MarketModel.constant((1.0, 1.0), 0.0, [0.0], [[0.0], [0.2]], 1.0), P)
            claim = Claim("vanilla-call", asset=2, strike=Fraction(1))
            root = backward_sets(tree, spec, claim).root
            fixtures.append((tree, claim, root, [EpsSolver(tree, spec, claim, e) for e in EPS_GRID]))
        for q in range(n_queries):
            tree, claim, root, solvers = fixtures[q % len(fixtures)]
            v = root.vertices[int(rng.integers(len(root.vertices)))]
            xi = tuple(float(x) - float(rng.uniform(-0.2, 0.6)) for x in v)
            answers = [s.member(EpsQuery(xi, e, float(claim.lipschitz))) for s, e in zip(solvers, EPS_GRID)]
            for i, a in enumerate(answers):
                accepted[i] += a
            inversions += sum(1 for a, b in zip(answers, answers[1:]) if a and not b)
        ok = incl_fail == 0 and conc_fail == 0 and inversions == 0
        return ok, {
            "inclusion_fixtures": n_fix,
            "inclusion_failures": incl_fail,
            "concentration_cases": n_conc,
            "concentration_failures": conc_fail,
            "eps_queries": n_queries,
            "accepted_per_eps": accepted,
            "inversions": inversions,
        }

    return _timed(8, "epsilon machinery", run)


_UNIFORM_TREES: dict = {}


def _uniform_tree(m: int, P: int):
    """Tree with ``2^m`` equally likely children per node (prices are
    irrelevant for probability checks)."""
    key = (m, P)
    if key not in _UNIFORM_TREES:
        d = m + 1
        sigma = np.zeros((d, m))
        sigma[1:] = np.eye(m) * 0.2
        _UNIFORM_TREES[key] = build_tree(MarketModel.constant([1.0] * d, 0.0, [0.0] * m, sigma.tolist(), 1.0), P)
    return _UNIFORM_TREES[key]


# ---------------------------------------------------------------------------
# 9. risk-measure axioms


def check_axioms_suite(quick: bool = False, seed: int = 9) -> CheckResult:
    n = 5 if quick else 20

    def run():
        rng = np.random.default_rng(seed)
        failed = {"translativity": 0, "monotonicity": 0, "homogeneity": 0, "cone_stability": 0, "upper": 0}
        for k in range(n):
            d, P = (2, 3)[k % 2], 1 + k % 2
            spec = build_cone(random_exchange(rng, d))
            tree = build_tree(random_model(rng, d), P)
            claim = random_claim(rng, d)
            shift = [random_rational(rng, -1, 1, 10) for _ in range(d)]
            bump = {leaf.id: tuple(random_rational(rng, 0, 0.5, 10) for _ in range(d)) for leaf in tree.leaves}
            lam = random_rational(rng, 0.1, 3, 10)
            rep = check_axioms(tree, spec, claim, shift, bump, lam)
            for key in failed:
                failed[key] += not getattr(rep, key)
        return all(v == 0 for v in failed.values()), {"fixtures": n, **{f"{k}_failures": v for k, v in failed.items()}}

    return _timed(9, "risk-measure axioms", run)


CRITERIA: list[tuple[int, Callable[..., CheckResult], float]] = [
    (1, check_cone_fixture, 1.0),
    (2, check_decomposition, 10.0),
    (3, check_dual_positivity, 10.0),
    (4, check_strategy_equivalence, 60.0),
    (5, check_supermartingale, 120.0),
    (6, check_dpp, 300.0),
    (7, check_oracle, 300.0),
    (8, check_eps_machinery, 120.0),
    (9, check_axioms_suite, 60.0),
]


def run_all(quick: bool = False, only: set[int] | None = None) -> list[CheckResult]:
    out = []
    for number, fn, _ in CRITERIA:
        if only is None or number in only:
            out.append(fn(quick=quick))
    return out
