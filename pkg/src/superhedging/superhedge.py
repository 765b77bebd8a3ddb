"""Superhedging sets on finite trees.

``backward_sets`` computes, for every node, the polyhedron of positions (in
physical units) from which the claim can be superhedged with trades in the
prevailing solvency cones:

    leaf:      SHP = Xhat + Khat_leaf
    internal:  SHP = Khat_node (+) intersection of the children's SHP

Everything is exact over the rationals, on the tree's rationalized prices.
Independent checks live here too: a brute-force LP oracle over all node
strategies, the dynamic-programming check against the level-``u`` sets, the
epsilon-relaxed membership solver and the concentration inequality.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp

from .errors import (
    BadEvent,
    BudgetExceeded,
    EmptySet,
    LevelOutOfRange,
    UnsupportedDimension,
)
from .market import Claim, PathSet, PriceTree, claim_payoff
from .ratgeom.lp import CertifiedSystem, solve_lp
from .ratgeom.polyhedron import (
    HRep,
    Polyhedron,
    dd_convert,
    intersect_all,
    is_subset,
    minkowski_sum,
    set_equal,
)
from .rational import rat, vec
from .solvency import EpsCone, SolvencyConeSpec, eps_membership, eps_pieces, physical_cone

MAX_NODES = 1000
MAX_DIM = 3
MAX_EPS_LEAVES = 12


def _check_budget(tree: PriceTree, spec: SolvencyConeSpec) -> None:
    if spec.d > MAX_DIM:
        raise UnsupportedDimension(f"d = {spec.d} > {MAX_DIM}")
    if len(tree.nodes) > MAX_NODES:
        raise BudgetExceeded(f"{len(tree.nodes)} nodes > {MAX_NODES}")


def leaf_payoffs(tree: PriceTree, claim) -> dict[int, tuple[Fraction, ...]]:
    """``Xhat`` per leaf. ``claim`` is a ``Claim``, a mapping leaf id ->
    vector, or a callable on the exact leaf prices."""
    out = {}
    for leaf in tree.leaves:
        if isinstance(claim, Claim):
            x = claim_payoff(claim, leaf.qprice)
        elif isinstance(claim, Mapping):
            x = claim[leaf.id]
        else:
            x = claim(leaf.qprice)
        out[leaf.id] = vec(x)
    return out


@dataclass
class SuperhedgeResult:
    tree: PriceTree
    spec: SolvencyConeSpec
    payoffs: dict[int, tuple[Fraction, ...]]
    sets: dict[int, Polyhedron]
    cones: dict[int, Polyhedron]
    claim: object = None
    trace: list[dict] = field(default_factory=list)

    @property
    def root(self) -> Polyhedron:
        return self.sets[0]

    def to_dict(self) -> dict:
        return {
            "claim": self.claim.to_config() if isinstance(self.claim, Claim) else None,
            "nodes": {str(k): self.sets[k].to_dict() for k in sorted(self.sets)},
        }

    def write_root_vertices_csv(self, fileobj) -> None:
        w = csv.writer(fileobj, lineterminator="\n")
        d = self.root.dim
        w.writerow(["kind", *[f"x{i + 1}" for i in range(d)]])
        for v in self.root.vertices:
            w.writerow(["vertex", *(repr(float(x)) for x in v)])
        for r in self.root.rays:
            w.writerow(["ray", *(repr(float(x)) for x in r)])


def node_cones(tree: PriceTree, spec: SolvencyConeSpec) -> dict[int, Polyhedron]:
    return {n.id: physical_cone(spec, n.qprice) for n in tree.nodes}


def recurse(
    tree: PriceTree,
    cones: Mapping[int, Polyhedron],
    terminal: Mapping[int, Polyhedron],
    level: int,
    trace: list | None = None,
) -> dict[int, Polyhedron]:
    """Run the backward step from ``level`` up to the root.

    ``terminal`` holds the sets at ``level``; returns the sets at every node of
    levels ``0..level``.
    """
    sets = {nid: terminal[nid] for nid in tree.levels[level]}
    for lvl in range(level - 1, -1, -1):
        for nid in tree.levels[lvl]:
            kids = [sets[c] for c in tree.nodes[nid].children]
            inter = intersect_all(kids)
            if inter.is_empty:
                raise EmptySet(f"children of node {nid} have no common superhedging position")
            s = minkowski_sum(cones[nid], inter)
            sets[nid] = s
            if trace is not None:
                trace.append({"node": nid, "vertices": len(s.vertices), "rays": len(s.rays), "rows": len(s.inequalities)})
    return sets


def backward_sets(tree: PriceTree, spec: SolvencyConeSpec, claim) -> SuperhedgeResult:
    _check_budget(tree, spec)
    payoffs = leaf_payoffs(tree, claim)
    cones = node_cones(tree, spec)
    terminal = {lid: cones[lid].translate(x) for lid, x in payoffs.items()}
    trace: list = []
    sets = recurse(tree, cones, terminal, tree.periods, trace)
    return SuperhedgeResult(tree, spec, payoffs, sets, cones, claim, trace)


# ---------------------------------------------------------------------------
# strategy LPs


def _columns(cones: Mapping[int, Polyhedron], node_ids: Sequence[int]) -> tuple[list[tuple[int, tuple]], dict[int, list[int]]]:
    """One LP column per (node, generator); also node -> its column indices."""
    cols, where = [], {}
    for nid in node_ids:
        where[nid] = []
        for g in cones[nid].rays:
            where[nid].append(len(cols))
            cols.append((nid, g))
    return cols, where


class SuperhedgeOracle:
    """Brute-force membership: one LP over the trades at every node.

    Variables are nonnegative weights on the generators of each node's cone;
    for every leaf and coordinate, ``xi - sum of trades on the path >= Xhat``.
    The constraint matrix does not depend on ``xi`` and is prepared once;
    every answer carries an exact certificate (a strategy or a Farkas vector).
    """

    def __init__(self, tree: PriceTree, spec: SolvencyConeSpec, claim):
        _check_budget(tree, spec)
        self.tree = tree
        self.d = spec.d
        self.payoffs = leaf_payoffs(tree, claim)
        cones = node_cones(tree, spec)
        cols, where = _columns(cones, [n.id for n in tree.nodes])
        self.leaves = [leaf.id for leaf in tree.leaves]
        M = []
        for lid in self.leaves:
            path = tree.path(lid)
            for i in range(self.d):
                row = [Fraction(0)] * len(cols)
                for nid in path:
                    for c in where[nid]:
                        row[c] = cols[c][1][i]
                M.append(row)
        self.system = CertifiedSystem(M, n=len(cols))

    def certificate(self, xi: Sequence):
        xi = vec(xi)
        h = [xi[i] - self.payoffs[lid][i] for lid in self.leaves for i in range(self.d)]
        return self.system.check(h)

    def member(self, xi: Sequence) -> bool:
        return self.certificate(xi).feasible


def oracle_membership(tree: PriceTree, spec: SolvencyConeSpec, claim, xi: Sequence) -> bool:
    return SuperhedgeOracle(tree, spec, claim).member(xi)


# ---------------------------------------------------------------------------
# dynamic programming principle


class _TwoStage:
    """``{xi : exists trades at levels < u with xi - trades in SHP_v for every
    level-u node v}`` -- the right-hand side of the DPP, as an LP."""

    def __init__(self, result: SuperhedgeResult, u: int, level_sets: Mapping[int, Polyhedron]):
        tree = result.tree
        self.d = d = result.spec.d
        early = [nid for lvl in range(u) for nid in tree.levels[lvl]]
        cols, where = _columns(result.cones, early)
        self.ncols = len(cols)
        self.rows = []  # (a, b, trade coefficients)
        for nid in tree.levels[u]:
            anc = tree.path(nid)[:-1]
            for a, b in level_sets[nid].inequalities:
                coef = [Fraction(0)] * len(cols)
                for m in anc:
                    for c in where[m]:
                        coef[c] = sum((ai * gi for ai, gi in zip(a, cols[c][1])), Fraction(0))
                self.rows.append((a, b, coef))
        # a.(xi - G lam) >= b   <=>   (a.G) lam <= a.xi - b
        self.system = CertifiedSystem([coef for _, _, coef in self.rows], n=self.ncols)
        # support certificates: y >= 0 with sum y_r a_r = w, sum y_r coef_r >= 0
        # and sum y_r b_r >= c prove min over the set of w.xi >= c
        dual_ub = [[-coef[k] for _, _, coef in self.rows] for k in range(self.ncols)]
        dual_ub.append([-b for _, b, _ in self.rows])
        dual_eq = [[a[i] for a, _, _ in self.rows] for i in range(d)]
        self.dual = CertifiedSystem(dual_ub, dual_eq, n=len(self.rows))

    def contains(self, xi, homogeneous: bool = False) -> bool:
        h = [sum((ai * x for ai, x in zip(a, xi)), Fraction(0)) - (0 if homogeneous else b) for a, b, _ in self.rows]
        return self.system.check(h).feasible

    def supports(self, w, c) -> bool:
        """Whether ``w.xi >= c`` holds on the whole set (assumed nonempty)."""
        return self.dual.check([0] * self.ncols + [-rat(c)], list(w)).feasible


def dpp_check(result: SuperhedgeResult, u: int, level_sets: Mapping[int, Polyhedron] | None = None, method: str = "both") -> bool:
    """Compare the root set with the composition through level ``u``.

    ``level_sets`` defaults to the result's own sets at level ``u`` (pass
    modified sets to test the test). Methods:

    * ``"recursion"``: rerun the backward step from level ``u`` with those sets
      as terminal data and compare the new root exactly;
    * ``"lp"``: without any set algebra, check by exact LPs that every vertex
      and ray of the root lies in the two-stage set and that every facet of
      the root supports it;
    * ``"both"``: both must hold.
    """
    tree = result.tree
    if not (0 < u < tree.periods):
        raise LevelOutOfRange(f"u = {u} not in (0, {tree.periods})")
    if level_sets is None:
        level_sets = {nid: result.sets[nid] for nid in tree.levels[u]}
    ok = True
    if method in ("recursion", "both"):
        fresh_cones = node_cones(tree, result.spec)
        sets = recurse(tree, fresh_cones, level_sets, u)
        ok = set_equal(sets[0], result.root)
    if ok and method in ("lp", "both"):
        ok = _dpp_lp(result, u, level_sets)
    return ok


def _dpp_lp(result: SuperhedgeResult, u: int, level_sets) -> bool:
    two = _TwoStage(result, u, level_sets)
    root = result.root
    for v in root.vertices:
        if not two.contains(v):
            return False
    for r in root.rays:
        if not two.contains(r, homogeneous=True):
            return False
    for a, b in root.inequalities:
        if not two.supports(a, b):
            return False
    return True


def mutate_level_set(result: SuperhedgeResult, u: int, node_id: int, ray: Sequence) -> dict[int, Polyhedron]:
    """Level-``u`` sets with ``Polyhedron.cone(ray)`` added to one of them."""
    sets = {nid: result.sets[nid] for nid in result.tree.levels[u]}
    sets[node_id] = minkowski_sum(sets[node_id], Polyhedron.cone(result.spec.d, [ray]))
    return sets


# ---------------------------------------------------------------------------
# epsilon-relaxed superhedging


@dataclass(frozen=True)
class EpsQuery:
    xi: tuple[float, ...]
    eps: float
    L: float = 1.0
    node: int = 0

    def __post_init__(self):
        if not (0 < self.eps <= 1):
            raise ValueError("eps must lie in (0, 1]")
        if self.L < 1:
            raise ValueError("L must be at least 1")


def minimal_subsets(probs: Sequence[Fraction], threshold: Fraction) -> list[tuple[int, ...]]:
    """Index sets with total probability >= threshold, none of whose proper
    subsets qualifies. Smaller sets come first."""
    n = len(probs)
    out = []
    for size in range(0, n + 1):
        for idx in combinations(range(n), size):
            if sum((probs[i] for i in idx), Fraction(0)) < threshold:
                continue
            if any(sum((probs[j] for j in idx if j != i), Fraction(0)) >= threshold for i in idx):
                continue
            out.append(idx)
    return out


class EpsSolver:
    """Decides membership in the epsilon-superhedging set at a tree node.

    For a leaf subset ``G`` the question is whether trades ``k_v`` in the
    (non-convex) epsilon cones satisfy ``xi - sum k + L eps 1 >= Xhat`` on
    every leaf of ``G``. Each epsilon cone is a union of ``2d`` polyhedral
    pieces; the search relaxes every node to the sum of its pieces (the
    convex hull), accepts when the LP solution already lies in the epsilon
    cones, and otherwise branches on the piece used at a violating node.
    Before the first branch, a float mixed-integer model proposes one piece
    per node; the proposal counts only if the exact LP with those pieces
    fixed is feasible.
    """

    def __init__(self, tree: PriceTree, spec: SolvencyConeSpec, claim, eps):
        _check_budget(tree, spec)
        self.tree = tree
        self.spec = spec
        self.d = spec.d
        self.eps = Fraction(eps)
        self.payoffs = leaf_payoffs(tree, claim)
        self.lp_calls = 0
        self.propose_seconds = 2.0
        w = [[Fraction(x) for x in n] for n in spec.unit_normals]
        self.pieces = {}
        self.normals = {}
        for node in tree.nodes:
            y = node.qprice
            a = [tuple(wi * yi for wi, yi in zip(row, y)) for row in w]
            self.normals[node.id] = a
            gens = []
            for rows in eps_pieces(a, self.eps):
                v = dd_convert(HRep(self.d, tuple((r, Fraction(0)) for r in rows)).canonical())
                gens.append(v.rays)
            self.pieces[node.id] = gens

    def in_eps_cone(self, node_id: int, k: Sequence[Fraction]) -> bool:
        norm = max(abs(x) for x in k)
        return all(sum((ai * ki for ai, ki in zip(a, k)), Fraction(0)) >= -self.eps * norm for a in self.normals[node_id])

    def _solve(self, nodes, leaves, rhs, choice):
        cols = []
        for nid in nodes:
            ps = range(len(self.pieces[nid])) if nid not in choice else [choice[nid]]
            for p in ps:
                for g in self.pieces[nid][p]:
                    cols.append((nid, g))
        A, b = [], []
        for lid in leaves:
            on_path = set(self.tree.path(lid))
            for i in range(self.d):
                A.append([g[i] if nid in on_path else Fraction(0) for nid, g in cols])
                b.append(rhs[lid][i])
        self.lp_calls += 1
        res = solve_lp([0] * len(cols), A, b)
        if res.status == "infeasible":
            return None
        k = {nid: [Fraction(0)] * self.d for nid in nodes}
        for (nid, g), lam in zip(cols, res.x):
            if lam:
                for i in range(self.d):
                    k[nid][i] += lam * g[i]
        return k

    def _violation(self, node_id: int, k) -> Fraction:
        norm = max(abs(x) for x in k)
        return max(-self.eps * norm - sum((ai * ki for ai, ki in zip(a, k)), Fraction(0)) for a in self.normals[node_id])

    def _piece_order(self, node_id: int, k) -> list[int]:
        """Pieces sorted by how badly the relaxed trade ``k`` violates them."""

        def miss(p):
            i, sign = divmod(p, 2)
            shift = self.eps if sign == 0 else -self.eps
            return max(-(sum((ai * ki for ai, ki in zip(a, k)), Fraction(0)) + shift * k[i]) for a in self.normals[node_id])

        return sorted(range(len(self.pieces[node_id])), key=miss)

    def _propose(self, nodes, leaves, rhs) -> dict | None:
        """Float mixed-integer model picking one piece per node (big-M on the
        piece weights). Only a proposal: the caller re-solves exactly with the
        pieces fixed."""
        cols = [(nid, p, g) for nid in nodes for p, gens in enumerate(self.pieces[nid]) for g in gens]
        picks = [(nid, p) for nid in nodes for p in range(len(self.pieces[nid]))]
        pidx = {key: len(cols) + j for j, key in enumerate(picks)}
        nv = len(cols) + len(picks)
        scale = 1.0 + max(float(abs(x)) for lid in leaves for x in rhs[lid])
        big = 1e4 * scale
        rows, lo, hi = [], [], []
        for lid in leaves:
            on_path = set(self.tree.path(lid))
            for i in range(self.d):
                row = np.zeros(nv)
                for j, (nid, _, g) in enumerate(cols):
                    if nid in on_path:
                        row[j] = float(g[i]) / max(float(abs(x)) for x in g)
                rows.append(row)
                lo.append(-np.inf)
                hi.append(float(rhs[lid][i]))
        for j, (nid, p, _) in enumerate(cols):
            row = np.zeros(nv)
            row[j], row[pidx[nid, p]] = 1.0, -big
            rows.append(row)
            lo.append(-np.inf)
            hi.append(0.0)
        for nid in nodes:
            row = np.zeros(nv)
            for p in range(len(self.pieces[nid])):
                row[pidx[nid, p]] = 1.0
            rows.append(row)
            lo.append(1.0)
            hi.append(1.0)
        integrality = np.r_[np.zeros(len(cols)), np.ones(len(picks))]
        bounds = Bounds(np.zeros(nv), np.r_[np.full(len(cols), np.inf), np.ones(len(picks))])
        cost = np.zeros(nv)
        res = milp(cost, constraints=LinearConstraint(np.array(rows), lo, hi), integrality=integrality, bounds=bounds, options={"time_limit": self.propose_seconds})
        if res.x is None:
            return None
        return {nid: max(range(len(self.pieces[nid])), key=lambda p: res.x[pidx[nid, p]]) for nid in nodes}

    def _branch(self, nodes, leaves, rhs, choice) -> bool:
        k = self._solve(nodes, leaves, rhs, choice)
        if k is None:
            return False
        bad = [(self._violation(nid, k[nid]), nid) for nid in nodes]
        bad = [(v, nid) for v, nid in bad if v > 0 and nid not in choice]
        if not bad:
            return True
        if not choice:
            proposal = self._propose(nodes, leaves, rhs)
            if proposal is not None and self._solve(nodes, leaves, rhs, proposal) is not None:
                return True
        _, nid = max(bad)
        for p in self._piece_order(nid, k[nid]):
            if self._branch(nodes, leaves, rhs, {**choice, nid: p}):
                return True
        return False

    def member(self, query: EpsQuery) -> bool:
        tree = self.tree
        if Fraction(query.eps) != self.eps:
            raise ValueError("query eps differs from the solver's eps")
        start = query.node
        leaves = tree.descendants_at(start, tree.periods)
        if len(leaves) > MAX_EPS_LEAVES:
            raise BudgetExceeded(f"{len(leaves)} leaves > {MAX_EPS_LEAVES} for subset enumeration")
        base = tree.abs_prob(start)
        probs = [tree.abs_prob(lid) / base for lid in leaves]
        xi = vec(query.xi)
        cushion = Fraction(query.L) * self.eps
        rhs = {lid: [xi[i] + cushion - self.payoffs[lid][i] for i in range(self.d)] for lid in leaves}
        for idx in minimal_subsets(probs, 1 - self.eps):
            G = [leaves[i] for i in idx]
            nodes = sorted({nid for lid in G for nid in tree.path(lid)[tree.nodes[start].level:]})
            if not G:
                return True
            if self._branch(nodes, G, rhs, {}):
                return True
        return False


def eps_value_membership(tree_or_paths, spec: SolvencyConeSpec, claim, query: EpsQuery) -> bool:
    """Tree mode: exact search (see ``EpsSolver``). Path mode: see
    ``mc_eps_success``; accepted when the success frequency is at least
    ``1 - eps``."""
    if isinstance(tree_or_paths, PriceTree):
        return EpsSolver(tree_or_paths, spec, claim, query.eps).member(query)
    return mc_eps_success(tree_or_paths, spec, claim, query) >= 1 - query.eps


def mc_eps_success(paths: PathSet, spec: SolvencyConeSpec, claim: Claim, query: EpsQuery) -> float:
    """Fraction of paths on which holding ``xi`` and settling once at ``T``
    works: ``xi + L eps 1 - Xhat(S_T)`` lies in the epsilon cone at ``S_T``."""
    xi = np.asarray(query.xi, dtype=float)
    ST = paths.S[:, -1, :]
    hits = 0
    for s in ST:
        x = xi + query.L * query.eps - np.asarray(claim_payoff(claim, tuple(float(v) for v in s)), dtype=float)
        if eps_membership(EpsCone.of(spec, s, query.eps), x):
            hits += 1
    return hits / len(ST)


# ---------------------------------------------------------------------------
# concentration


def concentration_check(tree: PriceTree, event: Sequence[int], eps, u: int) -> bool:
    """For a leaf event ``A`` with ``P(A) <= eps`` and the nodes of level
    ``u`` as conditioning atoms: ``P(P(A | level u) >= sqrt(eps)) <= sqrt(eps)``.

    Square roots are avoided by comparing squares, so the check is exact.
    """
    eps = rat(eps)
    if not (0 <= u <= tree.periods):
        raise LevelOutOfRange(f"u = {u} not in [0, {tree.periods}]")
    leaf_ids = set(tree.levels[-1])
    A = set(event)
    if not A <= leaf_ids:
        raise BadEvent("event must be a set of leaves")
    pA = sum((tree.abs_prob(lid) for lid in A), Fraction(0))
    if pA > eps:
        raise BadEvent(f"P(A) = {pA} exceeds eps = {eps}")
    heavy = Fraction(0)
    for nid in tree.levels[u]:
        pn = tree.abs_prob(nid)
        inside = sum((tree.abs_prob(lid) for lid in tree.descendants_at(nid, tree.periods) if lid in A), Fraction(0))
        cond = inside / pn
        if cond * cond >= eps:
            heavy += pn
    return heavy * heavy <= eps


def conditional_probabilities(tree: PriceTree, event: Sequence[int], u: int) -> dict[int, Fraction]:
    A = set(event)
    out = {}
    for nid in tree.levels[u]:
        pn = tree.abs_prob(nid)
        inside = sum((tree.abs_prob(lid) for lid in tree.descendants_at(nid, tree.periods) if lid in A), Fraction(0))
        out[nid] = inside / pn
    return out


# ---------------------------------------------------------------------------
# risk-measure axioms at the root


@dataclass
class AxiomReport:
    translativity: bool
    monotonicity: bool
    homogeneity: bool
    cone_stability: bool
    upper: bool

    @property
    def ok(self) -> bool:
        return all((self.translativity, self.monotonicity, self.homogeneity, self.cone_stability, self.upper))


def check_axioms(tree: PriceTree, spec: SolvencyConeSpec, claim, shift: Sequence, bump, lam) -> AxiomReport:
    """Root-level checks for a claim ``X``:

    * ``SHP(X + c) = SHP(X) + c`` for the constant ``c = shift``;
    * ``SHP(Y) subset SHP(X)`` for ``Y = X + b`` with ``b >= 0``; ``bump`` is
      one vector for all leaves or a mapping leaf id -> vector;
    * ``SHP(lam X) = lam SHP(X)``;
    * ``SHP(X) + Khat_root = SHP(X)`` and ``SHP(X) + orthant = SHP(X)``.
    """
    base = backward_sets(tree, spec, claim)
    X = base.payoffs
    shift, lam = vec(shift), rat(lam)
    bumps = {lid: vec(bump[lid] if isinstance(bump, Mapping) else bump) for lid in X}
    if any(b < 0 for v in bumps.values() for b in v):
        raise ValueError("bump must be nonnegative")

    def rerun(f):
        return backward_sets(tree, spec, {lid: f(x) for lid, x in X.items()}).root

    root = base.root
    t = set_equal(rerun(lambda x: tuple(a + c for a, c in zip(x, shift))), root.translate(shift))
    bigger = backward_sets(tree, spec, {lid: tuple(a + c for a, c in zip(x, bumps[lid])) for lid, x in X.items()}).root
    mono = is_subset(bigger, root)
    hom = set_equal(rerun(lambda x: tuple(lam * a for a in x)), root.scale(lam))
    cs = set_equal(minkowski_sum(root, base.cones[0]), root)
    up = set_equal(minkowski_sum(root, Polyhedron.orthant(spec.d)), root)
    return AxiomReport(t, mono, hom, cs, up)
