"""Consistent price processes and the supermartingale property of ``Z.Vhat``.

On trees ``Z`` is built forward with one exact LP per internal node: the
children's values must lie in their own dual cones (minus zero) and average to
the parent's value. On Monte Carlo paths ``Z`` is a stochastic exponential
whose volatility makes every ratio ``(Z^i/S^i)/(Z^1/S^1)`` constant in time, so
dual-cone membership is inherited from ``Z_0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import Infeasible, InconsistentZ, InvalidModel
from .market import MarketModel, PathSet, PiecewiseConstant, PriceTree, simulate_paths
from .ratgeom.lp import solve_lp
from .rational import rat
from .solvency import SolvencyConeSpec, _check_prices, dual_cone_rows, dual_membership


@dataclass
class ConsistentPriceProcess:
    Z: dict[int, tuple[Fraction, ...]]  # node id -> Z

    def validate(self, tree: PriceTree, spec: SolvencyConeSpec) -> None:
        """Raise ``InconsistentZ`` unless Z is an exact martingale in the dual cones."""
        for node in tree.nodes:
            z = self.Z.get(node.id)
            if z is None:
                raise InconsistentZ(f"no Z at node {node.id}")
            if all(x == 0 for x in z):
                raise InconsistentZ(f"Z vanishes at node {node.id}")
            if not dual_membership(spec, node.qprice, z):
                raise InconsistentZ(f"Z leaves the dual cone at node {node.id}")
            if node.children:
                avg = [sum((self.Z[c][i] * tree.nodes[c].prob for c in node.children), Fraction(0)) for i in range(len(z))]
                if tuple(avg) != tuple(z):
                    raise InconsistentZ(f"martingale property fails at node {node.id}")


def root_Z(spec: SolvencyConeSpec, y: Sequence) -> tuple[Fraction, ...]:
    """Barycenter of the dual generators of the cone at prices ``y``,
    normalized to a unit first coordinate."""
    y = _check_prices(spec, y)
    gens = [tuple(w_i * y_i for w_i, y_i in zip(w, y)) for w in spec.dual_generators]
    gens = [tuple(x / g[0] for x in g) if g[0] > 0 else g for g in gens]
    n = len(gens)
    z = tuple(sum((g[i] for g in gens), Fraction(0)) / n for i in range(spec.d))
    if z[0] <= 0:
        raise Infeasible("dual cone barycenter has no numeraire component")
    return tuple(x / z[0] for x in z)


def _child_lp(spec, parent_z, children, probs, interior: bool):
    """Variables: Z of every child (d each), then one slack ``s``.

    ``interior``: maximize s with every dual row and Z^1 at least s;
    otherwise: maximize s with Z^1 at least s and dual rows at least 0.
    """
    d = spec.d
    C = len(children)
    nv = d * C + 1
    A_ub, b_ub = [], []
    for c, y in enumerate(children):
        for a, _ in dual_cone_rows(spec, y):
            row = [Fraction(0)] * nv
            scale = max(abs(x) for x in a)
            for i in range(d):
                row[c * d + i] = -a[i] / scale
            if interior:
                row[-1] = Fraction(1)
            A_ub.append(row)
        row = [Fraction(0)] * nv
        row[c * d] = Fraction(-1)
        row[-1] = Fraction(1)
        A_ub.append(row)
    A_eq, b_eq = [], []
    for i in range(d):
        row = [Fraction(0)] * nv
        for c in range(C):
            row[c * d + i] = probs[c]
        A_eq.append(row)
        b_eq.append(parent_z[i])
    obj = [Fraction(0)] * nv
    obj[-1] = Fraction(-1)
    return solve_lp(obj, A_ub, [0] * len(A_ub), A_eq, b_eq)


def find_consistent_Z(tree: PriceTree, spec: SolvencyConeSpec) -> ConsistentPriceProcess:
    Z = {0: root_Z(spec, tree.root.qprice)}
    for level in tree.levels[:-1]:
        for nid in level:
            node = tree.nodes[nid]
            ys = [tree.nodes[c].qprice for c in node.children]
            ps = [tree.nodes[c].prob for c in node.children]
            res = _child_lp(spec, Z[nid], ys, ps, interior=True)
            if res.status == "infeasible":
                raise Infeasible(f"no consistent continuation at node {nid}")
            if res.x[-1] <= 0:
                res = _child_lp(spec, Z[nid], ys, ps, interior=False)
                if res.status != "optimal" or res.x[-1] <= 0:
                    raise Infeasible(f"children of node {nid} admit only the zero price")
            d = spec.d
            for c, cid in enumerate(node.children):
                Z[cid] = tuple(res.x[c * d:(c + 1) * d])
    return ConsistentPriceProcess(Z)


# ---------------------------------------------------------------------------
# supermartingale checks


@dataclass
class SupermartingaleReport:
    ok: bool
    checked: int
    violations: int
    worst_node: int | None = None
    worst_margin: object = None  # min over nodes of parent - E[child]
    margins: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "checked": self.checked,
            "violations": self.violations,
            "worst_node": self.worst_node,
            "worst_margin": str(self.worst_margin),
        }


def tree_values(tree: PriceTree, strategy: dict[int, Sequence], v0: Sequence, dt) -> dict[int, tuple]:
    """``Vhat`` at every node for a strategy ``khat`` given per internal node."""
    dt = rat(dt)
    V = {0: tuple(rat(x) for x in v0)}
    for level in tree.levels[:-1]:
        for nid in level:
            k = [rat(x) for x in strategy[nid]]
            nxt = tuple(v - ki * dt for v, ki in zip(V[nid], k))
            for c in tree.nodes[nid].children:
                V[c] = nxt
    return V


def supermartingale_check(
    tree: PriceTree,
    cpp: ConsistentPriceProcess,
    strategy: dict[int, Sequence],
    v0: Sequence,
    spec: SolvencyConeSpec | None = None,
    dt=None,
    slack=0,
) -> SupermartingaleReport:
    """Node-wise ``sum_c p_c Z_c.Vhat_c <= Z.Vhat`` in exact arithmetic."""
    if spec is not None:
        cpp.validate(tree, spec)
    dt = rat(tree.dt) if dt is None else rat(dt)
    V = tree_values(tree, strategy, v0, dt)
    worst, worst_node, bad, checked = None, None, 0, 0
    margins = {}
    for level in tree.levels[:-1]:
        for nid in level:
            node = tree.nodes[nid]
            here = sum((z * v for z, v in zip(cpp.Z[nid], V[nid])), Fraction(0))
            nxt = sum(
                (tree.nodes[c].prob * sum((z * v for z, v in zip(cpp.Z[c], V[c])), Fraction(0)) for c in node.children),
                Fraction(0),
            )
            margin = here - nxt
            margins[nid] = margin
            checked += 1
            if margin < -rat(slack):
                bad += 1
            if worst is None or margin < worst:
                worst, worst_node = margin, nid
    return SupermartingaleReport(bad == 0, checked, bad, worst_node, worst, margins)


# ---------------------------------------------------------------------------
# Monte Carlo mode


def market_price_of_risk(model: MarketModel, t: float, dt: float) -> np.ndarray:
    """``eta^1`` solving ``sigma~ eta^1 = -(b~ - r)`` for the risky rows, with
    step-averaged rates."""
    sig = model.sigma(t)[1:]
    r = float(model.r.integral(t, t + dt)) / dt
    excess = model.b.integral(t, t + dt) / dt - r
    eta, *_ = np.linalg.lstsq(sig, -excess, rcond=None)
    if not np.allclose(sig @ eta, -excess, atol=1e-10, rtol=1e-10):
        raise InvalidModel("volatility matrix cannot absorb the excess drift")
    return eta


def mc_consistent_Z(model: MarketModel, paths: PathSet, z0: Sequence[float]) -> np.ndarray:
    """``Z^i`` as stochastic exponentials of ``eta^i = eta^1 + sigma^i``.

    Each step multiplies by ``exp(eta.dW - |eta|^2 dt / 2)``, which has mean
    one for Gaussian ``dW`` -- the discrete process is an exact martingale.
    """
    n_paths, n_pts, d = paths.S.shape
    Z = np.empty_like(paths.S)
    Z[:, 0, :] = np.asarray(z0, dtype=float)
    for n in range(n_pts - 1):
        t = paths.times[n]
        dt = paths.times[n + 1] - t
        eta1 = market_price_of_risk(model, t, dt)
        eta = eta1[None, :] + model.sigma(t)  # (d, m); row 1 is eta^1
        expo = paths.dW[:, n, :] @ eta.T - 0.5 * np.sum(eta**2, axis=1) * dt
        Z[:, n + 1, :] = Z[:, n, :] * np.exp(expo)
    return Z


@dataclass
class MCReport:
    ok: bool
    mean: float
    se: float
    bound: float
    dual_violations: int

    def to_dict(self) -> dict:
        return dict(ok=self.ok, mean=self.mean, se=self.se, bound=self.bound, dual_violations=self.dual_violations)


def mc_supermartingale_check(Z: np.ndarray, Vhat: np.ndarray, spec: SolvencyConeSpec, S: np.ndarray, check_every: int = 1) -> MCReport:
    """``E[Z_T.Vhat_T] <= Z_0.Vhat_0 + 3 SE`` and pointwise dual membership of
    ``Z`` (checked on the ratio inequalities in floats)."""
    final = np.einsum("pd,pd->p", Z[:, -1, :], Vhat[:, -1, :])
    start = float(Z[0, 0] @ Vhat[0, 0])
    mean = float(final.mean())
    se = float(final.std(ddof=1) / math.sqrt(len(final)))
    viol = int(np.sum(~_dual_ok_float(spec, Z[:, ::check_every, :], S[:, ::check_every, :])))
    return MCReport(mean <= start + 3 * se and viol == 0, mean, se, start, viol)


def _dual_ok_float(spec: SolvencyConeSpec, Z: np.ndarray, S: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    mu = np.asarray([[float(x) for x in row] for row in spec.exchange.mu])
    u = Z / S
    u1 = u[..., 0]
    ok = np.ones(u1.shape, dtype=bool)
    d = spec.d
    for i in range(1, d):
        ok &= u[..., i] >= (1 - mu[i, 0]) * u1 * (1 - tol)
        ok &= u[..., i] <= (1 + mu[0, i]) * u1 * (1 + tol)
        for j in range(1, d):
            if i != j:
                ok &= u[..., j] - u[..., i] <= mu[i, j] * u1 + tol * u1
    return ok


@dataclass
class ReweightReport:
    ok: bool
    reweighted: float
    direct: float
    se: float


def girsanov_reweight_check(model: MarketModel, payoff, n_paths: int, n_steps: int, seed: int) -> ReweightReport:
    """Compare ``E[Z^1_T g(S_T)]`` under P with a direct simulation under the
    numeraire measure (all assets drifting at ``r``), within 3 combined SE."""
    paths = simulate_paths(model, n_paths, n_steps, seed)
    z0 = np.ones(model.d)
    Z = mc_consistent_Z(model, paths, z0)
    a = Z[:, -1, 0] * payoff(paths.S[:, -1, :])
    rn = MarketModel(model.s0, model.r, _drift_at_r(model), model.sigma, model.T)
    direct_paths = simulate_paths(rn, n_paths, n_steps, seed + 1)
    b = payoff(direct_paths.S[:, -1, :])
    se = math.sqrt(a.var(ddof=1) / n_paths + b.var(ddof=1) / n_paths)
    diff = abs(float(a.mean()) - float(b.mean()))
    return ReweightReport(diff <= 3 * se, float(a.mean()), float(b.mean()), se)


def _drift_at_r(model: MarketModel) -> PiecewiseConstant:
    """Risky drifts equal to the short rate, segment by segment."""
    return PiecewiseConstant(model.r.untils, tuple((v,) * model.m for v in model.r.values))
