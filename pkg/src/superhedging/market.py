"""Black-Scholes market with deterministic, piecewise-constant coefficients.

Asset 1 is the bank account (``S^1_0 = 1``, no volatility); assets ``2..d`` are
driven by ``m = d - 1`` independent Brownian motions. Two carriers are provided:
Monte Carlo paths from a counter-based generator, and non-recombining
multinomial trees whose node prices are also available as exact rationals.
"""

from __future__ import annotations

import csv
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Sequence

import numpy as np

from .errors import BudgetExceeded, InvalidClaim, InvalidModel, NonpositivePrice
from .rational import rat

NODE_BUDGET = 10**6
PRICE_DENOMINATOR = 2**32


@dataclass(frozen=True)
class PiecewiseConstant:
    """``f(t) = values[k]`` for ``t`` in ``[untils[k-1], untils[k])``.

    The last segment extends to infinity whatever its ``until`` says.
    """

    untils: tuple[float, ...]
    values: tuple  # scalars, vectors or matrices (stored as nested tuples)

    def __post_init__(self):
        if len(self.untils) != len(self.values) or not self.values:
            raise InvalidModel("piecewise function needs one 'until' per value")
        if any(b <= a for a, b in zip(self.untils, self.untils[1:])):
            raise InvalidModel("segment ends must be increasing")
        for v in self.values:
            if not np.all(np.isfinite(np.asarray(v, dtype=float))):
                raise InvalidModel("coefficients must be finite")

    @classmethod
    def constant(cls, value) -> "PiecewiseConstant":
        return cls((math.inf,), (_freeze(value),))

    @classmethod
    def from_config(cls, spec) -> "PiecewiseConstant":
        """A bare value, or a list of ``{"until": t, "value": v}`` segments."""
        if isinstance(spec, list) and spec and isinstance(spec[0], dict):
            untils, values = [], []
            for seg in spec:
                if set(seg) != {"until", "value"}:
                    raise InvalidModel(f"segment keys must be 'until' and 'value', got {sorted(seg)}")
                untils.append(float(seg["until"]))
                values.append(_freeze(seg["value"]))
            return cls(tuple(untils), tuple(values))
        return cls.constant(spec)

    def _index(self, t: float) -> int:
        return min(bisect_right(self.untils, t), len(self.values) - 1)

    def __call__(self, t: float) -> np.ndarray:
        return np.asarray(self.values[self._index(t)], dtype=float)

    def integral(self, a: float, b: float) -> np.ndarray:
        """Exact integral over ``[a, b]``."""
        total = np.zeros_like(self(a))
        t = a
        while t < b:
            k = self._index(t)
            end = b if k == len(self.values) - 1 else min(b, self.untils[k])
            total = total + (end - t) * np.asarray(self.values[k], dtype=float)
            t = end
        return total

    def to_config(self):
        if len(self.values) == 1:
            return _thaw(self.values[0])
        return [{"until": u, "value": _thaw(v)} for u, v in zip(self.untils, self.values)]


def _freeze(v):
    if isinstance(v, (list, tuple, np.ndarray)):
        return tuple(_freeze(x) for x in v)
    return float(v)


def _thaw(v):
    if isinstance(v, tuple):
        return [_thaw(x) for x in v]
    return v


@dataclass(frozen=True)
class MarketModel:
    s0: tuple[float, ...]
    r: PiecewiseConstant  # scalar
    b: PiecewiseConstant  # vector of length d-1 (drifts of assets 2..d)
    sigma: PiecewiseConstant  # d x m matrix, first row zero
    T: float

    def __post_init__(self):
        d = len(self.s0)
        if d < 2:
            raise InvalidModel("need at least two assets")
        if self.s0[0] != 1:
            raise InvalidModel("the numeraire must start at 1")
        if any(not (s > 0 and math.isfinite(s)) for s in self.s0):
            raise InvalidModel("initial prices must be positive and finite")
        if not (self.T > 0 and math.isfinite(self.T)):
            raise InvalidModel("horizon must be positive")
        for v in self.r.values:
            if np.ndim(v) != 0:
                raise InvalidModel("r must be scalar-valued")
        for v in self.b.values:
            if np.shape(v) != (d - 1,):
                raise InvalidModel(f"b must have length {d - 1}")
        for v in self.sigma.values:
            a = np.asarray(v, dtype=float)
            if a.shape != (d, d - 1):
                raise InvalidModel(f"sigma must be {d}x{d - 1}")
            if np.any(a[0] != 0):
                raise InvalidModel("the numeraire row of sigma must be zero")

    @classmethod
    def constant(cls, s0, r, b, sigma, T) -> "MarketModel":
        return cls(
            tuple(float(x) for x in s0),
            PiecewiseConstant.constant(r),
            PiecewiseConstant.constant(b),
            PiecewiseConstant.constant(sigma),
            float(T),
        )

    @property
    def d(self) -> int:
        return len(self.s0)

    @property
    def m(self) -> int:
        return self.d - 1

    def step_coefficients(self, t: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
        """Log-drift over ``[t, t+dt]`` for every asset, and the volatility matrix.

        Rates are integrated exactly; the volatility is frozen at ``t`` and the
        Ito correction uses the same frozen value, so ``S^i exp(-int b^i)`` is a
        martingale of the discrete scheme.
        """
        sig = self.sigma(t)
        drift = np.empty(self.d)
        drift[0] = float(self.r.integral(t, t + dt))
        drift[1:] = self.b.integral(t, t + dt) - 0.5 * np.sum(sig[1:] ** 2, axis=1) * dt
        return drift, sig


# ---------------------------------------------------------------------------
# Monte Carlo


def path_generator(seed: int, path_index: int) -> np.random.Generator:
    """Independent stream for one path: Philox keyed by the seed, the path
    index placed in the top counter word."""
    return np.random.Generator(np.random.Philox(key=int(seed), counter=[0, 0, 0, int(path_index)]))


@dataclass
class PathSet:
    times: np.ndarray  # (n_steps+1,)
    S: np.ndarray  # (n_paths, n_steps+1, d)
    dW: np.ndarray  # (n_paths, n_steps, m)

    @property
    def n_paths(self) -> int:
        return self.S.shape[0]

    @property
    def n_steps(self) -> int:
        return self.S.shape[1] - 1


def simulate_paths(model: MarketModel, n_paths: int, n_steps: int, rng_seed: int) -> PathSet:
    if n_paths < 1 or n_steps < 1:
        raise InvalidModel("n_paths and n_steps must be at least 1")
    dt = model.T / n_steps
    m = model.m
    dW = np.empty((n_paths, n_steps, m))
    for p in range(n_paths):
        dW[p] = path_generator(rng_seed, p).standard_normal((n_steps, m))
    dW *= math.sqrt(dt)
    times = np.linspace(0.0, model.T, n_steps + 1)
    logS = np.empty((n_paths, n_steps + 1, model.d))
    logS[:, 0, :] = np.log(model.s0)
    for n in range(n_steps):
        drift, sig = model.step_coefficients(times[n], dt)
        logS[:, n + 1, :] = logS[:, n, :] + drift + dW[:, n, :] @ sig.T
    return PathSet(times, np.exp(logS), dW)


def write_paths_csv(paths: PathSet, fileobj, path_index: int | None = None) -> None:
    """One row per grid point: time and prices (prefixed by the path index
    when all paths are written)."""
    d = paths.S.shape[2]
    w = csv.writer(fileobj, lineterminator="\n")
    price_cols = [f"S{i + 1}" for i in range(d)]
    if path_index is not None:
        w.writerow(["time", *price_cols])
        for t, row in zip(paths.times, paths.S[path_index]):
            w.writerow([repr(float(t)), *(repr(float(x)) for x in row)])
        return
    w.writerow(["path", "time", *price_cols])
    for p in range(paths.n_paths):
        for t, row in zip(paths.times, paths.S[p]):
            w.writerow([p, repr(float(t)), *(repr(float(x)) for x in row)])


# ---------------------------------------------------------------------------
# trees


def rationalize(x: float) -> Fraction:
    """Nearest multiple of ``2**-32``."""
    return Fraction(round(x * PRICE_DENOMINATOR), PRICE_DENOMINATOR)


@dataclass
class Node:
    id: int
    level: int
    parent: int | None
    prob: Fraction  # conditional on the parent
    price: tuple[float, ...]
    qprice: tuple[Fraction, ...]  # price on the 2^-32 grid
    dW: tuple[float, ...] = ()
    children: list[int] = field(default_factory=list)


@dataclass
class PriceTree:
    model: MarketModel
    periods: int
    times: tuple[float, ...]
    nodes: list[Node]
    levels: list[list[int]]

    @property
    def d(self) -> int:
        return self.model.d

    @property
    def root(self) -> Node:
        return self.nodes[0]

    @property
    def leaves(self) -> list[Node]:
        return [self.nodes[i] for i in self.levels[-1]]

    @property
    def dt(self) -> float:
        return self.model.T / self.periods

    def abs_prob(self, node_id: int) -> Fraction:
        p = Fraction(1)
        node = self.nodes[node_id]
        while node.parent is not None:
            p *= node.prob
            node = self.nodes[node.parent]
        return p

    def path(self, node_id: int) -> list[int]:
        """Node ids from the root down to ``node_id``."""
        out = []
        node = self.nodes[node_id]
        while True:
            out.append(node.id)
            if node.parent is None:
                break
            node = self.nodes[node.parent]
        return out[::-1]

    def descendants_at(self, node_id: int, level: int) -> list[int]:
        ids = [node_id]
        while ids and self.nodes[ids[0]].level < level:
            ids = [c for i in ids for c in self.nodes[i].children]
        return ids

    def to_dict(self, Z: dict | None = None) -> dict:
        out = {
            "periods": self.periods,
            "times": list(self.times),
            "nodes": [],
        }
        for n in self.nodes:
            row = {
                "id": n.id,
                "level": n.level,
                "parent": n.parent,
                "children": list(n.children),
                "prob": f"{n.prob.numerator}/{n.prob.denominator}",
                "price": [repr(x) for x in n.price],
                "price_exact": [f"{x.numerator}/{x.denominator}" for x in n.qprice],
            }
            if Z is not None and n.id in Z:
                row["Z"] = [f"{Fraction(x).numerator}/{Fraction(x).denominator}" for x in Z[n.id]]
            out["nodes"].append(row)
        return out


def tree_size(m: int, periods: int) -> int:
    branch = 2**m
    return sum(branch**k for k in range(periods + 1))


def build_tree(model: MarketModel, periods: int, budget: int = NODE_BUDGET) -> PriceTree:
    """Non-recombining tree with ``2^m`` equally likely children per node,
    driver increments ``+-sqrt(dt)``."""
    if periods < 1:
        raise InvalidModel("periods must be at least 1")
    m = model.m
    if tree_size(m, periods) > budget:
        raise BudgetExceeded(f"{tree_size(m, periods)} nodes exceeds the budget of {budget}")
    dt = model.T / periods
    sq = math.sqrt(dt)
    times = tuple(k * dt for k in range(periods + 1))
    patterns = [np.asarray(p, dtype=float) * sq for p in product((1.0, -1.0), repeat=m)]
    prob = Fraction(1, 2**m)
    s0 = tuple(model.s0)
    nodes = [Node(0, 0, None, Fraction(1), s0, tuple(rationalize(x) for x in s0))]
    levels = [[0]]
    for lvl in range(periods):
        drift, sig = model.step_coefficients(times[lvl], dt)
        nxt = []
        for pid in levels[-1]:
            parent = nodes[pid]
            logp = np.log(parent.price)
            for dw in patterns:
                price = tuple(float(x) for x in np.exp(logp + drift + sig @ dw))
                q = tuple(rationalize(x) for x in price)
                if any(x <= 0 for x in q):
                    raise NonpositivePrice("a tree price rounds to zero on the 2^-32 grid")
                node = Node(len(nodes), lvl + 1, pid, prob, price, q, tuple(float(x) for x in dw))
                nodes.append(node)
                parent.children.append(node.id)
                nxt.append(node.id)
        levels.append(nxt)
    return PriceTree(model, periods, times, nodes, levels)


# ---------------------------------------------------------------------------
# claims


@dataclass(frozen=True)
class Claim:
    """European claim paying at ``T``, expressed in physical units.

    kinds: ``constant-physical`` (a fixed vector of units), ``vanilla-call``
    on asset ``asset`` (1-based) with ``strike``, and ``linear-basket`` paying
    ``sum w_i S^i`` in the numeraire.
    """

    kind: str
    vector: tuple[Fraction, ...] = ()
    asset: int = 0
    strike: Fraction = Fraction(0)
    weights: tuple[Fraction, ...] = ()

    def __post_init__(self):
        if self.kind == "constant-physical":
            if not self.vector:
                raise InvalidClaim("constant-physical needs a vector")
            object.__setattr__(self, "vector", tuple(rat(x) for x in self.vector))
        elif self.kind == "vanilla-call":
            object.__setattr__(self, "strike", rat(self.strike))
            if self.strike <= 0:
                raise InvalidClaim("strike must be positive")
            if self.asset < 2:
                raise InvalidClaim("the call must be written on a risky asset (index >= 2)")
        elif self.kind == "linear-basket":
            if not self.weights:
                raise InvalidClaim("linear-basket needs weights")
            object.__setattr__(self, "weights", tuple(rat(x) for x in self.weights))
        else:
            raise InvalidClaim(f"unknown claim kind {self.kind!r}")

    @property
    def lipschitz(self) -> Fraction:
        if self.kind == "linear-basket":
            return max(Fraction(1), sum((abs(w) for w in self.weights), Fraction(0)))
        return Fraction(1)

    def check_dim(self, d: int) -> None:
        if self.kind == "constant-physical" and len(self.vector) != d:
            raise InvalidClaim(f"claim vector has length {len(self.vector)}, market has {d} assets")
        if self.kind == "vanilla-call" and self.asset > d:
            raise InvalidClaim(f"asset index {self.asset} > d = {d}")
        if self.kind == "linear-basket" and len(self.weights) != d:
            raise InvalidClaim(f"basket has {len(self.weights)} weights, market has {d} assets")

    @classmethod
    def from_config(cls, data: dict) -> "Claim":
        data = dict(data)
        kind = data.pop("kind", None)
        allowed = {
            "constant-physical": {"vector"},
            "vanilla-call": {"asset", "strike"},
            "linear-basket": {"weights"},
        }
        if kind not in allowed:
            raise InvalidClaim(f"unknown claim kind {kind!r}")
        extra = set(data) - allowed[kind]
        if extra:
            raise InvalidClaim(f"unknown claim keys {sorted(extra)}")
        if kind == "constant-physical":
            return cls(kind, vector=tuple(rat(x) for x in data["vector"]))
        if kind == "vanilla-call":
            return cls(kind, asset=int(data["asset"]), strike=rat(data["strike"]))
        return cls(kind, weights=tuple(rat(x) for x in data["weights"]))

    def to_config(self) -> dict:
        if self.kind == "constant-physical":
            return {"kind": self.kind, "vector": [str(x) for x in self.vector]}
        if self.kind == "vanilla-call":
            return {"kind": self.kind, "asset": self.asset, "strike": str(self.strike)}
        return {"kind": self.kind, "weights": [str(x) for x in self.weights]}

    def scaled(self, lam) -> "Claim":
        lam = rat(lam)
        if self.kind == "constant-physical":
            return Claim(self.kind, vector=tuple(lam * x for x in self.vector))
        if self.kind == "linear-basket":
            return Claim(self.kind, weights=tuple(lam * x for x in self.weights))
        raise InvalidClaim("only linear claims can be rescaled as claims")


def claim_payoff(claim: Claim, prices: Sequence) -> tuple:
    """Physical-units payoff ``X^`` at terminal prices.

    Works on Fractions (exact) or floats; the result has the input's type.
    """
    if any(p <= 0 for p in prices):
        raise NonpositivePrice("terminal prices must be strictly positive")
    d = len(prices)
    claim.check_dim(d)
    zero = prices[0] * 0
    if claim.kind == "constant-physical":
        if isinstance(prices[0], Fraction):
            return claim.vector
        return tuple(float(x) for x in claim.vector)
    if claim.kind == "vanilla-call":
        k = claim.strike if isinstance(prices[0], Fraction) else float(claim.strike)
        cash = max(prices[claim.asset - 1] - k, zero)
    else:
        ws = claim.weights if isinstance(prices[0], Fraction) else [float(w) for w in claim.weights]
        cash = sum((w * p for w, p in zip(ws, prices)), zero)
    return (cash / prices[0],) + (zero,) * (d - 1)
