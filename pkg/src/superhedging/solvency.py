"""Solvency cones under proportional transaction costs.

Asset 1 is the numéraire. ``mu[i][j]`` is the proportional fee, paid in the
numéraire, for moving one unit of value from asset ``j`` into asset ``i``.
Indices are 0-based in code, so ``mu[0][j]`` is the cost of buying asset
``j+1`` with cash.

The cone ``K(Pi)`` (numéraire units) is generated by one vector per ordered
pair ``(i, j)``; the cone in physical units at prices ``y`` is
``diag(y)^-1 K(Pi)``. Exact work uses rationals. The epsilon-relaxed cones are
float objects built from unit normals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateCone,
    DimensionMismatch,
    Infeasible,
    InvalidCostMatrix,
    NonpositivePrice,
    PreconditionViolated,
)
from .ratgeom.lp import solve_lp
from .ratgeom.polyhedron import HRep, Polyhedron, VRep, dd_convert
from .rational import rat, scale_first_unit, vec


@dataclass(frozen=True)
class ExchangeMatrix:
    """Proportional cost matrix ``mu`` and the derived exchange matrix ``Pi``."""

    mu: tuple[tuple[Fraction, ...], ...]
    allow_degenerate: bool = False

    def __post_init__(self):
        mu = tuple(tuple(rat(x) for x in row) for row in self.mu)
        object.__setattr__(self, "mu", mu)
        d = len(mu)
        if d < 2:
            raise InvalidCostMatrix("need at least two assets")
        if any(len(row) != d for row in mu):
            raise InvalidCostMatrix("cost matrix must be square")
        for i in range(d):
            if mu[i][i] != 0:
                raise InvalidCostMatrix(f"mu[{i + 1}][{i + 1}] must be 0")
            for j in range(d):
                if not (0 <= mu[i][j] < 1):
                    raise InvalidCostMatrix(f"mu[{i + 1}][{j + 1}] = {mu[i][j]} outside [0, 1)")
        for i, j, k in product(range(d), repeat=3):
            if len({i, j, k}) == 3 and 1 + mu[i][j] > (1 + mu[i][k]) * (1 + mu[k][j]):
                raise InvalidCostMatrix(
                    f"triangle inequality fails for ({i + 1},{j + 1}) through {k + 1}"
                )
        if not self.allow_degenerate:
            for j in range(1, d):
                if mu[0][j] + mu[j][0] <= 0:
                    raise DegenerateCone(f"mu[1][{j + 1}] + mu[{j + 1}][1] = 0")

    @classmethod
    def from_rows(cls, rows, allow_degenerate: bool = False) -> "ExchangeMatrix":
        return cls(tuple(tuple(rat(x) for x in row) for row in rows), allow_degenerate)

    @classmethod
    def constant(cls, d: int, lam, allow_degenerate: bool = False) -> "ExchangeMatrix":
        lam = rat(lam)
        return cls(
            tuple(tuple(Fraction(0) if i == j else lam for j in range(d)) for i in range(d)),
            allow_degenerate,
        )

    @property
    def d(self) -> int:
        return len(self.mu)

    @property
    def pi(self) -> tuple[tuple[Fraction, ...], ...]:
        mu, d = self.mu, self.d
        rows = []
        for i in range(d):
            row = []
            for j in range(d):
                if i == 0:
                    row.append(Fraction(1) if j == 0 else 1 + mu[0][j])
                elif j == 0:
                    row.append(-(1 - mu[i][0]))
                else:
                    row.append(mu[i][j])
            rows.append(tuple(row))
        return tuple(rows)

    def pairs(self) -> list[tuple[int, int]]:
        """Ordered off-diagonal pairs, in the order used for generators."""
        d = self.d
        return [(i, j) for i in range(d) for j in range(d) if i != j]

    def generator(self, i: int, j: int) -> tuple[Fraction, ...]:
        """Image of the unit transfer matrix at ``(i, j)``."""
        g = [Fraction(0)] * self.d
        g[0] = self.pi[i][j]
        if i != 0:
            g[i] += 1
        if j != 0:
            g[j] -= 1
        return tuple(g)

    def to_json(self) -> list[list[str]]:
        return [[str(x) for x in row] for row in self.mu]


@dataclass(frozen=True)
class SolvencyConeSpec:
    exchange: ExchangeMatrix
    generators: VRep  # all d(d-1) pair generators, as given
    halfspaces: HRep  # irredundant, offsets 0
    extreme_rays: tuple[tuple[Fraction, ...], ...]  # minimal generating set
    dual_generators: tuple[tuple[Fraction, ...], ...]  # exact, first nonzero = +-1
    unit_normals: tuple[tuple[float, ...], ...] = field(repr=False)

    @property
    def d(self) -> int:
        return self.exchange.d

    @property
    def cone(self) -> Polyhedron:
        return Polyhedron(
            self.d,
            h=self.halfspaces,
            v=VRep(self.d, ((Fraction(0),) * self.d,), self.extreme_rays),
        )


def build_cone(exchange: ExchangeMatrix) -> SolvencyConeSpec:
    d = exchange.d
    gens = [exchange.generator(i, j) for i, j in exchange.pairs()]
    # keep the pair list itself (duplicates after scaling are not expected
    # for valid matrices, but the raw list is what the definition produces)
    vrep = VRep(d, ((Fraction(0),) * d,), tuple(gens))
    h = dd_convert(vrep.canonical())
    v = dd_convert(h)
    duals = tuple(scale_first_unit(a) for a, _ in h.rows)
    normals = []
    for w in duals:
        fw = [float(x) for x in w]
        nrm = math.sqrt(sum(x * x for x in fw))
        normals.append(tuple(x / nrm for x in fw))
    return SolvencyConeSpec(
        exchange=exchange,
        generators=vrep,
        halfspaces=h,
        extreme_rays=v.rays,
        dual_generators=duals,
        unit_normals=tuple(normals),
    )


def _check_prices(spec: SolvencyConeSpec, y: Sequence) -> tuple[Fraction, ...]:
    y = vec(y)
    if len(y) != spec.d:
        raise DimensionMismatch(f"price vector of length {len(y)} for d={spec.d}")
    if any(x <= 0 for x in y):
        raise NonpositivePrice(f"prices must be strictly positive, got {[str(x) for x in y]}")
    return y


def physical_cone(spec: SolvencyConeSpec, y: Sequence) -> Polyhedron:
    """``diag(y)^-1 K(Pi)`` with both representations carried over exactly."""
    y = _check_prices(spec, y)
    d = spec.d
    rays = tuple(tuple(x / s for x, s in zip(r, y)) for r in spec.extreme_rays)
    rows = tuple((tuple(a * s for a, s in zip(w, y)), Fraction(0)) for w, _ in spec.halfspaces.rows)
    return Polyhedron(
        d,
        h=HRep(d, rows).canonical(),
        v=VRep(d, ((Fraction(0),) * d,), rays).canonical(),
    )


def physical_generators(spec: SolvencyConeSpec, y: Sequence) -> list[tuple[Fraction, ...]]:
    """All pair generators divided by the prices (not reduced)."""
    y = _check_prices(spec, y)
    return [tuple(x / s for x, s in zip(g, y)) for g in spec.generators.rays]


def dual_membership(spec: SolvencyConeSpec, y: Sequence, z: Sequence) -> bool:
    """Ratio-inequality test for ``z`` in the dual of ``diag(y)^-1 K(Pi)``."""
    y = _check_prices(spec, y)
    z = vec(z)
    if len(z) != spec.d:
        raise DimensionMismatch("z has the wrong length")
    mu = spec.exchange.mu
    d = spec.d
    u = [a / b for a, b in zip(z, y)]
    for i in range(1, d):
        if not ((1 - mu[i][0]) * u[0] <= u[i] <= (1 + mu[0][i]) * u[0]):
            return False
    for i in range(1, d):
        for j in range(1, d):
            if i != j and u[j] - u[i] > mu[i][j] * u[0]:
                return False
    return True


def dual_membership_generators(spec: SolvencyConeSpec, y: Sequence, z: Sequence) -> bool:
    """Definition-based test: ``z.x >= 0`` for every generator ``x`` of the cone."""
    z = vec(z)
    return all(sum(a * b for a, b in zip(z, g)) >= 0 for g in physical_generators(spec, y))


def dual_cone_rows(spec: SolvencyConeSpec, y: Sequence) -> list[tuple[tuple[Fraction, ...], Fraction]]:
    """The ratio inequalities as linear rows ``a.z >= 0`` (for use in LPs)."""
    y = _check_prices(spec, y)
    mu, d = spec.exchange.mu, spec.d
    rows = []

    def row(coefs):
        a = [Fraction(0)] * d
        for k, c in coefs:
            a[k] += c / y[k]
        return tuple(a), Fraction(0)

    for i in range(1, d):
        rows.append(row([(i, 1), (0, -(1 - mu[i][0]))]))
        rows.append(row([(0, 1 + mu[0][i]), (i, -1)]))
    for i in range(1, d):
        for j in range(1, d):
            if i != j:
                rows.append(row([(0, mu[i][j]), (i, 1), (j, -1)]))
    return rows


def decompose(spec: SolvencyConeSpec, alpha: Sequence) -> tuple[tuple[Fraction, ...], ...]:
    """Nonnegative transfer matrix ``B`` whose cone image is ``alpha``.

    Among all such ``B`` the one minimizing the total transfer, then
    lexicographically smallest, is returned.
    """
    alpha = vec(alpha)
    if len(alpha) != spec.d:
        raise DimensionMismatch("alpha has the wrong length")
    if any(a < 0 for a in alpha):
        raise ValueError("alpha must be componentwise nonnegative")
    B = transfer_matrix_for(spec.exchange, alpha)
    if B is None:
        raise Infeasible(f"no nonnegative decomposition of {[str(a) for a in alpha]}")
    return B


def transfer_matrix_for(exchange: ExchangeMatrix, x: Sequence) -> tuple[tuple[Fraction, ...], ...] | None:
    """Lex-min total-transfer ``B >= 0`` with ``sum b^ij g^ij = x``, or None."""
    d = exchange.d
    pairs = exchange.pairs()
    gens = [exchange.generator(i, j) for i, j in pairs]
    A_eq = [[g[r] for g in gens] for r in range(d)]
    res = solve_lp([1] * len(pairs), A_eq=A_eq, b_eq=list(x), lex=True)
    if res.status != "optimal":
        return None
    B = [[Fraction(0)] * d for _ in range(d)]
    for (i, j), b in zip(pairs, res.x):
        B[i][j] = b
    return tuple(tuple(row) for row in B)


def apply_transfers(exchange: ExchangeMatrix, B: Sequence[Sequence]) -> tuple[Fraction, ...]:
    """``x^1 = <B, Pi>``, ``x^i = sum_j (b^ij - b^ji)`` for ``i >= 2``."""
    d = exchange.d
    B = [[rat(x) for x in row] for row in B]
    pi = exchange.pi
    x1 = sum((B[i][j] * pi[i][j] for i in range(d) for j in range(d) if i != j), Fraction(0))
    rest = [sum((B[i][j] - B[j][i] for j in range(d) if j != i), Fraction(0)) for i in range(1, d)]
    return (x1, *rest)


# ---------------------------------------------------------------------------
# epsilon cones


@dataclass(frozen=True)
class EpsCone:
    """``{x : (diag(y) w^n).x >= -eps |x|_inf for every n}``.

    Not convex for ``eps > 0``; membership is decided pointwise.
    """

    y: tuple[float, ...]
    eps: float
    unit_normals: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        if any(v <= 0 for v in self.y):
            raise NonpositivePrice("eps-cone prices must be strictly positive")

    @classmethod
    def of(cls, spec: SolvencyConeSpec, y: Sequence, eps: float) -> "EpsCone":
        return cls(tuple(float(v) for v in y), float(eps), spec.unit_normals)

    @property
    def normals(self) -> np.ndarray:
        """Rows ``diag(y) w^n``."""
        return np.asarray(self.unit_normals) * np.asarray(self.y)


COMPARE_SLACK = 1e-12


def eps_membership(c: EpsCone, x: Sequence[float]) -> bool:
    x = np.asarray(x, dtype=float)
    norm = float(np.max(np.abs(x))) if x.size else 0.0
    lhs = c.normals @ x
    return bool(np.all(lhs >= -c.eps * norm - COMPARE_SLACK * (1 + norm)))


def eps_margin(c: EpsCone, x: Sequence[float]) -> float:
    """``min_n (a_n.x + eps |x|_inf)``; nonnegative exactly on the cone."""
    x = np.asarray(x, dtype=float)
    norm = float(np.max(np.abs(x)))
    return float(np.min(c.normals @ x + c.eps * norm))


def eps_pieces(normals: Sequence[Sequence], eps) -> list[list[tuple]]:
    """The epsilon cone as a union of ``2d`` polyhedral cones.

    Piece ``(i, s)`` is ``{x : (a_n + s eps e_i).x >= 0 for all n}``; it covers
    the points whose sup-norm is attained by ``s x_i``. Works on whatever
    number type ``normals`` and ``eps`` carry.
    """
    d = len(normals[0])
    out = []
    for i in range(d):
        for s in (1, -1):
            rows = []
            for a in normals:
                b = list(a)
                b[i] = b[i] + s * eps
                rows.append(tuple(b))
            out.append(rows)
    return out


def eps_inclusion_check(
    spec: SolvencyConeSpec,
    y: Sequence,
    y_prime: Sequence,
    eps1: float,
    eps2: float,
    samples: int = 1000,
    rng_seed: int = 0,
) -> bool:
    """Sampled check that the ``eps2`` cone at ``y`` sits in the ``eps1+eps2`` cone at ``y'``.

    Half the samples are random nonnegative combinations of the cone
    generators at ``y``; the other half are points on the boundary of the
    ``eps2`` cone, found by bisecting between such a combination and a random
    point outside it.
    """
    yf = np.asarray([float(v) for v in y])
    ypf = np.asarray([float(v) for v in y_prime])
    if np.any(yf <= 0) or np.any(ypf <= 0):
        raise NonpositivePrice("prices must be strictly positive")
    dist = float(np.linalg.norm(yf - ypf))
    # the distance is itself computed in floats; allow rounding-level excess
    if dist > eps1 * (1 + 1e-12) + 1e-15:
        raise PreconditionViolated(f"|y - y'| = {dist!r} exceeds eps1 = {eps1!r}")
    inner = EpsCone.of(spec, yf, eps2)
    outer = EpsCone.of(spec, ypf, eps1 + eps2)
    gens = np.asarray([[float(v) for v in g] for g in physical_generators(spec, [rat(v) for v in yf])])
    rng = np.random.default_rng(rng_seed)
    d = spec.d
    for k in range(samples):
        lam = rng.exponential(size=len(gens))
        base = lam @ gens
        if k % 2 == 0:
            x = base
        else:
            far = rng.normal(size=d) * (1 + float(np.max(np.abs(base))))
            if eps_membership(inner, far):
                x = far
            else:
                lo, hi = 0.0, 1.0
                for _ in range(60):
                    mid = 0.5 * (lo + hi)
                    if eps_membership(inner, base + mid * (far - base)):
                        lo = mid
                    else:
                        hi = mid
                x = base + lo * (far - base)
        if not eps_membership(inner, x):
            continue
        if not eps_membership(outer, x):
            return False
    return True
