"""Exact rational polyhedra with interconvertible H- and V-representations."""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Iterable, Sequence

from ..errors import (
    DimensionMismatch,
    DimensionTooLarge,
    EmptyInput,
    InvalidRepresentation,
)
from ..rational import primitive_int, rat, rat_str, scale_first_unit, vec
from .dd import cone_generators

MAX_DIM = 6

Point = tuple[Fraction, ...]
Row = tuple[Point, Fraction]


@dataclass(frozen=True)
class HRep:
    """Rows ``(normal, offset)``, each meaning ``normal . x >= offset``."""

    dim: int
    rows: tuple[Row, ...]

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidRepresentation("dimension must be positive")
        for normal, _ in self.rows:
            if len(normal) != self.dim:
                raise InvalidRepresentation("row length differs from dim")
            if not any(normal):
                raise InvalidRepresentation("zero normal in HRep row")

    @classmethod
    def make(cls, dim: int, rows: Iterable[tuple[Sequence, object]]) -> "HRep":
        return cls(dim, tuple((vec(a), rat(b)) for a, b in rows))

    def canonical(self) -> "HRep":
        seen = set()
        for normal, offset in self.rows:
            s = next(abs(x) for x in normal if x != 0)
            seen.add((tuple(x / s for x in normal), offset / s))
        return HRep(self.dim, tuple(sorted(seen)))


@dataclass(frozen=True)
class VRep:
    dim: int
    vertices: tuple[Point, ...]
    rays: tuple[Point, ...]

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidRepresentation("dimension must be positive")
        for p in self.vertices + self.rays:
            if len(p) != self.dim:
                raise InvalidRepresentation("generator length differs from dim")
        for r in self.rays:
            if not any(r):
                raise InvalidRepresentation("zero ray in VRep")

    @classmethod
    def make(cls, dim: int, vertices: Iterable[Sequence] = (), rays: Iterable[Sequence] = ()) -> "VRep":
        return cls(dim, tuple(vec(v) for v in vertices), tuple(vec(r) for r in rays))

    def canonical(self) -> "VRep":
        rays = sorted({scale_first_unit(r) for r in self.rays})
        return VRep(self.dim, tuple(sorted(set(self.vertices))), tuple(rays))


def _check_dim(d: int) -> None:
    if d > MAX_DIM:
        raise DimensionTooLarge(f"dimension {d} exceeds the supported bound {MAX_DIM}")


def _h_to_v(h: HRep) -> VRep:
    d = h.dim
    _check_dim(d)
    cons = [primitive_int((-b,) + a) for a, b in h.rows]
    cons.append(tuple([1] + [0] * d))
    lin, rays = cone_generators(cons, d + 1)
    vertices, out_rays = [], []
    for l in lin:
        r = tuple(Fraction(x) for x in l[1:])
        out_rays.append(r)
        out_rays.append(tuple(-x for x in r))
    for g in rays:
        if g[0] > 0:
            vertices.append(tuple(Fraction(x, g[0]) for x in g[1:]))
        else:
            out_rays.append(tuple(Fraction(x) for x in g[1:]))
    if not vertices:
        return VRep(d, (), ())
    return VRep(d, tuple(vertices), tuple(out_rays)).canonical()


def _v_to_h(v: VRep) -> HRep:
    d = v.dim
    _check_dim(d)
    if not v.vertices:
        raise EmptyInput("V-representation without vertices")
    cons = [primitive_int((Fraction(1),) + p) for p in v.vertices]
    cons += [primitive_int((Fraction(0),) + r) for r in v.rays]
    lin, rays = cone_generators(cons, d + 1)
    rows: list[Row] = []
    for g in rays:
        if any(g[1:]):
            rows.append((tuple(Fraction(x) for x in g[1:]), Fraction(-g[0])))
    for l in lin:
        a = tuple(Fraction(x) for x in l[1:])
        if any(a):
            rows.append((a, Fraction(-l[0])))
            rows.append((tuple(-x for x in a), Fraction(l[0])))
    return HRep(d, tuple(rows)).canonical()


def dd_convert(rep: HRep | VRep) -> HRep | VRep:
    """Convert between representations with the double description method.

    The result is minimal (facets / extreme generators only) and canonical.
    Lines of the polyhedron appear as opposite ray pairs, equalities as
    opposite row pairs.
    """
    if isinstance(rep, HRep):
        return _h_to_v(rep)
    if isinstance(rep, VRep):
        return _v_to_h(rep)
    raise TypeError(f"expected HRep or VRep, got {type(rep).__name__}")


def _empty_h(d: int) -> HRep:
    e = tuple(Fraction(int(i == 0)) for i in range(d))
    return HRep(d, ((e, Fraction(1)), (tuple(-x for x in e), Fraction(0))))


class Polyhedron:
    """Closed convex polyhedron in Q^d.

    Holds an H-representation, a V-representation or both; the missing one is
    computed on first access. Instances are treated as immutable.
    """

    __slots__ = ("dim", "_h", "_v")

    def __init__(self, dim: int, h: HRep | None = None, v: VRep | None = None):
        if h is None and v is None:
            raise InvalidRepresentation("a polyhedron needs at least one representation")
        for rep in (h, v):
            if rep is not None and rep.dim != dim:
                raise DimensionMismatch(f"representation of dim {rep.dim} in a dim {dim} polyhedron")
        self.dim = dim
        self._h = h
        self._v = v

    # constructors
    @classmethod
    def from_h(cls, dim: int, rows: Iterable[tuple[Sequence, object]]) -> "Polyhedron":
        return cls(dim, h=HRep.make(dim, rows).canonical())

    @classmethod
    def from_v(cls, dim: int, vertices: Iterable[Sequence] = (), rays: Iterable[Sequence] = ()) -> "Polyhedron":
        v = VRep.make(dim, vertices, rays).canonical()
        if not v.vertices:
            if v.rays:
                raise EmptyInput("rays given without a vertex")
            return cls.empty(dim)
        return cls(dim, v=v)

    @classmethod
    def cone(cls, dim: int, rays: Iterable[Sequence]) -> "Polyhedron":
        return cls.from_v(dim, [(0,) * dim], rays)

    @classmethod
    def point(cls, x: Sequence) -> "Polyhedron":
        return cls.from_v(len(x), [x])

    @classmethod
    def orthant(cls, dim: int) -> "Polyhedron":
        eye = [tuple(int(i == j) for j in range(dim)) for i in range(dim)]
        return cls(
            dim,
            h=HRep.make(dim, [(e, 0) for e in eye]).canonical(),
            v=VRep.make(dim, [(0,) * dim], eye).canonical(),
        )

    @classmethod
    def empty(cls, dim: int) -> "Polyhedron":
        return cls(dim, h=_empty_h(dim), v=VRep(dim, (), ()))

    @classmethod
    def whole(cls, dim: int) -> "Polyhedron":
        eye = [tuple(int(i == j) for j in range(dim)) for i in range(dim)]
        rays = eye + [tuple(-x for x in e) for e in eye]
        return cls(dim, h=HRep(dim, ()), v=VRep.make(dim, [(0,) * dim], rays).canonical())

    # representations
    @property
    def h(self) -> HRep:
        if self._h is None:
            self._h = _empty_h(self.dim) if not self._v.vertices else _v_to_h(self._v)
        return self._h

    @property
    def v(self) -> VRep:
        if self._v is None:
            self._v = _h_to_v(self._h)
        return self._v

    @property
    def vertices(self) -> tuple[Point, ...]:
        return self.v.vertices

    @property
    def rays(self) -> tuple[Point, ...]:
        return self.v.rays

    @property
    def inequalities(self) -> tuple[Row, ...]:
        return self.h.rows

    @property
    def is_empty(self) -> bool:
        return not self.v.vertices

    def minimized(self) -> "Polyhedron":
        """Both representations, each irredundant."""
        if self.is_empty:
            return Polyhedron.empty(self.dim)
        h = _v_to_h(self.v)
        return Polyhedron(self.dim, h=h, v=_h_to_v(h))

    def translate(self, c: Sequence) -> "Polyhedron":
        c = vec(c)
        _same_dim(self.dim, len(c))
        if self.is_empty:
            return self
        h = None
        if self._h is not None:
            h = HRep(self.dim, tuple((a, b + sum(x * y for x, y in zip(a, c))) for a, b in self._h.rows))
        v = VRep(self.dim, tuple(tuple(x + y for x, y in zip(p, c)) for p in self.v.vertices), self.v.rays)
        return Polyhedron(self.dim, h=h, v=v.canonical())

    def scale(self, lam) -> "Polyhedron":
        """Image under ``x -> lam * x`` for rational ``lam > 0``."""
        lam = rat(lam)
        if lam <= 0:
            raise ValueError("scale factor must be positive")
        if self.is_empty:
            return self
        v = VRep(self.dim, tuple(tuple(lam * x for x in p) for p in self.v.vertices), self.v.rays)
        return Polyhedron(self.dim, v=v.canonical())

    def diag_image(self, diag: Sequence) -> "Polyhedron":
        """Image under ``x -> diag(diag) x`` for a strictly positive diagonal."""
        diag = vec(diag)
        _same_dim(self.dim, len(diag))
        if self.is_empty:
            return self
        h = None
        if self._h is not None:
            h = HRep(self.dim, tuple((tuple(a_i / s for a_i, s in zip(a, diag)), b) for a, b in self._h.rows)).canonical()
        v = self.v
        v = VRep(
            self.dim,
            tuple(tuple(x * s for x, s in zip(p, diag)) for p in v.vertices),
            tuple(tuple(x * s for x, s in zip(r, diag)) for r in v.rays),
        ).canonical()
        return Polyhedron(self.dim, h=h, v=v)

    def __repr__(self) -> str:
        if self._v is not None:
            return f"Polyhedron(dim={self.dim}, vertices={len(self._v.vertices)}, rays={len(self._v.rays)})"
        return f"Polyhedron(dim={self.dim}, rows={len(self._h.rows)})"

    # serialization
    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "vertices": [[rat_str(x) for x in p] for p in self.vertices],
            "rays": [[rat_str(x) for x in r] for r in self.rays],
            "inequalities": [
                {"normal": [rat_str(x) for x in a], "offset": rat_str(b)} for a, b in self.inequalities
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "Polyhedron":
        dim = int(data["dim"])
        v = h = None
        if "vertices" in data:
            v = VRep.make(dim, data["vertices"], data.get("rays", ())).canonical()
        if "inequalities" in data:
            h = HRep.make(dim, [(row["normal"], row["offset"]) for row in data["inequalities"]]).canonical()
        if v is not None and not v.vertices:
            return cls.empty(dim)
        return cls(dim, h=h, v=v)

    @classmethod
    def from_json(cls, text: str) -> "Polyhedron":
        return cls.from_dict(json.loads(text))


def _same_dim(a: int, b: int) -> None:
    if a != b:
        raise DimensionMismatch(f"dimensions {a} and {b} differ")


def minkowski_sum(a: Polyhedron, b: Polyhedron) -> Polyhedron:
    _same_dim(a.dim, b.dim)
    if a.is_empty or b.is_empty:
        return Polyhedron.empty(a.dim)
    verts = {tuple(x + y for x, y in zip(p, q)) for p, q in product(a.vertices, b.vertices)}
    v = VRep(a.dim, tuple(verts), a.rays + b.rays)
    h = _v_to_h(v)
    return Polyhedron(a.dim, h=h, v=_h_to_v(h))


def intersect(a: Polyhedron, b: Polyhedron) -> Polyhedron:
    """Intersection; an empty result comes back as ``Polyhedron.empty``."""
    _same_dim(a.dim, b.dim)
    if a.is_empty or b.is_empty:
        return Polyhedron.empty(a.dim)
    h = HRep(a.dim, a.h.rows + b.h.rows)
    v = _h_to_v(h)
    if not v.vertices:
        return Polyhedron.empty(a.dim)
    return Polyhedron(a.dim, h=_v_to_h(v), v=v)


def intersect_all(polys: Sequence[Polyhedron]) -> Polyhedron:
    if not polys:
        raise ValueError("need at least one polyhedron")
    d = polys[0].dim
    for p in polys:
        _same_dim(d, p.dim)
    if any(p.is_empty for p in polys):
        return Polyhedron.empty(d)
    if len(polys) == 1:
        return polys[0].minimized()
    rows = tuple(r for p in polys for r in p.h.rows)
    v = _h_to_v(HRep(d, rows))
    if not v.vertices:
        return Polyhedron.empty(d)
    return Polyhedron(d, h=_v_to_h(v), v=v)


def _satisfies(rows: Sequence[Row], x: Sequence) -> bool:
    for a, b in rows:
        if sum(ai * xi for ai, xi in zip(a, x)) < b:
            return False
    return True


def contains_point(p: Polyhedron, x: Sequence) -> bool:
    x = vec(x)
    _same_dim(p.dim, len(x))
    if p.is_empty:
        return False
    return _satisfies(p.h.rows, x)


def is_subset(a: Polyhedron, b: Polyhedron) -> bool:
    """``a`` contained in ``b``, decided on a's generators against b's rows."""
    _same_dim(a.dim, b.dim)
    if a.is_empty:
        return True
    if b.is_empty:
        return False
    rows = b.h.rows
    if not all(_satisfies(rows, p) for p in a.vertices):
        return False
    cone_rows = [(n, Fraction(0)) for n, _ in rows]
    return all(_satisfies(cone_rows, r) for r in a.rays)


def set_equal(a: Polyhedron, b: Polyhedron) -> bool:
    return is_subset(a, b) and is_subset(b, a)
