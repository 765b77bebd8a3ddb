"""Double description method on integer data.

``cone_generators(constraints, n)`` computes a minimal generating system of the
polyhedral cone ``{x in R^n : c.x >= 0 for every c}``: a basis of its lineality
space and one primitive integer vector per extreme ray of the pointed part.

The iteration is Motzkin's incremental scheme. Lineality directions are kept as
a basis and are split off as soon as a constraint is not identically zero on
them; adjacency of rays is decided by the combinatorial test on zero sets, which
is exact because the ray list is kept minimal after every step.
"""

from __future__ import annotations

from math import gcd
from typing import Sequence

IntVec = tuple[int, ...]


def _dot(a: Sequence[int], b: Sequence[int]) -> int:
    return sum(x * y for x, y in zip(a, b))


def _primitive(v: Sequence[int]) -> IntVec:
    g = 0
    for x in v:
        g = gcd(g, x)
    if g > 1:
        return tuple(x // g for x in v)
    return tuple(v)


def _combine(a: int, u: Sequence[int], b: int, w: Sequence[int]) -> IntVec:
    return _primitive([a * x + b * y for x, y in zip(u, w)])


def cone_generators(
    constraints: Sequence[Sequence[int]], n: int
) -> tuple[list[IntVec], list[IntVec]]:
    """Return ``(lineality_basis, extreme_rays)`` of ``{x : C x >= 0}``."""
    lin: list[IntVec] = [tuple(1 if i == j else 0 for j in range(n)) for i in range(n)]
    rays: list[IntVec] = []
    zeros: list[int] = []  # bitmask of processed constraints vanishing on each ray

    for idx, c in enumerate(constraints):
        if not any(c):
            continue
        bit = 1 << idx
        vals = [_dot(c, l) for l in lin]
        k = next((i for i, v in enumerate(vals) if v != 0), None)
        if k is not None:
            l0 = lin.pop(k)
            a0 = vals.pop(k)
            if a0 < 0:
                l0 = tuple(-x for x in l0)
                a0 = -a0
            lin = [
                _combine(a0, l, -v, l0) if v else l for l, v in zip(lin, vals)
            ]
            new_rays = []
            for r in rays:
                v = _dot(c, r)
                new_rays.append(_combine(a0, r, -v, l0) if v else r)
            # l0 vanishes on every earlier constraint
            rays = new_rays + [l0]
            zeros = [z | bit for z in zeros] + [(1 << idx) - 1]
            continue

        pos, neg, zer = [], [], []
        for i, r in enumerate(rays):
            v = _dot(c, r)
            if v > 0:
                pos.append((i, v))
            elif v < 0:
                neg.append((i, v))
            else:
                zer.append(i)
        if not neg:
            for i in zer:
                zeros[i] |= bit
            continue

        # zero sets only matter for adjacency among rays that are kept
        min_common = n - len(lin) - 2
        new_rays, new_zeros = [], []
        for i, vp in pos:
            zp = zeros[i]
            for j, vn in neg:
                common = zp & zeros[j]
                if _popcount(common) < min_common:
                    continue
                if _adjacent(common, i, j, zeros):
                    new_rays.append(_combine(vp, rays[j], -vn, rays[i]))
                    new_zeros.append(common | bit)
        rays = [rays[i] for i, _ in pos] + [rays[i] for i in zer] + new_rays
        zeros = [zeros[i] for i, _ in pos] + [zeros[i] | bit for i in zer] + new_zeros

    return lin, rays


def _popcount(x: int) -> int:
    return bin(x).count("1")


def _adjacent(common: int, i: int, j: int, zeros: list[int]) -> bool:
    for k, z in enumerate(zeros):
        if k != i and k != j and common & z == common:
            return False
    return True
