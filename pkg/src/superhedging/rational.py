"""Exact rational helpers shared by the kernel and the serializers."""

from __future__ import annotations

from fractions import Fraction
from math import gcd
from typing import Iterable, Sequence

import gmpy2

Rat = Fraction
Vec = tuple  # tuple of Fraction


def rat(x) -> Fraction:
    """Coerce ``x`` to a Fraction without passing through binary floats.

    Strings are read as decimals or ``p/q``; floats are converted exactly.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    if type(x) is type(gmpy2.mpq()):
        return Fraction(int(x.numerator), int(x.denominator))
    if isinstance(x, float):
        return Fraction(x)
    return Fraction(x)


def vec(xs: Iterable) -> tuple[Fraction, ...]:
    return tuple(rat(x) for x in xs)


def rat_str(q: Fraction) -> str:
    q = rat(q)
    return f"{q.numerator}/{q.denominator}"


def parse_rat_str(s: str) -> Fraction:
    return Fraction(s)


def dot(a: Sequence, b: Sequence):
    return sum((x * y for x, y in zip(a, b)), Fraction(0))


def scale_first_unit(v: Sequence[Fraction]) -> tuple[Fraction, ...]:
    """Scale by a positive factor so the first nonzero entry is +-1."""
    for x in v:
        if x != 0:
            s = abs(x)
            return tuple(y / s for y in v)
    return tuple(v)


def primitive_int(v: Sequence[Fraction]) -> tuple[int, ...]:
    """Positive multiple of ``v`` with coprime integer entries."""
    den = 1
    for x in v:
        den = den * x.denominator // gcd(den, x.denominator)
    ints = [int(x * den) for x in v]
    g = 0
    for n in ints:
        g = gcd(g, n)
    if g > 1:
        ints = [n // g for n in ints]
    return tuple(ints)
