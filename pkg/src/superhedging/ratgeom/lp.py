"""Exact rational linear programming.

Dense tableau simplex over ``gmpy2.mpq`` with Bland's rule, so every answer is
exact and every run terminates. Inputs and outputs are ``Fraction``.

Two entry points:

* ``solve_lp`` -- minimize ``c.x`` over ``A_ub x <= b_ub, A_eq x = b_eq, x >= 0``
  with the two-phase method (optionally lexicographic over the optimal face).
* ``certified_feasible`` / ``CertifiedSystem`` -- feasibility of such systems,
  guided by a floating-point simplex but answered only with certificates
  (a point or a Farkas vector) that are verified in rational arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from gmpy2 import mpq

from ..rational import rat

ZERO = mpq(0)
ONE = mpq(1)


_MPQ = type(mpq())


def _q(x) -> mpq:
    if type(x) is _MPQ:
        return x
    if isinstance(x, Fraction):
        return mpq(x.numerator, x.denominator)
    return mpq(x)


def _frac(x: mpq) -> Fraction:
    return Fraction(int(x.numerator), int(x.denominator))


@dataclass
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: tuple[Fraction, ...] | None = None
    fun: Fraction | None = None

    @property
    def feasible(self) -> bool:
        return self.status != "infeasible"


def _pivot(T: np.ndarray, r: int, c: int) -> None:
    piv = T[r, c]
    if piv != ONE:
        T[r] = T[r] / piv
    col = T[:, c]
    for i in np.nonzero(col != ZERO)[0]:
        if i != r:
            T[i] = T[i] - col[i] * T[r]


def _simplex(T: np.ndarray, basis: list[int], n_cols: int, allowed: Sequence[bool]) -> str:
    """Primal simplex on ``T`` whose last row holds reduced costs.

    Column ``n_cols`` is the right-hand side; only ``allowed`` columns may enter.
    """
    m = len(basis)
    while True:
        obj = T[m]
        enter = -1
        for j in range(n_cols):
            if allowed[j] and obj[j] < 0:
                enter = j
                break
        if enter < 0:
            return "optimal"
        best = None
        leave = -1
        for i in range(m):
            a = T[i, enter]
            if a > 0:
                ratio = T[i, n_cols] / a
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                    best, leave = ratio, i
        if leave < 0:
            return "unbounded"
        _pivot(T, leave, enter)
        basis[leave] = enter


def solve_lp(
    c: Sequence,
    A_ub: Sequence[Sequence] | None = None,
    b_ub: Sequence | None = None,
    A_eq: Sequence[Sequence] | None = None,
    b_eq: Sequence | None = None,
    lex: bool = False,
) -> LPResult:
    """Minimize ``c.x`` subject to ``A_ub x <= b_ub``, ``A_eq x = b_eq``, ``x >= 0``.

    With ``lex=True`` the optimum returned is the lexicographically smallest
    point of the optimal face: after the main objective, ``x_0, x_1, ...`` are
    minimized in turn, each time restricted to columns whose reduced costs
    vanished for every earlier objective.
    """
    n = len(c)
    A_ub = [] if A_ub is None else [list(r) for r in A_ub]
    A_eq = [] if A_eq is None else [list(r) for r in A_eq]
    b_ub = [] if b_ub is None else list(b_ub)
    b_eq = [] if b_eq is None else list(b_eq)
    m_ub, m_eq = len(A_ub), len(A_eq)
    m = m_ub + m_eq
    if m == 0:
        if any(rat(ci) < 0 for ci in c):
            return LPResult("unbounded")
        return LPResult("optimal", tuple(Fraction(0) for _ in range(n)), Fraction(0))

    # columns: x (n) | slacks (m_ub) | artificials (m) | rhs
    n_art0 = n + m_ub
    width = n_art0 + m + 1
    rhs_col = width - 1
    T = np.full((m + 1, width), ZERO, dtype=object)
    basis = []
    need_art = []
    for i in range(m):
        if i < m_ub:
            row, b = A_ub[i], _q(rat(b_ub[i]))
        else:
            row, b = A_eq[i - m_ub], _q(rat(b_eq[i - m_ub]))
        sign = -1 if b < 0 else 1
        for j, a in enumerate(row):
            if a:
                T[i, j] = sign * _q(rat(a))
        if i < m_ub:
            T[i, n + i] = mpq(sign)
        T[i, rhs_col] = sign * b
        if i < m_ub and sign > 0:
            basis.append(n + i)
        else:
            T[i, n_art0 + i] = ONE
            basis.append(n_art0 + i)
            need_art.append(i)

    # phase 1: minimize the sum of artificials
    for i in need_art:
        T[m] = T[m] - T[i]
    for i in need_art:
        T[m, n_art0 + i] = ZERO
    allowed = [True] * (width - 1)
    _simplex(T, basis, rhs_col, allowed)
    if T[m, rhs_col] < 0:
        return LPResult("infeasible")

    # drive remaining artificials out of the basis, dropping redundant rows
    keep = list(range(m))
    for i in range(m):
        if basis[i] >= n_art0:
            col = next((j for j in range(n_art0) if T[i, j] != 0), None)
            if col is None:
                keep.remove(i)
            else:
                _pivot(T, i, col)
                basis[i] = col
    T = T[keep + [m]]
    basis = [basis[i] for i in keep]
    m = len(keep)

    # phase 2
    T[m] = ZERO
    for j, cj in enumerate(c):
        T[m, j] = _q(rat(cj))
    for i, bj in enumerate(basis):
        if T[m, bj] != 0:
            T[m] = T[m] - T[m, bj] * T[i]
    allowed = [j < n_art0 for j in range(width - 1)]
    status = _simplex(T, basis, rhs_col, allowed)
    if status == "unbounded":
        return LPResult("unbounded")
    fun = -T[m, rhs_col]
    if lex:
        for k in range(n):
            allowed = [a and T[m, j] == 0 for j, a in enumerate(allowed)]
            T[m] = ZERO
            T[m, k] = ONE
            for i, bj in enumerate(basis):
                if bj == k:
                    T[m] = T[m] - T[i]
            _simplex(T, basis, rhs_col, allowed)
    x = [ZERO] * n
    for i, bj in enumerate(basis):
        if bj < n:
            x[bj] = T[i, rhs_col]
    return LPResult("optimal", tuple(_frac(v) for v in x), _frac(fun))


def solve_lp_lexmin(c: Sequence, A_ub=None, b_ub=None, A_eq=None, b_eq=None) -> LPResult:
    """``solve_lp`` with lexicographic tie-breaking over the optimal face."""
    return solve_lp(c, A_ub, b_ub, A_eq, b_eq, lex=True)


# ---------------------------------------------------------------------------
# float-guided, exactly certified feasibility


@dataclass
class Certificate:
    """Outcome of ``certified_feasible``.

    ``feasible``: ``x`` satisfies the system exactly. Otherwise ``y`` is an
    exact Farkas vector ``(y_ub >= 0, y_eq)`` with ``A^T y >= 0`` and
    ``b.y < 0``. ``route`` says how it was obtained.
    """

    feasible: bool
    x: tuple | None = None
    y: tuple | None = None
    route: str = ""


def _solve_exact(rows: list[list[mpq]], rhs: list[mpq], n: int) -> list[mpq] | None:
    """One solution of a consistent linear system (free variables at 0), or
    None when the system is inconsistent."""
    A = [list(r) + [b] for r, b in zip(rows, rhs)]
    m = len(A)
    piv_cols = []
    r = 0
    for c in range(n):
        p = next((i for i in range(r, m) if A[i][c] != 0), None)
        if p is None:
            continue
        A[r], A[p] = A[p], A[r]
        inv = ONE / A[r][c]
        A[r] = [v * inv for v in A[r]]
        for i in range(m):
            if i != r and A[i][c] != 0:
                f = A[i][c]
                A[i] = [a - f * b for a, b in zip(A[i], A[r])]
        piv_cols.append(c)
        r += 1
        if r == m:
            break
    for i in range(r, m):
        if A[i][n] != 0:
            return None
    x = [ZERO] * n
    for i, c in enumerate(piv_cols):
        x[c] = A[i][n]
    return x


class CertifiedSystem:
    """``{x >= 0 : A_ub x <= b_ub, A_eq x = b_eq}`` for a fixed matrix and
    many right-hand sides; see ``certified_feasible``."""

    def __init__(self, A_ub=None, A_eq=None, n: int | None = None):
        self.Aub = [[_q(rat(v)) for v in r] for r in (A_ub or [])]
        self.Aeq = [[_q(rat(v)) for v in r] for r in (A_eq or [])]
        if n is None:
            n = len((self.Aub or self.Aeq)[0])
        self.n = n
        self.sub = [[(j, v) for j, v in enumerate(r) if v != 0] for r in self.Aub]
        self.seq = [[(j, v) for j, v in enumerate(r) if v != 0] for r in self.Aeq]
        self.Fub = np.array([[float(v) for v in r] for r in self.Aub], dtype=float).reshape(len(self.Aub), n)
        self.Feq = np.array([[float(v) for v in r] for r in self.Aeq], dtype=float).reshape(len(self.Aeq), n)
        self._farkas = None
        self.routes: dict[str, int] = {}

    def _verify(self, x, bub, beq) -> bool:
        if any(v < 0 for v in x):
            return False
        for row, b in zip(self.sub, bub):
            if sum((v * x[j] for j, v in row), ZERO) > b:
                return False
        for row, b in zip(self.seq, beq):
            if sum((v * x[j] for j, v in row), ZERO) != b:
                return False
        return True

    def _polish(self, xf, bub, beq, tol=1e-7):
        """Exact point on the face suggested by a float solution ``xf``."""
        n = self.n
        scale = max(1.0, float(np.max(np.abs(xf)))) if n else 1.0
        support = [j for j in range(n) if xf[j] > 1e-9 * scale]
        pos = {j: k for k, j in enumerate(support)}
        rows, rhs = [], []

        def restrict(sparse_row):
            r = [ZERO] * len(support)
            for j, v in sparse_row:
                if j in pos:
                    r[pos[j]] = v
            return r

        for row, b in zip(self.seq, beq):
            rows.append(restrict(row))
            rhs.append(b)
        if len(self.sub):
            slack = np.array([float(b) for b in bub]) - self.Fub @ xf
            for i, b in enumerate(bub):
                if abs(slack[i]) <= tol * (1 + abs(float(b))):
                    rows.append(restrict(self.sub[i]))
                    rhs.append(b)
        sol = _solve_exact(rows, rhs, len(support))
        if sol is None:
            return None
        x = [ZERO] * n
        for j, v in zip(support, sol):
            x[j] = v
        return x if self._verify(x, bub, beq) else None

    def _float(self, b_ub, b_eq, c=None):
        from scipy.optimize import linprog

        kw = {}
        if self.Fub.shape[0]:
            kw.update(A_ub=self.Fub, b_ub=np.array([float(v) for v in b_ub]))
        if self.Feq.shape[0]:
            kw.update(A_eq=self.Feq, b_eq=np.array([float(v) for v in b_eq]))
        c = np.zeros(self.n) if c is None else np.array([float(v) for v in c])
        return linprog(c, bounds=(0, None), method="highs-ds", **kw)

    def farkas_system(self) -> "CertifiedSystem":
        """``y_ub >= 0, y_eq = y+ - y-`` with ``A^T y >= 0`` (as ``-A^T y <= 0``)
        and ``sum y = 1``; infeasibility is certified by ``b.y < 0``."""
        if self._farkas is None:
            mub, meq, n = len(self.Aub), len(self.Aeq), self.n
            F_ub = []
            for j in range(n):
                F_ub.append(
                    [-self.Aub[i][j] for i in range(mub)]
                    + [-self.Aeq[i][j] for i in range(meq)]
                    + [self.Aeq[i][j] for i in range(meq)]
                )
            self._farkas = CertifiedSystem(F_ub or None, [[ONE] * (mub + 2 * meq)], n=mub + 2 * meq)
        return self._farkas

    def check(self, b_ub=None, b_eq=None) -> Certificate:
        bub = [_q(rat(v)) for v in (b_ub or [])]
        beq = [_q(rat(v)) for v in (b_eq or [])]
        mub, meq = len(bub), len(beq)
        try:
            res = self._float(bub, beq)
            status = res.status
        except Exception:  # pragma: no cover - numerical failure, use exact route
            status = -1
        if status == 0:
            x = self._polish(res.x, bub, beq)
            if x is not None:
                return self._done(Certificate(True, x=tuple(_frac(v) for v in x), route="float+exact"))
        elif status == 2 and mub + meq:
            F = self.farkas_system()
            cost = bub + beq + [-v for v in beq]
            fb_ub, fb_eq = [ZERO] * self.n, [ONE]
            try:
                fres = F._float(fb_ub, fb_eq, cost)
                y = F._polish(fres.x, fb_ub, fb_eq) if fres.status == 0 else None
            except Exception:  # pragma: no cover
                y = None
            if y is not None and sum((a * b for a, b in zip(cost, y)), ZERO) < 0:
                yy = y[:mub] + [a - b for a, b in zip(y[mub:mub + meq], y[mub + meq:])]
                return self._done(Certificate(False, y=tuple(_frac(v) for v in yy), route="float+exact"))
        ex = solve_lp([0] * self.n, self.Aub or None, bub or None, self.Aeq or None, beq or None)
        if ex.status == "infeasible":
            return self._done(Certificate(False, route="exact"))
        return self._done(Certificate(True, x=ex.x, route="exact"))

    def _done(self, c: Certificate) -> Certificate:
        self.routes[c.route] = self.routes.get(c.route, 0) + 1
        return c


def certified_feasible(A_ub=None, b_ub=None, A_eq=None, b_eq=None, n: int | None = None) -> Certificate:
    """Decide ``exists x >= 0: A_ub x <= b_ub, A_eq x = b_eq`` exactly.

    A floating-point simplex proposes either a point or a Farkas vector; the
    proposal only selects a face, on which the certificate is recomputed by
    exact elimination and checked in rational arithmetic. When that fails the
    exact simplex decides.
    """
    return CertifiedSystem(A_ub, A_eq, n).check(b_ub, b_eq)
