"""Self-financing strategies in three equivalent forms.

* ``Theta`` -- per step a nonnegative ``d x d`` transfer-rate matrix;
* ``k``     -- per step a vector of the solvency cone (numeraire units);
* ``khat``  -- ``diag(S)^-1 k`` (physical units), so that ``dVhat = -khat dt``.

Strategies are piecewise constant on the simulation grid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import GridMismatch, NotInCone
from .market import PathSet
from .rational import rat, vec
from .solvency import ExchangeMatrix, apply_transfers, transfer_matrix_for


def _is_matrix(x) -> bool:
    return len(x) > 0 and isinstance(x[0], (list, tuple)) and not isinstance(x[0][0], (list, tuple))


def theta_to_k(theta, exchange: ExchangeMatrix):
    """``k^1 = <Theta, Pi>``, ``k^i = sum_j (theta^ij - theta^ji)``.

    Accepts one matrix or a list of per-step matrices.
    """
    if _is_matrix(theta):
        _check_theta(theta, exchange.d)
        return apply_transfers(exchange, theta)
    return [theta_to_k(t, exchange) for t in theta]


def _check_theta(theta, d: int) -> None:
    if len(theta) != d or any(len(row) != d for row in theta):
        raise ValueError(f"Theta must be {d}x{d}")
    for i in range(d):
        for j in range(d):
            x = rat(theta[i][j])
            if x < 0 or (i == j and x != 0):
                raise ValueError("Theta must be nonnegative with zero diagonal")


def k_to_theta(k, exchange: ExchangeMatrix):
    """Minimal-total-rate ``Theta`` (lexicographic tie-break) with image ``k``.

    Accepts one vector or a list of per-step vectors.
    """
    if len(k) and isinstance(k[0], (list, tuple)):
        return [k_to_theta(v, exchange) for v in k]
    k = vec(k)
    theta = transfer_matrix_for(exchange, k)
    if theta is None:
        raise NotInCone(f"k = {[str(x) for x in k]} is not in the solvency cone")
    return theta


def strategy_to_json(steps) -> str:
    """Per-step matrices or vectors; rationals as ``p/q`` strings, floats as is."""

    def enc(x):
        if isinstance(x, (list, tuple, np.ndarray)):
            return [enc(y) for y in x]
        if isinstance(x, Fraction):
            return f"{x.numerator}/{x.denominator}"
        return float(x)

    return json.dumps(enc(steps))


# ---------------------------------------------------------------------------
# value processes


@dataclass
class ValuePaths:
    Vhat: np.ndarray  # (n_paths, n_steps+1, d) physical units, exact integration
    V: np.ndarray  # diag(S) Vhat
    V_euler: np.ndarray  # numeraire-form scheme

    def max_gap(self) -> np.ndarray:
        """Per path, ``max_t |V_t - V^euler_t|_inf``."""
        return np.max(np.abs(self.V - self.V_euler), axis=(1, 2))


def simulate_value(model, khat: np.ndarray, v0: Sequence[float], paths: PathSet, scheme: str = "euler-S") -> ValuePaths:
    """Integrate a physical-units strategy along ``paths``.

    ``khat`` has shape ``(n_paths, n_steps, d)`` or ``(n_steps, d)`` (shared by
    all paths). ``Vhat`` is exact: ``Vhat_{n+1} = Vhat_n - khat_n dt``. The
    numeraire value ``V^i = S^i Vhat^i`` solves ``dV^i = Vhat^i dS^i - k^i dt``
    with ``k = diag(S) khat``; this is integrated independently by

    * ``"euler-S"``: Euler driven by the realized price increments,
      ``V_{n+1} = V_n + diag(V_n / S_n)(S_{n+1} - S_n) - k_n dt``;
    * ``"euler-W"``: Euler-Maruyama in the Brownian increments,
      ``V_{n+1} = V_n + diag(V_n)(a_n dt + sigma_n dW_n) - k_n dt`` with
      ``a = (r, b)``.
    """
    S = paths.S
    n_paths, n_pts, d = S.shape
    n_steps = n_pts - 1
    khat = np.asarray(khat, dtype=float)
    if khat.ndim == 2:
        khat = np.broadcast_to(khat, (n_paths,) + khat.shape)
    if khat.shape != (n_paths, n_steps, d):
        raise GridMismatch(f"strategy shape {khat.shape} does not match paths {(n_paths, n_steps, d)}")
    v0 = np.asarray(v0, dtype=float)
    if v0.shape != (d,):
        raise GridMismatch("v0 has the wrong length")
    dt = np.diff(paths.times)
    if not np.allclose(dt, model.T / n_steps, rtol=1e-12, atol=0):
        raise GridMismatch("paths are not on a uniform grid over [0, T]")

    Vhat = np.empty_like(S)
    Vhat[:, 0, :] = v0
    Vhat[:, 1:, :] = v0 - np.cumsum(khat * dt[None, :, None], axis=1)
    V = S * Vhat

    Ve = np.empty_like(S)
    Ve[:, 0, :] = S[:, 0, :] * v0
    for n in range(n_steps):
        k = S[:, n, :] * khat[:, n, :]
        if scheme == "euler-S":
            growth = (S[:, n + 1, :] - S[:, n, :]) / S[:, n, :]
        elif scheme == "euler-W":
            t = paths.times[n]
            sig = model.sigma(t)
            a = np.concatenate([[float(model.r(t))], model.b(t)])
            growth = a * dt[n] + paths.dW[:, n, :] @ sig.T
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
        Ve[:, n + 1, :] = Ve[:, n, :] + Ve[:, n, :] * growth - k * dt[n]
    return ValuePaths(Vhat, V, Ve)


def coarsen(paths: PathSet, factor: int) -> PathSet:
    """Same Brownian path seen on a grid ``factor`` times coarser."""
    n_steps = paths.n_steps
    if n_steps % factor:
        raise GridMismatch("factor must divide the number of steps")
    idx = np.arange(0, n_steps + 1, factor)
    dW = paths.dW.reshape(paths.n_paths, n_steps // factor, factor, -1).sum(axis=2)
    return PathSet(paths.times[idx], paths.S[:, idx, :], dW)


def empirical_order(dts: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of ``log(error)`` against ``log(dt)``."""
    x = np.log(np.asarray(dts, dtype=float))
    y = np.log(np.asarray(errors, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def convergence_study(
    model,
    khat_coarse: np.ndarray,
    v0: Sequence[float],
    paths_fine: PathSet,
    factors: Sequence[int],
    scheme: str = "euler-S",
) -> tuple[list[float], list[float], float]:
    """Mean over paths of ``max_t |V - V^euler|`` on a sequence of grids.

    ``khat_coarse`` is piecewise constant on the coarsest grid (shape
    ``(n_paths, n_coarse, d)``) and is held fixed while the grid is refined,
    so every grid integrates the same strategy along the same Brownian path.
    """
    n_fine = paths_fine.n_steps
    n_coarse = khat_coarse.shape[1]
    dts, errs = [], []
    for f in factors:
        p = coarsen(paths_fine, f)
        rep = p.n_steps // n_coarse
        kh = np.repeat(khat_coarse, rep, axis=1)
        vp = simulate_value(model, kh, v0, p, scheme)
        dts.append(model.T / p.n_steps)
        errs.append(float(np.mean(vp.max_gap())))
    assert n_fine % n_coarse == 0
    return dts, errs, empirical_order(dts, errs)
