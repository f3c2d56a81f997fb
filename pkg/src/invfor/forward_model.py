"""The price-response (reconstruction) problem and one-step forecasting.

For one hour the pool solves::

    max  sum_b x_b (u_b - p)
    s.t. pmin <= sum_b x_b <= pmax
         0 <= x_b <= E_b

which is a merit-order dispatch of a stepwise marginal-utility curve.  The
greedy closed form in :func:`solve_rp_greedy` is what the forecaster uses;
:func:`build_rp` gives the same problem as an explicit LP for cross-checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArityMismatch, InconsistentBounds
from .lp_core import GE, LE, LpBuilder, LpProblem

FIRST_BLOCK_OFFSET = 200.0


@dataclass(frozen=True)
class LoadBounds:
    pmin: np.ndarray
    pmax: np.ndarray


@dataclass(frozen=True)
class BlockPartition:
    """Block widths ``widths[b, t]`` in kWh."""

    widths: np.ndarray

    @property
    def n_blocks(self) -> int:
        return self.widths.shape[0]


@dataclass(frozen=True)
class UtilityCurve:
    """Marginal utilities ``u[b, t]`` in price units."""

    u: np.ndarray


def clamp_bounds(pmin, pmax) -> LoadBounds:
    """Make evaluated bounds usable out of sample.

    Crossed bounds collapse to their midpoint; negative values are floored
    at zero.  The result always satisfies ``0 <= pmin <= pmax``.
    """
    pmin = np.asarray(pmin, float).copy()
    pmax = np.asarray(pmax, float).copy()
    crossed = pmax < pmin
    mid = 0.5 * (pmin + pmax)
    pmin = np.where(crossed, mid, pmin)
    pmax = np.where(crossed, mid, pmax)
    return LoadBounds(np.maximum(pmin, 0.0), np.maximum(pmax, 0.0))


def block_widths(pmin, pmax, n_blocks: int) -> BlockPartition:
    """First block spans ``[0, pmin]``; the rest split ``[pmin, pmax]`` evenly."""
    pmin = np.atleast_1d(np.asarray(pmin, float))
    pmax = np.atleast_1d(np.asarray(pmax, float))
    if n_blocks < 1:
        raise ValueError("need at least one block")
    widths = np.empty((n_blocks, len(pmin)))
    widths[0] = pmin
    if n_blocks > 1:
        widths[1:] = (pmax - pmin) / (n_blocks - 1)
    return BlockPartition(widths)


def _check_rp(E, pmin, pmax):
    if pmin > pmax:
        raise InconsistentBounds(f"pmin={pmin} exceeds pmax={pmax}")
    if np.any(E < 0):
        raise InconsistentBounds("negative block width")
    if E.sum() < pmin - 1e-12 * max(1.0, abs(pmin)):
        raise InconsistentBounds(f"total block width {E.sum()} is below pmin={pmin}")


def build_rp(u, price: float, widths, pmin: float, pmax: float) -> LpProblem:
    """Reconstruction problem for a single hour as an LP over ``x[b]``."""
    u = np.asarray(u, float)
    E = np.asarray(widths, float)
    _check_rp(E, pmin, pmax)
    lp = LpBuilder("max")
    cols = lp.add_variables("x", len(u), lower=0.0, upper=E, cost=u - price)
    ones = {int(j): 1.0 for j in cols}
    lp.add_row(ones, GE, pmin)
    lp.add_row(ones, LE, pmax)
    return lp.build()


def solve_rp_greedy(u, price: float, widths, pmin: float, pmax: float) -> np.ndarray:
    """Merit-order solution of the reconstruction problem.

    Blocks are visited in order of decreasing utility (lowest index first on
    ties).  A block with ``u > price`` is filled while room remains below
    ``pmax``; blocks at or below the price stay empty unless needed to reach
    ``pmin``, in which case the least unprofitable ones are used first.
    """
    u = np.asarray(u, float)
    E = np.asarray(widths, float)
    _check_rp(E, pmin, pmax)
    order = np.argsort(-u, kind="stable")
    x = np.zeros(len(u))
    total = 0.0
    for b in order:
        if u[b] <= price:
            break
        if total >= pmax:
            break
        take = min(E[b], pmax - total)
        x[b] = take
        total += take
    if total < pmin:
        for b in order:
            need = pmin - total
            if need <= 0:
                break
            take = min(E[b] - x[b], need)
            if take > 0:
                x[b] += take
                total += take
    return x


def rp_objective(x, u, price: float) -> float:
    return float(np.dot(x, np.asarray(u, float) - price))


@dataclass(frozen=True)
class Forecast:
    """Per-hour forecast together with the curve that produced it."""

    load: np.ndarray
    pmin: np.ndarray
    pmax: np.ndarray
    utilities: np.ndarray
    blocks: np.ndarray


def forecast(bounds, utils, Z, prices) -> Forecast:
    """Forecast several hours at once; column ``t`` of ``Z`` goes with ``prices[t]``.

    ``bounds`` and ``utils`` are :class:`~invfor.estimation.BoundsCoefficients`
    and :class:`~invfor.estimation.UtilityCoefficients` (anything with an
    ``evaluate(Z)`` method and an ``arity``).
    """
    Z = np.asarray(Z, float)
    if Z.ndim == 1:
        Z = Z[:, None]
    prices = np.atleast_1d(np.asarray(prices, float))
    for coeffs in (bounds, utils):
        if Z.shape[0] != coeffs.arity:
            raise ArityMismatch(f"regressor rows: got {Z.shape[0]}, model uses {coeffs.arity}")
    if Z.shape[1] != len(prices):
        raise ValueError("one price per regressor column is required")
    pmin, pmax = bounds.evaluate(Z)
    lb = clamp_bounds(pmin, pmax)
    U = utils.evaluate(Z)
    E = block_widths(lb.pmin, lb.pmax, U.shape[0]).widths
    X = np.empty_like(U)
    for t in range(len(prices)):
        X[:, t] = solve_rp_greedy(U[:, t], prices[t], E[:, t], lb.pmin[t], lb.pmax[t])
    return Forecast(X.sum(axis=0), lb.pmin, lb.pmax, U, X)


def forecast_one_step(bounds, utils, z_next, p_next: float) -> float:
    """Aggregate load predicted for the next hour."""
    z = np.asarray(z_next, float).reshape(-1)
    if len(z) != bounds.arity:
        raise ArityMismatch(f"regressor row has {len(z)} entries, model uses {bounds.arity}")
    return float(forecast(bounds, utils, z[:, None], [p_next]).load[0])
