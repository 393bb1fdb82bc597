"""Rolling-window backtest of a single strategy on a single universe.

On each day ``t`` (from ``w`` to the end of the panel) the strategy sees the
``w`` previous rows, picks an allocation, pays proportional costs on the trades
needed to move from yesterday's drifted holdings, and earns day ``t``'s return.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .market_data import ReturnPanel, window
from .optimizers import WeightVector
from .strategies import Allocation, StrategySpec, allocate, random_exposure_path

logger = logging.getLogger(__name__)

COST_CONVENTIONS = ("l1", "half_l1")


@dataclass(frozen=True)
class BacktestRecord:
    day: int
    gross_return: float
    cost: float
    net_return: float
    exposure: float
    weights: WeightVector


@dataclass
class BacktestResult:
    strategy: StrategySpec
    universe: list[int]
    w: int
    days: np.ndarray
    gross: np.ndarray
    cost: np.ndarray
    net: np.ndarray
    exposure: np.ndarray
    weights: np.ndarray
    distances: np.ndarray = field(repr=False)
    wipeout: bool = False

    @property
    def wealth(self) -> np.ndarray:
        """Wealth after each day, starting from 1 (the initial 1 is not included)."""
        return np.cumprod(1.0 + self.net)

    @property
    def reduced_days(self) -> int:
        return int(np.count_nonzero(self.exposure < 1.0))

    @property
    def records(self) -> list[BacktestRecord]:
        return [
            BacktestRecord(int(d), float(g), float(c), float(n), float(e), WeightVector(wt))
            for d, g, c, n, e, wt in zip(self.days, self.gross, self.cost, self.net,
                                         self.exposure, self.weights)
        ]


def drift(alloc: Allocation, returns: np.ndarray) -> np.ndarray:
    """Holdings (risky assets + liquidity) after one day of returns, as wealth fractions."""
    grown = alloc.holdings * np.append(1.0 + returns, 1.0)
    return grown / grown.sum()


def turnover(prev_alloc: Optional[Allocation], realized_returns: Optional[np.ndarray],
             next_alloc: Allocation, convention: str = "l1") -> float:
    """Traded fraction of wealth to move from drifted holdings to the next target.

    ``prev_alloc=None`` means the book starts fully in liquidity. The liquidity
    sleeve is part of the L1 distance; ``half_l1`` halves it (one-way trading).
    """
    if convention not in COST_CONVENTIONS:
        raise ValueError(f"unknown cost convention {convention!r}")
    target = next_alloc.holdings
    if prev_alloc is None:
        current = np.zeros_like(target)
        current[-1] = 1.0
    else:
        if len(prev_alloc.weights) != len(next_alloc.weights):
            raise ValueError("allocation dimensions differ")
        current = drift(prev_alloc, np.asarray(realized_returns, dtype=float))
    traded = float(np.abs(target - current).sum())
    return traded / 2.0 if convention == "half_l1" else traded


def run_backtest(panel: ReturnPanel, universe: Sequence[int], spec: StrategySpec, w: int,
                 cost_rate: float = 0.001, rng: Optional[np.random.Generator] = None, *,
                 exposure_path: Optional[np.ndarray] = None,
                 cost_convention: str = "l1") -> BacktestResult:
    """Walk the panel one day at a time for one strategy.

    ``random_control`` needs an exposure path; if none is given it is built
    from an internal RR run on the same universe using ``rng``.
    """
    universe = list(universe)
    t_total = panel.n_days
    if t_total <= w:
        raise ValueError(f"panel of {t_total} days is too short for window {w}")
    if cost_rate < 0:
        raise ValueError("cost_rate must be non-negative")
    n_days = t_total - w
    if spec.kind == "random_control" and exposure_path is None:
        if rng is None:
            raise ValueError("random_control needs a seeded generator")
        rr = run_backtest(panel, universe, StrategySpec("rr", reduction=spec.reduction), w,
                          cost_rate, cost_convention=cost_convention)
        exposure_path = random_exposure_path(n_days, rr.reduced_days, spec.reduction, rng)
    if exposure_path is not None and len(exposure_path) < n_days:
        raise ValueError("exposure path shorter than the backtest")

    n = len(universe)
    returns = panel.values[:, universe]
    gross = np.zeros(n_days)
    cost = np.zeros(n_days)
    exposure = np.zeros(n_days)
    weights = np.zeros((n_days, n))
    distances = np.full((n_days, 2), np.nan)
    prev: Optional[Allocation] = None
    wiped = False
    last = n_days
    for i, t in enumerate(range(w, t_total)):
        day_exposure = None if exposure_path is None else float(exposure_path[i])
        alloc = allocate(spec, window(panel, universe, t, w), exposure=day_exposure)
        traded = turnover(prev, returns[t - 1] if prev is not None else None, alloc, cost_convention)
        r_t = returns[t]
        gross[i] = alloc.exposure * float(alloc.weights.weights @ r_t)
        cost[i] = cost_rate * traded
        exposure[i] = alloc.exposure
        weights[i] = alloc.weights.weights
        if alloc.distances is not None:
            distances[i] = alloc.distances
        prev = alloc
        if gross[i] - cost[i] <= -1.0:
            logger.warning("wipeout on day %d for %s", t, spec.kind)
            wiped = True
            last = i + 1
            break

    sl = slice(0, last)
    return BacktestResult(
        strategy=spec,
        universe=universe,
        w=w,
        days=np.arange(w, w + last),
        gross=gross[sl],
        cost=cost[sl],
        net=gross[sl] - cost[sl],
        exposure=exposure[sl],
        weights=weights[sl],
        distances=distances[sl],
        wipeout=wiped,
    )
