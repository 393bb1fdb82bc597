"""Synthetic two-regime return panels for testing the spectral signals.

Calm blocks are independent Gaussian returns. Crash blocks are driven by one
common factor with negative drift plus a little idiosyncratic noise, so any
window inside a crash block is close to rank one.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .market_data import ReturnPanel


@dataclass(frozen=True)
class RegimeSpec:
    n_days: int = 1500
    n_assets: int = 10
    calm_block: int = 240
    crash_block: int = 60
    calm_vol: float = 0.01
    crash_vol: float = 0.03
    crash_drift: float = -0.003
    idio_vol: float = 0.001


def regime_panel(seed: int, spec: RegimeSpec = RegimeSpec()) -> tuple[ReturnPanel, np.ndarray]:
    """Return the panel and a boolean mask marking crash days.

    Blocks alternate calm, crash, calm, ... starting with calm.
    """
    rng = np.random.default_rng(seed)
    values = np.empty((spec.n_days, spec.n_assets))
    crash = np.zeros(spec.n_days, dtype=bool)
    t = 0
    in_crash = False
    while t < spec.n_days:
        length = min(spec.crash_block if in_crash else spec.calm_block, spec.n_days - t)
        if in_crash:
            factor = rng.normal(spec.crash_drift, spec.crash_vol, size=(length, 1))
            values[t : t + length] = factor + rng.normal(0.0, spec.idio_vol, size=(length, spec.n_assets))
            crash[t : t + length] = True
        else:
            values[t : t + length] = rng.normal(0.0, spec.calm_vol, size=(length, spec.n_assets))
        t += length
        in_crash = not in_crash
    dates = tuple(f"d{i:05d}" for i in range(spec.n_days))
    tickers = tuple(f"A{j:02d}" for j in range(spec.n_assets))
    return ReturnPanel(dates, tickers, values), crash
