"""Performance statistics for a daily net-return series.

All figures are daily and unannualized: the Sharpe ratio is mean over
standard deviation with a zero risk-free rate, kurtosis is raw (3 for a
Gaussian), and VaR/CVaR are reported as positive loss magnitudes.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

METRIC_NAMES = ("a_r", "st_dev", "sr", "var_1", "cvar_1", "mdd", "sk", "k")
METRIC_LABELS = {
    "a_r": "a.r.",
    "st_dev": "st.dev.",
    "sr": "SR",
    "var_1": "VaR 1%",
    "cvar_1": "CVaR 1%",
    "mdd": "MDD",
    "sk": "Sk",
    "k": "K",
}


class DegenerateSeriesError(ValueError):
    """Zero-variance series: Sharpe ratio and higher moments are undefined."""


@dataclass(frozen=True)
class MetricsSummary:
    a_r: float
    st_dev: float
    sr: float
    var_1: float
    cvar_1: float
    mdd: float
    sk: float
    k: float

    def as_dict(self) -> dict[str, float]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, float]) -> "MetricsSummary":
        return cls(**{f.name: float(d[f.name]) for f in fields(cls)})


def _series(returns) -> np.ndarray:
    r = np.asarray(returns, dtype=float).ravel()
    if not np.all(np.isfinite(r)):
        raise ValueError("return series contains non-finite values")
    return r


def tail_count(n: int, alpha: float) -> int:
    # the epsilon guards against alpha*n landing a hair above an integer
    return max(1, math.ceil(alpha * n - 1e-12))


def value_at_risk(returns, alpha: float = 0.01) -> float:
    r = np.sort(_series(returns))
    return float(-r[tail_count(len(r), alpha) - 1])


def conditional_value_at_risk(returns, alpha: float = 0.01) -> float:
    r = np.sort(_series(returns))
    return float(-np.mean(r[: tail_count(len(r), alpha)]))


def wealth_path(returns) -> np.ndarray:
    return np.cumprod(1.0 + _series(returns))


def max_drawdown(returns) -> float:
    """Largest peak-to-trough fall of wealth compounded from 1.

    The starting wealth of 1 counts as a peak, so a loss on day one is a drawdown.
    """
    r = _series(returns)
    if np.any(r < -1):
        raise ValueError("returns below -100% are not meaningful")
    peak = 1.0
    wealth = 1.0
    worst = 0.0
    for x in r:
        wealth *= 1.0 + x
        if wealth > peak:
            peak = wealth
        dd = 1.0 - wealth / peak
        if dd > worst:
            worst = dd
    return float(worst)


def summarize(returns, alpha: float = 0.01) -> MetricsSummary:
    r = _series(returns)
    if len(r) < 4:
        raise ValueError("need at least four returns to summarize a series")
    mean = float(np.mean(r))
    sd = float(np.std(r, ddof=1))
    centered = r - mean
    m2 = float(np.mean(centered**2))
    if np.ptp(r) == 0.0 or m2 == 0.0:
        raise DegenerateSeriesError("zero-variance series: Sharpe ratio undefined")
    m3 = float(np.mean(centered**3))
    m4 = float(np.mean(centered**4))
    return MetricsSummary(
        a_r=mean,
        st_dev=sd,
        sr=mean / sd,
        var_1=value_at_risk(r, alpha),
        cvar_1=conditional_value_at_risk(r, alpha),
        mdd=max_drawdown(r),
        sk=float(m3 / m2**1.5),
        k=float(m4 / m2**2),
    )
