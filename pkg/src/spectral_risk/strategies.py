"""Daily allocation rules for every strategy under comparison.

An allocation is a simplex weight vector for the risky sleeve plus an
exposure in [0, 1]; the remaining ``1 - exposure`` sits in liquidity that
earns nothing.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import optimizers, spectral
from .market_data import ReturnMatrix
from .optimizers import WeightVector

KINDS = (
    "one_over_n",
    "rr",
    "rr_enhanced",
    "random_control",
    "random_benchmark",
    "min_var",
    "min_var_quantile",
    "min_cvar",
)

LABELS = {
    "one_over_n": "1/N",
    "rr": "RR",
    "random_control": "random",
    "min_var": "Min-var",
    "min_var_quantile": "Min-VaR",
    "min_cvar": "Min-CVaR",
    "rr_enhanced": "enhanced RR",
    "random_benchmark": "RR random benchmark",
}

# strategies whose exposure follows the vertex-distance signal
SIGNAL_KINDS = ("rr", "random_benchmark")


@dataclass(frozen=True)
class StrategySpec:
    kind: str
    reduction: float = 0.5
    benchmark_weights: Optional[WeightVector] = None
    alpha: float = 0.01

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        if not 0.0 <= self.reduction <= 1.0:
            raise ValueError("reduction must lie in [0, 1]")
        if not 0.0 < self.alpha <= 0.5:
            raise ValueError("alpha must lie in (0, 0.5]")
        if (self.benchmark_weights is not None) != (self.kind == "random_benchmark"):
            raise ValueError("benchmark_weights is required for, and only for, random_benchmark")

    @property
    def label(self) -> str:
        return LABELS[self.kind]


@dataclass(frozen=True)
class Allocation:
    weights: WeightVector
    exposure: float
    # (distance to origin, distance to [0,...,0,1]) when the rule looked at the spectrum
    distances: Optional[tuple[float, float]] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if not 0.0 <= self.exposure <= 1.0:
            raise ValueError("exposure must lie in [0, 1]")

    @property
    def holdings(self) -> np.ndarray:
        """Wealth fractions: risky assets followed by the liquidity sleeve."""
        return np.append(self.exposure * self.weights.weights, 1.0 - self.exposure)


def equal_weights(n: int) -> WeightVector:
    return WeightVector(np.full(n, 1.0 / n))


def allocate(spec: StrategySpec, window: ReturnMatrix, exposure: Optional[float] = None) -> Allocation:
    """Allocation for the day following ``window``.

    ``random_control`` is not a function of the window: its exposure comes from
    a path precomputed by :func:`random_exposure_path` and must be passed in.
    """
    n = window.shape[1]
    kind = spec.kind
    if kind == "one_over_n":
        return Allocation(equal_weights(n), 1.0)
    if kind == "random_control":
        if exposure is None:
            raise ValueError("random_control needs its precomputed exposure for the day")
        return Allocation(equal_weights(n), float(exposure))
    if kind in SIGNAL_KINDS:
        s = spectral.normalized_spectrum(window)
        d0, d1 = spectral.vertex_distance(s, 0), spectral.vertex_distance(s, 1)
        weights = equal_weights(n) if kind == "rr" else spec.benchmark_weights
        return Allocation(weights, spec.reduction if d0 < d1 else 1.0, (d0, d1))
    if kind == "rr_enhanced":
        s = spectral.normalized_spectrum(window)
        d0, d1 = spectral.vertex_distance(s, 0), spectral.vertex_distance(s, 1)
        return Allocation(equal_weights(n), 0.0 if spectral.enhanced_signal(s) else 1.0, (d0, d1))
    if kind == "min_var":
        return Allocation(optimizers.min_variance(window), 1.0)
    if kind == "min_cvar":
        return Allocation(optimizers.min_cvar(window, spec.alpha), 1.0)
    if kind == "min_var_quantile":
        return Allocation(optimizers.min_var_quantile(window, spec.alpha), 1.0)
    raise AssertionError(kind)


def random_exposure_path(num_days: int, num_reduced: int, reduction: float,
                         rng: np.random.Generator) -> np.ndarray:
    """Exposure series with exactly ``num_reduced`` uniformly chosen reduced days."""
    if num_reduced < 0 or num_reduced > num_days:
        raise ValueError(f"cannot reduce {num_reduced} of {num_days} days")
    path = np.ones(num_days)
    path[rng.choice(num_days, size=num_reduced, replace=False)] = reduction
    return path


def sample_simplex(n: int, rng: np.random.Generator) -> WeightVector:
    """Uniform draw from the simplex: normalized i.i.d. exponential spacings."""
    if n < 1:
        raise ValueError("simplex dimension must be positive")
    e = rng.exponential(size=n)
    return WeightVector(e / e.sum())
