"""Normalized singular-value spectra and their position in the unit hypercube.

A T x N return matrix is mapped to the point of ``[0, 1]^(N-1)`` given by its
N-1 smallest singular values divided by the largest, in ascending order.
Because the coordinates are sorted, only the N vertices of the form
``[0, ..., 0, 1, ..., 1]`` matter; the vertex with ``k`` trailing ones stands
for a rank-``k`` matrix, and the origin (rank one) is the riskiest place to be.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .market_data import ReturnMatrix

JACOBI_TOL = 1e-12
MAX_SWEEPS = 100


class DegenerateMatrixError(ValueError):
    """Raised for an all-zero return matrix, whose spectrum has no scale."""


@dataclass(frozen=True)
class NormalizedSpectrum:
    values: np.ndarray
    n_assets: int

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or len(values) != self.n_assets - 1 or self.n_assets < 2:
            raise ValueError(
                f"spectrum of a {self.n_assets}-asset matrix needs {self.n_assets - 1} entries"
            )
        if np.any(values < 0) or np.any(values > 1) or np.any(np.diff(values) < 0):
            raise ValueError("spectrum entries must be ascending and lie in [0, 1]")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class RiskScenario:
    level: int
    closest_vertex_ones: int


@njit(cache=True)
def _jacobi_eigenvalues(g, tol, max_sweeps):
    # Cyclic Jacobi on a symmetric matrix; g is overwritten.
    n = g.shape[0]
    fro = 0.0
    for i in range(n):
        for j in range(n):
            fro += g[i, j] * g[i, j]
    fro = np.sqrt(fro)
    for _ in range(max_sweeps):
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off += 2.0 * g[i, j] * g[i, j]
        if np.sqrt(off) <= tol * fro:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                gpq = g[p, q]
                if gpq == 0.0:
                    continue
                theta = (g[q, q] - g[p, p]) / (2.0 * gpq)
                t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    gkp = g[k, p]
                    gkq = g[k, q]
                    g[k, p] = c * gkp - s * gkq
                    g[k, q] = s * gkp + c * gkq
                for k in range(n):
                    gpk = g[p, k]
                    gqk = g[q, k]
                    g[p, k] = c * gpk - s * gqk
                    g[q, k] = s * gpk + c * gqk
                g[p, q] = 0.0
                g[q, p] = 0.0
    out = np.empty(n)
    for i in range(n):
        out[i] = g[i, i]
    return out


def _as_array(a) -> np.ndarray:
    if isinstance(a, ReturnMatrix):
        return a.values
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2:
        raise ValueError("expected a 2-d matrix")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix contains non-finite entries")
    return arr


def gram_eigenvalues(a) -> np.ndarray:
    """All N eigenvalues of ``A^T A`` (descending, clipped at zero)."""
    arr = _as_array(a)
    gram = np.ascontiguousarray(arr.T @ arr)
    eig = _jacobi_eigenvalues(gram, JACOBI_TOL, MAX_SWEEPS)
    return np.sort(np.maximum(eig, 0.0))[::-1]


def singular_values(a) -> np.ndarray:
    """Singular values of a matrix in descending order, ``min(T, N)`` of them.

    Computed as square roots of the eigenvalues of the N x N Gram matrix, which
    is cheap for the small universes used here (N up to a few dozen).
    """
    arr = _as_array(a)
    return np.sqrt(gram_eigenvalues(arr))[: min(arr.shape)]


def normalized_spectrum(a) -> NormalizedSpectrum:
    arr = _as_array(a)
    n = arr.shape[1]
    if n < 2:
        raise ValueError("normalized spectrum needs at least two assets")
    # all N Gram eigenvalues, so T < N pads the spectrum with exact rank-deficiency zeros
    sv = np.sqrt(gram_eigenvalues(arr))
    if sv[0] == 0.0:
        raise DegenerateMatrixError("all-zero matrix has no normalized spectrum")
    ratios = np.minimum(sv[1:] / sv[0], 1.0)
    return NormalizedSpectrum(np.sort(ratios), n)


def condition_number(a) -> float:
    sv = singular_values(a)
    return float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")


def _check(s: NormalizedSpectrum | np.ndarray) -> NormalizedSpectrum:
    if isinstance(s, NormalizedSpectrum):
        return s
    values = np.asarray(s, dtype=float)
    return NormalizedSpectrum(values, len(values) + 1)


def vertex_distance(s: NormalizedSpectrum | np.ndarray, k: int) -> float:
    """Euclidean distance to the meaningful vertex with ``k`` trailing ones."""
    s = _check(s)
    m = len(s)
    if not 0 <= k <= m:
        raise ValueError(f"vertex index {k} outside 0..{m}")
    zeros = m - k
    v = s.values
    return float(np.sqrt(np.sum(v[:zeros] ** 2) + np.sum((v[zeros:] - 1.0) ** 2)))


def vertex_distances(s: NormalizedSpectrum | np.ndarray) -> np.ndarray:
    """Distances to every meaningful vertex; entry ``k`` has ``k`` trailing ones."""
    s = _check(s)
    return np.array([vertex_distance(s, k) for k in range(len(s) + 1)])


def classify_scenario(s: NormalizedSpectrum | np.ndarray) -> RiskScenario:
    s = _check(s)
    d = vertex_distances(s)
    # argmin returns the first minimum, i.e. the fewest ones: ties go to the riskier side
    k = int(np.argmin(d))
    return RiskScenario(level=len(s) - k, closest_vertex_ones=k)


def rr_signal(s: NormalizedSpectrum | np.ndarray) -> bool:
    """True when the spectrum is closer to the origin than to ``[0, ..., 0, 1]``."""
    s = _check(s)
    return vertex_distance(s, 0) < vertex_distance(s, 1)


def enhanced_signal(s: NormalizedSpectrum | np.ndarray) -> bool:
    """True when the mean of the two smallest ratios falls below ``1/(N-1)``."""
    s = _check(s)
    if s.n_assets < 3:
        raise ValueError("enhanced signal needs at least three assets")
    return bool((s.values[0] + s.values[1]) / 2.0 < 1.0 / (s.n_assets - 1))
