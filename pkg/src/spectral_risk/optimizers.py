"""Long-only risk minimizers over the probability simplex.

Three benchmarks: minimum variance (accelerated projected gradient), minimum
empirical CVaR (scenario linear program) and minimum empirical VaR (multi-start
pairwise local search, since the empirical quantile is not convex).

Tail conventions match the metrics: losses are ``-A @ w`` and the empirical
alpha-tail holds ``k = ceil(alpha * T)`` scenarios. With alpha = 1% and the
short windows used in practice, ``k == 1`` and both VaR and CVaR collapse to
the worst single-day loss.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .market_data import ReturnMatrix
from .metrics import tail_count

logger = logging.getLogger(__name__)

PG_TOL = 1e-10
PG_MAX_ITER = 50_000
POLISH_EVERY = 20


class OptimizerError(RuntimeError):
    pass


@dataclass(frozen=True)
class WeightVector:
    weights: np.ndarray
    degenerate: bool = False

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or len(w) == 0:
            raise ValueError("weights must be a non-empty vector")
        if np.any(w < -1e-9) or abs(w.sum() - 1.0) > 1e-8:
            raise ValueError(f"weights are not on the simplex: {w}")
        w = np.clip(w, 0.0, None)
        object.__setattr__(self, "weights", w / w.sum())

    def __len__(self) -> int:
        return len(self.weights)

    def __array__(self, dtype=None, copy=None):
        return self.weights if dtype is None else self.weights.astype(dtype)


def _values(a) -> np.ndarray:
    return a.values if isinstance(a, ReturnMatrix) else np.asarray(a, dtype=float)


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto ``{w >= 0, sum w = 1}`` (sort-based)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, len(v) + 1)
    rho = np.nonzero(u - css / ind > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def _largest_eigenvalue(m: np.ndarray, iters: int = 500) -> float:
    """Power iteration for the top eigenvalue of a PSD matrix."""
    x = np.linspace(1.0, 2.0, m.shape[0])
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(iters):
        y = m @ x
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return 0.0
        x = y / norm
        new = float(x @ m @ x)
        if abs(new - lam) <= 1e-12 * abs(new):
            lam = new
            break
        lam = new
    # the Rayleigh quotient approaches from below; pad so 1/L stays a safe step
    return lam * 1.01


def portfolio_variance(cov: np.ndarray, w: np.ndarray) -> float:
    return float(w @ cov @ w)


def _solve_on_support(cov: np.ndarray, support: np.ndarray) -> np.ndarray | None:
    """Stationary point of the equality-constrained problem on ``support``.

    Solves ``2 S_ss w = mu 1, sum w = 1``; returns None unless the solution
    is a point of the simplex.
    """
    idx = np.nonzero(support)[0]
    m = len(idx)
    kkt = np.zeros((m + 1, m + 1))
    kkt[:m, :m] = 2.0 * cov[np.ix_(idx, idx)]
    kkt[:m, m] = -1.0
    kkt[m, :m] = 1.0
    rhs = np.zeros(m + 1)
    rhs[m] = 1.0
    sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    if not np.allclose(kkt @ sol, rhs, rtol=0.0, atol=1e-12) or np.any(sol[:m] < -1e-12):
        return None
    w = np.zeros(len(cov))
    w[idx] = np.clip(sol[:m], 0.0, None)
    return w / w.sum()


def min_variance(a) -> WeightVector:
    """Minimize ``w' S w`` over the simplex, S the sample covariance (ddof=1)."""
    x = _values(a)
    t, n = x.shape
    if t < 2:
        raise ValueError("minimum variance needs at least two observations")
    if n == 1:
        return WeightVector(np.ones(1))
    if np.all(np.ptp(x, axis=0) == 0.0):
        return WeightVector(np.full(n, 1.0 / n), degenerate=True)
    cov = np.cov(x, rowvar=False, ddof=1)
    lipschitz = _largest_eigenvalue(2.0 * cov)
    step = 1.0 / lipschitz

    def grad(v: np.ndarray) -> np.ndarray:
        return 2.0 * cov @ v

    def mapping_norm(v: np.ndarray) -> float:
        return lipschitz * float(np.linalg.norm(project_simplex(v - step * grad(v)) - v))

    w = np.full(n, 1.0 / n)
    y = w
    f_w = portfolio_variance(cov, w)
    momentum = 1.0
    for it in range(PG_MAX_ITER):
        if it % POLISH_EVERY == POLISH_EVERY - 1:
            exact = _solve_on_support(cov, w > 0.0)
            if exact is not None and mapping_norm(exact) < PG_TOL:
                w = exact
                break
        w_next = project_simplex(y - step * grad(y))
        f_next = portfolio_variance(cov, w_next)
        if f_next > f_w:
            # adaptive restart: fall back to a plain projected-gradient step from w
            momentum, y = 1.0, w
            w_next = project_simplex(w - step * grad(w))
            f_next = portfolio_variance(cov, w_next)
        # norm of the gradient mapping, the stationarity measure on the simplex
        if lipschitz * np.linalg.norm(w_next - y) < PG_TOL:
            if f_next <= f_w:
                w = w_next
            break
        m_next = (1.0 + math.sqrt(1.0 + 4.0 * momentum * momentum)) / 2.0
        y = w_next + ((momentum - 1.0) / m_next) * (w_next - w)
        w, f_w, momentum = w_next, f_next, m_next
    else:
        logger.debug("min_variance hit the iteration cap (N=%d)", n)
    return WeightVector(w)


def cvar_objective(a, w, alpha: float) -> float:
    """Empirical CVaR of losses ``-A w``: mean of the ``ceil(alpha T)`` largest."""
    losses = -(_values(a) @ np.asarray(w, dtype=float))
    k = tail_count(len(losses), alpha)
    return float(np.mean(np.sort(losses)[::-1][:k]))


def var_objective(a, w, alpha: float) -> float:
    """Empirical VaR of losses ``-A w``: the ``ceil(alpha T)``-th largest loss."""
    losses = -(_values(a) @ np.asarray(w, dtype=float))
    k = tail_count(len(losses), alpha)
    return float(np.partition(losses, len(losses) - k)[len(losses) - k])


def rockafellar_uryasev_objective(a, w, alpha: float) -> float:
    """``min_z z + sum(max(loss - z, 0)) / (alpha T)``, evaluated exactly.

    The minimum over z is attained at one of the scenario losses.
    """
    losses = -(_values(a) @ np.asarray(w, dtype=float))
    t = len(losses)
    return float(
        min(z + np.maximum(losses - z, 0.0).sum() / (alpha * t) for z in losses)
    )


def min_cvar(a, alpha: float = 0.01) -> WeightVector:
    """Minimize scenario CVaR through its linear-program form.

    Variables are ``(w, z, u)``: minimize ``z + sum(u) / (alpha T)`` with
    ``u_t >= -A_t w - z``, ``u >= 0``, ``w`` on the simplex.
    """
    x = _values(a)
    t, n = x.shape
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if n == 1:
        return WeightVector(np.ones(1))
    c = np.concatenate([np.zeros(n), [1.0], np.full(t, 1.0 / (alpha * t))])
    a_ub = np.hstack([-x, -np.ones((t, 1)), -np.eye(t)])
    b_ub = np.zeros(t)
    a_eq = np.concatenate([np.ones(n), [0.0], np.zeros(t)])[None, :]
    bounds = [(0, None)] * n + [(None, None)] + [(0, None)] * t
    res = linprog(
        c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0], bounds=bounds,
        method="highs", options={"primal_feasibility_tolerance": 1e-10,
                                 "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:
        raise OptimizerError(f"CVaR linear program failed: {res.message}")
    w = np.clip(res.x[:n], 0.0, None)
    return WeightVector(w / w.sum())


def _pairwise_search(x: np.ndarray, w: np.ndarray, k: int,
                     step0: float = 0.1, step_min: float = 1e-4) -> tuple[np.ndarray, float]:
    # Steepest descent over all "move mass from i to j" directions, step shrinking by half.
    t, n = x.shape
    diff = x[:, None, :] - x[:, :, None]  # diff[:, i, j] = r_j - r_i
    r = x @ w
    best = -np.partition(r, k - 1)[k - 1]
    step = step0
    while step >= step_min:
        delta = np.minimum(step, w)  # mass available at source i
        if not np.any(delta > 0):
            break
        cand = r[:, None, None] + delta[None, :, None] * diff
        var = -np.partition(cand, k - 1, axis=0)[k - 1]
        np.fill_diagonal(var, np.inf)
        var[delta <= 0, :] = np.inf
        i, j = np.unravel_index(np.argmin(var), var.shape)
        if var[i, j] < best - 1e-15:
            moved = delta[i]
            w = w.copy()
            w[i] -= moved
            w[j] += moved
            r = r + moved * diff[:, i, j]
            best = float(var[i, j])
        else:
            step /= 2.0
    return w, float(best)


def min_var_quantile(a, alpha: float = 0.01) -> WeightVector:
    """Approximately minimize empirical VaR by multi-start local search.

    Starts from equal weights, every basis vector and the min-CVaR solution;
    the result is never worse than any start point. When the tail holds a
    single scenario the min-CVaR solution is returned as is.
    """
    x = _values(a)
    t, n = x.shape
    if n == 1:
        return WeightVector(np.ones(1))
    k = tail_count(t, alpha)
    cvar_w = min_cvar(x, alpha)
    if k == 1:
        # single-scenario tail: VaR is the worst loss, which the LP already minimizes globally
        return cvar_w
    starts = [np.full(n, 1.0 / n), *np.eye(n), cvar_w.weights]
    best_w, best_v = None, np.inf
    for w0 in starts:
        w, v = _pairwise_search(x, np.asarray(w0, dtype=float), k)
        if v < best_v:
            best_w, best_v = w, v
    best_w = np.clip(best_w, 0.0, None)
    return WeightVector(best_w / best_w.sum())
