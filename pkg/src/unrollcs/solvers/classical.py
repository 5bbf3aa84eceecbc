"""ISTA and FISTA for the LASSO objective 0.5 ||y - Phi x||^2 + lam ||x||_1."""

from __future__ import annotations

import math

import numpy as np

from ..numerics import lipschitz_constant, soft_threshold
from .trace import IterationTrace, TraceRecorder


def lasso_objective(phi: np.ndarray, y: np.ndarray, x: np.ndarray, lam: float) -> np.ndarray:
    y, x = np.atleast_2d(y), np.atleast_2d(x)
    resid = y - x @ phi.T
    return 0.5 * np.sum(resid**2, axis=1) + lam * np.sum(np.abs(x), axis=1)


def _check(lam: float, K: int) -> None:
    if lam <= 0:
        raise ValueError(f"lam must be positive, got {lam}")
    if K < 1:
        raise ValueError(f"K must be at least 1, got {K}")


def ista_run(phi, y, lam: float, K: int, *, L: float | None = None, x_star=None,
             keep_iterates: bool = True) -> IterationTrace:
    """K iterations of ISTA from x = 0; step 1/L, threshold lam/L."""
    _check(lam, K)
    phi = np.asarray(phi, dtype=np.float64)
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    L = lipschitz_constant(phi) if L is None else L
    rec = TraceRecorder(y.shape[0], x_star, keep_iterates)
    x = np.zeros((y.shape[0], phi.shape[1]))
    for _ in range(K):
        res = x @ phi.T - y
        grad = res @ phi
        x_new = soft_threshold(x - grad / L, lam / L)
        rec.layer(x_new, np.abs(res).sum(axis=1), np.abs(grad).sum(axis=1), lam / L, 1.0 / L)
        x = x_new
    return rec.finish(x, L=L, lam=lam)


def fista_run(phi, y, lam: float, K: int, *, L: float | None = None, x_star=None,
              keep_iterates: bool = True) -> IterationTrace:
    """FISTA: the ISTA step taken at a momentum-extrapolated point (t_1 = 1)."""
    _check(lam, K)
    phi = np.asarray(phi, dtype=np.float64)
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    L = lipschitz_constant(phi) if L is None else L
    rec = TraceRecorder(y.shape[0], x_star, keep_iterates)
    x = np.zeros((y.shape[0], phi.shape[1]))
    z = x
    t = 1.0
    for _ in range(K):
        res = z @ phi.T - y
        grad = res @ phi
        x_new = soft_threshold(z - grad / L, lam / L)
        t_new = (1.0 + math.sqrt(1.0 + 4.0 * t * t)) / 2.0
        z = x_new + ((t - 1.0) / t_new) * (x_new - x)
        rec.layer(x_new, np.abs(res).sum(axis=1), np.abs(grad).sum(axis=1), lam / L, 1.0 / L)
        x, t = x_new, t_new
    return rec.finish(x, L=L, lam=lam)
