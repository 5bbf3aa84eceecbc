from __future__ import annotations

import math

import numpy as np

from ..numerics import ShapeError, mean, square, sub, sum_, value

NMSE_FLOOR_DB = -150.0


def mse_loss(x_hat, x_star):
    """Batch mean of squared l2 reconstruction errors; differentiable in ``x_hat``."""
    if np.shape(value(x_hat)) != np.shape(x_star):
        raise ShapeError(f"estimate shape {np.shape(value(x_hat))} != target shape {np.shape(x_star)}")
    return mean(sum_(square(sub(x_hat, x_star)), axis=1))


def nmse(x_hat, x_star, floor_db: float = NMSE_FLOOR_DB) -> float:
    """10 log10(E||x_hat - x*||^2 / E||x*||^2) in dB, floored at ``floor_db``."""
    x_hat, x_star = np.atleast_2d(value(x_hat)), np.atleast_2d(x_star)
    if x_hat.shape != x_star.shape:
        raise ShapeError(f"estimate shape {x_hat.shape} != target shape {x_star.shape}")
    signal = float(np.mean(np.sum(x_star**2, axis=1)))
    if signal == 0.0:
        raise ValueError("NMSE is undefined for all-zero targets")
    err = float(np.mean(np.sum((x_hat - x_star) ** 2, axis=1)))
    if err == 0.0:
        return floor_db
    return max(floor_db, 10.0 * math.log10(err / signal))
