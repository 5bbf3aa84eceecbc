"""Runtime checks of the no-false-positive lemma and the l1 error bound.

Under the recovery assumption (``s < (1 + 1/mu) / 2``, step sizes in
``(0, 2 / (2 mu s - mu + 1))`` and ``theta_k >= gamma_k mu ||x^(k) - x*||_1``)
every iterate's support stays inside ``supp(x*)`` and

    ||x^(k+1) - x*||_2 <= ||x^(k+1) - x*||_1
        <= mu gamma_k (s - 1) e_k + theta_k s + |1 - gamma_k| e_k,

with ``e_k = ||x^(k) - x*||_1``.  The functions here evaluate both sides on
recorded traces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numerics import soft_threshold
from .trace import IterationTrace, TraceRecorder


def step_size_interval(mu: float, s: int) -> tuple[float, float]:
    """Open interval of admissible step sizes."""
    return 0.0, 2.0 / (2.0 * mu * s - mu + 1.0)


def _errors(trace: IterationTrace, x_star: np.ndarray):
    xs = trace.iterates()
    d = xs - np.atleast_2d(x_star)[None]
    return np.abs(d).sum(axis=2), np.sqrt((d * d).sum(axis=2))


def verify_lemma1(trace: IterationTrace, x_star) -> np.ndarray:
    """(K, B) booleans: is supp(x^(k)) contained in supp(x*) for k = 1..K."""
    on = np.atleast_2d(x_star) != 0
    return np.all((trace.x != 0) <= on[None], axis=2)


@dataclass
class BoundReport:
    slack: np.ndarray  # (K, B) right-hand side minus ||x^(k+1) - x*||_1
    err_l1: np.ndarray  # (K + 1, B)
    err_l2: np.ndarray  # (K + 1, B)
    norm_chain: np.ndarray  # (K, B) ||.||_2 <= ||.||_1 for each x^(k+1) - x*

    @property
    def min_slack(self) -> float:
        return float(self.slack.min())


def verify_error_bound(trace: IterationTrace, x_star, mu: float, s: int) -> BoundReport:
    l1, l2 = _errors(trace, x_star)
    e, e_next = l1[:-1], l1[1:]
    g, th = trace.gamma, trace.theta
    rhs = mu * g * (s - 1) * e + th * s + np.abs(1.0 - g) * e
    return BoundReport(rhs - e_next, l1, l2, l2[1:] <= l1[1:])


def assumption_ratio(trace: IterationTrace, x_star, mu: float = 1.0):
    """Per-layer ``theta / gamma`` and ``mu ||x^(k) - x*||_1`` at the layer input.

    Both are (K, B); the ratio is NaN where ``gamma`` is 0.
    """
    if trace.err_l1 is not None:
        e = trace.err_l1[:-1]
    else:
        e = _errors(trace, x_star)[0][:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(trace.gamma != 0, trace.theta / np.where(trace.gamma != 0, trace.gamma, 1.0),
                         np.nan)
    return ratio, mu * e


def oracle_threshold_run(phi, W, y, x_star, gammas, mu: float, margin: float = 1e-12) -> IterationTrace:
    """Unrolled run whose thresholds are set from the true error.

    ``theta_k = gamma_k mu ||x^(k) - x*||_1 + margin`` per sample, without
    support selection, so the recovery assumption holds by construction.
    """
    phi, W = np.asarray(phi, dtype=np.float64), np.asarray(W, dtype=np.float64)
    y, x_star = np.atleast_2d(y), np.atleast_2d(x_star)
    B, N = x_star.shape
    rec = TraceRecorder(B, x_star, keep_iterates=True)
    x = np.zeros((B, N))
    for gamma in np.asarray(gammas, dtype=np.float64):
        theta = gamma * mu * np.abs(x - x_star).sum(axis=1, keepdims=True) + margin
        res = x @ phi.T - y
        upd = res @ W
        x_new = soft_threshold(x - gamma * upd, theta)
        rec.layer(x_new, np.abs(res).sum(axis=1), np.abs(upd).sum(axis=1), theta, gamma)
        x = x_new
    return rec.finish(x)
