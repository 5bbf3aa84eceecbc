"""Analytic weight matrix W with low generalized coherence to Phi.

W minimizes the Frobenius surrogate ``||W^T Phi||_F^2`` subject to
``W[:, i] . Phi[:, i] = 1`` for every column, by projected gradient descent
started from ``W = Phi``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import container
from .numerics import largest_eigenvalue

log = logging.getLogger(__name__)


class DivergenceError(RuntimeError):
    def __init__(self, message: str, trace: list[float]):
        super().__init__(message)
        self.trace = trace


@dataclass
class AnalyticDictionary:
    W: np.ndarray
    coherence: float
    iterations_run: int
    surrogate_value: float
    surrogate_trace: list[float] = field(default_factory=list, repr=False)


def surrogate(W: np.ndarray, phi: np.ndarray) -> float:
    return float(np.sum((W.T @ phi) ** 2))


def project(W: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Restore ``W[:, i] . Phi[:, i] = 1``; exact for unit-norm columns of Phi."""
    d = np.sum(W * phi, axis=0)
    return W + phi * (1.0 - d)


def compute_dictionary(phi: np.ndarray, step: float | None = None, iters: int = 10_000,
                       tol: float = 1e-13, patience: int = 10) -> AnalyticDictionary:
    """Projected gradient descent on the Frobenius coherence surrogate.

    ``step`` defaults to ``1 / (2 lambda_max(Phi Phi^T))``, the inverse
    Lipschitz constant of the surrogate's gradient.  Iteration stops early
    once the relative decrease drops below ``tol``.  A surrogate that grows
    for ``patience`` consecutive iterations raises :class:`DivergenceError`.
    """
    phi = np.asarray(phi, dtype=np.float64)
    gram = phi @ phi.T
    if step is None:
        step = 1.0 / (2.0 * largest_eigenvalue(gram))
    W = project(phi.copy(), phi)
    GW = gram @ W
    f = float(np.sum(W * GW))
    trace = [f]
    rising = 0
    it = 0
    for it in range(1, iters + 1):
        W_new = project(W - step * 2.0 * GW, phi)
        GW_new = gram @ W_new
        f_new = float(np.sum(W_new * GW_new))
        trace.append(f_new)
        if f_new > f * (1.0 + 1e-12):
            rising += 1
            if rising >= patience:
                raise DivergenceError(
                    f"surrogate increased for {patience} consecutive iterations", trace)
        else:
            rising = 0
        done = abs(f - f_new) <= tol * abs(f)
        W, GW, f = W_new, GW_new, f_new
        if done:
            break
    mu = generalized_coherence(W, phi)
    log.info("dictionary: %d iterations, surrogate %.6g, coherence %.5f", it, f, mu)
    return AnalyticDictionary(W, mu, it, f, trace)


def generalized_coherence(W: np.ndarray, phi: np.ndarray) -> float:
    """max over i != j of |W[:, i] . Phi[:, j]|."""
    W, phi = np.asarray(W, dtype=np.float64), np.asarray(phi, dtype=np.float64)
    if W.shape != phi.shape:
        raise ValueError(f"W shape {W.shape} differs from Phi shape {phi.shape}")
    G = np.abs(W.T @ phi)
    np.fill_diagonal(G, 0.0)
    return float(G.max()) if G.size > 1 else 0.0


def welch_bound(M: int, N: int) -> float:
    """Lower bound on the coherence of any M x N unit-norm frame."""
    if not 1 <= M <= N:
        raise ValueError(f"need 1 <= M <= N, got M={M}, N={N}")
    if M == N:
        return 0.0
    return math.sqrt((N - M) / (M * (N - 1)))


def max_admissible_sparsity(mu: float) -> int:
    """Largest integer s with s < (1 + 1/mu) / 2."""
    if not mu > 0:
        raise ValueError(f"coherence must be positive, got {mu}")
    return math.ceil((1.0 + 1.0 / mu) / 2.0) - 1


def cost_ratio(H: int, M: int, N: int) -> float:
    """Relative per-iteration overhead H^2 / (M N) of the recurrent cell."""
    return H * H / (M * N)


def save_dictionary(path, dico: AnalyticDictionary, phi: np.ndarray, extra: dict | None = None) -> str:
    meta = {
        "kind": "dictionary",
        "phi_checksum": container.checksum({"phi": phi}),
        "coherence": dico.coherence,
        "iterations_run": dico.iterations_run,
        "surrogate_value": dico.surrogate_value,
        **(extra or {}),
    }
    return container.save(path, {"W": dico.W}, meta)


def load_dictionary(path, phi: np.ndarray | None = None) -> AnalyticDictionary:
    arrays, meta = container.load(path)
    if meta.get("kind") != "dictionary":
        raise container.ContainerError(f"{path} is not a dictionary file")
    if phi is not None and meta["phi_checksum"] != container.checksum({"phi": phi}):
        raise container.ContainerError("dictionary was computed for a different measurement matrix")
    return AnalyticDictionary(arrays["W"], meta["coherence"], meta["iterations_run"],
                              meta["surrogate_value"])
