"""Unrolled learned solvers: ALISTA, ALISTA-AT and NA-ALISTA.

Every layer applies

    x <- eta_(theta, p_k)(x - gamma * W^T (Phi x - y))

where ``eta_(theta, p)`` is soft thresholding that exempts the largest
``ceil(p N / 100)`` magnitudes (support selection).  The models differ only
in where ``theta`` and ``gamma`` come from:

* ALISTA learns one scalar pair per layer.
* ALISTA-AT scales the learned per-layer threshold componentwise by
  ``1 / (1 + |x_i| / eps)`` using the layer input.
* NA-ALISTA predicts a pair per sample with an LSTM cell fed the l1 norms
  ``r = ||Phi x - y||_1`` and ``u = ||W^T (Phi x - y)||_1``; the pair is
  ``softsign(U c)`` of the cell state ``c``.

Passing a :class:`~unrollcs.numerics.Tape` to ``forward`` records the pass so
the loss can be differentiated with respect to the parameters.
"""

from __future__ import annotations

import math

import numpy as np

from ..numerics import (
    Tape,
    absolute,
    clamp_min,
    concat,
    l1_norm,
    log,
    matmul,
    sigmoid,
    softsign,
    support_select_threshold as _support_threshold,
    tanh,
    value,
)
from .trace import IterationTrace, TraceRecorder

MODEL_KINDS = ("alista", "alista_at", "na_alista")
FEATURES = ("r", "u")
INPUT_NORMS = ("none", "dim", "log")
LOG_FLOOR = 1e-12


def exemption_count(p: float, N: int) -> int:
    """Number of entries exempt from thresholding for percentage ``p``."""
    if not 0.0 <= p <= 100.0:
        raise ValueError(f"support-selection percentage must lie in [0, 100], got {p}")
    # guard against 1.2 * 500 / 100 = 6.000000000000001
    return min(N, math.ceil(p * N / 100.0 - 1e-9))


def support_select_threshold(x, theta, p: float, N: int | None = None):
    """Soft thresholding with the top ``p`` percent of |x| per row passed through."""
    N = np.shape(value(x))[-1] if N is None else N
    return _support_threshold(x, theta, exemption_count(p, N))


def support_schedule(K: int, p_max: float) -> np.ndarray:
    """Percentages rising linearly from 0 at the first layer to ``p_max`` at the last."""
    if K == 1:
        return np.zeros(1)
    return np.linspace(0.0, p_max, K)


class UnrolledModel:
    kind = "base"

    def __init__(self, K: int, support=None, params: dict[str, np.ndarray] | None = None):
        if K < 1:
            raise ValueError("K must be at least 1")
        self.K = K
        self.support = np.zeros(K) if support is None else np.asarray(support, dtype=np.float64)
        if self.support.shape != (K,):
            raise ValueError(f"support schedule must have length K={K}")
        self.params = params if params is not None else self.init_params()

    # subclasses provide these
    def init_params(self, rng: np.random.Generator | None = None) -> dict[str, np.ndarray]:
        raise NotImplementedError

    def hyper(self) -> dict:
        return {}

    def _start(self, P, B: int):
        return None

    def _layer(self, k: int, P, x, res, upd, state):
        raise NotImplementedError

    def forward(self, phi, W, y, *, tape: Tape | None = None, x_star=None,
                keep_iterates: bool = True, clamp_theta: bool = False) -> IterationTrace:
        """Run the K layers on a batch of observations ``y`` (B x M).

        With ``clamp_theta`` negative thresholds are clamped to 0, which keeps
        the theory verifiers well-posed.
        """
        phi = np.asarray(phi, dtype=np.float64)
        W = np.asarray(W, dtype=np.float64)
        y = np.atleast_2d(np.asarray(y, dtype=np.float64))
        if W.shape != phi.shape or y.shape[1] != phi.shape[0]:
            raise ValueError(f"shape mismatch: Phi {phi.shape}, W {W.shape}, y {y.shape}")
        B, N = y.shape[0], phi.shape[1]
        P = tape.watch(self.params) if tape is not None else self.params
        rec = TraceRecorder(B, x_star, keep_iterates)
        phi_t = phi.T
        x = np.zeros((B, N))
        state = self._start(P, B)
        for k in range(self.K):
            res = matmul(x, phi_t) - y
            upd = matmul(res, W)
            theta, gamma, state = self._layer(k, P, x, res, upd, state)
            if clamp_theta:
                theta = clamp_min(theta, 0.0)
            x = _support_threshold(x - gamma * upd, theta, exemption_count(self.support[k], N))
            vres, vupd = value(res), value(upd)
            rec.layer(value(x), np.abs(vres).sum(axis=1), np.abs(vupd).sum(axis=1),
                      value(theta), value(gamma))
        return rec.finish(x, leaves=P if tape is not None else None)


class Alista(UnrolledModel):
    kind = "alista"

    def __init__(self, K: int, support=None, params=None, theta0: float = 0.1, gamma0: float = 1.0):
        self.theta0, self.gamma0 = theta0, gamma0
        super().__init__(K, support, params)

    def init_params(self, rng=None):
        return {"theta": np.full(self.K, self.theta0), "gamma": np.full(self.K, self.gamma0)}

    def _layer(self, k, P, x, res, upd, state):
        return P["theta"][k], P["gamma"][k], state


class AlistaAT(Alista):
    """ALISTA with componentwise thresholds theta_k / (1 + |x_i| / eps)."""

    kind = "alista_at"

    def __init__(self, K: int, support=None, params=None, eps: float = 0.1, **kw):
        if not eps > 0:
            raise ValueError(f"eps must be positive, got {eps}")
        self.eps = eps
        super().__init__(K, support, params, **kw)

    def hyper(self):
        return {"eps": self.eps}

    def _layer(self, k, P, x, res, upd, state):
        weight = 1.0 / (1.0 + absolute(x) * (1.0 / self.eps))
        return P["theta"][k] * weight, P["gamma"][k], state


class NaAlista(UnrolledModel):
    """ALISTA whose per-sample (theta, gamma) come from an LSTM cell."""

    kind = "na_alista"

    def __init__(self, K: int, H: int, support=None, params=None, inputs=FEATURES,
                 seed: int = 0, input_norm: str = "none"):
        if H < 1:
            raise ValueError("H must be at least 1")
        inputs = tuple(inputs)
        if not inputs or any(f not in FEATURES for f in inputs) or len(set(inputs)) != len(inputs):
            raise ValueError(f"inputs must be a non-empty subset of {FEATURES}, got {inputs}")
        if input_norm not in INPUT_NORMS:
            raise ValueError(f"input_norm must be one of {INPUT_NORMS}, got {input_norm!r}")
        self.H, self.inputs, self.seed, self.input_norm = H, inputs, seed, input_norm
        super().__init__(K, support, params)

    def hyper(self):
        return {"H": self.H, "inputs": list(self.inputs), "input_norm": self.input_norm}

    def init_params(self, rng=None):
        rng = np.random.default_rng([self.seed, 17]) if rng is None else rng
        H, D = self.H, len(self.inputs)
        a = 1.0 / math.sqrt(H)
        b = rng.uniform(-a, a, 4 * H)
        b[H:2 * H] = 1.0  # forget gate
        return {
            "Wx": rng.uniform(-a, a, (D, 4 * H)),
            "Wh": rng.uniform(-a, a, (H, 4 * H)),
            "b": b,
            "U": rng.uniform(-a, a, (2, H)),
            "c0": np.zeros((1, H)),
            "h0": np.zeros((1, H)),
        }

    def _start(self, P, B):
        return P["c0"], P["h0"]

    def cell(self, P, inp, c, h):
        """One LSTM step; gate blocks are ordered input, forget, candidate, output."""
        H = self.H
        z = matmul(inp, P["Wx"]) + matmul(h, P["Wh"]) + P["b"]
        i = sigmoid(z[:, :H])
        f = sigmoid(z[:, H:2 * H])
        g = tanh(z[:, 2 * H:3 * H])
        o = sigmoid(z[:, 3 * H:])
        c = f * c + i * g
        return c, o * tanh(c)

    def _layer(self, k, P, x, res, upd, state):
        c, h = state
        r, u = l1_norm(res, axis=1, keepdims=True), l1_norm(upd, axis=1, keepdims=True)
        if self.input_norm != "none":
            r, u = r * (1.0 / res.shape[1]), u * (1.0 / upd.shape[1])
        if self.input_norm == "log":
            r, u = log(r + LOG_FLOOR), log(u + LOG_FLOOR)
        feats = {"r": r, "u": u}
        parts = [feats[f] for f in self.inputs]
        inp = parts[0] if len(parts) == 1 else concat(parts, axis=1)
        c, h = self.cell(P, inp, c, h)
        out = softsign(matmul(c, P["U"].T))
        return out[:, 0:1], out[:, 1:2], (c, h)


def build_model(kind: str, K: int, *, H: int = 128, inputs=FEATURES, support=None,
                eps: float = 0.1, seed: int = 0, params=None, theta0: float = 0.1,
                gamma0: float = 1.0, input_norm: str = "none") -> UnrolledModel:
    if kind == "alista":
        return Alista(K, support, params, theta0=theta0, gamma0=gamma0)
    if kind == "alista_at":
        return AlistaAT(K, support, params, eps=eps, theta0=theta0, gamma0=gamma0)
    if kind == "na_alista":
        return NaAlista(K, H, support, params, inputs=inputs, seed=seed, input_norm=input_norm)
    raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")


# functional entry points ---------------------------------------------------------

def alista_forward(phi, W, params: dict, y, K: int, ss=None, **kw) -> IterationTrace:
    return Alista(K, ss, params).forward(phi, W, y, **kw)


def alista_at_forward(phi, W, params: dict, eps: float, y, K: int, ss=None, **kw) -> IterationTrace:
    return AlistaAT(K, ss, params, eps=eps).forward(phi, W, y, **kw)


def na_alista_forward(phi, W, cell: dict, y, K: int, ss=None, inputs=FEATURES, **kw) -> IterationTrace:
    H = cell["Wh"].shape[0]
    return NaAlista(K, H, ss, cell, inputs=inputs).forward(phi, W, y, **kw)
