from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np


@dataclass
class IterationTrace:
    """Per-layer record of a K-iteration recovery run on a batch.

    Layer ``k`` (0-based) maps the input iterate ``x^(k)`` to ``x^(k+1)``
    using ``theta[k]`` and ``gamma[k]``; ``r[k]`` and ``u[k]`` are the l1
    residual proxies evaluated at the layer input.  ``x`` holds the K layer
    outputs (``x^(1)..x^(K)``) when iterates were kept.  For componentwise
    thresholds ``theta`` holds the per-sample maximum.
    """

    output: object  # final iterate; a Var when recorded on a tape
    r: np.ndarray  # (K, B)
    u: np.ndarray  # (K, B)
    theta: np.ndarray  # (K, B)
    gamma: np.ndarray  # (K, B)
    support_size: np.ndarray  # (K, B) nonzeros of each layer output
    x: np.ndarray | None = None  # (K, B, N)
    err_l1: np.ndarray | None = None  # (K + 1, B), ||x^(k) - x*||_1 for k = 0..K
    err_l2: np.ndarray | None = None  # (K + 1, B)
    extras: dict = field(default_factory=dict)

    @property
    def K(self) -> int:
        return self.r.shape[0]

    @property
    def final(self) -> np.ndarray:
        out = self.output
        return out.value if hasattr(out, "tape") else np.asarray(out)

    def iterates(self) -> np.ndarray:
        """x^(0)..x^(K) stacked, shape (K + 1, B, N)."""
        if self.x is None:
            raise ValueError("run was made with keep_iterates=False")
        return np.concatenate([np.zeros_like(self.x[:1]), self.x], axis=0)


class TraceRecorder:
    """Accumulates per-layer statistics during a forward pass."""

    def __init__(self, B: int, x_star: np.ndarray | None, keep_iterates: bool):
        self.B = B
        self.x_star = x_star
        self.keep = keep_iterates
        self.r, self.u, self.theta, self.gamma, self.support, self.xs = [], [], [], [], [], []
        self.l1, self.l2 = [], []
        if x_star is not None:
            self._errors(np.zeros_like(x_star))

    def _errors(self, x):
        d = x - self.x_star
        self.l1.append(np.abs(d).sum(axis=1))
        self.l2.append(np.sqrt((d * d).sum(axis=1)))

    def layer(self, x_out, r, u, theta, gamma):
        x_out = np.asarray(x_out)
        self.r.append(np.broadcast_to(np.ravel(r), (self.B,)).copy())
        self.u.append(np.broadcast_to(np.ravel(u), (self.B,)).copy())
        theta = np.asarray(theta, dtype=np.float64)
        if theta.ndim == 2 and theta.shape[1] > 1:
            theta = theta.max(axis=1)
        self.theta.append(np.broadcast_to(np.ravel(theta), (self.B,)).copy())
        self.gamma.append(np.broadcast_to(np.ravel(np.asarray(gamma, dtype=np.float64)), (self.B,)).copy())
        self.support.append(np.count_nonzero(x_out, axis=1))
        if self.keep:
            self.xs.append(x_out.copy())
        if self.x_star is not None:
            self._errors(x_out)

    def finish(self, output, **extras) -> IterationTrace:
        return IterationTrace(
            output=output,
            r=np.array(self.r), u=np.array(self.u),
            theta=np.array(self.theta), gamma=np.array(self.gamma),
            support_size=np.array(self.support),
            x=np.array(self.xs) if self.keep else None,
            err_l1=np.array(self.l1) if self.l1 else None,
            err_l2=np.array(self.l2) if self.l2 else None,
            extras=extras,
        )


TRACE_COLUMNS = ["k", "nmse_db", "r", "u", "theta", "gamma", "support_size", "bound_slack"]


def trace_rows(trace: IterationTrace, x_star: np.ndarray | None = None,
               slack: np.ndarray | None = None) -> list[dict]:
    """One summary row per iteration (batch means; ``bound_slack`` is the batch minimum)."""
    rows = []
    energy = float(np.mean(np.sum(x_star**2, axis=1))) if x_star is not None else None
    for k in range(trace.K):
        row = {
            "k": k + 1,
            "nmse_db": "",
            "r": float(trace.r[k].mean()),
            "u": float(trace.u[k].mean()),
            "theta": float(trace.theta[k].mean()),
            "gamma": float(trace.gamma[k].mean()),
            "support_size": float(trace.support_size[k].mean()),
            "bound_slack": "" if slack is None else float(np.min(slack[k])),
        }
        if energy and trace.err_l2 is not None:
            err = float(np.mean(trace.err_l2[k + 1] ** 2))
            row["nmse_db"] = 10.0 * np.log10(max(err / energy, 1e-15))
        rows.append(row)
    return rows


def trace_to_csv(trace: IterationTrace, x_star=None, slack=None) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=TRACE_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in trace_rows(trace, x_star, slack):
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()
