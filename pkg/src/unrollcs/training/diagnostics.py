"""Correlation and per-iteration diagnostics for trained unrolled solvers.

All functions return plain row dicts ready for :func:`unrollcs.reporting.write_csv`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..problems import STREAM_DIAG, ProblemEnsemble, gen_sparse_batch
from ..solvers.trace import IterationTrace
from ..solvers.verify import assumption_ratio

SCATTER_COLUMNS = ["figure", "case", "x", "y"]
CORRELATION_COLUMNS = ["figure", "case", "pearson", "n"]
PARAM_COLUMNS = ["k", "theta_mean", "theta_std", "gamma_mean", "gamma_std"]
RATIO_COLUMNS = ["k", "ratio_mean", "ratio_std", "err_mean", "err_std"]


def pearson(a, b) -> float:
    """Pearson correlation; NaN when either side is constant or empty."""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.size < 2 or np.std(a) == 0 or np.std(b) == 0:
        return float("nan")
    return float(np.corrcoef(a, b)[0, 1])


@dataclass
class CorrelationReport:
    correlations: list[dict] = field(default_factory=list)
    scatter: list[dict] = field(default_factory=list)
    skipped: list[tuple[int, int]] = field(default_factory=list)

    def get(self, figure: str, case: str) -> float:
        for row in self.correlations:
            if row["figure"] == figure and row["case"] == case:
                return row["pearson"]
        raise KeyError((figure, case))

    def _add(self, figure, case, xs, ys, keep_scatter):
        self.correlations.append({"figure": figure, "case": case, "pearson": pearson(xs, ys),
                                  "n": int(len(xs))})
        if keep_scatter:
            self.scatter.extend({"figure": figure, "case": case, "x": float(a), "y": float(b)}
                                for a, b in zip(xs, ys))


def correlation_diagnostics(ensemble: ProblemEnsemble, W, model=None, pairs=((5, 8),), *,
                            size: int = 10_000, seed: int | None = None, test=None,
                            keep_scatter: bool = True) -> CorrelationReport:
    """Correlation of the residual proxies with the quantities they stand in for.

    Without a model, pairs ``||x*||_1`` with ``r = ||Phi x*||_1`` and
    ``u = ||W^T Phi x*||_1`` for targets at the ensemble sparsity ("sparse")
    and fully dense ("dense").  With a model and a test batch, also pairs
    ``u`` at iterate ``i`` with ``||x^(j) - x*||_1`` for every ``(i, j)`` in
    ``pairs``; pairs outside ``0 <= i < K``, ``0 <= j <= K`` are skipped.
    """
    phi, W = ensemble.phi, np.asarray(W)
    seed = ensemble.seed if seed is None else seed
    report = CorrelationReport()
    for case, S in (("sparse", ensemble.S), ("dense", ensemble.N)):
        x = gen_sparse_batch(ensemble.N, S, size, seed, stream=STREAM_DIAG)
        x = x[np.any(x != 0, axis=1)]
        y = x @ phi.T
        l1 = np.abs(x).sum(axis=1)
        report._add("norm_vs_r", case, l1, np.abs(y).sum(axis=1), keep_scatter)
        report._add("norm_vs_u", case, l1, np.abs(y @ W).sum(axis=1), keep_scatter)
    if model is not None and pairs:
        if test is None:
            raise ValueError("the iterate-pair diagnostic needs a test batch")
        trace = model.forward(phi, W, test.y, x_star=test.x, keep_iterates=False)
        for i, j in pairs:
            if not (0 <= i < trace.K and 0 <= j <= trace.K):
                report.skipped.append((i, j))
                continue
            report._add("u_vs_error", f"{i}_{j}", trace.u[i], trace.err_l1[j], keep_scatter)
    return report


def parameter_stats(trace: IterationTrace) -> list[dict]:
    """Per-layer mean and spread of the thresholds and step sizes over a batch."""
    return [{"k": k + 1,
             "theta_mean": float(trace.theta[k].mean()), "theta_std": float(trace.theta[k].std()),
             "gamma_mean": float(trace.gamma[k].mean()), "gamma_std": float(trace.gamma[k].std())}
            for k in range(trace.K)]


def assumption_series(trace: IterationTrace, x_star, mu: float = 1.0) -> list[dict]:
    """Per-layer ``theta / gamma`` against ``mu ||x^(k) - x*||_1``, both summarized over the batch."""
    ratio, err = assumption_ratio(trace, x_star, mu)
    rows = []
    for k in range(trace.K):
        finite = ratio[k][np.isfinite(ratio[k])]
        rows.append({"k": k + 1,
                     "ratio_mean": float(finite.mean()) if finite.size else float("nan"),
                     "ratio_std": float(finite.std()) if finite.size else float("nan"),
                     "err_mean": float(err[k].mean()), "err_std": float(err[k].std())})
    return rows


def decreasing_from_peak(series) -> bool:
    """True when the last value lies strictly below the series maximum."""
    series = np.asarray(series, dtype=np.float64)
    return bool(series[-1] < series.max())
