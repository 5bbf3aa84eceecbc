from __future__ import annotations

import numpy as np


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, estimate: float, iterations: int):
        super().__init__(f"{message} (last estimate {estimate!r} after {iterations} iterations)")
        self.estimate = estimate
        self.iterations = iterations


def largest_eigenvalue(A, tol: float = 1e-8, max_iter: int = 10_000, seed: int = 0) -> float:
    """Largest eigenvalue of a symmetric positive semidefinite matrix by power iteration.

    Stops once the Rayleigh quotient changes by less than ``tol`` relative to
    its value.  The start vector is drawn from a fixed seed so results are
    reproducible.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    v = np.random.default_rng(seed).standard_normal(A.shape[0])
    v /= np.linalg.norm(v)
    rho = prev = 0.0
    for it in range(1, max_iter + 1):
        Av = A @ v
        norm = np.linalg.norm(Av)
        if norm == 0.0:
            return 0.0
        rho = float(v @ Av)
        if it > 1 and abs(rho - prev) <= tol * abs(rho):
            return rho
        prev = rho
        v = Av / norm
    raise ConvergenceError("power iteration did not converge", rho, max_iter)


def lipschitz_constant(phi, **kwargs) -> float:
    """lambda_max(Phi^T Phi), computed on the smaller of the two Gram matrices."""
    phi = np.asarray(phi, dtype=np.float64)
    gram = phi @ phi.T if phi.shape[0] <= phi.shape[1] else phi.T @ phi
    return largest_eigenvalue(gram, **kwargs)
