"""Synthetic compressed-sensing instances.

Targets have an i.i.d. Bernoulli(S/N) support with standard normal
amplitudes, the measurement matrix has i.i.d. standard normal entries with
unit-norm columns, and observations carry additive white Gaussian noise at a
prescribed SNR.

All randomness is keyed on explicit seeds.  Row ``i`` of a target batch is
drawn from its own generator seeded with ``(seed, stream, i)``, so shards
generated independently concatenate to exactly the same batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import container

STREAM_PHI = 0
STREAM_TEST = 1
STREAM_TRAIN = 2
STREAM_NOISE = 3
STREAM_DIAG = 4

DEFAULT_TEST_SIZE = 10_000


class ConfigurationError(ValueError):
    """Inconsistent problem dimensions or parameters."""


@dataclass(frozen=True)
class ProblemEnsemble:
    phi: np.ndarray
    S: float
    snr_db: float | None
    seed: int

    @property
    def M(self) -> int:
        return self.phi.shape[0]

    @property
    def N(self) -> int:
        return self.phi.shape[1]

    @classmethod
    def generate(cls, M: int, N: int, S: float, snr_db: float | None, seed: int) -> "ProblemEnsemble":
        if not 0 < S <= N:
            raise ConfigurationError(f"expected sparsity S={S} must lie in (0, N={N}]")
        return cls(gen_measurement_matrix(M, N, seed), float(S), snr_db, int(seed))

    def meta(self) -> dict:
        return {"M": self.M, "N": self.N, "S": self.S, "snr_db": self.snr_db, "seed": self.seed,
                "phi_checksum": container.checksum({"phi": self.phi})}

    def sample(self, size: int, seed: int, stream: int = STREAM_TRAIN, start: int = 0) -> "Batch":
        x = gen_sparse_batch(self.N, self.S, size, seed, stream=stream, start=start)
        y = x @ self.phi.T
        if self.snr_db is not None:
            y = add_noise(y, self.snr_db, [seed, STREAM_NOISE, stream, start])
        return Batch(x, y)

    def save(self, path, extra: dict | None = None) -> str:
        return container.save(path, {"phi": self.phi},
                              {"kind": "ensemble", **self.meta(), **(extra or {})})

    @classmethod
    def load(cls, path) -> "ProblemEnsemble":
        arrays, meta = container.load(path)
        if meta.get("kind") != "ensemble":
            raise container.ContainerError(f"{path} is not an ensemble file")
        ens = cls(arrays["phi"], meta["S"], meta["snr_db"], meta["seed"])
        check_unit_columns(ens.phi)
        return ens


@dataclass(frozen=True)
class Batch:
    x: np.ndarray  # targets, B x N
    y: np.ndarray  # observations, B x M

    def __len__(self) -> int:
        return self.x.shape[0]


def check_unit_columns(phi: np.ndarray, tol: float = 1e-12) -> None:
    norms = np.linalg.norm(phi, axis=0)
    if np.max(np.abs(norms - 1.0)) > tol:
        raise ConfigurationError("measurement matrix columns are not unit-norm")


def gen_measurement_matrix(M: int, N: int, seed: int) -> np.ndarray:
    if not 1 <= M <= N:
        raise ConfigurationError(f"need 1 <= M <= N, got M={M}, N={N}")
    phi = np.random.default_rng([seed, STREAM_PHI]).standard_normal((M, N))
    return phi / np.linalg.norm(phi, axis=0, keepdims=True)


def gen_sparse_batch(N: int, S: float, B: int, seed: int, stream: int = STREAM_TEST,
                     start: int = 0) -> np.ndarray:
    """B targets with Bernoulli(S/N) support and N(0, 1) nonzero amplitudes."""
    if not 0 < S <= N:
        raise ConfigurationError(f"expected sparsity S={S} must lie in (0, N={N}]")
    if B < 1:
        raise ConfigurationError("batch size must be positive")
    p = S / N
    out = np.empty((B, N))
    for b in range(B):
        rng = np.random.default_rng([seed, stream, start + b])
        support = rng.random(N) < p
        out[b] = rng.standard_normal(N) * support
    return out


def noise_std(y_clean: np.ndarray, snr_db: float) -> float:
    y_clean = np.atleast_2d(y_clean)
    energy = np.mean(np.sum(y_clean**2, axis=1))
    if energy == 0.0:
        raise ConfigurationError("SNR is undefined for an all-zero batch")
    return float(np.sqrt(energy / (y_clean.shape[1] * 10.0 ** (snr_db / 10.0))))


def add_noise(y_clean: np.ndarray, snr_db: float, seed) -> np.ndarray:
    """Add white Gaussian noise scaled to the batch-empirical SNR."""
    sigma = noise_std(y_clean, snr_db)
    rng = np.random.default_rng(seed)
    return y_clean + sigma * rng.standard_normal(np.shape(y_clean))


def fixed_test_set(ensemble: ProblemEnsemble, size: int = DEFAULT_TEST_SIZE, seed: int | None = None,
                   path=None, extra: dict | None = None) -> Batch:
    """Generate the held-out test set once; optionally persist it to ``path``.

    Noise is drawn together with the targets and frozen with them.
    """
    if size < 1:
        raise ConfigurationError("test set size must be positive")
    seed = ensemble.seed if seed is None else seed
    batch = ensemble.sample(size, seed, stream=STREAM_TEST)
    if path is not None:
        container.save(path, {"x": batch.x, "y": batch.y},
                       {"kind": "testset", "size": size, "test_seed": seed, **ensemble.meta(),
                        **(extra or {})})
    return batch


def load_test_set(path, ensemble: ProblemEnsemble | None = None) -> Batch:
    arrays, meta = container.load(path)
    if meta.get("kind") != "testset":
        raise container.ContainerError(f"{path} is not a test-set file")
    if ensemble is not None and meta["phi_checksum"] != ensemble.meta()["phi_checksum"]:
        raise container.ContainerError("test set was generated for a different measurement matrix")
    return Batch(arrays["x"], arrays["y"])
