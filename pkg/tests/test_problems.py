import math

import numpy as np
import pytest

from unrollcs import container
from unrollcs.dictionary import generalized_coherence
from unrollcs.problems import (
    ConfigurationError,
    ProblemEnsemble,
    add_noise,
    fixed_test_set,
    gen_measurement_matrix,
    gen_sparse_batch,
    load_test_set,
)


def test_columns_unit_norm():
    for M, N, seed in [(3, 5, 0), (50, 200, 1), (250, 500, 2)]:
        phi = gen_measurement_matrix(M, N, seed)
        np.testing.assert_allclose(np.linalg.norm(phi, axis=0), 1.0, atol=1e-12)


def test_measurement_matrix_deterministic():
    assert gen_measurement_matrix(20, 40, 7).tobytes() == gen_measurement_matrix(20, 40, 7).tobytes()


def test_measurement_matrix_rejects_m_above_n():
    with pytest.raises(ConfigurationError):
        gen_measurement_matrix(5, 4, 0)


def test_coherence_exceeds_welch_bound():
    phi = gen_measurement_matrix(250, 500, 0)
    assert generalized_coherence(phi, phi) >= 0.0447


def test_dense_when_s_equals_n():
    x = gen_sparse_batch(30, 30, 20, seed=1)
    assert np.count_nonzero(x) == x.size


def test_support_size_binomial_concentration():
    N, S, B = 200, 8.0, 10_000
    x = gen_sparse_batch(N, S, B, seed=3)
    sizes = np.count_nonzero(x, axis=1)
    # mean of B binomial(N, S/N) variables: 4 standard errors
    half_width = 4 * math.sqrt(S * (1 - S / N) / B)
    assert abs(sizes.mean() - S) < half_width


def test_reference_sparsity_mean():
    sizes = np.count_nonzero(gen_sparse_batch(1000, 50, 2000, seed=11), axis=1)
    assert abs(sizes.mean() - 50) < 4 * math.sqrt(50 * 0.95 / 2000)


def test_sparse_batch_rejects_s_above_n():
    with pytest.raises(ConfigurationError):
        gen_sparse_batch(10, 11, 2, seed=0)


def test_shards_concatenate_to_full_batch():
    full = gen_sparse_batch(50, 5, 12, seed=4)
    shards = [gen_sparse_batch(50, 5, 4, seed=4, start=s) for s in (0, 4, 8)]
    assert np.concatenate(shards).tobytes() == full.tobytes()


class TestNoise:
    def setup_method(self):
        ens = ProblemEnsemble.generate(50, 200, 8, None, 0)
        x = gen_sparse_batch(200, 8, 10_000, seed=5)
        self.clean = x @ ens.phi.T

    def test_40db_ratio(self):
        z = add_noise(self.clean, 40.0, 1) - self.clean
        ratio = np.mean(np.sum(self.clean**2, 1)) / np.mean(np.sum(z**2, 1))
        assert abs(ratio / 1e4 - 1) < 0.05

    def test_0db(self):
        z = add_noise(self.clean, 0.0, 2) - self.clean
        ratio = np.mean(np.sum(self.clean**2, 1)) / np.mean(np.sum(z**2, 1))
        assert abs(ratio - 1) < 0.05

    def test_large_snr_vanishes(self):
        z = add_noise(self.clean, 300.0, 3) - self.clean
        assert np.max(np.abs(z)) < 1e-12

    def test_all_zero_batch_rejected(self):
        with pytest.raises(ConfigurationError):
            add_noise(np.zeros((3, 4)), 40.0, 0)


class TestTestSet:
    def test_round_trip_bit_identical(self, tmp_path):
        ens = ProblemEnsemble.generate(10, 30, 3, 40.0, 9)
        batch = fixed_test_set(ens, 50, path=tmp_path / "test.ucs")
        loaded = load_test_set(tmp_path / "test.ucs", ens)
        assert loaded.x.tobytes() == batch.x.tobytes()
        assert loaded.y.tobytes() == batch.y.tobytes()

    def test_default_size(self):
        ens = ProblemEnsemble.generate(5, 10, 2, None, 0)
        assert len(fixed_test_set(ens)) == 10_000

    def test_seed_changes_supports(self):
        ens = ProblemEnsemble.generate(10, 30, 3, 40.0, 9)
        a, b = fixed_test_set(ens, 20, seed=1), fixed_test_set(ens, 20, seed=2)
        assert not np.array_equal(a.x != 0, b.x != 0)

    def test_corruption_detected(self, tmp_path):
        ens = ProblemEnsemble.generate(10, 30, 3, 40.0, 9)
        path = tmp_path / "test.ucs"
        fixed_test_set(ens, 5, path=path)
        blob = bytearray(path.read_bytes())
        blob[-3] ^= 0xFF
        path.write_bytes(bytes(blob))
        with pytest.raises(container.ContainerError):
            load_test_set(path)

    def test_ensemble_round_trip_keeps_unit_columns(self, tmp_path):
        ens = ProblemEnsemble.generate(10, 30, 3, 20.0, 1)
        ens.save(tmp_path / "ens.ucs")
        back = ProblemEnsemble.load(tmp_path / "ens.ucs")
        assert back.phi.tobytes() == ens.phi.tobytes()
        np.testing.assert_allclose(np.linalg.norm(back.phi, axis=0), 1.0, atol=1e-12)
        assert (back.S, back.snr_db, back.seed) == (3.0, 20.0, 1)

    def test_mismatched_phi_rejected(self, tmp_path):
        a = ProblemEnsemble.generate(10, 30, 3, 20.0, 1)
        b = ProblemEnsemble.generate(10, 30, 3, 20.0, 2)
        fixed_test_set(a, 5, path=tmp_path / "t.ucs")
        with pytest.raises(container.ContainerError):
            load_test_set(tmp_path / "t.ucs", b)
