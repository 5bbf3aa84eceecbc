import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from unrollcs import container
from unrollcs.dictionary import (
    DivergenceError,
    compute_dictionary,
    cost_ratio,
    generalized_coherence,
    load_dictionary,
    max_admissible_sparsity,
    project,
    save_dictionary,
    surrogate,
    welch_bound,
)
from unrollcs.problems import gen_measurement_matrix


def brute_coherence(W, phi):
    best = 0.0
    for i, j in itertools.product(range(W.shape[1]), repeat=2):
        if i != j:
            best = max(best, abs(float(W[:, i] @ phi[:, j])))
    return best


class TestCoherence:
    def test_identity(self):
        assert generalized_coherence(np.eye(4), np.eye(4)) == 0.0

    def test_duplicate_atom(self):
        phi = gen_measurement_matrix(5, 6, 0)
        phi[:, 3] = phi[:, 1]
        assert generalized_coherence(phi, phi) == pytest.approx(1.0)

    def test_matches_double_loop(self):
        rng = np.random.default_rng(2)
        W, phi = rng.standard_normal((10, 20)), rng.standard_normal((10, 20))
        assert generalized_coherence(W, phi) == pytest.approx(brute_coherence(W, phi), rel=1e-14)


class TestWelch:
    def test_reference_value(self):
        assert welch_bound(250, 500) == pytest.approx(0.04477, abs=1e-4)

    def test_square_and_tiny(self):
        assert welch_bound(7, 7) == 0.0
        assert welch_bound(1, 2) == pytest.approx(1.0)

    def test_rejects_m_above_n(self):
        with pytest.raises(ValueError):
            welch_bound(3, 2)

    @given(st.integers(2, 400), st.data())
    def test_decreasing_in_m(self, N, data):
        M = data.draw(st.integers(1, N - 1))
        assert welch_bound(M + 1, N) < welch_bound(M, N)


class TestAdmissibleSparsity:
    @pytest.mark.parametrize("mu,s", [(0.0447, 11), (1.0, 0), (0.1, 5)])
    def test_values(self, mu, s):
        assert max_admissible_sparsity(mu) == s

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            max_admissible_sparsity(0.0)

    @given(st.floats(1e-4, 1.0))
    def test_is_largest_strict(self, mu):
        s = max_admissible_sparsity(mu)
        bound = (1 + 1 / mu) / 2
        assert s < bound <= s + 1 + 1e-9


def test_cost_ratio_example():
    assert cost_ratio(64, 250, 2000) == pytest.approx(0.008192)


class TestComputeDictionary:
    def test_orthogonal_square_fixed_point(self):
        Q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((6, 6)))
        d = compute_dictionary(Q)
        np.testing.assert_allclose(d.W, Q, atol=1e-12)
        assert d.coherence < 1e-12

    @pytest.mark.parametrize("seed", range(5))
    def test_constraint_and_improvement(self, seed):
        phi = gen_measurement_matrix(50, 200, seed)
        d = compute_dictionary(phi)
        np.testing.assert_allclose(np.sum(d.W * phi, axis=0), 1.0, atol=1e-10)
        assert d.coherence < generalized_coherence(phi, phi)
        assert d.coherence >= welch_bound(50, 200) - 1e-9
        assert d.surrogate_value < surrogate(phi, phi)

    def test_surrogate_monotone(self):
        d = compute_dictionary(gen_measurement_matrix(30, 90, 1))
        tr = np.array(d.surrogate_trace)
        assert np.all(np.diff(tr) <= 1e-12 * tr[:-1])

    def test_matches_closed_form_minimizer(self):
        phi = gen_measurement_matrix(20, 60, 3)
        G = np.linalg.inv(phi @ phi.T)
        Wc = G @ phi
        Wc /= np.sum(Wc * phi, axis=0)
        np.testing.assert_allclose(compute_dictionary(phi).W, Wc, atol=1e-5)

    def test_full_scale_geometry(self):
        phi = gen_measurement_matrix(250, 500, 0)
        d = compute_dictionary(phi, iters=300)
        assert d.coherence >= 0.0447
        assert d.surrogate_value < surrogate(phi, phi)

    def test_projection_idempotent(self):
        phi = gen_measurement_matrix(10, 30, 4)
        W = project(np.random.default_rng(0).standard_normal(phi.shape), phi)
        np.testing.assert_allclose(project(W, phi), W, atol=1e-15)

    def test_divergence_guard(self):
        phi = gen_measurement_matrix(10, 30, 4)
        with pytest.raises(DivergenceError) as info:
            compute_dictionary(phi, step=10.0, iters=200)
        assert len(info.value.trace) >= 10

    def test_persistence_checks_phi(self, tmp_path):
        phi = gen_measurement_matrix(10, 30, 4)
        d = compute_dictionary(phi)
        save_dictionary(tmp_path / "w.ucs", d, phi)
        back = load_dictionary(tmp_path / "w.ucs", phi)
        assert back.W.tobytes() == d.W.tobytes()
        with pytest.raises(container.ContainerError):
            load_dictionary(tmp_path / "w.ucs", gen_measurement_matrix(10, 30, 5))
