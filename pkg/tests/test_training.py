import math

import numpy as np
import pytest

from unrollcs import container
from unrollcs.dictionary import compute_dictionary
from unrollcs.problems import ProblemEnsemble, fixed_test_set
from unrollcs.reporting import csv_body, read_csv
from unrollcs.solvers import Alista, NaAlista
from unrollcs.training import (
    Adam,
    Checkpoint,
    TrainConfig,
    TrainingError,
    adam_step,
    assumption_series,
    correlation_diagnostics,
    decreasing_from_peak,
    evaluate,
    mse_loss,
    nmse,
    parameter_stats,
    pearson,
    save_curve,
    train,
)


@pytest.fixture(scope="module")
def small():
    ens = ProblemEnsemble.generate(12, 40, 3, 40.0, 0)
    return ens, compute_dictionary(ens.phi).W, fixed_test_set(ens, 400)


def tiny_config(**kw):
    base = dict(model="alista", K=4, H=8, epochs=3, samples_per_epoch=96, batch_size=32,
                learning_rate=1e-2, gamma_init=0.5, eval_every=1)
    return TrainConfig(**{**base, **kw})


class TestNmse:
    def test_zero_estimate_is_zero_db(self):
        x = np.random.default_rng(0).normal(size=(5, 7))
        assert nmse(np.zeros_like(x), x) == pytest.approx(0.0)

    def test_minus_forty(self):
        x = np.ones((4, 10))
        assert nmse(x * (1 + 1e-2), x) == pytest.approx(-40.0)

    def test_floor(self):
        x = np.ones((2, 3))
        assert nmse(x, x) == -150.0
        assert nmse(x, x, floor_db=-80.0) == -80.0

    def test_rejects_zero_targets(self):
        with pytest.raises(ValueError):
            nmse(np.ones((2, 3)), np.zeros((2, 3)))

    def test_mse_loss_is_batch_mean_of_squared_error(self):
        a, b = np.array([[1.0, 2.0], [0.0, 0.0]]), np.zeros((2, 2))
        assert float(mse_loss(a, b)) == pytest.approx(2.5)


class TestAdam:
    def test_first_step_moves_by_lr(self):
        p = {"w": np.array([1.0, -1.0])}
        g = {"w": np.array([0.3, -7.0])}
        new, _, _ = adam_step(p, g, {"w": np.zeros(2)}, {"w": np.zeros(2)}, lr=0.1, t=1)
        np.testing.assert_allclose(new["w"], [0.9, -0.9], rtol=1e-6)

    def test_zero_gradient_is_fixed_point(self):
        p = {"w": np.array([2.0])}
        opt = Adam(p, lr=0.5)
        for _ in range(3):
            p = opt.step(p, {"w": np.zeros(1)})
        np.testing.assert_array_equal(p["w"], [2.0])

    def test_hand_computed_two_steps(self):
        p = {"w": np.array([0.0])}
        opt = Adam(p, lr=0.1, betas=(0.9, 0.999), eps=1e-8)
        p = opt.step(p, {"w": np.array([1.0])})
        p = opt.step(p, {"w": np.array([2.0])})
        m = 0.1 * 2.0 + 0.09 * 1.0
        v = 0.001 * 4.0 + 0.000999 * 1.0
        step = (m / (1 - 0.81)) / (math.sqrt(v / (1 - 0.999**2)) + 1e-8)
        np.testing.assert_allclose(p["w"], [-0.1 / (1 + 1e-8) - 0.1 * step], rtol=1e-12)

    def test_minimizes_quadratic(self):
        p = {"w": np.array([3.0, -4.0])}
        opt = Adam(p, lr=0.05)
        for _ in range(2000):
            p = opt.step(p, {"w": 2 * p["w"]})
        np.testing.assert_allclose(p["w"], 0.0, atol=1e-3)


class TestConfig:
    def test_learning_rate_schedule(self):
        cfg = tiny_config(epochs=8, learning_rate=1.0)
        assert [cfg.lr_at(e) for e in range(8)] == [1, 1, 1, 1, 0.5, 0.5, 0.25, 0.25]

    def test_hash_depends_on_values(self):
        assert tiny_config().hash() == tiny_config().hash()
        assert tiny_config().hash() != tiny_config(seed=1).hash()

    def test_rejects_unknown_model(self):
        with pytest.raises(ValueError):
            tiny_config(model="lista")


class TestTrain:
    def test_zero_epochs_records_baseline(self, small):
        ens, W, test = small
        cfg = tiny_config(epochs=0)
        res = train(cfg, ens, W, test)
        assert len(res.curve) == 1 and res.curve[0]["epoch"] == 0
        np.testing.assert_array_equal(res.model.params["theta"], cfg.build_model().params["theta"])
        assert res.final_nmse == pytest.approx(evaluate(cfg.build_model(), ens.phi, W, test))

    def test_loss_finite_and_improves(self, small):
        ens, W, test = small
        res = train(tiny_config(epochs=4), ens, W, test)
        losses = [r["train_loss"] for r in res.curve[1:]]
        assert all(math.isfinite(l) and l >= 0 for l in losses)
        assert res.final_nmse < res.curve[0]["test_nmse_db"]

    @pytest.mark.parametrize("model", ["alista", "alista_at", "na_alista"])
    def test_resume_is_bitwise(self, small, tmp_path, model):
        ens, W, test = small
        cfg = tiny_config(model=model, epochs=4)
        full = train(cfg, ens, W, test)

        class Interrupt(Exception):
            pass

        def stop_at_two(row):
            if row["epoch"] == 2:
                raise Interrupt

        with pytest.raises(Interrupt):
            train(cfg, ens, W, test, checkpoint_path=tmp_path / "c.ucs", progress=stop_at_two)
        mid = Checkpoint.load(tmp_path / "c.ucs", expect_hash=cfg.hash())
        assert mid.epoch == 2
        resumed = train(cfg, ens, W, test, resume=mid, checkpoint_path=tmp_path / "c.ucs")
        for k in full.model.params:
            assert full.model.params[k].tobytes() == resumed.model.params[k].tobytes()
        assert full.curve[-2:] == resumed.curve
        full.checkpoint.save(tmp_path / "full.ucs")
        assert (tmp_path / "full.ucs").read_bytes() == (tmp_path / "c.ucs").read_bytes()

    def test_checkpoint_round_trip_and_hash_check(self, small, tmp_path):
        ens, W, test = small
        res = train(tiny_config(epochs=1), ens, W, test, checkpoint_path=tmp_path / "c.ucs")
        back = Checkpoint.load(tmp_path / "c.ucs", expect_hash=res.checkpoint.config.hash())
        assert back.t == res.checkpoint.t and back.epoch == 1
        with pytest.raises(container.ContainerError):
            Checkpoint.load(tmp_path / "c.ucs", expect_hash="0" * 16)

    def test_resume_rejects_other_config(self, small, tmp_path):
        ens, W, test = small
        res = train(tiny_config(epochs=1), ens, W, test)
        with pytest.raises(ValueError):
            train(tiny_config(epochs=2, seed=5), ens, W, test, resume=res.checkpoint)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_non_finite_loss_aborts_with_checkpoint(self, small, tmp_path):
        ens, W, test = small
        cfg = tiny_config(gamma_init=1e30, K=16, epochs=2)
        with pytest.raises(TrainingError) as info:
            train(cfg, ens, W, test, checkpoint_path=tmp_path / "bad.ucs")
        assert info.value.checkpoint is not None
        assert (tmp_path / "bad.ucs").exists()

    def test_training_is_deterministic(self, small):
        ens, W, test = small
        a = train(tiny_config(model="na_alista"), ens, W, test)
        b = train(tiny_config(model="na_alista"), ens, W, test)
        assert repr(a.curve) == repr(b.curve)

    def test_curve_csv(self, small, tmp_path):
        ens, W, test = small
        res = train(tiny_config(epochs=2), ens, W, test)
        save_curve(tmp_path / "curve.csv", res.curve, {"config_hash": "abc"})
        text = (tmp_path / "curve.csv").read_text()
        assert text.startswith("# config_hash: abc\n")
        assert csv_body(text).splitlines()[0] == "epoch,train_loss,test_nmse_db,lr"
        assert len(read_csv(tmp_path / "curve.csv")) == 3


class TestDiagnostics:
    def test_pearson(self):
        assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
        assert math.isnan(pearson([1, 1, 1], [1, 2, 3]))

    def test_sparse_correlation_exceeds_dense(self, small):
        ens, W, _ = small
        rep = correlation_diagnostics(ens, W, size=2000, keep_scatter=False)
        assert rep.get("norm_vs_r", "sparse") > rep.get("norm_vs_r", "dense")
        assert {r["n"] for r in rep.correlations} <= {2000} | set(range(1900, 2000))

    def test_pairs_need_model_and_skip_invalid(self, small):
        ens, W, test = small
        model = NaAlista(6, 8)
        rep = correlation_diagnostics(ens, W, model, pairs=[(2, 5), (6, 2), (1, 9)], size=200,
                                      test=test)
        assert rep.skipped == [(6, 2), (1, 9)]
        assert math.isfinite(rep.get("u_vs_error", "2_5"))
        with pytest.raises(ValueError):
            correlation_diagnostics(ens, W, model, pairs=[(1, 2)], size=10)

    def test_parameter_and_ratio_rows(self, small):
        ens, W, test = small
        trace = Alista(3).forward(ens.phi, W, test.y, x_star=test.x)
        rows = parameter_stats(trace)
        assert [r["k"] for r in rows] == [1, 2, 3] and rows[0]["theta_std"] == 0.0
        ratio = assumption_series(trace, test.x)
        assert ratio[0]["ratio_mean"] == pytest.approx(0.1)

    def test_decreasing_from_peak(self):
        assert decreasing_from_peak([0.1, 0.3, 0.2])
        assert not decreasing_from_peak([0.1, 0.2, 0.3])
