"""End-to-end training of the unrolled solvers with Adam.

Training data is streamed: epoch ``e`` draws rows
``e * samples_per_epoch .. (e + 1) * samples_per_epoch - 1`` of the seeded
training stream, so a run resumed from a checkpoint sees exactly the batches
an uninterrupted run would.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .. import container
from ..numerics import Tape
from ..problems import STREAM_TRAIN, Batch, ProblemEnsemble
from ..solvers import build_model, support_schedule
from ..solvers.unrolled import FEATURES, MODEL_KINDS, UnrolledModel
from .adam import Adam
from .losses import mse_loss, nmse

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    def __init__(self, message: str, checkpoint: "Checkpoint | None" = None):
        super().__init__(message)
        self.checkpoint = checkpoint


@dataclass
class TrainConfig:
    model: str = "na_alista"
    K: int = 16
    H: int = 128
    inputs: tuple[str, ...] = FEATURES
    input_norm: str = "none"
    p_max: float = 1.2
    eps: float = 0.1
    theta_init: float = 0.1
    gamma_init: float = 1.0
    epochs: int = 400
    samples_per_epoch: int = 50_000
    batch_size: int = 512
    learning_rate: float = 2e-4
    lr_milestones: tuple[float, ...] = (0.5, 0.75)
    lr_decay: float = 0.5
    betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    seed: int = 0
    eval_every: int = 1
    eval_chunk: int = 2000

    def __post_init__(self):
        self.inputs = tuple(self.inputs)
        self.betas = tuple(self.betas)
        self.lr_milestones = tuple(self.lr_milestones)
        if self.model not in MODEL_KINDS:
            raise ValueError(f"model must be one of {MODEL_KINDS}, got {self.model!r}")
        for name in ("K", "H", "samples_per_epoch", "batch_size", "eval_every"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.epochs < 0 or not self.learning_rate > 0:
            raise ValueError("epochs must be >= 0 and learning_rate > 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("inputs", "betas", "lr_milestones"):
            d[k] = list(d[k])
        return d

    def hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]

    def lr_at(self, epoch: int) -> float:
        passed = sum(epoch >= math.floor(m * self.epochs) for m in self.lr_milestones)
        return self.learning_rate * self.lr_decay**passed

    def build_model(self) -> UnrolledModel:
        return build_model(self.model, self.K, H=self.H, inputs=self.inputs,
                           support=support_schedule(self.K, self.p_max), eps=self.eps,
                           seed=self.seed, theta0=self.theta_init, gamma0=self.gamma_init,
                           input_norm=self.input_norm)


@dataclass
class Checkpoint:
    config: TrainConfig
    params: dict[str, np.ndarray]
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int
    epoch: int
    extra: dict = field(default_factory=dict)

    def model(self) -> UnrolledModel:
        model = self.config.build_model()
        model.params = {k: v.copy() for k, v in self.params.items()}
        return model

    def save(self, path) -> str:
        arrays = {}
        for prefix, d in (("param", self.params), ("m", self.m), ("v", self.v)):
            arrays.update({f"{prefix}/{k}": a for k, a in d.items()})
        meta = {"kind": "checkpoint", "config": self.config.to_dict(),
                "config_hash": self.config.hash(), "t": self.t, "epoch": self.epoch,
                "extra": self.extra}
        return container.save(path, arrays, meta)

    @classmethod
    def load(cls, path, expect_hash: str | None = None) -> "Checkpoint":
        arrays, meta = container.load(path)
        if meta.get("kind") != "checkpoint":
            raise container.ContainerError(f"{path} is not a checkpoint")
        config = TrainConfig(**meta["config"])
        if config.hash() != meta["config_hash"]:
            raise container.ContainerError("checkpoint config hash does not match its config")
        if expect_hash is not None and meta["config_hash"] != expect_hash:
            raise container.ContainerError(
                f"checkpoint config hash {meta['config_hash']} != expected {expect_hash}")
        split = {"param": {}, "m": {}, "v": {}}
        for name, a in arrays.items():
            prefix, key = name.split("/", 1)
            split[prefix][key] = a
        return cls(config, split["param"], split["m"], split["v"], meta["t"], meta["epoch"],
                   meta.get("extra", {}))


@dataclass
class TrainResult:
    model: UnrolledModel
    checkpoint: Checkpoint
    curve: list[dict]

    @property
    def final_nmse(self) -> float:
        return self.curve[-1]["test_nmse_db"]


def evaluate(model: UnrolledModel, phi, W, test: Batch, chunk: int = 2000) -> float:
    """NMSE (dB) of the model's final iterate on ``test``, processed in chunks."""
    outs = [model.forward(phi, W, test.y[i:i + chunk], keep_iterates=False).final
            for i in range(0, len(test), chunk)]
    return nmse(np.concatenate(outs), test.x)


def train_batches(config: TrainConfig, ensemble: ProblemEnsemble, epoch: int):
    start = epoch * config.samples_per_epoch
    for off in range(0, config.samples_per_epoch, config.batch_size):
        size = min(config.batch_size, config.samples_per_epoch - off)
        yield ensemble.sample(size, config.seed, stream=STREAM_TRAIN, start=start + off)


def train(config: TrainConfig, ensemble: ProblemEnsemble, W: np.ndarray, test: Batch, *,
          resume: Checkpoint | None = None, checkpoint_path=None, progress=None) -> TrainResult:
    """Minimize the batch-mean squared error of the K-th iterate.

    The test NMSE is recorded before the first epoch (epoch 0) and after every
    ``eval_every`` epochs plus the last one.  A non-finite loss aborts with
    :class:`TrainingError` carrying the last good checkpoint, which is also
    written to ``checkpoint_path`` when given.
    """
    phi = ensemble.phi
    model = config.build_model()
    opt = Adam(model.params, config.learning_rate, config.betas, config.adam_eps)
    start_epoch = 0
    if resume is not None:
        if resume.config.hash() != config.hash():
            raise ValueError("checkpoint was produced with a different configuration")
        model.params = {k: a.copy() for k, a in resume.params.items()}
        opt.m = {k: a.copy() for k, a in resume.m.items()}
        opt.v = {k: a.copy() for k, a in resume.v.items()}
        opt.t, start_epoch = resume.t, resume.epoch

    def snapshot(epoch):
        return Checkpoint(config, {k: a.copy() for k, a in model.params.items()},
                          dict(opt.m), dict(opt.v), opt.t, epoch)

    curve = []
    if start_epoch == 0:
        curve.append({"epoch": 0, "train_loss": float("nan"), "lr": config.lr_at(0),
                      "test_nmse_db": evaluate(model, phi, W, test, config.eval_chunk)})
    for epoch in range(start_epoch, config.epochs):
        lr = config.lr_at(epoch)
        losses, weights = [], []
        for batch in train_batches(config, ensemble, epoch):
            tape = Tape()
            trace = model.forward(phi, W, batch.y, tape=tape, keep_iterates=False)
            loss = mse_loss(trace.output, batch.x)
            lval = float(loss.value)
            if not math.isfinite(lval):
                ckpt = snapshot(epoch)
                if checkpoint_path is not None:
                    ckpt.save(checkpoint_path)
                raise TrainingError(f"non-finite loss at epoch {epoch + 1}", ckpt)
            grads = tape.gradients(loss, trace.extras["leaves"])
            model.params = opt.step(model.params, grads, lr)
            losses.append(lval)
            weights.append(len(batch))
        done = epoch + 1
        row = {"epoch": done, "train_loss": float(np.average(losses, weights=weights)), "lr": lr,
               "test_nmse_db": float("nan")}
        if done % config.eval_every == 0 or done == config.epochs:
            row["test_nmse_db"] = evaluate(model, phi, W, test, config.eval_chunk)
        curve.append(row)
        log.info("epoch %d loss %.6g nmse %.3f dB", done, row["train_loss"], row["test_nmse_db"])
        if checkpoint_path is not None:
            snapshot(done).save(checkpoint_path)
        if progress is not None:
            progress(row)
    ckpt = snapshot(max(start_epoch, config.epochs))
    if checkpoint_path is not None:
        ckpt.save(checkpoint_path)
    return TrainResult(model, ckpt, curve)


def save_curve(path, curve: list[dict], header: dict | None = None) -> None:
    from ..reporting import write_csv

    write_csv(path, curve, ["epoch", "train_loss", "test_nmse_db", "lr"], header)
