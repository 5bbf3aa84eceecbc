"""Subcommand implementations.

Layout under the output directory::

    seed_<s>/ensemble.ucs, testset.ucs, dictionary.ucs, data.json
    seed_<s>/<run>/checkpoint.ucs, curve.csv
    seed_<s>/diagnose/*.csv
    eval.csv, ablation.csv, sweep/<axis>-<value>/..., sweep.csv
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import container
from ..dictionary import (
    compute_dictionary,
    cost_ratio,
    load_dictionary,
    max_admissible_sparsity,
    save_dictionary,
    welch_bound,
)
from ..problems import Batch, ProblemEnsemble, fixed_test_set, load_test_set
from ..reporting import write_csv, write_sidecar
from ..solvers import fista_run, ista_run
from ..training import (
    Checkpoint,
    TrainConfig,
    assumption_series,
    correlation_diagnostics,
    evaluate,
    nmse,
    parameter_stats,
    save_curve,
    train,
)
from ..training.diagnostics import (
    CORRELATION_COLUMNS,
    PARAM_COLUMNS,
    RATIO_COLUMNS,
    SCATTER_COLUMNS,
)
from .config import ConfigError, ExperimentConfig

log = logging.getLogger("unrollcs")

ABLATION_INPUTS = (("r",), ("u",), ("r", "u"))
EVAL_COLUMNS = ["model", "seed", "K", "nmse_db"]
ABLATION_COLUMNS = ["inputs", "seed", "nmse_db"]
SWEEP_COLUMNS = ["axis", "value", "model", "seed", "nmse_db", "cost_ratio", "status", "error"]


class RunError(RuntimeError):
    """Missing artifacts or a failed computation (exit code 2)."""


@dataclass
class SeedData:
    ensemble: ProblemEnsemble
    test: Batch
    W: np.ndarray


def _header(cfg: ExperimentConfig, **extra) -> dict:
    return {"config_hash": cfg.hash(), **extra}


def seed_dir(root: Path, seed: int) -> Path:
    return Path(root) / f"seed_{seed}"


def run_name(kind: str, inputs=None) -> str:
    return kind if inputs is None else f"{kind}_inputs-{''.join(inputs)}"


# -- data and dictionary ----------------------------------------------------------

def build_data(cfg: ExperimentConfig, seed: int) -> tuple[ProblemEnsemble, Batch]:
    e = cfg.ensemble
    ens = ProblemEnsemble.generate(e["M"], e["N"], e["S"], cfg.snr_db, seed)
    return ens, fixed_test_set(ens, e["test_size"])


def _existing_hash(path: Path, key: str = "data_hash"):
    if not path.exists():
        return None
    return container.load(path)[1].get(key)


def gen_data(cfg: ExperimentConfig, root: Path, force: bool = False) -> int:
    for seed in cfg.seeds:
        d = seed_dir(root, seed)
        want = cfg.data_hash(seed)
        have = _existing_hash(d / "ensemble.ucs")
        if have == want and (d / "testset.ucs").exists() and not force:
            log.info("seed %d: data up to date (%s)", seed, want)
            continue
        if have is not None and have != want and not force:
            raise ConfigError(f"{d} holds data from a different configuration; "
                              "pass --force to overwrite")
        ens, _ = build_data(cfg, seed)
        extra = {"data_hash": want, "config_hash": cfg.hash()}
        d.mkdir(parents=True, exist_ok=True)
        ens.save(d / "ensemble.ucs", extra)
        fixed_test_set(ens, cfg.ensemble["test_size"], path=d / "testset.ucs", extra=extra)
        write_sidecar(d / "data.json", data_hash=want, config_hash=cfg.hash(),
                      phi_checksum=ens.meta()["phi_checksum"], M=ens.M, N=ens.N, S=ens.S,
                      snr_db=ens.snr_db, seed=seed, test_size=cfg.ensemble["test_size"])
        log.info("seed %d: wrote ensemble and %d-sample test set to %s", seed,
                 cfg.ensemble["test_size"], d)
    return 0


def load_ensemble(cfg: ExperimentConfig, root: Path, seed: int) -> tuple[ProblemEnsemble, Batch]:
    d = seed_dir(root, seed)
    if not (d / "ensemble.ucs").exists() or not (d / "testset.ucs").exists():
        raise RunError(f"no data for seed {seed} in {d}; run `unrollcs gen-data` first")
    want = cfg.data_hash(seed)
    if _existing_hash(d / "ensemble.ucs") != want:
        raise ConfigError(f"data in {d} was generated from a different configuration; "
                          "rerun `unrollcs gen-data --force`")
    ens = ProblemEnsemble.load(d / "ensemble.ucs")
    return ens, load_test_set(d / "testset.ucs", ens)


def compute_dict(cfg: ExperimentConfig, root: Path, force: bool = False) -> int:
    for seed in cfg.seeds:
        ens, _ = load_ensemble(cfg, root, seed)
        path = seed_dir(root, seed) / "dictionary.ucs"
        want = cfg.data_hash(seed)
        have = _existing_hash(path)
        if have == want and not force:
            log.info("seed %d: dictionary up to date", seed)
            continue
        dico = compute_dictionary(ens.phi)
        save_dictionary(path, dico, ens.phi, {"data_hash": want, "config_hash": cfg.hash()})
        bound = welch_bound(ens.M, ens.N)
        write_sidecar(path.with_suffix(".json"), coherence=dico.coherence, welch_bound=bound,
                      max_admissible_sparsity=max_admissible_sparsity(dico.coherence),
                      iterations_run=dico.iterations_run, config_hash=cfg.hash())
        log.info("seed %d: generalized coherence %.4f (Welch bound %.4f) after %d iterations",
                 seed, dico.coherence, bound, dico.iterations_run)
    return 0


def load_seed(cfg: ExperimentConfig, root: Path, seed: int) -> SeedData:
    ens, test = load_ensemble(cfg, root, seed)
    path = seed_dir(root, seed) / "dictionary.ucs"
    if not path.exists():
        raise RunError(f"no dictionary for seed {seed}; run `unrollcs compute-dict` first")
    return SeedData(ens, test, load_dictionary(path, ens.phi).W)


# -- training and evaluation --------------------------------------------------------

def _train_one(tc: TrainConfig, data: SeedData, run_dir: Path, cfg: ExperimentConfig,
               force: bool) -> Checkpoint:
    ckpt_path = run_dir / "checkpoint.ucs"
    resume = None
    if ckpt_path.exists() and not force:
        have = Checkpoint.load(ckpt_path)
        if have.config.hash() != tc.hash():
            raise ConfigError(f"{ckpt_path} was trained with a different configuration; "
                              "pass --force to retrain")
        if have.epoch >= tc.epochs:
            log.info("%s: checkpoint up to date", run_dir)
            return have
        resume = have
    run_dir.mkdir(parents=True, exist_ok=True)
    result = train(tc, data.ensemble, data.W, data.test, resume=resume, checkpoint_path=ckpt_path)
    save_curve(run_dir / "curve.csv", result.curve,
               _header(cfg, train_config_hash=tc.hash(), model=tc.model, seed=tc.seed))
    log.info("%s: final test NMSE %.2f dB", run_dir, result.final_nmse)
    return result.checkpoint


def _runs(cfg: ExperimentConfig, ablation: bool):
    if ablation:
        return [("na_alista", inputs) for inputs in ABLATION_INPUTS]
    return [(kind, None) for kind in cfg.model["kinds"]]


def train_cmd(cfg: ExperimentConfig, root: Path, force: bool = False, ablation: bool = False) -> int:
    for seed in cfg.seeds:
        data = load_seed(cfg, root, seed)
        for kind, inputs in _runs(cfg, ablation):
            tc = cfg.train_config(kind, seed, inputs)
            _train_one(tc, data, seed_dir(root, seed) / run_name(kind, inputs), cfg, force)
    return 0


def load_checkpoint(cfg: ExperimentConfig, root: Path, seed: int, kind: str, inputs=None) -> Checkpoint:
    path = seed_dir(root, seed) / run_name(kind, inputs) / "checkpoint.ucs"
    if not path.exists():
        raise RunError(f"no checkpoint at {path}; run `unrollcs train` first")
    try:
        return Checkpoint.load(path, expect_hash=cfg.train_config(kind, seed, inputs).hash())
    except container.ContainerError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def baseline_nmse(data: SeedData, K: int, lam: float) -> dict[str, float]:
    y, x = data.test.y, data.test.x
    return {"ista": nmse(ista_run(data.ensemble.phi, y, lam, K, keep_iterates=False).final, x),
            "fista": nmse(fista_run(data.ensemble.phi, y, lam, K, keep_iterates=False).final, x)}


def _median_rows(rows, key, value="nmse_db"):
    groups: dict[str, list[float]] = {}
    for row in rows:
        groups.setdefault(row[key], []).append(row[value])
    return {k: float(np.median(v)) for k, v in groups.items()}


def eval_cmd(cfg: ExperimentConfig, root: Path, ablation: bool = False) -> int:
    K, lam = cfg.model["K"], cfg.data["baselines"]["lam"]
    rows = []
    for seed in cfg.seeds:
        data = load_seed(cfg, root, seed)
        for kind, inputs in _runs(cfg, ablation):
            model = load_checkpoint(cfg, root, seed, kind, inputs).model()
            score = evaluate(model, data.ensemble.phi, data.W, data.test)
            if ablation:
                rows.append({"inputs": ",".join(inputs), "seed": seed, "nmse_db": score})
            else:
                rows.append({"model": kind, "seed": seed, "K": K, "nmse_db": score})
        if not ablation:
            for name, score in baseline_nmse(data, K, lam).items():
                rows.append({"model": name, "seed": seed, "K": K, "nmse_db": score})
    key = "inputs" if ablation else "model"
    medians = _median_rows(rows, key)
    for name, med in medians.items():
        print(f"{name:>16s}  median NMSE {med:8.2f} dB over {len(cfg.seeds)} seed(s)")
    target = root / ("ablation.csv" if ablation else "eval.csv")
    write_csv(target, rows, ABLATION_COLUMNS if ablation else EVAL_COLUMNS,
              _header(cfg, baseline_lambda=lam))
    write_sidecar(target.with_suffix(".json"), config=cfg.record(), config_hash=cfg.hash(),
                  medians=medians)
    return 0


# -- sweeps ------------------------------------------------------------------------------

def sweep_point(cfg: ExperimentConfig, point_dir: Path, seed: int, force: bool) -> list[dict]:
    """Generate, train and evaluate every configured model at one sweep point."""
    ens, test = build_data(cfg, seed)
    data = SeedData(ens, test, compute_dictionary(ens.phi).W)
    K, H = cfg.model["K"], cfg.model["H"]
    out = []
    for kind in cfg.model["kinds"]:
        tc = cfg.train_config(kind, seed)
        ckpt = _train_one(tc, data, seed_dir(point_dir, seed) / kind, cfg, force)
        out.append((kind, evaluate(ckpt.model(), ens.phi, data.W, test)))
    out.extend(baseline_nmse(data, K, cfg.data["baselines"]["lam"]).items())
    return [{"model": k, "seed": seed, "nmse_db": v, "cost_ratio": cost_ratio(H, ens.M, ens.N),
             "status": "ok", "error": ""} for k, v in out]


def sweep_cmd(cfg: ExperimentConfig, root: Path, force: bool = False) -> int:
    axis = cfg.data["sweep"]["axis"]
    values = cfg.data["sweep"]["values"] if axis != "none" else [None]
    target = root / "sweep.csv"
    rows, failures = [], []
    for value in values:
        point = cfg.with_point(axis, value) if value is not None else cfg
        point_dir = root / "sweep" / (f"{axis}-{value}" if value is not None else "single")
        for seed in cfg.seeds:
            base = {"axis": axis, "value": "" if value is None else value}
            try:
                rows.extend({**base, **r} for r in sweep_point(point, point_dir, seed, force))
            except (ConfigError, KeyboardInterrupt):
                raise
            except Exception as exc:  # keep completed points, record the failure
                log.error("sweep point %s=%s seed %d failed: %s", axis, value, seed, exc)
                failures.append((value, seed, str(exc)))
                rows.append({**base, "model": "*", "seed": seed, "nmse_db": float("nan"),
                             "cost_ratio": float("nan"), "status": "failed", "error": str(exc)})
            write_csv(target, rows, SWEEP_COLUMNS, _header(cfg, axis=axis))
    write_sidecar(target.with_suffix(".json"), x=axis if axis != "none" else None, y="nmse_db",
                  group=["model", "seed"], config=cfg.record(), config_hash=cfg.hash(),
                  failures=[{"value": v, "seed": s, "error": e} for v, s, e in failures])
    if failures:
        raise RunError(f"{len(failures)} sweep point(s) failed; completed points are in {target}")
    return 0


# -- diagnostics ---------------------------------------------------------------------------

def diagnose_cmd(cfg: ExperimentConfig, root: Path, untrained: bool = False) -> int:
    pairs = [tuple(p) for p in cfg.data["diagnose"]["pairs"]]
    for seed in cfg.seeds:
        data = load_seed(cfg, root, seed)
        d = seed_dir(root, seed) / "diagnose"
        models = {}
        for kind in cfg.model["kinds"]:
            if untrained:
                models[kind] = cfg.train_config(kind, seed).build_model()
            else:
                models[kind] = load_checkpoint(cfg, root, seed, kind).model()
        adaptive = models.get("na_alista")
        report = correlation_diagnostics(data.ensemble, data.W, adaptive, pairs if adaptive else (),
                                         test=data.test)
        header = _header(cfg, seed=seed, trained=not untrained)
        write_csv(d / "correlation.csv", report.correlations, CORRELATION_COLUMNS, header)
        write_csv(d / "scatter.csv", report.scatter, SCATTER_COLUMNS, header)
        write_sidecar(d / "scatter.json", x="x", y="y", facet=["figure", "case"],
                      skipped_pairs=[list(p) for p in report.skipped], config_hash=cfg.hash())
        for row in report.correlations:
            print(f"seed {seed}  {row['figure']:>11s} {row['case']:>6s}  pearson {row['pearson']:.3f}")
        for kind, model in models.items():
            trace = model.forward(data.ensemble.phi, data.W, data.test.y, x_star=data.test.x,
                                  keep_iterates=False)
            write_csv(d / f"{kind}_parameters.csv", parameter_stats(trace), PARAM_COLUMNS,
                      {**header, "model": kind})
            write_csv(d / f"{kind}_assumption.csv", assumption_series(trace, data.test.x),
                      RATIO_COLUMNS, {**header, "model": kind})
    return 0

