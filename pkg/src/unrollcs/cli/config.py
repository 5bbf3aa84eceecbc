"""Experiment configuration: profiles, TOML loading, schema validation and hashing."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema

try:
    import tomllib as tomli
except ModuleNotFoundError:  # Python 3.10
    import tomli

from ..solvers.unrolled import FEATURES, INPUT_NORMS, MODEL_KINDS
from ..training import TrainConfig

SWEEP_AXES = ("K", "N", "H", "none")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration (exit code 1)."""


_num = {"type": "number"}
_pos_int = {"type": "integer", "minimum": 1}


def _section(props: dict) -> dict:
    return {"type": "object", "properties": props, "additionalProperties": False}


SCHEMA = _section({
    "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
    "out": {"type": "string"},
    "ensemble": _section({
        "M": _pos_int,
        "N": _pos_int,
        "S": {"type": "number", "exclusiveMinimum": 0},
        # a number in dB, or "inf" for noiseless measurements
        "snr_db": {"oneOf": [_num, {"const": "inf"}]},
        "test_size": _pos_int,
    }),
    "model": _section({
        "kinds": {"type": "array", "items": {"enum": list(MODEL_KINDS)}, "minItems": 1,
                  "uniqueItems": True},
        "K": _pos_int,
        "H": _pos_int,
        "inputs": {"type": "array", "items": {"enum": list(FEATURES)}, "minItems": 1,
                   "uniqueItems": True},
        "input_norm": {"enum": list(INPUT_NORMS)},
        "p_max": {"type": "number", "minimum": 0, "maximum": 100},
        "eps": {"type": "number", "exclusiveMinimum": 0},
        "theta_init": _num,
        "gamma_init": _num,
    }),
    "training": _section({
        "epochs": {"type": "integer", "minimum": 0},
        "samples_per_epoch": _pos_int,
        "batch_size": _pos_int,
        "learning_rate": {"type": "number", "exclusiveMinimum": 0},
        "lr_milestones": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
        "lr_decay": {"type": "number", "exclusiveMinimum": 0},
        "eval_every": _pos_int,
    }),
    "baselines": _section({
        "lam": {"type": "number", "exclusiveMinimum": 0},
    }),
    "sweep": _section({
        "axis": {"enum": list(SWEEP_AXES)},
        "values": {"type": "array", "items": _pos_int},
    }),
    "diagnose": _section({
        "pairs": {"type": "array",
                  "items": {"type": "array", "items": {"type": "integer", "minimum": 0},
                            "minItems": 2, "maxItems": 2}},
    }),
})

PAPER = {
    "seeds": [0, 1, 2],
    "out": "runs/paper",
    "ensemble": {"M": 250, "N": 1000, "S": 50, "snr_db": 40.0, "test_size": 10_000},
    "model": {"kinds": ["alista", "alista_at", "na_alista"], "K": 16, "H": 128,
              "inputs": ["r", "u"], "input_norm": "none", "p_max": 1.2, "eps": 0.1,
              "theta_init": 0.1, "gamma_init": 1.0},
    "training": {"epochs": 400, "samples_per_epoch": 50_000, "batch_size": 512,
                 "learning_rate": 2e-4, "lr_milestones": [0.5, 0.75], "lr_decay": 0.5,
                 "eval_every": 10},
    "baselines": {"lam": 0.4},
    "sweep": {"axis": "none", "values": []},
    "diagnose": {"pairs": [[5, 8]]},
}

DESK = copy.deepcopy(PAPER)
DESK.update({"out": "runs/desk"})
DESK["ensemble"].update({"M": 50, "N": 200, "S": 8})
DESK["model"].update({"kinds": ["alista", "na_alista"], "K": 12, "H": 32, "input_norm": "log",
                      "gamma_init": 0.5})
DESK["training"].update({"epochs": 20, "samples_per_epoch": 5000, "batch_size": 32,
                         "learning_rate": 2e-3, "eval_every": 5})

PROFILES = {"desk": DESK, "paper": PAPER}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        out[k] = _merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else v
    return out


def validate(raw: dict) -> None:
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from None


@dataclass(frozen=True)
class ExperimentConfig:
    data: dict

    @classmethod
    def resolve(cls, path=None, profile: str = "paper", seed: int | None = None,
                out: str | None = None) -> "ExperimentConfig":
        """Profile defaults, overlaid with a TOML file, then with command-line overrides."""
        if profile not in PROFILES:
            raise ConfigError(f"unknown profile {profile!r}; expected one of {sorted(PROFILES)}")
        data = copy.deepcopy(PROFILES[profile])
        if path is not None:
            try:
                with open(path, "rb") as fh:
                    user = tomli.load(fh)
            except FileNotFoundError:
                raise ConfigError(f"config file {path} does not exist") from None
            except tomli.TOMLDecodeError as exc:
                raise ConfigError(f"config file {path} is not valid TOML: {exc}") from None
            validate(user)
            data = _merge(data, user)
        if seed is not None:
            data = _merge(data, {"seeds": [seed]})
        if out is not None:
            data = _merge(data, {"out": out})
        validate(data)
        cfg = cls(data)
        cfg.check()
        return cfg

    def check(self) -> None:
        e, s = self.data["ensemble"], self.data["sweep"]
        if e["M"] > e["N"]:
            raise ConfigError(f"ensemble: M={e['M']} exceeds N={e['N']}")
        if e["S"] > e["N"]:
            raise ConfigError(f"ensemble: expected sparsity S={e['S']} exceeds N={e['N']}")
        if s["axis"] != "none" and not s["values"]:
            raise ConfigError(f"sweep over {s['axis']} needs a non-empty values list")
        if s["axis"] == "N" and any(v < e["M"] or v < e["S"] for v in s["values"]):
            raise ConfigError("sweep: every N must be at least M and S")

    # accessors ------------------------------------------------------------------
    @property
    def seeds(self) -> list[int]:
        return list(self.data["seeds"])

    @property
    def out(self) -> Path:
        return Path(self.data["out"])

    @property
    def ensemble(self) -> dict:
        return self.data["ensemble"]

    @property
    def model(self) -> dict:
        return self.data["model"]

    @property
    def snr_db(self) -> float | None:
        snr = self.ensemble["snr_db"]
        return None if snr == "inf" else float(snr)

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    def record(self) -> dict:
        """The resolved config as embedded in outputs: everything except the output directory."""
        return {k: copy.deepcopy(v) for k, v in self.data.items() if k != "out"}

    def hash(self) -> str:
        """Content hash of everything that influences results (the output directory does not)."""
        return hashlib.sha256(json.dumps(self.record(), sort_keys=True).encode()).hexdigest()[:16]

    def data_hash(self, seed: int) -> str:
        body = {"ensemble": self.ensemble, "seed": seed}
        return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()[:16]

    def with_point(self, axis: str, value: int) -> "ExperimentConfig":
        if axis == "none":
            return self
        section = "ensemble" if axis == "N" else "model"
        cfg = ExperimentConfig(_merge(self.data, {section: {axis: value}}))
        cfg.check()
        return cfg

    def train_config(self, kind: str, seed: int, inputs=None) -> TrainConfig:
        m, t = self.model, self.data["training"]
        return TrainConfig(
            model=kind, K=m["K"], H=m["H"], inputs=tuple(inputs or m["inputs"]),
            input_norm=m["input_norm"], p_max=m["p_max"], eps=m["eps"],
            theta_init=m["theta_init"], gamma_init=m["gamma_init"],
            epochs=t["epochs"], samples_per_epoch=t["samples_per_epoch"],
            batch_size=t["batch_size"], learning_rate=t["learning_rate"],
            lr_milestones=tuple(t["lr_milestones"]), lr_decay=t["lr_decay"],
            eval_every=t["eval_every"], seed=seed,
        )
