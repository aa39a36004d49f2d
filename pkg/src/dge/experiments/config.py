"""Experiment configuration: YAML documents checked against a bundled JSON Schema."""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, replace
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema
import yaml

from ..classifiers import ClassifierSpec
from ..errors import BadSpec, ConfigError, IoError
from ..generators import GeneratorSpec
from ..toys import ToySpec

EXPERIMENTS = ("train", "evaluate", "select", "uq", "subgroups", "complexity_sweep", "size_sweep")
SWEEPS = ("complexity_sweep", "size_sweep")

# real-train size, runs and K per experiment where the reference protocol fixes them
_SCALE = {
    "train": dict(n_train=2000, n_runs=10),
    "evaluate": dict(n_train=5000, n_runs=20),
    "select": dict(n_train=5000, n_runs=20),
    "uq": dict(n_train=2000, n_runs=10),
    "subgroups": dict(n_train=2000, n_runs=10),
}

DEFAULT_MODELS = (
    {"kind": "logreg"},
    {"kind": "knn", "k": 5},
    {"kind": "mlp", "hidden": [100]},
    {"kind": "deep_mlp", "hidden": [100, 100, 100]},
    {"kind": "forest", "n_trees": 100},
)


@lru_cache(maxsize=1)
def config_schema() -> dict:
    text = resources.files(__package__).joinpath("config_schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _defaults(experiment: str, sweep_base: Optional[str]) -> dict:
    scale = _SCALE[sweep_base or experiment]
    n_synth = scale["n_train"]
    return {
        "name": experiment,
        "root_seed": 0,
        "n_runs": scale["n_runs"],
        "workers": 1,
        "data": {"toy": {"kind": "moons", "n": 2 * scale["n_train"], "seed": 0},
                 "train_fraction": 0.5, "stratified": True},
        "generator": {"kind": "kde", "bandwidth_scale": 1.0},
        "control": "none",
        "K": 20,
        "n_synth": n_synth,
        "disjoint_train": False,
        "downstream": {"kind": "mlp", "hidden": [100] if experiment == "uq" else [100, 100]},
        "models": list(DEFAULT_MODELS),
        "train": {"approaches": ["oracle", "naive_s", "naive_e", "naive_c", "dge"],
                  "dge_sizes": [5, 10, 20], "naive_e_size": 20, "metrics": ["auc", "accuracy"]},
        "evaluate": {"synth_train_fraction": 0.8, "k_primes": [5, 10, 20], "metric": "auc"},
        "uq": {"approaches": ["oracle", "naive_e", "naive_c", "dge"],
               "thresholds": [0.5, 0.6, 0.7, 0.8, 0.9], "ensemble_size": 20, "oracle_size": 20,
               "grid": {"enabled": True, "bbox": None, "resolution": 50}},
        "subgroups": {"dge_size": 20, "numeric": True},
    }


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated, default-filled experiment document.

    ``raw`` holds the full normalised document; typed views are built from it.
    """

    raw: dict
    base_dir: Path = Path(".")

    @property
    def experiment(self) -> str:
        return self.raw["experiment"]

    @property
    def is_sweep(self) -> bool:
        return self.experiment in SWEEPS

    @property
    def base_experiment(self) -> str:
        return self.raw["sweep"]["base"] if self.is_sweep else self.experiment

    @property
    def name(self) -> str:
        return self.raw["name"]

    @property
    def root_seed(self) -> int:
        return int(self.raw["root_seed"])

    @property
    def n_runs(self) -> int:
        return int(self.raw["n_runs"])

    @property
    def workers(self) -> int:
        return int(self.raw["workers"])

    @property
    def K(self) -> int:
        return int(self.raw["K"])

    @property
    def n_synth(self) -> int:
        return int(self.raw["n_synth"])

    @property
    def control(self) -> str:
        return self.raw["control"]

    @property
    def disjoint_train(self) -> bool:
        return bool(self.raw["disjoint_train"])

    @property
    def data(self) -> dict:
        return self.raw["data"]

    @property
    def output_dir(self) -> Optional[Path]:
        out = self.raw.get("output_dir")
        return None if out is None else self.base_dir / out

    @property
    def toy_spec(self) -> Optional[ToySpec]:
        toy = self.data.get("toy")
        return None if toy is None else ToySpec(**toy)

    @property
    def csv_path(self) -> Optional[Path]:
        p = self.data.get("csv")
        return None if p is None else self.base_dir / p

    @property
    def generator(self) -> GeneratorSpec:
        return GeneratorSpec(**self.raw["generator"])

    @property
    def downstream(self) -> ClassifierSpec:
        return ClassifierSpec.from_dict(self.raw["downstream"])

    @property
    def models(self) -> list:
        return [ClassifierSpec.from_dict(m) for m in self.raw["models"]]

    def section(self, name: str) -> dict:
        return self.raw[name]

    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw)

    def canonical_json(self) -> str:
        return json.dumps(self.raw, sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()

    def with_updates(self, **updates) -> "ExperimentConfig":
        return replace(self, raw=_merge(self.raw, updates))

    def sweep_points(self) -> list:
        """``(value, base-experiment config)`` per sweep value."""
        if not self.is_sweep:
            raise ConfigError("not a sweep configuration")
        sweep = self.raw["sweep"]
        param = sweep["parameter"]
        out = []
        for v in sweep["values"]:
            raw = {k: copy.deepcopy(val) for k, val in self.raw.items() if k != "sweep"}
            raw["experiment"] = sweep["base"]
            if param == "n_synth":
                raw["n_synth"] = int(v)
            elif param == "components_per_class":
                raw["generator"]["components_per_class"] = int(v)
            else:
                raw["generator"][param] = float(v)
            out.append((v, ExperimentConfig(raw, self.base_dir)))
        return out


def _check_semantics(cfg: ExperimentConfig):
    """Cross-field checks that a JSON Schema cannot express."""
    try:
        cfg.generator
        cfg.downstream
        cfg.models
        if cfg.toy_spec is not None:
            cfg.toy_spec
    except (BadSpec, TypeError) as e:
        raise ConfigError(str(e)) from e
    if cfg.csv_path is not None and not cfg.csv_path.is_file():
        raise ConfigError(f"data file {cfg.csv_path} does not exist")
    exp = cfg.base_experiment
    if exp in ("evaluate", "select") and cfg.K < 2:
        raise ConfigError(f"{exp} experiments need K >= 2")
    if exp == "select" and len(cfg.raw["models"]) < 2:
        raise ConfigError("select experiments need at least two downstream models")
    if exp == "train" and "dge" in cfg.raw["train"]["approaches"] and max(cfg.raw["train"]["dge_sizes"]) > cfg.K:
        raise ConfigError("train.dge_sizes must not exceed K")
    if exp == "subgroups" and cfg.raw["subgroups"]["dge_size"] > cfg.K:
        raise ConfigError("subgroups.dge_size must not exceed K")
    labels = [m.label for m in cfg.models]
    if len(set(labels)) != len(labels):
        raise ConfigError("downstream model labels must be unique; set 'name' to disambiguate")
    if cfg.is_sweep:
        param = cfg.raw["sweep"]["parameter"]
        if cfg.experiment == "size_sweep" and param != "n_synth":
            raise ConfigError("size_sweep varies n_synth")
        if cfg.experiment == "complexity_sweep" and param == "n_synth":
            raise ConfigError("complexity_sweep varies a generator knob, not n_synth")
        for v, _ in cfg.sweep_points():
            if param in ("n_synth", "components_per_class") and (v != int(v) or v < 1):
                raise ConfigError(f"{param} sweep values must be positive integers")
            if param == "bandwidth_scale" and not v > 0:
                raise ConfigError("bandwidth_scale sweep values must be > 0")


def config_from_dict(doc: dict, base_dir=".") -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a mapping")
    try:
        jsonschema.validate(doc, config_schema())
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"invalid configuration at {where}: {e.message}") from e
    experiment = doc["experiment"]
    sweep_base = None
    if experiment in SWEEPS:
        if "sweep" not in doc:
            raise ConfigError(f"{experiment} needs a 'sweep' section")
        param_default = "n_synth" if experiment == "size_sweep" else "bandwidth_scale"
        base_default = "select" if experiment == "size_sweep" else "evaluate"
        doc = _merge({"sweep": {"base": base_default, "parameter": param_default}}, doc)
        sweep_base = doc["sweep"]["base"]
    raw = _merge(_defaults(experiment, sweep_base), doc)
    if "data" in doc and "csv" in doc["data"]:
        raw["data"].pop("toy", None)
    cfg = ExperimentConfig(raw, Path(base_dir))
    _check_semantics(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError as e:
        raise ConfigError(f"config file {path} not found") from e
    except OSError as e:
        raise IoError(str(e)) from e
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"config is not valid YAML: {e}") from e
    return config_from_dict(doc, path.parent)
