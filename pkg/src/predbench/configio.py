"""Config file loading, defaults, dotted-path flag overrides, and hashing.

One JSON file configures everything; flags win over file values. Unknown
keys are rejected by name so typos fail fast."""

import copy
import hashlib
import json
from pathlib import Path

from .budget import CostModel
from .dataset import DatasetConfig
from .errors import ConfigError
from .harness import BudgetGrid
from .network import TrainConfig
from .predictors.models import HpoSpec
from .search import NasRunConfig
from .space import DEFAULT_OPS, SearchSpace

DEFAULT_CONFIG = {
    "space": {"num_nodes": 4, "ops": list(DEFAULT_OPS)},
    "dataset": {"kind": "spiral", "classes": 3, "train_size": 192, "val_size": 192,
                "noise": 0.10, "turns": 0.7, "seed": 0},
    "train": {"epochs": 50, "batch_size": 32, "learning_rate": 0.12, "momentum": 0.9,
              "width": 16, "cells": 1, "init_scheme": "scaled", "seed": 0},
    "cost": {"epoch_cost": 1.0, "zero_cost_query": 0.05, "model_query": 0.0},
    "build": {"n_archs": 2000},
    "grid": {"init_levels": None, "query_levels": None, "init_count": 11,
             "query_count": 14, "max_init_trainings": 300.0, "query_lo": 0.05,
             "test_size": 200, "trials": 100, "protocol": "uniform",
             "mutation_max_attrs": 3},
    "predictors": ["flops", "jacob_cov", "synflow", "sotl_e", "lce",
                   "gradient_boosted_trees", "random_forest", "bayes_linear"],
    "hpo": {"iterations": 8, "time_cap_s": 60.0, "cv_folds": 3},
    "nas": {"framework": "evolution", "iterations": 25, "init_population": 10,
            "elite": 5, "mutations_per_elite": 40, "select_k": 20,
            "mutation_max_attrs": 1, "query_budget": 10.0, "pool": 200,
            "select": 20, "members": 3, "hpo_every": 5,
            "predictor": "gradient_boosted_trees",
            "model_kind": "gradient_boosted_trees", "runs": 10},
    "score": {"count": 50, "archs": None, "query_budget": None,
              "init_budget_trainings": 100},
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError("unknown configuration key", key=here)
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, here)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path: str | Path | None) -> dict:
    """Defaults merged with the JSON file at `path` (if any)."""
    if path is None:
        return copy.deepcopy(DEFAULT_CONFIG)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config parse error: {exc.msg}", line=exc.lineno) from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    return _merge(DEFAULT_CONFIG, data)


def apply_overrides(config: dict, overrides: list[str]) -> dict:
    """Apply `section.key=value` flag overrides; values parse as JSON with a
    plain-string fallback."""
    out = copy.deepcopy(config)
    for item in overrides:
        if "=" not in item:
            raise ConfigError("override must look like section.key=value", key=item)
        dotted, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = out
        parts = dotted.split(".")
        for i, part in enumerate(parts[:-1]):
            if not isinstance(node.get(part), dict):
                raise ConfigError("unknown configuration key", key=".".join(parts[: i + 1]))
            node = node[part]
        if parts[-1] not in node:
            raise ConfigError("unknown configuration key", key=dotted)
        node[parts[-1]] = value
    return out


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()


# --- typed views ---------------------------------------------------------


def space_from(config: dict) -> SearchSpace:
    return SearchSpace(config["space"]["num_nodes"], tuple(config["space"]["ops"]))


def dataset_from(config: dict) -> DatasetConfig:
    return DatasetConfig(**config["dataset"])


def train_from(config: dict) -> TrainConfig:
    return TrainConfig(**config["train"])


def cost_from(config: dict) -> CostModel:
    return CostModel(**config["cost"])


def hpo_from(config: dict) -> HpoSpec:
    return HpoSpec(**config["hpo"])


def grid_from(config: dict, epochs: int) -> BudgetGrid:
    g = config["grid"]
    if g["init_levels"] is not None and g["query_levels"] is not None:
        return BudgetGrid(tuple(float(v) for v in g["init_levels"]),
                          tuple(float(v) for v in g["query_levels"]))
    return BudgetGrid.default(epochs, g["max_init_trainings"], g["init_count"],
                              g["query_count"], g["query_lo"])


def nas_from(config: dict) -> NasRunConfig:
    n = config["nas"]
    return NasRunConfig(
        framework=n["framework"], iterations=n["iterations"],
        init_population=n["init_population"], elite=n["elite"],
        mutations_per_elite=n["mutations_per_elite"], select_k=n["select_k"],
        mutation_max_attrs=n["mutation_max_attrs"], query_budget=n["query_budget"],
        pool=n["pool"], select=n["select"], members=n["members"],
        hpo_every=n["hpo_every"],
    )
