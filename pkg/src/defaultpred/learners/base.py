"""Shared learner types: hyperparameters, fitted models and persistence."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from ._cart import Tree

FAMILIES = ("NAIVE", "MNB", "LOG", "DT", "RF", "BAG", "ADA", "GB")
TREE_FAMILIES = ("GB", "RF", "DT", "BAG", "ADA")
MODEL_FORMAT_VERSION = 1


class TrainingError(RuntimeError):
    """A learner could not be fitted to the given data."""


@dataclass(frozen=True)
class HyperParams:
    # trees
    max_depth: Optional[int] = None
    min_leaf: int = 1
    criterion: str = "gini"
    # forest / bagging
    n_trees: int = 100
    features_per_split: Optional[int] = None  # None: sqrt(p) for RF, p for BAG
    bootstrap: bool = True
    # boosting
    n_rounds: int = 50
    learning_rate: float = 0.1
    base_depth: int = 1
    # logistic regression
    l2_penalty: float = 1.0
    max_iters: int = 500
    step_size: Optional[float] = None  # None: 1 / Lipschitz bound
    # multinomial naive Bayes
    laplace_alpha: float = 1.0
    n_bins: int = 16

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.base_depth < 1:
            raise ValueError("base_depth must be >= 1")
        if self.min_leaf < 1 or self.n_trees < 1:
            raise ValueError("min_leaf and n_trees must be >= 1")
        if self.features_per_split is not None and self.features_per_split < 1:
            raise ValueError("features_per_split must be >= 1")
        # zero rounds/iterations are allowed: they leave the initial model
        if self.n_rounds < 0 or self.max_iters < 0:
            raise ValueError("n_rounds and max_iters must be >= 0")
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must lie in (0, 1]")
        if self.l2_penalty < 0:
            raise ValueError("l2_penalty must be >= 0")
        if self.step_size is not None and self.step_size <= 0:
            raise ValueError("step_size must be > 0")
        if self.laplace_alpha <= 0:
            raise ValueError("laplace_alpha must be > 0")
        if self.n_bins < 2:
            raise ValueError("n_bins must be >= 2")
        if self.criterion not in ("gini", "entropy"):
            raise ValueError(f"unknown split criterion {self.criterion!r}")

    def with_(self, **changes) -> "HyperParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "HyperParams":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown hyperparameters: {sorted(unknown)}")
        return cls(**data)


_FAMILY_DEFAULTS = {
    "ADA": dict(n_rounds=50, base_depth=1),
    "GB": dict(n_rounds=100, learning_rate=0.1, base_depth=3),
}


def default_hyperparams(family: str) -> HyperParams:
    """Documented library defaults for one learner family."""
    if family not in FAMILIES:
        raise ValueError(f"unknown learner family {family!r}")
    return HyperParams(**_FAMILY_DEFAULTS.get(family, {}))


@dataclass(frozen=True, eq=False)
class TrainedModel:
    family: str
    params: dict
    hyperparams: HyperParams
    feature_names: tuple
    train_seed: int = 0

    def predict(self, rows) -> np.ndarray:
        return predict(self, rows)

    def to_json(self) -> str:
        doc = {
            "version": MODEL_FORMAT_VERSION,
            "family": self.family,
            "hyperparams": self.hyperparams.to_dict(),
            "feature_names": list(self.feature_names),
            "train_seed": self.train_seed,
            "params": _encode(self.params),
        }
        return json.dumps(doc, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TrainedModel":
        doc = json.loads(text)
        if doc.get("version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {doc.get('version')!r}")
        return cls(
            family=doc["family"],
            params=_decode(doc["params"]),
            hyperparams=HyperParams.from_dict(doc["hyperparams"]),
            feature_names=tuple(doc["feature_names"]),
            train_seed=doc["train_seed"],
        )

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json() + "\n")
        return path

    @classmethod
    def load(cls, path) -> "TrainedModel":
        return cls.from_json(Path(path).read_text())


def _encode(obj):
    if isinstance(obj, Tree):
        return {"__tree__": obj.to_dict()}
    if isinstance(obj, np.ndarray):
        if obj.dtype.kind == "f":
            return {"__array__": [repr(float(v)) for v in obj.ravel()], "shape": list(obj.shape), "dtype": "float64"}
        return {"__array__": [int(v) for v in obj.ravel()], "shape": list(obj.shape), "dtype": "int64"}
    if isinstance(obj, dict):
        return {k: _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if isinstance(obj, float):
        return {"__float__": repr(obj)}
    return obj


def _decode(obj):
    if isinstance(obj, dict):
        if "__tree__" in obj:
            return Tree.from_dict(obj["__tree__"])
        if "__array__" in obj:
            dtype = np.float64 if obj["dtype"] == "float64" else np.int64
            return np.array([dtype(v) for v in obj["__array__"]], dtype=dtype).reshape(obj["shape"])
        if "__float__" in obj:
            return float(obj["__float__"])
        return {k: _decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    return obj


_PREDICTORS: dict[str, Callable[[dict, np.ndarray], np.ndarray]] = {}


def register_predictor(family: str):
    def deco(fn):
        _PREDICTORS[family] = fn
        return fn

    return deco


def check_rows(model: TrainedModel, rows) -> np.ndarray:
    X = np.asarray(rows, dtype=np.float64)
    width = len(model.feature_names)
    if X.ndim == 1 and X.size == 0:
        X = X.reshape(0, width)
    if X.ndim != 2 or X.shape[1] != width:
        got = X.shape[1] if X.ndim == 2 else X.shape
        raise ValueError(f"{model.family}: expected rows of width {width}, got {got}")
    return np.ascontiguousarray(X)


def predict(model: TrainedModel, rows) -> np.ndarray:
    """Hard 0/1 predictions, one per row."""
    X = check_rows(model, rows)
    if len(X) == 0:
        return np.zeros(0, dtype=np.int8)
    return _PREDICTORS[model.family](model.params, X).astype(np.int8)


def majority_vote(votes: np.ndarray) -> np.ndarray:
    """Unweighted majority over axis 0 of a (members, rows) 0/1 array; ties -> 0."""
    return (2 * votes.sum(axis=0) > votes.shape[0]).astype(np.int8)
