"""From-scratch classifiers behind a uniform fit/predict contract."""

from __future__ import annotations

from typing import Optional

from ._parallel import get_threads, set_threads
from .base import (
    FAMILIES,
    TREE_FAMILIES,
    HyperParams,
    TrainedModel,
    TrainingError,
    default_hyperparams,
    predict,
)
from .baselines import fit_logreg, fit_mnb, fit_naive
from .boosting import fit_adaboost, fit_gboost
from .trees import fit_bagging, fit_forest, fit_tree
from .tuning import tune


def fit(family: str, ds, hp: Optional[HyperParams] = None, seed: int = 0) -> TrainedModel:
    """Train one model of ``family`` with ``hp`` (library defaults if None)."""
    if family == "NAIVE":
        return fit_naive(ds)
    if family == "DT":
        return fit_tree(ds, None, hp, seed)
    fitters = {
        "MNB": fit_mnb,
        "LOG": fit_logreg,
        "RF": fit_forest,
        "BAG": fit_bagging,
        "ADA": fit_adaboost,
        "GB": fit_gboost,
    }
    if family not in fitters:
        raise ValueError(f"unknown learner family {family!r}")
    return fitters[family](ds, hp, seed)


__all__ = [
    "FAMILIES",
    "TREE_FAMILIES",
    "HyperParams",
    "TrainedModel",
    "TrainingError",
    "default_hyperparams",
    "fit",
    "fit_adaboost",
    "fit_bagging",
    "fit_forest",
    "fit_gboost",
    "fit_logreg",
    "fit_mnb",
    "fit_naive",
    "fit_tree",
    "get_threads",
    "predict",
    "set_threads",
    "tune",
]
