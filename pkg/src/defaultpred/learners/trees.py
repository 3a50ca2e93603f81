"""Decision tree, random forest and bagging classifiers."""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from ._cart import grow_tree, presort
from ._parallel import parallel_map
from .base import HyperParams, TrainedModel, default_hyperparams, majority_vote, register_predictor


def _xy(ds):
    return np.ascontiguousarray(ds.rows, dtype=np.float64), ds.labels.astype(np.float64)


def fit_tree(ds, sample_weights: Optional[np.ndarray] = None, hp: Optional[HyperParams] = None, seed: int = 0) -> TrainedModel:
    """Single CART classification tree on (optionally weighted) rows."""
    hp = hp or default_hyperparams("DT")
    X, y = _xy(ds)
    tree = grow_tree(
        X, y, sample_weights, criterion=hp.criterion, max_depth=hp.max_depth, min_leaf=hp.min_leaf, seed=seed
    )
    return TrainedModel("DT", {"tree": tree}, hp, tuple(ds.feature_names), seed)


@register_predictor("DT")
def _predict_tree(params, X):
    return params["tree"].predict_value(X) > 0.5


def member_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def _fit_ensemble(family: str, ds, hp: HyperParams, seed: int, mtry: int) -> TrainedModel:
    X, y = _xy(ds)
    n = len(y)
    if n == 0:
        raise ValueError("cannot fit on an empty dataset")
    order = presort(X)

    def member(k):
        rng = member_rng(seed, k)
        if hp.bootstrap:
            w = np.bincount(rng.integers(0, n, n), minlength=n).astype(np.float64)
        else:
            w = None
        tree_seed = int(rng.integers(0, 2**31 - 1))
        return grow_tree(
            X, y, w, criterion=hp.criterion, max_depth=hp.max_depth, min_leaf=hp.min_leaf, mtry=mtry, seed=tree_seed, order=order
        )

    trees = parallel_map(member, range(hp.n_trees))
    return TrainedModel(family, {"trees": trees, "mtry": mtry}, hp, tuple(ds.feature_names), seed)


def fit_forest(ds, hp: Optional[HyperParams] = None, seed: int = 0) -> TrainedModel:
    """Random forest: bootstrap resamples, ``floor(sqrt(p))`` candidate
    features per node unless ``features_per_split`` says otherwise."""
    hp = hp or default_hyperparams("RF")
    p = len(ds.feature_names)
    mtry = hp.features_per_split or max(1, math.isqrt(p))
    return _fit_ensemble("RF", ds, hp, seed, min(mtry, p))


def fit_bagging(ds, hp: Optional[HyperParams] = None, seed: int = 0) -> TrainedModel:
    """Bagged trees; every split sees all features."""
    hp = hp or default_hyperparams("BAG")
    p = len(ds.feature_names)
    mtry = min(hp.features_per_split or p, p)
    return _fit_ensemble("BAG", ds, hp, seed, mtry)


def tree_votes(trees, X) -> np.ndarray:
    return np.array([t.predict_value(X) > 0.5 for t in trees], dtype=np.int8).reshape(len(trees), len(X))


@register_predictor("RF")
@register_predictor("BAG")
def _predict_vote(params, X):
    return majority_vote(tree_votes(params["trees"], X))
