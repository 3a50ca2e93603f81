"""AdaBoost and gradient boosting over CART base learners."""

from __future__ import annotations

import logging
import math
from typing import Optional

import numpy as np
from scipy.special import expit

from ._cart import grow_tree, presort
from .base import HyperParams, TrainedModel, TrainingError, default_hyperparams, register_predictor

log = logging.getLogger(__name__)

# weight used for a round whose base learner makes no weighted error
EPS_FLOOR = 1e-10
ALPHA_CAP = 0.5 * math.log((1 - EPS_FLOOR) / EPS_FLOOR)


def adaboost_alpha(eps: float) -> float:
    """Vote weight of a base learner with weighted error ``eps``."""
    eps = max(eps, EPS_FLOOR)
    return 0.5 * math.log((1 - eps) / eps)


def adaboost_reweight(w: np.ndarray, alpha: float, miss: np.ndarray) -> np.ndarray:
    """Scale misclassified weights by ``exp(alpha)`` and the rest by
    ``exp(-alpha)``, then renormalize."""
    w = w * np.exp(np.where(miss, alpha, -alpha))
    return w / w.sum()


def fit_adaboost(ds, hp: Optional[HyperParams] = None, seed: int = 0) -> TrainedModel:
    """Discrete AdaBoost with weighted CART base trees of depth ``base_depth``.

    A round with weighted error 0 is kept with a capped vote weight and ends
    training; a round with error >= 0.5 is discarded and ends training.
    """
    hp = hp or default_hyperparams("ADA")
    X = np.ascontiguousarray(ds.rows, dtype=np.float64)
    y = ds.labels.astype(np.float64)
    n = len(y)
    if n == 0:
        raise ValueError("cannot fit on an empty dataset")
    ypm = 2.0 * y - 1.0
    order = presort(X)
    w = np.full(n, 1.0 / n)
    trees, alphas, errors = [], [], []
    for rnd in range(hp.n_rounds):
        tree = grow_tree(X, y, w, criterion=hp.criterion, max_depth=hp.base_depth, min_leaf=hp.min_leaf, order=order)
        h = 2.0 * (tree.predict_value(X) > 0.5) - 1.0
        miss = h != ypm
        eps = float(w[miss].sum() / w.sum())
        if eps >= 0.5:
            log.debug("adaboost: round %d error %.4f >= 0.5, stopping", rnd, eps)
            break
        alpha = adaboost_alpha(eps)
        trees.append(tree)
        alphas.append(alpha)
        errors.append(eps)
        if eps == 0.0:
            break
        w = adaboost_reweight(w, alpha, miss)
    params = {"trees": trees, "alphas": np.array(alphas, dtype=np.float64), "errors": np.array(errors, dtype=np.float64)}
    return TrainedModel("ADA", params, hp, tuple(ds.feature_names), seed)


def adaboost_score(params, X) -> np.ndarray:
    score = np.zeros(len(X))
    for tree, alpha in zip(params["trees"], params["alphas"]):
        score += alpha * (2.0 * (tree.predict_value(X) > 0.5) - 1.0)
    return score


@register_predictor("ADA")
def _predict_ada(params, X):
    return adaboost_score(params, X) > 0.0


def fit_gboost(ds, hp: Optional[HyperParams] = None, seed: int = 0) -> TrainedModel:
    """Gradient boosting on binomial deviance.

    Starts from the training log-odds; each round fits a variance-reduction
    regression tree to the residuals ``y - sigmoid(F)`` and replaces its leaf
    values by the one-step Newton estimate ``sum(r) / sum(p (1 - p))``.
    """
    hp = hp or default_hyperparams("GB")
    X = np.ascontiguousarray(ds.rows, dtype=np.float64)
    y = ds.labels.astype(np.float64)
    if len(y) == 0:
        raise ValueError("cannot fit on an empty dataset")
    prior = float(y.mean())
    if prior in (0.0, 1.0):
        raise TrainingError("degenerate training labels")
    init = math.log(prior / (1 - prior))
    F = np.full(len(y), init)
    order = presort(X)
    trees = []
    for _ in range(hp.n_rounds):
        p = expit(F)
        resid = y - p
        tree = grow_tree(X, resid, criterion="mse", max_depth=hp.base_depth, min_leaf=hp.min_leaf, order=order)
        leaves = tree.apply(X)
        num = np.bincount(leaves, weights=resid, minlength=tree.n_nodes)
        den = np.bincount(leaves, weights=p * (1 - p), minlength=tree.n_nodes)
        is_leaf = tree.feature < 0
        safe = is_leaf & (np.abs(den) > 1e-150)
        tree.value = np.where(safe, num / np.where(safe, den, 1.0), np.where(is_leaf, 0.0, tree.value))
        F = F + hp.learning_rate * tree.value[leaves]
        trees.append(tree)
    params = {"init": init, "learning_rate": hp.learning_rate, "trees": trees}
    return TrainedModel("GB", params, hp, tuple(ds.feature_names), seed)


def gboost_staged_scores(params, X):
    """Yield the additive score after 0, 1, ..., n_rounds rounds."""
    F = np.full(len(X), params["init"])
    yield F.copy()
    for tree in params["trees"]:
        F = F + params["learning_rate"] * tree.predict_value(X)
        yield F.copy()


def gboost_score(params, X) -> np.ndarray:
    F = np.full(len(X), params["init"])
    for tree in params["trees"]:
        F += params["learning_rate"] * tree.predict_value(X)
    return F


@register_predictor("GB")
def _predict_gb(params, X):
    return expit(gboost_score(params, X)) > 0.5
