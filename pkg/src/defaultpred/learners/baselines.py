"""Baseline classifiers: the L3/L7 rule, multinomial naive Bayes and
L2-regularized logistic regression."""

from __future__ import annotations

import logging
import re
from typing import Optional

import numpy as np
from scipy.special import expit, log_expit

from .base import HyperParams, TrainedModel, TrainingError, default_hyperparams, register_predictor

log = logging.getLogger(__name__)


def _attribute_columns(names, attr: str) -> list[int]:
    pat = re.compile(rf"^{attr}(_|$)")
    return [i for i, n in enumerate(names) if pat.match(n)]


def fit_naive(ds) -> TrainedModel:
    """Rule model: default iff any L3 (bank classification) or L7 (past due)
    column of the row is non-zero."""
    names = list(ds.feature_names)
    l3 = _attribute_columns(names, "L3")
    l7 = _attribute_columns(names, "L7")
    if not l3 or not l7:
        missing = [a for a, c in (("L3", l3), ("L7", l7)) if not c]
        raise TrainingError(f"NAIVE needs L3 and L7 columns; missing {missing}")
    cols = np.array(l3 + l7, dtype=np.int64)
    return TrainedModel("NAIVE", {"columns": cols}, default_hyperparams("NAIVE"), tuple(names), 0)


@register_predictor("NAIVE")
def _predict_naive(params, X):
    return (X[:, params["columns"]] > 0).any(axis=1)


# --- multinomial naive Bayes --------------------------------------------


def quantile_edges(x: np.ndarray, n_bins: int) -> np.ndarray:
    qs = np.quantile(x, np.linspace(0.0, 1.0, n_bins + 1)[1:-1])
    return np.unique(qs)


def _bin(x: np.ndarray, edges: np.ndarray) -> np.ndarray:
    # bins are (-inf, e0], (e0, e1], ..., (e_last, inf)
    return np.searchsorted(edges, x, side="left")


def fit_mnb(ds, hp: Optional[HyperParams] = None, seed: int = 0) -> TrainedModel:
    """Multinomial naive Bayes over per-feature quantile-bin tokens.

    Each row contributes one token per feature (the bin its value falls
    in). Token likelihoods use additive smoothing ``laplace_alpha``.
    """
    hp = hp or default_hyperparams("MNB")
    X = np.asarray(ds.rows, dtype=np.float64)
    y = np.asarray(ds.labels)
    counts = np.bincount(y, minlength=2)
    if len(y) == 0 or (counts == 0).any():
        raise TrainingError("degenerate training labels")
    n, p = X.shape
    edges = [quantile_edges(X[:, j], hp.n_bins) for j in range(p)]
    n_tokens = sum(len(e) + 1 for e in edges)
    log_lik = []
    for j in range(p):
        b = _bin(X[:, j], edges[j])
        nb = len(edges[j]) + 1
        table = np.zeros((2, nb))
        for c in (0, 1):
            table[c] = np.bincount(b[y == c], minlength=nb)
        denom = counts * p + hp.laplace_alpha * n_tokens
        log_lik.append(np.log(table + hp.laplace_alpha) - np.log(denom)[:, None])
    params = {"edges": edges, "log_lik": log_lik, "log_prior": np.log(counts / n)}
    return TrainedModel("MNB", params, hp, tuple(ds.feature_names), seed)


def mnb_joint_log_likelihood(params, X) -> np.ndarray:
    jll = np.tile(params["log_prior"], (len(X), 1))
    for j, (edges, table) in enumerate(zip(params["edges"], params["log_lik"])):
        jll += table[:, _bin(X[:, j], edges)].T
    return jll


def mnb_posterior(model: TrainedModel, rows) -> np.ndarray:
    """Class posteriors, shape ``(n_rows, 2)``."""
    jll = mnb_joint_log_likelihood(model.params, np.asarray(rows, dtype=np.float64))
    jll -= jll.max(axis=1, keepdims=True)
    prob = np.exp(jll)
    return prob / prob.sum(axis=1, keepdims=True)


@register_predictor("MNB")
def _predict_mnb(params, X):
    jll = mnb_joint_log_likelihood(params, X)
    return jll[:, 1] > jll[:, 0]


# --- logistic regression ------------------------------------------------


def logistic_objective(coef: np.ndarray, Z: np.ndarray, y: np.ndarray, l2: float):
    """Mean log-loss plus ``l2 / (2 n) * |w|^2`` and its gradient.

    ``coef`` is ``[w..., b]``; the intercept is not penalized.
    """
    n = len(y)
    w, b = coef[:-1], coef[-1]
    z = Z @ w + b
    loss = -np.mean(y * log_expit(z) + (1 - y) * log_expit(-z)) + 0.5 * l2 / n * (w @ w)
    r = expit(z) - y
    grad = np.empty_like(coef)
    grad[:-1] = Z.T @ r / n + l2 / n * w
    grad[-1] = r.mean()
    return loss, grad


def fit_logreg(ds, hp: Optional[HyperParams] = None, seed: int = 0) -> TrainedModel:
    """Full-batch gradient descent from zero on standardized features.

    With ``step_size`` unset the step is 1/L for the objective's gradient
    Lipschitz bound L, which guarantees monotone descent.
    """
    hp = hp or default_hyperparams("LOG")
    X = np.asarray(ds.rows, dtype=np.float64)
    y = ds.labels.astype(np.float64)
    n, p = X.shape
    if n == 0:
        raise ValueError("cannot fit on an empty dataset")
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    Z = (X - mean) / scale
    step = hp.step_size
    if step is None:
        aug = np.hstack([Z, np.ones((n, 1))])
        lipschitz = 0.25 * np.linalg.norm(aug, 2) ** 2 / n + hp.l2_penalty / n
        step = 1.0 / lipschitz
    coef = np.zeros(p + 1)
    for it in range(hp.max_iters):
        # divergence is detected below, so overflow warnings are redundant
        with np.errstate(over="ignore", invalid="ignore"):
            loss, grad = logistic_objective(coef, Z, y, hp.l2_penalty)
        if not np.isfinite(loss):
            raise TrainingError(f"LOG: non-finite loss at iteration {it}")
        coef = coef - step * grad
    params = {"mean": mean, "scale": scale, "coef": coef[:-1].copy(), "intercept": float(coef[-1])}
    return TrainedModel("LOG", params, hp, tuple(ds.feature_names), seed)


def logreg_probability(params, X) -> np.ndarray:
    Z = (np.asarray(X, dtype=np.float64) - params["mean"]) / params["scale"]
    return expit(Z @ params["coef"] + params["intercept"])


@register_predictor("LOG")
def _predict_log(params, X):
    return logreg_probability(params, X) > 0.5
