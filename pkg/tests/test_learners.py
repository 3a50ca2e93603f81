import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize
from scipy.special import expit

from defaultpred.learners import (
    FAMILIES,
    HyperParams,
    TrainedModel,
    TrainingError,
    fit,
    fit_adaboost,
    fit_bagging,
    fit_forest,
    fit_gboost,
    fit_logreg,
    fit_mnb,
    fit_naive,
    fit_tree,
    tune,
)
from defaultpred.learners.base import majority_vote
from defaultpred.learners.baselines import logistic_objective, mnb_posterior
from defaultpred.learners.boosting import adaboost_alpha, adaboost_reweight, gboost_staged_scores

from .conftest import make_dataset


def noisy_dataset(seed, n=120, p=3, rate=0.35):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    y = (X[:, 0] + 0.8 * rng.normal(size=n) > np.quantile(X[:, 0], 1 - rate)).astype(int)
    y[:2] = [0, 1]
    return make_dataset(X, y)


# --- NAIVE ----------------------------------------------------------------


def test_naive_rule():
    names = ["L3_lag1", "L3_lag0", "L7_lag0", "L1_lag0"]
    ds = make_dataset(np.zeros((2, 4)), [0, 1], names)
    model = fit_naive(ds)
    rows = np.array([[0, 0, 0, 9], [1, 0, 0, 0], [0, 0, 0.5, 0], [0, 2, 0, 0]])
    assert model.predict(rows).tolist() == [0, 1, 1, 1]


def test_naive_needs_l3_and_l7():
    with pytest.raises(TrainingError, match="L7"):
        fit_naive(make_dataset(np.zeros((2, 1)), [0, 1], ["L3_lag0"]))
    # L30 is not an L3 column
    with pytest.raises(TrainingError, match="L3"):
        fit_naive(make_dataset(np.zeros((2, 2)), [0, 1], ["L30_lag0", "L7_lag0"]))


# --- MNB ------------------------------------------------------------------


def test_mnb_separable():
    ds = make_dataset([[0.0], [0.0], [1.0], [1.0]], [0, 0, 1, 1])
    model = fit_mnb(ds, HyperParams(n_bins=2))
    assert model.predict(ds.rows).tolist() == [0, 0, 1, 1]


def test_mnb_hand_computed_posterior():
    ds = make_dataset([[0.0], [0.0], [1.0], [0.0], [1.0], [1.0]], [0, 0, 0, 1, 1, 1])
    model = fit_mnb(ds, HyperParams(n_bins=2, laplace_alpha=1.0))
    post = mnb_posterior(model, [[0.0], [1.0]])
    assert post[:, 1] == pytest.approx([0.4, 0.6], abs=1e-12)


def test_mnb_heavy_smoothing_flattens_posteriors():
    ds = make_dataset([[0.0], [0.0], [1.0], [1.0]], [0, 0, 1, 1])
    post = mnb_posterior(fit_mnb(ds, HyperParams(n_bins=2, laplace_alpha=1e6)), ds.rows)
    assert np.abs(post - 0.5).max() < 1e-3


def test_mnb_prior_dominates_uninformative_feature():
    ds = make_dataset(np.ones((100, 1)), [1] * 10 + [0] * 90)
    assert fit_mnb(ds).predict(ds.rows).sum() == 0


def test_mnb_degenerate_labels():
    with pytest.raises(TrainingError):
        fit_mnb(make_dataset(np.zeros((3, 1)), [1, 1, 1]))


# --- LOG ------------------------------------------------------------------


def test_logreg_zero_iterations_gives_half():
    ds = noisy_dataset(0)
    model = fit_logreg(ds, HyperParams(max_iters=0))
    assert np.all(expit(model.params["coef"] @ np.zeros(3) + model.params["intercept"]) == 0.5)
    assert model.predict(ds.rows).sum() == 0


def test_logreg_separable():
    ds = make_dataset(np.arange(10.0), [0] * 5 + [1] * 5)
    model = fit_logreg(ds, HyperParams(l2_penalty=0.0, max_iters=2000))
    assert model.predict(ds.rows).tolist() == [0] * 5 + [1] * 5


def test_logistic_gradient_at_zero():
    rng = np.random.default_rng(1)
    Z = rng.normal(size=(30, 2))
    y = rng.integers(0, 2, 30).astype(float)
    loss, grad = logistic_objective(np.zeros(3), Z, y, 1.0)
    assert loss == pytest.approx(math.log(2))
    assert grad[:-1] == pytest.approx(Z.T @ (0.5 - y) / 30)
    assert grad[-1] == pytest.approx(0.5 - y.mean())


def test_logistic_gradient_finite_differences():
    rng = np.random.default_rng(2)
    Z = rng.normal(size=(40, 3))
    y = rng.integers(0, 2, 40).astype(float)
    h = 1e-6
    for _ in range(10):
        c = rng.normal(size=4)
        _, grad = logistic_objective(c, Z, y, 0.7)
        num = np.array(
            [
                (logistic_objective(c + h * e, Z, y, 0.7)[0] - logistic_objective(c - h * e, Z, y, 0.7)[0]) / (2 * h)
                for e in np.eye(4)
            ]
        )
        assert np.allclose(num, grad, rtol=1e-5, atol=1e-9)


def test_logreg_matches_scipy_optimum():
    ds = noisy_dataset(3)
    model = fit_logreg(ds, HyperParams(l2_penalty=1.0, max_iters=20_000))
    X = ds.rows
    Z = (X - X.mean(0)) / X.std(0)
    ref = minimize(lambda c: logistic_objective(c, Z, ds.labels.astype(float), 1.0), np.zeros(4), jac=True,
                   method="BFGS", options={"gtol": 1e-10})
    got = np.append(model.params["coef"], model.params["intercept"])
    assert np.allclose(got, ref.x, atol=1e-5)


def test_logreg_divergence_is_reported():
    with pytest.raises(TrainingError, match="non-finite"):
        fit_logreg(noisy_dataset(4), HyperParams(step_size=1e300, max_iters=5))


# --- trees and ensembles --------------------------------------------------


def test_degenerate_forest_equals_single_tree():
    ds = noisy_dataset(5)
    single = fit_tree(ds).predict(ds.rows)
    hp = HyperParams(n_trees=1, bootstrap=False, features_per_split=3)
    assert np.array_equal(fit_forest(ds, hp).predict(ds.rows), single)
    assert np.array_equal(fit_bagging(ds, hp.with_(features_per_split=None)).predict(ds.rows), single)


def test_forest_is_deterministic():
    ds = noisy_dataset(6)
    hp = HyperParams(n_trees=15)
    Q = np.random.default_rng(0).normal(size=(200, 3))
    assert np.array_equal(fit_forest(ds, hp, seed=4).predict(Q), fit_forest(ds, hp, seed=4).predict(Q))


def test_one_feature_forest_equals_bagging():
    ds = make_dataset(np.random.default_rng(7).normal(size=80), np.arange(80) % 3 == 0)
    hp = HyperParams(n_trees=9)
    rf, bag = fit_forest(ds, hp, seed=2), fit_bagging(ds, hp, seed=2)
    Q = np.linspace(-3, 3, 101).reshape(-1, 1)
    assert np.array_equal(rf.predict(Q), bag.predict(Q))


def test_majority_vote_examples():
    votes = np.array([[1, 1, 0, 1], [0, 1, 0, 1], [1, 0, 0, 0], [0, 1, 0, 1]])
    # columns: 2 of 4 (tie), 3 of 4, 0 of 4, 3 of 4
    assert majority_vote(votes).tolist() == [0, 1, 0, 1]
    assert majority_vote(np.array([[1], [0], [1]])).tolist() == [1]


def test_adaboost_alpha():
    assert adaboost_alpha(0.25) == pytest.approx(0.5 * math.log(3), abs=1e-12)
    assert adaboost_alpha(0.5) == 0.0


def test_adaboost_reweight_moves_miss_to_half():
    # a stump on x=[0,1,2,3], y=[0,0,1,0] misses exactly one point
    ds = make_dataset([0.0, 1.0, 2.0, 3.0], [0, 0, 1, 0])
    model = fit_adaboost(ds, HyperParams(n_rounds=1))
    assert model.params["errors"][0] == 0.25
    miss = np.array([False, False, True, False])
    w = adaboost_reweight(np.full(4, 0.25), adaboost_alpha(0.25), miss)
    assert w[2] == pytest.approx(0.5, abs=1e-12)
    assert w[~miss] == pytest.approx([1 / 6] * 3, abs=1e-12)


def test_adaboost_stops_on_perfect_learner():
    ds = make_dataset(np.arange(8.0), [0] * 4 + [1] * 4)
    model = fit_adaboost(ds, HyperParams(n_rounds=10))
    assert len(model.params["trees"]) == 1
    assert model.predict(ds.rows).tolist() == [0] * 4 + [1] * 4


def test_adaboost_training_error_bound():
    ds = noisy_dataset(8, n=200)
    model = fit_adaboost(ds, HyperParams(n_rounds=25))
    eps = model.params["errors"]
    bound = np.cumprod(2 * np.sqrt(eps * (1 - eps)))
    assert np.all(np.diff(bound) < 0)
    err = np.mean(model.predict(ds.rows) != ds.labels)
    assert err <= bound[-1] + 1e-12


def test_gboost_initial_score():
    y = np.array([1] * 43 + [0] * 957)
    ds = make_dataset(np.zeros(1000), y)
    model = fit_gboost(ds, HyperParams(n_rounds=0))
    assert model.params["init"] == pytest.approx(math.log(0.043 / 0.957), abs=1e-12)
    assert model.params["init"] == pytest.approx(-3.103, abs=1e-3)
    half = fit_gboost(make_dataset(np.zeros(4), [0, 1, 0, 1]), HyperParams(n_rounds=0))
    assert half.params["init"] == 0.0
    # first residual of a positive at p = 0.5
    assert 1 - expit(half.params["init"]) == 0.5


def test_gboost_newton_leaves():
    ds = noisy_dataset(9)
    model = fit_gboost(ds, HyperParams(n_rounds=1, base_depth=1))
    tree = model.params["trees"][0]
    y = ds.labels.astype(float)
    p = np.full(len(y), expit(model.params["init"]))
    leaves = tree.apply(ds.rows)
    for leaf in np.unique(leaves):
        m = leaves == leaf
        assert tree.value[leaf] == pytest.approx((y[m] - p[m]).sum() / (p[m] * (1 - p[m])).sum(), rel=1e-12)


def deviance(F, y):
    return -np.mean(y * np.log(expit(F)) + (1 - y) * np.log(expit(-F)))


@pytest.mark.parametrize("seed", range(20))
def test_gboost_deviance_non_increasing(seed):
    ds = noisy_dataset(100 + seed, n=80)
    model = fit_gboost(ds, HyperParams(n_rounds=15, base_depth=2))
    dev = [deviance(F, ds.labels) for F in gboost_staged_scores(model.params, ds.rows)]
    assert np.all(np.diff(dev) <= 1e-12)


def test_gboost_degenerate_labels():
    with pytest.raises(TrainingError):
        fit_gboost(make_dataset(np.zeros(3), [0, 0, 0]))


# --- tuning ---------------------------------------------------------------


def xor_dataset(n=200, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 2, size=(n, 2)).astype(float)
    return make_dataset(X, (X[:, 0] != X[:, 1]).astype(int))


def test_tune_single_candidate_returned_as_is():
    hp = HyperParams(max_depth=7)
    assert tune("DT", xor_dataset(), [hp]) is hp


def test_tune_prefers_depth_two_on_xor():
    best = tune("DT", xor_dataset(), [{"max_depth": 1}, {"max_depth": 2}, {"max_depth": 3}])
    assert best.max_depth == 2  # ties go to the earliest candidate


def test_tune_is_deterministic():
    ds = noisy_dataset(10, n=150)
    grid = [{"max_depth": d} for d in (1, 2, 4, 8)]
    assert tune("DT", ds, grid, seed=3) == tune("DT", ds, grid, seed=3)


def test_tune_reports_when_every_candidate_fails():
    ds = make_dataset(np.zeros((20, 1)), [0, 1] * 10, ["L7_lag0"])
    with pytest.raises(TrainingError, match="every candidate failed"):
        tune("NAIVE", ds, [{}, {"n_bins": 4}])


def test_tune_empty_grid():
    with pytest.raises(ValueError):
        tune("DT", xor_dataset(), [])


# --- persistence and the common contract ----------------------------------

SMALL = {
    "RF": HyperParams(n_trees=5),
    "BAG": HyperParams(n_trees=5),
    "ADA": HyperParams(n_rounds=5),
    "GB": HyperParams(n_rounds=5, base_depth=2),
}


@pytest.mark.parametrize("family", FAMILIES)
def test_json_round_trip(family, small_dataset):
    model = fit(family, small_dataset, SMALL.get(family), seed=1)
    back = TrainedModel.from_json(model.to_json())
    assert back.family == family and back.hyperparams == model.hyperparams
    assert back.feature_names == model.feature_names
    assert np.array_equal(back.predict(small_dataset.rows), model.predict(small_dataset.rows))
    assert back.to_json() == model.to_json()


def test_model_version_is_checked(small_dataset):
    text = fit("DT", small_dataset).to_json().replace('"version": 1', '"version": 99')
    with pytest.raises(ValueError, match="version"):
        TrainedModel.from_json(text)


def test_wrong_width_is_named(small_dataset):
    model = fit("DT", small_dataset)
    with pytest.raises(ValueError, match="width 68, got 60"):
        model.predict(np.zeros((2, 60)))


def test_empty_rows_give_empty_predictions(small_dataset):
    out = fit("DT", small_dataset).predict(np.zeros((0, 68)))
    assert out.shape == (0,)
    assert fit("DT", small_dataset).predict([]).shape == (0,)


def test_unknown_family():
    with pytest.raises(ValueError):
        fit("SVM", xor_dataset())


@pytest.mark.parametrize(
    "bad",
    [
        dict(max_depth=0),
        dict(min_leaf=0),
        dict(n_trees=0),
        dict(n_rounds=-1),
        dict(learning_rate=0.0),
        dict(learning_rate=1.5),
        dict(l2_penalty=-1.0),
        dict(laplace_alpha=0.0),
        dict(n_bins=1),
        dict(criterion="chi2"),
        dict(step_size=0.0),
    ],
)
def test_hyperparam_validation(bad):
    with pytest.raises(ValueError):
        HyperParams(**bad)


def test_hyperparam_dict_round_trip():
    hp = HyperParams(max_depth=4, learning_rate=0.3)
    assert HyperParams.from_dict(hp.to_dict()) == hp
    with pytest.raises(ValueError, match="unknown"):
        HyperParams.from_dict({"depth": 3})


@given(st.integers(0, 1000), st.sampled_from(["DT", "LOG", "MNB", "ADA"]))
def test_predictions_are_binary_and_sized(seed, family):
    ds = noisy_dataset(seed, n=40)
    out = fit(family, ds, HyperParams(n_rounds=3, max_iters=20)).predict(ds.rows)
    assert out.shape == (40,) and set(out.tolist()) <= {0, 1}
