import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from defaultpred.comb import COMB_FAMILIES, N_MEMBERS, CombModel, MemberError, comb_fit, vote_rule
from defaultpred.learners import HyperParams

from .conftest import make_dataset

TINY_GRIDS = {
    "DT": [{"max_depth": 3}, {"max_depth": 5}],
    "RF": [{"n_trees": 5}],
    "BAG": [{"n_trees": 5}],
    "ADA": [{"n_rounds": 5}],
    "GB": [{"n_rounds": 5}],
}

ALL_VOTES = np.array(list(itertools.product([0, 1], repeat=N_MEMBERS)), dtype=np.int8).T  # (10, 1024)


@pytest.fixture(scope="module")
def comb(small_dataset):
    return comb_fit(small_dataset, TINY_GRIDS, seed=3)


def test_vote_rule_exhaustive():
    counts = ALL_VOTES.sum(axis=0)
    for k in range(1, N_MEMBERS + 1):
        assert np.array_equal(vote_rule(ALL_VOTES, k), (counts >= k).astype(np.int8))


def test_vote_rule_extremes():
    assert np.array_equal(vote_rule(ALL_VOTES, 1), ALL_VOTES.max(axis=0))
    assert np.array_equal(vote_rule(ALL_VOTES, N_MEMBERS), ALL_VOTES.min(axis=0))


def test_vote_rule_examples():
    votes = np.zeros((10, 3), dtype=np.int8)
    votes[:2, 0] = 1
    votes[:3, 1] = 1
    votes[:, 2] = 1
    assert vote_rule(votes, 3).tolist() == [0, 1, 1]


@given(st.lists(st.integers(0, 1023), min_size=1, max_size=20), st.integers(1, 9))
def test_vote_rule_monotone_in_threshold(cols, k):
    votes = ALL_VOTES[:, cols]
    assert np.all(vote_rule(votes, k + 1) <= vote_rule(votes, k))


@given(st.integers(0, 1023), st.integers(0, 9), st.integers(1, 10))
def test_vote_rule_monotone_in_votes(col, flip, k):
    v = ALL_VOTES[:, [col]].copy()
    before = vote_rule(v, k)[0]
    v[flip, 0] = 1
    assert vote_rule(v, k)[0] >= before


def test_comb_members(comb):
    labels = [label for label, _ in comb.members]
    assert labels == [f"{f}:{v}" for f in COMB_FAMILIES for v in ("default", "tuned")]
    assert all(m.family == label.split(":")[0] for label, m in comb.members)


def test_comb_predict_is_vote_rule(comb, small_dataset):
    votes = comb.votes(small_dataset.rows)
    assert votes.shape == (N_MEMBERS, len(small_dataset))
    assert np.array_equal(comb.predict(small_dataset.rows), (votes.sum(0) >= 3).astype(np.int8))


def test_comb_is_deterministic(comb, small_dataset):
    again = comb_fit(small_dataset, TINY_GRIDS, seed=3)
    assert np.array_equal(again.votes(small_dataset.rows), comb.votes(small_dataset.rows))


def test_single_candidate_grid_duplicates_defaults(small_dataset):
    grids = {fam: [{}] for fam in COMB_FAMILIES}
    model = comb_fit(small_dataset.subset(np.arange(600)), grids, seed=0)
    for i in range(0, N_MEMBERS, 2):
        assert model.members[i][1].hyperparams == model.members[i + 1][1].hyperparams


def test_save_load_round_trip(comb, small_dataset, tmp_path):
    comb.save(tmp_path / "comb")
    back = CombModel.load(tmp_path / "comb")
    assert back.vote_threshold == comb.vote_threshold
    assert np.array_equal(back.votes(small_dataset.rows), comb.votes(small_dataset.rows))


def test_member_validation(comb):
    with pytest.raises(ValueError, match="exactly 10"):
        CombModel(comb.members[:9])
    swapped = comb.members[:1] + comb.members[:1] + comb.members[2:]
    with pytest.raises(ValueError, match="one default and one tuned"):
        CombModel(swapped)
    for k in (0, 11):
        with pytest.raises(ValueError):
            CombModel(comb.members, k)


def test_failing_member_is_named():
    ds = make_dataset(np.random.default_rng(0).normal(size=(30, 2)), [0] * 30)
    grids = {fam: [{}] for fam in COMB_FAMILIES}
    with pytest.raises(MemberError, match="GB"):
        comb_fit(ds, grids)
