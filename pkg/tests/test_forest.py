import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seizure_acs.exceptions import DataError
from seizure_acs.forest import RandomForest, Tree, to_binary_labels


def _xor(n=200, margin=0.5, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, (n * 4, 2))
    X = X[np.all(np.abs(X) > margin / 2, axis=1)][:n]
    y = (np.sign(X[:, 0]) != np.sign(X[:, 1])).astype(int)
    return X, y


def test_separable_four_points():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0, 0, 1, 1])
    rf = RandomForest(n_estimators=1, bootstrap=False).fit(X, y)
    tree = rf.trees_[0]
    assert tree.feature[0] == 0 and tree.threshold[0] == 1.5
    assert np.array_equal(rf.predict(X), y)
    np.testing.assert_allclose(rf.predict_proba(X), np.eye(2)[y])


def test_single_leaf_posterior():
    X = np.zeros((4, 3))
    y = np.array([1, 1, 1, 0])
    rf = RandomForest(n_estimators=5, bootstrap=False).fit(X, y)
    assert all(t.n_internal == 0 for t in rf.trees_)
    np.testing.assert_allclose(rf.predict_proba(np.ones((2, 3)))[:, 1], 0.75)
    # no split anywhere: importance falls back to uniform
    np.testing.assert_allclose(rf.feature_importances_, 1 / 3)


def test_xor_out_of_bag():
    X, y = _xor()
    rf = RandomForest(n_estimators=100, oob_score=True, random_state=1).fit(X, y)
    assert rf.oob_score_ > 0.95


def test_deterministic_and_thread_independent():
    X, y = _xor(seed=2)
    a = RandomForest(n_estimators=30, random_state=7).fit(X, y)
    b = RandomForest(n_estimators=30, random_state=7).fit(X, y)
    c = RandomForest(n_estimators=30, random_state=7, n_jobs=4).fit(X, y)
    assert a.to_dict() == b.to_dict() == c.to_dict()
    d = RandomForest(n_estimators=30, random_state=8).fit(X, y)
    assert a.to_dict() != d.to_dict()


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**20), n_classes=st.integers(2, 4))
def test_probabilities_sum_to_one(seed, n_classes):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((40, 5))
    y = np.arange(40) % n_classes
    rf = RandomForest(n_estimators=10, random_state=seed).fit(X, y)
    p = rf.predict_proba(rng.standard_normal((15, 5)))
    assert p.shape == (15, n_classes)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(p >= 0)


@pytest.mark.parametrize("importance", ["split", "impurity"])
def test_importance_finds_label_feature(importance):
    hits = 0
    for seed in range(10):
        rng = np.random.default_rng(100 + seed)
        y = rng.integers(0, 2, 120)
        X = rng.standard_normal((120, 10))
        X[:, 0] = y + 0.1 * rng.standard_normal(120)
        rf = RandomForest(n_estimators=50, importance=importance, random_state=seed).fit(X, y)
        hits += int(np.argmax(rf.feature_importances_) == 0)
        assert rf.feature_importances_.sum() == pytest.approx(1.0)
    assert hits >= 9


def test_more_trees_do_not_hurt():
    X, y = _xor(n=300, margin=0.2, seed=3)
    Xt, yt = _xor(n=300, margin=0.2, seed=4)
    one = RandomForest(n_estimators=1, random_state=0).fit(X, y).score(Xt, yt)
    many = RandomForest(n_estimators=100, random_state=0).fit(X, y).score(Xt, yt)
    assert many >= one


def test_serialization_round_trip(tmp_path):
    X, y = _xor(seed=5)
    labels = np.where(y == 1, "ictal", "interictal")
    rf = RandomForest(n_estimators=20, random_state=3).fit(X, labels)
    rf.save(tmp_path / "m.json")
    back = RandomForest.load(tmp_path / "m.json")
    assert np.array_equal(back.predict_proba(X), rf.predict_proba(X))
    assert list(back.classes_) == ["ictal", "interictal"]
    assert "n_jobs" not in back.to_dict()["params"]
    t = rf.trees_[0]
    assert np.array_equal(Tree.from_dict(t.to_dict()).apply(X), t.apply(X))


def test_fit_errors():
    with pytest.raises(DataError):
        RandomForest().fit(np.zeros((3, 2)), [1, 1, 1])
    with pytest.raises(Exception):
        RandomForest(n_estimators=2).predict(np.zeros((1, 2)))
    rf = RandomForest(n_estimators=2).fit(np.arange(8.0).reshape(4, 2), [0, 1, 0, 1])
    with pytest.raises(DataError):
        rf.predict(np.zeros((1, 3)))


def test_to_binary_labels():
    out = to_binary_labels(["early_ictal", "ictal", "interictal"])
    assert out.tolist() == [1, 1, 0]
    with pytest.raises(DataError):
        to_binary_labels(["postictal"])


def test_single_usable_feature_takes_all_importance():
    rng = np.random.default_rng(9)
    X = np.zeros((60, 4))
    X[:, 0] = rng.standard_normal(60)
    y = (X[:, 0] > 0.3).astype(int)
    rf = RandomForest(n_estimators=10, random_state=0).fit(X, y)
    np.testing.assert_array_equal(rf.feature_importances_, [1.0, 0.0, 0.0, 0.0])


def test_split_counts_match_internal_nodes():
    X, y = _xor(seed=6)
    rf = RandomForest(n_estimators=15, random_state=2).fit(X, y)
    assert rf.split_counts_.sum() == sum(t.n_internal for t in rf.trees_)
    assert abs(rf.feature_importances_.sum() - 1.0) <= 1e-12


def test_ensemble_stability_on_separable_set():
    rng = np.random.default_rng(11)
    X = np.r_[rng.normal(-2, 1, (40, 3)), rng.normal(2, 1, (40, 3))]
    y = np.r_[np.zeros(40, int), np.ones(40, int)]
    one = [RandomForest(n_estimators=1, random_state=s).fit(X, y).score(X, y) for s in range(10)]
    many = [RandomForest(n_estimators=100, random_state=s).fit(X, y).score(X, y) for s in range(10)]
    assert np.mean(many) >= np.mean(one)


def test_posterior_favours_own_cluster():
    rng = np.random.default_rng(12)
    centers = np.array([[0, 0], [5, 5], [0, 5]])
    X = np.concatenate([c + 0.3 * rng.standard_normal((20, 2)) for c in centers])
    y = np.repeat(["early_ictal", "ictal", "interictal"], 20)
    rf = RandomForest(n_estimators=30, random_state=1).fit(X, y)
    p = rf.predict_proba(X)
    own = p[np.arange(60), np.searchsorted(rf.classes_, y)]
    assert np.all(own >= p.max(axis=1))


def test_all_interictal_maps_to_non_seizure():
    assert to_binary_labels(["interictal"] * 3).tolist() == [0, 0, 0]
