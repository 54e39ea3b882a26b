import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mohpi.errors import DegenerateTargetError, ShapeMismatchError
from mohpi.forest import Forest, ForestParams, RegressionTree, derive_seed, fit, leaf_partition
from oracles import r_squared, random_tree, traverse

UNIT2 = np.array([[0.0, 1.0], [0.0, 1.0]])


def _xy(n=400, d=3, seed=0, f=lambda X: 3 * X[:, 0]):
    rng = np.random.default_rng(seed)
    X = rng.random((n, d))
    return X, f(X)


def test_constant_target_gives_single_leaves():
    X, _ = _xy(100)
    forest = fit(X, np.full(100, 2.5), ForestParams(n_trees=5))
    assert all(t.n_nodes == 1 for t in forest.trees)
    assert forest.predict(X[0]) == 2.5


def test_needs_two_samples():
    with pytest.raises(DegenerateTargetError):
        fit(np.zeros((1, 2)), np.zeros(1), ForestParams(n_trees=2))


def test_shape_mismatch():
    with pytest.raises(ShapeMismatchError):
        fit(np.zeros((5, 2)), np.zeros(4))


def test_fit_is_deterministic():
    X, y = _xy(300)
    a = fit(X, y, ForestParams(n_trees=20, seed=11))
    b = fit(X, y, ForestParams(n_trees=20, seed=11))
    c = fit(X, y, ForestParams(n_trees=20, seed=12))
    assert a.to_json() == b.to_json()
    assert a.to_json() != c.to_json()


def test_thread_count_does_not_matter():
    X, y = _xy(300)
    p = ForestParams(n_trees=16, seed=4)
    assert fit(X, y, p, n_threads=1).to_json() == fit(X, y, p, n_threads=4).to_json()


def test_fits_linear_signal():
    X, y = _xy(500)
    Xt, yt = _xy(500, seed=1)
    forest = fit(X, y, ForestParams(n_trees=100, seed=0))
    assert r_squared(yt, forest.predict(Xt)) >= 0.95


def test_tie_goes_left():
    tree = RegressionTree.from_nodes([(0, 0.5, 1, 2), (1.0,), (2.0,)], UNIT2)
    assert tree.predict([[0.5, 0.3], [0.5000001, 0.3]]).tolist() == [1.0, 2.0]


def test_prediction_is_mean_of_traversals():
    X, y = _xy(200, f=lambda X: np.sin(6 * X[:, 0]) + X[:, 1] ** 2)
    forest = fit(X, y, ForestParams(n_trees=25, seed=3))
    Q = np.random.default_rng(9).random((50, 3))
    oracle = [np.mean([traverse(t, q) for t in forest.trees]) for q in Q]
    assert forest.predict(Q) == pytest.approx(oracle, abs=1e-12)


def test_children_come_after_parents():
    X, y = _xy(200)
    for tree in fit(X, y, ForestParams(n_trees=10)).trees:
        inner = np.flatnonzero(tree.feature >= 0)
        assert np.all(tree.left[inner] > inner)
        assert np.all(tree.right[inner] > inner)


def test_min_samples_leaf_and_depth():
    X, y = _xy(300, f=lambda X: X[:, 0] + X[:, 1])
    deep = fit(X, y, ForestParams(n_trees=1, max_depth=2, bootstrap=False))
    assert deep.trees[0].n_leaves <= 4
    coarse = fit(X, y, ForestParams(n_trees=1, min_samples_leaf=50, bootstrap=False))
    t = coarse.trees[0]
    counts = np.bincount(_leaf_ids(t, X), minlength=t.n_nodes)
    assert counts[t.feature < 0].min() >= 50


def _leaf_ids(tree, X):
    out = []
    for x in X:
        node = 0
        while tree.feature[node] >= 0:
            node = tree.left[node] if x[tree.feature[node]] <= tree.threshold[node] else tree.right[node]
        out.append(node)
    return np.array(out)


def test_leaf_partition_example():
    tree = RegressionTree.from_nodes(
        [(0, 0.5, 1, 2), (1.0,), (1, 0.25, 3, 4), (2.0,), (3.0,)], UNIT2)
    lo, hi, v = leaf_partition(tree)
    assert v.tolist() == [1.0, 2.0, 3.0]
    assert lo.tolist() == [[0.0, 0.0], [0.5, 0.0], [0.5, 0.25]]
    assert hi.tolist() == [[0.5, 1.0], [1.0, 0.25], [1.0, 1.0]]


def test_leaf_partition_volumes_match_monte_carlo():
    tree = random_tree(np.random.default_rng(5), 3, 6)
    lo, hi, _ = leaf_partition(tree)
    vol = np.prod(hi - lo, axis=1)
    U = np.random.default_rng(6).random((200_000, 3))
    ids = _leaf_ids(tree, U)
    leaves = np.flatnonzero(tree.feature < 0)
    freq = np.array([np.mean(ids == l) for l in leaves])
    se = np.sqrt(vol * (1 - vol) / len(U))
    assert np.all(np.abs(freq - vol) <= 4 * se + 1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 4), st.integers(1, 32))
def test_leaf_boxes_partition_the_cube(seed, d, leaves):
    tree = random_tree(np.random.default_rng(seed), d, leaves)
    lo, hi, _ = leaf_partition(tree)
    assert np.sum(np.prod(hi - lo, axis=1)) == pytest.approx(1.0, abs=1e-12)
    # every box contains its own center, and only that box does
    centers = (lo + hi) / 2
    ids = _leaf_ids(tree, centers)
    assert ids.tolist() == np.flatnonzero(tree.feature < 0).tolist()


def test_informative_feature_dominates_splits():
    X, y = _xy(500, d=4, f=lambda X: 5 * X[:, 2])
    forest = fit(X, y, ForestParams(n_trees=30, seed=2, max_depth=3, mtry=4))
    feats = np.concatenate([t.feature[t.feature >= 0] for t in forest.trees])
    assert np.mean(feats == 2) > 0.9
    # with one candidate feature per node the choice is random
    loose = fit(X, y, ForestParams(n_trees=30, seed=2, max_depth=3, mtry=1))
    feats = np.concatenate([t.feature[t.feature >= 0] for t in loose.trees])
    assert np.mean(feats == 2) < 0.6


def test_serialization_round_trip():
    X, y = _xy(100)
    forest = fit(X, y, ForestParams(n_trees=5, seed=1))
    back = Forest.from_dict(json.loads(forest.to_json()))
    assert back.to_json() == forest.to_json()
    assert np.array_equal(back.predict(X), forest.predict(X))


def test_params_validation_and_mtry():
    assert ForestParams().resolved_mtry(8) == 2
    assert ForestParams().resolved_mtry(2) == 1
    assert ForestParams(mtry=3).resolved_mtry(8) == 3
    assert ForestParams.from_dict(ForestParams(seed=5).to_dict()) == ForestParams(seed=5)


def test_derive_seed_is_stable():
    assert derive_seed(1, 2) == derive_seed(1, 2)
    assert derive_seed(1, 2) != derive_seed(1, 3)
    assert derive_seed(1, 2) != derive_seed(2, 1)
