import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdsl import fixtures
from cdsl.forest import (LEAF, ForestConfig, ForestError, ForestModel, Tree, _gini, dumps,
                         grow_tree, load, loads, predict_forest, save, split_count,
                         train_forest)


def xor_accuracy(model, X, y):
    return float(np.mean(np.array(predict_forest(model, X)) == y))


def walk_gains(tree):
    for nd in range(tree.node_count):
        if tree.feature[nd] == LEAF:
            continue
        c, l, r = tree.counts[nd], tree.counts[tree.left[nd]], tree.counts[tree.right[nd]]
        yield _gini(c) - (l.sum() * _gini(l) + r.sum() * _gini(r)) / c.sum()


def test_single_class_predicts_constant(rng):
    X = rng.normal(size=(30, 3))
    m = train_forest(X, [4] * 30, ForestConfig(n_trees=5))
    assert predict_forest(m, rng.normal(size=(10, 3))) == [4] * 10
    assert all(t.node_count == 1 for t in m.trees)


def test_determinism_node_by_node():
    X, y = fixtures.xor_dataset()
    a = train_forest(X, y, ForestConfig(n_trees=10, seed=42))
    b = train_forest(X, y, ForestConfig(n_trees=10, seed=42))
    for ta, tb in zip(a.trees, b.trees):
        for attr in ("feature", "threshold", "left", "right", "counts"):
            assert np.array_equal(getattr(ta, attr), getattr(tb, attr))
    assert dumps(a) == dumps(b)
    assert dumps(train_forest(X, y, ForestConfig(n_trees=10, seed=43))) != dumps(a)


def test_xor_accuracy_and_ensemble_no_harm():
    X, y = fixtures.xor_dataset()
    forest = train_forest(X, y, ForestConfig(n_trees=50, seed=0))
    single = train_forest(X, y, ForestConfig(n_trees=1, seed=0))
    assert xor_accuracy(forest, X, y) > 0.95
    assert xor_accuracy(forest, X, y) >= xor_accuracy(single, X, y)
    assert split_count(forest).sum() == sum(int((t.feature != LEAF).sum()) for t in forest.trees)


def test_vote_tie_goes_to_smaller_class():
    def stump(cls_index):
        counts = np.zeros((1, 4))
        counts[0, cls_index] = 1
        return Tree(np.array([LEAF]), np.zeros(1), np.array([-1]), np.array([-1]), counts)

    m = ForestModel([stump(3), stump(0)], (1, 2, 3, 4), 1)
    assert predict_forest(m, [[0.0]]) == [1]
    one = ForestModel([stump(2)], (1, 2, 3, 4), 1)
    assert predict_forest(one, [[5.0]]) == [3]


def test_oob_fraction(rng):
    X = rng.normal(size=(1200, 2))
    y = (X[:, 0] > 0).astype(int)
    m = train_forest(X, y, ForestConfig(n_trees=20, max_depth=2))
    for oob in m.oob_indices:
        assert 0.25 <= len(oob) / 1200 <= 0.50


def node_rows(tree, X, rows):
    # rows of X reaching each node
    out = {0: rows}
    for nd in range(tree.node_count):
        if tree.feature[nd] != LEAF and nd in out:
            r = out[nd]
            go = X[r, tree.feature[nd]] <= tree.threshold[nd]
            out[tree.left[nd]], out[tree.right[nd]] = r[go], r[~go]
    return out


def test_leaf_counts_and_midpoints():
    X, y = fixtures.xor_dataset()
    m = train_forest(X, y, ForestConfig(n_trees=5, seed=1))
    for t, oob in zip(m.trees, m.oob_indices):
        in_bag = np.setdiff1d(np.arange(len(X)), oob)
        reach = node_rows(t, X, in_bag)
        # root carries the bootstrap size; children partition parent counts
        assert t.counts[0].sum() == len(X)
        assert all(g > 0 for g in walk_gains(t))
        for nd in np.flatnonzero(t.feature != LEAF):
            np.testing.assert_array_equal(t.counts[nd], t.counts[t.left[nd]] + t.counts[t.right[nd]])
            vals = np.unique(X[reach[nd], t.feature[nd]])
            i = np.searchsorted(vals, t.threshold[nd])
            assert t.threshold[nd] == 0.5 * (vals[i - 1] + vals[i])


def test_errors():
    with pytest.raises(ForestError):
        train_forest(np.zeros((0, 2)), [])
    with pytest.raises(ForestError):
        ForestConfig(n_trees=0)
    with pytest.raises(ForestError):
        train_forest(np.zeros((4, 2)), [1, 2, 1, 2], ForestConfig(mtry=3))
    m = train_forest(np.eye(4), [1, 2, 1, 2], ForestConfig(n_trees=2))
    with pytest.raises(ForestError):
        predict_forest(m, np.zeros((1, 3)))
    with pytest.raises(ForestError):
        loads("something else\n")


def test_persistence_bit_exact(tmp_path):
    X, y = fixtures.xor_dataset()
    m = train_forest(X, y, ForestConfig(n_trees=8, seed=5))
    save(m, tmp_path / "m.txt")
    back = load(tmp_path / "m.txt")
    assert back == m
    assert dumps(back) == (tmp_path / "m.txt").read_text()
    assert predict_forest(back, X) == predict_forest(m, X)
    for a, b in zip(m.trees, back.trees):
        assert np.array_equal(np.sort(a.threshold), np.sort(b.threshold))
    labels = train_forest(np.eye(3), ["b", "a", "c"], ForestConfig(n_trees=2))
    assert loads(dumps(labels)).classes == ("a", "b", "c")


def test_deep_tree_round_trip():
    # a staircase label forces a chain-shaped tree deeper than the recursion limit
    n = 1500
    X = np.arange(n, dtype=float)[:, None]
    y = np.arange(n) % 2
    t = grow_tree(X, y, np.ones(n), 2, 1, np.random.default_rng(0))
    m = ForestModel([t], (0, 1), 1, [np.array([], dtype=np.int64)])
    assert loads(dumps(m)) == m


# properties ---------------------------------------------------------------

@given(st.integers(0, 2**31), st.integers(10, 60), st.randoms(use_true_random=False))
@settings(max_examples=30, deadline=None)
def test_row_permutation_with_same_draws(seed, n, r):
    rng = np.random.default_rng(seed)
    X = np.round(rng.normal(size=(n, 3)), 1)
    y = rng.integers(0, 3, size=n)
    w = np.bincount(rng.integers(0, n, size=n), minlength=n).astype(float)
    perm = list(range(n))
    r.shuffle(perm)
    a = grow_tree(X, y, w, 3, 2, np.random.default_rng(seed))
    b = grow_tree(X[perm], y[perm], w[perm], 3, 2, np.random.default_rng(seed))
    probe = rng.normal(size=(40, 3))
    assert np.array_equal(a.predict_index(probe), b.predict_index(probe))
    np.testing.assert_array_equal(a.threshold, b.threshold)
