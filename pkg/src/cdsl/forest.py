"""Gini decision trees and bagged random forests.

Trees are grown on bootstrap multiplicities rather than duplicated rows: a
row drawn three times carries weight 3 in every class count.  Each node keeps
its class counts; a row goes left when ``x[feature] <= threshold``.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .tabular import EncodedMatrix

LEAF = -1
FORMAT_TAG = "cdsl-forest 1"


class ForestError(ValueError):
    pass


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int | None = None
    min_leaf: int = 1
    mtry: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ForestError("n_trees must be >= 1")
        if self.min_leaf < 1:
            raise ForestError("min_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ForestError("max_depth must be positive or None")
        if self.mtry is not None and self.mtry < 1:
            raise ForestError("mtry must be positive or None")

    def features_per_split(self, p: int) -> int:
        m = math.ceil(math.sqrt(p)) if self.mtry is None else self.mtry
        if m > p:
            raise ForestError(f"mtry={m} exceeds {p} features")
        return m


@dataclass(eq=False)
class Tree:
    """Flat binary tree; node 0 is the root, children ids are -1 at leaves."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray  # nodes x classes

    @property
    def node_count(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        active = self.feature[node] != LEAF
        while active.any():
            idx = np.flatnonzero(active)
            nd = node[idx]
            go_left = X[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active[idx] = self.feature[node[idx]] != LEAF
        return node

    def predict_index(self, X: np.ndarray) -> np.ndarray:
        """Index (into the class list) of the majority class at each row's leaf."""
        # argmax returns the first maximum: smaller class code wins ties
        return np.argmax(self.counts[self.apply(X)], axis=1)


@dataclass(eq=False)
class ForestModel:
    trees: list
    classes: tuple
    n_features: int
    oob_indices: list = field(default_factory=list)

    def __eq__(self, other):
        return isinstance(other, ForestModel) and dumps(self) == dumps(other)

    __hash__ = None


def _gini(counts: np.ndarray) -> np.ndarray:
    total = counts.sum(axis=-1)
    frac = counts / np.where(total > 0, total, 1.0)[..., None]
    return np.where(total > 0, 1.0 - (frac ** 2).sum(axis=-1), 0.0)


def _best_split(X, y_idx, w, rows, features, n_classes, min_leaf):
    """Best (gain, feature, threshold) over candidate features, or None.

    All candidate features are scored in one pass.  Ties go to the feature
    drawn first, then to the lowest cut.
    """
    node_counts = np.bincount(y_idx[rows], weights=w[rows], minlength=n_classes)
    total = node_counts.sum()
    parent = _gini(node_counts)
    xs = X[np.ix_(rows, features)]
    order = np.argsort(xs, axis=0, kind="stable")
    xs_sorted = np.take_along_axis(xs, order, axis=0)
    onehot = np.eye(n_classes)[y_idx[rows]] * w[rows][:, None]
    # left counts for a cut after each sorted position: (rows - 1, features, classes)
    left = np.cumsum(onehot[order], axis=0)[:-1]
    right = node_counts - left
    nl = left.sum(axis=-1)
    nr = total - nl
    # cuts only where the value changes
    ok = (xs_sorted[1:] != xs_sorted[:-1]) & (nl >= min_leaf) & (nr >= min_leaf)
    if not ok.any():
        return None
    gain = parent - (nl * _gini(left) + nr * _gini(right)) / total
    gain = np.where(ok, gain, -np.inf)
    cut = np.argmax(gain, axis=0)
    best_gain = gain[cut, np.arange(len(features))]
    j = int(np.argmax(best_gain))
    if not best_gain[j] > 1e-12:
        return None
    i = cut[j]
    threshold = 0.5 * (xs_sorted[i, j] + xs_sorted[i + 1, j])
    return float(best_gain[j]), int(features[j]), float(threshold)


def grow_tree(X: np.ndarray, y_idx: np.ndarray, weights: np.ndarray, n_classes: int,
              mtry: int, rng: np.random.Generator, max_depth: int | None = None,
              min_leaf: int = 1) -> Tree:
    """Grow one tree on rows with positive weight (bootstrap multiplicity)."""
    X = np.asarray(X, dtype=float)
    w = np.asarray(weights, dtype=float)
    p = X.shape[1]
    feature, threshold, left, right, counts = [], [], [], [], []

    def new_node(rows):
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append(np.bincount(y_idx[rows], weights=w[rows], minlength=n_classes))
        return len(feature) - 1

    root_rows = np.flatnonzero(w > 0)
    stack = [(new_node(root_rows), root_rows, 0)]
    while stack:
        node, rows, depth = stack.pop()
        c = counts[node]
        if np.count_nonzero(c) <= 1 or (max_depth is not None and depth >= max_depth) \
                or c.sum() < 2 * min_leaf:
            continue
        features = rng.choice(p, size=mtry, replace=False)
        split = _best_split(X, y_idx, w, rows, features, n_classes, min_leaf)
        if split is None:
            continue
        _, f, thr = split
        go_left = X[rows, f] <= thr
        lnode = new_node(rows[go_left])
        rnode = new_node(rows[~go_left])
        feature[node], threshold[node] = f, thr
        left[node], right[node] = lnode, rnode
        # right pushed first so the left subtree is expanded first
        stack.append((rnode, rows[~go_left], depth + 1))
        stack.append((lnode, rows[go_left], depth + 1))
    return Tree(np.array(feature, dtype=np.int64), np.array(threshold, dtype=float),
                np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
                np.array(counts, dtype=float).reshape(-1, n_classes))


def _features(X) -> np.ndarray:
    X = X.values if isinstance(X, EncodedMatrix) else X
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X


def train_forest(X, y: Sequence, cfg: ForestConfig = ForestConfig(),
                 classes: Sequence | None = None) -> ForestModel:
    """Train a random forest; tree ``t`` draws from a generator seeded ``seed ^ t``."""
    X = _features(X)
    y = np.asarray(y)
    n, p = X.shape
    if n == 0 or p == 0:
        raise ForestError("empty training matrix")
    if len(y) != n:
        raise ForestError("X and y differ in row count")
    classes = tuple(sorted(set(y.tolist()))) if classes is None else tuple(classes)
    pos = {c: i for i, c in enumerate(classes)}
    try:
        y_idx = np.array([pos[v] for v in y.tolist()], dtype=np.int64)
    except KeyError as exc:
        raise ForestError(f"label {exc.args[0]!r} not among classes {classes}") from None
    mtry = cfg.features_per_split(p)
    trees, oob = [], []
    for t in range(cfg.n_trees):
        rng = np.random.default_rng(cfg.seed ^ t)
        draws = np.bincount(rng.integers(0, n, size=n), minlength=n)
        trees.append(grow_tree(X, y_idx, draws, len(classes), mtry, rng,
                               cfg.max_depth, cfg.min_leaf))
        oob.append(np.flatnonzero(draws == 0))
    return ForestModel(trees, classes, p, oob)


def predict_forest(m: ForestModel, X_new) -> list:
    """Majority vote over trees; ties go to the class listed first."""
    X = _features(X_new)
    if X.shape[1] != m.n_features:
        raise ForestError(f"expected {m.n_features} features, got {X.shape[1]}")
    votes = np.zeros((len(X), len(m.classes)), dtype=np.int64)
    rows = np.arange(len(X))
    for tree in m.trees:
        np.add.at(votes, (rows, tree.predict_index(X)), 1)
    return [m.classes[i] for i in np.argmax(votes, axis=1)]


def split_count(m: ForestModel) -> np.ndarray:
    """Number of splits on each feature across the forest."""
    out = np.zeros(m.n_features, dtype=np.int64)
    for tree in m.trees:
        f = tree.feature[tree.feature != LEAF]
        np.add.at(out, f, 1)
    return out


# persistence ---------------------------------------------------------------

def _fmt_class(c) -> str:
    return repr(c)


def _parse_class(s: str):
    return ast.literal_eval(s)


def _fmt_counts(c: np.ndarray) -> str:
    return " ".join(float(v).hex() for v in c)


def dumps(m: ForestModel) -> str:
    """Serialize a forest as text.

    Layout::

        cdsl-forest 1
        n_trees <T> p <P> classes <repr> <repr> ...
        tree <i> nodes <N> oob <comma-separated rows or ->
        S <feature> <threshold-hex> <count-hex>...     (split, preorder)
        L <count-hex>...                                (leaf)
    """
    lines = [FORMAT_TAG,
             f"n_trees {len(m.trees)} p {m.n_features} classes "
             + " ".join(_fmt_class(c) for c in m.classes)]
    for i, tree in enumerate(m.trees):
        oob = m.oob_indices[i] if i < len(m.oob_indices) else np.array([], dtype=np.int64)
        lines.append(f"tree {i} nodes {tree.node_count} oob "
                     + (",".join(str(int(r)) for r in oob) or "-"))
        stack = [0]
        while stack:
            nd = stack.pop()
            if tree.feature[nd] == LEAF:
                lines.append(f"L {_fmt_counts(tree.counts[nd])}")
            else:
                lines.append(f"S {int(tree.feature[nd])} {float(tree.threshold[nd]).hex()} "
                             f"{_fmt_counts(tree.counts[nd])}")
                stack.append(int(tree.right[nd]))
                stack.append(int(tree.left[nd]))
    return "\n".join(lines) + "\n"


def loads(text: str) -> ForestModel:
    lines = text.splitlines()
    if not lines or lines[0] != FORMAT_TAG:
        raise ForestError("not a forest model file")
    head = lines[1].split(" ")
    if head[0] != "n_trees" or head[2] != "p" or head[4] != "classes":
        raise ForestError("malformed forest header")
    n_trees, p = int(head[1]), int(head[3])
    classes = tuple(_parse_class(s) for s in head[5:])
    k = len(classes)
    trees, oob = [], []
    pos = 2
    for _ in range(n_trees):
        parts = lines[pos].split(" ")
        n_nodes = int(parts[3])
        oob.append(np.array([] if parts[5] == "-" else [int(v) for v in parts[5].split(",")],
                            dtype=np.int64))
        records = lines[pos + 1:pos + 1 + n_nodes]
        pos += 1 + n_nodes
        trees.append(_build_tree(records, k))
    return ForestModel(trees, classes, p, oob)


def _build_tree(records: list[str], k: int) -> Tree:
    n = len(records)
    feature = np.full(n, LEAF, dtype=np.int64)
    threshold = np.zeros(n)
    left = np.full(n, -1, dtype=np.int64)
    right = np.full(n, -1, dtype=np.int64)
    counts = np.zeros((n, k))
    # preorder: a split's left child is the next record; the right child
    # follows the left subtree, so pending right slots live on a stack
    pending: list[int] = []
    for nd, rec in enumerate(records):
        parts = rec.split(" ")
        if nd > 0:
            if not pending:
                raise ForestError("extra node records after a complete tree")
            parent = pending.pop()
            if left[parent] == -1:
                left[parent] = nd
                pending.append(parent)
            else:
                right[parent] = nd
        if parts[0] == "L":
            counts[nd] = [float.fromhex(v) for v in parts[1:]]
        elif parts[0] == "S":
            feature[nd] = int(parts[1])
            threshold[nd] = float.fromhex(parts[2])
            counts[nd] = [float.fromhex(v) for v in parts[3:]]
            pending.append(nd)
        else:
            raise ForestError(f"bad node record {rec!r}")
    if pending:
        raise ForestError("truncated tree records")
    return Tree(feature, threshold, left, right, counts)


def save(m: ForestModel, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(m))


def load(path) -> ForestModel:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
