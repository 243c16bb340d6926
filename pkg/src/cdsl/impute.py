"""Chained-equation imputation with predictive mean matching (PMM).

Numeric targets are imputed by PMM: a least-squares model of the target on
the other columns scores every row, and each missing row copies the observed
value of one of its ``donor_pool`` closest-scoring observed rows.  Categorical
targets copy the category of the observed row whose one-vs-rest score vector
is nearest.  A single completed table is produced.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .tabular import NUMERIC, ColumnSpec, Table, encode_and_scale, format_number

logger = logging.getLogger(__name__)

LEFT_TO_RIGHT = "left-to-right"
MOST_MISSING_FIRST = "most-missing-first"

# score-matrix elements held per nearest-donor block
_BLOCK_ELEMENTS = 4_000_000


class ImputationError(ValueError):
    pass


@dataclass(frozen=True)
class MiceConfig:
    iterations: int = 50
    donor_pool: int = 5
    seed: int = 0
    visit_order: str = LEFT_TO_RIGHT
    ridge: float = 1e-8

    def __post_init__(self):
        if self.iterations < 1:
            raise ImputationError("iterations must be >= 1")
        if self.donor_pool < 1:
            raise ImputationError("donor_pool must be >= 1")
        if self.ridge < 0:
            raise ImputationError("ridge must be >= 0")
        if self.visit_order not in (LEFT_TO_RIGHT, MOST_MISSING_FIRST):
            raise ImputationError(f"unknown visit order {self.visit_order!r}")


@dataclass(frozen=True, eq=False)
class MiceResult:
    completed: Table
    imputed_cells: list = field(default_factory=list)
    # (iteration, column, mean of imputed values); iteration 0 is the random fill
    chain_means: list = field(default_factory=list)

    def chain(self, column: str) -> list[float]:
        return [m for _, c, m in self.chain_means if c == column]


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _missing(spec: ColumnSpec, col: np.ndarray) -> np.ndarray:
    return np.isnan(col) if spec.kind == NUMERIC else col < 0


def initialize_missing(t: Table, columns: Sequence[str], seed) -> Table:
    """Fill missing cells of ``columns`` with random draws of observed values."""
    rng = _rng(seed)
    out = t
    for name in columns:
        spec = t.spec(name)
        col = t.column(name)
        miss = _missing(spec, col)
        if not miss.any():
            continue
        observed = col[~miss]
        if observed.size == 0:
            raise ImputationError(f"column {name!r} has no observed values")
        filled = col.copy()
        filled[miss] = observed[rng.integers(0, observed.size, size=int(miss.sum()))]
        out = out.with_column(spec, filled)
    return out


def _solve_ls(X: np.ndarray, Y: np.ndarray, ridge: float) -> np.ndarray:
    A = np.hstack([np.ones((len(X), 1)), X])
    gram = A.T @ A + ridge * np.eye(A.shape[1])
    try:
        return np.linalg.solve(gram, A.T @ Y)
    except np.linalg.LinAlgError as exc:
        raise ImputationError(f"singular least-squares system: {exc}") from exc


def _predict_ls(X: np.ndarray, beta: np.ndarray) -> np.ndarray:
    return beta[0] + X @ beta[1:]


def match_donors(pred_obs: np.ndarray, obs_rows: np.ndarray, query: float, d: int) -> np.ndarray:
    """The ``d`` observed rows whose predictions are closest to ``query``.

    ``pred_obs`` must be sorted by (prediction, row) and ``obs_rows`` aligned
    with it.  Equal distances are resolved by lower row index.
    """
    n = len(pred_obs)
    pos = int(np.searchsorted(pred_obs, query))
    left, right = pos - 1, pos
    chosen: list[np.ndarray] = []
    need = d
    while need > 0:
        dl = query - pred_obs[left] if left >= 0 else np.inf
        dr = pred_obs[right] - query if right < n else np.inf
        dist = min(dl, dr)
        parts = []
        if dl == dist:
            start = int(np.searchsorted(pred_obs, pred_obs[left], side="left"))
            parts.append(obs_rows[start:left + 1][:need])
            left = start - 1
        if dr == dist:
            stop = int(np.searchsorted(pred_obs, pred_obs[right], side="right"))
            parts.append(obs_rows[right:stop][:need])
            right = stop
        run = np.sort(np.concatenate(parts))[:need]
        chosen.append(run)
        need -= len(run)
    return np.concatenate(chosen)


def pmm_impute_variable(predictors, target, d: int = 5, seed=0, ridge: float = 1e-8,
                        observed: np.ndarray | None = None) -> np.ndarray:
    """Impute the missing entries of a numeric column by predictive mean matching.

    ``target`` marks missing entries with NaN unless an explicit ``observed``
    mask is given.  Returns a full copy of the column with every missing entry
    replaced by the value of a randomly chosen donor.
    """
    X = np.asarray(predictors, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.array(target, dtype=float)
    obs = ~np.isnan(y) if observed is None else np.asarray(observed, dtype=bool)
    if len(X) != len(y):
        raise ImputationError("predictors and target differ in row count")
    if not np.isfinite(X).all():
        raise ImputationError("predictor matrix has missing or non-finite entries")
    obs_rows = np.flatnonzero(obs)
    mis_rows = np.flatnonzero(~obs)
    if len(obs_rows) < 2:
        raise ImputationError("PMM needs at least 2 observed target values")
    if d > len(obs_rows):
        raise ImputationError(f"donor pool {d} exceeds {len(obs_rows)} observed rows")
    if len(mis_rows) == 0:
        return y
    beta = _solve_ls(X[obs_rows], y[obs_rows], ridge)
    pred = _predict_ls(X, beta)
    order = np.lexsort((obs_rows, pred[obs_rows]))
    sorted_pred = pred[obs_rows][order]
    sorted_rows = obs_rows[order]
    rng = _rng(seed)
    picks = rng.integers(0, d, size=len(mis_rows))
    for r, pick in zip(mis_rows, picks):
        donors = match_donors(sorted_pred, sorted_rows, pred[r], d)
        y[r] = y[donors[pick]]
    return y


def nearest_category_impute(predictors, codes, n_categories: int, ridge: float = 1e-8,
                            observed: np.ndarray | None = None) -> np.ndarray:
    """Impute category codes by copying the nearest observed row's category.

    Rows are compared through their one-vs-rest least-squares score vectors;
    the lowest-index observed row wins ties.
    """
    X = np.asarray(predictors, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    codes = np.array(codes, dtype=np.int64)
    obs = codes >= 0 if observed is None else np.asarray(observed, dtype=bool)
    obs_rows = np.flatnonzero(obs)
    mis_rows = np.flatnonzero(~obs)
    if len(obs_rows) == 0:
        raise ImputationError("no observed categories to copy")
    if len(mis_rows) == 0:
        return codes
    Y = np.zeros((len(obs_rows), n_categories))
    Y[np.arange(len(obs_rows)), codes[obs_rows]] = 1.0
    scores = _predict_ls(X, _solve_ls(X[obs_rows], Y, ridge))
    s_obs = scores[obs_rows]
    block = max(1, _BLOCK_ELEMENTS // max(1, s_obs.size))
    for start in range(0, len(mis_rows), block):
        rows = mis_rows[start:start + block]
        diff = scores[rows][:, None, :] - s_obs[None, :, :]
        dist = np.einsum("ijk,ijk->ij", diff, diff)
        codes[rows] = codes[obs_rows[np.argmin(dist, axis=1)]]
    return codes


def _visit_order(t: Table, targets: list[str], order: str) -> list[str]:
    if order == LEFT_TO_RIGHT:
        return targets
    counts = {n: int(_missing(t.spec(n), t.column(n)).sum()) for n in targets}
    return sorted(targets, key=lambda n: (-counts[n], targets.index(n)))


def mice_impute(t: Table, columns: Sequence[str], cfg: MiceConfig = MiceConfig()) -> MiceResult:
    """Complete the listed columns by iterated chained-equation sweeps.

    Every listed column serves as a predictor for the others; columns not
    listed are carried through untouched.
    """
    columns = list(columns)
    for name in columns:
        t.spec(name)
    miss = {n: _missing(t.spec(n), t.column(n)) for n in columns}
    targets = [n for n in columns if miss[n].any()]
    if not targets:
        return MiceResult(t, [], [])
    for n in targets:
        if miss[n].all():
            raise ImputationError(f"column {n!r} has no observed values")

    current = initialize_missing(t, targets, np.random.default_rng([cfg.seed, 0]))
    chain = [(0, n, _imputed_mean(current, n, miss[n])) for n in targets]
    visit = _visit_order(t, targets, cfg.visit_order)
    for it in range(1, cfg.iterations + 1):
        for j, name in enumerate(visit):
            others = [c for c in columns if c != name]
            X = encode_and_scale(current, others).values
            spec = current.spec(name)
            col = current.column(name)
            if spec.kind == NUMERIC:
                rng = np.random.default_rng([cfg.seed, it, columns.index(name) + 1])
                new = pmm_impute_variable(X, col, cfg.donor_pool, rng, cfg.ridge,
                                          observed=~miss[name])
            else:
                new = nearest_category_impute(X, col, len(spec.categories), cfg.ridge,
                                              observed=~miss[name])
            current = current.with_column(spec, new)
        for name in targets:
            chain.append((it, name, _imputed_mean(current, name, miss[name])))
        logger.debug("mice sweep %d/%d done", it, cfg.iterations)

    cells = []
    for name in targets:
        spec = current.spec(name)
        col = current.column(name)
        for r in np.flatnonzero(miss[name]):
            v = float(col[r]) if spec.kind == NUMERIC else spec.categories[col[r]]
            cells.append((int(r), name, v))
    cells.sort(key=lambda c: (columns.index(c[1]), c[0]))
    return MiceResult(current, cells, chain)


def _imputed_mean(t: Table, name: str, miss: np.ndarray) -> float:
    # categorical columns report the mean category code
    return float(np.asarray(t.column(name), dtype=float)[miss].mean())


def write_chain_means(result: MiceResult, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "column", "mean_imputed"])
        for it, name, mean in result.chain_means:
            w.writerow([it, name, format_number(mean)])

