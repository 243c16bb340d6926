"""Ordinary and weighted least squares with recency weighting schemes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .tabular import MISSING

# Olympiad length in years, and the year before the first modern games
OLYMPIAD = 4
BASE_YEAR = 1892
LAST_FIVE_EPS = 1e-6
_RANK_TOL = 1e-10


class RegressionError(ValueError):
    pass


@dataclass(frozen=True)
class WeightScheme:
    name: str
    fn: Callable[[int, int], float]

    def weight(self, year: int, max_year: int) -> float:
        return self.fn(year, max_year)

    def weights(self, years, max_year: int | None = None) -> np.ndarray:
        years = [int(y) for y in years]
        top = max(years) if max_year is None else max_year
        return np.array([self.fn(y, top) for y in years], dtype=float)


def _geometric(rate):
    return lambda year, top: rate ** ((top - year) / OLYMPIAD)


def weight_scenarios() -> list[WeightScheme]:
    """The six recency weighting schemes, from no emphasis to recent-only."""
    return [
        WeightScheme("uniform", lambda year, top: 1.0),
        WeightScheme("linear", lambda year, top: (year - BASE_YEAR) / (top - BASE_YEAR)),
        WeightScheme("geometric-0.9", _geometric(0.9)),
        WeightScheme("geometric-0.7", _geometric(0.7)),
        WeightScheme("step-2000", lambda year, top: 3.0 if year >= 2000 else 1.0),
        WeightScheme("last-five",
                     lambda year, top: 1.0 if year > top - 5 * OLYMPIAD else LAST_FIVE_EPS),
    ]


def scheme(name: str) -> WeightScheme:
    for s in weight_scenarios():
        if s.name == name:
            return s
    raise RegressionError(f"unknown weight scheme {name!r}")


@dataclass(frozen=True, eq=False)
class LinearFit:
    """Fitted coefficients (intercept first) with weighted fit statistics.

    ``adjusted_r2`` is ``None`` when ``n <= p + 1``.
    """

    coefficients: np.ndarray
    r2: float
    adjusted_r2: float | None
    n: int
    p: int
    residuals: np.ndarray
    column_names: tuple[str, ...] = ()

    @property
    def intercept(self) -> float:
        return float(self.coefficients[0])


def adjusted_r2(r2: float, n: int, p: int) -> float | None:
    if n <= p + 1:
        return None
    return 1.0 - (1.0 - r2) * (n - 1) / (n - p - 1)


def _design(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X


def _check_rank(A: np.ndarray, names: Sequence[str]) -> None:
    # column j depends on columns < j when its R diagonal vanishes
    r = np.linalg.qr(A, mode="r")
    diag = np.abs(np.diag(r))
    scale = max(float(diag.max(initial=0.0)), 1e-300)
    for j, v in enumerate(diag):
        if v <= _RANK_TOL * scale * max(A.shape):
            raise RegressionError(f"rank-deficient design: column {names[j]!r} is linearly "
                                  "dependent on earlier columns")


def fit_wls(X, y, w, column_names: Sequence[str] | None = None) -> LinearFit:
    """Minimise sum(w * (y - yhat)**2) for a linear model with intercept.

    ``X`` holds the predictors only; the intercept column is added here.
    """
    X = _design(X)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    n, p = X.shape
    if not (len(y) == n == len(w)):
        raise RegressionError("X, y and w must have the same number of rows")
    if n <= p:
        raise RegressionError(f"need more observations than predictors (n={n}, p={p})")
    if not (w > 0).all():
        raise RegressionError("weights must be strictly positive")
    names = ("(intercept)",) + tuple(column_names or (f"x{j}" for j in range(p)))
    A = np.hstack([np.ones((n, 1)), X])
    sw = np.sqrt(w)
    _check_rank(A * sw[:, None], names)
    gram = A.T @ (A * w[:, None])
    rhs = A.T @ (w * y)
    try:
        beta = np.linalg.solve(gram, rhs)  # LU with partial pivoting
    except np.linalg.LinAlgError as exc:
        raise RegressionError(f"singular normal equations: {exc}") from exc
    resid = y - A @ beta
    ybar = float((w * y).sum() / w.sum())
    sst = float((w * (y - ybar) ** 2).sum())
    sse = float((w * resid ** 2).sum())
    if sst == 0.0:
        r2 = 0.0
    elif np.abs(resid).max() <= 1e-10 * np.linalg.norm(y):
        r2 = 1.0
    else:
        r2 = 1.0 - sse / sst
    return LinearFit(beta, r2, adjusted_r2(r2, n, p), n, p, resid, names[1:])


def fit_ols(X, y, column_names: Sequence[str] | None = None) -> LinearFit:
    y = np.asarray(y, dtype=float)
    return fit_wls(X, y, np.ones(len(y)), column_names)


def predict(fit: LinearFit, X_new) -> np.ndarray:
    X_new = _design(X_new)
    if X_new.shape[1] != fit.p:
        raise RegressionError(f"expected {fit.p} predictor columns, got {X_new.shape[1]}")
    return fit.coefficients[0] + X_new @ fit.coefficients[1:]


def round_count(value: float) -> int:
    """Nearest nonnegative integer, halves rounded up."""
    if math.isnan(value):
        raise RegressionError("cannot round NaN prediction")
    return max(0, int(math.floor(value + 0.5)))


@dataclass(frozen=True)
class Forecast:
    country: str
    sport: str
    scheme: str
    actual: int
    predicted_raw: float

    @property
    def predicted_rounded(self) -> int:
        return round_count(self.predicted_raw)


def medal_count_series(t, year_column: str, country_column: str, sport_column: str,
                       medal_column: str, no_medal_label: str = "No medal") -> dict:
    """Medals won per (country, sport) and year, over every year the pair competed.

    Returns ``{(country, sport): {year: count}}`` with rows lacking a key skipped.
    """
    years = t.values(year_column)
    countries = t.values(country_column)
    sports = t.values(sport_column)
    medals = t.values(medal_column)
    series: dict = {}
    for year, country, sport, medal in zip(years, countries, sports, medals):
        if MISSING in (year, country, sport):
            continue
        counts = series.setdefault((str(country), str(sport)), {})
        won = medal is not MISSING and medal != no_medal_label
        counts[int(year)] = counts.get(int(year), 0) + int(won)
    return series


def forecast_groups(series: dict, holdout_year: int | None = None,
                    schemes: Sequence[WeightScheme] | None = None) -> list[Forecast]:
    """Fit count ~ year per group on years before the holdout and predict it.

    Groups without a holdout observation or with fewer than two earlier years
    are skipped.  Weights are evaluated relative to the last training year.
    """
    schemes = list(weight_scenarios() if schemes is None else schemes)
    if holdout_year is None:
        holdout_year = max((y for s in series.values() for y in s), default=None)
    out = []
    for key in sorted(series):
        counts = series[key]
        if holdout_year not in counts:
            continue
        years = sorted(y for y in counts if y < holdout_year)
        if len(years) < 2:
            continue
        y = [counts[yr] for yr in years]
        for sch in schemes:
            fit = fit_wls(years, y, sch.weights(years, max(years)), ["year"])
            pred = float(predict(fit, [holdout_year])[0])
            out.append(Forecast(key[0], key[1], sch.name, counts[holdout_year], pred))
    return out


def forecast_summary(forecasts: Sequence[Forecast]) -> dict:
    """Per scheme: group count, mean absolute error of rounded predictions and
    the simple regression of actual on predicted counts."""
    summary = {}
    for name in dict.fromkeys(f.scheme for f in forecasts):
        rows = [f for f in forecasts if f.scheme == name]
        actual = np.array([f.actual for f in rows], dtype=float)
        pred = np.array([f.predicted_raw for f in rows])
        entry = {
            "groups": len(rows),
            "mae": float(np.mean(np.abs(actual - [f.predicted_rounded for f in rows]))),
            "r2": None,
            "adjusted_r2": None,
        }
        try:
            fit = fit_ols(pred, actual, ["predicted"])
            entry["r2"], entry["adjusted_r2"] = fit.r2, fit.adjusted_r2
        except RegressionError:
            pass
        summary[name] = entry
    return summary
