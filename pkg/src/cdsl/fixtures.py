"""Deterministic reference data: the published Olympics confusion matrix, the
2013 Champions League team coefficients, and seeded synthetic datasets."""

from __future__ import annotations

import csv

import numpy as np

from .sentiment import Lexicon, TweetRecord
from .tabular import Table, from_columns

MEDAL_CLASSES = (1, 2, 3, 4)
MEDAL_NAMES = ("Gold", "Silver", "Bronze", "No medal")

# prediction rows x actual columns, classes Gold, Silver, Bronze, No medal
OLYMPICS_FOREST_CONFUSION = (
    (13, 6, 6, 73),
    (9, 3, 10, 61),
    (5, 12, 9, 63),
    (638, 634, 678, 11468),
)
OLYMPICS_FOREST_ACCURACY = 0.8396

# team -> (score sum, tweet count); ratios are the published 2013 coefficients
UCL_2013_TEAMS = {
    "Bayern Munich": (7317, 200),
    "Borussia Dortmund": (6717, 200),
    "Real Madrid": (14771, 500),
    "Barcelona": (13771, 500),
    "Paris Saint Germain": (13675, 500),
    "Juventus": (25883, 1000),
    "Malaga": (25542, 1000),
    "Galatasaray": (24040, 1000),
}
UCL_2013_COEFFICIENTS = {
    "Bayern Munich": 36.585,
    "Borussia Dortmund": 33.585,
    "Real Madrid": 29.542,
    "Barcelona": 27.542,
    "Paris Saint Germain": 27.35,
    "Juventus": 25.883,
    "Malaga": 25.542,
    "Galatasaray": 24.04,
}
UCL_2013_FINALISTS = ("Bayern Munich", "Borussia Dortmund")

UCL_LEXICON = Lexicon({"champions": 10, "brilliant": 5, "win": 1, "lose": -1})
_NEUTRAL = ("tonight", "match", "vs", "fans", "stadium", "kickoff", "lineup", "goal")
_COUNTRIES = ("Germany", "Spain", "Italy", "France", "Turkey", "USA", "Canada",
              "Russia", "China", "UK")


def _words_for(score: int) -> list[str]:
    if score < 0:
        return ["lose"] * -score
    words = ["champions"] * (score // 10)
    words += ["brilliant"] * ((score % 10) // 5)
    words += ["win"] * (score % 5)
    return words


def ucl_2013_scores(total: int, count: int) -> list[int]:
    """Integer per-tweet scores summing exactly to ``total``."""
    base, rem = divmod(total, count)
    scores = [base + (1 if i < rem else 0) for i in range(count)]
    for i in range(0, count - 1, 2):
        v = (i * 7) % 11 - 5
        scores[i] += v
        scores[i + 1] -= v
    return scores


def ucl_2013_corpus() -> list[TweetRecord]:
    """Tweet corpus whose team coefficients under :data:`UCL_LEXICON` equal the
    published 2013 values."""
    tweets = []
    n = 0
    for team, (total, count) in UCL_2013_TEAMS.items():
        tag = "#" + team.replace(" ", "")
        for i, score in enumerate(ucl_2013_scores(total, count)):
            words = _words_for(score)
            # casing and punctuation vary; tokenization ignores both
            if i % 3 == 0:
                words = [w.upper() for w in words]
            filler = _NEUTRAL[i % len(_NEUTRAL)]
            text = f"{tag} {filler}: " + ", ".join(words) + ("!!" if i % 2 else ".")
            country = _COUNTRIES[(n * 7) % len(_COUNTRIES)] if i % 4 else None
            tweets.append(TweetRecord(f"t{n:05d}", team, country, text))
            n += 1
    return tweets


def mcar_regression_table(n: int = 500, frac: float = 0.2, noise: float = 0.1,
                          seed: int = 7) -> tuple[Table, np.ndarray, np.ndarray]:
    """Table (x, y) with y = 2x + noise and ``frac`` of y masked completely at random.

    Returns the table, the complete y, and the boolean mask of hidden cells.
    """
    rng = np.random.default_rng(seed)
    x = rng.normal(0.0, 1.0, n)
    y = 2.0 * x + rng.normal(0.0, noise, n)
    hidden = np.zeros(n, dtype=bool)
    hidden[rng.choice(n, size=int(round(frac * n)), replace=False)] = True
    y_obs = np.where(hidden, np.nan, y)
    return from_columns({"x": x.tolist(), "y": y_obs.tolist()}), y, hidden


def nested_missing_table(n: int = 400, seed: int = 11) -> Table:
    """Two correlated columns where a's missing rows are a subset of b's."""
    rng = np.random.default_rng(seed)
    a = rng.normal(10.0, 2.0, n)
    b = 0.5 * a + rng.normal(0.0, 0.5, n)
    miss_b = rng.random(n) < 0.3
    miss_a = miss_b & (rng.random(n) < 0.5)
    return from_columns({
        "a": np.where(miss_a, np.nan, a).tolist(),
        "b": np.where(miss_b, np.nan, b).tolist(),
    })


def xor_dataset(n: int = 200, seed: int = 3) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, (n, 2))
    y = np.where((X[:, 0] > 0) ^ (X[:, 1] > 0), 1, 2)
    return X, y


_SPORTS = ("Athletics", "Swimming", "Gymnastics", "Rowing", "Boxing", "Sailing")
_NOCS = ("USA", "GBR", "CHN", "RUS", "GER", "JPN", "CAN", "BRA")
_SUMMER_YEARS = tuple(y for y in range(1896, 2017, 4) if y not in (1916, 1940, 1944))


def synthetic_athletes(n: int = 1500, seed: int = 5, missing: float = 0.15) -> list[dict]:
    """Athlete-event rows with the column layout of the public Olympics dataset.

    Medal chances depend on nation, sport and build; Age/Height/Weight have
    gaps; a share of rows are winter events.
    """
    rng = np.random.default_rng(seed)
    strength = {noc: s for noc, s in zip(_NOCS, (0.30, 0.22, 0.25, 0.20, 0.15, 0.10, 0.06, 0.05))}
    rows = []
    for i in range(n):
        sex = "M" if rng.random() < 0.65 else "F"
        sport = _SPORTS[int(rng.integers(len(_SPORTS)))]
        noc = _NOCS[int(rng.integers(len(_NOCS)))]
        winter = rng.random() < 0.1
        year = int(rng.choice(_SUMMER_YEARS)) if not winter else int(rng.choice((1994, 1998, 2002)))
        height = rng.normal(178 if sex == "M" else 167, 8)
        weight = height - 100 + rng.normal(0, 6)
        age = rng.normal(25, 4)
        fit = 0.5 + 0.5 * np.tanh((height - (172 if sex == "F" else 182)) / 10)
        p = strength[noc] * (0.6 + fit) * (1.3 if year >= 1980 else 0.8)
        u = rng.random()
        medal = "NA"
        if u < p:
            medal = ("Gold", "Silver", "Bronze")[int(3 * u / p)]

        def maybe(v, fmt):
            return "NA" if rng.random() < missing else fmt % v

        rows.append({
            "ID": str(i + 1),
            "Name": f"Athlete {i + 1}",
            "Sex": sex,
            "Age": maybe(age, "%.0f"),
            "Height": maybe(height, "%.0f"),
            "Weight": maybe(weight, "%.1f"),
            "Team": noc,
            "NOC": noc,
            "Games": f"{year} {'Winter' if winter else 'Summer'}",
            "Year": str(year),
            "Season": "Winter" if winter else "Summer",
            "City": "Somewhere",
            "Sport": "Skiing" if winter else sport,
            "Event": f"{sport} event",
            "Medal": medal,
        })
    return rows


def write_athletes(rows: list[dict], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
