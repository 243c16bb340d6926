"""Lexicon tweet scoring and the Average Team Sentiment Score (ATSS).

Each tweet scores the signed sum of lexicon weights over its tokens.  A
team's ATSS is the sum of its tweets' scores divided by its tweet count;
sorting teams by ATSS gives the predicted tournament ranking.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

_SPLIT = re.compile(r"[\W_]+")


class SentimentError(ValueError):
    pass


@dataclass(frozen=True)
class Lexicon:
    entries: dict

    def __post_init__(self):
        for token, weight in self.entries.items():
            if not token or token != token.lower():
                raise SentimentError(f"lexicon token {token!r} must be nonempty lowercase")
            if int(weight) != weight or weight == 0:
                raise SentimentError(f"lexicon weight for {token!r} must be a nonzero integer")

    def weight(self, token: str) -> int:
        return self.entries.get(token, 0)

    def scaled(self, c: int) -> Lexicon:
        return Lexicon({t: w * c for t, w in self.entries.items()})


@dataclass(frozen=True)
class TweetRecord:
    id: str
    team: str
    country: str | None
    text: str

    def __post_init__(self):
        if not self.team:
            raise SentimentError(f"tweet {self.id!r} has an empty team")


@dataclass(frozen=True)
class TeamCoefficient:
    team: str
    score_sum: int
    tweet_count: int

    @property
    def atss(self) -> float:
        return self.score_sum / self.tweet_count


def load_lexicon(path) -> Lexicon:
    """Read ``token<TAB>weight`` lines; ``#`` lines and blanks are skipped."""
    entries = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            try:
                token, weight = line.split("\t")
                weight = int(weight)
            except ValueError:
                raise SentimentError(f"{path}:{lineno}: expected token<TAB>integer") from None
            token = token.strip().lower()
            if token in entries:
                raise SentimentError(f"{path}:{lineno}: duplicate token {token!r}")
            entries[token] = weight
    return Lexicon(entries)


def load_tweets(path) -> list[TweetRecord]:
    """Read a tab-separated corpus: id, team, country (may be empty), text."""
    tweets = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split("\t", 3)
            if len(parts) != 4:
                raise SentimentError(f"{path}:{lineno}: expected 4 tab-separated fields")
            tid, team, country, text = parts
            tweets.append(TweetRecord(tid, team, country or None, text))
    return tweets


def write_tweets(tweets: Iterable[TweetRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for t in tweets:
            fh.write(f"{t.id}\t{t.team}\t{t.country or ''}\t{t.text}\n")


def data_path(name: str) -> Path:
    """Path of a file shipped in the package's data directory."""
    return Path(str(resources.files("cdsl") / "data" / name))


def default_lexicon() -> Lexicon:
    return load_lexicon(data_path("default_lexicon.tsv"))


def tokenize(text: str) -> list[str]:
    return [tok for tok in _SPLIT.split(text.lower()) if tok]


def score_text(lex: Lexicon, text: str) -> int:
    return sum(lex.weight(tok) for tok in tokenize(text))


def score_corpus(lex: Lexicon, tweets: Sequence[TweetRecord]) -> list[int]:
    return [score_text(lex, t.text) for t in tweets]


def team_coefficients(scores: Sequence[int], tweets: Sequence[TweetRecord]) -> list[TeamCoefficient]:
    """Per-team score sums and tweet counts, in team-name order."""
    if len(scores) != len(tweets):
        raise SentimentError("scores and tweets differ in length")
    sums: dict[str, int] = {}
    counts: dict[str, int] = {}
    for s, t in zip(scores, tweets):
        sums[t.team] = sums.get(t.team, 0) + s
        counts[t.team] = counts.get(t.team, 0) + 1
    return [TeamCoefficient(team, sums[team], counts[team]) for team in sorted(sums)]


def rank_teams(coeffs: Sequence[TeamCoefficient]) -> list[str]:
    ordered = sorted(coeffs, key=lambda c: (-c.atss, -c.tweet_count, c.team))
    return [c.team for c in ordered]


def country_aggregate(scores: Sequence[int], tweets: Sequence[TweetRecord]) -> dict[str, float]:
    """Mean tweet score per country label; unlabelled tweets are ignored."""
    sums: dict[str, int] = {}
    counts: dict[str, int] = {}
    for s, t in zip(scores, tweets):
        if t.country is None:
            continue
        sums[t.country] = sums.get(t.country, 0) + s
        counts[t.country] = counts.get(t.country, 0) + 1
    return {c: sums[c] / counts[c] for c in sorted(sums)}


def write_coefficients(coeffs: Sequence[TeamCoefficient], path) -> None:
    """CSV of (team, atss, tweet_count) in ranking order."""
    by_team = {c.team: c for c in coeffs}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["team", "atss", "tweet_count"])
        for team in rank_teams(coeffs):
            c = by_team[team]
            w.writerow([team, repr(c.atss), c.tweet_count])


def read_coefficients(path) -> list[tuple[str, float, int]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [(r["team"], float(r["atss"]), int(r["tweet_count"])) for r in csv.DictReader(fh)]
