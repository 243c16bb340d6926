import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_acceptance = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        _acceptance.append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance:
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")


@pytest.fixture
def rng():
    import numpy as np
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def athletes_csv(tmp_path_factory):
    from cdsl.fixtures import synthetic_athletes, write_athletes
    path = tmp_path_factory.mktemp("data") / "athlete_events.csv"
    write_athletes(synthetic_athletes(600), path)
    return path


OLYMPICS_CONFIG = """\
[pipeline]
out = out
seed = 42

[clean]
enabled = true
dataset = {dataset}
filter_column = Season
filter_values = Summer
recode_column = Medal

[impute]
enabled = true
iterations = 4

[outliers]
enabled = true

[regress]
enabled = true

[classify]
enabled = true
train_until = 2012
n_trees = 10

[sentiment]
enabled = true
tweets = {tweets}
lexicon = {lexicon}

[evaluate]
enabled = true
"""


@pytest.fixture
def full_config(tmp_path, athletes_csv):
    from cdsl.sentiment import data_path
    text = OLYMPICS_CONFIG.format(dataset=athletes_csv,
                                  tweets=data_path("ucl_2013_tweets.tsv"),
                                  lexicon=data_path("ucl_2013_lexicon.tsv"))
    path = tmp_path / "run.ini"
    path.write_text(text)
    return path
