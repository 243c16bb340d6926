import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdsl.tabular import (CATEGORICAL, MISSING, NUMERIC, TableError, encode_and_scale,
                          encode_medals, filter_rows, from_columns, ingest_csv, left_join,
                          missingness_patterns, read_csv, recode_missing_label, to_csv_string,
                          write_csv)


def write(tmp_path, text, name="data.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_ingest_infers_kinds_and_missing(tmp_path):
    t = ingest_csv(write(tmp_path, "a,b\n1,x\n,y\n"))
    assert t.spec("a").kind == NUMERIC
    assert t.spec("b").kind == CATEGORICAL
    assert t.spec("b").categories == ("x", "y")
    assert t.values("a") == [1.0, MISSING]
    assert t.mask.tolist() == [[True, True], [False, True]]


def test_ingest_header_only(tmp_path):
    t = ingest_csv(write(tmp_path, "a,b\n"))
    assert t.row_count == 0 and t.col_count == 2


def test_ingest_ragged_row_names_line(tmp_path):
    with pytest.raises(TableError, match="line 2"):
        ingest_csv(write(tmp_path, "a,b\n1,2,3\n"))


def test_ingest_na_token_quotes_and_crlf(tmp_path):
    t = ingest_csv(write(tmp_path, 'name,score\r\n"Smith, J",NA\r\n"say ""hi""",3.5\r\n'))
    assert t.values("name") == ["Smith, J", 'say "hi"']
    assert t.values("score") == [MISSING, 3.5]


def test_ingest_schema_hint_forces_categorical(tmp_path):
    t = ingest_csv(write(tmp_path, "code\n1\n2\n1\n"), schema_hints={"code": CATEGORICAL})
    assert t.spec("code").categories == ("1", "2")


def test_ingest_unreadable(tmp_path):
    with pytest.raises(TableError):
        ingest_csv(tmp_path / "nope.csv")


def test_non_finite_text_is_categorical(tmp_path):
    t = ingest_csv(write(tmp_path, "v\n1\ninf\n"))
    assert t.spec("v").kind == CATEGORICAL


def test_recode_missing_label():
    t = from_columns({"medal": ["Gold", None, None, "Bronze", None], "x": [1, 2, 3, 4, 5]})
    r = recode_missing_label(t, "medal", "No medal")
    assert r.values("medal") == ["Gold", "No medal", "No medal", "Bronze", "No medal"]
    assert r.spec("medal").categories == ("Gold", "Bronze", "No medal")
    assert r.column("x").tolist() == t.column("x").tolist()


def test_recode_no_missing_is_identity():
    t = from_columns({"medal": ["Gold", "Silver"]})
    assert recode_missing_label(t, "medal", "No medal") == t


def test_recode_numeric_errors():
    t = from_columns({"x": [1.0, None]})
    with pytest.raises(TableError):
        recode_missing_label(t, "x", "No medal")
    with pytest.raises(TableError):
        recode_missing_label(t, "missing_column", "No medal")


def test_missingness_patterns_enumeration():
    t = from_columns({"a": [1, 2, 3], "b": [1, None, None]})
    patterns, per_col = missingness_patterns(t)
    assert [(p.mask, p.count) for p in patterns] == [((True, False), 2), ((True, True), 1)]
    assert per_col == {"a": 0, "b": 2}


def test_missingness_fully_observed():
    t = from_columns({"a": [1, 2, 3, 4]})
    patterns, _ = missingness_patterns(t)
    assert [(p.mask, p.count) for p in patterns] == [((True,), 4)]


def test_missingness_total_114900():
    # synthetic table constructed with the reported total of missing cells
    n = 70000
    rng = np.random.default_rng(0)
    cols = {}
    remaining = 114_900
    for name, share in (("Age", 9_474), ("Height", 60_171), ("Weight", 45_255)):
        vals = rng.normal(size=n)
        vals[rng.choice(n, size=share, replace=False)] = np.nan
        cols[name] = vals.tolist()
        remaining -= share
    assert remaining == 0
    t = from_columns(cols)
    patterns, per_col = missingness_patterns(t)
    assert sum(per_col.values()) == 114_900
    assert sum(p.count for p in patterns) == n


def test_encode_column_count_formula():
    t = from_columns({"a": [1, 2, 3], "b": [4, 5, 7], "c": [0, 1, 1],
                      "s": ["x", "y", "z"], "g": ["M", "F", "M"]})
    m = encode_and_scale(t, ["a", "b", "c", "s", "g"])
    assert m.values.shape == (3, 8)
    assert m.column_names[3:] == ("s=x", "s=y", "s=z", "g=M", "g=F")


def test_encode_zscore_sample_sd():
    t = from_columns({"v": [2, 4, 6]})
    m = encode_and_scale(t, ["v"])
    # sample sd of {2,4,6} is 2
    np.testing.assert_allclose(m.values[:, 0], [-1.0, 0.0, 1.0], atol=1e-4)
    assert m.means["v"] == 4.0 and m.stddevs["v"] == 2.0


def test_encode_zero_variance_sentinel():
    t = from_columns({"v": [3.0, 3.0, 3.0]})
    m = encode_and_scale(t, ["v"])
    assert m.values[:, 0].tolist() == [0.0, 0.0, 0.0]
    assert m.stddevs["v"] == 1.0


def test_encode_rejects_missing():
    t = from_columns({"v": [1.0, None]})
    with pytest.raises(TableError, match="row 1.*'v'"):
        encode_and_scale(t, ["v"])


def test_encode_medals():
    t = from_columns({"m": ["Gold", "No medal", "Bronze"]})
    assert encode_medals(t, "m").column("m").tolist() == [1.0, 4.0, 3.0]
    empty = from_columns({"m": []}, kinds={"m": CATEGORICAL})
    assert encode_medals(empty, "m").row_count == 0
    with pytest.raises(TableError, match="Platinum"):
        encode_medals(from_columns({"m": ["Gold", "Platinum"]}), "m")


def test_filter_rows_and_join():
    t = from_columns({"year": [2000, 2004, 2008], "season": ["Summer", "Winter", "Summer"]})
    s = filter_rows(t, "season", ["Summer"])
    assert s.column("year").tolist() == [2000.0, 2008.0]
    aux = from_columns({"year": [2008, 2000], "gdp": [3.0, 1.0]})
    j = left_join(t, aux, ["year"])
    assert j.values("gdp") == [1.0, MISSING, 3.0]


# properties ---------------------------------------------------------------

cell_text = st.text(alphabet="abcxyz ,\"é", min_size=1, max_size=6).filter(
    lambda s: s not in ("NA",) and s.strip() == s)


@st.composite
def tables(draw):
    n = draw(st.integers(0, 12))
    num = draw(st.lists(st.one_of(st.none(), st.floats(-1e6, 1e6, allow_nan=False)),
                        min_size=n, max_size=n))
    cat = draw(st.lists(st.one_of(st.none(), cell_text), min_size=n, max_size=n))
    if all(c is None for c in cat) and n:
        cat[0] = "x"
    if all(v is None for v in num) and n:
        num[0] = 1.5
    return from_columns({"num": num, "cat": cat}, kinds={"num": NUMERIC, "cat": CATEGORICAL})


@given(tables())
@settings(max_examples=60, deadline=None)
def test_csv_round_trip(t):
    text = to_csv_string(t)
    hints = {"cat": CATEGORICAL}
    once = read_csv(io.StringIO(text), hints)
    twice = read_csv(io.StringIO(to_csv_string(once)), hints)
    assert once == twice
    assert np.array_equal(once.mask, t.mask)
    # numeric values survive exactly
    np.testing.assert_array_equal(once.column("num"), t.column("num"))


@given(tables())
@settings(max_examples=60, deadline=None)
def test_patterns_sum_to_rows(t):
    patterns, per_col = missingness_patterns(t)
    assert sum(p.count for p in patterns) == t.row_count
    assert len({p.mask for p in patterns}) == len(patterns)
    for j, name in enumerate(t.names):
        assert per_col[name] == int((~t.mask[:, j]).sum())


@given(tables())
@settings(max_examples=60, deadline=None)
def test_recode_touches_only_target(t):
    r = recode_missing_label(t, "cat", "No medal")
    np.testing.assert_array_equal(r.column("num"), t.column("num"))
    for before, after in zip(t.values("cat"), r.values("cat")):
        assert after == ("No medal" if before is MISSING else before)


@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=30),
       st.lists(st.sampled_from(["a", "b", "c"]), min_size=30, max_size=30))
@settings(max_examples=60, deadline=None)
def test_encoding_invariants(vals, cats):
    cats = cats[:len(vals)]
    t = from_columns({"v": vals, "c": cats})
    m = encode_and_scale(t, ["v", "c"])
    k = len(t.spec("c").categories)
    assert m.values.shape[1] == 1 + k
    np.testing.assert_array_equal(m.values[:, 1:].sum(axis=1), 1.0)
    sd = np.std(vals, ddof=1)
    if sd > 1e-6 * max(1.0, max(abs(v) for v in vals)):
        assert abs(m.values[:, 0].mean()) < 1e-9
        assert abs(m.values[:, 0].std(ddof=1) - 1) < 1e-9
        back = m.values[:, 0] * m.stddevs["v"] + m.means["v"]
        np.testing.assert_allclose(back, vals, rtol=0, atol=1e-9 * max(1.0, max(map(abs, vals))))


def test_write_csv_emits_na(tmp_path):
    t = from_columns({"a": [1.0, None], "b": ["x", None]})
    p = tmp_path / "o.csv"
    write_csv(t, p)
    assert p.read_text() == "a,b\n1,x\nNA,NA\n"
    assert math.isnan(ingest_csv(p).column("a")[1])
