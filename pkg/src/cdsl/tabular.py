"""Column-typed tables with an explicit missingness mask.

A :class:`Table` stores each column as a numpy array: numeric columns as
``float64`` with ``NaN`` marking missing cells, categorical columns as
``int64`` codes into the column's category list with ``-1`` marking missing
cells.  Tables are treated as immutable; every operation returns a new one.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

NUMERIC = "numeric"
CATEGORICAL = "categorical"

DEFAULT_NA_TOKENS = ("", "NA")

MEDAL_CODES = {"Gold": 1, "Silver": 2, "Bronze": 3, "No medal": 4}


class TableError(ValueError):
    """Raised for malformed input data or invalid column operations."""


class _Missing:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "MISSING"

    def __bool__(self):
        return False


MISSING = _Missing()


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str
    categories: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise TableError(f"unknown column kind {self.kind!r}")
        if self.kind == CATEGORICAL and len(set(self.categories)) != len(self.categories):
            raise TableError(f"duplicate categories in column {self.name!r}")
        if self.kind == NUMERIC and self.categories:
            raise TableError(f"numeric column {self.name!r} cannot have categories")


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Table:
    schema: tuple[ColumnSpec, ...]
    data: tuple[np.ndarray, ...]
    row_count: int = field(init=False)

    def __post_init__(self):
        schema = tuple(self.schema)
        names = [c.name for c in schema]
        if len(set(names)) != len(names):
            raise TableError("column names must be unique")
        if len(self.data) != len(schema):
            raise TableError("schema and data disagree on column count")
        cols = []
        n = None
        for spec, col in zip(schema, self.data):
            if spec.kind == NUMERIC:
                col = np.asarray(col, dtype=float)
                if np.isinf(col).any():
                    raise TableError(f"non-finite value in numeric column {spec.name!r}")
            else:
                col = np.asarray(col, dtype=np.int64)
                if col.size and (col.min() < -1 or col.max() >= len(spec.categories)):
                    raise TableError(f"category code out of range in column {spec.name!r}")
            if n is None:
                n = len(col)
            elif len(col) != n:
                raise TableError("all columns must have the same length")
            cols.append(_freeze(col))
        object.__setattr__(self, "schema", schema)
        object.__setattr__(self, "data", tuple(cols))
        object.__setattr__(self, "row_count", n or 0)

    @property
    def col_count(self) -> int:
        return len(self.schema)

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.schema]

    def index(self, name: str) -> int:
        for i, c in enumerate(self.schema):
            if c.name == name:
                return i
        raise TableError(f"column {name!r} not found")

    def spec(self, name: str) -> ColumnSpec:
        return self.schema[self.index(name)]

    def column(self, name: str) -> np.ndarray:
        return self.data[self.index(name)]

    def column_mask(self, name: str) -> np.ndarray:
        """Boolean array, True where the cell is observed."""
        i = self.index(name)
        return _observed(self.schema[i], self.data[i])

    @property
    def mask(self) -> np.ndarray:
        """Row-by-column boolean matrix, True where observed."""
        if not self.schema:
            return np.ones((self.row_count, 0), dtype=bool)
        return np.column_stack([_observed(s, c) for s, c in zip(self.schema, self.data)])

    def values(self, name: str) -> list:
        """Column cells as python values, MISSING for absent cells."""
        spec = self.spec(name)
        col = self.column(name)
        if spec.kind == NUMERIC:
            return [MISSING if math.isnan(v) else float(v) for v in col.tolist()]
        return [MISSING if c < 0 else spec.categories[c] for c in col.tolist()]

    @property
    def rows(self) -> list[tuple]:
        cols = [self.values(n) for n in self.names]
        return list(zip(*cols)) if cols else [() for _ in range(self.row_count)]

    def cell(self, row: int, name: str):
        return self.values(name)[row]

    def with_column(self, spec: ColumnSpec, data: np.ndarray) -> Table:
        """Replace (or append) a column, keeping column order."""
        schema = list(self.schema)
        cols = list(self.data)
        try:
            i = self.index(spec.name)
            schema[i], cols[i] = spec, data
        except TableError:
            schema.append(spec)
            cols.append(data)
        return Table(tuple(schema), tuple(cols))

    def select(self, names: Sequence[str]) -> Table:
        idx = [self.index(n) for n in names]
        return Table(tuple(self.schema[i] for i in idx), tuple(self.data[i] for i in idx))

    def take(self, rows) -> Table:
        """Row subset by index array or boolean mask."""
        rows = np.asarray(rows)
        return Table(self.schema, tuple(c[rows] for c in self.data))

    def __eq__(self, other):
        if not isinstance(other, Table):
            return NotImplemented
        if self.schema != other.schema or self.row_count != other.row_count:
            return False
        return all(np.array_equal(a, b, equal_nan=(s.kind == NUMERIC))
                   for s, a, b in zip(self.schema, self.data, other.data))

    __hash__ = None


def _observed(spec: ColumnSpec, col: np.ndarray) -> np.ndarray:
    if spec.kind == NUMERIC:
        return ~np.isnan(col)
    return col >= 0


def from_columns(columns: Mapping[str, Sequence], kinds: Mapping[str, str] | None = None) -> Table:
    """Build a table from python lists, ``None``/MISSING marking absent cells."""
    kinds = dict(kinds or {})
    schema, data = [], []
    for name, cells in columns.items():
        cells = list(cells)
        kind = kinds.get(name)
        if kind is None:
            present = [c for c in cells if c is not None and c is not MISSING]
            kind = NUMERIC if all(isinstance(c, (int, float)) and not isinstance(c, bool)
                                  for c in present) else CATEGORICAL
        spec, col = _build_column(name, kind, cells)
        schema.append(spec)
        data.append(col)
    return Table(tuple(schema), tuple(data))


def _build_column(name, kind, cells):
    if kind == NUMERIC:
        vals = [math.nan if c is None or c is MISSING else float(c) for c in cells]
        return ColumnSpec(name, NUMERIC), np.array(vals, dtype=float)
    cats: dict[str, int] = {}
    codes = []
    for c in cells:
        if c is None or c is MISSING:
            codes.append(-1)
        else:
            codes.append(cats.setdefault(str(c), len(cats)))
    return ColumnSpec(name, CATEGORICAL, tuple(cats)), np.array(codes, dtype=np.int64)


def _parse_real(text: str):
    try:
        v = float(text)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def ingest_csv(path, schema_hints: Mapping[str, str] | None = None,
               na_tokens: Iterable[str] = DEFAULT_NA_TOKENS) -> Table:
    """Read a UTF-8 CSV file with a header row into a :class:`Table`.

    Empty fields and ``NA`` become missing.  A column whose present cells all
    parse as finite reals is numeric, otherwise categorical; ``schema_hints``
    maps column names to a forced kind.
    """
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            return read_csv(fh, schema_hints, na_tokens)
    except OSError as exc:
        raise TableError(f"cannot read {path}: {exc}") from exc


def read_csv(fh, schema_hints=None, na_tokens=DEFAULT_NA_TOKENS) -> Table:
    na = set(na_tokens)
    hints = dict(schema_hints or {})
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise TableError("missing header row") from None
    unknown = set(hints) - set(header)
    if unknown:
        raise TableError(f"schema hints name unknown columns: {sorted(unknown)}")
    raw: list[list] = [[] for _ in header]
    for row in reader:
        if not row:
            continue
        if len(row) != len(header):
            raise TableError(
                f"line {reader.line_num}: expected {len(header)} fields, got {len(row)}")
        for j, cell in enumerate(row):
            raw[j].append(None if cell in na else cell)

    schema, data = [], []
    for name, cells in zip(header, raw):
        kind = hints.get(name)
        parsed = [None if c is None else _parse_real(c) for c in cells]
        if kind is None:
            kind = NUMERIC if all(p is not None for p, c in zip(parsed, cells)
                                  if c is not None) else CATEGORICAL
        if kind == NUMERIC:
            bad = [c for p, c in zip(parsed, cells) if c is not None and p is None]
            if bad:
                raise TableError(f"column {name!r} forced numeric but holds {bad[0]!r}")
            spec, col = _build_column(name, NUMERIC, parsed)
        else:
            spec, col = _build_column(name, CATEGORICAL, cells)
        schema.append(spec)
        data.append(col)
    return Table(tuple(schema), tuple(data))


def format_number(v: float) -> str:
    if v.is_integer() and abs(v) < 2 ** 53:
        return str(int(v))
    return repr(v)


def write_csv(t: Table, path_or_fh) -> None:
    """Serialize a table; missing cells are written as ``NA``."""
    if isinstance(path_or_fh, (str, Path)):
        with open(path_or_fh, "w", newline="", encoding="utf-8") as fh:
            return write_csv(t, fh)
    writer = csv.writer(path_or_fh, lineterminator="\n")
    writer.writerow(t.names)
    cols = []
    for spec, col in zip(t.schema, t.data):
        if spec.kind == NUMERIC:
            cols.append(["NA" if math.isnan(v) else format_number(v) for v in col.tolist()])
        else:
            cols.append(["NA" if c < 0 else spec.categories[c] for c in col.tolist()])
    for row in zip(*cols):
        writer.writerow(row)
    if not cols:
        for _ in range(t.row_count):
            writer.writerow([])


def to_csv_string(t: Table) -> str:
    buf = io.StringIO()
    write_csv(t, buf)
    return buf.getvalue()


def recode_missing_label(t: Table, column: str, label: str) -> Table:
    """Fill every missing cell of a categorical column with ``label``."""
    spec = t.spec(column)
    if spec.kind != CATEGORICAL:
        raise TableError(f"column {column!r} is numeric; cannot recode with a label")
    codes = t.column(column)
    if (codes >= 0).all():
        return t
    cats = spec.categories
    if label not in cats:
        cats = cats + (label,)
    filled = np.where(codes < 0, cats.index(label), codes)
    return t.with_column(ColumnSpec(column, CATEGORICAL, cats), filled)


@dataclass(frozen=True)
class MissingnessPattern:
    mask: tuple[bool, ...]
    count: int


def missingness_patterns(t: Table) -> tuple[list[MissingnessPattern], dict[str, int]]:
    """Distinct observed/missing row masks with their frequencies.

    Patterns are ordered by descending count, then by mask (False < True).
    The second element maps each column to its number of missing cells.
    """
    mask = t.mask
    per_column = {name: int((~mask[:, j]).sum()) for j, name in enumerate(t.names)}
    if t.row_count == 0:
        return [], per_column
    uniq, counts = np.unique(mask, axis=0, return_counts=True)
    patterns = [MissingnessPattern(tuple(bool(b) for b in m), int(c))
                for m, c in zip(uniq, counts)]
    patterns.sort(key=lambda p: (-p.count, p.mask))
    return patterns, per_column


@dataclass(frozen=True, eq=False)
class EncodedMatrix:
    values: np.ndarray
    column_names: tuple[str, ...]
    means: dict[str, float]
    stddevs: dict[str, float]
    groups: dict[str, tuple[int, ...]] = field(default_factory=dict)

    @property
    def shape(self):
        return self.values.shape


def encode_and_scale(t: Table, columns: Sequence[str]) -> EncodedMatrix:
    """One-hot encode categorical columns and z-score numeric ones.

    Every category gets its own indicator column.  Scaling uses the sample
    standard deviation; a column with zero (or undefined) spread becomes all
    zeros with a recorded stddev of 1.
    """
    blocks, names = [], []
    means, stds, groups = {}, {}, {}
    offset = 0
    for name in columns:
        spec = t.spec(name)
        col = t.column(name)
        missing = np.flatnonzero(~_observed(spec, col))
        if missing.size:
            raise TableError(f"missing cell at row {int(missing[0])}, column {name!r}")
        if spec.kind == NUMERIC:
            mean, std = _scale_params(col)
            blocks.append(((col - mean) / std)[:, None])
            names.append(name)
            means[name], stds[name] = mean, std
            groups[name] = (offset,)
            offset += 1
        else:
            k = len(spec.categories)
            onehot = np.zeros((t.row_count, k))
            onehot[np.arange(t.row_count), col] = 1.0
            blocks.append(onehot)
            names.extend(f"{name}={c}" for c in spec.categories)
            groups[name] = tuple(range(offset, offset + k))
            offset += k
    values = np.hstack(blocks) if blocks else np.zeros((t.row_count, 0))
    return EncodedMatrix(values, tuple(names), means, stds, groups)


def _scale_params(col: np.ndarray) -> tuple[float, float]:
    n = len(col)
    if n == 0:
        return 0.0, 1.0
    mean = float(col.mean())
    std = float(col.std(ddof=1)) if n > 1 else 0.0
    if not std > 0:
        # constant column: map to zeros, stddev sentinel 1
        return mean, 1.0
    return mean, std


def encode_medals(t: Table, column: str) -> Table:
    """Replace a medal label column by numeric codes Gold=1 .. No medal=4."""
    spec = t.spec(column)
    if spec.kind != CATEGORICAL:
        raise TableError(f"column {column!r} is not categorical")
    unknown = [c for c in spec.categories if c not in MEDAL_CODES]
    if unknown:
        raise TableError(f"unexpected medal label {unknown[0]!r} in column {column!r}")
    lookup = np.array([MEDAL_CODES[c] for c in spec.categories] + [math.nan], dtype=float)
    codes = t.column(column)
    return t.with_column(ColumnSpec(column, NUMERIC), lookup[codes])


def filter_rows(t: Table, column: str, keep: Iterable[str]) -> Table:
    """Keep rows whose categorical ``column`` value is one of ``keep``."""
    spec = t.spec(column)
    keep = set(keep)
    if spec.kind == NUMERIC:
        vals = t.column(column)
        wanted = np.array([float(k) for k in keep])
        return t.take(np.isin(vals, wanted))
    codes = [i for i, c in enumerate(spec.categories) if c in keep]
    return t.take(np.isin(t.column(column), codes))


def left_join(left: Table, right: Table, keys: Sequence[str]) -> Table:
    """Attach ``right``'s non-key columns to ``left`` by matching key values.

    Unmatched rows get missing cells.  Duplicate keys in ``right`` keep the
    first occurrence.
    """
    def key_tuples(t):
        cols = [t.values(k) for k in keys]
        return list(zip(*cols))

    lookup: dict[tuple, int] = {}
    for i, key in enumerate(key_tuples(right)):
        if any(v is MISSING for v in key):
            continue
        lookup.setdefault(key, i)
    idx = np.array([lookup.get(k, -1) for k in key_tuples(left)], dtype=np.int64)
    hit = idx >= 0
    out = left
    for spec, col in zip(right.schema, right.data):
        if spec.name in keys:
            continue
        name = spec.name
        if name in left.names:
            name = f"{name}_ctx"
        if spec.kind == NUMERIC:
            new = np.full(left.row_count, math.nan)
            new[hit] = col[idx[hit]]
        else:
            new = np.full(left.row_count, -1, dtype=np.int64)
            new[hit] = col[idx[hit]]
        out = out.with_column(ColumnSpec(name, spec.kind, spec.categories), new)
    return out
