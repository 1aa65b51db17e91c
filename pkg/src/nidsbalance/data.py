"""Flow-record schema, CSV ingestion and synthetic traffic generation."""

from __future__ import annotations

import csv
import logging
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

log = logging.getLogger(__name__)

NUMERIC = "numeric"
CATEGORICAL = "categorical"
ONE_HOT = "derived-one-hot"
KINDS = (NUMERIC, CATEGORICAL, ONE_HOT)

#: Placeholder stored in a FlowRecord for a numeric cell that failed to parse.
MISSING = None

Cell = Union[str, float, int, None]


class SchemaError(ValueError):
    """Header or record does not fit the active schema."""


class RowError(ValueError):
    """A data row is malformed."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class Column:
    name: str
    kind: str = NUMERIC
    # originating column for derived one-hot indicators
    source: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown column kind {self.kind!r}")


BOT_IOT_FEATURES = (
    "pkSeqID", "stime", "flgs", "flgs_number", "proto", "proto_number",
    "saddr", "sport", "daddr", "dport", "pkts", "bytes", "state",
    "state_number", "ltime", "seq", "dur", "mean", "stddev", "sum", "min",
    "max", "spkts", "dpkts", "sbytes", "dbytes", "rate", "srate", "drate",
    "TnBPSrcIP", "TnBPDstIP", "TnP_PSrcIP", "TnP_PDstIP", "TnP_PerProto",
    "TnP_Per_Dport", "AR_P_Proto_P_SrcIP", "AR_P_Proto_P_DstIP",
    "N_IN_Conn_P_SrcIP", "N_IN_Conn_P_DstIP", "AR_P_Proto_P_Sport",
    "AR_P_Proto_P_Dport", "Pkts_P_State_P_Protocol_P_DestIP",
    "Pkts_P_State_P_Protocol_P_SrcIP",
)
BOT_IOT_TEXT = frozenset({"flgs", "proto", "saddr", "daddr", "state"})
BOT_IOT_LABELS = ("attack", "category", "subcategory")

BOT_IOT_SCHEMA: tuple[Column, ...] = tuple(
    Column(n, CATEGORICAL if n in BOT_IOT_TEXT else NUMERIC) for n in BOT_IOT_FEATURES
)

SCHEMAS = {"bot-iot": BOT_IOT_SCHEMA}

SchemaLike = Union[str, Sequence[Union[Column, str]]]


def get_schema(schema: SchemaLike) -> tuple[Column, ...]:
    """Resolve a schema name or a list of columns / bare names.

    Bare names keep their Bot-IoT kind (so ``proto`` stays categorical);
    any other bare name is numeric.
    """
    if isinstance(schema, str):
        try:
            return SCHEMAS[schema]
        except KeyError:
            raise SchemaError(f"unknown schema {schema!r}; known: {sorted(SCHEMAS)}") from None
    builtin = {c.name: c for c in BOT_IOT_SCHEMA}
    cols = tuple(c if isinstance(c, Column) else builtin.get(str(c), Column(str(c))) for c in schema)
    names = [c.name for c in cols]
    if len(set(names)) != len(names):
        raise SchemaError("schema has duplicate column names")
    return cols


def _header_key(name: str) -> str:
    # "TnP_Per Dport", "Stime" and "flgs number" all map onto the canonical names
    return re.sub(r"[\s_]+", "", name).lower()


@dataclass(frozen=True)
class FlowRecord:
    values: Mapping[str, Cell]
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")


def parse_number(text: str) -> float | int | None:
    """Parse a numeric cell; ``0x``-prefixed hex becomes an int. Returns MISSING on failure."""
    s = text.strip()
    if not s:
        return MISSING
    if s[:2].lower() == "0x":
        try:
            return int(s, 16)
        except ValueError:
            return MISSING
    try:
        return int(s)
    except ValueError:
        pass
    try:
        v = float(s)
    except ValueError:
        return MISSING
    return v if math.isfinite(v) else MISSING


def _parse_label(text: str, line: int) -> int:
    v = parse_number(text)
    if v is MISSING or v not in (0, 1):
        raise RowError(f"label {text!r} is not 0/1", line)
    return int(v)


def load_csv(path, schema: SchemaLike = "bot-iot", label_column: str = "attack") -> list[FlowRecord]:
    """Read a comma-separated flow file with a header row into FlowRecords.

    Header names are matched to the schema ignoring case, spaces and
    underscores; columns outside the schema (``category``, ...) are ignored.
    """
    cols = get_schema(schema)
    records: list[FlowRecord] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: no header row") from None
        keys = [_header_key(h) for h in header]
        pos = {k: i for i, k in enumerate(keys)}
        label_key = _header_key(label_column)
        if label_key not in pos:
            raise SchemaError(f"{path}: missing label column {label_column!r}")
        missing = [c.name for c in cols if _header_key(c.name) not in pos]
        if missing:
            raise SchemaError(f"{path}: header lacks schema columns {missing}")
        index = [(c.name, c.kind, pos[_header_key(c.name)]) for c in cols]
        label_pos = pos[label_key]
        width = len(header)
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != width:
                raise RowError(f"expected {width} fields, got {len(row)}", line)
            values: dict[str, Cell] = {}
            for name, kind, i in index:
                cell = row[i]
                values[name] = cell if kind == CATEGORICAL else parse_number(cell)
            records.append(FlowRecord(values, _parse_label(row[label_pos], line)))
    return records


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix with column metadata and aligned binary labels.

    ``X`` is float64 once every column is numeric; while categorical columns
    are still string-coded it is an object array. ``row_ids`` tags each row
    with its origin so splits can be audited; synthetic rows carry -1.
    """

    columns: tuple[Column, ...]
    X: np.ndarray
    y: np.ndarray
    row_ids: np.ndarray = field(default=None)

    def __post_init__(self):
        cols = tuple(self.columns)
        X = np.asarray(self.X)
        y = np.array(self.y, dtype=np.int64).reshape(-1)
        if X.ndim == 1 and X.size == 0:
            X = X.reshape(0, len(cols))
        if X.ndim != 2:
            raise ValueError("X must be two-dimensional")
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
        if X.shape[1] != len(cols):
            raise ValueError(f"X has {X.shape[1]} columns but {len(cols)} were declared")
        if y.size and not np.isin(y, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        if any(c.kind == CATEGORICAL for c in cols):
            X = X.astype(object)
            num = [j for j, c in enumerate(cols) if c.kind != CATEGORICAL]
            if num and not np.isfinite(X[:, num].astype(np.float64)).all():
                raise ValueError("non-finite numeric values")
        else:
            X = X.astype(np.float64)
            if not np.isfinite(X).all():
                raise ValueError("non-finite values in X")
        ids = np.arange(X.shape[0]) if self.row_ids is None else np.array(self.row_ids, dtype=np.int64)
        if ids.shape != y.shape:
            raise ValueError("row_ids must align with y")
        for a in (X, y, ids):
            a.setflags(write=False)
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "row_ids", ids)

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_cols(self) -> int:
        return self.X.shape[1]

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def column_index(self, name: str) -> int:
        for j, c in enumerate(self.columns):
            if c.name == name:
                return j
        raise KeyError(name)

    def class_counts(self) -> dict[int, int]:
        return {c: int(np.sum(self.y == c)) for c in (0, 1)}

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.columns, self.X[rows], self.y[rows], self.row_ids[rows])

    def select(self, names: Iterable[str]) -> "Dataset":
        idx = [self.column_index(n) for n in names]
        return Dataset(tuple(self.columns[j] for j in idx), self.X[:, idx], self.y, self.row_ids)

    def numeric_X(self) -> np.ndarray:
        if self.X.dtype == object:
            raise TypeError("dataset still has categorical columns; preprocess first")
        return self.X


def to_dataset(records: Sequence[FlowRecord], schema: SchemaLike = "bot-iot") -> Dataset:
    """Assemble records into a Dataset, columns in schema order.

    Missing numeric cells are imputed with 0 and counted in the log.
    """
    if not records:
        raise ValueError("to_dataset needs at least one record")
    cols = get_schema(schema)
    categorical = any(c.kind == CATEGORICAL for c in cols)
    X = np.empty((len(records), len(cols)), dtype=object if categorical else np.float64)
    y = np.empty(len(records), dtype=np.int64)
    imputed = 0
    for i, rec in enumerate(records):
        vals = rec.values
        for j, c in enumerate(cols):
            try:
                v = vals[c.name]
            except KeyError:
                raise SchemaError(f"record {i} lacks column {c.name!r}") from None
            if c.kind == CATEGORICAL:
                X[i, j] = "" if v is None else str(v)
            else:
                if v is MISSING:
                    imputed += 1
                    v = 0
                X[i, j] = v
        y[i] = rec.label
    if imputed:
        log.warning("imputed %d missing numeric cells with 0", imputed)
    return Dataset(cols, X, y)


def read_dataset(path, schema: SchemaLike = "bot-iot", label_column: str = "attack") -> Dataset:
    cols = get_schema(schema)
    return to_dataset(load_csv(path, cols, label_column), cols)


def _format_cell(v) -> str:
    if isinstance(v, str):
        return v
    f = float(v)
    if f.is_integer() and abs(f) < 2**53:
        return str(int(f))
    return repr(f)


def write_csv(d: Dataset, path, label_column: str = "attack") -> None:
    """Write a Dataset as CSV (header + one row per record, label last).

    Reals are written with ``repr`` so reading back is bit-exact.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(d.names + [label_column])
        for row, label in zip(d.X, d.y):
            w.writerow([_format_cell(v) for v in row] + [str(int(label))])


@dataclass(frozen=True)
class SyntheticSpec:
    n_majority: int = 7500
    n_minority: int = 1
    n_features: int = 10
    class_separation: float = 4.0
    noise_sigma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_majority < 1 or self.n_minority < 1 or self.n_features < 1:
            raise ValueError("n_majority, n_minority and n_features must be >= 1")
        if self.class_separation < 0 or self.noise_sigma < 0:
            raise ValueError("class_separation and noise_sigma must be >= 0")


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Two isotropic Gaussian blobs: majority (label 1, attack) centred at the
    origin, minority (label 0, normal) shifted by ``class_separation`` along
    every coordinate. Majority rows come first."""
    rng = np.random.default_rng(spec.seed)
    D = spec.n_features
    maj = rng.normal(0.0, spec.noise_sigma, size=(spec.n_majority, D))
    mino = rng.normal(spec.class_separation, spec.noise_sigma, size=(spec.n_minority, D))
    X = np.vstack([maj, mino])
    y = np.concatenate([np.ones(spec.n_majority, np.int64), np.zeros(spec.n_minority, np.int64)])
    cols = tuple(Column(f"f{j}") for j in range(D))
    return Dataset(cols, X, y)


def schema_of(d: Dataset) -> tuple[Column, ...]:
    """Schema that reads a CSV written from ``d`` back into the same columns."""
    return d.columns
