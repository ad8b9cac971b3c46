"""Dataset ingestion, splitting and binarization onto a condition set X."""
from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import MalformedCsv, MissingValue, SchemaMismatch, UnknownLabelColumn
from .logic import Literal, Term

MISSING_TOKENS = {"", "?", "NA", "NaN", "nan"}


class Kind(str, Enum):
    NUMERICAL = "numerical"
    CATEGORICAL = "categorical"
    BOOLEAN = "boolean"


@dataclass(frozen=True)
class AttributeSchema:
    name: str
    kind: Kind
    observed_domain: tuple = ()


@dataclass(frozen=True)
class Condition:
    """A Boolean test on one attribute: ``attr > value`` or ``attr = value``."""

    id: int
    attribute: int
    op: str  # ">" or "="
    value: Any
    kind: Kind = Kind.NUMERICAL
    name: str = ""

    def __post_init__(self):
        if self.op not in (">", "="):
            raise ValueError(f"unknown predicate {self.op!r}")
        if self.op == ">" and self.kind is not Kind.NUMERICAL:
            raise ValueError("GreaterThan only applies to numerical attributes")
        if self.op == "=" and self.kind is Kind.NUMERICAL:
            raise ValueError("Equals only applies to categorical or Boolean attributes")

    @property
    def key(self) -> tuple:
        return (self.attribute, self.op, self.value)

    def evaluate(self, value) -> bool:
        if self.op == ">":
            return float(value) > self.value
        return value == self.value

    def with_id(self, new_id: int) -> "Condition":
        return Condition(new_id, self.attribute, self.op, self.value, self.kind, self.name)

    def __str__(self) -> str:
        name = self.name or f"a{self.attribute}"
        return f"{name}{self.op}{format_value(self.value)}"


def format_value(v) -> str:
    if isinstance(v, float):
        return str(int(v)) if v.is_integer() else repr(v)
    return str(v)


def parse_condition(text: str, attributes: dict[str, int], cid: int) -> Condition:
    """Inverse of ``str(Condition)``; unseen attribute names get the next index."""
    for op in (">", "="):
        if op in text:
            name, raw = text.split(op, 1)
            break
    else:
        raise ValueError(f"not a condition: {text!r}")
    attr = attributes.setdefault(name, len(attributes))
    if op == ">":
        return Condition(cid, attr, ">", float(raw), Kind.NUMERICAL, name)
    if raw in ("0", "1"):
        return Condition(cid, attr, "=", int(raw), Kind.BOOLEAN, name)
    return Condition(cid, attr, "=", raw, Kind.CATEGORICAL, name)


@dataclass(frozen=True)
class Dataset:
    schema: tuple[AttributeSchema, ...]
    rows: tuple[tuple, ...]
    labels: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.schema]

    def column(self, j: int) -> list:
        return [r[j] for r in self.rows]

    def subset(self, idx: Iterable[int]) -> "Dataset":
        idx = list(idx)
        return Dataset(self.schema, tuple(self.rows[i] for i in idx), tuple(self.labels[i] for i in idx))

    def label_array(self) -> np.ndarray:
        return np.asarray(self.labels, dtype=np.int8)


@dataclass(frozen=True)
class BinarizedDataset:
    conditions: tuple[Condition, ...]
    bits: np.ndarray  # (rows, |X|) uint8
    labels: np.ndarray  # (rows,) int8
    _names: tuple = field(default=(), compare=False)

    def __len__(self) -> int:
        return int(self.bits.shape[0])

    @property
    def num_conditions(self) -> int:
        return len(self.conditions)

    def row(self, i: int) -> np.ndarray:
        return self.bits[i]

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow([str(c) for c in self.conditions] + ["y"])
        for b, y in zip(self.bits, self.labels):
            w.writerow([int(v) for v in b] + [int(y)])
        return out.getvalue()

    @classmethod
    def from_csv(cls, source) -> "BinarizedDataset":
        text = _read_text(source)
        reader = csv.reader(io.StringIO(text))
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedCsv("empty file, header row expected") from None
        if not header or header[-1].strip() != "y":
            raise UnknownLabelColumn("binarized CSV must end with a 'y' column")
        attrs: dict[str, int] = {}
        conds = tuple(parse_condition(h.strip(), attrs, i) for i, h in enumerate(header[:-1]))
        bits, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise MalformedCsv(f"row {lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                vals = [int(v) for v in row]
            except ValueError:
                raise MalformedCsv(f"row {lineno}: non 0/1 value") from None
            if any(v not in (0, 1) for v in vals):
                raise MalformedCsv(f"row {lineno}: non 0/1 value")
            bits.append(vals[:-1])
            labels.append(vals[-1])
        arr = np.asarray(bits, dtype=np.uint8).reshape(len(bits), len(conds))
        return cls(conds, arr, np.asarray(labels, dtype=np.int8))


def _read_text(source) -> str:
    if isinstance(source, (bytes, bytearray)):
        return bytes(source).decode("utf-8-sig")
    if isinstance(source, (str, os.PathLike)) and os.path.exists(source):
        with open(source, encoding="utf-8-sig", newline="") as fh:
            return fh.read()
    if isinstance(source, str):
        return source
    data = source.read()
    return data.decode("utf-8-sig") if isinstance(data, bytes) else data


def _is_number(s: str) -> bool:
    try:
        return math.isfinite(float(s))
    except ValueError:
        return False


def load_csv(source, label: str = "y", schema_hints: dict[str, Kind] | None = None,
             require_label: bool = True) -> Dataset:
    """Read a comma-separated file with a header row into a typed Dataset.

    ``source`` may be a path, raw bytes, CSV text or a file object.
    Columns are typed automatically (numbers, {0,1} Booleans, strings)
    unless ``schema_hints`` overrides them by name. With
    ``require_label=False`` a file without the label column loads with
    all labels set to 0 (instances to explain, for instance).
    """
    text = _read_text(source)
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise MalformedCsv("empty file, header row expected") from None
    if label not in header:
        if require_label:
            raise UnknownLabelColumn(f"label column {label!r} not in header {header}")
        text = "\n".join(line + ",0" if i else line + "," + label
                          for i, line in enumerate(text.splitlines()) if line.strip()) + "\n"
        return load_csv(text, label, schema_hints)
    if len(set(header)) != len(header):
        raise MalformedCsv("duplicate column names in header")
    yi = header.index(label)
    names = [h for i, h in enumerate(header) if i != yi]
    raw_rows: list[list[str]] = []
    labels: list[int] = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise MalformedCsv(f"row {lineno}: expected {len(header)} fields, got {len(row)}")
        cells = [c.strip() for c in row]
        for j, c in enumerate(cells):
            if c in MISSING_TOKENS:
                raise MissingValue(f"row {lineno}, column {header[j]!r}: missing value")
        try:
            y = int(float(cells[yi]))
        except ValueError:
            raise MalformedCsv(f"row {lineno}: label {cells[yi]!r} is not 0/1") from None
        if y not in (0, 1) or float(cells[yi]) != y:
            raise MalformedCsv(f"row {lineno}: label {cells[yi]!r} is not 0/1")
        labels.append(y)
        raw_rows.append([c for j, c in enumerate(cells) if j != yi])

    hints = schema_hints or {}
    schema = []
    columns = []
    for j, name in enumerate(names):
        col = [r[j] for r in raw_rows]
        kind = hints.get(name)
        if kind is None:
            if all(_is_number(v) for v in col):
                kind = Kind.BOOLEAN if col and all(float(v) in (0.0, 1.0) for v in col) else Kind.NUMERICAL
            else:
                kind = Kind.CATEGORICAL
        kind = Kind(kind)
        try:
            if kind is Kind.NUMERICAL:
                vals = [float(v) for v in col]
            elif kind is Kind.BOOLEAN:
                vals = [int(float(v)) for v in col]
                if any(v not in (0, 1) for v in vals):
                    raise ValueError
            else:
                vals = col
        except ValueError:
            raise MalformedCsv(f"column {name!r} does not fit kind {kind.value}") from None
        columns.append(vals)
        schema.append(AttributeSchema(name, kind, tuple(sorted(set(vals)))))
    rows = tuple(zip(*columns)) if columns else tuple(() for _ in raw_rows)
    return Dataset(tuple(schema), rows, tuple(labels))


def dataset_from_arrays(columns: dict[str, Sequence], labels: Sequence[int],
                        kinds: dict[str, Kind] | None = None) -> Dataset:
    """Build a Dataset directly from in-memory columns (no CSV round trip)."""
    kinds = kinds or {}
    schema, cols = [], []
    for name, col in columns.items():
        col = list(col)
        kind = kinds.get(name)
        if kind is None:
            if all(isinstance(v, str) for v in col):
                kind = Kind.CATEGORICAL
            elif all(v in (0, 1) for v in col):
                kind = Kind.BOOLEAN
            else:
                kind = Kind.NUMERICAL
        if kind is Kind.NUMERICAL:
            col = [float(v) for v in col]
        elif kind is Kind.BOOLEAN:
            col = [int(v) for v in col]
        schema.append(AttributeSchema(name, Kind(kind), tuple(sorted(set(col)))))
        cols.append(col)
    rows = tuple(zip(*cols)) if cols else tuple(() for _ in labels)
    return Dataset(tuple(schema), rows, tuple(int(y) for y in labels))


def write_csv(d: Dataset, label: str = "y") -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(d.names + [label])
    for r, y in zip(d.rows, d.labels):
        w.writerow([format_value(v) for v in r] + [y])
    return out.getvalue()


def split(d: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded random partition; the train part holds round(fraction * |d|) rows."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    n = len(d)
    k = int(math.floor(train_fraction * n + 0.5))
    perm = np.random.default_rng(seed).permutation(n)
    train_idx = sorted(perm[:k].tolist())
    test_idx = sorted(perm[k:].tolist())
    return d.subset(train_idx), d.subset(test_idx)


def _check_schema(d: Dataset, conditions: Sequence[Condition]) -> list[int]:
    cols = []
    by_name = {a.name: j for j, a in enumerate(d.schema)}
    for c in conditions:
        # names win over positional indices when both are available
        j = by_name.get(c.name, c.attribute) if c.name else c.attribute
        if not 0 <= j < len(d.schema):
            raise SchemaMismatch(f"condition {c} refers to a missing attribute")
        kind = d.schema[j].kind
        if (c.op == ">") != (kind is Kind.NUMERICAL):
            raise SchemaMismatch(f"condition {c} does not match {kind.value} attribute {d.schema[j].name!r}")
        cols.append(j)
    return cols


def binarize(d: Dataset, conditions: Sequence[Condition]) -> BinarizedDataset:
    cols = _check_schema(d, conditions)
    n = len(d)
    bits = np.zeros((n, len(conditions)), dtype=np.uint8)
    for k, (c, j) in enumerate(zip(conditions, cols)):
        col = d.column(j)
        if c.op == ">":
            bits[:, k] = np.asarray(col, dtype=float) > c.value
        else:
            bits[:, k] = [v == c.value for v in col]
    return BinarizedDataset(tuple(conditions), bits, d.label_array())


def binarize_row(values: Sequence, conditions: Sequence[Condition]) -> np.ndarray:
    return np.array([c.evaluate(values[c.attribute]) for c in conditions], dtype=np.uint8)


def instance_to_term(bits) -> Term:
    return Term(Literal(i, bool(b)) for i, b in enumerate(bits))


def term_to_bits(t: Term, n: int) -> np.ndarray:
    bits = np.zeros(n, dtype=np.uint8)
    for lit in t:
        bits[lit.condition] = 1 if lit.polarity else 0
    return bits
