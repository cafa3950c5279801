"""Column-oriented datasets: CSV ingestion, joining, cohort filtering,
train/test splitting and descriptive statistics."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .expressions import ColumnSpec, Schema

__all__ = [
    "Dataset",
    "CohortFilter",
    "SplitSpec",
    "DatasetError",
    "MissingHeader",
    "RaggedRow",
    "UnparseableCell",
    "DuplicateKey",
    "KeyMissing",
    "EmptyDataset",
    "load_csv",
    "write_csv",
    "join_on",
    "apply_filter",
    "split",
    "describe",
    "format_stats",
    "stats_rows",
]


class DatasetError(Exception):
    pass


class MissingHeader(DatasetError):
    pass


class RaggedRow(DatasetError):
    def __init__(self, row: int, expected: int, got: int):
        super().__init__(f"row {row} has {got} cells, expected {expected}")
        self.row = row


class UnparseableCell(DatasetError):
    def __init__(self, row: int, column: str, text: str):
        super().__init__(f"cannot parse {text!r} at row {row}, column {column!r}")
        self.row = row
        self.column = column


class DuplicateKey(DatasetError):
    pass


class KeyMissing(DatasetError):
    pass


class EmptyDataset(DatasetError):
    pass


@dataclass
class Dataset:
    """Immutable table: numeric columns as float arrays (NaN = missing),
    categorical columns as string arrays ("" = missing)."""

    schema: Schema
    columns: dict[str, np.ndarray]

    def __post_init__(self):
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1:
            raise DatasetError(f"column lengths differ: {sorted(lengths)}")
        if set(self.columns) != set(self.schema.names):
            raise DatasetError("columns do not match schema")

    @property
    def n_rows(self) -> int:
        if not self.columns:
            return 0
        return len(next(iter(self.columns.values())))

    def column(self, name: str) -> np.ndarray:
        try:
            return self.columns[name]
        except KeyError:
            raise KeyError(f"no column {name!r}") from None

    def take(self, indices) -> "Dataset":
        idx = np.asarray(indices)
        return Dataset(self.schema, {k: v[idx] for k, v in self.columns.items()})

    def select(self, names: Sequence[str]) -> "Dataset":
        specs = tuple(self.schema[n] for n in names)
        return Dataset(Schema(specs), {n: self.columns[n] for n in names})

    def with_column(self, spec: ColumnSpec, values) -> "Dataset":
        arr = np.asarray(values)
        cols = dict(self.columns)
        specs = [c for c in self.schema.columns if c.name != spec.name]
        cols[spec.name] = arr
        return Dataset(Schema(tuple(specs) + (spec,)), cols)

    def missing_mask(self, names: Sequence[str] | None = None) -> np.ndarray:
        """True for rows with any missing value in the given columns."""
        names = list(names) if names is not None else list(self.schema.names)
        mask = np.zeros(self.n_rows, dtype=bool)
        for name in names:
            col = self.columns[name]
            if self.schema[name].kind == "numeric":
                mask |= ~np.isfinite(col)
            else:
                mask |= col == ""
        return mask

    @classmethod
    def from_dict(cls, numeric: Mapping[str, Sequence[float]] | None = None,
                  categorical: Mapping[str, Sequence[str]] | None = None) -> "Dataset":
        numeric = dict(numeric or {})
        categorical = dict(categorical or {})
        specs = []
        cols: dict[str, np.ndarray] = {}
        for name, vals in numeric.items():
            specs.append(ColumnSpec(name, "numeric"))
            cols[name] = np.asarray(vals, dtype=float)
        for name, vals in categorical.items():
            arr = np.asarray([str(v) for v in vals], dtype=object)
            cats = tuple(sorted({v for v in arr if v != ""}))
            specs.append(ColumnSpec(name, "categorical", cats or ("",)))
            cols[name] = arr
        return cls(Schema(tuple(specs)), cols)


@dataclass(frozen=True)
class CohortFilter:
    """Row inclusion criteria for the study cohort."""

    min_age_years: float = 18.0
    age_column: str = "RIDAGEYR"
    exclude_pregnant: bool = True
    pregnancy_column: str = "RIDEXPRG"
    pregnant_code: float = 1.0
    required_nonmissing: tuple[str, ...] = ()

    def __post_init__(self):
        if self.min_age_years < 0:
            raise ValueError("min_age_years must be >= 0")
        object.__setattr__(self, "required_nonmissing", tuple(self.required_nonmissing))


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must be in (0, 1)")


# ---------------------------------------------------------------------------
# CSV


def _parse_numeric(text: str, row: int, column: str, missing: set[str]) -> float:
    text = text.strip()
    if text == "" or text in missing:
        return np.nan
    try:
        return float(text)
    except ValueError:
        raise UnparseableCell(row, column, text) from None


def load_csv(
    path,
    categorical: Iterable[str] = (),
    missing_codes: Mapping[str, Iterable[str]] | None = None,
    declared_categories: Mapping[str, Sequence[str]] | None = None,
) -> Dataset:
    """Load a headered CSV; columns are numeric unless named in `categorical`.

    Empty cells and per-column `missing_codes` become missing markers
    (NaN for numeric columns, "" for categorical ones).
    """
    categorical = set(categorical)
    missing_codes = {k: {str(x) for x in v} for k, v in (missing_codes or {}).items()}
    declared_categories = dict(declared_categories or {})

    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingHeader(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        if any(not h for h in header) or len(set(header)) != len(header):
            raise MissingHeader(f"{path}: header is missing or has blank/duplicate names")
        raw_rows = []
        for i, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise RaggedRow(i, len(header), len(row))
            raw_rows.append(row)

    specs = []
    cols: dict[str, np.ndarray] = {}
    for j, name in enumerate(header):
        cells = [r[j] for r in raw_rows]
        codes = missing_codes.get(name, set())
        if name in categorical:
            values = np.asarray(
                ["" if c.strip() in codes else c.strip() for c in cells], dtype=object
            )
            cats = declared_categories.get(name)
            if cats is None:
                cats = sorted({v for v in values if v != ""})
            specs.append(ColumnSpec(name, "categorical", tuple(cats) or ("",)))
            cols[name] = values
        else:
            values = np.asarray(
                [_parse_numeric(c, i + 1, name, codes) for i, c in enumerate(cells)]
            )
            specs.append(ColumnSpec(name, "numeric"))
            cols[name] = values
    return Dataset(Schema(tuple(specs)), cols)


def write_csv(dataset: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        names = list(dataset.schema.names)
        writer.writerow(names)
        kinds = [dataset.schema[n].kind for n in names]
        columns = [dataset.columns[n] for n in names]
        for i in range(dataset.n_rows):
            row = []
            for kind, col in zip(kinds, columns):
                v = col[i]
                if kind == "numeric":
                    row.append("" if not np.isfinite(v) else repr(float(v)))
                else:
                    row.append(v)
            writer.writerow(row)


# ---------------------------------------------------------------------------
# Relational operations


def join_on(datasets: Sequence[Dataset], key: str) -> Dataset:
    """Inner join on a key column unique within each input."""
    if not datasets:
        raise EmptyDataset("nothing to join")
    for d in datasets:
        if key not in d.schema:
            raise KeyMissing(f"key column {key!r} missing from an input")

    index_maps = []
    for d in datasets:
        col = d.column(key)
        seen: dict[float, int] = {}
        for i, v in enumerate(col.tolist()):
            if v in seen:
                raise DuplicateKey(f"key {v!r} duplicated within one input")
            seen[v] = i
        index_maps.append(seen)

    common = [k for k in index_maps[0] if all(k in m for m in index_maps[1:])]
    row_picks = [np.asarray([m[k] for k in common], dtype=int) for m in index_maps]

    specs: list[ColumnSpec] = [datasets[0].schema[key]]
    cols: dict[str, np.ndarray] = {key: datasets[0].column(key)[row_picks[0]]}
    taken = {key}
    for d_i, (d, picks) in enumerate(zip(datasets, row_picks)):
        for spec in d.schema.columns:
            if spec.name == key:
                continue
            name = spec.name
            n = 2
            while name in taken:
                name = f"{spec.name}_{n}"
                n += 1
            taken.add(name)
            specs.append(ColumnSpec(name, spec.kind, spec.categories))
            cols[name] = d.column(spec.name)[picks] if len(common) else d.column(spec.name)[:0]
    return Dataset(Schema(tuple(specs)), cols)


def apply_filter(dataset: Dataset, flt: CohortFilter) -> tuple[Dataset, dict[str, int]]:
    """Drop rows failing any criterion; report removals per criterion.

    Counts are attributed in order (age, pregnancy, missing values), each
    against the rows surviving the previous criteria.
    """
    keep = np.ones(dataset.n_rows, dtype=bool)
    removed: dict[str, int] = {}

    if flt.age_column in dataset.schema:
        age = dataset.column(flt.age_column)
        ok = age >= flt.min_age_years
        removed["age"] = int(np.sum(keep & ~ok))
        keep &= ok
    else:
        removed["age"] = 0

    if flt.exclude_pregnant and flt.pregnancy_column in dataset.schema:
        preg = dataset.column(flt.pregnancy_column)
        pregnant = np.zeros(dataset.n_rows, dtype=bool)
        if dataset.schema[flt.pregnancy_column].kind == "numeric":
            pregnant = preg == flt.pregnant_code
        else:
            pregnant = preg == str(flt.pregnant_code)
        removed["pregnant"] = int(np.sum(keep & pregnant))
        keep &= ~pregnant
    else:
        removed["pregnant"] = 0

    required = [c for c in flt.required_nonmissing if c in dataset.schema]
    if required:
        missing = dataset.missing_mask(required)
        removed["missing"] = int(np.sum(keep & missing))
        keep &= ~missing
    else:
        removed["missing"] = 0

    return dataset.take(np.flatnonzero(keep)), removed


def split(dataset: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Seeded uniform shuffle, then partition at round(train_fraction * n)."""
    n = dataset.n_rows
    if n < 2:
        raise EmptyDataset("need at least 2 rows to split")
    rng = np.random.default_rng(spec.seed)
    order = rng.permutation(n)
    n_train = int(round(spec.train_fraction * n))
    n_train = min(max(n_train, 1), n - 1)
    return dataset.take(order[:n_train]), dataset.take(order[n_train:])


# ---------------------------------------------------------------------------
# Descriptive statistics

_STAT_FIELDS = ("mean", "std", "min", "p25", "p50", "p75", "max")


def describe(dataset: Dataset, names: Sequence[str] | None = None) -> dict[str, dict[str, float]]:
    """Per-column stats for numeric columns: mean, sample std (n-1), min,
    quartiles by linear interpolation, max.  Missing values are ignored."""
    out: dict[str, dict[str, float]] = {}
    names = list(names) if names is not None else [
        c.name for c in dataset.schema.columns if c.kind == "numeric"
    ]
    for name in names:
        col = dataset.column(name)
        vals = col[np.isfinite(col)]
        if vals.size == 0:
            out[name] = {k: np.nan for k in _STAT_FIELDS}
            continue
        q25, q50, q75 = np.percentile(vals, [25, 50, 75])
        out[name] = {
            "mean": float(np.mean(vals)),
            "std": float(np.std(vals, ddof=1)) if vals.size > 1 else 0.0,
            "min": float(np.min(vals)),
            "p25": float(q25),
            "p50": float(q50),
            "p75": float(q75),
            "max": float(np.max(vals)),
        }
    return out


def stats_rows(stats: dict[str, dict[str, float]]) -> list[list[str]]:
    """Stats as CSV-ready rows with a header line."""
    rows = [["variable", *(f.replace("p", "") + ("%" if f.startswith("p") else "") for f in _STAT_FIELDS)]]
    rows[0] = ["variable", "mean", "std", "min", "25%", "50%", "75%", "max"]
    for name, st in stats.items():
        rows.append([name] + [f"{st[f]:.6g}" for f in _STAT_FIELDS])
    return rows


def format_stats(stats: dict[str, dict[str, float]]) -> str:
    """Aligned-text rendering of describe() output."""
    rows = stats_rows(stats)
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = []
    for r in rows:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip())
    return "\n".join(lines) + "\n"
