"""Imputation, normalization, and derived features.

Conventions used throughout this module (and everywhere downstream):

* Absent values are NaN inside numeric arrays; a presence mask is
  always derivable as ``~isnan``.
* Standard deviation is the population form (divide by n). This one
  convention is used both by the mean normalizer and by per-coin
  aggregate statistics.
* Imputation order matters: ``impute_max_supply`` runs before
  ``impute_mean`` so its large sentinel values never contaminate a
  column mean.
* Correlation analysis never sees imputed values; it deletes absent
  entries pairwise instead (see the correlation module).
"""

from __future__ import annotations

import datetime as dt
import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dataset import EXTENDED_COLUMNS, NUMERIC_COLUMNS, Dataset
from .errors import ChainlensError, DataQualityWarning

AGGREGATE_COLUMNS = ("price", "max_supply", "total_supply", "volume_24h", "ptsc")


def _freeze(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class FeatureTable:
    """Named numeric columns of equal length, NaN marking absence.

    Immutable: transforms return new tables. Equality is by content,
    treating NaN cells as equal (two tables with the same holes match).
    """

    row_ids: tuple[str, ...]
    _data: dict[str, np.ndarray]

    @classmethod
    def from_columns(
        cls, row_ids: Sequence[str], columns: Mapping[str, Iterable]
    ) -> "FeatureTable":
        row_ids = tuple(row_ids)
        data = {}
        for name, values in columns.items():
            arr = _freeze(
                [np.nan if v is None else v for v in values]
                if not isinstance(values, np.ndarray)
                else values
            )
            if arr.ndim != 1 or arr.shape[0] != len(row_ids):
                raise ValueError(
                    f"column {name!r} has shape {arr.shape}, expected ({len(row_ids)},)"
                )
            data[name] = arr
        return cls(row_ids=row_ids, _data=data)

    @property
    def n_rows(self) -> int:
        return len(self.row_ids)

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(self._data)

    def column(self, name: str) -> np.ndarray:
        return self._data[name]

    def present_mask(self, name: str) -> np.ndarray:
        return ~np.isnan(self._data[name])

    def matrix(self, columns: Sequence[str] | None = None) -> np.ndarray:
        names = list(columns) if columns is not None else list(self._data)
        return np.column_stack([self._data[n] for n in names])

    def with_columns(self, **replacements) -> "FeatureTable":
        data = dict(self._data)
        for name, values in replacements.items():
            arr = _freeze(values)
            if arr.shape != (self.n_rows,):
                raise ValueError(
                    f"column {name!r} has shape {arr.shape}, expected ({self.n_rows},)"
                )
            data[name] = arr
        return FeatureTable(row_ids=self.row_ids, _data=data)

    def take(self, indices) -> "FeatureTable":
        indices = np.asarray(indices)
        return FeatureTable(
            row_ids=tuple(self.row_ids[i] for i in indices),
            _data={n: _freeze(c[indices]) for n, c in self._data.items()},
        )

    def __eq__(self, other):
        if not isinstance(other, FeatureTable):
            return NotImplemented
        if self.row_ids != other.row_ids:
            return False
        if self.column_names != other.column_names:
            return False
        return all(
            np.array_equal(self._data[n], other._data[n], equal_nan=True)
            for n in self._data
        )


def _lift(value):
    # scalar absent -> nan so the arithmetic below is uniform
    if value is None:
        return np.nan
    return value


def derive_market_cap(price, circulating_supply):
    """Market capitalization: price times circulating supply.

    Accepts scalars or arrays; an absent input yields an absent output.
    """
    scalar = np.isscalar(price) or price is None
    p = np.asarray(_lift(price), dtype=np.float64)
    c = np.asarray(_lift(circulating_supply), dtype=np.float64)
    out = p * c
    if scalar:
        value = float(out)
        return None if np.isnan(value) else value
    return out


def _ptsc_values(circulating, total) -> np.ndarray:
    circ = np.asarray(circulating, dtype=np.float64)
    tot = np.asarray(total, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(tot > 0, circ / tot, np.nan)
    return out


def derive_ptsc(circulating_supply, total_supply):
    """Public token supply coverage: circulating over total supply.

    Rows where total supply is absent or zero come back absent, with a
    data-quality warning. Ratios above 1 (dirty data) are kept but
    flagged with a warning as well; dropping them would bias any
    downstream survival statistic.
    """
    scalar = np.isscalar(circulating_supply) or circulating_supply is None
    circ = np.atleast_1d(np.asarray(_lift(circulating_supply), dtype=np.float64))
    tot = np.atleast_1d(np.asarray(_lift(total_supply), dtype=np.float64))
    out = _ptsc_values(circ, tot)
    bad_total = int(np.sum(~(tot > 0) & ~np.isnan(circ)))
    if bad_total:
        warnings.warn(
            f"{bad_total} value(s) have absent or zero total_supply; "
            "ratio left absent",
            DataQualityWarning,
            stacklevel=2,
        )
    above_one = int(np.sum(out > 1))
    if above_one:
        warnings.warn(
            f"{above_one} ratio value(s) exceed 1 (circulating above total); kept",
            DataQualityWarning,
            stacklevel=2,
        )
    if scalar:
        value = float(out[0])
        return None if np.isnan(value) else value
    return out


def impute_mean(table: FeatureTable, columns: Sequence[str]) -> FeatureTable:
    """Replace absent cells with the pre-imputation column mean.

    Idempotent, and the column mean is unchanged by the pass. A column
    with no present values cannot define a mean and is an error.
    """
    replacements = {}
    for name in columns:
        col = table.column(name)
        mask = ~np.isnan(col)
        if not mask.any():
            raise ChainlensError(
                f"cannot mean-impute column {name!r}: no present values"
            )
        if mask.all():
            continue
        filled = col.copy()
        filled[~mask] = col[mask].mean()
        replacements[name] = filled
    if not replacements:
        return table
    return table.with_columns(**replacements)


def impute_max_supply(table: FeatureTable) -> FeatureTable:
    """Fill absent max_supply with 1000x the column's present maximum.

    The multiplier deliberately overshoots: a coin that never declared
    a supply cap behaves like one with an effectively unlimited cap,
    and a mean fill would instead make it look typical.
    """
    col = table.column("max_supply")
    mask = ~np.isnan(col)
    if not mask.any():
        raise ChainlensError(
            "cannot impute column 'max_supply': no present values"
        )
    if mask.all():
        return table
    filled = col.copy()
    filled[~mask] = col[mask].max() * 1000.0
    return table.with_columns(max_supply=filled)


def mean_normalize(column: np.ndarray) -> np.ndarray:
    """Center and scale to mean 0, population std 1."""
    col = np.asarray(column, dtype=np.float64)
    if col.ndim != 1 or col.shape[0] < 2:
        raise ChainlensError("mean_normalize needs a 1-d column of length >= 2")
    if np.isnan(col).any():
        raise ChainlensError("mean_normalize requires a fully present column")
    std = col.std()  # population (divide by n)
    if std == 0:
        raise ChainlensError("cannot mean-normalize a constant column")
    out = (col - col.mean()) / std
    # one polish pass: an exact-arithmetic no-op that mops up float
    # cancellation so the mean-0 / std-1 postcondition holds tightly
    # even for near-constant columns at large magnitude
    out = out - out.mean()
    return out / out.std()


def max_normalize(column: np.ndarray) -> np.ndarray:
    """Scale so the column maximum is exactly 1."""
    col = np.asarray(column, dtype=np.float64)
    if col.ndim != 1 or col.shape[0] == 0:
        raise ChainlensError("max_normalize needs a non-empty 1-d column")
    if np.isnan(col).any():
        raise ChainlensError("max_normalize requires a fully present column")
    top = col.max()
    if top <= 0:
        raise ChainlensError(f"cannot max-normalize: column max is {top}")
    return col / top


@dataclass(frozen=True)
class ColumnStats:
    """Mean and population std of one column; absent below the
    observation floor (mean needs 1 value, std needs 2)."""

    mean: float | None
    std: float | None
    count: int


@dataclass(frozen=True)
class AggregateFeatures:
    """Per-coin summary statistics over a date range."""

    key: str
    price: ColumnStats
    max_supply: ColumnStats
    total_supply: ColumnStats
    volume_24h: ColumnStats
    ptsc: ColumnStats


def _column_stats(values: np.ndarray) -> ColumnStats:
    present = values[~np.isnan(values)]
    n = present.shape[0]
    mean = float(present.mean()) if n >= 1 else None
    std = float(present.std()) if n >= 2 else None
    return ColumnStats(mean=mean, std=std, count=n)


def aggregate_stats(
    dataset: Dataset,
    date_range: tuple[dt.date | None, dt.date | None] | None = None,
) -> dict[str, AggregateFeatures]:
    """Per-coin mean/std of price, supplies, volume, and supply ratio.

    ``date_range`` is an inclusive (start, end) pair; either side may
    be None for open-ended. Statistics use present values only.
    """
    lo, hi = date_range if date_range is not None else (None, None)
    if lo is not None and hi is not None and lo > hi:
        raise ChainlensError(f"empty date range: {lo} > {hi}")
    out: dict[str, AggregateFeatures] = {}
    for key in dataset.keys:
        rows = [
            s
            for s in dataset.series(key)
            if (lo is None or s.date >= lo) and (hi is None or s.date <= hi)
        ]
        grab = lambda col: np.array(
            [np.nan if getattr(s, col) is None else getattr(s, col) for s in rows],
            dtype=np.float64,
        )
        circ, tot = grab("circulating_supply"), grab("total_supply")
        out[key] = AggregateFeatures(
            key=key,
            price=_column_stats(grab("price")),
            max_supply=_column_stats(grab("max_supply")),
            total_supply=_column_stats(grab("total_supply")),
            volume_24h=_column_stats(grab("volume_24h")),
            ptsc=_column_stats(_ptsc_values(circ, tot)),
        )
    return out


def row_feature_table(
    dataset: Dataset,
    columns: Sequence[str] | None = None,
    date_range: tuple[dt.date | None, dt.date | None] | None = None,
) -> FeatureTable:
    """One table row per snapshot, row ids ``key@YYYY-MM-DD``."""
    names = tuple(columns) if columns is not None else NUMERIC_COLUMNS
    valid = set(NUMERIC_COLUMNS) | set(EXTENDED_COLUMNS)
    unknown = [n for n in names if n not in valid]
    if unknown:
        raise KeyError(f"unknown column(s) {unknown}")
    lo, hi = date_range if date_range is not None else (None, None)
    rows = [
        s
        for s in dataset.snapshots
        if (lo is None or s.date >= lo) and (hi is None or s.date <= hi)
    ]
    ids = [f"{s.key}@{s.date.isoformat()}" for s in rows]
    data = {
        name: [getattr(s, name) for s in rows]
        for name in names
    }
    return FeatureTable.from_columns(ids, data)
