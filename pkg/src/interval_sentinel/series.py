"""Timestamped multivariate series: CSV ingestion, derived features,
aggregation, supervised windowing, and train/test splitting.

Missing values are NaN. Timestamps are numpy ``datetime64[ns]`` with a
strictly uniform step; irregular series are rejected rather than reindexed
because all downstream windowing assumes a constant tick.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from .errors import CsvFormatError, SchemaError, SeriesStructureError

logger = logging.getLogger(__name__)

SUBMETERING_FEATURES = ("global_active_power", "sub_metering_1",
                        "sub_metering_2", "sub_metering_3")


@dataclass(frozen=True)
class MultivariateSeries:
    """Uniformly sampled matrix of named features.

    ``values`` is (n_steps, n_features) float64 with NaN as the missing
    marker. Categorical columns that have not been label-encoded yet live in
    ``categorical`` as string arrays, outside the numeric matrix.
    """

    timestamps: np.ndarray
    values: np.ndarray
    feature_names: tuple[str, ...]
    target_index: int
    step: np.timedelta64
    categorical: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype="datetime64[ns]")
        vals = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if vals.ndim != 2:
            raise ValueError(f"values must be 2-D, got shape {vals.shape}")
        if len(ts) != vals.shape[0]:
            raise SeriesStructureError(
                f"{len(ts)} timestamps but {vals.shape[0]} value rows")
        if vals.shape[1] != len(self.feature_names):
            raise SeriesStructureError(
                f"{vals.shape[1]} columns but {len(self.feature_names)} feature names")
        if not 0 <= self.target_index < len(self.feature_names):
            raise ValueError(
                f"target_index {self.target_index} out of range for "
                f"{len(self.feature_names)} features")
        if len(ts) > 1:
            diffs = np.diff(ts)
            if np.any(diffs <= np.timedelta64(0, "ns")):
                raise SeriesStructureError("timestamps must be strictly increasing")
            if np.any(diffs != np.timedelta64(self.step)):
                raise SeriesStructureError(
                    "timestamps are not uniformly spaced at the declared step")

    @property
    def n_steps(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    @property
    def target_name(self) -> str:
        return self.feature_names[self.target_index]

    def target(self) -> np.ndarray:
        """The forecast variable as a 1-D array."""
        return self.values[:, self.target_index]

    def feature(self, name: str) -> np.ndarray:
        try:
            idx = self.feature_names.index(name)
        except ValueError:
            raise SchemaError(f"feature {name!r} not present") from None
        return self.values[:, idx]

    def with_values(self, values: np.ndarray) -> "MultivariateSeries":
        """Same metadata, new value matrix of identical shape."""
        return MultivariateSeries(self.timestamps, values, self.feature_names,
                                  self.target_index, self.step,
                                  dict(self.categorical))

    def slice(self, start: int, stop: int) -> "MultivariateSeries":
        cats = {k: v[start:stop] for k, v in self.categorical.items()}
        return MultivariateSeries(self.timestamps[start:stop],
                                  self.values[start:stop],
                                  self.feature_names, self.target_index,
                                  self.step, cats)


@dataclass(frozen=True)
class WindowedDataset:
    """Supervised framing: flattened input windows and horizon targets.

    ``inputs`` is (n_samples, w * n_features), each row a contiguous slice of
    the source series in row-major (time, feature) order. ``targets`` is
    (n_samples, h) from the target feature. ``target_times`` carries the
    timestamp of every target step for export alignment.
    """

    inputs: np.ndarray
    targets: np.ndarray
    w: int
    h: int
    stride: int
    n_features: int
    target_column: int
    target_times: np.ndarray

    def __post_init__(self):
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError("inputs and targets disagree on sample count")
        if self.inputs.shape[1] != self.w * self.n_features:
            raise ValueError("input width is not w * n_features")
        if self.targets.shape[1] != self.h:
            raise ValueError("target width is not h")

    @property
    def n_samples(self) -> int:
        return self.inputs.shape[0]

    def input_windows(self) -> np.ndarray:
        """Inputs reshaped to (n_samples, w, n_features)."""
        return self.inputs.reshape(self.n_samples, self.w, self.n_features)


@dataclass(frozen=True)
class SplitSpec:
    """Train/test boundary. ``boundary`` is a fraction in (0, 1) or a
    timestamp marking the first test row; models are never refitted after
    the split (static evaluation)."""

    mode: str = "holdout"
    boundary: float | str | np.datetime64 = 0.8
    refit: bool = False

    def __post_init__(self):
        if self.mode not in ("holdout", "walk_forward"):
            raise ValueError(f"unknown split mode {self.mode!r}")
        if self.refit:
            raise ValueError("refitting during evaluation is not supported")


@dataclass(frozen=True)
class CsvSchema:
    """Declares how a CSV maps onto a series."""

    timestamp_column: str
    features: tuple[str, ...]
    target: str
    categorical: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        object.__setattr__(self, "categorical", tuple(self.categorical))
        if self.target not in self.features:
            raise SchemaError(f"target {self.target!r} is not a declared feature")
        overlap = set(self.features) & set(self.categorical)
        if overlap:
            raise SchemaError(
                f"columns {sorted(overlap)} declared both numeric and categorical")


def _parse_timestamp(text: str, line: int) -> np.datetime64:
    try:
        return np.datetime64(datetime.fromisoformat(text.strip()))
    except ValueError:
        raise CsvFormatError(line, f"bad timestamp {text!r}") from None


def load_csv(path, schema: CsvSchema) -> MultivariateSeries:
    """Read a UTF-8 CSV with a header row into a series.

    Blank cells become NaN; any row containing the literal ``NA`` is dropped
    entirely (a distinct marker from blanks). Rows must arrive ordered with a
    uniform timestamp step, which is inferred from the first two surviving
    rows.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(1, "file is empty") from None
        header = [h.strip() for h in header]
        needed = [schema.timestamp_column, *schema.features, *schema.categorical]
        missing = [c for c in needed if c not in header]
        if missing:
            raise SchemaError(f"columns missing from header: {missing}")
        col = {name: header.index(name) for name in needed}

        timestamps: list[np.datetime64] = []
        rows: list[list[float]] = []
        cat_rows: dict[str, list[str]] = {name: [] for name in schema.categorical}
        dropped_na = 0
        for line_no, raw in enumerate(reader, start=2):
            if not raw or all(not cell.strip() for cell in raw):
                continue
            if len(raw) != len(header):
                raise CsvFormatError(
                    line_no, f"expected {len(header)} cells, found {len(raw)}")
            cells = [raw[col[name]] for name in needed]
            if any(cell.strip() == "NA" for cell in cells):
                dropped_na += 1
                continue
            timestamps.append(_parse_timestamp(raw[col[schema.timestamp_column]], line_no))
            numeric = []
            for name in schema.features:
                cell = raw[col[name]].strip()
                if cell == "":
                    numeric.append(np.nan)
                else:
                    try:
                        numeric.append(float(cell))
                    except ValueError:
                        raise CsvFormatError(
                            line_no, f"bad number {cell!r} in column {name!r}") from None
            rows.append(numeric)
            for name in schema.categorical:
                cat_rows[name].append(raw[col[name]].strip())

    if dropped_na:
        logger.info("dropped %d rows carrying the NA marker", dropped_na)
    if len(rows) < 2:
        raise SeriesStructureError("need at least two data rows to infer the step")
    ts = np.array(timestamps, dtype="datetime64[ns]")
    if np.any(np.diff(ts) <= np.timedelta64(0, "ns")):
        raise SeriesStructureError("timestamps must be strictly increasing")
    step = ts[1] - ts[0]
    cats = {name: np.array(vals, dtype=object) for name, vals in cat_rows.items()}
    return MultivariateSeries(ts, np.array(rows, dtype=np.float64),
                              schema.features,
                              schema.features.index(schema.target), step, cats)


def derive_submetering4(series: MultivariateSeries) -> MultivariateSeries:
    """Append the residual per-minute active energy not covered by the three
    sub-meters: (100/6) * global_active_power - sum of sub_metering_1..3.

    Negative results are kept as-is and surfaced in a data-quality log line.
    """
    missing = [f for f in SUBMETERING_FEATURES if f not in series.feature_names]
    if missing:
        raise SchemaError(f"cannot derive sub_metering_4, missing {missing}")
    gap = series.feature("global_active_power")
    subs = sum(series.feature(f"sub_metering_{k}") for k in (1, 2, 3))
    sm4 = (100.0 / 6.0) * gap - subs
    negatives = int(np.sum(sm4 < 0))
    if negatives:
        logger.warning("data quality: sub_metering_4 negative at %d of %d rows",
                       negatives, len(sm4))
    values = np.column_stack([series.values, sm4])
    return MultivariateSeries(series.timestamps, values,
                              (*series.feature_names, "sub_metering_4"),
                              series.target_index, series.step,
                              dict(series.categorical))


def resample_aggregate(series: MultivariateSeries, new_step: np.timedelta64,
                       agg: str = "mean") -> MultivariateSeries:
    """Aggregate consecutive rows into buckets of ``new_step``.

    ``new_step`` must be an integer multiple of the series step. A trailing
    partial bucket is dropped, not padded, to avoid biased totals.
    """
    if agg not in ("sum", "mean"):
        raise ValueError(f"agg must be 'sum' or 'mean', got {agg!r}")
    new_ns = np.timedelta64(new_step).astype("timedelta64[ns]").astype(np.int64)
    old_ns = np.timedelta64(series.step).astype("timedelta64[ns]").astype(np.int64)
    if new_ns <= 0 or new_ns % old_ns != 0:
        raise ValueError(
            f"new step {new_step} is not a positive integer multiple of {series.step}")
    k = int(new_ns // old_ns)
    if k == 1:
        return series
    n_buckets = series.n_steps // k
    if n_buckets == 0:
        raise ValueError("series shorter than one aggregation bucket")
    trimmed = series.values[:n_buckets * k].reshape(n_buckets, k, series.n_features)
    if agg == "sum":
        values = trimmed.sum(axis=1)
    else:
        values = trimmed.mean(axis=1)
    timestamps = series.timestamps[:n_buckets * k:k]
    if series.categorical:
        raise SchemaError("resampling with unencoded categorical columns is not defined")
    return MultivariateSeries(timestamps, values, series.feature_names,
                              series.target_index,
                              np.timedelta64(new_ns, "ns"))


def make_windows(series: MultivariateSeries, w: int, h: int,
                 stride: int = 1) -> WindowedDataset:
    """Frame the series into overlapping (input window, horizon) samples.

    With stride 1 the sample count is n_steps - w - h + 1; each input row is
    the flattened contiguous slice [i, i+w) over all features and the target
    row holds the target feature at [i+w, i+w+h).
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if w < 1 or h < 1:
        raise ValueError("window and horizon must be >= 1")
    n = series.n_steps
    if w + h > n:
        raise ValueError(
            f"series of {n} steps too short for window {w} + horizon {h}")
    starts = np.arange(0, n - w - h + 1, stride)
    windows = np.stack([series.values[s:s + w] for s in starts])
    target = series.target()
    targets = np.stack([target[s + w:s + w + h] for s in starts])
    times = np.stack([series.timestamps[s + w:s + w + h] for s in starts])
    return WindowedDataset(windows.reshape(len(starts), w * series.n_features),
                           targets, w, h, stride, series.n_features,
                           series.target_index, times)


def split_index(series: MultivariateSeries, spec: SplitSpec) -> int:
    """Row index of the first test observation."""
    n = series.n_steps
    if isinstance(spec.boundary, (int, float)) and not isinstance(spec.boundary, bool):
        frac = float(spec.boundary)
        if not 0.0 < frac < 1.0:
            raise ValueError(f"boundary fraction {frac} outside (0, 1)")
        idx = int(round(frac * n))
    else:
        boundary = np.datetime64(spec.boundary)
        # A boundary between ticks assigns the next tick to the test side.
        idx = int(np.searchsorted(series.timestamps, boundary, side="left"))
    if idx <= 0 or idx >= n:
        raise ValueError("split boundary leaves an empty train or test side")
    return idx


def split(series: MultivariateSeries,
          spec: SplitSpec) -> tuple[MultivariateSeries, MultivariateSeries]:
    """Order-preserving disjoint train/test split covering the whole series."""
    idx = split_index(series, spec)
    return series.slice(0, idx), series.slice(idx, series.n_steps)


def synthetic_timestamps(n: int, step: np.timedelta64 | None = None,
                         start: str = "2020-01-01") -> np.ndarray:
    """Uniform timestamp vector for generated data."""
    if step is None:
        step = np.timedelta64(1, "h")
    origin = np.datetime64(start).astype("datetime64[ns]")
    stride = np.timedelta64(step).astype("timedelta64[ns]")
    return origin + np.arange(n) * stride
