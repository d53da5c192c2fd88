"""Missing-value imputation, label encoding, min-max scaling, additive
seasonal decomposition, and spectral magnitudes.

Fitted parameter objects (scaler, encoder, decomposition) are immutable and
fitted on training rows only; applying them elsewhere never re-estimates.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import EncodingError, ImputationError, SchemaError
from .series import MultivariateSeries

RIDGE_FALLBACK = 1e-8


@dataclass(frozen=True)
class ScalerParams:
    """Per-feature min/max from the training rows."""

    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        if np.any(self.maxs < self.mins):
            raise ValueError("scaler max below min")


@dataclass(frozen=True)
class EncoderMap:
    """Per-feature category -> integer code, lexicographic within feature."""

    codes: dict[str, dict[str, int]]


@dataclass(frozen=True)
class Decomposition:
    """Additive components of a single feature: trend + seasonal + residual
    reproduces the input exactly."""

    trend: np.ndarray
    seasonal: np.ndarray
    residual: np.ndarray
    period: int

    @property
    def seasonal_profile(self) -> np.ndarray:
        """One period of the seasonal component, phase 0 first."""
        return self.seasonal[:self.period]


@dataclass(frozen=True)
class SpectrumFrame:
    """Magnitudes of the one-sided DFT of a real signal."""

    magnitudes: np.ndarray
    bin_width: float


def _solve_least_squares(design: np.ndarray, target: np.ndarray) -> np.ndarray:
    """OLS with a small ridge fallback when the design is singular."""
    coef, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    if rank == design.shape[1]:
        return coef
    gram = design.T @ design + RIDGE_FALLBACK * np.eye(design.shape[1])
    return np.linalg.solve(gram, design.T @ target)


def impute_round_robin(series: MultivariateSeries, max_iters: int = 10,
                       past_only: bool = False) -> MultivariateSeries:
    """Fill missing cells by regressing each feature on all the others,
    cycling through features until estimates stabilise.

    A complete series is returned unchanged (bit-identical). With
    ``past_only`` the regression for a cell at time t uses only rows at or
    before t, so nothing leaks backwards from a later test span.
    """
    values = series.values
    missing = np.isnan(values)
    if not missing.any():
        return series
    n, d = values.shape
    for j, name in enumerate(series.feature_names):
        frac = missing[:, j].mean()
        if frac == 1.0:
            raise ImputationError(f"feature {name!r} has no observed values")
        if frac >= 0.5:
            raise ImputationError(
                f"feature {name!r} is {frac:.0%} missing; need < 50%")
    if not (~missing).all(axis=0).any():
        raise ImputationError("need at least one fully observed feature")

    filled = values.copy()
    col_means = np.nanmean(values, axis=0)
    for j in range(d):
        filled[missing[:, j], j] = col_means[j]

    incomplete = [j for j in range(d) if missing[:, j].any()]
    for _ in range(max_iters):
        largest_change = 0.0
        for j in incomplete:
            rows_obs = ~missing[:, j]
            others = np.delete(filled, j, axis=1)
            design_all = np.column_stack([others, np.ones(n)])
            miss_rows = np.flatnonzero(missing[:, j])
            if past_only:
                new_vals = np.empty(len(miss_rows))
                for k, t in enumerate(miss_rows):
                    fit_rows = rows_obs & (np.arange(n) <= t)
                    if fit_rows.sum() < 1:
                        new_vals[k] = col_means[j]
                        continue
                    coef = _solve_least_squares(design_all[fit_rows],
                                                values[fit_rows, j])
                    new_vals[k] = design_all[t] @ coef
            else:
                coef = _solve_least_squares(design_all[rows_obs],
                                            values[rows_obs, j])
                new_vals = design_all[miss_rows] @ coef
            change = np.max(np.abs(new_vals - filled[miss_rows, j]), initial=0.0)
            largest_change = max(largest_change, float(change))
            filled[miss_rows, j] = new_vals
        if largest_change < 1e-6:
            break
    return series.with_values(filled)


def fit_encoder(series: MultivariateSeries,
                categorical_features: list[str] | tuple[str, ...]) -> EncoderMap:
    """Assign integer codes 0..k-1 to each feature's categories in
    lexicographic order, so shuffled inputs encode identically."""
    codes: dict[str, dict[str, int]] = {}
    for name in categorical_features:
        if name not in series.categorical:
            raise SchemaError(f"no categorical column {name!r} in series")
        cats = sorted(set(series.categorical[name].tolist()))
        codes[name] = {cat: i for i, cat in enumerate(cats)}
    return EncoderMap(codes)


def apply_encoder(series: MultivariateSeries, encoder: EncoderMap) -> MultivariateSeries:
    """Move encoded categorical columns into the numeric matrix.

    Encoded columns are appended after the existing features in encoder
    order; a category unseen at fit time is an error."""
    values = series.values
    names = list(series.feature_names)
    remaining = dict(series.categorical)
    new_cols = []
    for name, mapping in encoder.codes.items():
        if name not in remaining:
            raise SchemaError(f"no categorical column {name!r} in series")
        raw = remaining.pop(name)
        col = np.empty(len(raw))
        for i, cat in enumerate(raw):
            try:
                col[i] = mapping[cat]
            except KeyError:
                raise EncodingError(
                    f"unseen category {cat!r} for feature {name!r}") from None
        new_cols.append(col)
        names.append(name)
    if new_cols:
        values = np.column_stack([values, *new_cols])
    return MultivariateSeries(series.timestamps, values, tuple(names),
                              series.target_index, series.step, remaining)


def fit_scaler(train: MultivariateSeries) -> ScalerParams:
    return ScalerParams(np.nanmin(train.values, axis=0),
                        np.nanmax(train.values, axis=0))


def scale(series: MultivariateSeries, params: ScalerParams) -> MultivariateSeries:
    """Map each feature to [0, 1] over the training range; a constant
    feature maps to 0.5 by convention."""
    span = params.maxs - params.mins
    constant = span == 0
    safe = np.where(constant, 1.0, span)
    scaled = (series.values - params.mins) / safe
    scaled[:, constant] = 0.5
    return series.with_values(scaled)


def unscale(series: MultivariateSeries, params: ScalerParams) -> MultivariateSeries:
    span = params.maxs - params.mins
    constant = span == 0
    restored = series.values * np.where(constant, 0.0, span) + params.mins
    return series.with_values(restored)


def scale_array(x: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Scalar-feature version of scale, for single columns."""
    if hi == lo:
        return np.full_like(np.asarray(x, dtype=float), 0.5)
    return (np.asarray(x, dtype=float) - lo) / (hi - lo)


def unscale_array(x: np.ndarray, lo: float, hi: float) -> np.ndarray:
    if hi == lo:
        return np.full_like(np.asarray(x, dtype=float), lo)
    return np.asarray(x, dtype=float) * (hi - lo) + lo


def _centered_moving_average(x: np.ndarray, period: int) -> np.ndarray:
    """Trend estimate; even periods use the symmetric half-weight window.
    Positions near the ends take the nearest interior estimate."""
    n = len(x)
    if period % 2 == 1:
        kernel = np.full(period, 1.0 / period)
        half = period // 2
    else:
        kernel = np.full(period + 1, 1.0 / period)
        kernel[0] = kernel[-1] = 0.5 / period
        half = period // 2
    interior = np.convolve(x, kernel, mode="valid")
    trend = np.empty(n)
    trend[half:n - half] = interior
    trend[:half] = interior[0]
    trend[n - half:] = interior[-1]
    return trend


def decompose(values: np.ndarray, period: int) -> Decomposition:
    """Classical additive decomposition of one feature.

    Trend is a centered moving average of the period; the seasonal component
    is the per-phase mean of the detrended series re-centered to sum to zero
    over one period; the residual is whatever remains, so recomposition is
    exact by construction.
    """
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("decompose expects a single feature")
    if period < 2:
        raise ValueError("period must be >= 2")
    n = len(x)
    if n < 2 * period:
        raise ValueError(f"need at least 2 periods ({2 * period} points), have {n}")
    trend = _centered_moving_average(x, period)
    detrended = x - trend
    phase = np.arange(n) % period
    profile = np.array([detrended[phase == p].mean() for p in range(period)])
    profile -= profile.mean()
    seasonal = profile[phase]
    residual = x - trend - seasonal
    return Decomposition(trend, seasonal, residual, period)


def recompose(parts: Decomposition) -> np.ndarray:
    return parts.trend + parts.seasonal + parts.residual


def extend_components(parts: Decomposition, start: int, length: int) -> np.ndarray:
    """Trend + seasonal evaluated past the fitted range.

    ``start`` is the absolute index of the first requested step (the fitted
    range occupies [0, n)). Trend extends flat at its nearest value; the
    seasonal profile repeats by phase.
    """
    idx = start + np.arange(length)
    trend = np.where(idx < len(parts.trend),
                     parts.trend[np.minimum(idx, len(parts.trend) - 1)],
                     parts.trend[-1])
    seasonal = parts.seasonal_profile[idx % parts.period]
    return trend + seasonal


def export_decomposition_csv(path, timestamps: np.ndarray, parts: Decomposition) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "trend", "seasonal", "residual"])
        for ts, t, s, r in zip(timestamps, parts.trend, parts.seasonal, parts.residual):
            writer.writerow([np.datetime_as_string(ts, unit="s"),
                             repr(float(t)), repr(float(s)), repr(float(r))])


def dft_magnitude(signal: np.ndarray, sample_step: float = 1.0) -> SpectrumFrame:
    """One-sided DFT magnitudes of a real signal (bins 0..floor(n/2))."""
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1 or len(x) < 2:
        raise ValueError("need a 1-D signal of at least 2 samples")
    if sample_step <= 0:
        raise ValueError("sample_step must be positive")
    mags = np.abs(np.fft.rfft(x))
    return SpectrumFrame(mags, 1.0 / (len(x) * sample_step))
