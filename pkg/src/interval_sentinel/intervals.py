"""Prediction-interval construction (MC-dropout ensembles and residual
bootstrap) and interval quality metrics (IS, MIS, sMIS, CS).

Ensemble repetitions derive their seed as ``seed + rep_index`` so results
never depend on evaluation order, and empirical quantiles interpolate
linearly between order statistics.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .errors import BootstrapError
from .forecast import FittedModel, ForecasterConfig, fit
from .forecast.rnn import RnnModel
from .series import WindowedDataset


@dataclass(frozen=True)
class PredictionInterval:
    """Per-step band [lower, upper] at significance alpha."""

    lower: np.ndarray
    upper: np.ndarray
    alpha: float
    method: str = "bootstrap"

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0, 1)")
        if self.lower.shape != self.upper.shape:
            raise ValueError("lower/upper shape mismatch")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound above upper bound")

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower


@dataclass(frozen=True)
class EnsembleDraws:
    """Stacked forecasts: (n_reps, n_test, horizon)."""

    values: np.ndarray
    seeds: tuple[int, ...]

    def __post_init__(self):
        if self.values.ndim != 3:
            raise ValueError("draws must be (n_reps, n_test, horizon)")
        if self.values.shape[0] < 2:
            raise ValueError("need at least 2 ensemble repetitions")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("draws contain non-finite values")

    @property
    def n_reps(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class IntervalMetrics:
    mis: float
    cs: float
    per_step_is: np.ndarray
    alpha: float


def interval_score(lower: float, upper: float, actual: float, alpha: float) -> float:
    """Width plus (2/alpha)-weighted penalty when the observation escapes
    the band."""
    if lower > upper:
        raise ValueError("lower bound above upper bound")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    score = upper - lower
    if actual < lower:
        score += (2.0 / alpha) * (lower - actual)
    elif actual > upper:
        score += (2.0 / alpha) * (actual - upper)
    return score


def interval_scores(interval: PredictionInterval, actuals: np.ndarray) -> np.ndarray:
    """Vectorized per-step interval scores, flattened over steps."""
    lower = interval.lower.ravel()
    upper = interval.upper.ravel()
    y = np.asarray(actuals, dtype=np.float64).ravel()
    if len(y) != len(lower):
        raise ValueError(f"{len(y)} actuals but {len(lower)} interval steps")
    width = upper - lower
    penalty = np.where(y < lower, (2.0 / interval.alpha) * (lower - y),
                       np.where(y > upper, (2.0 / interval.alpha) * (y - upper), 0.0))
    return width + penalty


def mis(interval: PredictionInterval, actuals: np.ndarray) -> float:
    """Mean interval score over all out-of-sample steps."""
    return float(np.mean(interval_scores(interval, actuals)))


def cs(interval: PredictionInterval, actuals: np.ndarray) -> float:
    """Coverage: fraction of observations inside their band."""
    lower = interval.lower.ravel()
    upper = interval.upper.ravel()
    y = np.asarray(actuals, dtype=np.float64).ravel()
    if len(y) != len(lower):
        raise ValueError(f"{len(y)} actuals but {len(lower)} interval steps")
    return float(np.mean((lower <= y) & (y <= upper)))


def metrics(interval: PredictionInterval, actuals: np.ndarray) -> IntervalMetrics:
    scores = interval_scores(interval, actuals)
    return IntervalMetrics(float(scores.mean()), cs(interval, actuals),
                           scores, interval.alpha)


def smis(mis_by_algorithm: dict[str, float]) -> dict[str, float]:
    """Scale each algorithm's MIS by the best one; the minimum maps to
    exactly 1.0."""
    if not mis_by_algorithm:
        raise ValueError("need at least one algorithm")
    values = list(mis_by_algorithm.values())
    if any(v <= 0 for v in values):
        raise ValueError("MIS values must be positive to scale")
    best = min(values)
    return {name: value / best for name, value in mis_by_algorithm.items()}


def percentile_bounds(draws: EnsembleDraws, alpha: float,
                      method: str = "ensemble") -> PredictionInterval:
    """Empirical central (1-alpha) band from the draw distribution."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    lower = np.quantile(draws.values, alpha / 2.0, axis=0)
    upper = np.quantile(draws.values, 1.0 - alpha / 2.0, axis=0)
    return PredictionInterval(lower, upper, alpha, method)


def mc_dropout_interval(model: FittedModel, test_windows, alpha: float,
                        n_reps: int, seed: int,
                        dropout_rate: float | None = None) -> PredictionInterval:
    """Percentile band over repeated dropout-masked forward passes."""
    if n_reps < 2:
        raise ValueError("need at least 2 repetitions")
    if not isinstance(model, RnnModel):
        raise TypeError(f"{model.kind} does not support stochastic prediction")
    rate = model.config.dropout_rate if dropout_rate is None else dropout_rate
    draws = collect_dropout_draws(model, test_windows, n_reps, seed, rate)
    return percentile_bounds(draws, alpha, method="dropout")


def collect_dropout_draws(model: RnnModel, test_windows, n_reps: int,
                          seed: int, dropout_rate: float) -> EnsembleDraws:
    seeds = tuple(seed + r for r in range(n_reps))
    stack = np.stack([model.predict_stochastic(test_windows, dropout_rate, s)
                      for s in seeds])
    return EnsembleDraws(stack, seeds)


def bootstrap_interval(model_family: ForecasterConfig, train: WindowedDataset,
                       test_windows, alpha: float, n_reps: int,
                       seed: int) -> PredictionInterval:
    """Residual-bootstrap band.

    The model is fitted once, retaining fitted values and residuals. Each
    repetition builds synthetic targets (fitted plus a residual resampled
    uniformly with replacement), refits, point-forecasts the test windows,
    and adds a further resampled residual per forecast so the draws carry
    observation noise as well as parameter uncertainty. Failed refits are
    discarded; more than 10% failures aborts.
    """
    if n_reps < 2:
        raise ValueError("need at least 2 repetitions")
    base = fit(train, model_family)
    fitted = base.fitted
    residuals = base.residuals
    m = len(residuals)
    draw_list = []
    seeds = []
    discarded = 0
    for r in range(n_reps):
        rep_seed = seed + r
        rng = np.random.default_rng(rep_seed)
        pick = rng.integers(0, m, size=m)
        synthetic = fitted + residuals[pick]
        try:
            refit_model = base.refit(replace(train, targets=synthetic))
            point = refit_model.predict(test_windows)
        except Exception:
            discarded += 1
            continue
        noise = residuals[rng.integers(0, m, size=len(point))]
        draw_list.append(point + noise)
        seeds.append(rep_seed)
    if discarded > 0.1 * n_reps:
        raise BootstrapError(
            f"{discarded} of {n_reps} bootstrap repetitions failed to refit")
    draws = EnsembleDraws(np.stack(draw_list), tuple(seeds))
    return percentile_bounds(draws, alpha, method="bootstrap")


def export_interval_csv(path, interval: PredictionInterval, actuals: np.ndarray,
                        timestamps: np.ndarray | None = None) -> None:
    """One row per step: timestamp, lower, upper, actual, interval_score."""
    scores = interval_scores(interval, actuals)
    lower = interval.lower.ravel()
    upper = interval.upper.ravel()
    y = np.asarray(actuals, dtype=np.float64).ravel()
    if timestamps is None:
        stamps = [str(i) for i in range(len(y))]
    else:
        stamps = [np.datetime_as_string(t, unit="s") for t in np.asarray(timestamps).ravel()]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "lower", "upper", "actual", "interval_score"])
        for row in zip(stamps, lower, upper, y, scores):
            writer.writerow([row[0], repr(float(row[1])), repr(float(row[2])),
                             repr(float(row[3])), repr(float(row[4]))])
