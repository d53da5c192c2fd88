"""Dynamic-threshold anomaly detection over prediction intervals, synthetic
anomaly injection, and detection scoring.

A point inside its interval is normal. An out-of-bounds point becomes
anomalous only when (a) its interval score is at least ``is_ratio`` times
the score of the previous out-of-bounds point, and (b) it deviates from the
running mean by more than ``sigma_multiplier`` standard deviations (the
Chebyshev-style dynamic threshold). Anything else out of bounds is a plain
breach. The running statistics cover all past observations by default
(Welford updates) or a fixed trailing window when configured.
"""

from __future__ import annotations

import json
import csv
import math
from dataclasses import dataclass

import numpy as np

from .intervals import PredictionInterval, interval_score


@dataclass(frozen=True)
class DetectorConfig:
    is_ratio: float = 1.33
    sigma_multiplier: float = 10.0
    warmup: int = 30
    baseline_update: str = "breach"  # or "anomalous"
    rolling_window: int | None = None

    def __post_init__(self):
        if self.is_ratio <= 0:
            raise ValueError("is_ratio must be positive")
        if self.sigma_multiplier < 0:
            raise ValueError("sigma_multiplier must be >= 0")
        if self.baseline_update not in ("breach", "anomalous"):
            raise ValueError("baseline_update must be 'breach' or 'anomalous'")
        if self.rolling_window is not None and self.rolling_window < 2:
            raise ValueError("rolling_window must be >= 2")


@dataclass(frozen=True)
class DetectorState:
    """Online statistics over everything seen so far, plus the interval
    score of the last out-of-bounds observation."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0
    last_breach_is: float | None = None
    window: tuple[float, ...] = ()

    @property
    def std(self) -> float:
        if self.count == 0:
            return 0.0
        return math.sqrt(self.m2 / self.count)


@dataclass(frozen=True)
class DetectionRecord:
    index: int
    verdict: str  # normal | breach | anomalous
    is_value: float | None
    deviation_sigmas: float


@dataclass(frozen=True)
class InjectionSpec:
    """How to superimpose synthetic anomalies on a series."""

    kind: str  # changepoint | collective | contextual
    contamination: float
    magnitude_sigmas: float = 15.0
    run_length: int = 5
    seed: int = 0
    season_steps: int | None = None

    def __post_init__(self):
        if self.kind not in ("changepoint", "collective", "contextual"):
            raise ValueError(f"unknown anomaly kind {self.kind!r}")
        if not 0.0 < self.contamination <= 0.1:
            raise ValueError("contamination must be in (0, 0.1]")
        if self.kind == "collective" and self.run_length < 2:
            raise ValueError("collective runs need run_length >= 2")
        if self.kind == "changepoint" and self.season_steps is None:
            raise ValueError("changepoint injection needs season_steps for its window")


@dataclass(frozen=True)
class AnomalyWindow:
    """Inclusive index span [b, e] within which detecting the anomaly counts."""

    b: int
    e: int
    kind: str = ""

    def __post_init__(self):
        if self.b >= self.e:
            raise ValueError(f"window must satisfy b < e, got [{self.b}, {self.e}]")

    def contains(self, index: int) -> bool:
        return self.b <= index <= self.e


def _update_stats(state: DetectorState, y: float,
                  config: DetectorConfig) -> DetectorState:
    if config.rolling_window is None:
        count = state.count + 1
        delta = y - state.mean
        mean = state.mean + delta / count
        m2 = state.m2 + delta * (y - mean)
        return DetectorState(count, mean, m2, state.last_breach_is)
    window = (state.window + (y,))[-config.rolling_window:]
    mean = sum(window) / len(window)
    m2 = sum((v - mean) ** 2 for v in window)
    return DetectorState(len(window), mean, m2, state.last_breach_is, window)


def detect_step(state: DetectorState, y: float, lower: float, upper: float,
                alpha: float, config: DetectorConfig = DetectorConfig(),
                index: int = 0) -> tuple[DetectionRecord, DetectorState]:
    """Classify one observation and fold it into the detector state.

    The running statistics exclude the current observation when the verdict
    is formed and absorb it afterwards; the Chebyshev test cannot pass until
    ``warmup`` observations have been seen.
    """
    if lower > upper:
        raise ValueError("lower bound above upper bound")
    std = state.std
    gap = abs(y - state.mean)
    if std > 0.0:
        deviation = gap / std
    else:
        deviation = math.inf if (state.count > 0 and gap > 0.0) else 0.0

    if lower <= y <= upper:
        record = DetectionRecord(index, "normal", None, deviation)
        new_state = _update_stats(state, y, config)
        return record, new_state

    is_value = interval_score(lower, upper, y, alpha)
    ratio_ok = (state.last_breach_is is None
                or is_value >= config.is_ratio * state.last_breach_is)
    chebyshev_ok = state.count >= config.warmup and gap > config.sigma_multiplier * std
    verdict = "anomalous" if (ratio_ok and chebyshev_ok) else "breach"
    record = DetectionRecord(index, verdict, is_value, deviation)

    new_state = _update_stats(state, y, config)
    if config.baseline_update == "breach" or verdict == "anomalous":
        new_state = DetectorState(new_state.count, new_state.mean, new_state.m2,
                                  is_value, new_state.window)
    return record, new_state


def detect_series(actuals: np.ndarray, interval: PredictionInterval,
                  config: DetectorConfig = DetectorConfig()) -> list[DetectionRecord]:
    """Sequential fold of detect_step from a fresh state."""
    y = np.asarray(actuals, dtype=np.float64).ravel()
    lower = interval.lower.ravel()
    upper = interval.upper.ravel()
    if len(y) != len(lower):
        raise ValueError(f"{len(y)} actuals but {len(lower)} interval steps")
    state = DetectorState()
    records = []
    for i in range(len(y)):
        record, state = detect_step(state, float(y[i]), float(lower[i]),
                                    float(upper[i]), interval.alpha, config, i)
        records.append(record)
    return records


def _collective_run_lengths(affected: int, run_length: int) -> list[int]:
    lengths = [run_length] * (affected // run_length)
    remainder = affected % run_length
    if remainder:
        if lengths:
            lengths[-1] += remainder
        else:
            lengths = [remainder]
    return lengths


def inject_anomalies(series, spec: InjectionSpec):
    """Superimpose anomalies on the target feature; returns the modified
    series and the golden windows.

    The offset is ``magnitude_sigmas`` times the target's standard deviation.
    A changepoint shifts the trailing ``round(contamination * n)`` points; a
    collective anomaly shifts runs of ``run_length`` consecutive points;
    contextual anomalies shift isolated points. Unaffected points stay
    bit-identical and everything is deterministic in the seed.
    """
    n = series.n_steps
    affected = int(round(spec.contamination * n))
    if affected < 1:
        raise ValueError(
            f"contamination {spec.contamination} selects no points in {n} steps")
    rng = np.random.default_rng(spec.seed)
    target = series.target()
    sigma = float(np.std(target))
    offset = spec.magnitude_sigmas * sigma
    values = series.values.copy()
    col = series.target_index
    windows: list[AnomalyWindow] = []

    if spec.kind == "changepoint":
        onset = n - affected
        values[onset:, col] += offset
        end = min(onset + spec.season_steps, n - 1)
        windows.append(AnomalyWindow(onset, end, "changepoint"))
    elif spec.kind == "collective":
        occupied = np.zeros(n, dtype=bool)
        for length in _collective_run_lengths(affected, spec.run_length):
            placed = False
            for _ in range(1000):
                onset = int(rng.integers(0, n - length))
                span = slice(max(onset - 1, 0), min(onset + length + 1, n))
                if not occupied[span].any():
                    occupied[onset:onset + length] = True
                    values[onset:onset + length, col] += offset
                    windows.append(AnomalyWindow(onset, min(onset + length, n - 1),
                                                 "collective"))
                    placed = True
                    break
            if not placed:
                raise ValueError("could not place collective runs without overlap")
        windows.sort(key=lambda w: w.b)
    else:  # contextual
        if affected > n - 1:
            raise ValueError("contamination too high for contextual injection")
        points = np.sort(rng.choice(n - 1, size=affected, replace=False))
        values[points, col] += offset
        windows = [AnomalyWindow(int(p), int(p) + 1, "contextual") for p in points]

    return series.with_values(values), windows


def score_detection(records: list[DetectionRecord],
                    golden: list[AnomalyWindow]) -> tuple[float, float, float]:
    """Precision/recall/F1 where a window counts as found if any anomalous
    record lands inside it and stray anomalous records are false positives."""
    anomalous = [r.index for r in records if r.verdict == "anomalous"]
    tp = sum(1 for w in golden if any(w.contains(i) for i in anomalous))
    fn = len(golden) - tp
    fp = sum(1 for i in anomalous if not any(w.contains(i) for w in golden))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = (2 * precision * recall / (precision + recall)
          if precision + recall else 0.0)
    return precision, recall, f1


def ed_score(records: list[DetectionRecord],
             golden: list[AnomalyWindow]) -> float:
    """Earliness of detection: 1 at window onset, 0 at window end or when
    the anomaly is missed; averaged over golden anomalies."""
    if not golden:
        return 0.0
    anomalous = sorted(r.index for r in records if r.verdict == "anomalous")
    total = 0.0
    for w in golden:
        first = next((i for i in anomalous if w.contains(i)), None)
        if first is not None:
            total += (w.e - first) / (w.e - w.b)
    return total / len(golden)


def export_detections_ndjson(path, records: list[DetectionRecord],
                             index_offset: int = 0) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            deviation = r.deviation_sigmas if math.isfinite(r.deviation_sigmas) else None
            fh.write(json.dumps({
                "index": r.index + index_offset,
                "verdict": r.verdict,
                "is": r.is_value,
                "deviation_sigmas": deviation,
            }, sort_keys=True))
            fh.write("\n")


def export_golden_csv(path, windows: list[AnomalyWindow],
                      index_offset: int = 0) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["anomaly_id", "b", "e", "kind"])
        for i, w in enumerate(windows):
            writer.writerow([i, w.b + index_offset, w.e + index_offset, w.kind])


def load_golden_csv(path) -> list[AnomalyWindow]:
    windows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            windows.append(AnomalyWindow(int(row["b"]), int(row["e"]),
                                         row.get("kind", "")))
    return windows
