"""Shared forecaster contract: configuration, fitted-model base class, and
the point-forecast result container."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from ..series import WindowedDataset

KINDS = ("persistence", "mlr", "arx", "esn", "ccn", "rnn")


@dataclass(frozen=True)
class ForecasterConfig:
    """Hyperparameters for one forecaster. Only the fields for ``kind``
    matter; the rest keep their defaults."""

    kind: str
    w: int
    h: int = 1
    seed: int = 0
    # esn
    reservoir_size: int = 200
    spectral_radius: float = 0.95
    density: float = 0.1
    ridge_lambda: float = 1e-6
    washout_steps: int = 0
    # ccn
    max_hidden_units: int = 24
    candidate_pool: int = 8
    patience: int = 25
    tol: float = 1e-6
    # rnn
    hidden_units: int = 50
    epochs: int = 25
    batch_size: int = 32
    learning_rate: float = 0.01
    dropout_rate: float = 0.0
    # arx
    lag_order: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown forecaster kind {self.kind!r}")
        if self.w < 1 or self.h < 1:
            raise ValueError("window and horizon must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if not 0.0 < self.spectral_radius < 1.0:
            raise ValueError("spectral_radius must be in (0, 1)")
        if self.washout_steps < 0:
            raise ValueError("washout_steps must be >= 0")
        if self.max_hidden_units < 0:
            raise ValueError("max_hidden_units must be >= 0")
        if self.lag_order < 1:
            raise ValueError("lag_order must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ForecastResult:
    """Point forecasts aligned to their target timestamps."""

    values: np.ndarray
    times: np.ndarray | None = None

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("forecast contains non-finite values")


def as_input_matrix(inputs, w: int, n_features: int) -> np.ndarray:
    """Accept a WindowedDataset or raw (n, w*F) array; validate the width."""
    if isinstance(inputs, WindowedDataset):
        mat = inputs.inputs
    else:
        mat = np.asarray(inputs, dtype=np.float64)
        if mat.ndim == 1:
            mat = mat[None, :]
    if mat.ndim != 2 or mat.shape[1] != w * n_features:
        raise ValueError(
            f"input width {mat.shape[-1]} does not match "
            f"w={w} x n_features={n_features}")
    return mat


def uniform_init(rng: np.random.Generator, shape: tuple[int, ...],
                 fan_in: int) -> np.ndarray:
    s = 1.0 / np.sqrt(max(fan_in, 1))
    return rng.uniform(-s, s, size=shape)


class FittedModel:
    """Immutable-by-convention fitted forecaster.

    Every subclass retains its training fitted values and residuals (target
    minus fitted) so residual-bootstrap callers can resample them, and can
    rebuild itself against replacement training targets via ``refit``.
    """

    kind: str = "?"

    def __init__(self, config: ForecasterConfig, n_features: int):
        self.config = config
        self.n_features = n_features
        self.fitted: np.ndarray | None = None
        self.residuals: np.ndarray | None = None

    def _finalize(self, train: WindowedDataset) -> "FittedModel":
        self.fitted = self.predict(train.inputs)
        self.residuals = train.targets - self.fitted
        return self

    def predict(self, inputs) -> np.ndarray:
        raise NotImplementedError

    def refit(self, train: WindowedDataset) -> "FittedModel":
        """Fit a fresh model of the same configuration. Subclasses with a
        fixed design (linear readouts) override this with a cached solve."""
        raise NotImplementedError

    def params(self) -> dict:
        """JSON-serializable parameter arrays."""
        raise NotImplementedError
