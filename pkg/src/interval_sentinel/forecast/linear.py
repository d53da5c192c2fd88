"""Persistence, multiple linear regression, and ARX baselines.

The linear fits solve ordinary least squares by ``lstsq`` with a tiny ridge
fallback on rank-deficient designs; refitting against replacement targets
reuses the cached design matrix.
"""

from __future__ import annotations

import numpy as np

from ..series import WindowedDataset
from .base import FittedModel, ForecasterConfig, as_input_matrix

RIDGE_FALLBACK = 1e-8


def solve_ols(design: np.ndarray, targets: np.ndarray) -> np.ndarray:
    coef, _, rank, _ = np.linalg.lstsq(design, targets, rcond=None)
    if rank == design.shape[1]:
        return coef
    gram = design.T @ design + RIDGE_FALLBACK * np.eye(design.shape[1])
    return np.linalg.solve(gram, design.T @ targets)


class PersistenceModel(FittedModel):
    """Forecasts the last observed target value, repeated over the horizon."""

    kind = "persistence"

    def __init__(self, config: ForecasterConfig, n_features: int, target_column: int):
        super().__init__(config, n_features)
        self.target_column = target_column

    def predict(self, inputs) -> np.ndarray:
        mat = as_input_matrix(inputs, self.config.w, self.n_features)
        windows = mat.reshape(len(mat), self.config.w, self.n_features)
        last = windows[:, -1, self.target_column]
        return np.repeat(last[:, None], self.config.h, axis=1)

    def refit(self, train: WindowedDataset) -> "PersistenceModel":
        model = PersistenceModel(self.config, self.n_features, self.target_column)
        return model._finalize(train)

    def params(self) -> dict:
        return {"target_column": self.target_column}


class LinearModel(FittedModel):
    """OLS over window features plus intercept.

    ``mlr`` regresses on the whole flattened window; ``arx`` restricts the
    design to the most recent ``lag_order`` ticks of the window (lagged
    target and exogenous values alike).
    """

    def __init__(self, config: ForecasterConfig, n_features: int):
        super().__init__(config, n_features)
        self.kind = config.kind
        self.coef: np.ndarray | None = None
        self._design: np.ndarray | None = None

    def _feature_rows(self, mat: np.ndarray) -> np.ndarray:
        if self.config.kind == "arx":
            lags = min(self.config.lag_order, self.config.w)
            windows = mat.reshape(len(mat), self.config.w, self.n_features)
            mat = windows[:, self.config.w - lags:, :].reshape(len(mat), -1)
        return np.column_stack([mat, np.ones(len(mat))])

    def fit(self, train: WindowedDataset) -> "LinearModel":
        mat = as_input_matrix(train, self.config.w, self.n_features)
        self._design = self._feature_rows(mat)
        self.coef = solve_ols(self._design, train.targets)
        return self._finalize(train)

    def refit(self, train: WindowedDataset) -> "LinearModel":
        model = LinearModel(self.config, self.n_features)
        if self._design is not None and len(self._design) == train.n_samples:
            model._design = self._design
            model.coef = solve_ols(self._design, train.targets)
            model.fitted = model._design @ model.coef
            model.residuals = train.targets - model.fitted
            return model
        return model.fit(train)

    def predict(self, inputs) -> np.ndarray:
        mat = as_input_matrix(inputs, self.config.w, self.n_features)
        return self._feature_rows(mat) @ self.coef

    def params(self) -> dict:
        return {"coef": self.coef.tolist()}
