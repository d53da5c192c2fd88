"""Constructive cascade-correlation network.

Starts as a direct linear input->output layer. While the training error
stays above tolerance, a pool of tanh candidate units is trained by gradient
ascent to maximize the covariance magnitude between the unit's output and
the current residual error; the best candidate is frozen into the cascade
(it sees the raw inputs plus every earlier hidden unit) and the output
weights are retrained by least squares.
"""

from __future__ import annotations

import numpy as np

from ..series import WindowedDataset
from .base import FittedModel, ForecasterConfig, as_input_matrix, uniform_init
from .linear import solve_ols

CANDIDATE_MAX_ITERS = 300
CANDIDATE_STEP = 0.2


def _with_bias(features: np.ndarray) -> np.ndarray:
    return np.column_stack([features, np.ones(len(features))])


def covariance_score(unit_output: np.ndarray, residuals: np.ndarray) -> float:
    """Sum over outputs of |cov(unit, residual)| — the cascade criterion."""
    centered_unit = unit_output - unit_output.mean()
    centered_res = residuals - residuals.mean(axis=0)
    return float(np.sum(np.abs(centered_unit @ centered_res)) / len(unit_output))


def _train_candidate(rng: np.random.Generator, features: np.ndarray,
                     residuals: np.ndarray, patience: int) -> tuple[np.ndarray, float]:
    """Gradient-ascent a single candidate; returns (weights, score)."""
    design = _with_bias(features)
    n, d = design.shape
    v = uniform_init(rng, (d,), fan_in=d)
    centered_res = residuals - residuals.mean(axis=0)
    best_v, best_s = v.copy(), -np.inf
    stale = 0
    for _ in range(CANDIDATE_MAX_ITERS):
        z = np.tanh(design @ v)
        cov = (z - z.mean()) @ centered_res / n
        score = float(np.sum(np.abs(cov)))
        if score > best_s + 1e-12:
            best_s, best_v = score, v.copy()
            stale = 0
        else:
            stale += 1
            if stale >= patience:
                break
        # d|cov|/dv; the mean-of-z term drops because residuals are centered.
        weight = (1.0 - z * z) * (centered_res @ np.sign(cov))
        grad = design.T @ weight / n
        norm = np.linalg.norm(grad)
        if norm < 1e-15:
            break
        v = v + CANDIDATE_STEP * grad / norm
    return best_v, best_s


class CcnModel(FittedModel):
    kind = "ccn"

    def __init__(self, config: ForecasterConfig, n_features: int):
        super().__init__(config, n_features)
        self.hidden_weights: list[np.ndarray] = []
        self.output_weights: np.ndarray | None = None
        self.error_trace: list[float] = []

    def _hidden_outputs(self, mat: np.ndarray) -> np.ndarray:
        """Evaluate the frozen cascade; column j feeds from inputs and all
        earlier hidden columns."""
        features = mat
        for v in self.hidden_weights:
            z = np.tanh(_with_bias(features) @ v)
            features = np.column_stack([features, z])
        return features

    def _solve_output(self, features: np.ndarray, targets: np.ndarray) -> None:
        design = _with_bias(features)
        self.output_weights = solve_ols(design, targets)

    def fit(self, train: WindowedDataset) -> "CcnModel":
        mat = as_input_matrix(train, self.config.w, self.n_features)
        targets = train.targets
        rng = np.random.default_rng(self.config.seed)

        self._solve_output(mat, targets)
        predictions = _with_bias(mat) @ self.output_weights
        residuals = targets - predictions
        sse = float(np.sum(residuals ** 2))
        rmse = np.sqrt(sse / residuals.size)
        self.error_trace = [rmse]

        features = mat
        while rmse > self.config.tol and len(self.hidden_weights) < self.config.max_hidden_units:
            best_v, best_s = None, -np.inf
            for _ in range(self.config.candidate_pool):
                v, s = _train_candidate(rng, features, residuals, self.config.patience)
                if s > best_s:
                    best_v, best_s = v, s
            z = np.tanh(_with_bias(features) @ best_v)
            new_features = np.column_stack([features, z])
            new_output = solve_ols(_with_bias(new_features), targets)
            new_pred = _with_bias(new_features) @ new_output
            new_sse = float(np.sum((targets - new_pred) ** 2))
            if new_sse > sse:
                break  # numerically useless unit; stop cascading
            self.hidden_weights.append(best_v)
            self.output_weights = new_output
            features = new_features
            predictions = new_pred
            residuals = targets - predictions
            sse = new_sse
            rmse = np.sqrt(sse / residuals.size)
            self.error_trace.append(rmse)

        self.fitted = predictions
        self.residuals = targets - predictions
        return self

    def refit(self, train: WindowedDataset) -> "CcnModel":
        return CcnModel(self.config, self.n_features).fit(train)

    def predict(self, inputs) -> np.ndarray:
        mat = as_input_matrix(inputs, self.config.w, self.n_features)
        features = self._hidden_outputs(mat)
        return _with_bias(features) @ self.output_weights

    @property
    def n_hidden(self) -> int:
        return len(self.hidden_weights)

    def params(self) -> dict:
        return {
            "hidden_weights": [v.tolist() for v in self.hidden_weights],
            "output_weights": self.output_weights.tolist(),
        }
