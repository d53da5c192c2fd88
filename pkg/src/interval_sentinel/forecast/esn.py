"""Echo state network: fixed random sparse reservoir, ridge-regression
readout.

Each window is processed from a zero reservoir state, one timestep of
features per tick; with spectral radius < 1 the state after the window's
warm-up is effectively independent of the initial state, so the window
itself serves as the washout. The readout maps the final reservoir state
plus the final input row (and an intercept) to the horizon vector.
"""

from __future__ import annotations

import numpy as np

from ..errors import FitError
from ..series import WindowedDataset
from .base import FittedModel, ForecasterConfig, as_input_matrix


def build_reservoir(config: ForecasterConfig,
                    n_features: int) -> tuple[np.ndarray, np.ndarray]:
    """Sparse recurrent matrix rescaled to the configured spectral radius,
    plus the dense input weights."""
    rng = np.random.default_rng(config.seed)
    size = config.reservoir_size
    weights = rng.uniform(-1.0, 1.0, size=(size, size))
    mask = rng.random((size, size)) < config.density
    weights *= mask
    radius = float(np.max(np.abs(np.linalg.eigvals(weights))))
    if radius == 0.0:
        raise FitError("reservoir has zero spectral radius; increase density")
    weights *= config.spectral_radius / radius
    w_in = rng.uniform(-1.0, 1.0, size=(size, n_features))
    return weights, w_in


class EsnModel(FittedModel):
    kind = "esn"

    def __init__(self, config: ForecasterConfig, n_features: int):
        super().__init__(config, n_features)
        if config.washout_steps > config.w:
            raise ValueError(
                f"washout_steps {config.washout_steps} exceeds window {config.w}")
        self.w_reservoir, self.w_in = build_reservoir(config, n_features)
        self.readout: np.ndarray | None = None
        self._train_states: np.ndarray | None = None

    def _run_windows(self, mat: np.ndarray) -> np.ndarray:
        """Final reservoir state per window, evolved in parallel."""
        n = len(mat)
        windows = mat.reshape(n, self.config.w, self.n_features)
        state = np.zeros((n, self.config.reservoir_size))
        for t in range(self.config.w):
            state = np.tanh(state @ self.w_reservoir.T + windows[:, t, :] @ self.w_in.T)
        return state

    def _design(self, mat: np.ndarray) -> np.ndarray:
        states = self._run_windows(mat)
        last_input = mat.reshape(len(mat), self.config.w, self.n_features)[:, -1, :]
        return np.column_stack([states, last_input, np.ones(len(mat))])

    def _solve(self, design: np.ndarray, targets: np.ndarray) -> np.ndarray:
        gram = design.T @ design
        gram += self.config.ridge_lambda * np.eye(design.shape[1])
        return np.linalg.solve(gram, design.T @ targets)

    def fit(self, train: WindowedDataset) -> "EsnModel":
        mat = as_input_matrix(train, self.config.w, self.n_features)
        self._train_states = self._design(mat)
        self.readout = self._solve(self._train_states, train.targets)
        self.fitted = self._train_states @ self.readout
        self.residuals = train.targets - self.fitted
        return self

    def refit(self, train: WindowedDataset) -> "EsnModel":
        """Same reservoir (same seed), readout re-solved against new targets.
        Reuses the cached training states when the sample count matches."""
        model = EsnModel.__new__(EsnModel)
        FittedModel.__init__(model, self.config, self.n_features)
        model.w_reservoir = self.w_reservoir
        model.w_in = self.w_in
        if self._train_states is not None and len(self._train_states) == train.n_samples:
            states = self._train_states
        else:
            states = model._design(as_input_matrix(train, self.config.w, self.n_features))
        model._train_states = states
        model.readout = model._solve(states, train.targets)
        model.fitted = states @ model.readout
        model.residuals = train.targets - model.fitted
        return model

    def predict(self, inputs) -> np.ndarray:
        mat = as_input_matrix(inputs, self.config.w, self.n_features)
        return self._design(mat) @ self.readout

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.w_reservoir))))

    def zero_input_decay(self, n_steps: int, seed: int = 0) -> np.ndarray:
        """State norms under zero input from a random start, for echo-state
        diagnostics."""
        rng = np.random.default_rng(seed)
        state = rng.standard_normal(self.config.reservoir_size)
        state /= np.linalg.norm(state)
        norms = np.empty(n_steps + 1)
        norms[0] = 1.0
        for t in range(1, n_steps + 1):
            state = np.tanh(self.w_reservoir @ state)
            norms[t] = np.linalg.norm(state)
        return norms

    def params(self) -> dict:
        return {
            "w_reservoir": self.w_reservoir.tolist(),
            "w_in": self.w_in.tolist(),
            "readout": self.readout.tolist(),
        }
