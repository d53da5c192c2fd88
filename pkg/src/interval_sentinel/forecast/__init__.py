"""Uniform forecaster contract over six model kinds, plus versioned model
serialization."""

from __future__ import annotations

import json

import numpy as np

from ..errors import SchemaError
from ..series import WindowedDataset
from .base import FittedModel, ForecastResult, ForecasterConfig, KINDS
from .ccn import CcnModel
from .esn import EsnModel
from .linear import LinearModel, PersistenceModel
from .rnn import RnnModel, gradient_check

__all__ = [
    "KINDS", "ForecasterConfig", "ForecastResult", "FittedModel",
    "fit", "predict", "predict_stochastic", "gradient_check",
    "save_model", "load_model",
    "PersistenceModel", "LinearModel", "EsnModel", "CcnModel", "RnnModel",
]

MODEL_FORMAT = "interval-sentinel-model"
MODEL_VERSION = 1


def fit(train: WindowedDataset, config: ForecasterConfig) -> FittedModel:
    """Fit the configured forecaster; every kind retains its training fitted
    values and residuals."""
    if train.n_samples == 0:
        raise ValueError("training dataset is empty")
    if train.w != config.w or train.h != config.h:
        raise ValueError(
            f"dataset framing (w={train.w}, h={train.h}) does not match "
            f"config (w={config.w}, h={config.h})")
    if config.kind == "persistence":
        model = PersistenceModel(config, train.n_features, train.target_column)
        return model._finalize(train)
    if config.kind in ("mlr", "arx"):
        return LinearModel(config, train.n_features).fit(train)
    if config.kind == "esn":
        return EsnModel(config, train.n_features).fit(train)
    if config.kind == "ccn":
        return CcnModel(config, train.n_features).fit(train)
    if config.kind == "rnn":
        return RnnModel(config, train.n_features).fit(train)
    raise ValueError(f"unknown forecaster kind {config.kind!r}")


def _result_times(inputs) -> np.ndarray | None:
    return inputs.target_times if isinstance(inputs, WindowedDataset) else None


def predict(model: FittedModel, inputs) -> ForecastResult:
    """Deterministic point forecasts for the given windows."""
    return ForecastResult(model.predict(inputs), _result_times(inputs))


def predict_stochastic(model: FittedModel, inputs, dropout_rate: float,
                       seed: int) -> ForecastResult:
    """A single dropout-masked forward pass (recurrent models only)."""
    if not isinstance(model, RnnModel):
        raise TypeError(
            f"{model.kind} does not support stochastic prediction; only rnn does")
    values = model.predict_stochastic(inputs, dropout_rate, seed)
    return ForecastResult(values, _result_times(inputs))


def save_model(model: FittedModel, path) -> None:
    payload = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": model.kind,
        "config": model.config.to_dict(),
        "n_features": model.n_features,
        "params": model.params(),
        "fitted": model.fitted.tolist() if model.fitted is not None else None,
        "residuals": model.residuals.tolist() if model.residuals is not None else None,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_model(path) -> FittedModel:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != MODEL_FORMAT:
        raise SchemaError(f"{path} is not a saved model")
    if payload.get("version") != MODEL_VERSION:
        raise SchemaError(
            f"model version {payload.get('version')} not supported "
            f"(expected {MODEL_VERSION})")
    config = ForecasterConfig(**payload["config"])
    n_features = payload["n_features"]
    params = payload["params"]
    kind = payload["kind"]
    if kind == "persistence":
        model = PersistenceModel(config, n_features, params["target_column"])
    elif kind in ("mlr", "arx"):
        model = LinearModel(config, n_features)
        model.coef = np.asarray(params["coef"])
    elif kind == "esn":
        model = EsnModel.__new__(EsnModel)
        FittedModel.__init__(model, config, n_features)
        model.w_reservoir = np.asarray(params["w_reservoir"])
        model.w_in = np.asarray(params["w_in"])
        model.readout = np.asarray(params["readout"])
        model._train_states = None
    elif kind == "ccn":
        model = CcnModel(config, n_features)
        model.hidden_weights = [np.asarray(v) for v in params["hidden_weights"]]
        model.output_weights = np.asarray(params["output_weights"])
    elif kind == "rnn":
        model = RnnModel(config, n_features)
        model.params_ = {k: np.asarray(v) for k, v in params.items()}
    else:
        raise SchemaError(f"unknown model kind {kind!r}")
    if payload["fitted"] is not None:
        model.fitted = np.asarray(payload["fitted"])
        model.residuals = np.asarray(payload["residuals"])
    return model
