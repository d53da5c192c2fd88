"""Single-layer gated recurrent network (LSTM cell semantics) with a dense
multi-step output head, trained by backpropagation through time on mean
absolute error with Adam.

Gradients are truncated at the window boundary: each sample's w timesteps
are unrolled in full and nothing propagates across samples. Dropout, when
enabled, masks the recurrent layer's final output (the vector feeding the
dense head); at stochastic-inference time a fresh Bernoulli mask rescaled
by 1/(1-rate) is drawn per window per draw.
"""

from __future__ import annotations

import numpy as np

from ..errors import DivergenceError
from ..series import WindowedDataset
from .base import FittedModel, ForecasterConfig, as_input_matrix, uniform_init

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

PARAM_NAMES = ("w_x", "w_h", "b", "w_y", "b_y")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def init_params(config: ForecasterConfig, n_features: int,
                rng: np.random.Generator) -> dict[str, np.ndarray]:
    hidden = config.hidden_units
    return {
        "w_x": uniform_init(rng, (4 * hidden, n_features), fan_in=n_features),
        "w_h": uniform_init(rng, (4 * hidden, hidden), fan_in=hidden),
        "b": np.zeros(4 * hidden),
        "w_y": uniform_init(rng, (config.h, hidden), fan_in=hidden),
        "b_y": np.zeros(config.h),
    }


def _forward(params: dict, windows: np.ndarray) -> tuple[np.ndarray, list]:
    """Run the cell over (batch, w, features); returns final hidden state and
    the per-step cache needed for backprop."""
    batch, w, _ = windows.shape
    hidden = params["w_h"].shape[1]
    h = np.zeros((batch, hidden))
    c = np.zeros((batch, hidden))
    caches = []
    for t in range(w):
        x_t = windows[:, t, :]
        z = x_t @ params["w_x"].T + h @ params["w_h"].T + params["b"]
        i = _sigmoid(z[:, :hidden])
        f = _sigmoid(z[:, hidden:2 * hidden])
        g = np.tanh(z[:, 2 * hidden:3 * hidden])
        o = _sigmoid(z[:, 3 * hidden:])
        c_new = f * c + i * g
        tanh_c = np.tanh(c_new)
        h_new = o * tanh_c
        caches.append((x_t, h, c, i, f, g, o, tanh_c))
        h, c = h_new, c_new
    return h, caches


def _output(params: dict, h_final: np.ndarray,
            mask: np.ndarray | None) -> tuple[np.ndarray, np.ndarray]:
    h_used = h_final if mask is None else h_final * mask
    return h_used @ params["w_y"].T + params["b_y"], h_used


def mae_loss(pred: np.ndarray, targets: np.ndarray) -> float:
    return float(np.mean(np.abs(pred - targets)))


def loss_and_grads(params: dict, windows: np.ndarray, targets: np.ndarray,
                   mask: np.ndarray | None = None) -> tuple[float, dict]:
    """MAE loss and its gradient for every parameter via full BPTT."""
    hidden = params["w_h"].shape[1]
    h_final, caches = _forward(params, windows)
    pred, h_used = _output(params, h_final, mask)
    loss = mae_loss(pred, targets)

    d_pred = np.sign(pred - targets) / pred.size
    grads = {name: np.zeros_like(params[name]) for name in PARAM_NAMES}
    grads["w_y"] = d_pred.T @ h_used
    grads["b_y"] = d_pred.sum(axis=0)
    dh = d_pred @ params["w_y"]
    if mask is not None:
        dh = dh * mask
    dc = np.zeros((len(windows), hidden))
    for cache in reversed(caches):
        x_t, h_prev, c_prev, i, f, g, o, tanh_c = cache
        do = dh * tanh_c
        dc = dc + dh * o * (1.0 - tanh_c ** 2)
        di = dc * g
        dg = dc * i
        df = dc * c_prev
        dz = np.concatenate([di * i * (1.0 - i),
                             df * f * (1.0 - f),
                             dg * (1.0 - g ** 2),
                             do * o * (1.0 - o)], axis=1)
        grads["w_x"] += dz.T @ x_t
        grads["w_h"] += dz.T @ h_prev
        grads["b"] += dz.sum(axis=0)
        dh = dz @ params["w_h"]
        dc = dc * f
    return loss, grads


class Adam:
    def __init__(self, params: dict):
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict, lr: float) -> None:
        self.t += 1
        for k in params:
            self.m[k] = ADAM_BETA1 * self.m[k] + (1 - ADAM_BETA1) * grads[k]
            self.v[k] = ADAM_BETA2 * self.v[k] + (1 - ADAM_BETA2) * grads[k] ** 2
            m_hat = self.m[k] / (1 - ADAM_BETA1 ** self.t)
            v_hat = self.v[k] / (1 - ADAM_BETA2 ** self.t)
            params[k] -= lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


class RnnModel(FittedModel):
    kind = "rnn"

    def __init__(self, config: ForecasterConfig, n_features: int):
        super().__init__(config, n_features)
        rng = np.random.default_rng(config.seed)
        self.params_ = init_params(config, n_features, rng)
        self._train_rng = rng

    def fit(self, train: WindowedDataset) -> "RnnModel":
        cfg = self.config
        windows = as_input_matrix(train, cfg.w, self.n_features)
        windows = windows.reshape(train.n_samples, cfg.w, self.n_features)
        targets = train.targets
        rng = self._train_rng
        optimizer = Adam(self.params_)
        n = len(windows)
        batch = max(1, min(cfg.batch_size, n))
        for epoch in range(cfg.epochs):
            order = rng.permutation(n)
            for start in range(0, n, batch):
                idx = order[start:start + batch]
                mask = None
                if cfg.dropout_rate > 0.0:
                    keep = rng.random((len(idx), cfg.hidden_units)) >= cfg.dropout_rate
                    mask = keep / (1.0 - cfg.dropout_rate)
                loss, grads = loss_and_grads(self.params_, windows[idx],
                                             targets[idx], mask)
                if not np.isfinite(loss):
                    raise DivergenceError(epoch)
                optimizer.step(self.params_, grads, cfg.learning_rate)
        return self._finalize(train)

    def refit(self, train: WindowedDataset) -> "RnnModel":
        return RnnModel(self.config, self.n_features).fit(train)

    def predict(self, inputs) -> np.ndarray:
        mat = as_input_matrix(inputs, self.config.w, self.n_features)
        windows = mat.reshape(len(mat), self.config.w, self.n_features)
        h_final, _ = _forward(self.params_, windows)
        pred, _ = _output(self.params_, h_final, None)
        return pred

    def predict_stochastic(self, inputs, dropout_rate: float, seed: int) -> np.ndarray:
        """One stochastic forward pass; an independent mask per window."""
        if not 0.0 <= dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        mat = as_input_matrix(inputs, self.config.w, self.n_features)
        if dropout_rate == 0.0:
            return self.predict(mat)
        windows = mat.reshape(len(mat), self.config.w, self.n_features)
        rng = np.random.default_rng(seed)
        keep = rng.random((len(windows), self.config.hidden_units)) >= dropout_rate
        mask = keep / (1.0 - dropout_rate)
        h_final, _ = _forward(self.params_, windows)
        pred, _ = _output(self.params_, h_final, mask)
        return pred

    def params(self) -> dict:
        return {k: v.tolist() for k, v in self.params_.items()}


def gradient_check(config: ForecasterConfig, dataset: WindowedDataset,
                   corruption: float = 0.0,
                   model: RnnModel | None = None) -> float:
    """Compare analytic BPTT gradients against central finite differences.

    Returns the maximum relative error over every parameter coordinate.
    ``corruption`` scales the analytic gradient of the input weights so tests
    can confirm the check catches a broken backward pass.
    """
    if config.hidden_units > 8 or config.w > 5:
        raise ValueError("gradient check is meant for tiny nets (<=8 units, <=5 steps)")
    if model is None:
        model = RnnModel(config, dataset.n_features)
    windows = dataset.inputs.reshape(dataset.n_samples, config.w, dataset.n_features)
    targets = dataset.targets
    params = model.params_
    _, grads = loss_and_grads(params, windows, targets)
    if corruption:
        grads["w_x"] = grads["w_x"] * (1.0 + corruption)

    step = 1e-5
    max_rel = 0.0
    for name in PARAM_NAMES:
        flat = params[name].ravel()
        grad_flat = grads[name].ravel()
        for j in range(flat.size):
            original = flat[j]
            flat[j] = original + step
            up = mae_loss(_output(params, _forward(params, windows)[0], None)[0], targets)
            flat[j] = original - step
            down = mae_loss(_output(params, _forward(params, windows)[0], None)[0], targets)
            flat[j] = original
            fd = (up - down) / (2 * step)
            denom = max(abs(grad_flat[j]), abs(fd), 1e-4)
            max_rel = max(max_rel, abs(grad_flat[j] - fd) / denom)
    return max_rel
