"""Fully connected feed-forward network trained with Adam on MSE.

Takes the flattened window features (all 18 steps stacked into one vector)
and emits all 6 forecast-step outputs at once.
"""

from __future__ import annotations

import numpy as np

from .base import (
    Adam,
    InsufficientData,
    NonFiniteLoss,
    TrainConfig,
    check_matrix,
    glorot_uniform,
    minibatches,
)


def mlp_forward(weights, biases, X):
    """Forward pass; returns (output, per-layer activations for backprop)."""
    acts = [X]
    h = X
    last = len(weights) - 1
    for i, (W, b) in enumerate(zip(weights, biases)):
        z = h @ W + b
        h = z if i == last else np.maximum(z, 0.0)
        acts.append(h)
    return h, acts


def mlp_loss_and_grads(weights, biases, X, Y):
    """MSE loss (mean over batch and outputs) and analytic gradients."""
    out, acts = mlp_forward(weights, biases, X)
    resid = out - Y
    loss = float(np.mean(resid**2))
    delta = 2.0 * resid / resid.size

    grads_w = [None] * len(weights)
    grads_b = [None] * len(biases)
    for i in range(len(weights) - 1, -1, -1):
        grads_w[i] = acts[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ weights[i].T) * (acts[i] > 0.0)
    return loss, grads_w, grads_b


class MlpRegressor:
    """3 x 128 rectifier network (configurable) with a 6-wide linear output."""

    def __init__(self, hidden=(128, 128, 128), n_outputs=6, config: TrainConfig | None = None):
        self.hidden = tuple(hidden)
        self.n_outputs = n_outputs
        self.config = config or TrainConfig()

    def get_params(self) -> dict:
        return {"hidden": self.hidden, "n_outputs": self.n_outputs, "config": self.config}

    def set_params(self, **params) -> "MlpRegressor":
        for k, v in params.items():
            if not hasattr(self, k):
                raise ValueError(f"unknown parameter {k!r}")
            setattr(self, k, v)
        return self

    def _init_parameters(self, n_features: int) -> None:
        rng = np.random.default_rng(self.config.init_seed)
        sizes = [n_features, *self.hidden, self.n_outputs]
        self.weights_ = [
            glorot_uniform(rng, sizes[i], sizes[i + 1]) for i in range(len(sizes) - 1)
        ]
        self.biases_ = [np.zeros(sizes[i + 1]) for i in range(len(sizes) - 1)]
        self.n_features_ = n_features

    def fit(self, X, Y) -> "MlpRegressor":
        X = check_matrix(X)
        Y = check_matrix(Y, self.n_outputs, name="Y")
        if len(X) == 0:
            raise InsufficientData("no training windows")
        cfg = self.config
        self._init_parameters(X.shape[1])

        opt = Adam(
            [w.shape for w in self.weights_] + [b.shape for b in self.biases_],
            cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps,
        )
        shuffle_rng = (
            np.random.default_rng(cfg.shuffle_seed) if cfg.shuffle else None
        )
        self.loss_history_ = []
        for epoch in range(cfg.epochs):
            epoch_loss, n_batches = 0.0, 0
            for batch_no, idx in enumerate(minibatches(len(X), cfg.batch_size, shuffle_rng)):
                loss, gw, gb = mlp_loss_and_grads(
                    self.weights_, self.biases_, X[idx], Y[idx]
                )
                if not np.isfinite(loss):
                    raise NonFiniteLoss(epoch, batch_no, loss)
                opt.step(self.weights_ + self.biases_, gw + gb)
                epoch_loss += loss
                n_batches += 1
            self.loss_history_.append(epoch_loss / n_batches)
        return self

    def predict(self, X) -> np.ndarray:
        X = check_matrix(X, self.n_features_)
        out, _ = mlp_forward(self.weights_, self.biases_, X)
        return out

    # -- persistence ------------------------------------------------------

    def parameter_blocks(self) -> list[tuple[str, np.ndarray]]:
        blocks = []
        for i, (w, b) in enumerate(zip(self.weights_, self.biases_)):
            blocks.append((f"w{i}", w))
            blocks.append((f"b{i}", b))
        return blocks

    def shape_header(self) -> dict:
        return {
            "hidden": list(self.hidden),
            "n_outputs": self.n_outputs,
            "n_features": self.n_features_,
        }

    @classmethod
    def from_blocks(cls, header: dict, blocks: dict) -> "MlpRegressor":
        model = cls(hidden=tuple(header["hidden"]), n_outputs=header["n_outputs"])
        model.n_features_ = header["n_features"]
        n_layers = len(model.hidden) + 1
        model.weights_ = [blocks[f"w{i}"] for i in range(n_layers)]
        model.biases_ = [blocks[f"b{i}"] for i in range(n_layers)]
        return model
