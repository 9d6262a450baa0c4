"""Autoregressive recurrent learner.

Per step, the weather vector is passed through a 3-layer perceptron whose
weights are shared across all 18 time steps; the encoding is concatenated
with the calculated features and the irradiance input and fed to a 128-unit
recurrent cell, whose state a 2-hidden-layer decoder maps to one output.

Steps 0..11 are warm-up and consume observed irradiance; from step 12 on,
the decoder output of the previous step replaces the observed value and the
decoder outputs of steps 12..17 are the 6 forecasts.  Gradients are
backpropagated through time across all 18 steps, including the
autoregressive feedback path.
"""

from __future__ import annotations

import numpy as np

from .base import (
    Adam,
    InsufficientData,
    NonFiniteLoss,
    TrainConfig,
    glorot_uniform,
    minibatches,
    orthogonal,
)

N_WARMUP = 12
N_STEPS = 18
N_OUT = 6


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def init_lstm_params(
    rng: np.random.Generator,
    n_weather: int | None,
    n_calc: int,
    has_irradiance: bool,
    encoder_units: int = 32,
    hidden_units: int = 128,
    decoder_units: int = 128,
) -> dict:
    """Seeded parameter dict; recurrent matrix orthogonal, forget bias 1."""
    H = hidden_units
    params = {}
    x_dim = n_calc + (1 if has_irradiance else 0)
    if n_weather is not None:
        E = encoder_units
        sizes = [n_weather, E, E, E]
        for i in range(3):
            params[f"enc_w{i}"] = glorot_uniform(rng, sizes[i], sizes[i + 1])
            params[f"enc_b{i}"] = np.zeros(sizes[i + 1])
        x_dim += E
    params["wx"] = glorot_uniform(rng, x_dim, 4 * H)
    params["wh"] = np.concatenate(
        [orthogonal(rng, H, H) for _ in range(4)], axis=1
    )
    b = np.zeros(4 * H)
    b[H : 2 * H] = 1.0  # forget gate
    params["b"] = b
    U = decoder_units
    params["dec_w0"] = glorot_uniform(rng, H, U)
    params["dec_b0"] = np.zeros(U)
    params["dec_w1"] = glorot_uniform(rng, U, U)
    params["dec_b1"] = np.zeros(U)
    params["dec_w2"] = glorot_uniform(rng, U, 1)
    params["dec_b2"] = np.zeros(1)
    return params


def _encoder_forward(params, weather):
    """weather (n, 18, nw) -> encoding (n, 18, E) plus the relu activations."""
    n, steps, nw = weather.shape
    h = weather.reshape(n * steps, nw)
    acts = [h]
    for i in range(3):
        h = np.maximum(h @ params[f"enc_w{i}"] + params[f"enc_b{i}"], 0.0)
        acts.append(h)
    E = h.shape[1]
    return h.reshape(n, steps, E), acts


def _decoder_forward(params, h):
    a1 = np.maximum(h @ params["dec_w0"] + params["dec_b0"], 0.0)
    a2 = np.maximum(a1 @ params["dec_w1"] + params["dec_b1"], 0.0)
    out = (a2 @ params["dec_w2"] + params["dec_b2"])[:, 0]
    return out, (h, a1, a2)


def lstm_forward(params, calc, weather, past_irr):
    """Full 18-step forward pass.

    calc (n, 18, 7); weather (n, 18, nw) or None; past_irr (n, 12) or None.
    Returns (predictions (n, 6), cache).
    """
    n = calc.shape[0]
    H = params["wh"].shape[0]
    has_irr = past_irr is not None

    enc_out, enc_acts = (None, None)
    if weather is not None:
        enc_out, enc_acts = _encoder_forward(params, weather)

    h = np.zeros((n, H))
    c = np.zeros((n, H))
    prev_out = None
    steps = []
    outputs = {}
    for s in range(N_STEPS):
        parts = []
        if enc_out is not None:
            parts.append(enc_out[:, s])
        parts.append(calc[:, s])
        if has_irr:
            irr_in = past_irr[:, s] if s < N_WARMUP else prev_out
            parts.append(irr_in[:, None])
        x = np.concatenate(parts, axis=1)

        z = x @ params["wx"] + h @ params["wh"] + params["b"]
        zi, zf, zg, zo = z[:, :H], z[:, H : 2 * H], z[:, 2 * H : 3 * H], z[:, 3 * H :]
        gi, gf, go = _sigmoid(zi), _sigmoid(zf), _sigmoid(zo)
        gg = np.tanh(zg)
        c_prev, h_prev = c, h
        c = gf * c_prev + gi * gg
        tanh_c = np.tanh(c)
        h = go * tanh_c

        dec_cache = None
        if s >= N_WARMUP - 1:
            out, dec_cache = _decoder_forward(params, h)
            outputs[s] = out
            prev_out = out
        steps.append(
            {
                "x": x, "gi": gi, "gf": gf, "gg": gg, "go": go,
                "c": c, "c_prev": c_prev, "h_prev": h_prev, "tanh_c": tanh_c,
                "dec": dec_cache,
            }
        )

    predictions = np.column_stack([outputs[s] for s in range(N_WARMUP, N_STEPS)])
    cache = {"steps": steps, "outputs": outputs, "enc_acts": enc_acts, "has_irr": has_irr,
             "n_weather_cols": None if weather is None else weather.shape[2]}
    return predictions, cache


def lstm_loss_and_grads(params, calc, weather, past_irr, Y):
    """MSE loss over the 6 outputs plus gradients for every parameter."""
    predictions, cache = lstm_forward(params, calc, weather, past_irr)
    resid = predictions - Y
    loss = float(np.mean(resid**2))
    d_pred = 2.0 * resid / resid.size

    n = calc.shape[0]
    H = params["wh"].shape[0]
    has_irr = cache["has_irr"]
    has_weather = weather is not None
    E = params["enc_w2"].shape[1] if has_weather else 0

    grads = {k: np.zeros_like(v) for k, v in params.items()}
    d_enc_out = np.zeros((n, N_STEPS, E)) if has_weather else None
    pending = {}  # step -> gradient w.r.t. that step's decoder output
    dh_next = np.zeros((n, H))
    dc_next = np.zeros((n, H))

    for s in range(N_STEPS - 1, -1, -1):
        st = cache["steps"][s]
        dh = dh_next

        d_out = None
        if s >= N_WARMUP:
            d_out = d_pred[:, s - N_WARMUP].copy()
        if s in pending:
            d_out = pending.pop(s) if d_out is None else d_out + pending.pop(s)
        if d_out is not None:
            h_in, a1, a2 = st["dec"]
            dz = d_out[:, None]
            grads["dec_w2"] += a2.T @ dz
            grads["dec_b2"] += dz.sum(axis=0)
            da2 = (dz @ params["dec_w2"].T) * (a2 > 0.0)
            grads["dec_w1"] += a1.T @ da2
            grads["dec_b1"] += da2.sum(axis=0)
            da1 = (da2 @ params["dec_w1"].T) * (a1 > 0.0)
            grads["dec_w0"] += h_in.T @ da1
            grads["dec_b0"] += da1.sum(axis=0)
            dh = dh + da1 @ params["dec_w0"].T

        do = dh * st["tanh_c"]
        dc = dc_next + dh * st["go"] * (1.0 - st["tanh_c"] ** 2)
        di = dc * st["gg"]
        dg = dc * st["gi"]
        df = dc * st["c_prev"]
        dc_next = dc * st["gf"]

        dz = np.concatenate(
            [
                di * st["gi"] * (1.0 - st["gi"]),
                df * st["gf"] * (1.0 - st["gf"]),
                dg * (1.0 - st["gg"] ** 2),
                do * st["go"] * (1.0 - st["go"]),
            ],
            axis=1,
        )
        grads["wx"] += st["x"].T @ dz
        grads["wh"] += st["h_prev"].T @ dz
        grads["b"] += dz.sum(axis=0)
        dx = dz @ params["wx"].T
        dh_next = dz @ params["wh"].T

        col = 0
        if has_weather:
            d_enc_out[:, s] = dx[:, :E]
            col = E
        col += calc.shape[2]
        if has_irr and s >= N_WARMUP:
            # feedback path: this step's irradiance input was the previous
            # step's decoder output
            pending[s - 1] = pending.get(s - 1, 0.0) + dx[:, col]

    if has_weather:
        acts = cache["enc_acts"]
        delta = d_enc_out.reshape(n * N_STEPS, E) * (acts[3] > 0.0)
        for i in range(2, -1, -1):
            grads[f"enc_w{i}"] += acts[i].T @ delta
            grads[f"enc_b{i}"] += delta.sum(axis=0)
            if i > 0:
                delta = (delta @ params[f"enc_w{i}"].T) * (acts[i] > 0.0)

    return loss, grads


class LstmRegressor:
    """Sequence learner over 12 warm-up plus 6 autoregressive steps."""

    def __init__(
        self,
        encoder_units: int = 32,
        hidden_units: int = 128,
        decoder_units: int = 128,
        config: TrainConfig | None = None,
    ):
        self.encoder_units = encoder_units
        self.hidden_units = hidden_units
        self.decoder_units = decoder_units
        self.config = config or TrainConfig()

    def get_params(self) -> dict:
        return {
            "encoder_units": self.encoder_units,
            "hidden_units": self.hidden_units,
            "decoder_units": self.decoder_units,
            "config": self.config,
        }

    def set_params(self, **params) -> "LstmRegressor":
        for k, v in params.items():
            if not hasattr(self, k):
                raise ValueError(f"unknown parameter {k!r}")
            setattr(self, k, v)
        return self

    @staticmethod
    def _inputs(sequences: dict):
        calc = np.asarray(sequences["calc"], dtype=np.float64)
        weather = sequences.get("weather")
        past_irr = sequences.get("past_irr")
        if weather is not None:
            weather = np.asarray(weather, dtype=np.float64)
        if past_irr is not None:
            past_irr = np.asarray(past_irr, dtype=np.float64)
        return calc, weather, past_irr

    def fit(self, sequences: dict, Y) -> "LstmRegressor":
        calc, weather, past_irr = self._inputs(sequences)
        Y = np.asarray(Y, dtype=np.float64)
        if len(calc) == 0:
            raise InsufficientData("no training windows")
        cfg = self.config
        rng = np.random.default_rng(cfg.init_seed)
        self.params_ = init_lstm_params(
            rng,
            None if weather is None else weather.shape[2],
            calc.shape[2],
            past_irr is not None,
            self.encoder_units,
            self.hidden_units,
            self.decoder_units,
        )
        self.has_weather_ = weather is not None
        self.has_irradiance_ = past_irr is not None
        names = sorted(self.params_)
        opt = Adam(
            [self.params_[k].shape for k in names],
            cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps,
        )
        shuffle_rng = np.random.default_rng(cfg.shuffle_seed) if cfg.shuffle else None
        self.loss_history_ = []
        for epoch in range(cfg.epochs):
            epoch_loss, n_batches = 0.0, 0
            for batch_no, idx in enumerate(minibatches(len(calc), cfg.batch_size, shuffle_rng)):
                loss, grads = lstm_loss_and_grads(
                    self.params_,
                    calc[idx],
                    None if weather is None else weather[idx],
                    None if past_irr is None else past_irr[idx],
                    Y[idx],
                )
                if not np.isfinite(loss):
                    raise NonFiniteLoss(epoch, batch_no, loss)
                opt.step([self.params_[k] for k in names], [grads[k] for k in names])
                epoch_loss += loss
                n_batches += 1
            self.loss_history_.append(epoch_loss / n_batches)
        return self

    def predict(self, sequences: dict) -> np.ndarray:
        calc, weather, past_irr = self._inputs(sequences)
        predictions, _ = lstm_forward(self.params_, calc, weather, past_irr)
        return predictions

    # -- persistence ------------------------------------------------------

    def parameter_blocks(self) -> list[tuple[str, np.ndarray]]:
        return [(k, self.params_[k]) for k in sorted(self.params_)]

    def shape_header(self) -> dict:
        return {
            "encoder_units": self.encoder_units,
            "hidden_units": self.hidden_units,
            "decoder_units": self.decoder_units,
            "has_weather": self.has_weather_,
            "has_irradiance": self.has_irradiance_,
        }

    @classmethod
    def from_blocks(cls, header: dict, blocks: dict) -> "LstmRegressor":
        model = cls(
            encoder_units=header["encoder_units"],
            hidden_units=header["hidden_units"],
            decoder_units=header["decoder_units"],
        )
        model.params_ = dict(blocks)
        model.has_weather_ = header["has_weather"]
        model.has_irradiance_ = header["has_irradiance"]
        return model
