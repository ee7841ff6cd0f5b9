"""Stacked unidirectional LSTM regressor with a type-specifying output layer.

Everything is plain numpy. A forward pass returns the raw head output and a
cache; :func:`backward` consumes the cache and returns gradients for every
parameter. Sequences in one batch share their length.

Parameter layout for layer ``l`` (gate order i, f, g, o):

    lstm{l}.w_x  (in_l, 4H)    input weights
    lstm{l}.w_h  (H, 4H)       recurrent weights
    lstm{l}.b    (4H,)         bias
    head.w       (H, 4)
    head.b       (4,)
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..kinematics import T_MATRIX, LinkageDims, TypeConfig, dims_from_t_unchecked, is_valid

N_FEATURES = 2
N_OUTPUTS = 4

# r_row = T_row @ _T_TO_R  (r = M^T T / 4)
_T_TO_R = 0.25 * T_MATRIX


class ShapeError(ValueError):
    pass


class InvalidPrediction(ValueError):
    """The type layer produced lengths that do not close a four-bar."""

    def __init__(self, msg, r=None):
        super().__init__(msg)
        self.r = r


@dataclass
class ExpertHyperParams:
    layers: int = 7
    hidden: int = 128
    dropout_p: float = 0.3
    lr: float = 1e-4
    weight_decay: float = 2e-3
    schedule_milestones: tuple[int, ...] = (200,)
    gamma: float = 0.8
    epochs: int = 2000
    samples_per_epoch: int = 1024
    batch_size: int = 32
    seed: int = 0
    m: float = 12.0
    n_range: tuple[int, int] = (3, 20)
    probe_size: int = 64
    checkpoint_every: int = 0

    def __post_init__(self):
        self.schedule_milestones = tuple(int(x) for x in self.schedule_milestones)
        self.n_range = tuple(int(x) for x in self.n_range)
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError("dropout_p must be in [0, 1)")
        if list(self.schedule_milestones) != sorted(self.schedule_milestones):
            raise ValueError("schedule_milestones must be ascending")
        if self.layers < 1 or self.hidden < 1:
            raise ValueError("layers and hidden must be positive")
        if self.samples_per_epoch % self.batch_size:
            raise ValueError("samples_per_epoch must be a multiple of batch_size")

    def to_json(self) -> dict:
        d = asdict(self)
        d["schedule_milestones"] = list(self.schedule_milestones)
        d["n_range"] = list(self.n_range)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "ExpertHyperParams":
        return cls(**d)


# Reduced-scale settings that train one expert in about a minute on one CPU.
SMOKE_HYPER = ExpertHyperParams(
    layers=1,
    hidden=64,
    dropout_p=0.0,
    lr=5e-3,
    weight_decay=0.0,
    schedule_milestones=(200,),
    gamma=0.3,
    epochs=300,
    samples_per_epoch=256,
    batch_size=8,
    probe_size=0,
)


def _sigmoid(x):
    # tanh form avoids overflow warnings for large |x|
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def softplus(x):
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def param_shapes(layers: int, hidden: int) -> dict[str, tuple[int, ...]]:
    shapes = {}
    for l in range(layers):
        n_in = N_FEATURES if l == 0 else hidden
        shapes[f"lstm{l}.w_x"] = (n_in, 4 * hidden)
        shapes[f"lstm{l}.w_h"] = (hidden, 4 * hidden)
        shapes[f"lstm{l}.b"] = (4 * hidden,)
    shapes["head.w"] = (hidden, N_OUTPUTS)
    shapes["head.b"] = (N_OUTPUTS,)
    return shapes


def init_params(layers: int, hidden: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Uniform(-1/sqrt(H), 1/sqrt(H)) everywhere, forget-gate bias +1."""
    k = 1.0 / math.sqrt(hidden)
    params = {}
    for name, shape in param_shapes(layers, hidden).items():
        params[name] = rng.uniform(-k, k, size=shape)
    for l in range(layers):
        params[f"lstm{l}.b"][hidden : 2 * hidden] += 1.0
    return params


@dataclass
class ExpertModel:
    cfg: TypeConfig
    hyper: ExpertHyperParams
    params: dict[str, np.ndarray] = field(repr=False)

    @classmethod
    def create(cls, cfg: TypeConfig, hyper: ExpertHyperParams, rng: np.random.Generator | None = None):
        if rng is None:
            rng = np.random.default_rng(hyper.seed)
        return cls(cfg, hyper, init_params(hyper.layers, hyper.hidden, rng))

    @property
    def type_signs(self) -> np.ndarray:
        s1, s2, s3 = self.cfg.signs
        return np.array([s1, s2, s3, 1.0])


def _as_batch(points) -> np.ndarray:
    x = np.asarray(points, dtype=float)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3 or x.shape[2] != N_FEATURES:
        raise ShapeError(f"expected (n, {N_FEATURES}) or (B, n, {N_FEATURES}) points, got {x.shape}")
    if x.shape[1] < 1:
        raise ShapeError("sequences need at least one point")
    return x


def forward(model: ExpertModel, points, train_mode: bool = False, rng: np.random.Generator | None = None):
    """Run the stack over (B, n, 2) or (n, 2) points.

    Returns (h, cache) where h is the (B, 4) raw head output taken from the
    top layer's final hidden state. Dropout is applied between layers only
    in train mode.
    """
    x = _as_batch(points)
    p = model.params
    hyper = model.hyper
    L, H = hyper.layers, hyper.hidden
    B, n, _ = x.shape
    drop = train_mode and hyper.dropout_p > 0.0
    if drop and rng is None:
        raise ValueError("train_mode with dropout needs an rng")
    keep = 1.0 - hyper.dropout_p

    layer_in = x
    caches = []
    for l in range(L):
        w_x, w_h, b = p[f"lstm{l}.w_x"], p[f"lstm{l}.w_h"], p[f"lstm{l}.b"]
        zx = layer_in @ w_x + b  # (B, n, 4H)
        hs = np.empty((B, n, H))
        cs = np.empty((B, n, H))
        gates = np.empty((B, n, 4 * H))
        h = np.zeros((B, H))
        c = np.zeros((B, H))
        for t in range(n):
            z = zx[:, t] + h @ w_h
            g = np.empty_like(z)
            g[:, : 2 * H] = _sigmoid(z[:, : 2 * H])
            g[:, 2 * H : 3 * H] = np.tanh(z[:, 2 * H : 3 * H])
            g[:, 3 * H :] = _sigmoid(z[:, 3 * H :])
            c = g[:, H : 2 * H] * c + g[:, :H] * g[:, 2 * H : 3 * H]
            h = g[:, 3 * H :] * np.tanh(c)
            gates[:, t] = g
            cs[:, t] = c
            hs[:, t] = h
        mask = None
        out = hs
        if drop and l < L - 1:
            mask = (rng.random(hs.shape) < keep) / keep
            out = hs * mask
        caches.append((layer_in, gates, cs, hs, mask))
        layer_in = out

    h_last = layer_in[:, -1]
    raw = h_last @ p["head.w"] + p["head.b"]
    return raw, {"layers": caches, "h_last": h_last}


def type_layer(h, cfg_or_signs) -> np.ndarray:
    """Map raw outputs to link lengths with the configured sign pattern.

    T_j = softplus(h_j) * sgn(T_j) for j = 1..3, T_4 = softplus(h_4), and
    r = M^T T / 4. Works on a (4,) vector or a (B, 4) batch.
    """
    signs = _signs(cfg_or_signs)
    t = softplus(np.asarray(h, dtype=float)) * signs
    return t @ _T_TO_R


def type_layer_t(h, cfg_or_signs) -> np.ndarray:
    return softplus(np.asarray(h, dtype=float)) * _signs(cfg_or_signs)


def _signs(cfg_or_signs) -> np.ndarray:
    if isinstance(cfg_or_signs, TypeConfig):
        s1, s2, s3 = cfg_or_signs.signs
        return np.array([s1, s2, s3, 1.0])
    return np.asarray(cfg_or_signs, dtype=float)


def mse_loss(r_pred, r_true) -> float:
    """Mean over the batch of (1/4) sum_i (r_i - r_pred_i)^2."""
    d = np.asarray(r_true, dtype=float) - np.asarray(r_pred, dtype=float)
    d = d.reshape(-1, N_OUTPUTS)
    return float(np.mean(0.25 * np.sum(d * d, axis=1)))


def loss_and_grad(model: ExpertModel, points, r_true, train_mode=False, rng=None):
    """Loss of mse(type_layer(forward(points)), r_true) and its parameter gradients."""
    raw, cache = forward(model, points, train_mode, rng)
    r_true = np.asarray(r_true, dtype=float).reshape(-1, N_OUTPUTS)
    signs = model.type_signs
    r_pred = softplus(raw) * signs @ _T_TO_R
    diff = r_pred - r_true
    B = raw.shape[0]
    loss = float(np.mean(0.25 * np.sum(diff * diff, axis=1)))
    d_r = 0.5 * diff / B
    d_t = d_r @ _T_TO_R.T
    d_raw = d_t * signs * _sigmoid(raw)
    grads = backward(model, cache, d_raw)
    return loss, grads, r_pred


def backward(model: ExpertModel, cache, d_raw) -> dict[str, np.ndarray]:
    """Backpropagation through time for gradients of the head output ``d_raw``."""
    p = model.params
    L, H = model.hyper.layers, model.hyper.hidden
    grads = {}
    h_last = cache["h_last"]
    grads["head.w"] = h_last.T @ d_raw
    grads["head.b"] = d_raw.sum(axis=0)

    layer_caches = cache["layers"]
    layer_in, gates, cs, hs, mask = layer_caches[-1]
    B, n, _ = hs.shape
    # gradient w.r.t. the (post-dropout) output sequence of the top layer
    d_out = np.zeros((B, n, H))
    d_out[:, -1] = d_raw @ p["head.w"].T

    for l in range(L - 1, -1, -1):
        layer_in, gates, cs, hs, mask = layer_caches[l]
        w_x, w_h = p[f"lstm{l}.w_x"], p[f"lstm{l}.w_h"]
        d_hs = d_out * mask if mask is not None else d_out
        dz_all = np.empty((B, n, 4 * H))
        dh_next = np.zeros((B, H))
        dc_next = np.zeros((B, H))
        for t in range(n - 1, -1, -1):
            g = gates[:, t]
            gi, gf, gg, go = g[:, :H], g[:, H : 2 * H], g[:, 2 * H : 3 * H], g[:, 3 * H :]
            c = cs[:, t]
            c_prev = cs[:, t - 1] if t > 0 else np.zeros((B, H))
            tc = np.tanh(c)
            dh = d_hs[:, t] + dh_next
            dc = dc_next + dh * go * (1.0 - tc * tc)
            dz = dz_all[:, t]
            dz[:, :H] = dc * gg * gi * (1.0 - gi)
            dz[:, H : 2 * H] = dc * c_prev * gf * (1.0 - gf)
            dz[:, 2 * H : 3 * H] = dc * gi * (1.0 - gg * gg)
            dz[:, 3 * H :] = dh * tc * go * (1.0 - go)
            dc_next = dc * gf
            dh_next = dz @ w_h.T
        n_in = layer_in.shape[2]
        grads[f"lstm{l}.w_x"] = layer_in.reshape(-1, n_in).T @ dz_all.reshape(-1, 4 * H)
        grads[f"lstm{l}.b"] = dz_all.sum(axis=(0, 1))
        h_prev = np.concatenate([np.zeros((B, 1, H)), hs[:, :-1]], axis=1)
        grads[f"lstm{l}.w_h"] = h_prev.reshape(-1, H).T @ dz_all.reshape(-1, 4 * H)
        if l > 0:
            d_out = dz_all @ w_x.T
    return grads


def predict_raw(model: ExpertModel, points) -> np.ndarray:
    raw, _ = forward(model, points, train_mode=False)
    return raw


def predict_batch(model: ExpertModel, points) -> np.ndarray:
    """(B, 4) link lengths for a batch of equal-length sequences (no validity check)."""
    return type_layer(predict_raw(model, points), model.cfg)


def predict(model: ExpertModel, points) -> LinkageDims:
    """Link lengths for one sequence of absolute precision points (radians).

    Raises InvalidPrediction when the lengths fail the validity conditions.
    """
    r = predict_batch(model, points)[0]
    dims = LinkageDims(*(float(v) for v in r))
    if not is_valid(dims):
        raise InvalidPrediction(f"predicted r={tuple(dims)} is not a valid linkage", dims)
    return dims


def dims_from_raw(h, cfg: TypeConfig) -> LinkageDims:
    """Scalar path of the type layer through dims_from_t (used by tests)."""
    t = type_layer_t(h, cfg)
    return dims_from_t_unchecked([float(v) for v in t])
