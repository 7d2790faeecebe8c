"""Small convolutional feature extractor with from-scratch training.

Architecture per layer: 3x3 same-padding convolution, ReLU, 2x2 max pool.
A global average pool over the last activation map yields the feature vector;
a temporary linear head on top provides the logit used only during offline
training (binary cross-entropy, SGD with momentum).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .container import load_container, save_container
from .errors import NotTrainedError, TrainingError
from .frontend import Spectrogram

DEFAULT_CHANNEL_SCHEDULE = (8, 16, 32, 32, 64)


@dataclass(frozen=True)
class ConvNetConfig:
    num_conv_layers: int
    channels_per_layer: tuple[int, ...]
    seed: int = 0

    def __post_init__(self):
        if self.num_conv_layers < 1:
            raise ValueError("need at least one conv layer")
        if len(self.channels_per_layer) != self.num_conv_layers:
            raise ValueError("channels_per_layer length must equal num_conv_layers")
        object.__setattr__(self, "channels_per_layer", tuple(self.channels_per_layer))

    @property
    def feature_dim(self) -> int:
        return self.channels_per_layer[-1]

    @classmethod
    def default(cls, num_conv_layers: int, seed: int = 0) -> "ConvNetConfig":
        sched = list(DEFAULT_CHANNEL_SCHEDULE)
        while len(sched) < num_conv_layers:
            sched.append(sched[-1])
        return cls(num_conv_layers=num_conv_layers,
                   channels_per_layer=tuple(sched[:num_conv_layers]), seed=seed)


def _im2col(x: np.ndarray) -> np.ndarray:
    """(B, C, H, W) -> (B, H*W, C*9) patches for a 3x3 same-padding conv."""
    b, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    windows = np.lib.stride_tricks.sliding_window_view(xp, (3, 3), axis=(2, 3))
    return windows.transpose(0, 2, 3, 1, 4, 5).reshape(b, h * w, c * 9)


def _col2im(dcols: np.ndarray, shape) -> np.ndarray:
    """Adjoint of _im2col: scatter patch gradients back onto the input."""
    b, c, h, w = shape
    d6 = dcols.reshape(b, h, w, c, 3, 3).transpose(0, 3, 4, 5, 1, 2)
    dxp = np.zeros((b, c, h + 2, w + 2))
    for di in range(3):
        for dj in range(3):
            dxp[:, :, di:di + h, dj:dj + w] += d6[:, :, di, dj]
    return dxp[:, :, 1:h + 1, 1:w + 1]


def _maxpool(x: np.ndarray):
    """2x2 max pool with floor semantics; returns (pooled, argmax, cropped shape)."""
    b, c, h, w = x.shape
    h2, w2 = h // 2, w // 2
    tiles = x[:, :, :2 * h2, :2 * w2].reshape(b, c, h2, 2, w2, 2)
    tiles = tiles.transpose(0, 1, 2, 4, 3, 5).reshape(b, c, h2, w2, 4)
    arg = tiles.argmax(axis=-1)
    pooled = np.take_along_axis(tiles, arg[..., None], axis=-1)[..., 0]
    return pooled, arg, (h, w)


def _maxpool_backward(dpooled: np.ndarray, arg: np.ndarray, shape) -> np.ndarray:
    b, c, h2, w2 = dpooled.shape
    h, w = shape
    dtiles = np.zeros((b, c, h2, w2, 4))
    np.put_along_axis(dtiles, arg[..., None], dpooled[..., None], axis=-1)
    dx = np.zeros((b, c, h, w))
    dx[:, :, :2 * h2, :2 * w2] = (
        dtiles.reshape(b, c, h2, w2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
        .reshape(b, c, 2 * h2, 2 * w2))
    return dx


def bce_with_logits(logits: np.ndarray, labels: np.ndarray) -> float:
    z, y = np.asarray(logits, dtype=np.float64), np.asarray(labels, dtype=np.float64)
    return float(np.mean(np.maximum(z, 0) - z * y + np.log1p(np.exp(-np.abs(z)))))


class ConvNet:
    """Stack of conv/ReLU/pool layers plus a training-only linear head.

    Conv weights are held as (C_in*9, C_out) matrices for im2col matmuls.
    """

    def __init__(self, config: ConvNetConfig):
        self.config = config
        self.trained = False
        self.loss_history: list[float] = []
        rng = np.random.default_rng(config.seed)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        c_in = 1
        for c_out in config.channels_per_layer:
            fan_in = c_in * 9
            self.weights.append(rng.standard_normal((fan_in, c_out)) * np.sqrt(2.0 / fan_in))
            self.biases.append(np.zeros(c_out))
            c_in = c_out
        m = config.feature_dim
        self.head_w = rng.standard_normal(m) * np.sqrt(2.0 / m)
        self.head_b = np.zeros(1)

    @property
    def feature_dim(self) -> int:
        return self.config.feature_dim

    def parameters(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases, self.head_w, self.head_b]

    def _check_input(self, h: int, w: int) -> None:
        min_side = 2 ** self.config.num_conv_layers
        if h < min_side or w < min_side:
            raise ValueError(
                f"spectrogram {h}x{w} too small for {self.config.num_conv_layers} "
                f"pooling layers; minimum input is {min_side}x{min_side}")

    def forward_batch(self, x: np.ndarray, want_cache: bool = False):
        """x: (B, H, W) or (B, 1, H, W).  Returns (features, logits[, cache])."""
        if x.ndim == 3:
            x = x[:, None, :, :]
        self._check_input(x.shape[2], x.shape[3])
        cache = []
        a = x
        for wmat, bias in zip(self.weights, self.biases):
            b, c, h, w = a.shape
            cols = _im2col(a)
            pre = (cols @ wmat + bias).reshape(b, h, w, wmat.shape[1]).transpose(0, 3, 1, 2)
            act = np.maximum(pre, 0.0)
            pooled, arg, shape = _maxpool(act)
            if want_cache:
                cache.append((cols, pre, arg, shape, a.shape))
            a = pooled
        features = a.mean(axis=(2, 3))
        logits = features @ self.head_w + self.head_b[0]
        if want_cache:
            return features, logits, (cache, a.shape, features)
        return features, logits

    def backward_batch(self, dlogits: np.ndarray, cache):
        """Gradients of a scalar loss w.r.t. all parameters, given dL/dlogits."""
        layer_caches, last_shape, features = cache
        b = dlogits.shape[0]
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        grad_head_w = features.T @ dlogits
        grad_head_b = np.array([dlogits.sum()])
        dfeat = dlogits[:, None] * self.head_w[None, :]
        _, _, h_last, w_last = last_shape
        da = np.broadcast_to(dfeat[:, :, None, None] / (h_last * w_last), last_shape).copy()
        for i in reversed(range(len(self.weights))):
            cols, pre, arg, shape, in_shape = layer_caches[i]
            dact = _maxpool_backward(da, arg, shape)
            dpre = dact * (pre > 0)
            bsz, c_out, h, w = dpre.shape
            dflat = dpre.transpose(0, 2, 3, 1).reshape(bsz, h * w, c_out)
            grads_w[i] = cols.reshape(-1, cols.shape[2]).T @ dflat.reshape(-1, c_out)
            grads_b[i] = dflat.sum(axis=(0, 1))
            if i > 0:
                dcols = dflat @ self.weights[i].T
                da = _col2im(dcols, in_shape)
        return [*grads_w, *grads_b, grad_head_w, grad_head_b]

    def save(self, path) -> None:
        meta = {"kind": "convnet",
                "num_conv_layers": self.config.num_conv_layers,
                "channels_per_layer": list(self.config.channels_per_layer),
                "seed": self.config.seed,
                "trained": self.trained}
        arrays = {"head_w": self.head_w, "head_b": self.head_b}
        for i, (wmat, bias) in enumerate(zip(self.weights, self.biases)):
            arrays[f"w{i}"] = wmat
            arrays[f"b{i}"] = bias
        save_container(path, meta, arrays)

    @classmethod
    def load(cls, path) -> "ConvNet":
        meta, arrays = load_container(path)
        if meta.get("kind") != "convnet":
            raise ValueError(f"{path}: not a convnet container")
        config = ConvNetConfig(num_conv_layers=meta["num_conv_layers"],
                               channels_per_layer=tuple(meta["channels_per_layer"]),
                               seed=meta["seed"])
        net = cls(config)
        net.trained = bool(meta["trained"])
        net.weights = [arrays[f"w{i}"] for i in range(config.num_conv_layers)]
        net.biases = [arrays[f"b{i}"] for i in range(config.num_conv_layers)]
        net.head_w = arrays["head_w"]
        net.head_b = arrays["head_b"]
        for wmat, bias, c_in, c_out in zip(
                net.weights, net.biases,
                (1,) + config.channels_per_layer[:-1], config.channels_per_layer):
            if wmat.shape != (c_in * 9, c_out) or bias.shape != (c_out,):
                raise ValueError(f"{path}: weight shapes inconsistent with config")
        if not all(np.all(np.isfinite(p)) for p in net.parameters()):
            raise ValueError(f"{path}: non-finite weights")
        return net


def _values(s) -> np.ndarray:
    return s.values if isinstance(s, Spectrogram) else np.asarray(s, dtype=np.float64)


def forward(net: ConvNet, spec) -> tuple[np.ndarray, float]:
    """Single-sample forward: (feature vector of length m, training-head logit)."""
    features, logits = net.forward_batch(_values(spec)[None, :, :])
    return features[0], float(logits[0])


def extract_features(net: ConvNet, spec) -> np.ndarray:
    """Features of a trained net, linear head discarded."""
    if not net.trained:
        raise NotTrainedError("feature extraction requires a trained ConvNet")
    return forward(net, spec)[0]


def extract_features_batch(net: ConvNet, specs, batch_size: int = 32) -> np.ndarray:
    """Features for a list of same-shape spectrograms; (n, m) matrix."""
    if not net.trained:
        raise NotTrainedError("feature extraction requires a trained ConvNet")
    mats = [_values(s) for s in specs]
    out = []
    for start in range(0, len(mats), batch_size):
        x = np.stack(mats[start:start + batch_size])
        out.append(net.forward_batch(x)[0])
    return np.concatenate(out) if out else np.zeros((0, net.feature_dim))


def train_offline(net: ConvNet, spectrograms, labels, epochs: int = 30,
                  lr: float = 0.01, batch_size: int = 32, momentum: float = 0.9,
                  seed: int = 0) -> ConvNet:
    """Mini-batch SGD with momentum on binary cross-entropy.

    Mutates and returns ``net`` with trained=True; per-epoch mean loss is
    recorded on ``net.loss_history``.
    """
    labels = np.asarray(labels, dtype=np.float64)
    if len(set(labels.tolist())) < 2:
        raise TrainingError("offline training needs both classes present")
    x_all = np.stack([_values(s) for s in spectrograms])
    n = x_all.shape[0]
    rng = np.random.default_rng(seed)
    velocity = [np.zeros_like(p) for p in net.parameters()]
    for _ in range(epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            xb, yb = x_all[idx], labels[idx]
            feats, logits, cache = net.forward_batch(xb, want_cache=True)
            loss = bce_with_logits(logits, yb)
            if not np.isfinite(loss):
                raise TrainingError(f"training diverged: loss={loss}")
            epoch_loss += loss * len(idx)
            dlogits = (expit(logits) - yb) / len(idx)
            grads = net.backward_batch(dlogits, cache)
            params = net.parameters()
            for p, g, v in zip(params, grads, velocity):
                v *= momentum
                v -= lr * g
                p += v
        net.loss_history.append(epoch_loss / n)
    net.trained = True
    return net


def gradient_check(net: ConvNet, spec, label: float, seed: int = 0,
                   fraction: float = 0.01, step: float = 1e-5,
                   corruption: float = 0.0) -> float:
    """Compare backprop gradients against central finite differences.

    Samples roughly ``fraction`` of all weights (at least one per tensor) and
    returns the max relative error.  ``corruption`` scales the analytic
    gradients and exists as a negative control for the harness itself.
    """
    x = _values(spec)[None, :, :]
    y = np.array([float(label)])

    def loss_fn():
        _, logits = net.forward_batch(x)
        return bce_with_logits(logits, y)

    _, logits, cache = net.forward_batch(x, want_cache=True)
    dlogits = expit(logits) - y
    grads = net.backward_batch(dlogits, cache)
    if corruption:
        grads = [g * (1.0 + corruption) for g in grads]
    rng = np.random.default_rng(seed)
    max_err = 0.0
    for p, g in zip(net.parameters(), grads):
        flat_p, flat_g = p.reshape(-1), g.reshape(-1)
        k = max(1, int(round(fraction * flat_p.size)))
        for j in rng.choice(flat_p.size, size=min(k, flat_p.size), replace=False):
            orig = flat_p[j]
            flat_p[j] = orig + step
            up = loss_fn()
            flat_p[j] = orig - step
            down = loss_fn()
            flat_p[j] = orig
            numeric = (up - down) / (2.0 * step)
            denom = max(abs(flat_g[j]), abs(numeric), 1e-6)
            max_err = max(max_err, abs(flat_g[j] - numeric) / denom)
    return max_err
