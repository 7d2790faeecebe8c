"""Post-training int8 quantization of the convolutional feature extractor.

Weights use per-tensor symmetric quantization (zero point 0).  Activations are
quantized per layer with scales calibrated from the float model's activation
maxima over a calibration set; because ReLU outputs are non-negative they use
the full unsigned 8-bit range (0..255, zero point 0), which halves the
activation step versus a symmetric signed layout.  The forward pass
accumulates in wide integers and requantizes between layers; the final
layer's accumulator is dequantized directly (no 8-bit rounding ahead of the
global average pool, where rounding noise would dominate the small features).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .container import load_container, save_container
from .convnet import ConvNet, ConvNetConfig, _im2col, _maxpool, _values
from .errors import NotCalibratedError, NotTrainedError

QMAX = 127      # symmetric signed range for weights and the (signed) input
AMAX = 255      # unsigned range for non-negative ReLU activations


def quantize_tensor(w: np.ndarray) -> tuple[np.ndarray, float]:
    """Symmetric per-tensor quantization; all-zero tensors get scale 1."""
    max_abs = float(np.max(np.abs(w))) if w.size else 0.0
    scale = max_abs / QMAX if max_abs > 0 else 1.0
    q = np.clip(np.round(w / scale), -QMAX, QMAX).astype(np.int8)
    return q, scale


def dequantize_tensor(q: np.ndarray, scale: float) -> np.ndarray:
    return q.astype(np.float64) * scale


@dataclass
class QuantizedConvNet:
    config: ConvNetConfig
    weights_q: list[np.ndarray]
    weight_scales: list[float]
    biases: list[np.ndarray]          # float; converted to int32 per-layer at run time
    input_scale: Optional[float] = None
    act_scales: list[float] = field(default_factory=list)

    @property
    def calibrated(self) -> bool:
        return self.input_scale is not None and len(self.act_scales) == len(self.weights_q)

    def save(self, path) -> None:
        meta = {"kind": "quantized_convnet",
                "num_conv_layers": self.config.num_conv_layers,
                "channels_per_layer": list(self.config.channels_per_layer),
                "seed": self.config.seed,
                "weight_scales": self.weight_scales,
                "input_scale": self.input_scale,
                "act_scales": list(self.act_scales)}
        arrays = {}
        for i, (wq, b) in enumerate(zip(self.weights_q, self.biases)):
            arrays[f"wq{i}"] = wq
            arrays[f"b{i}"] = b
        save_container(path, meta, arrays)

    @classmethod
    def load(cls, path) -> "QuantizedConvNet":
        meta, arrays = load_container(path)
        if meta.get("kind") != "quantized_convnet":
            raise ValueError(f"{path}: not a quantized convnet container")
        config = ConvNetConfig(num_conv_layers=meta["num_conv_layers"],
                               channels_per_layer=tuple(meta["channels_per_layer"]),
                               seed=meta["seed"])
        n = config.num_conv_layers
        return cls(config=config,
                   weights_q=[arrays[f"wq{i}"] for i in range(n)],
                   weight_scales=[float(s) for s in meta["weight_scales"]],
                   biases=[arrays[f"b{i}"] for i in range(n)],
                   input_scale=meta["input_scale"],
                   act_scales=[float(s) for s in meta["act_scales"]])


def _float_activation_maxima(net: ConvNet, specs) -> tuple[float, list[float]]:
    """Max |value| of the input and of each layer's pooled ReLU output."""
    input_max = 0.0
    layer_max = [0.0] * len(net.weights)
    for s in specs:
        a = _values(s)[None, None, :, :]
        input_max = max(input_max, float(np.max(np.abs(a))))
        for i, (wmat, bias) in enumerate(zip(net.weights, net.biases)):
            b, c, h, w = a.shape
            cols = _im2col(a)
            pre = (cols @ wmat + bias).reshape(b, h, w, wmat.shape[1]).transpose(0, 3, 1, 2)
            act = np.maximum(pre, 0.0)
            a, _, _ = _maxpool(act)
            layer_max[i] = max(layer_max[i], float(a.max(initial=0.0)))
    return input_max, layer_max


def quantize_int8(net: ConvNet, calibration_specs=None) -> QuantizedConvNet:
    """Quantize a trained float net; calibrate activations if specs are given."""
    if not net.trained:
        raise NotTrainedError("quantization requires a trained ConvNet")
    weights_q, scales = [], []
    for wmat in net.weights:
        q, s = quantize_tensor(wmat)
        weights_q.append(q)
        scales.append(s)
    qnet = QuantizedConvNet(config=net.config, weights_q=weights_q,
                            weight_scales=scales,
                            biases=[b.copy() for b in net.biases])
    if calibration_specs is not None:
        calibrate(qnet, net, calibration_specs)
    return qnet


def calibrate(qnet: QuantizedConvNet, net: ConvNet, specs) -> QuantizedConvNet:
    """Set input/activation scales from float activation maxima over ``specs``."""
    input_max, layer_max = _float_activation_maxima(net, specs)
    qnet.input_scale = (input_max / QMAX) if input_max > 0 else 1.0
    qnet.act_scales = [(m / AMAX) if m > 0 else 1.0 for m in layer_max]
    return qnet


def forward_int8(qnet: QuantizedConvNet, spec) -> np.ndarray:
    """Integer-arithmetic forward pass; returns dequantized features."""
    if not qnet.calibrated:
        raise NotCalibratedError("activation scales missing; run calibrate() first")
    x = _values(spec)
    a = np.clip(np.round(x / qnet.input_scale), -QMAX, QMAX).astype(np.int32)
    a = a[None, None, :, :]
    scale_in = qnet.input_scale
    last = len(qnet.weights_q) - 1
    for i, (wq, sw, bias, s_out) in enumerate(zip(qnet.weights_q, qnet.weight_scales,
                                                  qnet.biases, qnet.act_scales)):
        b, c, h, w = a.shape
        cols = _im2col(a)
        bias_q = np.round(bias / (scale_in * sw)).astype(np.int64)
        acc = cols.astype(np.int64) @ wq.astype(np.int64) + bias_q
        acc = np.maximum(acc, 0)  # ReLU at zero point 0
        if i == last:
            # dequantize the accumulator itself: rounding the last layer to
            # 8 bits would dominate the error of the pooled features
            act = (acc * (scale_in * sw)).reshape(b, h, w, wq.shape[1])
            pooled, _, _ = _maxpool(act.transpose(0, 3, 1, 2))
            return pooled.mean(axis=(2, 3))[0]
        requant = np.clip(np.round(acc * (scale_in * sw / s_out)), 0, AMAX)
        act = requant.reshape(b, h, w, wq.shape[1]).transpose(0, 3, 1, 2)
        pooled, _, _ = _maxpool(act.astype(np.float64))
        a = pooled.astype(np.int32)
        scale_in = s_out
    raise AssertionError("unreachable: qnet has no layers")


def forward_int8_batch(qnet: QuantizedConvNet, specs) -> np.ndarray:
    return np.stack([forward_int8(qnet, s) for s in specs])
