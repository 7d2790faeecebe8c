"""Deployable edge model bundle: frontend params, ConvNet, encoder, HDC head.

Immutable after construction; online updates produce a new bundle via
``with_classifier`` so serving code can swap a single reference atomically.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import hdc
from .container import load_container, save_container
from .convnet import ConvNet, ConvNetConfig, extract_features, extract_features_batch
from .frontend import AudioSegment, Spectrogram, stft_spectrogram
from .quantization import QuantizedConvNet, forward_int8


@dataclass(frozen=True)
class SensorModel:
    net: ConvNet
    encoder: hdc.EncoderParams
    classifier: hdc.ClassModel
    feature_mean: np.ndarray
    feature_std: np.ndarray
    frame_size: int
    hop: int
    qnet: Optional[QuantizedConvNet] = None
    use_int8: bool = False

    @property
    def t_score(self) -> float:
        return self.classifier.t_score

    def with_classifier(self, classifier: hdc.ClassModel) -> "SensorModel":
        return replace(self, classifier=classifier)

    def with_threshold(self, t_score: float) -> "SensorModel":
        return self.with_classifier(self.classifier.with_threshold(t_score))

    def with_int8(self, qnet: QuantizedConvNet) -> "SensorModel":
        return replace(self, qnet=qnet, use_int8=True)

    def spectrogram(self, seg: AudioSegment) -> Spectrogram:
        return stft_spectrogram(seg, frame_size=self.frame_size, hop=self.hop)

    def _standardize(self, feats: np.ndarray) -> np.ndarray:
        return (feats - self.feature_mean) / self.feature_std

    def features(self, seg: AudioSegment) -> np.ndarray:
        spec = self.spectrogram(seg)
        if self.use_int8:
            raw = forward_int8(self.qnet, spec)
        else:
            raw = extract_features(self.net, spec)
        return self._standardize(raw)

    def features_batch(self, segments) -> np.ndarray:
        if self.use_int8:
            raw = np.stack([forward_int8(self.qnet, self.spectrogram(s)) for s in segments])
        else:
            specs = [self.spectrogram(s) for s in segments]
            raw = extract_features_batch(self.net, specs)
        return self._standardize(raw)

    def hypervector(self, seg: AudioSegment) -> np.ndarray:
        return hdc.encode(self.features(seg), self.encoder)

    def score(self, seg: AudioSegment) -> float:
        return hdc.score(self.classifier, self.hypervector(seg))

    def score_batch(self, segments) -> np.ndarray:
        hvs = hdc.encode_batch(self.features_batch(segments), self.encoder)
        norms = np.linalg.norm(hvs, axis=1) * np.linalg.norm(self.classifier.c_pos)
        return hvs @ self.classifier.c_pos / norms

    def classify(self, seg: AudioSegment) -> bool:
        return self.score(seg) > self.classifier.t_score

    def save(self, path) -> None:
        meta = {"kind": "sensor_model",
                "frame_size": self.frame_size,
                "hop": self.hop,
                "encoder_seed": self.encoder.seed,
                "encoder_feature_dim": self.encoder.feature_dim,
                "encoder_dim": self.encoder.dim,
                "alpha": self.classifier.alpha,
                "t_score": self.classifier.t_score,
                "net_num_conv_layers": self.net.config.num_conv_layers,
                "net_channels": list(self.net.config.channels_per_layer),
                "net_seed": self.net.config.seed,
                "net_trained": self.net.trained}
        arrays = {"c_pos": self.classifier.c_pos,
                  "c_neg": self.classifier.c_neg,
                  "feature_mean": self.feature_mean,
                  "feature_std": self.feature_std,
                  "head_w": self.net.head_w,
                  "head_b": self.net.head_b}
        for i, (w, b) in enumerate(zip(self.net.weights, self.net.biases)):
            arrays[f"net_w{i}"] = w
            arrays[f"net_b{i}"] = b
        save_container(path, meta, arrays)

    @classmethod
    def load(cls, path) -> "SensorModel":
        meta, arrays = load_container(path)
        if meta.get("kind") != "sensor_model":
            raise ValueError(f"{path}: not a sensor model container")
        config = ConvNetConfig(num_conv_layers=meta["net_num_conv_layers"],
                               channels_per_layer=tuple(meta["net_channels"]),
                               seed=meta["net_seed"])
        net = ConvNet(config)
        net.trained = bool(meta["net_trained"])
        net.weights = [arrays[f"net_w{i}"] for i in range(config.num_conv_layers)]
        net.biases = [arrays[f"net_b{i}"] for i in range(config.num_conv_layers)]
        net.head_w = arrays["head_w"]
        net.head_b = arrays["head_b"]
        encoder = hdc.EncoderParams.create(meta["encoder_feature_dim"],
                                           meta["encoder_dim"], meta["encoder_seed"])
        classifier = hdc.ClassModel(c_pos=arrays["c_pos"], c_neg=arrays["c_neg"],
                                    alpha=meta["alpha"], t_score=meta["t_score"])
        return cls(net=net, encoder=encoder, classifier=classifier,
                   feature_mean=arrays["feature_mean"],
                   feature_std=arrays["feature_std"],
                   frame_size=meta["frame_size"], hop=meta["hop"])
