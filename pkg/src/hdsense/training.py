"""Offline training orchestration: spectrograms -> CNN -> HDC head -> threshold."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import hdc
from .convnet import ConvNet, ConvNetConfig, extract_features_batch, train_offline
from .evaluation import choose_threshold, roc_curve
from .frontend import DEFAULT_FRAME_SIZE, DEFAULT_HOP, stft_spectrogram
from .model import SensorModel


@dataclass(frozen=True)
class TrainSettings:
    num_conv_layers: int = 5
    channels_per_layer: Optional[tuple[int, ...]] = None
    epochs: int = 10
    lr: float = 0.01
    batch_size: int = 32
    conv_seed: int = 0
    dim: int = hdc.DEFAULT_DIM
    alpha: float = hdc.DEFAULT_ALPHA
    hdc_seed: int = 0
    retrain_epochs: int = 20
    frame_size: int = DEFAULT_FRAME_SIZE
    hop: int = DEFAULT_HOP
    t_score: Optional[float] = None
    target_fpr: Optional[float] = None

    def convnet_config(self) -> ConvNetConfig:
        if self.channels_per_layer is not None:
            return ConvNetConfig(num_conv_layers=self.num_conv_layers,
                                 channels_per_layer=tuple(self.channels_per_layer),
                                 seed=self.conv_seed)
        return ConvNetConfig.default(self.num_conv_layers, seed=self.conv_seed)


def spectrograms_for(segments, frame_size: int, hop: int):
    return [stft_spectrogram(s, frame_size=frame_size, hop=hop) for s in segments]


def train_sensor_model(train_segments, settings: TrainSettings = TrainSettings(),
                       val_segments=None) -> tuple[SensorModel, dict]:
    """Full offline pipeline on labeled segments; returns (model, info).

    Trains the CNN on spectrograms, freezes it, standardizes its features,
    encodes them into hypervectors, bundles/retrains the class hypervectors,
    and resolves the decision threshold (fixed t_score, validation-ROC FPR
    budget, or 0.0 by default).  ``info`` carries training diagnostics.
    """
    if settings.t_score is not None and settings.target_fpr is not None:
        raise ValueError("supply exactly one of t_score / target_fpr")
    train_segments = list(train_segments)
    labels = np.array([bool(s.label) for s in train_segments])
    specs = spectrograms_for(train_segments, settings.frame_size, settings.hop)

    net = ConvNet(settings.convnet_config())
    train_offline(net, specs, labels.astype(float), epochs=settings.epochs,
                  lr=settings.lr, batch_size=settings.batch_size,
                  seed=settings.conv_seed)

    feats = extract_features_batch(net, specs)
    mean = feats.mean(axis=0)
    std = feats.std(axis=0)
    std = np.where(std < 1e-8, 1.0, std)
    feats_std = (feats - mean) / std

    encoder = hdc.EncoderParams.create(net.feature_dim, settings.dim, settings.hdc_seed)
    hvs = hdc.encode_batch(feats_std, encoder)
    samples = [(hvs[i], hdc.POSITIVE if labels[i] else hdc.NEGATIVE)
               for i in range(len(train_segments))]
    classifier = hdc.train_initial(samples, alpha=settings.alpha)
    classifier, retrain_errors = hdc.retrain(classifier, samples,
                                             max_epochs=settings.retrain_epochs)

    model = SensorModel(net=net, encoder=encoder, classifier=classifier,
                        feature_mean=mean, feature_std=std,
                        frame_size=settings.frame_size, hop=settings.hop)
    info = {"loss_history": list(net.loss_history),
            "retrain_errors": retrain_errors}

    if val_segments is not None:
        val_segments = list(val_segments)
        val_labels = np.array([bool(s.label) for s in val_segments])
        val_scores = model.score_batch(val_segments)
        curve = roc_curve(val_scores, val_labels)
        info["val_auc"] = curve.auc
        if settings.target_fpr is not None:
            model = model.with_threshold(choose_threshold(curve, settings.target_fpr))
    if settings.t_score is not None:
        model = model.with_threshold(settings.t_score)
    info["t_score"] = model.t_score
    return model, info


def model_size_sweep(layer_counts, train_segments, val_segments,
                     settings: TrainSettings = TrainSettings()) -> list[tuple[int, float]]:
    """Train per layer count and report validation AUC; deterministic per seed."""
    from dataclasses import replace

    rows = []
    for layers in layer_counts:
        local = replace(settings, num_conv_layers=int(layers), channels_per_layer=None)
        try:
            _, info = train_sensor_model(train_segments, local, val_segments)
        except Exception as exc:
            raise type(exc)(f"layer count {layers}: {exc}") from exc
        rows.append((int(layers), float(info["val_auc"])))
    return rows
