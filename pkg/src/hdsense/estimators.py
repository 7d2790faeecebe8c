"""Scikit-learn-compatible wrappers so the pipeline composes with the ecosystem.

Typical composition::

    make_pipeline(SpectrogramTransformer(), ConvFeatureExtractor(num_conv_layers=3),
                  HDCClassifier(dim=10_000))
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import hdc
from .convnet import ConvNet, ConvNetConfig, extract_features_batch, train_offline
from .frontend import DEFAULT_FRAME_SIZE, DEFAULT_HOP, AudioSegment, stft_spectrogram


def _check_features(X):
    return check_array(X, dtype=np.float64, ensure_2d=True)


class SpectrogramTransformer(BaseEstimator, TransformerMixin):
    """Stateless transformer: raw waveforms/segments -> normalized spectrograms."""

    def __init__(self, frame_size=DEFAULT_FRAME_SIZE, hop=DEFAULT_HOP, sample_rate=22_050):
        self.frame_size = frame_size
        self.hop = hop
        self.sample_rate = sample_rate

    def fit(self, X, y=None):
        return self

    def transform(self, X, y=None):
        specs = []
        for item in X:
            samples = item.samples if isinstance(item, AudioSegment) else np.asarray(item)
            specs.append(stft_spectrogram(samples, frame_size=self.frame_size,
                                          hop=self.hop).values)
        return np.stack(specs)


class ConvFeatureExtractor(BaseEstimator, TransformerMixin):
    """Trains the small CNN on spectrogram arrays; transform yields features."""

    def __init__(self, num_conv_layers=3, channels_per_layer=None, epochs=10,
                 lr=0.01, batch_size=32, seed=0):
        self.num_conv_layers = num_conv_layers
        self.channels_per_layer = channels_per_layer
        self.epochs = epochs
        self.lr = lr
        self.batch_size = batch_size
        self.seed = seed

    def _config(self) -> ConvNetConfig:
        if self.channels_per_layer is not None:
            return ConvNetConfig(num_conv_layers=self.num_conv_layers,
                                 channels_per_layer=tuple(self.channels_per_layer),
                                 seed=self.seed)
        return ConvNetConfig.default(self.num_conv_layers, seed=self.seed)

    def fit(self, X, y):
        X = check_array(X, dtype=np.float64, allow_nd=True)
        if X.ndim != 3:
            raise ValueError(f"expected (n_samples, n_frames, n_bins), got shape {X.shape}")
        y = np.asarray(y, dtype=float)
        self.net_ = ConvNet(self._config())
        train_offline(self.net_, list(X), y, epochs=self.epochs, lr=self.lr,
                      batch_size=self.batch_size, seed=self.seed)
        return self

    def transform(self, X, y=None):
        check_is_fitted(self, "net_")
        X = check_array(X, dtype=np.float64, allow_nd=True)
        return extract_features_batch(self.net_, list(X))


class HDCClassifier(BaseEstimator, ClassifierMixin):
    """Binary hyperdimensional classifier over feature vectors.

    fit() standardizes the features, encodes them into hypervectors, bundles
    per-class hypervectors, and sharpens them with perceptron-style retraining.
    decision_function() returns similarity to the positive class hypervector;
    predict() applies the strict threshold.  partial_fit() applies the online
    feedback update to an already-fitted model.
    """

    def __init__(self, dim=hdc.DEFAULT_DIM, alpha=hdc.DEFAULT_ALPHA, t_score=0.0,
                 retrain_epochs=20, seed=0, standardize=True):
        self.dim = dim
        self.alpha = alpha
        self.t_score = t_score
        self.retrain_epochs = retrain_epochs
        self.seed = seed
        self.standardize = standardize

    def _encode(self, X):
        X = _check_features(X)
        if self.standardize:
            X = (X - self.mean_) / self.std_
        return hdc.encode_batch(X, self.encoder_)

    def fit(self, X, y):
        X = _check_features(X)
        y = np.asarray(y).astype(bool)
        if X.shape[0] != y.shape[0]:
            raise ValueError("X and y length mismatch")
        self.classes_ = np.array([0, 1])
        if self.standardize:
            self.mean_ = X.mean(axis=0)
            std = X.std(axis=0)
            self.std_ = np.where(std < 1e-8, 1.0, std)
        self.encoder_ = hdc.EncoderParams.create(X.shape[1], self.dim, self.seed)
        hvs = self._encode(X)
        samples = [(hvs[i], hdc.POSITIVE if y[i] else hdc.NEGATIVE)
                   for i in range(len(y))]
        model = hdc.train_initial(samples, alpha=self.alpha, t_score=self.t_score)
        self.model_, self.retrain_errors_ = hdc.retrain(model, samples,
                                                        max_epochs=self.retrain_epochs)
        return self

    def partial_fit(self, X, y):
        """Online feedback update; requires a prior fit()."""
        check_is_fitted(self, "model_")
        y = np.asarray(y).astype(bool)
        hvs = self._encode(X)
        feedback = [(hvs[i], hdc.POSITIVE if y[i] else hdc.NEGATIVE)
                    for i in range(len(y))]
        self.model_ = hdc.online_update(self.model_, feedback)
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        hvs = self._encode(X)
        c_pos = self.model_.c_pos
        norms = np.linalg.norm(hvs, axis=1) * np.linalg.norm(c_pos)
        return hvs @ c_pos / norms

    def predict(self, X):
        return (self.decision_function(X) > self.model_.t_score).astype(int)
