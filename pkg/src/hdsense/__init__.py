"""Near-sensor audio-of-interest detection: HDC classifier, selective
transmission pipeline, and energy accounting."""

from . import data, energy, evaluation, frontend, hdc, pipeline, quantization, training
from .convnet import ConvNet, ConvNetConfig
from .estimators import ConvFeatureExtractor, HDCClassifier, SpectrogramTransformer
from .model import SensorModel

__version__ = "0.1.0"

__all__ = [
    "ConvFeatureExtractor",
    "ConvNet",
    "ConvNetConfig",
    "HDCClassifier",
    "SensorModel",
    "SpectrogramTransformer",
    "data",
    "energy",
    "evaluation",
    "frontend",
    "hdc",
    "pipeline",
    "quantization",
    "training",
]
