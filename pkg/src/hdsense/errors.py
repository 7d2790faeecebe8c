"""Exception types shared across the package."""


class HdsenseError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatchError(HdsenseError, ValueError):
    """Two vectors (or a vector and a model) disagree on dimensionality."""

    def __init__(self, dim_a, dim_b, context=""):
        self.dim_a = dim_a
        self.dim_b = dim_b
        msg = f"dimensionality mismatch: {dim_a} vs {dim_b}"
        if context:
            msg = f"{context}: {msg}"
        super().__init__(msg)


class ZeroNormError(HdsenseError, ValueError):
    """Cosine similarity requested for a zero-norm vector."""


class WavFormatError(HdsenseError, ValueError):
    """WAV file has a malformed RIFF structure."""


class UnsupportedCodecError(HdsenseError, ValueError):
    """WAV file uses a sample format we do not decode."""


class ManifestError(HdsenseError, ValueError):
    """Dataset manifest is missing, empty, or structurally invalid."""


class TrainingError(HdsenseError, RuntimeError):
    """Offline training failed (single-class data, NaN loss, ...)."""


class NotTrainedError(HdsenseError, RuntimeError):
    """An operation requiring a trained model was called on an untrained one."""


class NotCalibratedError(HdsenseError, RuntimeError):
    """Quantized inference requested before activation calibration."""
