"""Audio frontend: WAV decoding, resampling, segmentation, FFT spectrograms."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
import scipy.io.wavfile

from .errors import UnsupportedCodecError, WavFormatError

DEFAULT_SAMPLE_RATE = 22_050
DEFAULT_SEGMENT_SECONDS = 4.0
DEFAULT_FRAME_SIZE = 1024
DEFAULT_HOP = 512


@dataclass(frozen=True)
class AudioSegment:
    """Fixed-length mono clip; the unit of buffering and classification."""

    samples: np.ndarray
    sample_rate: int
    label: Optional[bool] = None  # True = audio of interest
    source_id: str = ""

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if not np.all(np.isfinite(samples)):
            raise ValueError("audio samples contain NaN or Inf")
        if samples.size and (samples.min() < -1.0 or samples.max() > 1.0):
            raise ValueError("audio samples outside [-1, 1]")
        object.__setattr__(self, "samples", samples)


@dataclass(frozen=True)
class Spectrogram:
    """Time x frequency magnitude matrix (rows = frames, cols = bins)."""

    values: np.ndarray
    frame_size: int
    hop: int
    normalized: bool = False

    @property
    def shape(self):
        return self.values.shape


def load_wav(path) -> tuple[np.ndarray, int]:
    """Read a PCM16/PCM32/float WAV; returns (mono samples in [-1,1], rate)."""
    try:
        rate, data = scipy.io.wavfile.read(path)
    except FileNotFoundError:
        raise
    except ValueError as exc:
        raise WavFormatError(f"{path}: {exc}") from exc
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise UnsupportedCodecError(f"{path}: unsupported sample format {data.dtype}")
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    return np.clip(samples, -1.0, 1.0), int(rate)


def write_wav(path, samples, sample_rate: int) -> None:
    """Write mono float samples in [-1,1] as PCM16."""
    pcm = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    scipy.io.wavfile.write(path, int(sample_rate), (pcm * 32767.0).astype(np.int16))


def resample_linear(samples, from_rate: int, to_rate: int) -> np.ndarray:
    """Linear-interpolation resampling; identity when the rates match."""
    if from_rate <= 0 or to_rate <= 0:
        raise ValueError("sample rates must be positive")
    samples = np.asarray(samples, dtype=np.float64)
    if from_rate == to_rate or samples.size == 0:
        return samples.copy()
    out_len = int(round(samples.size * to_rate / from_rate))
    src_t = np.arange(samples.size) / from_rate
    dst_t = np.arange(out_len) / to_rate
    return np.interp(dst_t, src_t, samples)


def segment(samples, sample_rate: int, segment_seconds: float = DEFAULT_SEGMENT_SECONDS,
            label: Optional[bool] = None, source_id: str = "") -> list[AudioSegment]:
    """Split into consecutive fixed-length clips, zero-padding the last one."""
    if segment_seconds <= 0:
        raise ValueError("segment_seconds must be positive")
    samples = np.asarray(samples, dtype=np.float64)
    seg_len = int(round(sample_rate * segment_seconds))
    out = []
    for start in range(0, samples.size, seg_len):
        chunk = samples[start:start + seg_len]
        if chunk.size < seg_len:
            chunk = np.pad(chunk, (0, seg_len - chunk.size))
        sid = f"{source_id}#{start // seg_len}" if source_id else str(start // seg_len)
        out.append(AudioSegment(samples=chunk, sample_rate=sample_rate,
                                label=label, source_id=sid))
    return out


@lru_cache(maxsize=None)
def _bit_reversal(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    rev = np.zeros(n, dtype=np.intp)
    for i in range(n):
        r = 0
        x = i
        for _ in range(bits):
            r = (r << 1) | (x & 1)
            x >>= 1
        rev[i] = r
    return rev


def fft_radix2(frames) -> np.ndarray:
    """Iterative radix-2 Cooley-Tukey FFT over the last axis.

    Accepts any leading batch shape; the last axis length must be a power of
    two.  Returns the full complex two-sided spectrum.
    """
    a = np.asarray(frames)
    n = a.shape[-1]
    if n == 0 or n & (n - 1):
        raise ValueError(f"FFT length must be a power of two, got {n}")
    a = a[..., _bit_reversal(n)].astype(np.complex128)
    size = 2
    while size <= n:
        half = size // 2
        twiddle = np.exp(-2j * np.pi * np.arange(half) / size)
        shaped = a.reshape(*a.shape[:-1], n // size, size)
        even = shaped[..., :half]
        odd = shaped[..., half:] * twiddle
        a = np.concatenate([even + odd, even - odd], axis=-1).reshape(a.shape)
        size *= 2
    return a


def dft_magnitude(frame) -> np.ndarray:
    """One-sided magnitude spectrum (length N/2 + 1) of a power-of-two frame."""
    frame = np.asarray(frame, dtype=np.float64)
    n = frame.shape[-1]
    spectrum = fft_radix2(frame)
    return np.abs(spectrum[..., : n // 2 + 1])


def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window."""
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(n) / n))


def stft_spectrogram(seg, frame_size: int = DEFAULT_FRAME_SIZE, hop: int = DEFAULT_HOP) -> Spectrogram:
    """Hann-windowed STFT magnitudes, log-compressed and globally normalized.

    Each frame's one-sided magnitude spectrum goes through ln(1 + v), then the
    whole matrix is shifted/scaled to zero mean and unit variance.  A constant
    raw spectrogram (e.g. silence) maps to all zeros.
    """
    samples = seg.samples if isinstance(seg, AudioSegment) else np.asarray(seg, dtype=np.float64)
    if frame_size & (frame_size - 1) or frame_size == 0:
        raise ValueError(f"frame_size must be a power of two, got {frame_size}")
    if hop <= 0 or hop > frame_size:
        raise ValueError("hop must satisfy 0 < hop <= frame_size")
    if samples.size < frame_size:
        raise ValueError(f"segment of {samples.size} samples is shorter than one "
                         f"frame ({frame_size})")
    n_frames = (samples.size - frame_size) // hop + 1
    idx = np.arange(frame_size)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = samples[idx] * hann_window(frame_size)[None, :]
    mags = dft_magnitude(frames)
    values = np.log1p(mags)
    std = values.std()
    if std < 1e-12:
        values = np.zeros_like(values)
    else:
        values = (values - values.mean()) / std
    return Spectrogram(values=values, frame_size=frame_size, hop=hop, normalized=True)
