"""Dataset ingestion (UrbanSound8K layout), splits, oversampling, synthetic audio."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ManifestError
from .frontend import AudioSegment, write_wav

DEFAULT_POSITIVE_CLASS = "gun_shot"
REQUIRED_COLUMNS = ("slice_file_name", "fold", "classID", "class")


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    fold: int
    class_name: str
    aoi: bool


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry]
    positive_class: str = DEFAULT_POSITIVE_CLASS
    warnings: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class SplitPlan:
    train_folds: frozenset[int] = frozenset(range(1, 9))
    val_folds: frozenset[int] = frozenset({9})
    test_folds: frozenset[int] = frozenset({10})
    oversample_to_ratio: float = 0.5

    def __post_init__(self):
        sets = [frozenset(self.train_folds), frozenset(self.val_folds),
                frozenset(self.test_folds)]
        object.__setattr__(self, "train_folds", sets[0])
        object.__setattr__(self, "val_folds", sets[1])
        object.__setattr__(self, "test_folds", sets[2])
        if any(not s for s in sets):
            raise ValueError("every fold set must be nonempty")
        if sets[0] & sets[1] or sets[0] & sets[2] or sets[1] & sets[2]:
            raise ValueError("fold sets must be disjoint")


def load_manifest(csv_path, audio_root,
                  positive_class: str = DEFAULT_POSITIVE_CLASS) -> DatasetManifest:
    """Parse an UrbanSound8K-style metadata CSV.

    Malformed rows are skipped and reported (with line numbers) in
    ``manifest.warnings``; missing columns, unreadable files, and an empty
    result are hard errors.
    """
    if not os.path.exists(csv_path):
        raise ManifestError(f"manifest CSV not found: {csv_path}")
    entries = []
    warnings = []
    with open(csv_path, newline="") as f:
        reader = csv.DictReader(f)
        missing = [c for c in REQUIRED_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise ManifestError(f"{csv_path}: missing columns {missing}")
        for lineno, row in enumerate(reader, start=2):
            try:
                name = row["slice_file_name"].strip()
                fold = int(row["fold"])
                class_name = row["class"].strip()
                if not name or not class_name:
                    raise ValueError("empty field")
            except (ValueError, AttributeError, TypeError) as exc:
                warnings.append(f"line {lineno}: skipped malformed row ({exc})")
                continue
            path = os.path.join(audio_root, "audio", f"fold{fold}", name)
            if not os.path.exists(path):
                raise ManifestError(f"line {lineno}: referenced file missing: {path}")
            entries.append(ManifestEntry(path=path, fold=fold, class_name=class_name,
                                         aoi=class_name == positive_class))
    if not entries:
        raise ManifestError(f"{csv_path}: no usable entries")
    return DatasetManifest(entries=entries, positive_class=positive_class,
                           warnings=warnings)


def split_manifest(manifest: DatasetManifest, plan: SplitPlan):
    """(train, val, test) entry lists by fold assignment."""
    train = [e for e in manifest.entries if e.fold in plan.train_folds]
    val = [e for e in manifest.entries if e.fold in plan.val_folds]
    test = [e for e in manifest.entries if e.fold in plan.test_folds]
    return train, val, test


def oversample(entries, target_ratio: float, seed: int = 0, is_positive=None):
    """Duplicate random positives (with replacement) until their fraction
    reaches ``target_ratio``.  Originals are always retained.
    """
    if not 0.0 < target_ratio < 1.0:
        raise ValueError("target_ratio must be in (0, 1)")
    if is_positive is None:
        is_positive = lambda e: e.aoi
    entries = list(entries)
    positives = [e for e in entries if is_positive(e)]
    if not positives:
        raise ManifestError("cannot oversample: no positive entries")
    rng = np.random.default_rng(seed)
    n_pos = len(positives)
    n_total = len(entries)
    out = list(entries)
    while n_pos / n_total < target_ratio:
        out.append(positives[rng.integers(len(positives))])
        n_pos += 1
        n_total += 1
    return out


def _colored_noise(rng: np.random.Generator, n: int, smooth: float, level: float) -> np.ndarray:
    """First-order-lowpassed white noise: a 1/f-ish background texture."""
    from scipy.signal import lfilter

    white = rng.standard_normal(n)
    noise = lfilter([1.0 - smooth], [1.0, -smooth], white)
    rms = np.sqrt(np.mean(noise ** 2)) or 1.0
    return noise / rms * level


def _transient_burst(rng: np.random.Generator, n: int, sample_rate: int,
                     carrier_hz: float, amplitude: float) -> np.ndarray:
    """Impulse train with exponential decay and a carrier, randomized onset."""
    burst = np.zeros(n)
    onset = int(rng.uniform(0.05, 0.55) * n)
    tau = 0.015 * sample_rate
    n_impulses = int(rng.integers(2, 5))
    spacing = int(0.02 * sample_rate)
    for k in range(n_impulses):
        start = onset + k * spacing
        if start >= n:
            break
        length = min(n - start, int(6 * tau))
        t = np.arange(length)
        decay = np.exp(-t / tau)
        phase = rng.uniform(0, 2 * np.pi)
        burst[start:start + length] += (amplitude * (0.6 ** k) * decay
                                        * np.sin(2 * np.pi * carrier_hz * t / sample_rate + phase))
    return burst


def synth_segment(rng: np.random.Generator, aoi: bool, sample_rate: int = 22_050,
                  segment_seconds: float = 1.0, carrier_hz: float = 3500.0,
                  source_id: str = "", amplitude: float = 0.5) -> AudioSegment:
    n = int(round(sample_rate * segment_seconds))
    smooth = rng.uniform(0.9, 0.98)
    samples = _colored_noise(rng, n, smooth, level=0.05)
    if aoi:
        samples = samples + _transient_burst(rng, n, sample_rate, carrier_hz,
                                             amplitude=amplitude)
    samples = np.clip(samples, -1.0, 1.0)
    return AudioSegment(samples=samples, sample_rate=sample_rate, label=aoi,
                        source_id=source_id)


def synth_dataset(n_segments: int, p_aoi: float, seed: int = 0,
                  sample_rate: int = 22_050, segment_seconds: float = 1.0,
                  carrier_hz: float = 3500.0, amplitude: float = 0.5,
                  drift_at: Optional[int] = None,
                  drift_carrier_hz: float = 1200.0,
                  drift_amplitude: Optional[float] = None) -> list[AudioSegment]:
    """Desk-scale synthetic substitute: colored-noise negatives, transient-burst
    positives with exact labels.  With ``drift_at`` set, positives from that
    index on carry a shifted spectral signature; ``drift_amplitude`` optionally
    attenuates the drifted bursts as well, for drifts that must defeat an
    energy-keying detector.
    """
    if n_segments < 1:
        raise ValueError("n_segments must be >= 1")
    rng = np.random.default_rng(seed)
    segments = []
    for i in range(n_segments):
        aoi = bool(rng.random() < p_aoi)
        carrier, amp = carrier_hz, amplitude
        if drift_at is not None and i >= drift_at:
            carrier = drift_carrier_hz
            if drift_amplitude is not None:
                amp = drift_amplitude
        segments.append(synth_segment(rng, aoi, sample_rate, segment_seconds,
                                      carrier, source_id=f"synth-{seed}-{i}",
                                      amplitude=amp))
    return segments


def write_synth_dataset(root, n_segments: int, p_aoi: float, seed: int = 0,
                        sample_rate: int = 22_050, segment_seconds: float = 1.0,
                        positive_class: str = DEFAULT_POSITIVE_CLASS) -> str:
    """Materialize a synthetic dataset in the UrbanSound8K directory layout.

    Returns the path of the metadata CSV.  Folds are assigned round-robin so
    every fold carries both classes at realistic sizes.
    """
    segments = synth_dataset(n_segments, p_aoi, seed, sample_rate, segment_seconds)
    os.makedirs(root, exist_ok=True)
    csv_path = os.path.join(root, "metadata.csv")
    rows = []
    for i, seg in enumerate(segments):
        fold = i % 10 + 1
        name = f"synth_{seed}_{i:05d}.wav"
        fold_dir = os.path.join(root, "audio", f"fold{fold}")
        os.makedirs(fold_dir, exist_ok=True)
        write_wav(os.path.join(fold_dir, name), seg.samples, sample_rate)
        class_name = positive_class if seg.label else "background"
        rows.append({"slice_file_name": name, "fold": fold,
                     "classID": 1 if seg.label else 0, "class": class_name})
    with open(csv_path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(REQUIRED_COLUMNS))
        writer.writeheader()
        writer.writerows(rows)
    return csv_path
