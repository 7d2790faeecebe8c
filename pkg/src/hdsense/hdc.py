"""Hyperdimensional computing core: algebra, nonlinear encoding, class models.

Hypervectors are plain 1-D float64 numpy arrays.  All operations are pure;
model-updating functions return a new ``ClassModel`` so a serving model can be
replaced by a single atomic reference swap.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionMismatchError, TrainingError, ZeroNormError

DEFAULT_DIM = 10_000
DEFAULT_ALPHA = 0.05

POSITIVE = 1
NEGATIVE = 0


def as_hypervector(h) -> np.ndarray:
    """Coerce to a 1-D float64 array and reject non-finite components."""
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 1:
        raise ValueError(f"hypervector must be 1-D, got shape {h.shape}")
    if not np.all(np.isfinite(h)):
        raise ValueError("hypervector contains NaN or Inf components")
    return h


def _check_same_dim(a: np.ndarray, b: np.ndarray, context: str) -> None:
    if a.shape[0] != b.shape[0]:
        raise DimensionMismatchError(a.shape[0], b.shape[0], context)


def bundle(a, b) -> np.ndarray:
    """Element-wise addition (the HDC memorization operator)."""
    a = as_hypervector(a)
    b = as_hypervector(b)
    _check_same_dim(a, b, "bundle")
    return a + b


def bind(a, b) -> np.ndarray:
    """Element-wise multiplication; preserves pairwise similarities."""
    a = as_hypervector(a)
    b = as_hypervector(b)
    _check_same_dim(a, b, "bind")
    return a * b


def permute(h, k: int) -> np.ndarray:
    """Cyclic rotation by k positions: result[i] = h[(i - k) mod D]."""
    h = as_hypervector(h)
    return np.roll(h, int(k) % h.shape[0])


def similarity(a, b) -> float:
    """Cosine similarity, in [-1, 1]."""
    a = as_hypervector(a)
    b = as_hypervector(b)
    _check_same_dim(a, b, "similarity")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ZeroNormError("cosine similarity is undefined for a zero vector")
    return float(np.dot(a, b) / (na * nb))


def random_bipolar(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Random hypervector with components drawn uniformly from {-1, +1}."""
    return rng.integers(0, 2, size=dim).astype(np.float64) * 2.0 - 1.0


@dataclass(frozen=True)
class EncoderParams:
    """Random nonlinear projection from feature space into hypervector space.

    ``projection`` is an (m, D) matrix of i.i.d. standard normals and
    ``phases`` a length-D vector uniform on [0, 2*pi); both are fully
    determined by ``seed`` so only the seed needs to be persisted.
    """

    feature_dim: int
    dim: int
    projection: np.ndarray
    phases: np.ndarray
    seed: int

    @classmethod
    def create(cls, feature_dim: int, dim: int = DEFAULT_DIM, seed: int = 0) -> "EncoderParams":
        if feature_dim < 1 or dim < 1:
            raise ValueError("feature_dim and dim must be positive")
        rng = np.random.default_rng(seed)
        projection = rng.standard_normal((feature_dim, dim))
        phases = rng.uniform(0.0, 2.0 * np.pi, size=dim)
        return cls(feature_dim=feature_dim, dim=dim, projection=projection,
                   phases=phases, seed=int(seed))


def encode(x, enc: EncoderParams) -> np.ndarray:
    """Map a feature vector to a hypervector via cos/sin of random projections.

    h[i] = cos(<f_i, x> + b_i) * sin(<f_i, x>), so encode(0) == 0 and nearby
    inputs map to similar hypervectors.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != enc.feature_dim:
        raise DimensionMismatchError(x.shape, (enc.feature_dim,), "encode")
    if not np.all(np.isfinite(x)):
        raise ValueError("feature vector contains NaN or Inf")
    z = x @ enc.projection
    return np.cos(z + enc.phases) * np.sin(z)


def encode_batch(xs: np.ndarray, enc: EncoderParams) -> np.ndarray:
    """Vectorized encode for an (n, m) feature matrix; returns (n, D)."""
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 2 or xs.shape[1] != enc.feature_dim:
        raise DimensionMismatchError(xs.shape, ("n", enc.feature_dim), "encode_batch")
    z = xs @ enc.projection
    return np.cos(z + enc.phases[None, :]) * np.sin(z)


@dataclass(frozen=True)
class ClassModel:
    """Binary HDC classifier head: positive/negative class hypervectors.

    Immutable; update functions return a fresh model suitable for an atomic
    swap of the serving reference.
    """

    c_pos: np.ndarray
    c_neg: np.ndarray
    alpha: float = DEFAULT_ALPHA
    t_score: float = 0.0

    def __post_init__(self):
        if self.c_pos.shape != self.c_neg.shape:
            raise DimensionMismatchError(self.c_pos.shape[0], self.c_neg.shape[0],
                                         "class hypervectors")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if not -1.0 <= self.t_score <= 1.0:
            raise ValueError("t_score must lie in [-1, 1]")

    @property
    def dim(self) -> int:
        return self.c_pos.shape[0]

    def with_threshold(self, t_score: float) -> "ClassModel":
        return replace(self, t_score=float(t_score))


def train_initial(samples, alpha: float = DEFAULT_ALPHA, t_score: float = 0.0) -> ClassModel:
    """Bundle per-class hypervectors into initial class hypervectors.

    ``samples`` is an iterable of (hypervector, label) with label in
    {POSITIVE, NEGATIVE}.  Both classes must be present.
    """
    pos_sum = None
    neg_sum = None
    for h, label in samples:
        h = as_hypervector(h)
        if label == POSITIVE:
            pos_sum = h.copy() if pos_sum is None else pos_sum + h
        else:
            neg_sum = h.copy() if neg_sum is None else neg_sum + h
    if pos_sum is None or neg_sum is None:
        missing = "positive" if pos_sum is None else "negative"
        raise TrainingError(f"cannot build class hypervectors: no {missing} samples")
    return ClassModel(c_pos=pos_sum, c_neg=neg_sum, alpha=alpha, t_score=t_score)


def score(model: ClassModel, h, margin: bool = False) -> float:
    """Similarity of h to the positive class hypervector.

    With ``margin=True`` returns sim(h, c_pos) - sim(h, c_neg) instead
    (experimental alternative; the deployed decision uses the default).
    """
    h = as_hypervector(h)
    s = similarity(h, model.c_pos)
    if margin:
        s -= similarity(h, model.c_neg)
    return s


def classify(model: ClassModel, h) -> bool:
    """True iff score exceeds the threshold strictly (ties classify negative)."""
    return score(model, h) > model.t_score


def retrain_epoch(model: ClassModel, samples) -> tuple[ClassModel, int]:
    """One perceptron-style pass: misclassified samples pull their true class
    hypervector toward them and push the predicted class away, scaled by alpha.

    Updates apply sequentially in sample order.  Returns the updated model and
    the number of misclassifications encountered.
    """
    c_pos = model.c_pos.copy()
    c_neg = model.c_neg.copy()
    errors = 0
    for h, label in samples:
        h = as_hypervector(h)
        _check_same_dim(h, c_pos, "retrain_epoch")
        current = ClassModel(c_pos=c_pos, c_neg=c_neg, alpha=model.alpha,
                             t_score=model.t_score)
        predicted = POSITIVE if classify(current, h) else NEGATIVE
        if predicted == label:
            continue
        errors += 1
        if label == POSITIVE:
            c_pos = c_pos + model.alpha * h
            c_neg = c_neg - model.alpha * h
        else:
            c_neg = c_neg + model.alpha * h
            c_pos = c_pos - model.alpha * h
    return ClassModel(c_pos=c_pos, c_neg=c_neg, alpha=model.alpha,
                      t_score=model.t_score), errors


def retrain(model: ClassModel, samples, max_epochs: int = 20) -> tuple[ClassModel, list[int]]:
    """Repeat retrain_epoch until error-free or max_epochs; returns the error history."""
    history = []
    samples = list(samples)
    for _ in range(max_epochs):
        model, errors = retrain_epoch(model, samples)
        history.append(errors)
        if errors == 0:
            break
    return model, history


def save_class_model(path, model: ClassModel, encoder: EncoderParams) -> None:
    """Persist the classifier head plus the encoder seed (parameters regenerate)."""
    from .container import save_container

    meta = {"kind": "class_model", "alpha": model.alpha, "t_score": model.t_score,
            "encoder_seed": encoder.seed, "encoder_feature_dim": encoder.feature_dim,
            "encoder_dim": encoder.dim}
    save_container(path, meta, {"c_pos": model.c_pos, "c_neg": model.c_neg})


def load_class_model(path) -> tuple[ClassModel, EncoderParams]:
    from .container import load_container

    meta, arrays = load_container(path)
    if meta.get("kind") != "class_model":
        raise ValueError(f"{path}: not a class model container")
    encoder = EncoderParams.create(meta["encoder_feature_dim"], meta["encoder_dim"],
                                   meta["encoder_seed"])
    model = ClassModel(c_pos=arrays["c_pos"], c_neg=arrays["c_neg"],
                       alpha=meta["alpha"], t_score=meta["t_score"])
    return model, encoder


def online_update(model: ClassModel, feedback) -> ClassModel:
    """Apply the retrain update rule to cloud-identified feedback items.

    Items the current model already classifies correctly are skipped, so
    redundant feedback is harmless.  Returns a new model for atomic swap.
    """
    updated, _ = retrain_epoch(model, feedback)
    return updated
