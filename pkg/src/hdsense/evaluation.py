"""ROC/AUC and F1 metrics, threshold selection, baselines, online-learning harness."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from sklearn.neural_network import MLPClassifier

from . import hdc
from .model import SensorModel
from .pipeline import PipelineConfig, RingBuffer, TransmissionLog, step


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @classmethod
    def from_predictions(cls, predicted, actual) -> "ConfusionCounts":
        predicted = np.asarray(predicted, dtype=bool)
        actual = np.asarray(actual, dtype=bool)
        if predicted.shape != actual.shape:
            raise ValueError("prediction/label length mismatch")
        return cls(tp=int(np.sum(predicted & actual)),
                   fp=int(np.sum(predicted & ~actual)),
                   tn=int(np.sum(~predicted & ~actual)),
                   fn=int(np.sum(~predicted & actual)))


def f1_score(c: ConfusionCounts) -> float:
    denom = 2 * c.tp + c.fp + c.fn
    if denom == 0:
        raise ValueError("F1 undefined: no positives predicted or present")
    return 2 * c.tp / denom


@dataclass(frozen=True)
class RocCurve:
    """Points ordered by descending threshold; prediction rule is score >= threshold.

    The leading +inf threshold contributes the (0, 0) endpoint and the lowest
    distinct score contributes (1, 1).
    """

    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float

    def write_csv(self, path, config_hash: str = "") -> None:
        with open(path, "w", newline="") as f:
            if config_hash:
                f.write(f"# config_hash={config_hash}\n")
            writer = csv.writer(f)
            writer.writerow(["threshold", "fpr", "tpr"])
            for t, fp, tp in zip(self.thresholds, self.fpr, self.tpr):
                writer.writerow([f"{t:.6f}", f"{fp:.6f}", f"{tp:.6f}"])


def roc_curve(scores, labels) -> RocCurve:
    """ROC by descending-score sweep with a threshold at every distinct score."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    n_pos = int(labels.sum())
    n_neg = int((~labels).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs at least one positive and one negative sample")
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    cum_tp = np.cumsum(sorted_labels)
    cum_fp = np.cumsum(~sorted_labels)
    # last index of each run of equal scores = counts with score >= that value
    distinct_mask = np.append(sorted_scores[1:] != sorted_scores[:-1], True)
    thresholds = np.concatenate(([np.inf], sorted_scores[distinct_mask]))
    tpr = np.concatenate(([0.0], cum_tp[distinct_mask] / n_pos))
    fpr = np.concatenate(([0.0], cum_fp[distinct_mask] / n_neg))
    auc = float(np.trapezoid(tpr, fpr))
    return RocCurve(thresholds=thresholds, fpr=fpr, tpr=tpr, auc=auc)


def choose_threshold(curve: RocCurve, target_fpr: float) -> float:
    """Best-TPR threshold whose FPR stays within the budget.

    Among points with fpr <= target_fpr, picks the maximum tpr; ties resolve
    to the largest (most conservative) threshold.
    """
    if not 0.0 <= target_fpr <= 1.0:
        raise ValueError("target_fpr must be in [0, 1]")
    ok = curve.fpr <= target_fpr
    best_tpr = curve.tpr[ok].max()
    candidates = ok & (curve.tpr == best_tpr)
    idx = np.argmax(candidates)  # first in descending-threshold order = largest
    t = curve.thresholds[idx]
    if not np.isfinite(t):
        # no finite threshold fits the budget: sit just above the top score
        t = np.nextafter(curve.thresholds[1], np.inf)
    return float(t)


def auc_score(scores, labels) -> float:
    return roc_curve(scores, labels).auc


@dataclass
class MlpBaseline:
    """Frozen one-hidden-layer reference classifier on extracted CNN features."""

    hidden_dim: int = 32
    epochs: int = 200
    seed: int = 0
    clf: MLPClassifier = field(init=False, default=None)

    def fit(self, features, labels) -> "MlpBaseline":
        self.clf = MLPClassifier(hidden_layer_sizes=(self.hidden_dim,),
                                 max_iter=self.epochs, random_state=self.seed)
        self.clf.fit(np.asarray(features), np.asarray(labels, dtype=int))
        return self

    def scores(self, features) -> np.ndarray:
        return self.clf.predict_proba(np.asarray(features))[:, 1]

    def predict(self, features) -> np.ndarray:
        return self.clf.predict(np.asarray(features)).astype(bool)


def rolling_f1(predictions, labels, window: int = 100) -> list[tuple[int, float]]:
    """F1 over a trailing window at each stream position (nan-safe -> 0.0)."""
    out = []
    predictions = list(predictions)
    labels = list(labels)
    for i in range(len(predictions)):
        lo = max(0, i + 1 - window)
        c = ConfusionCounts.from_predictions(predictions[lo:i + 1], labels[lo:i + 1])
        denom = 2 * c.tp + c.fp + c.fn
        out.append((i, 2 * c.tp / denom if denom else 0.0))
    return out


@dataclass
class OnlineRunResult:
    predictions: list[bool]
    labels: list[bool]
    f1_series: list[tuple[int, float]]
    feedback_rounds: int
    feedback_items: int
    model: SensorModel
    log: TransmissionLog

    def f1_over(self, start: int, end: int = None) -> float:
        c = ConfusionCounts.from_predictions(self.predictions[start:end],
                                             self.labels[start:end])
        denom = 2 * c.tp + c.fp + c.fn
        return 2 * c.tp / denom if denom else 0.0


def online_learning_experiment(model: SensorModel, segments,
                               feedback_period: int = 100,
                               feedback_budget: int = 20,
                               buffer_capacity: int = 4,
                               window: int = 100) -> OnlineRunResult:
    """Stream with periodic cloud feedback on transmitted segments.

    The simulated cloud is an infallible labeler but only ever sees segments
    that were actually delivered, so undelivered false negatives stay
    invisible to online learning.  Every ``feedback_period`` segments it flags
    up to ``feedback_budget`` misclassified delivered segments; their encoded
    hypervectors and true labels drive an atomic class-model swap.
    """
    segments = list(segments)
    # CNN and encoder are frozen during deployment, so hypervectors can be
    # computed up front; only the class hypervectors evolve.
    hypervectors = hdc.encode_batch(model.features_batch(segments), model.encoder)
    classifier = model.classifier
    buf = RingBuffer(buffer_capacity)
    log = TransmissionLog()
    predictions: list[bool] = []
    labels = [bool(s.label) for s in segments]
    seen_by_cloud: set[int] = set()
    rounds = 0
    items = 0
    for i, seg in enumerate(segments):
        cfg = PipelineConfig(scorer=lambda _s, _i=i: hdc.score(classifier, hypervectors[_i]),
                             buffer_capacity=buffer_capacity,
                             t_score=classifier.t_score, dedupe=True)
        event = step(cfg, buf, i, seg, log)
        predictions.append(event.score > classifier.t_score)
        if feedback_period > 0 and (i + 1) % feedback_period == 0:
            delivered = log.delivered_indices() - seen_by_cloud
            seen_by_cloud |= delivered
            feedback = []
            for j in sorted(delivered):
                if len(feedback) >= feedback_budget:
                    break
                if predictions[j] != labels[j]:
                    feedback.append((hypervectors[j],
                                     hdc.POSITIVE if labels[j] else hdc.NEGATIVE))
            if feedback:
                classifier = hdc.online_update(classifier, feedback)
                rounds += 1
                items += len(feedback)
    delivered = log.delivered_indices()
    for i, seg in enumerate(segments):
        if seg.label is None:
            continue
        sent = i in delivered
        if seg.label:
            log.tp += sent
            log.fn += not sent
        else:
            log.fp += sent
            log.tn += not sent
    return OnlineRunResult(predictions=predictions, labels=labels,
                           f1_series=rolling_f1(predictions, labels, window),
                           feedback_rounds=rounds, feedback_items=items,
                           model=model.with_classifier(classifier), log=log)
