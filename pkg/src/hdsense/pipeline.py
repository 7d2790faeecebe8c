"""Deployed near-sensor loop: FIFO buffer, per-segment scoring, gated transmission.

Each incoming segment is scored on push; if the score clears the threshold the
entire buffer contents are shipped as context.  Classification therefore always
completes before a segment can be evicted.
"""

from __future__ import annotations

import csv
import json
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

from .frontend import AudioSegment


@dataclass
class _Slot:
    index: int
    segment: AudioSegment
    transmitted: bool = False


class RingBuffer:
    """Fixed-capacity FIFO of segments; eviction is strictly oldest-first."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("buffer capacity must be >= 1")
        self.capacity = capacity
        self._slots: deque[_Slot] = deque()

    def __len__(self) -> int:
        return len(self._slots)

    def push(self, index: int, segment: AudioSegment) -> Optional[AudioSegment]:
        """Append a segment; returns the evicted oldest segment if full."""
        evicted = None
        if len(self._slots) == self.capacity:
            evicted = self._slots.popleft().segment
        self._slots.append(_Slot(index=index, segment=segment))
        return evicted

    def contents(self) -> list[_Slot]:
        return list(self._slots)

    def clear(self) -> None:
        self._slots.clear()


@dataclass(frozen=True)
class PipelineConfig:
    """Runtime knobs of the deployed loop.

    ``scorer`` maps an AudioSegment to a real score (frontend -> features ->
    hypervector -> class similarity in the real pipeline; tests may script it).
    ``dedupe`` skips already-transmitted slots on later firings; ``flush``
    empties the buffer after each transmission instead.
    """

    scorer: Callable[[AudioSegment], float]
    buffer_capacity: int = 4
    t_score: float = 0.0
    dedupe: bool = True
    flush: bool = False


@dataclass
class StepEvent:
    segment_index: int
    score: float
    decision: str                      # "transmit" or "hold"
    transmitted_ids: tuple[int, ...]   # segment indices shipped this step


@dataclass
class TransmissionLog:
    events: list[StepEvent] = field(default_factory=list)
    total_count: int = 0
    transmitted_count: int = 0
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def delivered_indices(self) -> set[int]:
        out: set[int] = set()
        for ev in self.events:
            out.update(ev.transmitted_ids)
        return out

    def transmitted_fraction(self) -> float:
        return self.transmitted_count / self.total_count if self.total_count else 0.0

    def quality_loss(self) -> float:
        """Fraction of ground-truth AoI segments never delivered to the cloud."""
        positives = self.tp + self.fn
        return self.fn / positives if positives else 0.0

    def write_csv(self, path, config_hash: str = "") -> None:
        with open(path, "w", newline="") as f:
            if config_hash:
                f.write(f"# config_hash={config_hash}\n")
            writer = csv.writer(f)
            writer.writerow(["segment_index", "score", "decision", "transmitted_ids"])
            for ev in self.events:
                writer.writerow([ev.segment_index, f"{ev.score:.6f}", ev.decision,
                                 " ".join(map(str, ev.transmitted_ids))])

    def summary(self) -> dict:
        return {"total_count": self.total_count,
                "transmitted_count": self.transmitted_count,
                "transmitted_fraction": self.transmitted_fraction(),
                "tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn,
                "quality_loss": self.quality_loss()}

    def write_summary(self, path, config_hash: str = "") -> None:
        payload = self.summary()
        if config_hash:
            payload["config_hash"] = config_hash
        with open(path, "w") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")


def step(cfg: PipelineConfig, buf: RingBuffer, index: int, seg: AudioSegment,
         log: TransmissionLog) -> StepEvent:
    """Push one segment, score it, and fire the buffer if above threshold.

    Ties at the threshold hold, so raising t_score never transmits more.
    """
    buf.push(index, seg)
    try:
        score = float(cfg.scorer(seg))
    except Exception as exc:
        raise type(exc)(f"segment {index}: {exc}") from exc
    if score > cfg.t_score:
        slots = buf.contents()
        if cfg.dedupe:
            to_send = [s for s in slots if not s.transmitted]
        else:
            to_send = slots
        for s in to_send:
            s.transmitted = True
        event = StepEvent(segment_index=index, score=score, decision="transmit",
                          transmitted_ids=tuple(s.index for s in to_send))
        log.transmitted_count += len(to_send)
        if cfg.flush:
            buf.clear()
    else:
        event = StepEvent(segment_index=index, score=score, decision="hold",
                          transmitted_ids=())
    log.events.append(event)
    log.total_count += 1
    return event


def run_stream(cfg: PipelineConfig, segments) -> TransmissionLog:
    """Run the loop over an ordered stream; fills confusion counters from labels.

    A labeled-positive segment counts as tp if it is delivered in any step
    (directly or as buffered context); fn otherwise.  Negatives symmetric.
    """
    buf = RingBuffer(cfg.buffer_capacity)
    log = TransmissionLog()
    segments = list(segments)
    for index, seg in enumerate(segments):
        step(cfg, buf, index, seg, log)
    delivered = log.delivered_indices()
    for index, seg in enumerate(segments):
        if seg.label is None:
            continue
        sent = index in delivered
        if seg.label:
            log.tp += sent
            log.fn += not sent
        else:
            log.fp += sent
            log.tn += not sent
    return log
