"""STEAM metrics: how well detected event timings obey the control signal.

One metric per signal type: ordering error rate, L1 over seconds (duration),
L1 over occurrence counts (frequency), and segment-based F1 (timestamp).
References are ClipMetadata; detections come from an external detector as
per-event (onset, offset) interval lists.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from . import SCHEMA_VERSION
from .intervals import Interval
from .metadata import ClipMetadata, SignalType


class SteamError(Exception):
    pass


class OrderingOutcome(Enum):
    A_PRECEDES_B = "a_precedes_b"
    B_PRECEDES_A = "b_precedes_a"
    SIMULTANEOUS = "simultaneous"
    UNDETECTABLE = "undetectable"

    def flipped(self) -> "OrderingOutcome":
        if self is OrderingOutcome.A_PRECEDES_B:
            return OrderingOutcome.B_PRECEDES_A
        if self is OrderingOutcome.B_PRECEDES_A:
            return OrderingOutcome.A_PRECEDES_B
        return self


@dataclass(frozen=True)
class DetectionSet:
    clip_id: str
    events: dict[str, list[Interval]] = field(default_factory=dict)
    detector_threshold: float = 0.5

    def intervals(self, label: str) -> list[Interval]:
        return sorted(self.events.get(label, []), key=lambda iv: iv.onset)


@dataclass(frozen=True)
class CountPair:
    specified: float
    detected: float

    def __post_init__(self) -> None:
        if self.specified < 0 or self.detected < 0:
            raise ValueError("counts must be non-negative")


@dataclass(frozen=True)
class EvalConfig:
    segment_length: float = 1.0
    frequency_merge_gap: float = 0.1  # detector jitter below this joins occurrences


@dataclass(frozen=True)
class MetricReport:
    signal: SignalType
    n_samples: int
    total_events: int
    error_rate: float | None = None
    l1_second: float | None = None
    l1_freq: float | None = None
    f1_segment: float | None = None

    def metric_items(self) -> list[tuple[str, float]]:
        return [(name, value) for name, value in (
            ("error_rate", self.error_rate),
            ("l1_second", self.l1_second),
            ("l1_freq", self.l1_freq),
            ("f1_segment", self.f1_segment),
        ) if value is not None]


def _merged_span(intervals: list[Interval]) -> Interval:
    return Interval(min(iv.onset for iv in intervals),
                    max(iv.offset for iv in intervals))


def ordering_relation(a: list[Interval], b: list[Interval]) -> OrderingOutcome:
    """Order of two events by merged span (first onset to last offset).

    Span overlap beyond half the shorter span means simultaneous; equal span
    onsets also count as simultaneous. Either list empty is undetectable.
    """
    if not a or not b:
        return OrderingOutcome.UNDETECTABLE
    span_a, span_b = _merged_span(a), _merged_span(b)
    overlap = span_a.intersection_length(span_b)
    shorter = min(span_a.duration(), span_b.duration())
    if overlap > 0.5 * shorter:
        return OrderingOutcome.SIMULTANEOUS
    if span_a.onset == span_b.onset:
        return OrderingOutcome.SIMULTANEOUS
    if span_a.onset < span_b.onset:
        return OrderingOutcome.A_PRECEDES_B
    return OrderingOutcome.B_PRECEDES_A


def _detections_by_clip(refs: list[ClipMetadata],
                        dets: list[DetectionSet]) -> dict[str, DetectionSet]:
    by_id = {d.clip_id: d for d in dets}
    missing = [r.clip_id for r in refs if r.clip_id not in by_id]
    if missing:
        raise SteamError(f"missing detection sets for clips: {missing[:5]}")
    return by_id


def ordering_error_rate(refs: list[ClipMetadata],
                        dets: list[DetectionSet]) -> float:
    """Fraction of clips whose detected event order differs from the reference."""
    if not refs:
        raise SteamError("no reference clips")
    by_id = _detections_by_clip(refs, dets)
    errors = 0
    for ref in refs:
        if ref.signal is not SignalType.ORDERING:
            raise SteamError(f"{ref.clip_id}: not an ordering reference")
        lab_a, lab_b = list(ref.events)[:2]
        expected = ordering_relation(ref.events[lab_a], ref.events[lab_b])
        det = by_id[ref.clip_id]
        got = ordering_relation(det.intervals(lab_a), det.intervals(lab_b))
        if got is OrderingOutcome.UNDETECTABLE or got is not expected:
            errors += 1
    return errors / len(refs)


def l1_metric(pairs: list[CountPair]) -> float:
    """Mean absolute specified/detected difference over all (sample, event) pairs."""
    if not pairs:
        raise SteamError("l1_metric needs at least one pair")
    return sum(abs(p.specified - p.detected) for p in pairs) / len(pairs)


def merge_close_intervals(intervals: list[Interval], gap: float) -> list[Interval]:
    """Join intervals whose separation is below gap (or that overlap)."""
    if not intervals:
        return []
    ordered = sorted(intervals, key=lambda iv: iv.onset)
    merged = [ordered[0]]
    for iv in ordered[1:]:
        last = merged[-1]
        if iv.onset - last.offset < gap:
            merged[-1] = Interval(last.onset, max(last.offset, iv.offset))
        else:
            merged.append(iv)
    return merged


def duration_pairs(refs: list[ClipMetadata],
                   dets: list[DetectionSet]) -> list[CountPair]:
    by_id = _detections_by_clip(refs, dets)
    pairs = []
    for ref in refs:
        det = by_id[ref.clip_id]
        for label, seconds in ref.events.items():
            detected = sum(iv.duration() for iv in det.intervals(label))
            pairs.append(CountPair(specified=float(seconds), detected=detected))
    return pairs


def frequency_pairs(refs: list[ClipMetadata], dets: list[DetectionSet],
                    merge_gap: float = 0.1) -> list[CountPair]:
    by_id = _detections_by_clip(refs, dets)
    pairs = []
    for ref in refs:
        det = by_id[ref.clip_id]
        for label, onsets in ref.events.items():
            merged = merge_close_intervals(det.intervals(label), merge_gap)
            pairs.append(CountPair(specified=float(len(onsets)),
                                   detected=float(len(merged))))
    return pairs


def _activity(intervals: list[Interval], edges: np.ndarray) -> np.ndarray:
    """Boolean per segment: does any interval intersect it with positive length."""
    active = np.zeros(len(edges) - 1, dtype=bool)
    for iv in intervals:
        active |= (iv.onset < edges[1:]) & (iv.offset > edges[:-1])
    return active


def f1_segment(refs: list[ClipMetadata], dets: list[DetectionSet],
               segment_length: float = 1.0) -> float:
    """Micro-averaged segment-based F1 over all clips and event labels."""
    if segment_length <= 0:
        raise SteamError("segment_length must be positive")
    by_id = _detections_by_clip(refs, dets)
    tp = fp = fn = 0
    for ref in refs:
        det = by_id[ref.clip_id]
        n_seg = math.ceil(ref.clip_length / segment_length - 1e-9)
        edges = np.minimum(np.arange(n_seg + 1) * segment_length, ref.clip_length)
        for label in sorted(set(ref.events) | set(det.events)):
            r = _activity(ref.events.get(label, []), edges)
            d = _activity(det.intervals(label), edges)
            tp += int(np.sum(r & d))
            fp += int(np.sum(~r & d))
            fn += int(np.sum(r & ~d))
    denom = 2 * tp + fp + fn
    return 1.0 if denom == 0 else 2 * tp / denom


def evaluate(signal: SignalType, refs: list[ClipMetadata],
             dets: list[DetectionSet],
             config: EvalConfig | None = None) -> MetricReport:
    """Dispatch to the signal's metric and assemble the report."""
    config = config or EvalConfig()
    if not refs:
        raise SteamError("no reference clips")
    if any(r.signal is not signal for r in refs):
        raise SteamError("reference clips do not all match the requested signal")

    total_events = sum(r.event_count() for r in refs)
    kwargs: dict = {}
    if signal is SignalType.ORDERING:
        kwargs["error_rate"] = ordering_error_rate(refs, dets)
    elif signal is SignalType.DURATION:
        kwargs["l1_second"] = l1_metric(duration_pairs(refs, dets))
    elif signal is SignalType.FREQUENCY:
        kwargs["l1_freq"] = l1_metric(
            frequency_pairs(refs, dets, config.frequency_merge_gap))
    else:
        kwargs["f1_segment"] = f1_segment(refs, dets, config.segment_length)
    return MetricReport(signal=signal, n_samples=len(refs),
                        total_events=total_events, **kwargs)


def perfect_detections(refs: list[ClipMetadata]) -> list[DetectionSet]:
    """Detections that reproduce the reference annotation exactly.

    Duration references become a single interval of the specified length;
    frequency onsets become short stubs that survive gap-merging.
    """
    out = []
    for ref in refs:
        if ref.signal is SignalType.DURATION:
            events = {label: [Interval(0.0, float(d))]
                      for label, d in ref.events.items()}
        elif ref.signal is SignalType.FREQUENCY:
            events = {label: [Interval(t, t + 0.05) for t in onsets]
                      for label, onsets in ref.events.items()}
        else:
            events = {label: list(ivs) for label, ivs in ref.events.items()}
        out.append(DetectionSet(clip_id=ref.clip_id, events=events))
    return out


def detections_to_json(det: DetectionSet) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "clip_id": det.clip_id,
        "threshold": det.detector_threshold,
        "events": {label: [iv.to_pair() for iv in ivs]
                   for label, ivs in det.events.items()},
    }


def detections_from_json(obj: dict) -> DetectionSet:
    return DetectionSet(
        clip_id=obj["clip_id"],
        events={label: [Interval(float(a), float(b)) for a, b in ivs]
                for label, ivs in obj["events"].items()},
        detector_threshold=float(obj.get("threshold", 0.5)),
    )


def save_detections(dets: list[DetectionSet], path: str | Path) -> None:
    Path(path).write_text(
        json.dumps([detections_to_json(d) for d in dets], indent=2, sort_keys=True)
    )


def load_detections(path: str | Path) -> list[DetectionSet]:
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, list):
        raise SteamError(f"detections file {path} must be a JSON array")
    return [detections_from_json(obj) for obj in raw]


def report_to_json(report: MetricReport) -> dict:
    out = {
        "schema_version": SCHEMA_VERSION,
        "signal": report.signal.value,
        "n_samples": report.n_samples,
        "total_events": report.total_events,
    }
    out.update(report.metric_items())
    return out


_COLUMNS = ("error_rate", "l1_second", "l1_freq", "f1_segment")


def format_report_table(reports: list[MetricReport]) -> str:
    """Human-readable table, one row per signal, one column per metric."""
    header = f"{'signal':<12}{'N':>6}{'events':>8}" + "".join(
        f"{c:>12}" for c in _COLUMNS)
    lines = [header, "-" * len(header)]
    for r in reports:
        values = dict(r.metric_items())
        cells = "".join(
            f"{values[c]:>12.3f}" if c in values else f"{'-':>12}"
            for c in _COLUMNS)
        lines.append(
            f"{r.signal.value:<12}{r.n_samples:>6}{r.total_events:>8}{cells}")
    return "\n".join(lines)
