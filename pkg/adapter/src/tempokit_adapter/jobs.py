"""Batch jobs producing tempokit's scores.json and detections.json files."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from . import SCHEMA_VERSION
from .backends import AudioReadError, load_audio

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdapterJob:
    mode: str                     # "scores" or "detect"
    items: list
    threshold: float = 0.5
    out_path: str = "out.json"

    def __post_init__(self) -> None:
        if self.mode not in ("scores", "detect"):
            raise ValueError(f"unknown mode: {self.mode}")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must be in [0, 1]")


def emit_scores(items: list[dict], backend, out_path: str | Path) -> dict:
    """Per-segment similarity and presence scores, keyed by segment_id.

    Each item: {"segment_id", "audio_path", "event_label"}. Unreadable audio
    skips the entry with a warning.
    """
    scores: dict[str, dict] = {}
    for item in items:
        try:
            audio = load_audio(item["audio_path"])
        except AudioReadError as e:
            logger.warning("skipping segment %s: %s", item["segment_id"], e)
            continue
        label = item["event_label"]
        scores[item["segment_id"]] = {
            "clap": round(backend.clip_similarity(audio, label), 6),
            "grounding": round(backend.presence_score(audio, label), 6),
        }
    Path(out_path).write_text(json.dumps(scores, indent=2, sort_keys=True))
    return scores


def _runs_to_intervals(scores, hop_s: float, frame_s: float, threshold: float,
                       clip_length: float) -> list[list[float]]:
    intervals = []
    start = None
    for i, s in enumerate(scores):
        if s >= threshold and start is None:
            start = i
        elif s < threshold and start is not None:
            intervals.append((start, i - 1))
            start = None
    if start is not None:
        intervals.append((start, len(scores) - 1))
    out = []
    for a, b in intervals:
        onset = round(a * hop_s, 3)
        offset = round(min(b * hop_s + frame_s, clip_length), 3)
        if offset > onset:
            out.append([onset, offset])
    return out


def emit_detections(items: list[dict], backend, threshold: float,
                    out_path: str | Path) -> list[dict]:
    """Per-clip thresholded on/offset intervals for each candidate label.

    Each item: {"clip_id", "audio_path", "labels": [...]}. Output matches
    tempokit's detections.json schema.
    """
    records = []
    for item in items:
        try:
            audio = load_audio(item["audio_path"])
        except AudioReadError as e:
            logger.warning("skipping clip %s: %s", item["clip_id"], e)
            continue
        clip_length = len(audio) / backend.sample_rate
        events = {}
        for label in item["labels"]:
            scores, hop_s = backend.frame_scores(audio, label)
            frame_s = getattr(backend, "frame", backend.sample_rate) \
                / backend.sample_rate
            events[label] = _runs_to_intervals(scores, hop_s, frame_s,
                                               threshold, clip_length)
        records.append({
            "schema_version": SCHEMA_VERSION,
            "clip_id": item["clip_id"],
            "threshold": threshold,
            "events": events,
        })
    Path(out_path).write_text(json.dumps(records, indent=2, sort_keys=True))
    return records


def run_job(job: AdapterJob, backend) -> None:
    if job.mode == "scores":
        emit_scores(job.items, backend, job.out_path)
    else:
        emit_detections(job.items, backend, job.threshold, job.out_path)
