"""Curation of single-sound segments from strongly-labeled source annotations.

Segments are extracted where a labeled interval overlaps no other label of the
same clip (after guard-margin inflation), then gated by externally supplied
CLAP similarity and grounding scores.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import SCHEMA_VERSION
from .intervals import Interval

logger = logging.getLogger(__name__)


class BankError(Exception):
    pass


@dataclass(frozen=True)
class StrongLabelRecord:
    clip_id: str
    event_label: str
    interval: Interval

    def __post_init__(self) -> None:
        if not self.clip_id:
            raise ValueError("clip_id must be non-empty")
        if not self.event_label:
            raise ValueError("event_label must be non-empty")


@dataclass(frozen=True)
class SegmentRecord:
    segment_id: str
    clip_id: str
    event_label: str
    source_interval: Interval
    audio_path: str | None = None
    clap_score: float | None = None
    grounding_score: float | None = None


@dataclass(frozen=True)
class CurationConfig:
    clap_threshold: float = 0.3
    atg_threshold: float = 0.6
    guard_margin: float = 0.0

    def __post_init__(self) -> None:
        for name, t in (("clap_threshold", self.clap_threshold),
                        ("atg_threshold", self.atg_threshold)):
            if not 0.0 <= t <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {t}")
        if self.guard_margin < 0:
            raise ValueError("guard_margin must be non-negative")


@dataclass(frozen=True)
class CurationStats:
    categories_extracted: int
    segments_extracted: int
    categories_kept: int
    segments_kept: int

    @property
    def category_pct(self) -> float:
        if self.categories_extracted == 0:
            return 0.0
        return self.categories_kept / self.categories_extracted * 100.0

    @property
    def segment_pct(self) -> float:
        if self.segments_extracted == 0:
            return 0.0
        return self.segments_kept / self.segments_extracted * 100.0

    def summary(self) -> str:
        return (
            f"categories {self.categories_kept}/{self.categories_extracted}"
            f" ({self.category_pct:.1f}%), segments"
            f" {self.segments_kept}/{self.segments_extracted}"
            f" ({self.segment_pct:.1f}%)"
        )


def extract_single_sound_segments(
    labels: list[StrongLabelRecord], guard_margin: float = 0.0
) -> list[SegmentRecord]:
    """Keep only labeled intervals that overlap no other label of the same clip.

    Both intervals are inflated by guard_margin on each side before the
    pairwise check. Output order follows the input order within each clip.
    """
    by_clip: dict[str, list[StrongLabelRecord]] = {}
    for rec in labels:
        by_clip.setdefault(rec.clip_id, []).append(rec)

    out: list[SegmentRecord] = []
    for clip_id in sorted(by_clip):
        recs = by_clip[clip_id]
        spans = [r.interval.inflate(guard_margin) for r in recs]
        for i, rec in enumerate(recs):
            if any(i != j and spans[i].overlaps(spans[j]) for j in range(len(recs))):
                continue
            out.append(SegmentRecord(
                segment_id=f"{clip_id}_{i:03d}",
                clip_id=clip_id,
                event_label=rec.event_label,
                source_interval=rec.interval,
            ))
    return out


def _passes(seg: SegmentRecord, config: CurationConfig) -> bool:
    if seg.clap_score is None or seg.grounding_score is None:
        raise BankError(f"segment {seg.segment_id} is missing a filter score")
    return (seg.clap_score >= config.clap_threshold
            and seg.grounding_score >= config.atg_threshold)


def apply_filters(
    segments: list[SegmentRecord], config: CurationConfig
) -> tuple[list[SegmentRecord], CurationStats]:
    """Gate segments on both score thresholds (inclusive) and count the survivors."""
    kept = [s for s in segments if _passes(s, config)]
    stats = CurationStats(
        categories_extracted=len({s.event_label.strip() for s in segments}),
        segments_extracted=len(segments),
        categories_kept=len({s.event_label.strip() for s in kept}),
        segments_kept=len(kept),
    )
    return kept, stats


def load_scores(
    segments: list[SegmentRecord], scores_file: str | Path
) -> list[SegmentRecord]:
    """Populate clap/grounding scores from a JSON file keyed by segment_id.

    Segments absent from the file keep absent scores (with a warning); ids in
    the file that match no segment are a hard error.
    """
    path = Path(scores_file)
    if not path.is_file():
        raise BankError(f"scores file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise BankError(f"malformed scores JSON in {path}: {e}") from e
    if not isinstance(raw, dict):
        raise BankError(f"scores file {path} must be a JSON object")

    known = {s.segment_id for s in segments}
    for key in raw:
        if key not in known:
            raise BankError(f"scores file names unknown segment_id: {key}")

    out = []
    for seg in segments:
        entry = raw.get(seg.segment_id)
        if entry is None:
            logger.warning("no scores for segment %s; left unscored", seg.segment_id)
            out.append(seg)
            continue
        try:
            out.append(replace(seg, clap_score=float(entry["clap"]),
                               grounding_score=float(entry["grounding"])))
        except (KeyError, TypeError, ValueError) as e:
            raise BankError(
                f"malformed score entry for segment {seg.segment_id}: {e}"
            ) from e
    return out


def parse_strong_labels(lines: list[str]) -> list[StrongLabelRecord]:
    """Parse JSON-lines strong labels; malformed intervals are skipped with a warning."""
    out = []
    for n, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        obj = json.loads(line)
        try:
            interval = Interval(float(obj["onset"]), float(obj["offset"]))
            out.append(StrongLabelRecord(
                clip_id=obj["clip_id"],
                event_label=obj["event_label"],
                interval=interval,
            ))
        except (KeyError, ValueError) as e:
            logger.warning("rejecting strong label at line %d: %s", n, e)
    return out


def load_strong_labels(path: str | Path) -> list[StrongLabelRecord]:
    return parse_strong_labels(Path(path).read_text().splitlines())


def segment_to_json(seg: SegmentRecord) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "segment_id": seg.segment_id,
        "clip_id": seg.clip_id,
        "event_label": seg.event_label,
        "onset": seg.source_interval.onset,
        "offset": seg.source_interval.offset,
        "audio_path": seg.audio_path,
        "clap_score": seg.clap_score,
        "grounding_score": seg.grounding_score,
    }


def segment_from_json(obj: dict) -> SegmentRecord:
    return SegmentRecord(
        segment_id=obj["segment_id"],
        clip_id=obj["clip_id"],
        event_label=obj["event_label"],
        source_interval=Interval(float(obj["onset"]), float(obj["offset"])),
        audio_path=obj.get("audio_path"),
        clap_score=obj.get("clap_score"),
        grounding_score=obj.get("grounding_score"),
    )


def save_bank(segments: list[SegmentRecord], path: str | Path) -> None:
    Path(path).write_text(
        json.dumps([segment_to_json(s) for s in segments], indent=2, sort_keys=True)
    )


def load_bank(path: str | Path) -> list[SegmentRecord]:
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, list):
        raise BankError(f"bank file {path} must be a JSON array")
    return [segment_from_json(obj) for obj in raw]


def cut_segment_audio(
    segments: list[SegmentRecord],
    audio_dir: str | Path,
    out_dir: str | Path,
    sample_rate: int = 32000,
) -> list[SegmentRecord]:
    """Slice each segment's interval out of <audio_dir>/<clip_id>.wav as mono PCM."""
    from .scene_simulator import load_audio, write_wav

    audio_dir = Path(audio_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out = []
    for seg in segments:
        src = audio_dir / f"{seg.clip_id}.wav"
        if not src.is_file():
            raise BankError(f"source audio not found: {src}")
        samples = load_audio(src, sample_rate)
        lo = int(round(seg.source_interval.onset * sample_rate))
        hi = int(round(seg.source_interval.offset * sample_rate))
        hi = min(hi, len(samples))
        if hi <= lo:
            raise BankError(
                f"segment {seg.segment_id} lies outside its source clip audio"
            )
        dest = out_dir / f"{seg.segment_id}.wav"
        write_wav(dest, np.asarray(samples[lo:hi]), sample_rate)
        out.append(replace(seg, audio_path=str(dest)))
    return out


def stats_to_json(stats: CurationStats) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "categories_extracted": stats.categories_extracted,
        "segments_extracted": stats.segments_extracted,
        "categories_kept": stats.categories_kept,
        "segments_kept": stats.segments_kept,
        "category_pct": round(stats.category_pct, 1),
        "segment_pct": round(stats.segment_pct, 1),
    }
