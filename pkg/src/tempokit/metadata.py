"""Signal types and per-clip ground-truth temporal annotations.

ClipMetadata is the contract between the simulator, the caption engine, and
the metric suite: the payload shape depends on the signal type.

  ordering  -> {event_label: [Interval, ...]} for exactly 2 distinct events
  duration  -> {event_label: total seconds}, each event exactly once
  frequency -> {event_label: [onset, ...]} (frequency = list length)
  timestamp -> {event_label: [Interval, ...]}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from . import SCHEMA_VERSION
from .intervals import Interval


class SignalType(Enum):
    ORDERING = "ordering"
    DURATION = "duration"
    FREQUENCY = "frequency"
    TIMESTAMP = "timestamp"


class MetadataError(Exception):
    pass


@dataclass(frozen=True)
class ClipMetadata:
    clip_id: str
    signal: SignalType
    events: dict = field(default_factory=dict)
    clip_length: float = 10.0

    def validate(self) -> None:
        if not self.events:
            raise MetadataError(f"{self.clip_id}: empty event payload")
        if self.signal is SignalType.ORDERING and len(self.events) != 2:
            raise MetadataError(
                f"{self.clip_id}: ordering payload needs exactly 2 events,"
                f" got {len(self.events)}"
            )
        for label, payload in self.events.items():
            if self.signal is SignalType.DURATION:
                if not isinstance(payload, (int, float)) or payload <= 0:
                    raise MetadataError(
                        f"{self.clip_id}/{label}: duration payload must be"
                        f" a positive number of seconds"
                    )
            elif self.signal is SignalType.FREQUENCY:
                if not payload or not all(isinstance(t, (int, float)) for t in payload):
                    raise MetadataError(
                        f"{self.clip_id}/{label}: frequency payload must be"
                        f" a non-empty onset list"
                    )
            else:
                if not payload or not all(isinstance(v, Interval) for v in payload):
                    raise MetadataError(
                        f"{self.clip_id}/{label}: payload must be a non-empty"
                        f" interval list"
                    )

    def event_count(self) -> int:
        return len(self.events)


def metadata_to_json(meta: ClipMetadata) -> dict:
    if meta.signal is SignalType.DURATION:
        events = {label: d for label, d in meta.events.items()}
    elif meta.signal is SignalType.FREQUENCY:
        events = {label: list(onsets) for label, onsets in meta.events.items()}
    else:
        events = {label: [iv.to_pair() for iv in ivs]
                  for label, ivs in meta.events.items()}
    return {
        "schema_version": SCHEMA_VERSION,
        "clip_id": meta.clip_id,
        "signal": meta.signal.value,
        "clip_length": meta.clip_length,
        "events": events,
    }


def metadata_from_json(obj: dict) -> ClipMetadata:
    signal = SignalType(obj["signal"])
    raw = obj["events"]
    if signal is SignalType.DURATION:
        events = {label: float(d) for label, d in raw.items()}
    elif signal is SignalType.FREQUENCY:
        events = {label: [float(t) for t in onsets] for label, onsets in raw.items()}
    else:
        events = {label: [Interval(float(a), float(b)) for a, b in ivs]
                  for label, ivs in raw.items()}
    meta = ClipMetadata(
        clip_id=obj["clip_id"],
        signal=signal,
        events=events,
        clip_length=float(obj.get("clip_length", 10.0)),
    )
    meta.validate()
    return meta


def save_metadata(metas: list[ClipMetadata], path: str | Path) -> None:
    Path(path).write_text(
        json.dumps([metadata_to_json(m) for m in metas], indent=2, sort_keys=True)
    )


def load_metadata(path: str | Path) -> list[ClipMetadata]:
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, list):
        raise MetadataError(f"metadata file {path} must be a JSON array")
    return [metadata_from_json(obj) for obj in raw]
