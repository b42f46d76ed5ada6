"""Plan and render temporally-structured clips for the four control signals.

Planning is pure and seeded: identical (bank, signal, seed, config) produce an
identical SceneSpec, so corpus generation is reproducible byte for byte.
Rendering mixes gain-scaled segment audio additively at the planned onsets.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

from .intervals import Interval
from .metadata import ClipMetadata, SignalType, save_metadata
from .segment_bank import SegmentRecord

DEFAULT_SAMPLE_RATE = 32000
CLIP_CEILING = 0.9952  # -0.04 dBFS; whole mix is rescaled above this


class PlanningError(Exception):
    pass


class RenderError(Exception):
    pass


@dataclass(frozen=True)
class EventPlacement:
    event_label: str
    segment_id: str
    interval: Interval
    gain_db: float


@dataclass(frozen=True)
class PlannerConfig:
    clip_length: float = 10.0
    max_events: int = 3
    max_occurrences: int = 4
    min_gap: float = 0.3          # same-event occurrences stay separable
    gain_db_low: float = -6.0
    gain_db_high: float = 0.0
    fit_attempts: int = 20


@dataclass(frozen=True)
class SceneSpec:
    clip_id: str
    signal: SignalType
    clip_length: float
    seed: int
    placements: list[EventPlacement] = field(default_factory=list)

    def validate(self) -> None:
        by_label: dict[str, list[EventPlacement]] = {}
        for p in self.placements:
            if p.interval.onset < 0 or p.interval.offset > self.clip_length + 1e-9:
                raise PlanningError(
                    f"{self.clip_id}: placement outside clip bounds: {p.interval}"
                )
            by_label.setdefault(p.event_label, []).append(p)
        for label, ps in by_label.items():
            for i in range(len(ps)):
                for j in range(i + 1, len(ps)):
                    if ps[i].interval.overlaps(ps[j].interval):
                        raise PlanningError(
                            f"{self.clip_id}: overlapping {label} occurrences"
                        )
        if self.signal is SignalType.ORDERING and len(by_label) != 2:
            raise PlanningError(f"{self.clip_id}: ordering needs exactly 2 events")
        if self.signal is SignalType.DURATION:
            if any(len(ps) != 1 for ps in by_label.values()):
                raise PlanningError(
                    f"{self.clip_id}: duration events must occur exactly once"
                )


def _q(x: float) -> float:
    """Quantize to a 10 ms grid, rounding down."""
    return math.floor(x * 100 + 1e-9) / 100


def _weighted_count(rng: random.Random, max_occ: int) -> int:
    counts = list(range(1, max_occ + 1))
    return rng.choices(counts, weights=[1.0 / k for k in counts])[0]


def _placement_duration(seg: SegmentRecord, clip_length: float) -> float:
    return _q(min(seg.source_interval.duration(), clip_length))


def _fit_durations(durations: list[float], budget: float, min_gap: float) -> list[float]:
    """Shrink durations proportionally so the sequence fits the budget."""
    available = budget - min_gap * (len(durations) - 1)
    if available <= 0.05 * len(durations):
        raise PlanningError("clip too short for the requested occurrence count")
    total = sum(durations)
    if total <= available:
        return durations
    scale = available / total
    return [max(0.05, _q(d * scale)) for d in durations]


def _spread(rng: random.Random, durations: list[float], span: float,
            min_gap: float) -> list[float]:
    """Random non-overlapping onsets for a duration sequence within [0, span]."""
    slack = span - sum(durations) - min_gap * (len(durations) - 1)
    weights = [rng.random() + 1e-6 for _ in range(len(durations) + 1)]
    scale = slack / sum(weights)
    onsets = []
    cursor = weights[0] * scale
    for d, w in zip(durations, weights[1:]):
        onsets.append(_q(cursor))
        cursor += d + min_gap + w * scale
    return onsets


def _choose_fitting(rng: random.Random, groups: list[list[SegmentRecord]],
                    counts: list[int], config: PlannerConfig
                    ) -> tuple[list[int], list[list[SegmentRecord]]]:
    """Pick segments per occurrence, shrinking counts until the clip can hold them."""
    counts = list(counts)
    while True:
        for _ in range(config.fit_attempts):
            chosen = [[rng.choice(g) for _ in range(c)]
                      for g, c in zip(groups, counts)]
            flat = [s for group in chosen for s in group]
            total = sum(_placement_duration(s, config.clip_length) for s in flat)
            total += config.min_gap * (len(flat) - 1)
            if total <= config.clip_length:
                return counts, chosen
        if max(counts) == 1:
            # proportional truncation in _fit_durations will handle it
            return counts, [[rng.choice(g) for _ in range(c)]
                            for g, c in zip(groups, counts)]
        i = counts.index(max(counts))
        counts[i] -= 1


def plan_scene(bank: list[SegmentRecord], signal: SignalType, seed: int,
               config: PlannerConfig | None = None,
               clip_id: str | None = None) -> SceneSpec:
    config = config or PlannerConfig()
    if clip_id is None:
        clip_id = f"{signal.value}_{seed:08d}"
    if not bank:
        raise PlanningError("empty segment bank")

    by_label: dict[str, list[SegmentRecord]] = {}
    for seg in bank:
        by_label.setdefault(seg.event_label, []).append(seg)
    labels = sorted(by_label)
    for lab in labels:
        by_label[lab].sort(key=lambda s: s.segment_id)

    rng = random.Random(f"{clip_id}:{seed}")

    if signal is SignalType.ORDERING:
        if len(labels) < 2:
            raise PlanningError("ordering needs at least 2 distinct event labels")
        picked = rng.sample(labels, 2)
        counts = [_weighted_count(rng, config.max_occurrences) for _ in picked]
    elif signal is SignalType.DURATION:
        k = rng.randint(1, min(config.max_events, len(labels)))
        picked = rng.sample(labels, k)
        counts = [1] * k
    else:
        k = rng.randint(1, min(config.max_events, len(labels)))
        picked = rng.sample(labels, k)
        counts = [_weighted_count(rng, config.max_occurrences) for _ in picked]

    groups = [by_label[lab] for lab in picked]
    counts, chosen = _choose_fitting(rng, groups, counts, config)

    placements: list[EventPlacement] = []
    if signal is SignalType.ORDERING:
        # all occurrences of the first event strictly precede the second's
        flat_labels = [picked[0]] * counts[0] + [picked[1]] * counts[1]
        flat_segs = chosen[0] + chosen[1]
        durations = _fit_durations(
            [_placement_duration(s, config.clip_length) for s in flat_segs],
            config.clip_length, config.min_gap)
        onsets = _spread(rng, durations, config.clip_length, config.min_gap)
        for lab, seg, on, d in zip(flat_labels, flat_segs, onsets, durations):
            placements.append(EventPlacement(
                event_label=lab, segment_id=seg.segment_id,
                interval=Interval(on, round(on + d, 2)),
                gain_db=round(rng.uniform(config.gain_db_low, config.gain_db_high), 2),
            ))
    else:
        # events may co-occur across labels; same-label occurrences may not
        for lab, segs in zip(picked, chosen):
            durations = _fit_durations(
                [_placement_duration(s, config.clip_length) for s in segs],
                config.clip_length, config.min_gap)
            onsets = _spread(rng, durations, config.clip_length, config.min_gap)
            for seg, on, d in zip(segs, onsets, durations):
                placements.append(EventPlacement(
                    event_label=lab, segment_id=seg.segment_id,
                    interval=Interval(on, round(on + d, 2)),
                    gain_db=round(
                        rng.uniform(config.gain_db_low, config.gain_db_high), 2),
                ))

    spec = SceneSpec(clip_id=clip_id, signal=signal,
                     clip_length=config.clip_length, seed=seed,
                     placements=placements)
    spec.validate()
    return spec


def extract_metadata(spec: SceneSpec) -> ClipMetadata:
    """Project a SceneSpec onto its signal's annotation payload."""
    spec.validate()
    grouped: dict[str, list[EventPlacement]] = {}
    for p in spec.placements:
        grouped.setdefault(p.event_label, []).append(p)
    for ps in grouped.values():
        ps.sort(key=lambda p: p.interval.onset)

    if spec.signal is SignalType.DURATION:
        events: dict = {lab: round(ps[0].interval.duration(), 2)
                        for lab, ps in grouped.items()}
    elif spec.signal is SignalType.FREQUENCY:
        events = {lab: [p.interval.onset for p in ps] for lab, ps in grouped.items()}
    else:
        events = {lab: [p.interval for p in ps] for lab, ps in grouped.items()}

    meta = ClipMetadata(clip_id=spec.clip_id, signal=spec.signal,
                        events=events, clip_length=spec.clip_length)
    meta.validate()
    return meta


def load_audio(path: str | Path, target_sr: int) -> np.ndarray:
    """Read a WAV as mono float64 in [-1, 1], resampling to target_sr if needed."""
    path = Path(path)
    if not path.is_file():
        raise RenderError(f"audio file not found: {path}")
    sr, data = wavfile.read(path)
    data = np.asarray(data)
    if data.ndim == 2:
        data = data.mean(axis=1)
    if data.dtype == np.int16:
        data = data / 32768.0
    elif data.dtype == np.int32:
        data = data / 2147483648.0
    elif data.dtype == np.uint8:
        data = (data.astype(np.float64) - 128.0) / 128.0
    data = data.astype(np.float64)
    if sr != target_sr:
        g = math.gcd(sr, target_sr)
        data = resample_poly(data, target_sr // g, sr // g)
    return data


def write_wav(path: str | Path, samples: np.ndarray, sample_rate: int) -> None:
    pcm = np.clip(np.round(samples * 32767.0), -32768, 32767).astype(np.int16)
    wavfile.write(Path(path), sample_rate, pcm)


def render_scene(spec: SceneSpec, bank: list[SegmentRecord],
                 sample_rate: int = DEFAULT_SAMPLE_RATE,
                 noise_floor_db: float | None = None
                 ) -> tuple[np.ndarray, ClipMetadata]:
    """Mix the planned placements into one clip and extract its annotation."""
    segs = {s.segment_id: s for s in bank}
    n = int(round(spec.clip_length * sample_rate))
    mix = np.zeros(n, dtype=np.float64)

    for p in spec.placements:
        seg = segs.get(p.segment_id)
        if seg is None:
            raise RenderError(f"{spec.clip_id}: unknown segment {p.segment_id}")
        if seg.audio_path is None:
            raise RenderError(f"{spec.clip_id}: segment {p.segment_id} has no audio")
        audio = load_audio(seg.audio_path, sample_rate)
        need = int(round(p.interval.duration() * sample_rate))
        if need > len(audio) + 1:
            raise RenderError(
                f"{spec.clip_id}: placement of {p.segment_id} exceeds its"
                f" segment length"
            )
        chunk = audio[:need] * (10.0 ** (p.gain_db / 20.0))
        start = int(round(p.interval.onset * sample_rate))
        end = min(start + len(chunk), n)
        mix[start:end] += chunk[: end - start]

    if noise_floor_db is not None:
        noise_rng = np.random.default_rng(spec.seed)
        mix += noise_rng.uniform(-1.0, 1.0, n) * (10.0 ** (noise_floor_db / 20.0))

    peak = float(np.max(np.abs(mix))) if n else 0.0
    if peak > CLIP_CEILING:
        mix *= CLIP_CEILING / peak
    return mix, extract_metadata(spec)


def simulate_corpus(bank: list[SegmentRecord], signal: SignalType, count: int,
                    seed: int, out_dir: str | Path,
                    config: PlannerConfig | None = None,
                    sample_rate: int = DEFAULT_SAMPLE_RATE,
                    noise_floor_db: float | None = None,
                    render: bool = True) -> list[ClipMetadata]:
    """Plan (and optionally render) `count` clips; write WAVs plus metadata.json."""
    config = config or PlannerConfig()
    signal_dir = Path(out_dir) / signal.value
    signal_dir.mkdir(parents=True, exist_ok=True)

    metas = []
    for i in range(count):
        clip_seed = seed * 1_000_003 + i
        clip_id = f"{signal.value}_{i:05d}"
        spec = plan_scene(bank, signal, clip_seed, config, clip_id=clip_id)
        if render:
            mix, meta = render_scene(spec, bank, sample_rate, noise_floor_db)
            write_wav(signal_dir / f"{clip_id}.wav", mix, sample_rate)
        else:
            meta = extract_metadata(spec)
        metas.append(meta)
    save_metadata(metas, signal_dir / "metadata.json")
    return metas
