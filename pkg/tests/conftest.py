import numpy as np
import pytest

from tempokit.intervals import Interval
from tempokit.scene_simulator import write_wav
from tempokit.segment_bank import SegmentRecord

TONE_FREQS = {
    "dog_bark": 440.0,
    "car_horn": 660.0,
    "siren": 880.0,
    "bell": 1320.0,
    "whistle": 1760.0,
    "train": 220.0,
}

SAMPLE_RATE = 32000


def make_tone_bank(directory, labels=None, durations=(0.8, 1.2, 1.5),
                   sample_rate=SAMPLE_RATE, amplitude=0.5):
    """Synthetic single-tone segments, one WAV per (label, duration)."""
    labels = labels or list(TONE_FREQS)
    segments = []
    for label in labels:
        freq = TONE_FREQS[label]
        for j, dur in enumerate(durations):
            n = int(round(dur * sample_rate))
            t = np.arange(n) / sample_rate
            x = amplitude * np.sin(2 * np.pi * freq * t)
            path = directory / f"{label}_{j}.wav"
            write_wav(path, x, sample_rate)
            segments.append(SegmentRecord(
                segment_id=f"{label}_{j}",
                clip_id=f"src_{label}",
                event_label=label,
                source_interval=Interval(0.0, dur),
                audio_path=str(path),
                clap_score=0.9,
                grounding_score=0.9,
            ))
    return segments


@pytest.fixture(scope="session")
def tone_bank(tmp_path_factory):
    directory = tmp_path_factory.mktemp("tone_bank")
    return make_tone_bank(directory)
