"""Scoring backends.

Two implementations of the same protocol:

  - ToneProbeBackend: deterministic signal-processing probe. Each label maps
    to a fixed frequency; presence is the fraction of short-time energy in a
    narrow band around it. Needs no model weights, so CI and fixtures are
    reproducible byte for byte.
  - ClapBackend: wraps a pretrained contrastive audio-text checkpoint from a
    local directory named in the adapter config. Checkpoints are referenced
    by URL/hash in the config, never vendored.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

TARGET_SR = 32000


class ModelLoadError(Exception):
    pass


class AudioReadError(Exception):
    pass


def load_audio(path: str | Path, target_sr: int = TARGET_SR) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise AudioReadError(f"audio file not found: {path}")
    try:
        sr, data = wavfile.read(path)
    except Exception as e:
        raise AudioReadError(f"cannot read {path}: {e}") from e
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
        g = math.gcd(int(sr), target_sr)
        data = resample_poly(data, target_sr // g, int(sr) // g)
    return data


def label_frequency(label: str) -> float:
    """Deterministic label-to-frequency mapping on a semitone grid, 220-1760 Hz."""
    digest = hashlib.sha1(label.strip().lower().encode()).digest()
    k = int.from_bytes(digest[:4], "big") % 37
    return 220.0 * 2.0 ** (k / 12.0)


@dataclass(frozen=True)
class ToneProbeBackend:
    """Presence score = band energy fraction at the label's frequency."""

    sample_rate: int = TARGET_SR
    frame: int = 1024
    hop: int = 320
    band_bins: int = 3

    @property
    def backend_id(self) -> str:
        return "tone-probe"

    def frame_scores(self, audio: np.ndarray, label: str) -> tuple[np.ndarray, float]:
        """Per-frame scores in [0, 1) plus the hop in seconds."""
        freq = label_frequency(label)
        n_frames = max(0, (len(audio) - self.frame) // self.hop + 1)
        if n_frames == 0:
            return np.zeros(0), self.hop / self.sample_rate
        idx = (np.arange(n_frames)[:, None] * self.hop
               + np.arange(self.frame)[None, :])
        frames = audio[idx] * np.hanning(self.frame)
        spectrum = np.abs(np.fft.rfft(frames, axis=1)) ** 2
        target_bin = int(round(freq * self.frame / self.sample_rate))
        lo = max(0, target_bin - self.band_bins)
        hi = min(spectrum.shape[1], target_bin + self.band_bins + 1)
        band = spectrum[:, lo:hi].sum(axis=1)
        total = spectrum.sum(axis=1)
        return band / (total + 1e-10), self.hop / self.sample_rate

    def clip_similarity(self, audio: np.ndarray, label: str) -> float:
        scores, _ = self.frame_scores(audio, label)
        if scores.size == 0:
            return 0.0
        return float(np.mean(scores))

    def presence_score(self, audio: np.ndarray, label: str) -> float:
        scores, _ = self.frame_scores(audio, label)
        if scores.size == 0:
            return 0.0
        return float(np.max(scores))


class ClapBackend:
    """Pretrained contrastive audio-text model from a local checkpoint dir.

    The checkpoint directory comes from the adapter config; downloading
    weights is out of scope here, so a missing checkpoint is a hard error.
    """

    def __init__(self, checkpoint_dir: str, sample_rate: int = TARGET_SR):
        self.sample_rate = sample_rate
        self.checkpoint_dir = checkpoint_dir
        self.backend_id = f"clap:{Path(checkpoint_dir).name}"
        try:
            import torch
            from transformers import ClapModel, ClapProcessor
        except ImportError as e:
            raise ModelLoadError(
                "the clap backend needs the [clap] extra (transformers, torch)"
            ) from e
        if not Path(checkpoint_dir).is_dir():
            raise ModelLoadError(f"checkpoint directory not found: {checkpoint_dir}")
        try:
            self._torch = torch
            self._model = ClapModel.from_pretrained(checkpoint_dir)
            self._processor = ClapProcessor.from_pretrained(checkpoint_dir)
            self._model.eval()
        except Exception as e:
            raise ModelLoadError(f"cannot load checkpoint {checkpoint_dir}: {e}") from e

    def _similarity(self, audio: np.ndarray, label: str) -> float:
        text = label.replace("_", " ")
        inputs = self._processor(text=[text], audios=[audio],
                                 sampling_rate=self.sample_rate,
                                 return_tensors="pt", padding=True)
        with self._torch.no_grad():
            out = self._model(**inputs)
            a = out.audio_embeds / out.audio_embeds.norm(dim=-1, keepdim=True)
            t = out.text_embeds / out.text_embeds.norm(dim=-1, keepdim=True)
            cos = float((a * t).sum())
        return max(0.0, min(1.0, (cos + 1.0) / 2.0))

    def clip_similarity(self, audio: np.ndarray, label: str) -> float:
        return self._similarity(audio, label)

    def presence_score(self, audio: np.ndarray, label: str) -> float:
        scores, _ = self.frame_scores(audio, label)
        return float(np.max(scores)) if scores.size else 0.0

    def frame_scores(self, audio: np.ndarray, label: str) -> tuple[np.ndarray, float]:
        # 1 s sliding window, 0.1 s hop; each window scored as a clip
        win = self.sample_rate
        hop = self.sample_rate // 10
        n = max(0, (len(audio) - win) // hop + 1)
        scores = np.array([
            self._similarity(audio[i * hop:i * hop + win], label) for i in range(n)
        ])
        return scores, hop / self.sample_rate


def make_backend(config: dict):
    kind = config.get("backend", "tone")
    if kind == "tone":
        return ToneProbeBackend()
    if kind == "clap":
        checkpoint = config.get("checkpoint")
        if not checkpoint:
            raise ModelLoadError("clap backend config needs a 'checkpoint' path")
        return ClapBackend(checkpoint)
    raise ModelLoadError(f"unknown backend: {kind}")
