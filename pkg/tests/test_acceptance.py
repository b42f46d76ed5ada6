"""Acceptance suite: one test per release criterion, run from synthetic fixtures.

Each test prints a [PASS] line on success (visible with `pytest -s` or in the
captured output); a failing test reads as [FAIL] via pytest's own report.
"""

import math
import random
import time

import pytest

from tempokit.caption_engine import (
    CaptionRejected,
    CaptionRequest,
    Feedback,
    Verdict,
    generate_caption,
    rule_discriminate,
    template_generate,
)
from tempokit.intervals import Interval
from tempokit.metadata import SignalType, load_metadata
from tempokit.scene_simulator import (
    extract_metadata,
    plan_scene,
    render_scene,
    simulate_corpus,
)
from tempokit.segment_bank import (
    CurationConfig,
    CurationStats,
    SegmentRecord,
    apply_filters,
)
from tempokit.steam import (
    CountPair,
    OrderingOutcome,
    evaluate,
    f1_segment,
    l1_metric,
    ordering_relation,
    perfect_detections,
)

from conftest import make_tone_bank
from test_steam import DetectionSet, f1_segment_oracle, timestamp_meta


def ok(name):
    print(f"[PASS] {name}")


def test_perfect_oracle_fixpoint(tone_bank, tmp_path):
    """50 clips per signal (seed 0); ground truth as detections scores perfectly."""
    start = time.monotonic()
    expectations = {
        SignalType.ORDERING: ("error_rate", 0.0),
        SignalType.DURATION: ("l1_second", 0.0),
        SignalType.FREQUENCY: ("l1_freq", 0.0),
        SignalType.TIMESTAMP: ("f1_segment", 1.0),
    }
    for signal, (metric, value) in expectations.items():
        metas = simulate_corpus(tone_bank, signal, 50, seed=0,
                                out_dir=tmp_path / signal.value)
        refs = load_metadata(tmp_path / signal.value / signal.value /
                             "metadata.json")
        assert refs == metas
        report = evaluate(signal, refs, perfect_detections(refs))
        assert getattr(report, metric) == value, (signal, report)
        assert report.n_samples == 50
    elapsed = time.monotonic() - start
    assert elapsed < 60.0, f"took {elapsed:.1f}s"
    ok(f"perfect-oracle fixpoint (4x50 clips rendered in {elapsed:.1f}s)")


def test_l1_oracle_equivalence():
    """200 randomized corpora vs a naive double-loop summation; exact equality."""
    rng = random.Random(123)
    for _ in range(200):
        n_samples = rng.randint(1, 8)
        corpus = [[CountPair(rng.uniform(0, 9), rng.uniform(0, 9))
                   for _ in range(rng.randint(1, 5))]
                  for _ in range(n_samples)]
        total = 0.0
        count = 0
        for sample in corpus:           # independent oracle: explicit loops
            for pair in sample:
                total += abs(pair.specified - pair.detected)
                count += 1
        flat = [p for sample in corpus for p in sample]
        assert l1_metric(flat) == total / count
    ok("L1 metric equals naive double-loop oracle on 200 corpora")


def test_segment_f1_oracle_equivalence():
    """100 randomized fixtures vs the boolean activity-matrix oracle; exact."""
    rng = random.Random(321)
    labels = ["ev_a", "ev_b", "ev_c", "ev_d"]

    def rand_events():
        out = {}
        for label in rng.sample(labels, rng.randint(1, 4)):
            ivs = []
            for _ in range(rng.randint(1, 5)):
                on = rng.uniform(0, 9.5)
                ivs.append(Interval(on, min(10.0, on + rng.uniform(0.05, 4))))
            out[label] = ivs
        return out

    for _ in range(100):
        refs = [timestamp_meta(f"c{i}", rand_events())
                for i in range(rng.randint(1, 4))]
        dets = [DetectionSet(r.clip_id, rand_events()) for r in refs]
        assert f1_segment(refs, dets, 1.0) == f1_segment_oracle(refs, dets, 1.0)

    hand_refs = [timestamp_meta("c0", {"dog_bark": [Interval(0, 2)]})]
    hand_dets = [DetectionSet("c0", {"dog_bark": [Interval(1, 3)]})]
    assert f1_segment(hand_refs, hand_dets) == 0.5
    ok("segment F1 equals activity-matrix oracle on 100 fixtures; hand case 0.5")


def test_ordering_rule_conformance():
    """Reference overlap-rule cases, the half-span boundary, and invariances."""
    assert ordering_relation([Interval(0, 2)], [Interval(5, 7)]) \
        is OrderingOutcome.A_PRECEDES_B
    assert ordering_relation([Interval(0, 4)], [Interval(3, 7)]) \
        is OrderingOutcome.A_PRECEDES_B
    assert ordering_relation([Interval(0, 6)], [Interval(2, 8)]) \
        is OrderingOutcome.SIMULTANEOUS
    # overlap exactly half the shorter span still counts as ordered
    assert ordering_relation([Interval(0, 4)], [Interval(2, 8)]) \
        is OrderingOutcome.A_PRECEDES_B

    rng = random.Random(77)
    for _ in range(1000):
        a = [Interval(on := rng.uniform(0, 8), on + rng.uniform(0.1, 2))]
        b = [Interval(on := rng.uniform(0, 8), on + rng.uniform(0.1, 2))]
        fwd = ordering_relation(a, b)
        assert ordering_relation(b, a) is fwd.flipped()
        shift = rng.uniform(0, 10)
        shifted = ordering_relation([x.shift(shift) for x in a],
                                    [x.shift(shift) for x in b])
        assert shifted is fwd
    ok("ordering rule: reference cases, boundary, anti-symmetry, translation")


def test_curation_predicate():
    """Boundary-inclusive filtering on a straddling fixture; stats arithmetic."""
    scores = [
        (0.30, 0.60), (0.29, 0.60), (0.30, 0.59), (0.95, 0.95), (0.0, 1.0),
        (1.0, 0.0), (0.31, 0.61), (0.29, 0.99), (0.99, 0.29), (0.5, 0.7),
    ]
    segments = [
        SegmentRecord(f"s{i}", "c", f"ev_{i % 5}", Interval(0, 1),
                      clap_score=c, grounding_score=g)
        for i, (c, g) in enumerate(scores)
    ]
    config = CurationConfig()
    kept, stats = apply_filters(segments, config)
    expected = {s.segment_id for s in segments
                if s.clap_score >= 0.3 and s.grounding_score >= 0.6}
    assert {s.segment_id for s in kept} == expected
    assert "s0" in expected  # both boundary-equal scores survive
    assert stats.segments_kept == len(expected)

    table = CurationStats(categories_extracted=309, segments_extracted=7098,
                          categories_kept=195, segments_kept=3392)
    assert round(table.segment_pct, 1) == 47.8
    ok("curation predicate with inclusive boundaries; 3392/7098 -> 47.8%")


def test_simulator_determinism_and_energy(tone_bank, tmp_path):
    """Same seed gives identical bytes; tone energy stays inside placements."""
    import numpy as np

    for run in ("a", "b"):
        simulate_corpus(tone_bank, SignalType.TIMESTAMP, 8, seed=3,
                        out_dir=tmp_path / run)
    dir_a = tmp_path / "a" / "timestamp"
    dir_b = tmp_path / "b" / "timestamp"
    names = sorted(p.name for p in dir_a.iterdir())
    assert any(n.endswith(".wav") for n in names) and "metadata.json" in names
    for name in names:
        assert (dir_a / name).read_bytes() == (dir_b / name).read_bytes()

    sr = 32000
    win = int(0.05 * sr)
    for seed in range(4):
        spec = plan_scene(tone_bank, SignalType.TIMESTAMP, seed)
        mix, _ = render_scene(spec, tone_bank, sr)
        intervals = [p.interval for p in spec.placements]
        for k in range(len(mix) // win):
            lo, hi = k * win / sr, (k + 1) * win / sr
            if not any(iv.onset < hi and iv.offset > lo for iv in intervals):
                rms = float(np.sqrt(np.mean(mix[k * win:(k + 1) * win] ** 2)))
                assert 20 * np.log10(rms + 1e-12) < -60.0
        for iv in intervals:
            k_lo = math.ceil(iv.onset * sr / win)
            k_hi = int(iv.offset * sr // win)
            levels = []
            for k in range(k_lo, max(k_lo + 1, k_hi)):
                chunk = mix[k * win:(k + 1) * win]
                if len(chunk) == win:
                    rms = float(np.sqrt(np.mean(chunk ** 2)))
                    levels.append(20 * np.log10(rms + 1e-12))
            assert levels and max(levels) >= -40.0
    ok("simulator determinism (byte-identical) and -60/-40 dBFS localization")


def test_captioning_loop_and_templates(tone_bank):
    """Loop round counts, bounded rejection, feedback threading, template/rule."""
    meta = extract_metadata(plan_scene(tone_bank, SignalType.FREQUENCY, 5))
    request = CaptionRequest(task_type=meta.signal, metadata=meta)

    class Gen:
        backend_id = "stub"

        def __init__(self):
            self.received = []

        def __call__(self, req, feedback):
            self.received.append(feedback)
            return "caption"

    def scripted(rejections):
        state = {"n": 0}

        def disc(req, caption):
            state["n"] += 1
            if state["n"] <= rejections:
                return Feedback(Verdict.REVISE, f"fix {state['n']}")
            return Feedback(Verdict.SUCCESS)

        return disc

    assert generate_caption(request, Gen(), scripted(0)).rounds_used == 1
    assert generate_caption(request, Gen(), scripted(2)).rounds_used == 3

    recorder = Gen()
    with pytest.raises(CaptionRejected) as exc:
        generate_caption(request, recorder, scripted(99), max_rounds=5)
    assert len(exc.value.transcript) == 5
    assert recorder.received[0] is None
    assert [f.message for f in recorder.received[1:]] == \
        [f"fix {n}" for n in range(1, 5)]

    checked = 0
    for signal in SignalType:
        for seed in range(125):
            m = extract_metadata(plan_scene(tone_bank, signal, seed))
            req = CaptionRequest(task_type=signal, metadata=m)
            feedback = rule_discriminate(req, template_generate(req, seed))
            assert feedback.verdict is Verdict.SUCCESS, feedback.message
            checked += 1
    assert checked == 500
    ok("captioning loop rounds {1,3}, bounded at 5, feedback threading;"
       " 500 template captions accepted")


def test_ordering_corpus_shape(tmp_path_factory):
    """500 planned ordering clips: 2 events each, mean occurrences in [2, 4]."""
    bank_dir = tmp_path_factory.mktemp("shape_bank")
    bank = make_tone_bank(bank_dir)
    occurrences = []
    for i in range(500):
        spec = plan_scene(bank, SignalType.ORDERING, 1_000 + i)
        labels = {p.event_label for p in spec.placements}
        assert len(labels) == 2
        occurrences.append(len(spec.placements))
    mean = sum(occurrences) / len(occurrences)
    assert 2.0 <= mean <= 4.0, mean
    ok(f"ordering corpus shape: 2 events/clip, {mean:.2f} occurrences/clip")
