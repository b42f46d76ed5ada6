import pytest

from tempokit.caption_engine import (
    CaptionRejected,
    CaptionRequest,
    Feedback,
    RuleDiscriminator,
    TemplateGenerator,
    Verdict,
    count_phrase,
    generate_caption,
    rule_discriminate,
    template_generate,
)
from tempokit.intervals import Interval
from tempokit.metadata import ClipMetadata, SignalType


def freq_meta(onsets, label="dog_bark", clip_id="c0"):
    return ClipMetadata(clip_id, SignalType.FREQUENCY, events={label: onsets})


def request_for(meta):
    return CaptionRequest(task_type=meta.signal, metadata=meta)


class AlwaysValidGenerator:
    backend_id = "stub"

    def __call__(self, request, feedback):
        return "a valid caption"


class ScriptedDiscriminator:
    def __init__(self, reject_rounds):
        self.reject_rounds = reject_rounds
        self.calls = 0

    def __call__(self, request, caption):
        self.calls += 1
        if self.calls <= self.reject_rounds:
            return Feedback(Verdict.REVISE, f"rejection {self.calls}")
        return Feedback(Verdict.SUCCESS)


class RecordingGenerator:
    backend_id = "recording"

    def __init__(self):
        self.received = []

    def __call__(self, request, feedback):
        self.received.append(feedback)
        return f"caption {len(self.received)}"


class TestLoop:
    def test_immediate_success(self):
        result = generate_caption(request_for(freq_meta([1.0])),
                                  AlwaysValidGenerator(),
                                  ScriptedDiscriminator(0))
        assert result.rounds_used == 1
        assert result.backend_id == "stub"

    def test_two_rejections_then_accept(self):
        result = generate_caption(request_for(freq_meta([1.0])),
                                  AlwaysValidGenerator(),
                                  ScriptedDiscriminator(2))
        assert result.rounds_used == 3
        assert len(result.transcript) == 3

    def test_rejected_after_exactly_max_rounds(self):
        with pytest.raises(CaptionRejected) as exc:
            generate_caption(request_for(freq_meta([1.0])),
                             AlwaysValidGenerator(),
                             ScriptedDiscriminator(99), max_rounds=5)
        assert len(exc.value.transcript) == 5

    def test_feedback_threading(self):
        gen = RecordingGenerator()
        with pytest.raises(CaptionRejected):
            generate_caption(request_for(freq_meta([1.0])), gen,
                             ScriptedDiscriminator(99), max_rounds=4)
        assert gen.received[0] is None
        for n, feedback in enumerate(gen.received[1:], start=1):
            assert feedback.verdict is Verdict.REVISE
            assert feedback.message == f"rejection {n}"

    def test_transcript_length_equals_rounds(self):
        for reject in (0, 1, 3):
            result = generate_caption(request_for(freq_meta([1.0])),
                                      AlwaysValidGenerator(),
                                      ScriptedDiscriminator(reject))
            assert len(result.transcript) == result.rounds_used


class TestTemplates:
    def test_frequency_caption(self):
        text = template_generate(request_for(freq_meta([1.0, 4.2, 7.7])))
        assert "dog bark" in text.lower()
        assert "three times" in text

    def test_ordering_caption(self):
        meta = ClipMetadata("c0", SignalType.ORDERING, events={
            "dog_bark": [Interval(0.5, 1.5)],
            "car_horn": [Interval(5.0, 6.0)],
        })
        text = template_generate(request_for(meta))
        low = text.lower()
        assert "followed by" in low
        assert low.index("dog bark") < low.index("car horn")

    def test_duration_caption(self):
        meta = ClipMetadata("c0", SignalType.DURATION, events={"car_horn": 3.5})
        text = template_generate(request_for(meta))
        assert "3.5 seconds" in text

    def test_timestamp_caption(self):
        meta = ClipMetadata("c0", SignalType.TIMESTAMP, events={
            "bell": [Interval(2.0, 4.5)]})
        text = template_generate(request_for(meta))
        assert "2.0" in text and "4.5" in text

    def test_counts_spelled_out(self):
        assert count_phrase(1) == "once"
        assert count_phrase(2) == "twice"
        assert count_phrase(10) == "ten times"
        assert count_phrase(11) == "11 times"


class TestRules:
    def test_template_output_accepted(self):
        req = request_for(freq_meta([1.0, 2.0]))
        feedback = rule_discriminate(req, template_generate(req))
        assert feedback.verdict is Verdict.SUCCESS

    def test_frequency_mismatch(self):
        req = request_for(freq_meta([1.0, 2.0, 3.0]))
        feedback = rule_discriminate(req, "A dog bark sounds twice.")
        assert feedback.verdict is Verdict.REVISE
        assert "three times" in feedback.message

    def test_missing_label_named(self):
        meta = ClipMetadata("c0", SignalType.DURATION,
                            events={"car_horn": 3.5, "dog_bark": 2.0})
        req = request_for(meta)
        feedback = rule_discriminate(
            req, "A car horn sounds for 3.5 seconds and 2.0 seconds.")
        assert feedback.verdict is Verdict.REVISE
        assert "dog bark" in feedback.message

    def test_ordering_wrong_order(self):
        meta = ClipMetadata("c0", SignalType.ORDERING, events={
            "dog_bark": [Interval(0.5, 1.5)],
            "car_horn": [Interval(5.0, 6.0)],
        })
        feedback = rule_discriminate(
            request_for(meta), "A car horn, followed by a dog bark.")
        assert feedback.verdict is Verdict.REVISE

    def test_template_loop_succeeds_in_one_round(self):
        req = request_for(freq_meta([1.0]))
        result = generate_caption(req, TemplateGenerator(), RuleDiscriminator())
        assert result.rounds_used == 1
        assert result.backend_id == "template"


def test_request_signal_must_match_metadata():
    with pytest.raises(ValueError):
        CaptionRequest(task_type=SignalType.DURATION, metadata=freq_meta([1.0]))


def test_feedback_invariants():
    with pytest.raises(ValueError):
        Feedback(Verdict.REVISE, "")
    with pytest.raises(ValueError):
        Feedback(Verdict.SUCCESS, "oops")


class TestHttpParsing:
    class FakeBackend:
        class config:
            model = "fake-model"

        def __init__(self, replies):
            self.replies = list(replies)
            self.sent = []

        def complete(self, system, user):
            self.sent.append((system, user))
            return self.replies.pop(0)

    def test_ok_reply_is_success(self):
        from tempokit.caption_engine import HttpDiscriminator

        disc = HttpDiscriminator(self.FakeBackend(["OK"]))
        feedback = disc(request_for(freq_meta([1.0])), "some caption")
        assert feedback.verdict is Verdict.SUCCESS

    def test_other_reply_is_revise_with_message(self):
        from tempokit.caption_engine import HttpDiscriminator

        disc = HttpDiscriminator(self.FakeBackend(["The count is wrong."]))
        feedback = disc(request_for(freq_meta([1.0])), "some caption")
        assert feedback.verdict is Verdict.REVISE
        assert feedback.message == "The count is wrong."

    def test_generator_threads_feedback_into_prompt(self):
        from tempokit.caption_engine import HttpGenerator

        backend = self.FakeBackend(["a caption", "a better caption"])
        gen = HttpGenerator(backend)
        req = request_for(freq_meta([1.0]))
        gen(req, None)
        gen(req, Feedback(Verdict.REVISE, "count the barks"))
        assert "count the barks" in backend.sent[1][1]
        assert "count the barks" not in backend.sent[0][1]


def test_template_always_passes_rules_on_planned_scenes(tone_bank):
    from tempokit.scene_simulator import extract_metadata, plan_scene

    checked = 0
    for signal in SignalType:
        for seed in range(30):
            meta = extract_metadata(plan_scene(tone_bank, signal, seed))
            req = request_for(meta)
            feedback = rule_discriminate(req, template_generate(req, seed))
            assert feedback.verdict is Verdict.SUCCESS, feedback.message
            checked += 1
    assert checked == 120
