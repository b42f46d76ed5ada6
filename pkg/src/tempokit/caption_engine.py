"""Caption generation via an iterative generator/discriminator loop.

A generator proposes a caption from the clip's temporal annotation; a
discriminator checks it and either accepts or returns feedback, which is
threaded into the next generator call. Two backend pairs ship: a
deterministic template/rule pair for offline use, and an HTTP
chat-completion client.
"""

from __future__ import annotations

import json
import os
import random
import re
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

from . import SCHEMA_VERSION
from .metadata import ClipMetadata, SignalType


class Verdict(Enum):
    SUCCESS = "success"
    REVISE = "revise"


@dataclass(frozen=True)
class Feedback:
    verdict: Verdict
    message: str = ""

    def __post_init__(self) -> None:
        if self.verdict is Verdict.REVISE and not self.message:
            raise ValueError("revise feedback needs a message")
        if self.verdict is Verdict.SUCCESS and self.message:
            raise ValueError("success feedback must carry no message")


@dataclass(frozen=True)
class CaptionRequest:
    task_type: SignalType
    metadata: ClipMetadata

    def __post_init__(self) -> None:
        if self.metadata.signal is not self.task_type:
            raise ValueError("metadata signal does not match the task type")


@dataclass(frozen=True)
class CaptionResult:
    text: str
    rounds_used: int
    backend_id: str
    transcript: list = field(default_factory=list)


class CaptionRejected(Exception):
    def __init__(self, transcript: list):
        self.transcript = transcript
        super().__init__(
            f"no caption accepted after {len(transcript)} rounds"
        )


class BackendError(Exception):
    pass


def generate_caption(request: CaptionRequest, generator, discriminator,
                     max_rounds: int = 5) -> CaptionResult:
    """Run the propose/review loop until the discriminator accepts.

    `generator(request, feedback)` returns a caption; `discriminator(request,
    caption)` returns Feedback. Raises CaptionRejected with the full
    transcript once max_rounds is exhausted.
    """
    if max_rounds < 1:
        raise ValueError("max_rounds must be at least 1")
    transcript: list[tuple[str, Feedback]] = []
    feedback: Feedback | None = None
    for round_n in range(1, max_rounds + 1):
        caption = generator(request, feedback)
        feedback = discriminator(request, caption)
        transcript.append((caption, feedback))
        if feedback.verdict is Verdict.SUCCESS:
            return CaptionResult(
                text=caption,
                rounds_used=round_n,
                backend_id=getattr(generator, "backend_id", "custom"),
                transcript=transcript,
            )
    raise CaptionRejected(transcript)


_SMALL_COUNTS = {1: "once", 2: "twice", 3: "three times", 4: "four times",
                 5: "five times", 6: "six times", 7: "seven times",
                 8: "eight times", 9: "nine times", 10: "ten times"}


def count_phrase(n: int) -> str:
    return _SMALL_COUNTS.get(n, f"{n} times")


def surface_form(event_label: str) -> str:
    return event_label.replace("_", " ").strip().lower()


def _article(noun: str) -> str:
    return "an" if noun[:1] in "aeiou" else "a"


_VERBS = ("sounds", "occurs", "is heard")


def template_generate(request: CaptionRequest, seed: int = 0) -> str:
    """Deterministic caption embedding every number the annotation specifies."""
    meta = request.metadata
    rng = random.Random(f"{meta.clip_id}:{seed}")
    verb = rng.choice(_VERBS)
    signal = meta.signal

    if signal is SignalType.ORDERING:
        (lab_a, ivs_a), (lab_b, _) = list(meta.events.items())[:2]
        a, b = surface_form(lab_a), surface_form(lab_b)
        lead = f"{_article(a).capitalize()} {a}"
        if len(ivs_a) > 1:
            lead += f" {verb} {count_phrase(len(ivs_a))}"
        return f"{lead}, followed by {_article(b)} {b}."

    parts = []
    for label, payload in meta.events.items():
        name = surface_form(label)
        if signal is SignalType.DURATION:
            parts.append(f"{_article(name)} {name} {verb} for {payload:.1f} seconds")
        elif signal is SignalType.FREQUENCY:
            parts.append(f"{_article(name)} {name} {verb} {count_phrase(len(payload))}")
        else:
            spans = " and ".join(
                f"from {iv.onset:.1f} to {iv.offset:.1f} seconds" for iv in payload
            )
            parts.append(f"{_article(name)} {name} {verb} {spans}")
    text = "; ".join(parts)
    return text[0].upper() + text[1:] + "."


def rule_discriminate(request: CaptionRequest, caption: str) -> Feedback:
    """Accept iff every event's surface form and required quantity appear."""
    meta = request.metadata
    lowered = caption.lower()
    signal = meta.signal

    for label, payload in meta.events.items():
        name = surface_form(label)
        if name not in lowered:
            return Feedback(Verdict.REVISE, f"caption does not mention '{name}'")
        if signal is SignalType.DURATION:
            if f"{payload:.1f}" not in lowered or "second" not in lowered:
                return Feedback(
                    Verdict.REVISE,
                    f"caption does not state the {payload:.1f} second duration"
                    f" of '{name}'",
                )
        elif signal is SignalType.FREQUENCY:
            if count_phrase(len(payload)) not in lowered:
                return Feedback(
                    Verdict.REVISE,
                    f"caption does not state that '{name}' occurs"
                    f" {count_phrase(len(payload))}",
                )
        elif signal is SignalType.TIMESTAMP:
            for iv in payload:
                if f"{iv.onset:.1f}" not in lowered or f"{iv.offset:.1f}" not in lowered:
                    return Feedback(
                        Verdict.REVISE,
                        f"caption does not give both endpoints"
                        f" {iv.onset:.1f}-{iv.offset:.1f} for '{name}'",
                    )

    if signal is SignalType.ORDERING:
        lab_a, lab_b = list(meta.events)[:2]
        a, b = surface_form(lab_a), surface_form(lab_b)
        connectives = ("followed by", "then", "before", "after which")
        if not any(c in lowered for c in connectives):
            return Feedback(Verdict.REVISE, "caption lacks an order connective")
        if lowered.find(a) > lowered.find(b):
            return Feedback(
                Verdict.REVISE, f"caption mentions '{b}' before '{a}'"
            )
    return Feedback(Verdict.SUCCESS)


class TemplateGenerator:
    """Offline deterministic generator; advances its seed on each revision."""

    backend_id = "template"

    def __init__(self, seed: int = 0):
        self.seed = seed
        self._rounds = 0

    def __call__(self, request: CaptionRequest, feedback: Feedback | None) -> str:
        self._rounds += 1
        return template_generate(request, self.seed + self._rounds - 1)


class RuleDiscriminator:
    backend_id = "rule"

    def __call__(self, request: CaptionRequest, caption: str) -> Feedback:
        return rule_discriminate(request, caption)


def _load_prompt(role: str) -> str:
    return resources.files("tempokit").joinpath(f"prompts/{role}.txt").read_text()


def _metadata_brief(meta: ClipMetadata) -> str:
    from .metadata import metadata_to_json

    return json.dumps(metadata_to_json(meta), sort_keys=True)


@dataclass
class HttpBackendConfig:
    endpoint: str
    model: str
    token_env: str = "TEMPOKIT_API_TOKEN"
    timeout: float = 60.0
    max_concurrency: int = 4


class HttpChatBackend:
    """Minimal chat-completion client; one POST per completion."""

    def __init__(self, config: HttpBackendConfig):
        self.config = config
        self._gate = threading.Semaphore(config.max_concurrency)

    def complete(self, system: str, user: str) -> str:
        import requests

        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.config.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        payload = {
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
        }
        with self._gate:
            try:
                resp = requests.post(self.config.endpoint, json=payload,
                                     headers=headers, timeout=self.config.timeout)
                resp.raise_for_status()
                return resp.json()["choices"][0]["message"]["content"]
            except Exception as e:
                raise BackendError(f"chat completion failed: {e}") from e


class HttpGenerator:
    def __init__(self, backend: HttpChatBackend):
        self.backend = backend
        self.backend_id = f"http:{backend.config.model}"

    def __call__(self, request: CaptionRequest, feedback: Feedback | None) -> str:
        system = _load_prompt("generator").format(
            signal=request.task_type.value)
        user = f"Metadata: {_metadata_brief(request.metadata)}"
        if feedback is not None and feedback.verdict is Verdict.REVISE:
            user += f"\nFeedback on your previous caption: {feedback.message}"
        return self.backend.complete(system, user).strip()


class HttpDiscriminator:
    def __init__(self, backend: HttpChatBackend):
        self.backend = backend
        self.backend_id = f"http:{backend.config.model}"

    def __call__(self, request: CaptionRequest, caption: str) -> Feedback:
        system = _load_prompt("discriminator").format(
            signal=request.task_type.value)
        user = (f"Metadata: {_metadata_brief(request.metadata)}\n"
                f"Caption: {caption}")
        reply = self.backend.complete(system, user).strip()
        if re.match(r"^(ok|success)\b", reply, flags=re.IGNORECASE):
            return Feedback(Verdict.SUCCESS)
        return Feedback(Verdict.REVISE, reply or "caption rejected")


def caption_corpus(metas: list[ClipMetadata], generator_factory,
                   discriminator_factory, max_rounds: int = 5,
                   concurrency: int = 4) -> list[dict]:
    """Caption a metadata corpus; returns JSON-ready records in input order."""

    def one(meta: ClipMetadata) -> dict:
        request = CaptionRequest(task_type=meta.signal, metadata=meta)
        result = generate_caption(request, generator_factory(),
                                  discriminator_factory(), max_rounds)
        return {
            "schema_version": SCHEMA_VERSION,
            "clip_id": meta.clip_id,
            "signal": meta.signal.value,
            "text": result.text,
            "rounds_used": result.rounds_used,
            "backend_id": result.backend_id,
        }

    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
        return list(pool.map(one, metas))


def save_captions(records: list[dict], path: str | Path) -> None:
    Path(path).write_text(json.dumps(records, indent=2, sort_keys=True))
