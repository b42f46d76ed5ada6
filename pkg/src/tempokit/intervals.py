from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True, order=True)
class Interval:
    """A half-open-ish time span in seconds; offset must lie strictly after onset."""

    onset: float
    offset: float

    def __post_init__(self) -> None:
        if self.onset < 0:
            raise ValueError(f"onset must be non-negative, got {self.onset}")
        if self.offset <= self.onset:
            raise ValueError(
                f"offset must exceed onset, got [{self.onset}, {self.offset}]"
            )

    def duration(self) -> float:
        return self.offset - self.onset

    def overlaps(self, other: Interval) -> bool:
        """True when the intersection has positive length (touching is not overlap)."""
        return self.onset < other.offset and other.onset < self.offset

    def intersection_length(self, other: Interval) -> float:
        return max(0.0, min(self.offset, other.offset) - max(self.onset, other.onset))

    def inflate(self, margin: float) -> "_Span":
        """Widen by margin on each side; result may have a negative onset."""
        return _Span(self.onset - margin, self.offset + margin)

    def shift(self, delta: float) -> Interval:
        return Interval(self.onset + delta, self.offset + delta)

    def to_pair(self) -> list:
        return [self.onset, self.offset]


@dataclass(frozen=True)
class _Span:
    """Unvalidated span used for guard-margin inflation (onset may be negative)."""

    onset: float
    offset: float

    def overlaps(self, other: "_Span") -> bool:
        return self.onset < other.offset and other.onset < self.offset
