"""tempokit: temporally-aligned audio-text corpus construction and evaluation."""

__version__ = "0.1.0"

SCHEMA_VERSION = "1"
