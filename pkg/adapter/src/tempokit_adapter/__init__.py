"""Adapter wrapping audio-text models into tempokit's score/detection files."""

__version__ = "0.1.0"

SCHEMA_VERSION = "1"
