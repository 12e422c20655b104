"""Joint word confidence, deletion and utterance confidence estimation."""

__version__ = "0.1.0"
