"""Unpaired sentiment-to-sentiment rewriting.

The pipeline separates a sentence into emotional words and neutral content
with a word tagger supervised by classifier attention, re-attaches sentiment
with per-polarity decoders, and tightens both with a reward-driven cycle.
"""

__version__ = "0.1.0"

from .nn import BACKEND

__all__ = ["BACKEND", "__version__"]
