"""Raga recognition by LSTM-attention sequence classification and triplet-loss retrieval."""

from ._ragaseq import *  # noqa: F401,F403
from ._ragaseq import __version__  # noqa: F401
