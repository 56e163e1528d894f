"""Best-k search and baseline decoders for sequence models."""

from .types import (
    BOS,
    EOS,
    Hypothesis,
    NodeArena,
    SearchNode,
    Token,
    UsageError,
    Vocabulary,
)
from .scoring import DecayParams, ScoreMode, adjusted_score, decay, model_score
from .frontier import Frontier
from .engine import (
    DecodeConfig,
    DecodeError,
    DecodeResult,
    bestk_decode,
    bfs_decode,
    expand,
)

__version__ = "0.1.0"

__all__ = [
    "BOS",
    "EOS",
    "DecayParams",
    "DecodeConfig",
    "DecodeError",
    "DecodeResult",
    "Frontier",
    "Hypothesis",
    "NodeArena",
    "ScoreMode",
    "SearchNode",
    "Token",
    "UsageError",
    "Vocabulary",
    "adjusted_score",
    "bestk_decode",
    "bfs_decode",
    "decay",
    "expand",
    "model_score",
]
