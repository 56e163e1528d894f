"""Hypothesis scoring functions and the temporal decay priority term."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .types import SearchNode, UsageError


class ScoreKind(str, Enum):
    ORIGINAL = "original"
    LENGTH_ADJUSTED = "length"
    MEMORYLESS = "last"


@dataclass(frozen=True)
class ScoreMode:
    """How a partial hypothesis is scored.

    ``ScoreMode.mean()`` (alpha=1) averages per-token log-probabilities;
    ``ScoreMode.last()`` keeps only the newest token's log-probability.
    """

    kind: ScoreKind = ScoreKind.ORIGINAL
    alpha: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ScoreKind(self.kind))
        if not math.isfinite(self.alpha) or self.alpha < 0:
            raise UsageError(f"alpha must be finite and >= 0, got {self.alpha}")

    @classmethod
    def original(cls) -> "ScoreMode":
        return cls(ScoreKind.ORIGINAL, 0.0)

    @classmethod
    def length(cls, alpha: float) -> "ScoreMode":
        return cls(ScoreKind.LENGTH_ADJUSTED, alpha)

    @classmethod
    def mean(cls) -> "ScoreMode":
        return cls(ScoreKind.LENGTH_ADJUSTED, 1.0)

    @classmethod
    def last(cls) -> "ScoreMode":
        return cls(ScoreKind.MEMORYLESS, 0.0)

    @classmethod
    def parse(cls, text: str) -> "ScoreMode":
        """``original``, ``last``/``memoryless``, ``mean``, or ``length:<alpha>``."""
        text = text.strip().lower()
        if text in ("original", "sum"):
            return cls.original()
        if text in ("last", "memoryless"):
            return cls.last()
        if text == "mean":
            return cls.mean()
        if text.startswith("length:"):
            try:
                alpha = float(text.split(":", 1)[1])
            except ValueError:
                raise UsageError(f"bad length exponent in {text!r}") from None
            return cls.length(alpha)
        raise UsageError(f"unknown score mode {text!r}")

    def __str__(self) -> str:
        if self.kind is ScoreKind.LENGTH_ADJUSTED:
            return f"length:{self.alpha:g}"
        return self.kind.value


@dataclass(frozen=True)
class DecayParams:
    kappa: float = 0.0
    beta: float = 0.5

    def __post_init__(self):
        if not 0 <= self.kappa < math.inf:
            raise UsageError(f"kappa must be finite and >= 0, got {self.kappa}")
        if not 0 < self.beta < math.inf:
            raise UsageError(f"beta must be finite and > 0, got {self.beta}")


KAPPA_GRID = (0.0, 0.01, 0.05, 0.1, 0.2)


def model_score(mode: ScoreMode, cum_logprob: float, depth: int, step_logprob: float) -> float:
    if mode.kind is ScoreKind.MEMORYLESS:
        return step_logprob
    if mode.kind is ScoreKind.ORIGINAL:
        return cum_logprob
    if depth < 1:
        raise UsageError("length-adjusted score needs depth >= 1")
    if mode.alpha == 0.0:
        return cum_logprob
    return cum_logprob / depth ** mode.alpha


def decay(node_time: int, now: int, params: DecayParams) -> float:
    """Priority penalty ``-kappa * age**beta`` for a node discovered at ``node_time``."""
    if now < node_time:
        raise UsageError(f"now ({now}) precedes node time ({node_time})")
    if params.kappa == 0.0:
        return 0.0
    return -params.kappa * float(now - node_time) ** params.beta


def adjusted_score(node: SearchNode, now: int, params: DecayParams) -> float:
    return node.model_score + decay(node.discovery_time, now, params)


def depth_bonus(depth: int, weight: float) -> float:
    # Experimental ablation only: degenerates the search into depth-first order.
    return weight * depth
