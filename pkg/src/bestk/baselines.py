"""Comparison decoders: beam search, diverse beam search, nucleus/typical
sampling and beam search with sampled candidates.

All of them share the ``SequenceModel`` interface and report results as a
``DecodeResult`` so budgets and outputs compare directly with best-k search.
"""

from __future__ import annotations

import dataclasses
import math
import time
from collections import Counter
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .engine import DecodeResult
from .models.base import ModelError, SequenceModel
from .scoring import ScoreMode, model_score
from .types import Hypothesis, NodeArena, UsageError

DistFilter = Callable[[Mapping[int, float]], Dict[int, float]]

MASS_TOLERANCE = 1e-6


@dataclass(frozen=True)
class Sampling:
    kind: str  # "nucleus" | "typical"
    value: float

    def __post_init__(self):
        if self.kind not in ("nucleus", "typical"):
            raise UsageError(f"unknown sampling kind {self.kind!r}")
        if not 0.0 < self.value <= 1.0:
            raise UsageError(f"{self.kind} parameter must be in (0, 1]")

    def filter(self) -> DistFilter:
        if self.kind == "nucleus":
            return partial(nucleus_filter, p=self.value)
        return partial(typical_filter, tau=self.value)


@dataclass(frozen=True)
class BeamConfig:
    beam_size: int = 10
    max_len: int = 20
    score_mode: ScoreMode = field(default_factory=ScoreMode.original)
    groups: int = 1
    diversity_penalty: float = 0.0
    sampling: Optional[Sampling] = None
    num_return: Optional[int] = None
    seed: Optional[int] = None
    termination: Optional[FrozenSet[int]] = None

    def __post_init__(self):
        if self.beam_size < 1:
            raise UsageError("beam_size must be >= 1")
        if self.max_len < 1:
            raise UsageError("max_len must be >= 1")
        if not 1 <= self.groups <= self.beam_size:
            raise UsageError("groups must be in [1, beam_size]")
        if self.groups > 1 and self.beam_size % self.groups:
            raise UsageError("beam_size must be divisible by groups")
        if self.diversity_penalty < 0:
            raise UsageError("diversity_penalty must be >= 0")

    @property
    def returned(self) -> int:
        return self.num_return if self.num_return is not None else self.beam_size


# ---------------------------------------------------------------- filters

def _check(dist: Mapping[int, float]) -> None:
    if not dist:
        raise UsageError("empty distribution")
    total = math.fsum(dist.values())
    if abs(total - 1.0) > MASS_TOLERANCE or any(p < 0 for p in dist.values()):
        raise UsageError(f"not a probability distribution (mass {total})")


def _keep_prefix(ranked: Sequence[Tuple[int, float]], mass: float) -> Dict[int, float]:
    kept, acc = [], 0.0
    for tok, p in ranked:
        kept.append((tok, p))
        acc += p
        if acc >= mass - 1e-12:
            break
    total = math.fsum(p for _, p in kept)
    return {tok: p / total for tok, p in kept}


def nucleus_filter(dist: Mapping[int, float], p: float) -> Dict[int, float]:
    """Smallest highest-probability set with mass >= ``p``, renormalized."""
    _check(dist)
    if not 0.0 < p <= 1.0:
        raise UsageError("p must be in (0, 1]")
    ranked = sorted(dist.items(), key=lambda x: (-x[1], x[0]))
    return _keep_prefix(ranked, p)


def typical_filter(dist: Mapping[int, float], tau: float) -> Dict[int, float]:
    """Locally typical set: tokens ordered by ``|-log p - H|``, mass >= ``tau``."""
    _check(dist)
    if not 0.0 < tau <= 1.0:
        raise UsageError("tau must be in (0, 1]")
    entropy = -math.fsum(p * math.log(p) for p in dist.values() if p > 0)
    ranked = sorted(
        ((t, p) for t, p in dist.items() if p > 0),
        key=lambda x: (abs(-math.log(x[1]) - entropy), x[0]),
    )
    return _keep_prefix(ranked, tau)


def to_probs(dist) -> Dict[int, float]:
    """Sparse log-prob list -> renormalized probability dict."""
    probs = {t: math.exp(lp) for t, lp in dist}
    total = math.fsum(probs.values())
    if total <= 0:
        raise ModelError("model returned an empty distribution")
    return {t: p / total for t, p in probs.items()}


# ---------------------------------------------------------------- beam search

@dataclass
class _Group:
    live: List[int]
    size: int


def _termination(model: SequenceModel, termination) -> FrozenSet[int]:
    return model.vocab.termination_ids if termination is None else termination


def _finish(result: DecodeResult, finished: List[Hypothesis], num_return: int) -> DecodeResult:
    done = [h for h in finished if not h.truncated]
    trunc = [h for h in finished if h.truncated]
    done.sort(key=lambda h: -h.model_score)
    trunc.sort(key=lambda h: -h.model_score)
    result.completed = done[:num_return]
    result.truncated = trunc
    return result


def _run_beams(
    model: SequenceModel,
    config: BeamConfig,
    candidates_for: Callable[[int, List[Tuple[int, float]]], List[Tuple[int, float]]],
) -> DecodeResult:
    """Length-synchronous beam search over ``config.groups`` groups.

    At each depth every group keeps its ``beam_size / groups`` best
    candidates; those that end a hypothesis are set aside and the rest stay
    live. ``candidates_for(beam_node, dist)`` picks which (token, logprob)
    pairs a live beam may extend with.
    """
    term = _termination(model, config.termination)
    arena = NodeArena(model.vocab.bos_id)
    result = DecodeResult(arena=arena)
    width = config.beam_size // config.groups
    groups = [_Group([0], width) for _ in range(config.groups)]
    finished: List[Hypothesis] = []
    start = time.perf_counter()
    for depth in range(1, config.max_len + 1):
        live = [b for g in groups for b in g.live]
        if not live:
            break
        dists = model.next_logprobs([arena.path(b) for b in live])
        if len(dists) != len(live):
            raise ModelError(f"model answered {len(dists)} of {len(live)} prefixes")
        by_beam = dict(zip(live, dists))
        result.model_batch_calls += 1
        result.rounds += 1
        result.explored_count += len(live)
        chosen_tokens: Counter = Counter()
        for g in groups:
            pool = []
            for order, beam in enumerate(g.live):
                parent = arena[beam]
                for tok, lp in candidates_for(beam, by_beam[beam]):
                    lp = min(lp, 0.0)
                    score = model_score(config.score_mode, parent.cum_logprob + lp, depth, lp)
                    rank = score - config.diversity_penalty * chosen_tokens[tok]
                    pool.append((-rank, order, tok, beam, lp, score))
            pool.sort()
            new_live = []
            for _, _, tok, beam, lp, score in pool[: g.size]:
                chosen_tokens[tok] += 1
                node_id = arena.add(beam, tok, lp, depth - 1, score)
                if tok in term or depth >= config.max_len:
                    trunc = tok not in term
                    finished.append(arena.reconstruct(node_id, complete=not trunc, truncated=trunc))
                else:
                    new_live.append(node_id)
            g.live = new_live
    result.wall_time = time.perf_counter() - start
    return _finish(result, finished, config.returned)


def _all_candidates(beam, dist):
    return dist


def beam_search(model: SequenceModel, config: BeamConfig) -> DecodeResult:
    if config.groups != 1 or config.sampling is not None:
        raise UsageError("beam_search needs groups=1 and no sampling")
    return _run_beams(model, config, _all_candidates)


def diverse_beam_search(model: SequenceModel, config: BeamConfig) -> DecodeResult:
    """Groups decoded in turn at each step; a group's candidate scores are
    lowered by ``diversity_penalty`` per earlier selection of the same token
    at that step (Hamming diversity)."""
    if config.groups < 2:
        raise UsageError("diverse_beam_search needs groups >= 2")
    if config.sampling is not None:
        raise UsageError("diverse_beam_search does not sample")
    return _run_beams(model, config, _all_candidates)


def beam_sample_decode(model: SequenceModel, config: BeamConfig) -> DecodeResult:
    """Beam search whose per-beam candidates are drawn, without replacement,
    from the filtered next-token distribution instead of taken top-down."""
    if config.sampling is None or config.groups != 1:
        raise UsageError("beam_sample_decode needs a sampling filter and groups=1")
    if config.seed is None:
        raise UsageError("beam_sample_decode needs a seed")
    rng = np.random.default_rng(config.seed)
    filt = config.sampling.filter()

    def sampled(beam, dist):
        logp = dict(dist)
        kept = filt(to_probs(dist))
        toks = sorted(kept)
        p = np.array([kept[t] for t in toks])
        n = min(config.beam_size, int(np.count_nonzero(p)))
        picks = rng.choice(len(toks), size=n, replace=False, p=p / p.sum())
        return [(toks[i], logp[toks[i]]) for i in picks]

    return _run_beams(model, config, sampled)


# ---------------------------------------------------------------- sampling

def sample_decode(
    model: SequenceModel,
    filter: Optional[DistFilter],
    num_samples: int,
    max_len: int,
    seed: int,
    score_mode: ScoreMode = ScoreMode.original(),
    termination: Optional[FrozenSet[int]] = None,
) -> DecodeResult:
    """Ancestral sampling of ``num_samples`` independent sequences.

    Duplicates stay in ``completed``; ``unique_count`` gives |S|. Samples are
    advanced together, one batched model call per depth.
    """
    if num_samples < 1:
        raise UsageError("num_samples must be >= 1")
    if seed is None:
        raise UsageError("sample_decode needs a seed")
    term = _termination(model, termination)
    rng = np.random.default_rng(seed)
    arena = NodeArena(model.vocab.bos_id)
    result = DecodeResult(arena=arena)
    slots: List[Optional[int]] = [0] * num_samples
    outcome: List[Optional[Hypothesis]] = [None] * num_samples
    start = time.perf_counter()
    for depth in range(1, max_len + 1):
        active = [i for i, node in enumerate(slots) if node is not None]
        if not active:
            break
        dists = model.next_logprobs([arena.path(slots[i]) for i in active])
        if len(dists) != len(active):
            raise ModelError(f"model answered {len(dists)} of {len(active)} prefixes")
        result.model_batch_calls += 1
        result.rounds += 1
        result.explored_count += len(active)
        for i, dist in zip(active, dists):
            logp = dict(dist)
            probs = to_probs(dist)
            if filter is not None:
                probs = filter(probs)
            toks = sorted(probs)
            cdf = np.cumsum([probs[t] for t in toks])
            j = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
            tok = toks[min(j, len(toks) - 1)]
            lp = min(logp[tok], 0.0)
            parent = arena[slots[i]]
            score = model_score(score_mode, parent.cum_logprob + lp, depth, lp)
            node_id = arena.add(slots[i], tok, lp, depth - 1, score)
            if tok in term or depth >= max_len:
                trunc = tok not in term
                outcome[i] = arena.reconstruct(node_id, complete=not trunc, truncated=trunc)
                slots[i] = None
            else:
                slots[i] = node_id
    result.wall_time = time.perf_counter() - start
    result.completed = [h for h in outcome if h is not None and not h.truncated]
    result.truncated = [h for h in outcome if h is not None and h.truncated]
    return result


def make_filter(kind: Optional[str], value: float = 1.0) -> Optional[DistFilter]:
    if kind is None or kind == "none":
        return None
    return Sampling(kind, value).filter()


def with_seed(config: BeamConfig, seed: int) -> BeamConfig:
    return dataclasses.replace(config, seed=seed)
