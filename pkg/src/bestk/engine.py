"""Best-first and best-k search drivers."""

from __future__ import annotations

import dataclasses
import heapq
import math
import time
from dataclasses import dataclass, field
from typing import FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from .frontier import DEFAULT_CAPACITY, Frontier
from .models.base import ModelError, SequenceModel
from .scoring import DecayParams, ScoreMode, model_score
from .types import Hypothesis, NodeArena, UsageError, is_complete, is_truncated


@dataclass(frozen=True)
class DecodeConfig:
    """Parameters for one best-first / best-k run.

    ``budget`` caps explored (popped and expanded) nodes; for an equivalent
    beam size ``b`` use ``budget = b * max_len``. ``child_cap=None`` keeps at
    most ``k`` children per expansion, ``child_cap=0`` keeps every child that
    clears ``gamma``. ``termination=None`` takes the model vocabulary's set.
    """

    k: int = 1
    budget: int = 100
    max_len: int = 20
    score_mode: ScoreMode = field(default_factory=ScoreMode.mean)
    decay: DecayParams = field(default_factory=DecayParams)
    gamma: float = 0.05
    child_cap: Optional[int] = None
    frontier_capacity: int = DEFAULT_CAPACITY
    termination: Optional[FrozenSet[int]] = None
    depth_weight: float = 0.0

    def __post_init__(self):
        if self.k < 1:
            raise UsageError("k must be >= 1")
        if self.budget < 0:
            raise UsageError("budget must be >= 0")
        if self.max_len < 1:
            raise UsageError("max_len must be >= 1")
        if not 0.0 <= self.gamma < 1.0:
            raise UsageError("gamma must be in [0, 1)")
        if self.child_cap is not None and self.child_cap < 0:
            raise UsageError("child_cap must be >= 0")
        if self.frontier_capacity < 1:
            raise UsageError("frontier_capacity must be >= 1")

    @classmethod
    def for_beam_size(cls, b: int, max_len: int, **kw) -> "DecodeConfig":
        return cls(budget=b * max_len, max_len=max_len, **kw)

    @property
    def children_per_node(self) -> int:
        """Effective cap on children kept per expansion; 0 means no cap."""
        return self.k if self.child_cap is None else self.child_cap

    def resolved(self, model: SequenceModel) -> "DecodeConfig":
        if self.termination is not None:
            return self
        return dataclasses.replace(self, termination=model.vocab.termination_ids)


@dataclass
class DecodeResult:
    completed: List[Hypothesis] = field(default_factory=list)
    truncated: List[Hypothesis] = field(default_factory=list)
    explored_count: int = 0
    rounds: int = 0
    model_batch_calls: int = 0
    pruned_count: int = 0
    wall_time: float = 0.0
    arena: Optional[NodeArena] = None
    group_sizes: List[int] = field(default_factory=list)  # g per round

    @property
    def incomplete(self) -> bool:
        return not self.completed

    @property
    def unique_count(self) -> int:
        return len({h.tokens for h in self.completed})

    def hypotheses(self) -> List[Hypothesis]:
        return list(self.completed) + list(self.truncated)


class DecodeError(RuntimeError):
    """Decoding stopped on a model failure; ``result`` holds what was found."""

    def __init__(self, message: str, result: DecodeResult):
        super().__init__(message)
        self.result = result


def _select(dist, gamma: float, cap: int) -> List[Tuple[int, float]]:
    kept = [(t, lp) for t, lp in dist if math.exp(lp) >= gamma]
    kept.sort(key=lambda x: (-x[1], x[0]))
    return kept[:cap] if cap else kept


def _select_matrix(lp: np.ndarray, gamma: float, cap: int) -> List[List[Tuple[int, float]]]:
    """``_select`` for every row of a dense log-prob matrix at once."""
    order = np.argsort(-lp, axis=1, kind="stable")  # ties keep the lower id first
    if cap:
        order = order[:, :cap]
    vals = np.take_along_axis(lp, order, axis=1)
    rows = []
    for toks, lps in zip(order.tolist(), vals.tolist()):
        kept = []
        # survivors form a prefix of the descending order
        for t, v in zip(toks, lps):
            if v == -math.inf or math.exp(v) < gamma:
                break
            kept.append((t, v))
        rows.append(kept)
    return rows


def _candidates(model: SequenceModel, prefixes, gamma: float, cap: int) -> List[List[Tuple[int, float]]]:
    dense = getattr(model, "logprob_matrix", None)
    if dense is not None:
        lp = np.asarray(dense(prefixes))
        if lp.shape[0] != len(prefixes):
            raise ModelError(f"model answered {lp.shape[0]} of {len(prefixes)} prefixes")
        return _select_matrix(lp, gamma, cap)
    dists = model.next_logprobs(prefixes)
    if len(dists) != len(prefixes):
        raise ModelError(f"model answered {len(dists)} of {len(prefixes)} prefixes")
    return [_select(d, gamma, cap) for d in dists]


def expand_batch(
    arena: NodeArena,
    node_ids: Sequence[int],
    model: SequenceModel,
    config: DecodeConfig,
    now: int,
) -> Tuple[List[int], List[Hypothesis]]:
    """Expand several nodes with a single model call.

    Children below ``gamma`` are dropped, the rest capped per node. Complete
    children (termination token or length cap) come back as hypotheses and
    never enter the frontier; the others are returned as new node ids.
    """
    if not node_ids:
        return [], []
    prefixes = [arena.path(i) for i in node_ids]
    picked = _candidates(model, prefixes, config.gamma, config.children_per_node)
    children: List[int] = []
    done: List[Hypothesis] = []
    mode = config.score_mode
    for parent_id, cands in zip(node_ids, picked):
        if not cands:
            continue
        parent = arena[parent_id]
        depth = parent.depth + 1
        toks = [t for t, _ in cands]
        lps = [min(lp, 0.0) for _, lp in cands]
        scores = [model_score(mode, parent.cum_logprob + lp, depth, lp) for lp in lps]
        ids = arena.add_children(parent_id, toks, lps, now, scores)
        capped = depth >= config.max_len
        for child_id, tok in zip(ids, toks):
            ended = tok in config.termination
            if ended or capped:
                done.append(arena.reconstruct(child_id, complete=ended, truncated=not ended))
            else:
                children.append(child_id)
    return children, done


def expand(arena, node_id, model, config, now):
    return expand_batch(arena, [node_id], model, config, now)


def _record(result: DecodeResult, found: List[Hypothesis]) -> None:
    for h in found:
        (result.truncated if h.truncated else result.completed).append(h)


def bestk_decode(model: SequenceModel, config: DecodeConfig) -> DecodeResult:
    """Best-k search: each round pops the top ``k`` frontier nodes by
    decay-adjusted score and expands them in one batched model call."""
    config = config.resolved(model)
    arena = NodeArena(model.vocab.bos_id)
    frontier = Frontier(config.frontier_capacity, depth_weight=config.depth_weight)
    frontier.push_root(0)
    result = DecodeResult(arena=arena)
    t = 0
    start = time.perf_counter()
    try:
        while result.explored_count < config.budget:
            g = min(config.k, len(frontier))
            if g == 0:
                break
            group = frontier.pop_top_g(t, g, config.decay)
            result.model_batch_calls += 1
            children, found = expand_batch(arena, group, model, config, t)
            _record(result, found)
            nodes = arena.take(children)
            frontier.push_many(children, [n.model_score for n in nodes], [t] * len(nodes), [n.depth for n in nodes])
            # prune against the ranking the next round will see
            result.pruned_count += frontier.prune(t + 1, config.decay)
            result.explored_count += g
            result.group_sizes.append(g)
            result.rounds += 1
            t += 1
    except ModelError as exc:
        result.wall_time = time.perf_counter() - start
        raise DecodeError(f"model failure in round {t}: {exc}", result) from exc
    result.wall_time = time.perf_counter() - start
    return result


def bfs_decode(model: SequenceModel, config: DecodeConfig, use_decay: bool = False) -> DecodeResult:
    """Vanilla best-first search: expand the single best node per step.

    ``config.k`` is ignored. Decay is off unless ``use_decay`` is set. Nothing
    is ever pruned from the open set.
    """
    config = config.resolved(model)
    decay_on = use_decay and config.decay.kappa > 0
    arena = NodeArena(model.vocab.bos_id)
    result = DecodeResult(arena=arena)
    # Static scores: a plain heap keyed (-score, -time, id).
    heap: List[Tuple[float, int, int]] = []
    rescan = Frontier(capacity=2**62, depth_weight=config.depth_weight) if decay_on else None
    started = False
    t = 0
    start = time.perf_counter()
    try:
        while result.explored_count < config.budget:
            if not started:
                node_id = 0
                started = True
            elif rescan is not None:
                popped = rescan.pop_top_g(t, 1, config.decay)
                if not popped:
                    break
                node_id = popped[0]
            else:
                if not heap:
                    break
                node_id = heapq.heappop(heap)[2]
            result.model_batch_calls += 1
            children, found = expand(arena, node_id, model, config, t)
            _record(result, found)
            for c in children:
                node = arena[c]
                if rescan is not None:
                    rescan.push(c, node.model_score, node.discovery_time, node.depth)
                else:
                    key = node.model_score + config.depth_weight * node.depth
                    heapq.heappush(heap, (-key, -node.discovery_time, c))
            result.explored_count += 1
            result.group_sizes.append(1)
            result.rounds += 1
            t += 1
    except ModelError as exc:
        result.wall_time = time.perf_counter() - start
        raise DecodeError(f"model failure at step {t}: {exc}", result) from exc
    result.wall_time = time.perf_counter() - start
    return result
