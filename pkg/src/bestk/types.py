"""Vocabulary, search-graph nodes and hypotheses shared by every decoder."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, List, NamedTuple, Optional, Sequence, Tuple

BOS = "<s>"
EOS = "</s>"


class UsageError(ValueError):
    """A caller violated an operation's precondition."""


@dataclass(frozen=True)
class Token:
    id: int
    surface: str


class Vocabulary:
    """Ordered token surfaces with reserved BOS/EOS ids.

    Extra termination tokens (e.g. a sentence-final period) can be registered
    so that ``is_complete`` treats them like EOS.
    """

    def __init__(
        self,
        surfaces: Sequence[str],
        bos: str = BOS,
        eos: str = EOS,
        extra_termination: Iterable[str] = (),
    ):
        surfaces = list(surfaces)
        if len(set(surfaces)) != len(surfaces):
            raise UsageError("vocabulary surfaces must be unique")
        if bos == eos:
            raise UsageError("BOS and EOS must differ")
        for s in surfaces:
            if not s:
                raise UsageError("empty token surface")
        self._surfaces = surfaces
        self._index = {s: i for i, s in enumerate(surfaces)}
        try:
            self.bos_id = self._index[bos]
            self.eos_id = self._index[eos]
        except KeyError as exc:
            raise UsageError(f"reserved token {exc} missing from vocabulary") from None
        extra = {self._index[s] for s in extra_termination}
        if self.bos_id in extra:
            raise UsageError("BOS cannot be a termination token")
        self.termination_ids = frozenset({self.eos_id} | extra)

    @classmethod
    def build(cls, tokens: Iterable[str], bos: str = BOS, eos: str = EOS, **kw) -> "Vocabulary":
        """BOS at id 0, EOS at id 1, then first-seen order of ``tokens``."""
        ordered = [bos, eos]
        seen = set(ordered)
        for t in tokens:
            if t not in seen:
                seen.add(t)
                ordered.append(t)
        return cls(ordered, bos=bos, eos=eos, **kw)

    def __len__(self) -> int:
        return len(self._surfaces)

    def __getitem__(self, token_id: int) -> Token:
        if not 0 <= token_id < len(self._surfaces):
            raise UsageError(f"token id {token_id} out of range")
        return Token(token_id, self._surfaces[token_id])

    def __contains__(self, surface: str) -> bool:
        return surface in self._index

    def __iter__(self) -> Iterator[Token]:
        return (Token(i, s) for i, s in enumerate(self._surfaces))

    @property
    def surfaces(self) -> List[str]:
        return list(self._surfaces)

    def id(self, surface: str) -> int:
        try:
            return self._index[surface]
        except KeyError:
            raise UsageError(f"unknown token {surface!r}") from None

    def encode(self, surfaces: Iterable[str]) -> List[int]:
        return [self.id(s) for s in surfaces]

    def decode(self, ids: Iterable[int], strip_special: bool = True) -> List[str]:
        out = []
        for i in ids:
            if strip_special and (i == self.bos_id or i in self.termination_ids):
                continue
            out.append(self._surfaces[i])
        return out


class SearchNode(NamedTuple):
    # a tuple keeps per-node construction cheap; the arena creates one per child
    node_id: int
    parent_id: Optional[int]
    token_id: int
    step_logprob: float
    cum_logprob: float
    depth: int
    model_score: float
    discovery_time: int


@dataclass(frozen=True)
class Hypothesis:
    tokens: Tuple[int, ...]
    cum_logprob: float
    model_score: float
    complete: bool
    truncated: bool = False
    node_id: Optional[int] = field(default=None, compare=False)

    @property
    def depth(self) -> int:
        return len(self.tokens) - 1


class NodeArena:
    """Append-only store of every node discovered during one search run.

    Node 0 is the BOS root. Frontier pruning never touches the arena, so any
    discovered node can still be reconstructed after the search ends.
    """

    def __init__(self, bos_id: int):
        self._nodes: List[SearchNode] = [
            SearchNode(0, None, bos_id, 0.0, 0.0, 0, 0.0, -1)
        ]
        self._paths: List[Optional[Tuple[int, ...]]] = [(bos_id,)]

    def __len__(self) -> int:
        return len(self._nodes)

    def __getitem__(self, node_id: int) -> SearchNode:
        if not isinstance(node_id, int) or not 0 <= node_id < len(self._nodes):
            raise UsageError(f"unknown node id {node_id!r}")
        return self._nodes[node_id]

    def __iter__(self) -> Iterator[SearchNode]:
        return iter(self._nodes)

    @property
    def root(self) -> SearchNode:
        return self._nodes[0]

    def add(
        self,
        parent_id: int,
        token_id: int,
        step_logprob: float,
        now: int,
        model_score: float,
    ) -> int:
        parent = self[parent_id]
        if step_logprob > 0.0:
            raise UsageError(f"step log-probability must be <= 0, got {step_logprob}")
        if now <= parent.discovery_time:
            raise UsageError(
                f"discovery time {now} does not follow parent time {parent.discovery_time}"
            )
        node = SearchNode(
            node_id=len(self._nodes),
            parent_id=parent_id,
            token_id=token_id,
            step_logprob=step_logprob,
            cum_logprob=parent.cum_logprob + step_logprob,
            depth=parent.depth + 1,
            model_score=model_score,
            discovery_time=now,
        )
        self._nodes.append(node)
        self._paths.append(None)
        return node.node_id

    def take(self, node_ids: Iterable[int]) -> List[SearchNode]:
        nodes = self._nodes
        return [nodes[i] for i in node_ids]

    def add_children(self, parent_id: int, tokens, logprobs, now: int, scores) -> range:
        """Append siblings under one parent; same checks as ``add``, done once."""
        parent = self[parent_id]
        if now <= parent.discovery_time:
            raise UsageError(
                f"discovery time {now} does not follow parent time {parent.discovery_time}"
            )
        if any(lp > 0.0 for lp in logprobs):
            raise UsageError(f"step log-probability must be <= 0, got {max(logprobs)}")
        first = len(self._nodes)
        depth = parent.depth + 1
        base = parent.cum_logprob
        self._nodes.extend([
            SearchNode(i, parent_id, tok, lp, base + lp, depth, score, now)
            for i, tok, lp, score in zip(itertools.count(first), tokens, logprobs, scores)
        ])
        self._paths.extend([None] * (len(self._nodes) - first))
        return range(first, len(self._nodes))

    def path(self, node_id: int) -> Tuple[int, ...]:
        """Token ids from the root (BOS) to ``node_id`` inclusive."""
        self[node_id]
        return self._path(node_id)

    def _path(self, node_id: int) -> Tuple[int, ...]:
        paths, nodes = self._paths, self._nodes
        # walk up to the nearest cached ancestor, then fill the cache downwards
        pending = []
        i = node_id
        while paths[i] is None:
            pending.append(i)
            i = nodes[i].parent_id
        out = paths[i]
        for j in reversed(pending):
            out = paths[j] = out + (nodes[j].token_id,)
        return out

    def reconstruct(self, node_id: int, complete: bool = False, truncated: bool = False) -> Hypothesis:
        node = self[node_id]
        return Hypothesis(
            tokens=self._path(node_id),
            cum_logprob=node.cum_logprob,
            model_score=node.model_score,
            complete=complete,
            truncated=truncated,
            node_id=node_id,
        )


def is_complete(node: SearchNode, config) -> bool:
    """True if ``node`` ends a hypothesis: a termination token or the length cap.

    ``config`` needs ``termination`` (a set of token ids) and ``max_len``.
    Use ``is_truncated`` to tell a length-capped ending from a real one.
    """
    return node.token_id in config.termination or node.depth >= config.max_len


def is_truncated(node: SearchNode, config) -> bool:
    return node.token_id not in config.termination and node.depth >= config.max_len
