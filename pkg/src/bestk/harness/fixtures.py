"""Synthetic model populations for oracle checks and completion studies."""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..models.base import Distribution, SequenceModel
from ..models.trie import TrieModel
from ..types import EOS, Vocabulary

CONTENT = [f"w{i}" for i in range(32)]


def _split(rng: np.random.Generator, n: int, concentration: float = 1.0) -> List[float]:
    p = rng.dirichlet([concentration] * n)
    p = np.maximum(p, 1e-3)
    p = p / p.sum()
    probs = [float(x) for x in p[:-1]]
    probs.append(1.0 - sum(probs))
    return probs


def random_trie(
    rng: np.random.Generator,
    max_leaves: int = 100,
    max_depth: int = 5,
    max_branch: int = 4,
    eos_prob: float = 0.25,
) -> TrieModel:
    """A small explicit trie whose every path ends in EOS.

    Each node draws 1..``max_branch`` children; each child is EOS with
    probability ``eos_prob`` (always at ``max_depth``), except that at most one
    EOS child exists per node. The leaf budget is shared across the tree.
    """
    leaves = [0]

    def grow(depth: int) -> Dict[str, dict]:
        room = max_leaves - leaves[0]
        n = int(rng.integers(1, max_branch + 1))
        n = max(1, min(n, room))
        toks: List[str] = []
        has_eos = False
        for tok in rng.permutation(len(CONTENT))[:n]:
            if not has_eos and (depth >= max_depth or rng.random() < eos_prob):
                toks.append(EOS)
                has_eos = True
            else:
                toks.append(CONTENT[tok])
        if depth >= max_depth:
            toks = [EOS]
        probs = _split(rng, len(toks))
        tree: Dict[str, dict] = {}
        # every open child reserves one leaf so the total never overflows
        leaves[0] += len(toks)
        for tok, p in zip(toks, probs):
            node: dict = {"prob": p}
            if tok != EOS and leaves[0] < max_leaves and rng.random() < 0.8:
                leaves[0] -= 1
                node["children"] = grow(depth + 1)
            tree[tok] = node
        return tree

    return TrieModel.from_spec({"tree": grow(0)})


def fig3_trie() -> TrieModel:
    """Two-branch trie shaped like a CommonGen search graph (skier example)."""
    return TrieModel.from_spec({"tree": {
        "skiing": {"prob": 0.5, "children": {
            "down": {"prob": 0.6, "children": {"the": {"prob": 1.0, "children": {
                "mountain": {"prob": 1.0, "children": {EOS: {"prob": 1.0}}}}}}},
            "on": {"prob": 0.4, "children": {"a": {"prob": 1.0, "children": {
                "mountain": {"prob": 1.0}}}}},
        }},
        "There": {"prob": 0.3, "children": {
            "is": {"prob": 0.7, "children": {"a": {"prob": 1.0, "children": {
                "skier": {"prob": 1.0}}}}},
            "are": {"prob": 0.3, "children": {"skiers": {"prob": 1.0}}},
        }},
        "A": {"prob": 0.2, "children": {"skier": {"prob": 1.0, "children": {
            "skiing": {"prob": 1.0}}}}},
    }})


@dataclass(frozen=True)
class DeepGoalParams:
    """Shape of a procedurally generated tree whose EOS lies deep.

    No EOS is possible before ``goal_depth``; from there on each node ends
    with probability ``eos_prob``. ``branch`` content tokens share the rest
    with Dirichlet(``concentration``) weights drawn per node.
    """

    branch: int = 6
    concentration: float = 1.0
    goal_min: int = 4
    goal_max: int = 9
    eos_prob: float = 0.3


class DeepGoalModel(SequenceModel):
    """A lazily materialized random tree; distributions are a pure function
    of (seed, prefix) so the model behaves like a fixed, very large trie."""

    def __init__(self, seed: int, params: DeepGoalParams = DeepGoalParams()):
        self.seed = seed
        self.params = params
        self.vocab = Vocabulary.build(CONTENT[: params.branch])
        rng = np.random.default_rng([seed, 0x60A1])
        self.goal_depth = int(rng.integers(params.goal_min, params.goal_max + 1))
        self._cache: Dict[tuple, Distribution] = {}

    def _dist(self, prefix: tuple) -> Distribution:
        p = self.params
        digest = hashlib.blake2b(struct.pack(f"<{len(prefix) + 1}q", self.seed, *prefix), digest_size=8).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "little"))
        weights = rng.dirichlet([p.concentration] * p.branch)
        depth = len(prefix)  # depth of the child being generated
        eos = p.eos_prob if depth >= self.goal_depth else 0.0
        out = [(self.vocab.eos_id, float(np.log(eos)))] if eos > 0 else []
        for i, w in enumerate(weights):
            mass = (1.0 - eos) * float(w)
            if mass > 0:
                out.append((i + 2, float(np.log(mass))))
        return out

    def next_logprobs(self, prefixes: Sequence[Sequence[int]]) -> List[Distribution]:
        out = []
        for pre in prefixes:
            key = tuple(pre)
            d = self._cache.get(key)
            if d is None:
                d = self._cache[key] = self._dist(key)
            out.append(d)
        return out


def deep_goal_population(count: int, seed: int, params: DeepGoalParams = DeepGoalParams()) -> List[DeepGoalModel]:
    root = np.random.SeedSequence(seed)
    return [DeepGoalModel(int(s.generate_state(1)[0]), params) for s in root.spawn(count)]


def dominant_path_trie(depth: int = 6, dominant: float = 0.8, alternatives: int = 2) -> TrieModel:
    """One overwhelmingly likely sentence with thin side branches.

    Every position continues the dominant path with probability ``dominant``
    or takes one of ``alternatives`` side tokens, each of which finishes the
    sentence two tokens later.
    """
    side = (1.0 - dominant) / alternatives

    def node(d: int) -> dict:
        if d >= depth:
            return {EOS: {"prob": 1.0}}
        tree = {f"w{d}": {"prob": dominant, "children": node(d + 1)}}
        for j in range(alternatives):
            tree[f"x{d}_{j}"] = {"prob": side, "children": {
                f"y{d}_{j}": {"prob": 1.0, "children": {EOS: {"prob": 1.0}}}}}
        return tree

    return TrieModel.from_spec({"tree": node(0)})


def synthetic_corpus(lines: int, vocab_size: int, seed: int, mean_len: int = 12) -> List[str]:
    """Sentences from a random sparse bigram process with Zipfian word use."""
    rng = np.random.default_rng(seed)
    words = [f"t{i}" for i in range(vocab_size)]
    zipf = 1.0 / np.arange(1, vocab_size + 1)
    zipf /= zipf.sum()
    successors = [rng.choice(vocab_size, size=8, replace=False, p=zipf) for _ in range(vocab_size)]
    out = []
    for _ in range(lines):
        n = max(2, int(rng.poisson(mean_len)))
        w = int(rng.choice(vocab_size, p=zipf))
        sent = [words[w]]
        for _ in range(n - 1):
            w = int(successors[w][min(int(rng.geometric(0.4)) - 1, 7)])
            sent.append(words[w])
        out.append(" ".join(sent))
    return out
