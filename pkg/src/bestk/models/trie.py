"""Explicit probability-tree backend.

A trie document is a nested mapping ``token -> {prob, children}``. It may be
the whole document or sit under a ``tree`` key next to optional ``bos``,
``eos`` and ``termination`` entries::

    tree:
      skiing: {prob: 0.6, children: {down: {prob: 1.0}}}
      There:  {prob: 0.4, children: {is: {prob: 0.7}, "</s>": {prob: 0.3}}}

A non-terminal node without children ends in an implicit EOS of mass 1.
"""

from __future__ import annotations

import json
import math
from decimal import Decimal
from pathlib import Path
from typing import Any, Dict, Iterator, List, Mapping, Sequence, Tuple

import yaml

from ..types import BOS, EOS, UsageError, Vocabulary
from .base import Distribution, ModelError, Prefix, SequenceModel

SUM_TOLERANCE = 1e-9


class TrieSpecError(UsageError):
    pass


class TrieModel(SequenceModel):
    def __init__(self, table: Dict[Tuple[int, ...], Distribution], vocab: Vocabulary, tree: dict):
        self.vocab = vocab
        self._table = table
        self._tree = tree

    @classmethod
    def from_spec(cls, doc: Mapping[str, Any]) -> "TrieModel":
        if not isinstance(doc, Mapping):
            raise TrieSpecError("trie document must be a mapping")
        if "tree" in doc:
            bos = doc.get("bos", BOS)
            eos = doc.get("eos", EOS)
            termination = list(doc.get("termination", ()))
            tree = doc["tree"]
        else:
            bos, eos, termination, tree = BOS, EOS, [], doc
        terminal = set(termination) | {eos}
        _validate(tree, "tree", terminal, bos)
        vocab = Vocabulary.build(_walk_tokens(tree), bos=bos, eos=eos, extra_termination=termination)
        table: Dict[Tuple[int, ...], Distribution] = {}
        _fill(tree, (vocab.bos_id,), vocab, terminal, table)
        return cls(table, vocab, _plain(tree))

    @classmethod
    def from_file(cls, path) -> "TrieModel":
        return cls.from_spec(load_trie_document(path))

    def to_spec(self) -> dict:
        return {
            "bos": self.vocab[self.vocab.bos_id].surface,
            "eos": self.vocab[self.vocab.eos_id].surface,
            "tree": self._tree,
        }

    def next_logprobs(self, prefixes: Sequence[Prefix]) -> List[Distribution]:
        out = []
        for p in prefixes:
            try:
                out.append(self._table[tuple(p)])
            except KeyError:
                raise ModelError(f"prefix {list(p)} is not an open node of the trie") from None
        return out

    @property
    def node_count(self) -> int:
        """Number of non-root nodes, implicit EOS leaves included."""
        return sum(len(d) for d in self._table.values())

    def complete_paths(self) -> Iterator[Tuple[Tuple[int, ...], float]]:
        """Every root-to-terminal path with its log-probability (exhaustive)."""
        stack = [((self.vocab.bos_id,), 0.0)]
        while stack:
            prefix, lp = stack.pop()
            for tok, step in self._table[prefix]:
                path = prefix + (tok,)
                if tok in self.vocab.termination_ids:
                    yield path, lp + step
                else:
                    stack.append((path, lp + step))


def load_trie_document(path) -> dict:
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        # Decimal keeps branch sums exact during validation.
        return json.loads(text, parse_float=Decimal)
    return yaml.safe_load(text)


def _walk_tokens(tree: Mapping) -> Iterator[str]:
    for tok, node in tree.items():
        yield tok
        children = (node or {}).get("children") or {}
        yield from _walk_tokens(children)


def _validate(tree, where: str, terminal: set, bos: str) -> None:
    if not isinstance(tree, Mapping) or not tree:
        raise TrieSpecError(f"{where}: expected a non-empty mapping of token -> node")
    probs = []
    for tok, node in tree.items():
        here = f"{where}/{tok}"
        if not isinstance(tok, str) or not tok:
            raise TrieSpecError(f"{here}: token must be a non-empty string")
        if tok == bos:
            raise TrieSpecError(f"{here}: BOS cannot be generated")
        if not isinstance(node, Mapping) or "prob" not in node:
            raise TrieSpecError(f"{here}: node needs a 'prob' field")
        unknown = set(node) - {"prob", "children"}
        if unknown:
            raise TrieSpecError(f"{here}: unexpected fields {sorted(unknown)}")
        p = node["prob"]
        if isinstance(p, bool) or not isinstance(p, (int, float, Decimal)) or not 0 < p <= 1:
            raise TrieSpecError(f"{here}: prob must be in (0, 1], got {p!r}")
        probs.append(p)
        children = node.get("children")
        if children:
            if tok in terminal:
                raise TrieSpecError(f"{here}: termination token cannot have children")
            _validate(children, f"{here}/children", terminal, bos)
    if all(isinstance(p, (int, Decimal)) for p in probs):
        total = sum(Decimal(p) for p in probs)
        ok = abs(total - 1) <= Decimal(str(SUM_TOLERANCE))
    else:
        total = math.fsum(float(p) for p in probs)
        ok = abs(total - 1.0) <= SUM_TOLERANCE
    if not ok:
        raise TrieSpecError(f"{where}: branch probabilities sum to {total}, expected 1")


def _fill(tree, prefix, vocab: Vocabulary, terminal: set, table: dict) -> None:
    dist = []
    for tok, node in tree.items():
        tid = vocab.id(tok)
        dist.append((tid, math.log(float(node["prob"]))))
        if tok in terminal:
            continue
        children = node.get("children")
        child_prefix = prefix + (tid,)
        if children:
            _fill(children, child_prefix, vocab, terminal, table)
        else:
            table[child_prefix] = [(vocab.eos_id, 0.0)]
    table[prefix] = dist


def _plain(tree) -> dict:
    out = {}
    for tok, node in tree.items():
        entry: Dict[str, Any] = {"prob": float(node["prob"])}
        if node.get("children"):
            entry["children"] = _plain(node["children"])
        out[tok] = entry
    return out
