"""Add-k smoothed n-gram language model with back-off for unseen contexts."""

from __future__ import annotations

from collections import Counter, defaultdict
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..types import BOS, EOS, UsageError, Vocabulary
from .base import Distribution, Prefix, SequenceModel


class NGramModel(SequenceModel):
    """Order-``n`` model over whitespace tokens.

    A context seen in training gets ``(c(ctx, w) + k) / (c(ctx) + k * |V'|)``
    where ``V'`` is every token except BOS. An unseen context drops its
    oldest token until a seen one is found, ending at the unigram.

    Queries are answered for a whole batch at once with numpy; tokens below
    ``floor`` are left out of the returned sparse distributions.
    """

    def __init__(
        self,
        order: int,
        vocab: Vocabulary,
        counts: Dict[Tuple[int, ...], Counter],
        add_k: float = 0.0,
        floor: float = 0.0,
    ):
        if order < 1:
            raise UsageError("n-gram order must be >= 1")
        if add_k < 0:
            raise UsageError("add_k must be >= 0")
        self.order = order
        self.vocab = vocab
        self.add_k = float(add_k)
        self.floor = float(floor)
        self._ctx_index: Dict[Tuple[int, ...], int] = {}
        cols, vals, totals = [], [], []
        for i, (ctx, counter) in enumerate(sorted(counts.items())):
            self._ctx_index[ctx] = i
            ids = np.fromiter(counter.keys(), dtype=np.int64, count=len(counter))
            c = np.fromiter(counter.values(), dtype=np.float64, count=len(counter))
            order_ = np.argsort(ids)
            cols.append(ids[order_])
            vals.append(c[order_])
            totals.append(c.sum())
        self._cols = cols
        self._vals = vals
        self._totals = np.asarray(totals)
        self._n_targets = len(vocab) - 1

    @classmethod
    def train(
        cls,
        lines: Iterable[str],
        order: int,
        add_k: float = 0.0,
        floor: float = 0.0,
        bos: str = BOS,
        eos: str = EOS,
    ) -> "NGramModel":
        if order < 1:
            raise UsageError("n-gram order must be >= 1")
        sentences = [line.split() for line in lines]
        sentences = [s for s in sentences if s]
        if not sentences:
            raise UsageError("cannot train an n-gram model on an empty corpus")
        vocab = Vocabulary.build((t for s in sentences for t in s), bos=bos, eos=eos)
        counts: Dict[Tuple[int, ...], Counter] = defaultdict(Counter)
        for s in sentences:
            ids = [vocab.bos_id] + vocab.encode(s) + [vocab.eos_id]
            for pos in range(1, len(ids)):
                target = ids[pos]
                for n in range(order):
                    if pos - n < 0:
                        break
                    counts[tuple(ids[pos - n:pos])][target] += 1
        return cls(order, vocab, counts, add_k=add_k, floor=floor)

    def context_of(self, prefix: Prefix) -> Tuple[int, ...]:
        """Longest seen context usable for ``prefix`` (back-off applied)."""
        n = self.order - 1
        ctx = tuple(prefix[len(prefix) - n:]) if n else ()
        while ctx not in self._ctx_index:
            ctx = ctx[1:]
        return ctx

    def probabilities(self, prefixes: Sequence[Prefix]) -> np.ndarray:
        """Dense ``(batch, |V|)`` matrix of next-token probabilities."""
        rows = [self._ctx_index[self.context_of(p)] for p in prefixes]
        batch = len(rows)
        probs = np.full((batch, len(self.vocab)), self.add_k)
        if batch:
            lengths = [len(self._cols[r]) for r in rows]
            r_idx = np.repeat(np.arange(batch), lengths)
            probs[r_idx, np.concatenate([self._cols[r] for r in rows])] += np.concatenate(
                [self._vals[r] for r in rows]
            )
        probs[:, self.vocab.bos_id] = 0.0
        denom = self._totals[rows] + self.add_k * self._n_targets
        probs /= denom[:, None]
        return probs

    def logprob_matrix(self, prefixes: Sequence[Prefix]) -> np.ndarray:
        """Dense ``(batch, |V|)`` log-probabilities; tokens that ``next_logprobs``
        leaves out (BOS, anything below ``floor``) hold ``-inf``."""
        probs = self.probabilities(prefixes)
        mask = probs > 0.0
        if self.floor > 0.0:
            mask &= probs >= self.floor
        out = np.full(probs.shape, -np.inf)
        out[mask] = np.log(probs[mask])
        return out

    def next_logprobs(self, prefixes: Sequence[Prefix]) -> List[Distribution]:
        if not prefixes:
            return []
        lp = self.logprob_matrix(prefixes)
        out = []
        for row in lp:
            cols = np.flatnonzero(np.isfinite(row))
            out.append(list(zip(cols.tolist(), row[cols].tolist())))
        return out


def ngram_train(lines: Iterable[str], order: int, add_k: float = 0.0, floor: Optional[float] = None) -> NGramModel:
    return NGramModel.train(lines, order, add_k=add_k, floor=floor or 0.0)
