from __future__ import annotations

import math
from abc import ABC, abstractmethod
from typing import List, Sequence, Tuple

from ..types import Vocabulary

Prefix = Sequence[int]
Distribution = List[Tuple[int, float]]  # sparse (token_id, natural-log prob)

NORMALIZATION_SLACK = 1e-6


class ModelError(RuntimeError):
    """A backend failed to answer a query."""


class TransportError(ModelError):
    """Network-level failure; the request may be retried."""


class ProtocolError(ModelError):
    """The backend answered, but the answer violates the wire contract."""


class SequenceModel(ABC):
    """Next-token log-probability provider answering batched prefix queries.

    Every prefix starts with the vocabulary's BOS id. Backends may drop
    low-probability tokens, so a returned distribution can sum to less than
    one. Identical prefixes must always yield identical distributions.

    A backend may also offer ``logprob_matrix(prefixes)``: a dense
    ``(batch, |V|)`` array holding the same numbers, with ``-inf`` for
    omitted tokens. Decoders then select children for the whole batch in
    numpy instead of walking each sparse list.
    """

    vocab: Vocabulary

    @abstractmethod
    def next_logprobs(self, prefixes: Sequence[Prefix]) -> List[Distribution]:
        ...

    def __call__(self, prefixes: Sequence[Prefix]) -> List[Distribution]:
        return self.next_logprobs(prefixes)


def check_distribution(dist: Distribution, vocab_size: int) -> None:
    total = 0.0
    for token_id, lp in dist:
        if not 0 <= token_id < vocab_size:
            raise ProtocolError(f"token id {token_id} outside vocabulary")
        if not lp <= 0.0 or math.isnan(lp):
            raise ProtocolError(f"invalid log-probability {lp} for token {token_id}")
        total += math.exp(lp)
    if total > 1.0 + NORMALIZATION_SLACK:
        raise ProtocolError(f"distribution mass {total:.9f} exceeds 1")


class PromptedModel(SequenceModel):
    """Conditions a model on fixed prompt tokens inserted right after BOS.

    Decoders see ordinary BOS-rooted prefixes; the prompt stays invisible to
    them and never appears in hypotheses.
    """

    def __init__(self, model: SequenceModel, prompt_ids: Sequence[int]):
        self.model = model
        self.vocab = model.vocab
        self.prompt = tuple(prompt_ids)
        if hasattr(model, "logprob_matrix"):
            self.logprob_matrix = lambda prefixes: model.logprob_matrix(self._full(prefixes))

    def _full(self, prefixes: Sequence[Prefix]) -> List[tuple]:
        return [(p[0],) + self.prompt + tuple(p[1:]) for p in prefixes]

    def next_logprobs(self, prefixes: Sequence[Prefix]) -> List[Distribution]:
        return self.model.next_logprobs(self._full(prefixes))
