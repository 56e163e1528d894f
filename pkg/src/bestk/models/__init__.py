from .base import (
    Distribution,
    ModelError,
    PromptedModel,
    ProtocolError,
    SequenceModel,
    TransportError,
    check_distribution,
)
from .ngram import NGramModel, ngram_train
from .remote import MockServer, RemoteModel
from .trie import TrieModel, TrieSpecError, load_trie_document

__all__ = [
    "Distribution",
    "MockServer",
    "ModelError",
    "NGramModel",
    "PromptedModel",
    "ProtocolError",
    "RemoteModel",
    "SequenceModel",
    "TransportError",
    "TrieModel",
    "TrieSpecError",
    "check_distribution",
    "load_trie_document",
    "ngram_train",
]
