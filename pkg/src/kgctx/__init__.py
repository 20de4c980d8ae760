"""Contextualized link prediction: a masked-entity transformer fed with
knowledge-graph paths chosen by random walks or by a policy-gradient agent."""

__version__ = "0.1.0"

from .errors import (
    CompatibilityError,
    ContractError,
    GenerationError,
    KGError,
    ParseError,
    StateError,
    VocabularyError,
)
from .kg import (
    AdjacencyIndex,
    Triple,
    TripleStore,
    Vocabulary,
    augment_inverse,
    filtered_candidates,
    load_dataset,
    load_triples,
    outgoing_edges,
)
from .paths import Chain, ChainFormat, MaskedChain, mask_head, sample_chain, to_relonly

__all__ = [
    "KGError", "ParseError", "VocabularyError", "StateError", "ContractError", "CompatibilityError",
    "GenerationError",
    "Triple", "Vocabulary", "TripleStore", "AdjacencyIndex", "load_triples", "load_dataset",
    "augment_inverse", "outgoing_edges", "filtered_candidates",
    "Chain", "ChainFormat", "MaskedChain", "sample_chain", "to_relonly", "mask_head",
]
