"""Context chains: random walks from the query tail and their token serializations."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ContractError
from .kg import MASK, NO_OP, AdjacencyIndex, Triple, outgoing_edges, query_exclusions


class ChainFormat(str, Enum):
    INTERENT = "interent"
    RELONLY = "relonly"


@dataclass(frozen=True)
class Chain:
    query: Triple
    steps: tuple[tuple[int, int], ...]
    format: ChainFormat = ChainFormat.INTERENT

    @property
    def n_steps(self) -> int:
        return len(self.steps)

    @property
    def end(self) -> int:
        return self.steps[-1][1] if self.steps else self.query.tail

    def tokens(self) -> list[int]:
        h, r, t = self.query
        if self.format is ChainFormat.INTERENT:
            out = [h, r, t]
            for rel, ent in self.steps:
                out.extend((rel, ent))
            return out
        out = [h, r] + [rel for rel, _ in self.steps]
        out.append(self.end)
        return out


@dataclass(frozen=True)
class MaskedChain:
    tokens: tuple[int, ...]
    target: int


def sample_chain(adj: AdjacencyIndex, query: Triple, K: int, rng: np.random.Generator) -> Chain:
    """K-step random walk from ``query.tail`` that never traverses the query edge or its inverse.

    A node with no usable edge yields a NO_OP step ``(UNK, node)``.
    """
    if K < 1:
        raise ContractError(f"step count must be >= 1, got {K}")
    query = Triple(*map(int, query))
    node = query.tail
    steps = []
    for _ in range(K):
        edges = outgoing_edges(adj, node, query_exclusions(node, query, adj.vocab))
        if edges:
            rel, node = edges[int(rng.integers(len(edges)))]
        else:
            rel = NO_OP
        steps.append((rel, node))
    return Chain(query, tuple(steps), ChainFormat.INTERENT)


def fixed_k(K: int):
    return lambda rng: K


def uniform_mix(lo: int = 1, hi: int = 5):
    return lambda rng: int(rng.integers(lo, hi + 1))


def sample_pretraining_set(adj: AdjacencyIndex, triples: np.ndarray, fmt: ChainFormat | str,
                           count: int, k_policy, rng: np.random.Generator) -> list[Chain]:
    """``count`` chains per triple (triples should be the augmented train split).

    ``k_policy`` is a callable ``rng -> K``, e.g. ``fixed_k(3)`` or ``uniform_mix(1, 5)``.
    """
    fmt = ChainFormat(fmt)
    chains = []
    for h, r, t in np.asarray(triples).tolist():
        q = Triple(h, r, t)
        for _ in range(count):
            chain = sample_chain(adj, q, k_policy(rng), rng)
            chains.append(to_relonly(chain) if fmt is ChainFormat.RELONLY else chain)
    return chains


def to_relonly(chain: Chain) -> Chain:
    if chain.format is not ChainFormat.INTERENT:
        raise ContractError("to_relonly expects an InterEnt chain")
    return Chain(chain.query, chain.steps, ChainFormat.RELONLY)


def as_format(chain: Chain, fmt: ChainFormat | str) -> Chain:
    fmt = ChainFormat(fmt)
    if chain.format is fmt:
        return chain
    if fmt is ChainFormat.RELONLY:
        return to_relonly(chain)
    raise ContractError("a RelOnly chain cannot be expanded back to InterEnt")


def mask_head(chain: Chain | MaskedChain) -> MaskedChain:
    if isinstance(chain, MaskedChain):
        return chain
    toks = chain.tokens()
    return MaskedChain((MASK,) + tuple(toks[1:]), toks[0])


def chain_is_valid(chain: Chain, adj: AdjacencyIndex) -> bool:
    """Connected, graph-backed and free of the query edge and its backward connection."""
    node = chain.query.tail
    for rel, ent in chain.steps:
        if rel == NO_OP:
            if ent != node:
                return False
            continue
        if (rel, ent) in query_exclusions(node, chain.query, adj.vocab):
            return False
        if not adj.has_edge(node, rel, ent):
            return False
        node = ent
    return True


def dump_chains(chains, path) -> None:
    """One chain per line as space-separated token ids."""
    with open(path, "w", encoding="utf-8") as fh:
        for c in chains:
            toks = c.tokens() if isinstance(c, Chain) else c.tokens
            fh.write(" ".join(map(str, toks)) + "\n")
