"""Filtered ranking evaluation for the predictor under different context strategies."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .agent import PolicyNetwork, beam_search, run_episodes
from .errors import ContractError
from .kg import AdjacencyIndex, Triple, TripleStore, filtered_candidates
from .paths import as_format, sample_chain
from .predictor import PredictorModel, score_entities_batch

DEFAULT_KS = (1, 3, 10)


def rank_query(scores, true: int, filtered) -> int:
    """Filtered rank of ``true``; ties with the true score count against it."""
    scores = np.asarray(scores)
    if true in filtered:
        raise ContractError("the true entity must not be in the filtered set")
    keep = np.ones(scores.shape[0], dtype=bool)
    if filtered:
        keep[np.fromiter(filtered, dtype=np.int64)] = False
    keep[true] = False
    return 1 + int(np.count_nonzero(scores[keep] >= scores[true]))


def metrics_from_ranks(ranks, ks=DEFAULT_KS) -> dict:
    ranks = np.asarray(ranks, dtype=np.float64)
    if ranks.size == 0:
        return {"mrr": 0.0, "hits": {str(k): 0.0 for k in ks}, "n": 0}
    return {"mrr": float(np.mean(1.0 / ranks)),
            "hits": {str(k): float(np.mean(ranks <= k)) for k in ks},
            "n": int(ranks.size)}


@dataclass
class RankingResult:
    query: Triple
    rank: int
    strategy: str
    context: tuple = ()

    def to_json(self) -> dict:
        return {"query": list(self.query), "strategy": self.strategy, "rank": self.rank,
                "context": list(self.context)}


@dataclass
class EvalReport:
    strategy: str
    mrr: float
    hits: dict
    records: list = field(default_factory=list)

    def summary(self) -> dict:
        return {"strategy": self.strategy, "mrr": self.mrr, "hits": self.hits, "n": len(self.records)}


# context strategies: callables mapping a list of queries to one InterEnt chain each

class SamplingStrategy:
    name = "sampling"

    def __init__(self, adj: AdjacencyIndex, N: int, seed: int = 0):
        self.adj, self.N = adj, N
        self.rng = np.random.default_rng(seed)

    def __call__(self, queries):
        return [sample_chain(self.adj, q, self.N, self.rng) for q in queries]


class RLStrategy:
    """Greedy rollout of a policy trained with the predictor reward."""
    name = "rl"

    def __init__(self, policy: PolicyNetwork, adj: AdjacencyIndex, N: int, batch: int = 512):
        self.policy, self.adj, self.N, self.batch = policy, adj, N, batch

    def __call__(self, queries):
        out = []
        for lo in range(0, len(queries), self.batch):
            out.extend(run_episodes(self.policy, self.adj, queries[lo:lo + self.batch], self.N,
                                    mode="greedy").chains())
        return out


class MinervaStrategy:
    """Most probable beam path of an answer-search policy."""
    name = "minerva"

    def __init__(self, policy: PolicyNetwork, adj: AdjacencyIndex, N: int, beam_width: int = 40):
        self.policy, self.adj, self.N, self.beam_width = policy, adj, N, beam_width

    def __call__(self, queries):
        return [beam_search(self.policy, self.adj, q, self.N, self.beam_width)[0].chain for q in queries]


class FixedStrategy:
    """Context supplied by an arbitrary function ``query -> Chain`` (e.g. a rule oracle)."""

    def __init__(self, fn, name="oracle"):
        self.fn, self.name = fn, name

    def __call__(self, queries):
        return [self.fn(q) for q in queries]


def head_filter(query: Triple, store: TripleStore) -> set[int]:
    """Other known entities for the masked position of ``(e_x, r, e_y)``."""
    inv = store.vocab.inverse(query.relation)
    return filtered_candidates(Triple(query.tail, inv, query.head), store)


def _queries(store: TripleStore, split: str, queries):
    if queries is None:
        if not store.augmented:
            raise ContractError("evaluation expects an inverse-augmented store")
        queries = store[split]
    return [Triple(*map(int, q)) for q in queries]


def evaluate_predictor(model: PredictorModel, strategy, store: TripleStore, split: str = "test",
                       ks=DEFAULT_KS, queries=None, batch: int = 512) -> EvalReport:
    vocab = store.vocab
    off = vocab.entity_offset
    queries = _queries(store, split, queries)
    records = []
    for lo in range(0, len(queries), batch):
        chunk = queries[lo:lo + batch]
        try:
            contexts = strategy(chunk)
            scores = score_entities_batch(model, list(zip(chunk, contexts)), vocab)
        except ContractError as exc:
            raise ContractError(f"evaluating queries {lo}..{lo + len(chunk) - 1}: {exc}") from exc
        for q, ctx, s in zip(chunk, contexts, scores):
            filt = {e - off for e in head_filter(q, store)}
            rank = rank_query(s, q.head - off, filt)
            toks = as_format(ctx, model.config.chain_format).tokens()
            records.append(RankingResult(q, rank, getattr(strategy, "name", "custom"), tuple(toks)))
    m = metrics_from_ranks([r.rank for r in records], ks)
    return EvalReport(getattr(strategy, "name", "custom"), m["mrr"], m["hits"], records)


def minerva_entity_scores(beams, entity_count: int, entity_offset: int) -> np.ndarray:
    """Best path log-probability per entity; entities no beam reaches score -inf."""
    scores = np.full(entity_count, -np.inf)
    for b in beams:
        i = b.end - entity_offset
        scores[i] = max(scores[i], b.log_prob)
    return scores


def evaluate_minerva(policy: PolicyNetwork, adj: AdjacencyIndex, store: TripleStore, N: int,
                     beam_width: int = 40, split: str = "test", ks=DEFAULT_KS, queries=None) -> EvalReport:
    """Answer-search evaluation: rank entities by the best beam path ending on them."""
    vocab = store.vocab
    off = vocab.entity_offset
    records = []
    for q in _queries(store, split, queries):
        beams = beam_search(policy, adj, q, N, beam_width)
        scores = minerva_entity_scores(beams, vocab.entity_count, off)
        filt = {e - off for e in head_filter(q, store)}
        rank = rank_query(scores, q.head - off, filt)
        records.append(RankingResult(q, rank, "answer-search", tuple(beams[0].chain.tokens())))
    m = metrics_from_ranks([r.rank for r in records], ks)
    return EvalReport("answer-search", m["mrr"], m["hits"], records)
