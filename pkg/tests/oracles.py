"""Brute-force reference implementations used by unit and acceptance tests."""
import numpy as np

from kgctx import autodiff as ad
from kgctx.agent import QueryState, available_actions, policy_step
from kgctx.kg import AdjacencyIndex, Triple, TripleStore, Vocabulary, augment_inverse


def brute_force_rank(scores, true, filtered) -> int:
    # sort everything that competes, true entity placed after its equals
    competitors = [i for i in range(len(scores)) if i != true and i not in filtered]
    ordered = sorted(competitors + [true], key=lambda i: (-scores[i], i == true))
    return ordered.index(true) + 1


def random_rank_instance(rng):
    """Scores over <=10 entities with deliberate ties, a true index and a filter set."""
    n = int(rng.integers(1, 11))
    scores = rng.integers(0, 4, size=n).astype(float) if rng.random() < 0.5 else rng.standard_normal(n)
    true = int(rng.integers(n))
    others = [i for i in range(n) if i != true]
    filtered = {i for i in others if rng.random() < 0.3}
    return scores, true, filtered


def enumerate_paths(policy, adj, query, N):
    """Every length-N walk with its exact joint log-probability, one policy_step call per state."""
    query = Triple(*map(int, query))
    out = []

    def visit(state, logp):
        if state.t == N:
            out.append((state.history, logp))
            return
        actions = available_actions(adj, state, query, policy.config.max_actions)
        with ad.no_grad():
            probs = policy_step(policy, state, actions).data
        for (rel, ent), p in zip(actions, probs):
            visit(state.advance(rel, ent), logp + float(np.log(p)))

    visit(QueryState.start(query), 0.0)
    out.sort(key=lambda item: -item[1])
    return out


def random_small_graph(rng, entities=6, relations=2, edges=7, with_store=False):
    """Random graph plus a train query on it; callers check the path count."""
    vocab = Vocabulary([f"e{i}" for i in range(entities)], [f"r{i}" for i in range(relations)])
    rows = set()
    while len(rows) < edges:
        h, t = rng.choice(entities, size=2, replace=False)
        rows.add((vocab.id(f"e{h}"), vocab.id(f"r{rng.integers(relations)}"), vocab.id(f"e{t}")))
    rows = sorted(rows)
    store = augment_inverse(TripleStore({"train": np.array(rows)}, vocab))
    adj = AdjacencyIndex.from_store(store)
    query = Triple(*rows[int(rng.integers(len(rows)))])
    return (vocab, adj, query, store) if with_store else (vocab, adj, query)
