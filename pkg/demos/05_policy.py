"""
Learning where to walk
======================

A three-armed bandit: from ``S`` the policy can follow ``r`` to ``A``, ``s`` to
``C``, or stay put.  Only reaching ``A`` pays, and REINFORCE shifts the
probability mass there.
"""
import numpy as np

from kgctx import autodiff as ad
from kgctx.agent import (QueryState, ReinforceConfig, available_actions, beam_search, new_policy, policy_step,
                         train_reinforce)
from kgctx.kg import NO_OP, AdjacencyIndex, Triple, TripleStore, Vocabulary, augment_inverse

vocab = Vocabulary(["A", "S", "C"], ["q", "r", "s"])
S = vocab.id("S")
rows = np.array([[S, vocab.id("r"), vocab.id("A")], [S, vocab.id("s"), vocab.id("C")]])
adj = AdjacencyIndex.from_store(augment_inverse(TripleStore({"train": rows}, vocab)))
query = Triple(vocab.id("A"), vocab.id("q"), S)

policy = new_policy(vocab, seed=0)
actions = available_actions(adj, QueryState.start(query), query)


def name(rel, ent):
    return "stay" if rel == NO_OP else f"{vocab.token(rel)}->{vocab.token(ent)}"


def probs():
    with ad.no_grad():
        p = policy_step(policy, QueryState.start(query), actions).data
    return {name(r, e): round(float(x), 3) for (r, e), x in zip(actions, p)}


print("before", probs())
train_reinforce(policy, adj, [query], 1, "answer",
                ReinforceConfig(epochs=60, batch_queries=1, rollouts_per_query=20), np.random.default_rng(0))
print("after ", probs())

# beam search lists walks by joint probability
for beam in beam_search(policy, adj, query, 2, width=4):
    steps = ", ".join(name(r, e) for r, e in beam.chain.steps)
    print(f"{np.exp(beam.log_prob):.3f}  {steps}")
