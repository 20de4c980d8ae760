"""
Random-walk context chains
==========================

A chain serializes a query triple followed by a walk that starts at the
query's tail.  The walk never crosses the query edge itself.
"""
import numpy as np

from kgctx.kg import AdjacencyIndex, Triple, TripleStore, Vocabulary, augment_inverse
from kgctx.paths import mask_head, sample_chain, sample_pretraining_set, to_relonly, uniform_mix

vocab = Vocabulary(["ann", "bob", "cat", "dan"], ["parent", "sibling", "grandparent"])
ids = np.array([[vocab.id(h), vocab.id(r), vocab.id(t)] for h, r, t in [
    ("ann", "parent", "bob"), ("bob", "parent", "cat"), ("cat", "sibling", "dan"), ("ann", "grandparent", "cat")]])
store = augment_inverse(TripleStore({"train": ids}, vocab))
adj = AdjacencyIndex.from_store(store)


def show(tokens):
    return " ".join(vocab.token(t) for t in tokens)


query = Triple(vocab.id("ann"), vocab.id("grandparent"), vocab.id("cat"))
rng = np.random.default_rng(0)
chain = sample_chain(adj, query, 2, rng)
print("InterEnt:", show(chain.tokens()))
print("RelOnly: ", show(to_relonly(chain).tokens()))

# pretraining hides the head entity; the model must recover it from the rest
masked = mask_head(to_relonly(chain))
print("masked:  ", show(masked.tokens), "  target:", vocab.token(masked.target))

# the relation-only pretraining set mixes walk lengths 1..5 uniformly
chains = sample_pretraining_set(adj, store["train"], "relonly", 50, uniform_mix(1, 5), rng)
print("lengths:", np.bincount([c.n_steps for c in chains])[1:])
