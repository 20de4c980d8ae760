from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgctx.errors import ContractError
from kgctx.kg import MASK, NO_OP, AdjacencyIndex, Triple, TripleStore, Vocabulary, augment_inverse
from kgctx.paths import (
    Chain,
    ChainFormat,
    chain_is_valid,
    dump_chains,
    fixed_k,
    mask_head,
    sample_chain,
    sample_pretraining_set,
    to_relonly,
    uniform_mix,
)


def test_single_available_edge(make_adj):
    vocab, adj = make_adj([("B", "s", "C")], entities=["A", "B", "C"], relations=["r", "s"])
    A, B, C, r, s = (vocab.id(x) for x in "ABCrs")
    chain = sample_chain(adj, Triple(A, r, B), 1, np.random.default_rng(0))
    assert chain.steps == ((s, C),)


def test_only_backward_edge_gives_noop(make_adj):
    # the train fact (A, r, B) puts only the excluded edge (B, r^-1, A) at B
    vocab, adj = make_adj([("A", "r", "B")])
    A, B, r = vocab.id("A"), vocab.id("B"), vocab.id("r")
    chain = sample_chain(adj, Triple(A, r, B), 1, np.random.default_rng(0))
    assert chain.steps == ((NO_OP, B),)


def test_k_below_one_rejected(make_adj):
    vocab, adj = make_adj([("A", "r", "B")])
    with pytest.raises(ContractError):
        sample_chain(adj, Triple(vocab.id("A"), vocab.id("r"), vocab.id("B")), 0, np.random.default_rng(0))


def ring_graph(n=6):
    # every node has out-degree 2 after augmentation
    ents = [f"e{i}" for i in range(n)]
    rows = [(ents[i], "r", ents[(i + 1) % n]) for i in range(n)]
    vocab = Vocabulary(ents, ["r", "q"])
    ids = np.array([[vocab.id(h), vocab.id(r), vocab.id(t)] for h, r, t in rows])
    store = augment_inverse(TripleStore({"train": ids}, vocab))
    return vocab, store, AdjacencyIndex.from_store(store)


def test_same_seed_same_walk():
    vocab, _, adj = ring_graph()
    q = Triple(vocab.id("e0"), vocab.id("q"), vocab.id("e3"))
    a = sample_chain(adj, q, 3, np.random.default_rng(7))
    b = sample_chain(adj, q, 3, np.random.default_rng(7))
    assert a == b


def test_pretraining_set_counts():
    vocab = Vocabulary([f"e{i}" for i in range(12)], ["r", "s"])
    rng = np.random.default_rng(0)
    rows = set()
    while len(rows) < 10:
        h, t = rng.choice(12, size=2, replace=False)
        rows.add((vocab.id(f"e{h}"), vocab.id("r" if len(rows) % 2 else "s"), vocab.id(f"e{t}")))
    store = augment_inverse(TripleStore({"train": sorted(rows)}, vocab))
    adj = AdjacencyIndex.from_store(store)
    chains = sample_pretraining_set(adj, store["train"], "interent", 1, fixed_k(3), rng)
    assert len(chains) == 20
    assert all(c.n_steps == 3 and len(c.tokens()) == 9 for c in chains)
    assert sample_pretraining_set(adj, store["train"], "interent", 0, fixed_k(3), rng) == []


def test_relonly_length_mix_is_uniform():
    vocab, store, adj = ring_graph()
    rng = np.random.default_rng(3)
    reps = 10_000 // len(store["train"]) + 1
    chains = sample_pretraining_set(adj, np.repeat(store["train"], reps, axis=0)[:10_000], "relonly", 1,
                                    uniform_mix(1, 5), rng)
    counts = Counter(c.n_steps for c in chains)
    assert sorted(counts) == [1, 2, 3, 4, 5]
    for k in range(1, 6):
        assert abs(counts[k] / len(chains) - 0.2) <= 0.02
    assert all(c.format is ChainFormat.RELONLY for c in chains)


def test_to_relonly_example():
    vocab = Vocabulary(list("ABCD"), ["r", "s", "t"])
    A, B, C, D, r, s, t = (vocab.id(x) for x in ["A", "B", "C", "D", "r", "s", "t"])
    chain = Chain(Triple(A, r, B), ((s, C), (t, D)))
    assert to_relonly(chain).tokens() == [A, r, s, t, D]
    one = Chain(Triple(A, r, B), ((s, C),))
    assert to_relonly(one).tokens() == [A, r, s, C]
    assert one.tokens() == [A, r, B, s, C]
    with pytest.raises(ContractError):
        to_relonly(to_relonly(chain))


def test_mask_head_example_and_idempotence():
    vocab = Vocabulary(list("ABC"), ["r", "s"])
    A, B, C, r, s = (vocab.id(x) for x in "ABCrs")
    m = mask_head(Chain(Triple(A, r, B), ((s, C),)))
    assert m.tokens == (MASK, r, B, s, C) and m.target == A
    assert mask_head(m) == m


def test_dump_chains(tmp_path):
    vocab, _, adj = ring_graph()
    q = Triple(vocab.id("e0"), vocab.id("q"), vocab.id("e3"))
    chains = [sample_chain(adj, q, 2, np.random.default_rng(i)) for i in range(3)]
    dump_chains(chains, tmp_path / "c.txt")
    lines = (tmp_path / "c.txt").read_text().splitlines()
    assert [list(map(int, l.split())) for l in lines] == [c.tokens() for c in chains]


graphs = st.lists(st.tuples(st.integers(0, 6), st.integers(0, 2), st.integers(0, 6)), min_size=1, max_size=20)


@settings(max_examples=60, deadline=None)
@given(graphs, st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_walks_are_connected_and_never_use_the_query_edge(raw, K, seed):
    vocab = Vocabulary([f"e{i}" for i in range(7)], ["r0", "r1", "r2"])
    ids = np.unique(np.array([[vocab.id(f"e{h}"), vocab.id(f"r{r}"), vocab.id(f"e{t}")] for h, r, t in raw]),
                    axis=0)
    store = augment_inverse(TripleStore({"train": ids}, vocab))
    adj = AdjacencyIndex.from_store(store)
    rng = np.random.default_rng(seed)
    for h, r, t in store["train"].tolist():
        q = Triple(h, r, t)
        chain = sample_chain(adj, q, K, rng)
        assert chain.n_steps == K
        assert chain_is_valid(chain, adj)
        node = t
        for rel, ent in chain.steps:
            # brute force: the query edge and its backward connection never appear
            assert (node, rel, ent) != (h, r, t)
            assert (node, rel, ent) != (t, vocab.inverse(r), h)
            if rel == NO_OP:
                assert ent == node
            node = ent
        masked = mask_head(to_relonly(chain))
        assert vocab.is_entity(masked.target)
        assert masked.tokens.count(MASK) == 1 and masked.tokens[0] == MASK
        assert len(masked.tokens) == 3 + K
