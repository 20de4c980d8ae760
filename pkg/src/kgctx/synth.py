"""Small synthetic knowledge graphs with a known two-hop composition rule.

Entities are split into three blocks X, Z, Y.  Every x has one ``r1`` edge into
Z and every y has one ``r2`` edge out of Z, so each z has a few predecessors
and a few successors.  The target relation holds exactly on the composition::

    rq(x, y)  <=>  exists z: r1(x, z) and r2(z, y)

All r1/r2 edges and a layer of random noise edges go to train; the rq facts are
split across train/valid/test, so every held-out fact has a witness path in
train.  The split also leaves every entity at least one train fact of the
target relation.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import GenerationError
from .kg import NO_OP, AdjacencyIndex, Triple, Vocabulary
from .paths import Chain, ChainFormat


@dataclass
class CompositionRule:
    first: str = "r1"
    second: str = "r2"
    target: str = "rq"


@dataclass
class SyntheticKG:
    rule: CompositionRule
    train: list
    valid: list
    test: list

    def write(self, directory) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for name in ("train", "valid", "test"):
            rows = getattr(self, name)
            (directory / f"{name}.txt").write_text("".join(f"{h}\t{r}\t{t}\n" for h, r, t in rows),
                                                   encoding="utf-8")
        return directory


def generate_synthetic_kg(entities: int = 200, rule: CompositionRule | None = None,
                          valid_fraction: float = 0.1, test_fraction: float = 0.2,
                          rng: np.random.Generator | None = None,
                          preds_per_mid: int = 2, succ_per_mid: int = 3,
                          noise_relations: int = 2, noise_per_entity: int = 1) -> SyntheticKG:
    rule = rule or CompositionRule()
    rng = rng if rng is not None else np.random.default_rng(0)
    if entities < 20:
        raise GenerationError(f"need at least 20 entities, got {entities}")
    if not (0 <= valid_fraction and 0 < test_fraction and valid_fraction + test_fraction < 1):
        raise GenerationError("split fractions must leave a non-empty train share")
    if preds_per_mid < 1 or succ_per_mid < 1:
        raise GenerationError("preds_per_mid and succ_per_mid must be positive")
    n_z = entities // (1 + preds_per_mid + succ_per_mid)
    n_x = n_z * preds_per_mid
    n_y = entities - n_x - n_z
    if n_z < 1:
        raise GenerationError("entity budget too small for the requested block sizes")

    names = [f"e{i:04d}" for i in range(entities)]
    perm = rng.permutation(entities)
    X = [names[i] for i in perm[:n_x]]
    Z = [names[i] for i in perm[n_x:n_x + n_z]]
    Y = [names[i] for i in perm[n_x + n_z:]]

    # every y has exactly one r2-parent, so a z determines its predecessors unambiguously
    r1 = [(x, rule.first, Z[i % n_z]) for i, x in enumerate(X)]
    r2 = [(Z[j % n_z], rule.second, y) for j, y in enumerate(Y)]

    preds = {}
    for x, _, z in r1:
        preds.setdefault(z, []).append(x)
    facts = sorted({(x, rule.target, y) for z, _, y in r2 for x in preds.get(z, [])})
    n_test = int(round(len(facts) * test_fraction))
    n_valid = int(round(len(facts) * valid_fraction))
    if n_test < 1 or len(facts) - n_test - n_valid < 1:
        raise GenerationError(f"{len(facts)} rule facts cannot be split into train/valid/test")
    # hold facts out in random order, but keep at least one train fact per entity
    remaining = {}
    for x, _, y in facts:
        remaining[x] = remaining.get(x, 0) + 1
        remaining[y] = remaining.get(y, 0) + 1
    held, train_q = [], []
    for i in rng.permutation(len(facts)).tolist():
        x, _, y = facts[i]
        if len(held) < n_test + n_valid and remaining[x] > 1 and remaining[y] > 1:
            remaining[x] -= 1
            remaining[y] -= 1
            held.append(facts[i])
        else:
            train_q.append(facts[i])
    if len(held) < n_test + n_valid:
        raise GenerationError("cannot hold out the requested share while keeping every entity in train")
    test, valid = held[:n_test], held[n_test:]

    structural = set(r1) | set(r2) | set(facts)
    noise = []
    for k in range(noise_relations):
        rel = f"n{k + 1}"
        for h in names:
            for _ in range(noise_per_entity):
                t = names[int(rng.integers(entities))]
                if t != h and (h, rel, t) not in structural:
                    noise.append((h, rel, t))
    noise_rows = list(dict.fromkeys(noise))
    return SyntheticKG(rule, r1 + r2 + train_q + noise_rows, valid, test)


def rule_witness(query: Triple, adj: AdjacencyIndex, vocab: Vocabulary, rule: CompositionRule | None = None):
    """Intermediate entity z on a rule path for an ``rq`` / ``rq^-1`` query, or None."""
    rule = rule or CompositionRule()
    r1, r2, rq = (vocab.id(rule.first), vocab.id(rule.second), vocab.id(rule.target))
    h, rel, t = query
    if rel == rq:            # (x, rq, y): walk y -r2^-1-> z -r1^-1-> x
        start, first, second, goal = t, vocab.inverse(r2), vocab.inverse(r1), h
    elif rel == vocab.inverse(rq):   # (y, rq^-1, x): walk x -r1-> z -r2-> y
        start, first, second, goal = t, r1, r2, h
    else:
        return None
    rels, ents = adj.edge_arrays(start)
    for z in ents[rels == first].tolist():
        r, e = adj.edge_arrays(z)
        if np.any((r == second) & (e == goal)):
            return z, [(first, z), (second, goal)]
    return None


def oracle_context(query: Triple, adj: AdjacencyIndex, vocab: Vocabulary, N: int,
                   rule: CompositionRule | None = None) -> Chain:
    """First ``N`` steps of a rule witness path from the query tail, NO_OP-padded."""
    query = Triple(*map(int, query))
    found = rule_witness(query, adj, vocab, rule)
    steps = list(found[1]) if found else []
    steps = steps[:N]
    node = steps[-1][1] if steps else query.tail
    while len(steps) < N:
        steps.append((NO_OP, node))
    return Chain(query, tuple(steps), ChainFormat.INTERENT)


def composition_closure(train_rows, rule: CompositionRule | None = None) -> set:
    """All ``(x, rq, y)`` implied by the r1/r2 edges of ``train_rows`` (brute force)."""
    rule = rule or CompositionRule()
    first = [(h, t) for h, r, t in train_rows if r == rule.first]
    second = [(h, t) for h, r, t in train_rows if r == rule.second]
    return {(x, rule.target, y) for x, z in first for z2, y in second if z == z2}


def generate_random_kg(entities: int, relations: int, train_triples: int, eval_triples: int = 500,
                       rng: np.random.Generator | None = None) -> SyntheticKG:
    """Structureless graph with given entity/relation counts (a stand-in for smoke runs).

    Every entity and relation occurs in train.  Valid/test get ``eval_triples``
    facts each, disjoint from train.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    if entities < max(2, relations) or train_triples < entities:
        raise GenerationError("need entities >= max(2, relations) and train_triples >= entities")
    ents = [f"m{i:06d}" for i in range(entities)]
    rels = [f"rel{i:04d}" for i in range(relations)]
    total = train_triples + 2 * eval_triples
    h = np.concatenate([np.arange(entities), rng.integers(entities, size=3 * total)])
    r = np.concatenate([np.arange(entities) % relations, rng.integers(relations, size=3 * total)])
    t = (h + 1 + rng.integers(entities - 1, size=h.size)) % entities   # never a self-loop
    rows = np.stack([h, r, t], axis=1)
    _, first = np.unique(rows, axis=0, return_index=True)
    rows = rows[np.sort(first)][:total]
    if len(rows) < total:
        raise GenerationError("could not draw enough distinct triples")
    named = [(ents[a], rels[b], ents[c]) for a, b, c in rows.tolist()]
    head, rest = named[:entities], named[entities:]
    order = rng.permutation(len(rest))
    rest = [rest[i] for i in order]
    n_train_extra = train_triples - entities
    train = head + rest[:n_train_extra]
    valid = rest[n_train_extra:n_train_extra + eval_triples]
    test = rest[n_train_extra + eval_triples:]
    return SyntheticKG(CompositionRule(), train, valid, test)
