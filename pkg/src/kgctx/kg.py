"""Triple datasets, the shared token vocabulary and the traversal graph.

Token ids are laid out as::

    0..3                      MASK, CLS, UNK, SEP
    4 .. 4+E-1                entities (first appearance, train -> valid -> test)
    4+E .. 4+E+R-1            relations (first appearance)
    4+E+R .. 4+E+2R-1         inverse relations, id(r) + R

Every split is stored as an ``(n, 3)`` int64 array of ``(head, relation, tail)``
ids.  The adjacency index is built from the inverse-augmented train split only.
"""
from __future__ import annotations

import hashlib
from collections import defaultdict
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from .errors import ParseError, StateError, VocabularyError

MASK, CLS, UNK, SEP = 0, 1, 2, 3
SPECIAL_TOKENS = ("[MASK]", "[CLS]", "[UNK]", "[SEP]")
NUM_SPECIAL = len(SPECIAL_TOKENS)
NO_OP = UNK
INVERSE_SUFFIX = "^-1"
SPLIT_NAMES = ("train", "valid", "test")


class Triple(NamedTuple):
    head: int
    relation: int
    tail: int


class Vocabulary:
    """Bijection between tokens and integer ids (see module docstring for the layout)."""

    def __init__(self, entities: Iterable[str], relations: Iterable[str]):
        entities = list(entities)
        relations = list(relations)
        for rel in relations:
            if rel.endswith(INVERSE_SUFFIX):
                raise VocabularyError(f"relation {rel!r} uses the reserved inverse suffix {INVERSE_SUFFIX!r}")
        self.entity_count = len(entities)
        self.relation_count = len(relations)
        self.tokens: list[str] = (
            list(SPECIAL_TOKENS) + entities + relations + [r + INVERSE_SUFFIX for r in relations]
        )
        self._index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self._index) != len(self.tokens):
            raise VocabularyError("duplicate token: entity and relation names must be disjoint")

    def __len__(self):
        return len(self.tokens)

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    def __repr__(self):
        return f"Vocabulary(entities={self.entity_count}, relations={self.relation_count}, size={len(self)})"

    @property
    def entity_offset(self) -> int:
        return NUM_SPECIAL

    @property
    def relation_offset(self) -> int:
        return NUM_SPECIAL + self.entity_count

    @property
    def entity_ids(self) -> range:
        return range(NUM_SPECIAL, NUM_SPECIAL + self.entity_count)

    @property
    def relation_ids(self) -> range:
        """Original and inverse relation ids."""
        return range(self.relation_offset, len(self.tokens))

    def id(self, token: str) -> int:
        try:
            return self._index[token]
        except KeyError:
            raise VocabularyError(f"unknown token {token!r}") from None

    def token(self, idx: int) -> str:
        return self.tokens[idx]

    def is_entity(self, idx) -> bool:
        return NUM_SPECIAL <= idx < self.relation_offset

    def is_relation(self, idx) -> bool:
        return self.relation_offset <= idx < len(self.tokens)

    def inverse(self, rel: int) -> int:
        if not self.is_relation(rel):
            raise VocabularyError(f"id {rel} is not a relation")
        base = rel - self.relation_offset
        if base < self.relation_count:
            return rel + self.relation_count
        return rel - self.relation_count

    def inverse_array(self, rels: np.ndarray) -> np.ndarray:
        rels = np.asarray(rels)
        base = rels - self.relation_offset
        return np.where(base < self.relation_count, rels + self.relation_count, rels - self.relation_count)

    def kind(self, idx: int) -> str:
        if idx < NUM_SPECIAL:
            return "special"
        if idx < self.relation_offset:
            return "entity"
        if idx < self.relation_offset + self.relation_count:
            return "relation"
        return "inverse_relation"

    def manifest_text(self) -> str:
        return "".join(f"{tok}\t{i}\t{self.kind(i)}\n" for i, tok in enumerate(self.tokens))

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.manifest_text().encode("utf-8")).hexdigest()

    def save_manifest(self, path) -> None:
        Path(path).write_text(self.manifest_text(), encoding="utf-8")

    @classmethod
    def from_manifest(cls, path) -> "Vocabulary":
        entities, relations = [], []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            tok, _, kind = line.split("\t")
            if kind == "entity":
                entities.append(tok)
            elif kind == "relation":
                relations.append(tok)
        return cls(entities, relations)


def read_tsv(path) -> list[tuple[str, str, str]]:
    """Raw string triples from a head<TAB>relation<TAB>tail file; blank lines are skipped."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise ParseError(path, line_no, f"expected 3 tab-separated fields, got {len(fields)}")
            rows.append((fields[0], fields[1], fields[2]))
    return rows


def build_vocabulary(*row_sets) -> Vocabulary:
    entities: dict[str, None] = {}
    relations: dict[str, None] = {}
    for rows in row_sets:
        for h, r, t in rows:
            entities.setdefault(h)
            entities.setdefault(t)
            relations.setdefault(r)
    return Vocabulary(entities, relations)


def encode_rows(rows, vocab: Vocabulary, source="<rows>") -> np.ndarray:
    """Resolve string triples against a frozen vocabulary; duplicates are dropped, order kept."""
    out = []
    seen = set()
    for h, r, t in rows:
        ids = []
        for tok, want in ((h, "entity"), (r, "relation"), (t, "entity")):
            idx = vocab._index.get(tok)
            if idx is None or vocab.kind(idx) != want:
                raise VocabularyError(f"{source}: unknown {want} {tok!r}")
            ids.append(idx)
        key = tuple(ids)
        if key not in seen:
            seen.add(key)
            out.append(key)
    return np.asarray(out, dtype=np.int64).reshape(-1, 3)


def load_triples(path, vocab: Vocabulary | None = None) -> tuple[np.ndarray, Vocabulary]:
    """Load one TSV split.

    Without ``vocab`` a fresh vocabulary is built from this file alone.  With
    ``vocab`` every token must already be known.
    """
    rows = read_tsv(path)
    if vocab is None:
        vocab = build_vocabulary(rows)
    return encode_rows(rows, vocab, source=str(path)), vocab


class TripleStore:
    """Named splits of triples plus a lazily built (head, relation) -> tails index."""

    def __init__(self, splits: dict[str, np.ndarray], vocab: Vocabulary, augmented: bool = False):
        self.splits = {name: np.asarray(arr, dtype=np.int64).reshape(-1, 3) for name, arr in splits.items()}
        self.vocab = vocab
        self.augmented = augmented
        self._tails: dict[tuple[int, int], set[int]] | None = None

    def __getitem__(self, name) -> np.ndarray:
        return self.splits[name]

    def __repr__(self):
        sizes = ", ".join(f"{k}={len(v)}" for k, v in self.splits.items())
        return f"TripleStore({sizes}, augmented={self.augmented})"

    def known_tails(self, head: int, relation: int) -> set[int]:
        if self._tails is None:
            index = defaultdict(set)
            for arr in self.splits.values():
                for h, r, t in arr.tolist():
                    index[(h, r)].add(t)
            self._tails = dict(index)
        return self._tails.get((head, relation), set())


def load_dataset(directory, splits=SPLIT_NAMES) -> TripleStore:
    """Load ``<dir>/{train,valid,test}.txt`` with one shared vocabulary."""
    directory = Path(directory)
    raw = {name: read_tsv(directory / f"{name}.txt") for name in splits}
    vocab = build_vocabulary(*raw.values())
    encoded = {name: encode_rows(rows, vocab, source=str(directory / f"{name}.txt")) for name, rows in raw.items()}
    return TripleStore(encoded, vocab)


def augment_inverse(store: TripleStore) -> TripleStore:
    if store.augmented:
        raise StateError("triple store is already inverse-augmented")
    vocab = store.vocab
    out = {}
    for name, arr in store.splits.items():
        inv = np.stack([arr[:, 2], vocab.inverse_array(arr[:, 1]), arr[:, 0]], axis=1) if len(arr) else arr
        out[name] = np.concatenate([arr, inv.reshape(-1, 3)], axis=0)
    return TripleStore(out, vocab, augmented=True)


def strip_inverse(store: TripleStore) -> TripleStore:
    """Drop every triple whose relation is an inverse relation."""
    limit = store.vocab.relation_offset + store.vocab.relation_count
    out = {name: arr[arr[:, 1] < limit] for name, arr in store.splits.items()}
    return TripleStore(out, store.vocab, augmented=False)


class AdjacencyIndex:
    """Outgoing (relation, target) edges per entity, sorted, in CSR layout.

    Multiplicity of the input triples is kept; triples loaded through
    :func:`load_dataset` are already deduplicated.
    """

    def __init__(self, triples: np.ndarray, vocab: Vocabulary):
        triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
        self.vocab = vocab
        num_tokens = len(vocab)
        order = np.lexsort((triples[:, 2], triples[:, 1], triples[:, 0]))
        triples = triples[order]
        self.num_tokens = num_tokens
        counts = np.bincount(triples[:, 0], minlength=num_tokens)
        self.offsets = np.concatenate([[0], np.cumsum(counts)])
        self.relations = triples[:, 1].copy()
        self.targets = triples[:, 2].copy()
        for arr in (self.offsets, self.relations, self.targets):
            arr.setflags(write=False)

    @classmethod
    def from_store(cls, store: TripleStore) -> "AdjacencyIndex":
        if not store.augmented:
            raise StateError("adjacency must be built from the inverse-augmented train split")
        return cls(store["train"], store.vocab)

    def __len__(self):
        return len(self.relations)

    def degree(self, e: int) -> int:
        if e >= self.num_tokens:
            return 0
        return int(self.offsets[e + 1] - self.offsets[e])

    def edge_arrays(self, e: int) -> tuple[np.ndarray, np.ndarray]:
        if e >= self.num_tokens:
            empty = np.empty(0, dtype=np.int64)
            return empty, empty
        lo, hi = self.offsets[e], self.offsets[e + 1]
        return self.relations[lo:hi], self.targets[lo:hi]

    def has_edge(self, head: int, relation: int, tail: int) -> bool:
        rels, ents = self.edge_arrays(head)
        return bool(np.any((rels == relation) & (ents == tail)))


def outgoing_edges(adj: AdjacencyIndex, e: int, excluded=None) -> list[tuple[int, int]]:
    """Train edges leaving ``e`` in sorted order.

    ``excluded`` is a single ``(relation, entity)`` pair or an iterable of them;
    one instance of each excluded pair is removed.
    """
    rels, ents = adj.edge_arrays(e)
    edges = list(zip(rels.tolist(), ents.tolist()))
    if excluded is None:
        return edges
    if isinstance(excluded, tuple) and len(excluded) == 2 and not isinstance(excluded[0], tuple):
        excluded = [excluded]
    for pair in excluded:
        pair = (int(pair[0]), int(pair[1]))
        if pair in edges:
            edges.remove(pair)
    return edges


def query_exclusions(e: int, query: Triple, vocab: Vocabulary) -> list[tuple[int, int]]:
    """Edges leaving ``e`` that would traverse the query triple or its backward connection."""
    head, rel, tail = query
    out = []
    if e == head:
        out.append((rel, tail))
    if e == tail:
        out.append((vocab.inverse(rel), head))
    return out


def filtered_candidates(query: Triple, store: TripleStore) -> set[int]:
    """Known answers for ``(query.head, query.relation, ?)`` in any split, minus the query's own tail."""
    return store.known_tails(query.head, query.relation) - {query.tail}
