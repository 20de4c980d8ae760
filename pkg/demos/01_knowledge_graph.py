"""
Loading a knowledge graph
=========================

A dataset is a directory with ``train.txt``, ``valid.txt`` and ``test.txt``,
one tab-separated ``head relation tail`` triple per line.
"""
import tempfile
from pathlib import Path

from kgctx.kg import AdjacencyIndex, augment_inverse, load_dataset, outgoing_edges

root = Path(tempfile.mkdtemp())
rows = {
    "train": [("paris", "capital_of", "france"), ("france", "in", "europe"), ("lyon", "city_of", "france")],
    "valid": [("lyon", "in", "europe")],
    "test": [("paris", "in", "europe")],
}
for split, triples in rows.items():
    (root / f"{split}.txt").write_text("".join("\t".join(t) + "\n" for t in triples))

store = load_dataset(root)
vocab = store.vocab
print(store)

# special tokens come first, then entities, then relations and their inverses
for idx in range(len(vocab)):
    print(idx, vocab.token(idx), vocab.kind(idx))

# every fact gets a reversed copy so walks can move against the edge direction
aug = augment_inverse(store)
print(len(store["train"]), "train facts ->", len(aug["train"]), "after augmentation")

# the adjacency index only ever sees train facts
adj = AdjacencyIndex.from_store(aug)
france = vocab.id("france")
for rel, ent in outgoing_edges(adj, france):
    print("france --", vocab.token(rel), "->", vocab.token(ent))
