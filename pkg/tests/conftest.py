import numpy as np
import pytest

from kgctx.kg import AdjacencyIndex, TripleStore, Vocabulary, augment_inverse


def write_tsv(path, rows):
    path.write_text("".join("\t".join(r) + "\n" for r in rows), encoding="utf-8")
    return path


@pytest.fixture
def toy_dir(tmp_path):
    """Five entities, three relations, one fact per split beyond train."""
    train = [("A", "r", "B"), ("A", "s", "C"), ("B", "t", "D"), ("C", "r", "E"), ("D", "s", "A")]
    valid = [("A", "r", "C")]
    test = [("B", "r", "E")]
    for name, rows in (("train", train), ("valid", valid), ("test", test)):
        write_tsv(tmp_path / f"{name}.txt", rows)
    return tmp_path


@pytest.fixture
def make_adj():
    """Build (vocab, adjacency) from string triples over an explicit vocabulary."""

    def build(rows, entities=None, relations=None):
        entities = entities or sorted({h for h, _, _ in rows} | {t for _, _, t in rows})
        relations = relations or sorted({r for _, r, _ in rows})
        vocab = Vocabulary(entities, relations)
        ids = np.array([[vocab.id(h), vocab.id(r), vocab.id(t)] for h, r, t in rows], dtype=np.int64)
        store = augment_inverse(TripleStore({"train": ids.reshape(-1, 3)}, vocab))
        return vocab, AdjacencyIndex.from_store(store)

    return build


# one status line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture(scope="session")
def experiment(tmp_path_factory):
    """The synthetic desk experiment, shared by every test that needs it."""
    from experiment import synthetic_experiment
    return synthetic_experiment(str(tmp_path_factory.mktemp("synthetic")))
