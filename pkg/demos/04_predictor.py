"""
Pretraining the masked-entity predictor
=======================================

On a generated graph where ``rq(x, y)`` holds exactly when ``x -r1-> z -r2-> y``,
the right one-step context (the ``r2`` edge back from ``y`` to ``z``) narrows the
answer down to the predecessors of ``z``.  A random step usually does not.
"""
import tempfile

import numpy as np

from kgctx.evaluation import FixedStrategy, SamplingStrategy, evaluate_predictor
from kgctx.kg import AdjacencyIndex, augment_inverse, load_dataset
from kgctx.predictor import PretrainConfig, new_predictor, pretrain
from kgctx.synth import generate_synthetic_kg, oracle_context

kg = generate_synthetic_kg(120, rng=np.random.default_rng(0), noise_relations=1)
store = augment_inverse(load_dataset(kg.write(tempfile.mkdtemp())))
adj = AdjacencyIndex.from_store(store)
print(store)

model = new_predictor(store.vocab, seed=0, d=64, layers=2, heads=4, ffn_dim=128, context_length=1,
                      dtype="float32")
curve = pretrain(model, store, PretrainConfig(epochs=80, batch_size=256, lr=2e-3, chains_per_triple=4,
                                              k_min=1, k_max=1), np.random.default_rng(1), adj)
print(f"loss {curve[0][1]:.3f} -> {curve[-1][1]:.3f} over {len(curve)} steps")

oracle = FixedStrategy(lambda q: oracle_context(q, adj, store.vocab, 1))
for strategy in (oracle, SamplingStrategy(adj, 1, seed=0)):
    print(evaluate_predictor(model, strategy, store).summary())
