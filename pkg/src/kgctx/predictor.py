"""Transformer encoder that recovers the masked entity at position 0 of a chain.

Two variants share the code and differ only in their input serialization:
``coke`` reads relation-only chains, ``interent`` reads chains with the
intermediate entities.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import ops
from .autodiff.nn import ParameterStore, truncated_normal
from .errors import CompatibilityError, ContractError
from .kg import UNK, AdjacencyIndex, Triple, TripleStore, Vocabulary
from .paths import Chain, ChainFormat, MaskedChain, as_format, fixed_k, mask_head, sample_pretraining_set, uniform_mix

log = logging.getLogger(__name__)

PAD = UNK


@dataclass
class PredictorConfig:
    variant: str = "coke"
    d: int = 64
    layers: int = 2
    heads: int = 4
    ffn_dim: int = 256
    max_seq_len: int = 16
    dropout: float = 0.1
    context_length: int = 2
    vocab_size: int = 0
    vocab_hash: str = ""
    tie_output: bool = False
    dtype: str = "float64"

    def __post_init__(self):
        if self.variant not in ("coke", "interent"):
            raise ContractError(f"unknown predictor variant {self.variant!r}")
        if self.d % self.heads:
            raise ContractError(f"d={self.d} is not divisible by heads={self.heads}")
        if self.max_seq_len < self.seq_len(self.context_length):
            raise ContractError(f"max_seq_len={self.max_seq_len} too short for N={self.context_length}")

    @property
    def chain_format(self) -> ChainFormat:
        return ChainFormat.RELONLY if self.variant == "coke" else ChainFormat.INTERENT

    def seq_len(self, n_steps: int) -> int:
        return 3 + n_steps if self.variant == "coke" else 3 + 2 * n_steps

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


class PredictorModel:
    def __init__(self, config: PredictorConfig, seed: int = 0):
        self.config = config
        rng = np.random.default_rng(seed)
        self.dropout_rng = np.random.default_rng(rng.integers(2**63))
        self.params = p = ParameterStore(config.dtype)
        d, V = config.d, config.vocab_size
        if V <= 0:
            raise ContractError("PredictorConfig.vocab_size must be set")
        p.add("tok_emb", truncated_normal(rng, (V, d)))
        p.add("pos_emb", truncated_normal(rng, (config.max_seq_len, d)))
        p.add("emb_ln.g", np.ones(d))
        p.add("emb_ln.b", np.zeros(d))
        for i in range(config.layers):
            pre = f"layer{i}"
            for name in ("q", "k", "v", "o"):
                p.add(f"{pre}.attn.W{name}", truncated_normal(rng, (d, d)))
                p.add(f"{pre}.attn.b{name}", np.zeros(d))
            p.add(f"{pre}.ln1.g", np.ones(d))
            p.add(f"{pre}.ln1.b", np.zeros(d))
            p.add(f"{pre}.ffn.W1", truncated_normal(rng, (d, config.ffn_dim)))
            p.add(f"{pre}.ffn.b1", np.zeros(config.ffn_dim))
            p.add(f"{pre}.ffn.W2", truncated_normal(rng, (config.ffn_dim, d)))
            p.add(f"{pre}.ffn.b2", np.zeros(d))
            p.add(f"{pre}.ln2.g", np.ones(d))
            p.add(f"{pre}.ln2.b", np.zeros(d))
        p.add("head.W", truncated_normal(rng, (d, d)))
        p.add("head.b", np.zeros(d))
        p.add("head.ln.g", np.ones(d))
        p.add("head.ln.b", np.zeros(d))
        if not config.tie_output:
            p.add("head.out.W", truncated_normal(rng, (d, V)))
        p.add("head.out.b", np.zeros(V))

    @property
    def vocab_size(self):
        return self.config.vocab_size

    def zero_head(self):
        """Zero the output projection so every logit is 0 (uniform prediction)."""
        if self.config.tie_output:
            raise ContractError("cannot zero a head tied to the token embeddings")
        self.params["head.out.W"].data[:] = 0.0
        self.params["head.out.b"].data[:] = 0.0

    def encode(self, tokens: np.ndarray, key_mask=None, training=False) -> ad.Tensor:
        tokens = np.asarray(tokens, dtype=np.int64)
        if tokens.ndim == 1:
            tokens = tokens[None, :]
        B, L = tokens.shape
        cfg, p = self.config, self.params
        if L > cfg.max_seq_len:
            raise ContractError(f"sequence length {L} exceeds max_seq_len={cfg.max_seq_len}")
        if tokens.size and (tokens.min() < 0 or tokens.max() >= cfg.vocab_size):
            raise ContractError(f"token ids must lie in [0, {cfg.vocab_size})")
        rate, rng = cfg.dropout, self.dropout_rng
        x = ad.embed(p["tok_emb"], tokens) + p["pos_emb"][:L]
        x = ad.layer_norm(x, p["emb_ln.g"], p["emb_ln.b"])
        x = ops.dropout(x, rate, rng, training)
        for i in range(cfg.layers):
            pre = f"layer{i}"
            a = ad.multi_head_attention(
                x, *(p[f"{pre}.attn.{n}"] for n in ("Wq", "bq", "Wk", "bk", "Wv", "bv", "Wo", "bo")),
                heads=cfg.heads, key_mask=key_mask, dropout_rate=rate, rng=rng, training=training)
            x = ad.layer_norm(x + ops.dropout(a, rate, rng, training), p[f"{pre}.ln1.g"], p[f"{pre}.ln1.b"])
            f = ad.ffn(x, p[f"{pre}.ffn.W1"], p[f"{pre}.ffn.b1"], p[f"{pre}.ffn.W2"], p[f"{pre}.ffn.b2"])
            x = ad.layer_norm(x + ops.dropout(f, rate, rng, training), p[f"{pre}.ln2.g"], p[f"{pre}.ln2.b"])
        return x

    def head(self, h0: ad.Tensor) -> ad.Tensor:
        p = self.params
        z = ops.gelu(ad.affine(h0, p["head.W"], p["head.b"]))
        z = ad.layer_norm(z, p["head.ln.g"], p["head.ln.b"])
        W = p["tok_emb"].T if self.config.tie_output else p["head.out.W"]
        return ad.affine(z, W, p["head.out.b"])

    def logits(self, tokens, key_mask=None, training=False) -> ad.Tensor:
        h = self.encode(tokens, key_mask, training)
        return self.head(h[:, 0, :])


def pad_batch(seqs) -> tuple[np.ndarray, np.ndarray | None]:
    """Right-pad token sequences; returns ids and an attendable-position mask (None if no padding)."""
    seqs = [list(s) for s in seqs]
    L = max(len(s) for s in seqs)
    tokens = np.full((len(seqs), L), PAD, dtype=np.int64)
    mask = np.zeros((len(seqs), L), dtype=bool)
    for i, s in enumerate(seqs):
        tokens[i, :len(s)] = s
        mask[i, :len(s)] = True
    return tokens, (None if mask.all() else mask)


def _masked_tokens(model: PredictorModel, chain) -> tuple[int, ...]:
    if isinstance(chain, MaskedChain):
        return chain.tokens
    if isinstance(chain, Chain):
        return mask_head(as_format(chain, model.config.chain_format)).tokens
    return tuple(chain)


def encode(model: PredictorModel, masked_tokens) -> np.ndarray:
    """Final-layer hidden states ``(L, d)`` in inference mode."""
    with ad.no_grad():
        return model.encode(np.asarray(masked_tokens)[None, :])[0].data.copy()


def predict_distribution(model: PredictorModel, chain) -> np.ndarray:
    """Softmax over the whole vocabulary for the masked position 0."""
    return predict_batch(model, [chain])[0]


def predict_batch(model: PredictorModel, chains, batch_size: int = 1024) -> np.ndarray:
    seqs = [_masked_tokens(model, c) for c in chains]
    out = []
    with ad.no_grad():
        for lo in range(0, len(seqs), batch_size):
            tokens, mask = pad_batch(seqs[lo:lo + batch_size])
            logits = model.logits(tokens, mask).data.astype(np.float64)
            logits -= logits.max(axis=1, keepdims=True)
            e = np.exp(logits)
            out.append(e / e.sum(axis=1, keepdims=True))
    return np.concatenate(out, axis=0) if out else np.zeros((0, model.vocab_size))


def _check_entity_targets(model, vocab: Vocabulary | None, targets):
    targets = np.asarray(targets)
    if vocab is not None:
        ok = (targets >= vocab.entity_offset) & (targets < vocab.relation_offset)
    else:
        ok = (targets >= 4) & (targets < model.vocab_size)
    if not ok.all():
        raise ContractError("masked targets must be entity ids")


def chain_loss(model: PredictorModel, batch, training=False, vocab: Vocabulary | None = None) -> ad.Tensor:
    """Mean cross-entropy of the position-0 prediction against the original entity."""
    batch = [mask_head(c) if isinstance(c, Chain) else c for c in batch]
    if not batch:
        raise ContractError("empty batch")
    targets = np.array([c.target for c in batch], dtype=np.int64)
    _check_entity_targets(model, vocab, targets)
    tokens, mask = pad_batch([c.tokens for c in batch])
    return ad.cross_entropy(model.logits(tokens, mask, training=training), targets)


def pretrain_step(model: PredictorModel, batch, lr: float = 1e-3, optim: ad.OptimConfig | None = None,
                  vocab: Vocabulary | None = None, training: bool = True) -> float:
    """One optimizer step on a batch of masked chains; returns the loss before the step."""
    model.params.zero_grad()
    loss = chain_loss(model, batch, training=training, vocab=vocab)
    loss.backward()
    ad.optimizer_step(model.params, lr, optim)
    return float(loss.data)


@dataclass
class PretrainConfig:
    epochs: int = 10
    batch_size: int = 128
    lr: float = 1e-3
    chains_per_triple: int = 1
    k_fixed: int = 3          # InterEnt pretraining walk length
    k_min: int = 1            # RelOnly pretraining length mix
    k_max: int = 5
    clip_norm: float | None = 5.0
    checkpoint_every: int = 0  # epochs; 0 disables
    max_steps: int | None = None  # stop after this many optimizer steps


def pretrain(model: PredictorModel, store: TripleStore, config: PretrainConfig, rng: np.random.Generator,
             adj: AdjacencyIndex | None = None, on_step=None, on_epoch=None) -> list[tuple[int, float]]:
    """Fresh random-walk chains every epoch, fed to :func:`pretrain_step` in minibatches.

    Returns the loss curve as ``(step, loss)`` pairs.  ``on_epoch(epoch, model)``
    is called after every ``checkpoint_every`` epochs.
    """
    if model.config.vocab_hash and model.config.vocab_hash != store.vocab.hash:
        raise CompatibilityError("predictor was built for a different vocabulary")
    adj = adj or AdjacencyIndex.from_store(store)
    fmt = model.config.chain_format
    if fmt is ChainFormat.RELONLY:
        k_policy = uniform_mix(config.k_min, config.k_max)
    else:
        k_policy = fixed_k(config.k_fixed)
    optim = ad.OptimConfig(clip_norm=config.clip_norm)
    curve = []
    step = 0
    train = store["train"]
    cpt = config.chains_per_triple
    for epoch in range(config.epochs):
        # chains are drawn per minibatch from a shuffled (triple, copy) order
        order = rng.permutation(len(train) * cpt)
        for lo in range(0, len(order), config.batch_size):
            rows = train[order[lo:lo + config.batch_size] // cpt]
            batch = [mask_head(c) for c in sample_pretraining_set(adj, rows, fmt, 1, k_policy, rng)]
            loss = pretrain_step(model, batch, config.lr, optim, vocab=store.vocab)
            step += 1
            curve.append((step, loss))
            if on_step is not None:
                on_step(step, loss)
            if config.max_steps is not None and step >= config.max_steps:
                return curve
        log.info("pretrain epoch %d: mean loss %.4f", epoch + 1,
                 np.mean([l for _, l in curve[-max(1, len(order) // config.batch_size):]]))
        if on_epoch is not None and config.checkpoint_every and (epoch + 1) % config.checkpoint_every == 0:
            on_epoch(epoch + 1, model)
    return curve


def score_entities(model: PredictorModel, query: Triple, context: Chain, vocab: Vocabulary) -> np.ndarray:
    """Log-probabilities of the masked position restricted to entity ids (index = id - entity_offset)."""
    return score_entities_batch(model, [(query, context)], vocab)[0]


def score_entities_batch(model: PredictorModel, pairs, vocab: Vocabulary) -> np.ndarray:
    chains = []
    for query, context in pairs:
        if tuple(context.query) != tuple(query):
            raise ContractError(f"context chain belongs to {tuple(context.query)}, not {tuple(query)}")
        chains.append(context)
    probs = predict_batch(model, chains)
    ent = probs[:, vocab.entity_offset:vocab.relation_offset]
    with np.errstate(divide="ignore"):
        return np.log(ent)


def save_predictor(path, model: PredictorModel) -> None:
    ad.save_checkpoint(path, model.params.arrays(), {"kind": "predictor", "config": asdict(model.config)})


def load_predictor(path, vocab: Vocabulary | None = None) -> PredictorModel:
    arrays, header = ad.load_checkpoint(path)
    if header.get("kind") != "predictor":
        raise CompatibilityError(f"{path} is not a predictor checkpoint")
    config = PredictorConfig(**header["config"])
    if vocab is not None and config.vocab_hash != vocab.hash:
        raise CompatibilityError("predictor checkpoint vocabulary does not match the dataset vocabulary")
    model = PredictorModel(config)
    model.params.load_arrays(arrays)
    return model


def new_predictor(vocab: Vocabulary, seed: int = 0, **overrides) -> PredictorModel:
    config = PredictorConfig(vocab_size=len(vocab), vocab_hash=vocab.hash, **overrides)
    return PredictorModel(config, seed=seed)
