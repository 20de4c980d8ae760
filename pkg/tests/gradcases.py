"""Gradient-check cases shared by the unit tests and the acceptance suite.

Each builder returns ``(loss_fn, params)``: a closure that rebuilds the graph
from the leaf tensors in ``params`` and reduces it to a scalar by contracting
with a fixed random weight, so every output entry contributes.
"""
import numpy as np

from kgctx import autodiff as ad
from kgctx.autodiff import ops
from kgctx.agent import PolicyConfig, PolicyNetwork
from kgctx.kg import MASK, Vocabulary
from kgctx.paths import MaskedChain
from kgctx.predictor import PredictorConfig, PredictorModel, chain_loss


def leaf(rng, *shape, positive=False, scale=1.0):
    x = rng.standard_normal(shape) * scale
    if positive:
        x = np.abs(x) + 0.5
    return ad.Tensor(x, requires_grad=True)


def contract(out, rng):
    w = rng.standard_normal(out.shape)
    return lambda t: ops.tsum(t * w)


def unary(fn, positive=False):
    def build(rng):
        x = leaf(rng, 3, 4, positive=positive)
        red = contract(fn(x), rng)
        return (lambda: red(fn(x))), {"x": x}
    return build


def binary(fn, shape_a=(3, 4), shape_b=(3, 4), positive_b=False):
    def build(rng):
        a, b = leaf(rng, *shape_a), leaf(rng, *shape_b, positive=positive_b)
        red = contract(fn(a, b), rng)
        return (lambda: red(fn(a, b))), {"a": a, "b": b}
    return build


def _embed(rng):
    table = leaf(rng, 7, 5)
    ids = np.array([[0, 3, 3], [6, 1, 3]])
    red = contract(ad.embed(table, ids), rng)
    return (lambda: red(ad.embed(table, ids))), {"table": table}


def _affine(rng):
    x, W, b = leaf(rng, 2, 3, 4), leaf(rng, 4, 5), leaf(rng, 5)
    red = contract(ad.affine(x, W, b), rng)
    return (lambda: red(ad.affine(x, W, b))), {"x": x, "W": W, "b": b}


def _layer_norm(rng):
    x, g, b = leaf(rng, 2, 3, 6), leaf(rng, 6), leaf(rng, 6)
    red = contract(ad.layer_norm(x, g, b), rng)
    return (lambda: red(ad.layer_norm(x, g, b))), {"x": x, "gamma": g, "beta": b}


def _softmax(rng):
    x = leaf(rng, 3, 5)
    mask = np.array([[1, 1, 0, 1, 1], [1, 1, 1, 1, 1], [0, 1, 0, 0, 1]], dtype=bool)
    red = contract(ad.softmax(x, mask=mask), rng)
    return (lambda: red(ad.softmax(x, mask=mask))), {"x": x}


def _log_softmax(rng):
    x = leaf(rng, 3, 5)
    mask = np.array([[1, 1, 0, 1, 1], [1, 1, 1, 1, 1], [0, 1, 0, 0, 1]], dtype=bool)
    red = contract(ops.log_softmax(x, mask=mask), rng)
    return (lambda: red(ops.log_softmax(x, mask=mask))), {"x": x}


def _cross_entropy(rng):
    x = leaf(rng, 4, 6)
    y = np.array([0, 5, 2, 2])
    return (lambda: ad.cross_entropy(x, y)), {"logits": x}


def _attention(rng):
    d, heads = 6, 2
    x = leaf(rng, 2, 4, d)
    ps = {n: leaf(rng, d, d, scale=0.5) for n in ("Wq", "Wk", "Wv", "Wo")}
    ps.update({n: leaf(rng, d) for n in ("bq", "bk", "bv", "bo")})
    key_mask = np.array([[1, 1, 1, 0], [1, 1, 1, 1]], dtype=bool)

    def f():
        return ad.multi_head_attention(x, ps["Wq"], ps["bq"], ps["Wk"], ps["bk"], ps["Wv"], ps["bv"],
                                       ps["Wo"], ps["bo"], heads, key_mask=key_mask)

    red = contract(f(), rng)
    return (lambda: red(f())), {"x": x, **ps}


def _ffn(rng):
    x, W1, b1, W2, b2 = leaf(rng, 2, 3, 4), leaf(rng, 4, 8), leaf(rng, 8), leaf(rng, 8, 4), leaf(rng, 4)
    red = contract(ad.ffn(x, W1, b1, W2, b2), rng)
    return (lambda: red(ad.ffn(x, W1, b1, W2, b2))), {"x": x, "W1": W1, "b1": b1, "W2": W2, "b2": b2}


def _lstm(rng):
    n_in, H = 3, 4
    x, h, c = leaf(rng, 2, n_in), leaf(rng, 2, H), leaf(rng, 2, H)
    W, b = leaf(rng, n_in + H, 4 * H, scale=0.5), leaf(rng, 4 * H)

    def f():
        h1, c1 = ad.lstm_cell(x, h, c, W, b)
        h2, c2 = ad.lstm_cell(x, h1, c1, W, b)   # two steps so the recurrence is exercised
        return ops.concat([h2, c2], axis=-1)

    red = contract(f(), rng)
    return (lambda: red(f())), {"x": x, "h": h, "c": c, "W": W, "b": b}


def _getitem(rng):
    x = leaf(rng, 4, 5)
    idx = (np.array([0, 2, 2]), slice(1, 4))
    red = contract(x[idx], rng)
    return (lambda: red(x[idx])), {"x": x}


def _pick(rng):
    x = leaf(rng, 4, 5)
    idx = np.array([4, 0, 0, 2])
    red = contract(ops.pick(x, idx), rng)
    return (lambda: red(ops.pick(x, idx))), {"x": x}


def _dropout(rng):
    x = leaf(rng, 3, 6)

    def f():
        return ops.dropout(x, 0.3, np.random.default_rng(5), training=True)

    red = contract(f(), rng)
    return (lambda: red(f())), {"x": x}


def _shape_ops(rng):
    x = leaf(rng, 2, 3, 4)

    def f():
        y = ops.reshape(ops.transpose(x, (2, 0, 1)), (4, 6))
        z = ops.swapaxes(ops.stack([y, y * 2.0], axis=0), 0, 1)
        return ops.mean(z, axis=1) + ops.tsum(x, axis=(0, 1), keepdims=False)[:, None]

    red = contract(f(), rng)
    return (lambda: red(f())), {"x": x}


def _masked_fill(rng):
    x = leaf(rng, 3, 4)
    mask = rng.random((3, 4)) < 0.4
    red = contract(ops.masked_fill(x, mask, -3.0), rng)
    return (lambda: red(ops.masked_fill(x, mask, -3.0))), {"x": x}


def micro_predictor(rng, variant="coke"):
    """End-to-end predictor: d=8, one layer, vocabulary of 28 tokens."""
    vocab = Vocabulary([f"e{i}" for i in range(10)], [f"r{i}" for i in range(7)])
    cfg = PredictorConfig(variant=variant, d=8, layers=1, heads=2, ffn_dim=16, max_seq_len=8, dropout=0.0,
                          context_length=2, vocab_size=len(vocab), dtype="float64")
    model = PredictorModel(cfg, seed=int(rng.integers(1000)))
    # weights at unit scale so that gradients are far from round-off
    for _, p in model.params:
        p.data = p.data * 20.0 + (0.1 * rng.standard_normal(p.shape) if p.ndim == 1 else 0.0)
    ents = list(vocab.entity_ids)
    rels = [vocab.id(f"r{i}") for i in range(7)]
    batch = []
    for _ in range(4):
        n = 3 + 2 if variant == "coke" else 3 + 4
        toks = [MASK, int(rng.choice(rels))]
        while len(toks) < n - 1:
            toks.append(int(rng.choice(rels)))
        toks.append(int(rng.choice(ents)))
        batch.append(MaskedChain(tuple(toks), int(rng.choice(ents))))
    batch.append(MaskedChain((MASK, rels[0], rels[1], ents[0]), ents[1]))   # shorter: exercises padding
    return (lambda: chain_loss(model, batch, training=False)), dict(model.params)


def micro_policy(rng):
    cfg = PolicyConfig(vocab_size=20, emb_dim=4, hidden=5, mlp_hidden=6, zero_init_output=False, dtype="float64")
    policy = PolicyNetwork(cfg, seed=int(rng.integers(1000)))
    prev = np.array([1, 12, 14])
    cur = np.array([5, 6, 7])
    q = np.array([12, 13, 14])
    act_rel = rng.integers(12, 20, size=(3, 4))
    act_ent = rng.integers(4, 12, size=(3, 4))
    mask = np.array([[1, 1, 1, 1], [1, 1, 0, 0], [1, 0, 1, 1]], dtype=bool)
    pick = np.array([2, 1, 3])

    def f():
        hc = policy.initial_state(3)
        logp, hc = policy.step(hc, prev, cur, q, act_rel, act_ent, mask)
        logp2, _ = policy.step(hc, act_rel[:, 0], act_ent[:, 0], q, act_rel, act_ent, mask)
        return ops.tsum(ops.pick(logp, pick)) + ops.tsum(ops.exp(logp2) * logp2)

    return f, dict(policy.params)


CASES = {
    "add": binary(lambda a, b: a + b, (3, 4), (4,)),
    "mul": binary(lambda a, b: a * b, (3, 4), (3, 1)),
    "div": binary(lambda a, b: a / b, positive_b=True),
    "matmul": binary(ops.matmul, (2, 3, 4), (4, 5)),
    "matmul_batched": binary(ops.matmul, (2, 3, 4), (2, 4, 5)),
    "concat": binary(lambda a, b: ops.concat([a, b], axis=-1), (3, 2), (3, 4)),
    "power": unary(lambda x: ops.power(x, 3.0)),
    "exp": unary(ops.exp),
    "log": unary(ops.log, positive=True),
    "tanh": unary(ops.tanh),
    "sigmoid": unary(ops.sigmoid),
    "relu": unary(ops.relu),
    "gelu": unary(ops.gelu),
    "embed": _embed,
    "affine": _affine,
    "layer_norm": _layer_norm,
    "softmax": _softmax,
    "log_softmax": _log_softmax,
    "cross_entropy": _cross_entropy,
    "multi_head_attention": _attention,
    "ffn": _ffn,
    "lstm_cell": _lstm,
    "getitem": _getitem,
    "pick": _pick,
    "dropout": _dropout,
    "shape_ops": _shape_ops,
    "masked_fill": _masked_fill,
    "predictor_coke": micro_predictor,
    "predictor_interent": lambda rng: micro_predictor(rng, "interent"),
    "policy": micro_policy,
}


def max_rel_error(name, seed=0, eps=1e-5) -> float:
    loss_fn, params = CASES[name](np.random.default_rng(seed))
    return max(ad.check_gradients(loss_fn, params, eps).values())
