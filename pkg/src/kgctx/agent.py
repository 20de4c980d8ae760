"""Policy-gradient path search over the inverse-augmented train graph.

The policy encodes the traversal history with an LSTM and scores each
available ``(relation, entity)`` action by a dot product between the action
embedding and an MLP projection of ``[history, current entity, query relation]``.

Two terminal rewards are supported:

* ``answer``: 1 if the walk ends on the masked entity (answer search).
* ``predictor``: probability a frozen predictor assigns to the masked entity
  when the walk is used as its context.
"""
from __future__ import annotations

import contextlib
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import ops
from .autodiff.nn import ParameterStore, lstm_params, truncated_normal
from .errors import CompatibilityError, ContractError
from .kg import CLS, NO_OP, AdjacencyIndex, Triple, Vocabulary, outgoing_edges, query_exclusions
from .paths import Chain, ChainFormat

log = logging.getLogger(__name__)

START_RELATION = CLS


@dataclass
class PolicyConfig:
    vocab_size: int = 0
    vocab_hash: str = ""
    emb_dim: int = 32
    hidden: int = 64
    mlp_hidden: int = 64
    max_actions: int = 200
    zero_init_output: bool = True
    dtype: str = "float64"


@dataclass
class QueryState:
    entity: int
    query_relation: int
    query_tail: int
    t: int = 0
    history: tuple = ()

    @classmethod
    def start(cls, query: Triple) -> "QueryState":
        return cls(query.tail, query.relation, query.tail)

    def advance(self, rel: int, ent: int) -> "QueryState":
        return QueryState(ent, self.query_relation, self.query_tail, self.t + 1, self.history + ((rel, ent),))


@dataclass
class Rollout:
    query: Triple
    chain: Chain
    log_probs: list = field(default_factory=list)
    reward: float | None = None

    @property
    def log_prob(self) -> float:
        return float(np.sum(self.log_probs))

    @property
    def end(self) -> int:
        return self.chain.end


class PolicyNetwork:
    def __init__(self, config: PolicyConfig, seed: int = 0):
        if config.vocab_size <= 0:
            raise ContractError("PolicyConfig.vocab_size must be set")
        self.config = config
        rng = np.random.default_rng(seed)
        self.params = p = ParameterStore(config.dtype)
        D, H, F = config.emb_dim, config.hidden, config.mlp_hidden
        p.add("emb", rng.normal(0.0, 1.0 / np.sqrt(D), (config.vocab_size, D)))
        lstm_params(p, "lstm", 2 * D, H, rng)
        p.add("mlp.W1", rng.normal(0.0, np.sqrt(2.0 / (H + 2 * D)), (H + 2 * D, F)))
        p.add("mlp.b1", np.zeros(F))
        W2 = np.zeros((F, 2 * D)) if config.zero_init_output else truncated_normal(rng, (F, 2 * D), std=0.1)
        p.add("mlp.W2", W2)
        p.add("mlp.b2", np.zeros(2 * D))

    def initial_state(self, batch: int):
        z = np.zeros((batch, self.config.hidden), dtype=self.params.dtype)
        return ad.Tensor(z), ad.Tensor(z.copy())

    def step(self, hc, prev_rel, cur_ent, q_rel, act_rel, act_ent, act_mask):
        """Advance the history encoder by the latest step, then score the available actions.

        Returns ``(log_probs (B, A), new_hc)``; masked actions have log-prob 0 and
        probability 0.
        """
        p = self.params
        E = p["emb"]
        h, c = hc
        cur = ad.embed(E, cur_ent)
        x = ops.concat([ad.embed(E, prev_rel), cur], axis=-1)
        h, c = ad.lstm_cell(x, h, c, p["lstm.W"], p["lstm.b"])
        s = ops.concat([h, cur, ad.embed(E, q_rel)], axis=-1)
        hidden = ops.relu(ad.affine(s, p["mlp.W1"], p["mlp.b1"]))
        out = ad.affine(hidden, p["mlp.W2"], p["mlp.b2"])
        B, A = act_rel.shape
        acts = ops.concat([ad.embed(E, act_rel), ad.embed(E, act_ent)], axis=-1)
        logits = ops.reshape(ops.matmul(acts, ops.reshape(out, (B, out.shape[1], 1))), (B, A))
        return ops.log_softmax(logits, axis=-1, mask=act_mask), (h, c)


def available_actions(adj: AdjacencyIndex, state: QueryState, query: Triple,
                      max_actions: int = 200) -> list[tuple[int, int]]:
    """Train edges from the current entity minus the query edge and its inverse, then NO_OP.

    Hubs are cut to the first ``max_actions - 1`` edges in adjacency order so the
    list, NO_OP included, never exceeds ``max_actions``.
    """
    query = Triple(*map(int, query))
    e = int(state.entity)
    edges = outgoing_edges(adj, e, query_exclusions(e, query, adj.vocab))
    return edges[:max(0, max_actions - 1)] + [(NO_OP, e)]


def _action_arrays(adj, entities, queries, max_actions):
    lists = [available_actions(adj, QueryState(e, q.relation, q.tail), q, max_actions)
             for e, q in zip(entities, queries)]
    A = max(len(a) for a in lists)
    rel = np.full((len(lists), A), NO_OP, dtype=np.int64)
    ent = np.zeros((len(lists), A), dtype=np.int64)
    mask = np.zeros((len(lists), A), dtype=bool)
    for i, acts in enumerate(lists):
        arr = np.asarray(acts, dtype=np.int64)
        rel[i, :len(acts)] = arr[:, 0]
        ent[i, :len(acts)] = arr[:, 1]
        ent[i, len(acts):] = entities[i]
        mask[i, :len(acts)] = True
    return rel, ent, mask


def _replay(policy, state: QueryState):
    hc = policy.initial_state(1)
    prev, cur = START_RELATION, state.query_tail
    for rel, ent in state.history:
        hc = _advance_only(policy, hc, prev, cur)
        prev, cur = rel, ent
    return hc, prev, cur


def _advance_only(policy, hc, prev, cur):
    p = policy.params
    E = p["emb"]
    x = ops.concat([ad.embed(E, np.array([prev])), ad.embed(E, np.array([cur]))], axis=-1)
    return ad.lstm_cell(x, hc[0], hc[1], p["lstm.W"], p["lstm.b"])


def policy_step(policy: PolicyNetwork, state: QueryState, actions) -> ad.Tensor:
    """Differentiable action distribution (shape ``(len(actions),)``) for one state."""
    if not actions:
        raise ContractError("policy_step needs at least one action")
    hc, prev, cur = _replay(policy, state)
    acts = np.asarray(actions, dtype=np.int64)
    logp, _ = policy.step(hc, np.array([prev]), np.array([cur]), np.array([state.query_relation]),
                          acts[None, :, 0], acts[None, :, 1], np.ones((1, len(acts)), dtype=bool))
    return ops.exp(ops.reshape(logp, (len(acts),)))


@dataclass
class EpisodeBatch:
    queries: list
    steps: np.ndarray           # (B, N, 2) relation/entity ids
    step_log_probs: np.ndarray  # (B, N)
    log_prob: ad.Tensor | None  # (B,) summed log-prob, differentiable when recorded
    entropy: ad.Tensor | None   # scalar mean per-step entropy

    def chains(self) -> list[Chain]:
        return [Chain(q, tuple(map(tuple, s.tolist())), ChainFormat.INTERENT) for q, s in zip(self.queries, self.steps)]

    def rollouts(self) -> list[Rollout]:
        return [Rollout(c.query, c, lp.tolist()) for c, lp in zip(self.chains(), self.step_log_probs)]


def run_episodes(policy: PolicyNetwork, adj: AdjacencyIndex, queries, N: int, rng=None,
                 mode: str = "sample", record: bool = False) -> EpisodeBatch:
    """Batched rollouts of ``N`` steps each, starting at every query's tail."""
    if N < 1:
        raise ContractError(f"episode length must be >= 1, got {N}")
    if mode not in ("sample", "greedy"):
        raise ContractError(f"unknown rollout mode {mode!r}")
    queries = [Triple(*map(int, q)) for q in queries]
    B = len(queries)
    q_rel = np.array([q.relation for q in queries], dtype=np.int64)
    cur = np.array([q.tail for q in queries], dtype=np.int64)
    prev = np.full(B, START_RELATION, dtype=np.int64)
    steps = np.zeros((B, N, 2), dtype=np.int64)
    step_lp = np.zeros((B, N))
    total, ent_terms = None, []
    ctx = ad.no_grad() if not record else contextlib.nullcontext()
    with ctx:
        hc = policy.initial_state(B)
        for t in range(N):
            act_rel, act_ent, mask = _action_arrays(adj, cur.tolist(), queries, policy.config.max_actions)
            logp, hc = policy.step(hc, prev, cur, q_rel, act_rel, act_ent, mask)
            probs = np.where(mask, np.exp(logp.data), 0.0)
            if mode == "greedy":
                choice = np.argmax(np.where(mask, logp.data, -np.inf), axis=1)
            else:
                choice = ad.categorical_sample_rows(probs / probs.sum(axis=1, keepdims=True), rng)
            rows = np.arange(B)
            chosen = ops.pick(logp, choice)
            step_lp[:, t] = chosen.data
            if record:
                total = chosen if total is None else total + chosen
                ent_terms.append(ops.neg(ops.tsum(ops.exp(logp) * logp, axis=1)))
            prev = act_rel[rows, choice]
            cur = act_ent[rows, choice]
            steps[:, t, 0] = prev
            steps[:, t, 1] = cur
    entropy = None
    if record:
        entropy = ops.mean(ops.stack(ent_terms, axis=1))
    return EpisodeBatch(queries, steps, step_lp, total, entropy)


def rollout(policy: PolicyNetwork, adj: AdjacencyIndex, query: Triple, N: int, rng=None,
            mode: str = "sample") -> Rollout:
    return run_episodes(policy, adj, [query], N, rng, mode).rollouts()[0]


def reward_answer_search(rollout: Rollout, true_entity: int) -> float:
    return 1.0 if rollout.end == true_entity else 0.0


def check_compatible(policy: PolicyNetwork, predictor) -> None:
    if policy.config.vocab_hash != predictor.config.vocab_hash or \
            policy.config.vocab_size != predictor.config.vocab_size:
        raise CompatibilityError("policy and predictor were built over different vocabularies")


def predictor_rewards(chains, predictor, targets) -> np.ndarray:
    """Probability mass the frozen predictor puts on each target given the chain as context."""
    from .predictor import predict_batch
    probs = predict_batch(predictor, chains)
    return probs[np.arange(len(chains)), np.asarray(targets, dtype=np.int64)]


def reward_predictor(rollout: Rollout, predictor, true_entity: int) -> float:
    return float(predictor_rewards([rollout.chain], predictor, [true_entity])[0])


@dataclass
class ReinforceConfig:
    epochs: int = 10
    batch_queries: int = 64
    rollouts_per_query: int = 20
    lr: float = 1e-3
    baseline_decay: float = 0.95
    entropy_weight: float = 0.01
    entropy_decay: float = 0.99
    clip_norm: float | None = 5.0
    max_updates: int | None = None


def train_reinforce(policy: PolicyNetwork, adj: AdjacencyIndex, queries, N: int, reward: str,
                    config: ReinforceConfig, rng: np.random.Generator, predictor=None,
                    on_epoch=None) -> list[dict]:
    """REINFORCE with a moving-average baseline and a decaying entropy bonus.

    Each update samples ``rollouts_per_query`` walks for a batch of queries and
    ascends ``mean[(R - b) * sum_t log pi(a_t)] + beta * H``.  The predictor,
    when used, is only ever evaluated.  Returns one dict per epoch.
    """
    if reward not in ("answer", "predictor"):
        raise ContractError(f"unknown reward mode {reward!r}")
    if reward == "predictor":
        if predictor is None:
            raise ContractError("predictor reward needs a pretrained predictor")
        check_compatible(policy, predictor)
        fmt = predictor.config.chain_format
    queries = np.asarray(queries, dtype=np.int64).reshape(-1, 3)
    optim = ad.OptimConfig(clip_norm=config.clip_norm)
    baseline = 0.0
    beta = config.entropy_weight
    curve = []
    updates = 0
    for epoch in range(config.epochs):
        order = rng.permutation(len(queries))
        rewards_seen, entropies = [], []
        for lo in range(0, len(order), config.batch_queries):
            if config.max_updates is not None and updates >= config.max_updates:
                break
            batch = queries[order[lo:lo + config.batch_queries]]
            expanded = np.repeat(batch, config.rollouts_per_query, axis=0)
            ep = run_episodes(policy, adj, expanded, N, rng, "sample", record=True)
            if reward == "answer":
                R = (ep.steps[:, -1, 1] == expanded[:, 0]).astype(np.float64)
            else:
                chains = ep.chains()
                if fmt is ChainFormat.RELONLY:
                    chains = [Chain(c.query, c.steps, ChainFormat.RELONLY) for c in chains]
                R = predictor_rewards(chains, predictor, expanded[:, 0])
            advantage = R - baseline
            policy.params.zero_grad()
            pg = ops.mean(ep.log_prob * advantage.astype(policy.params.dtype))
            loss = ops.neg(pg + ep.entropy * beta)
            loss.backward()
            ad.optimizer_step(policy.params, config.lr, optim)
            baseline = config.baseline_decay * baseline + (1 - config.baseline_decay) * float(R.mean())
            beta *= config.entropy_decay
            updates += 1
            rewards_seen.append(float(R.mean()))
            entropies.append(float(ep.entropy.data))
        if not rewards_seen:
            break
        row = {"epoch": epoch + 1, "mean_reward": float(np.mean(rewards_seen)),
               "entropy": float(np.mean(entropies)), "updates": updates}
        curve.append(row)
        log.info("reinforce epoch %d: reward %.4f entropy %.4f", row["epoch"], row["mean_reward"], row["entropy"])
        if on_epoch is not None:
            on_epoch(row)
    return curve


def beam_search(policy: PolicyNetwork, adj: AdjacencyIndex, query: Triple, N: int, width: int) -> list[Rollout]:
    """Top-``width`` walks by joint log-probability, best first.

    Ties are broken by (parent beam, action index) so the result is deterministic.
    """
    if width < 1:
        raise ContractError(f"beam width must be >= 1, got {width}")
    if N < 1:
        raise ContractError(f"episode length must be >= 1, got {N}")
    query = Triple(*map(int, query))
    with ad.no_grad():
        hc = policy.initial_state(1)
        prev = np.array([START_RELATION])
        cur = np.array([query.tail])
        scores = np.zeros(1)
        hist = np.zeros((1, 0, 2), dtype=np.int64)
        lps = np.zeros((1, 0))
        for _ in range(N):
            nb = len(cur)
            act_rel, act_ent, mask = _action_arrays(adj, cur.tolist(), [query] * nb, policy.config.max_actions)
            logp, hc = policy.step(hc, prev, cur, np.full(nb, query.relation), act_rel, act_ent, mask)
            cand = np.where(mask, scores[:, None] + logp.data, -np.inf)
            beam_idx, act_idx = np.nonzero(mask)
            flat = cand[beam_idx, act_idx]
            order = np.lexsort((act_idx, beam_idx, -flat))[:width]
            b, a = beam_idx[order], act_idx[order]
            scores = flat[order]
            hc = (ad.Tensor(hc[0].data[b]), ad.Tensor(hc[1].data[b]))
            prev, cur = act_rel[b, a], act_ent[b, a]
            hist = np.concatenate([hist[b], np.stack([prev, cur], axis=1)[:, None, :]], axis=1)
            lps = np.concatenate([lps[b], logp.data[b, a][:, None]], axis=1)
    return [Rollout(query, Chain(query, tuple(map(tuple, h.tolist())), ChainFormat.INTERENT), lp.tolist())
            for h, lp in zip(hist, lps)]


def new_policy(vocab: Vocabulary, seed: int = 0, **overrides) -> PolicyNetwork:
    return PolicyNetwork(PolicyConfig(vocab_size=len(vocab), vocab_hash=vocab.hash, **overrides), seed=seed)


def save_policy(path, policy: PolicyNetwork, extra: dict | None = None) -> None:
    header = {"kind": "policy", "config": asdict(policy.config)}
    header.update(extra or {})
    ad.save_checkpoint(path, policy.params.arrays(), header)


def load_policy(path, vocab: Vocabulary | None = None) -> PolicyNetwork:
    arrays, header = ad.load_checkpoint(path)
    if header.get("kind") != "policy":
        raise CompatibilityError(f"{path} is not a policy checkpoint")
    config = PolicyConfig(**header["config"])
    if vocab is not None and config.vocab_hash != vocab.hash:
        raise CompatibilityError("policy checkpoint vocabulary does not match the dataset vocabulary")
    policy = PolicyNetwork(config)
    policy.params.load_arrays(arrays)
    return policy
