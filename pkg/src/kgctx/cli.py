"""Command-line entry point: ``kgctx <command> [options]``.

Every command accepts ``--seed``, ``--config`` (a ``key = value`` file) and
``--out`` (an output directory).  Flags override the config file, which
overrides the built-in defaults.  Results are written as JSON so that two runs
with the same seed produce byte-identical files.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .agent import load_policy, new_policy, save_policy, train_reinforce
from .config import KEYS, ConfigError, ExperimentConfig, load_config
from .errors import ContractError, KGError
from .evaluation import (
    MinervaStrategy,
    RLStrategy,
    SamplingStrategy,
    evaluate_minerva,
    evaluate_predictor,
)
from .kg import AdjacencyIndex, augment_inverse, load_dataset
from .paths import ChainFormat, dump_chains, fixed_k, sample_pretraining_set, uniform_mix
from .predictor import PredictorModel, load_predictor, pretrain, save_predictor
from .synth import generate_synthetic_kg

log = logging.getLogger("kgctx")

# independent random streams per stage, derived from the one user seed
STREAM_PRETRAIN, STREAM_RL, STREAM_SAMPLE, STREAM_SYNTH = 1, 2, 3, 4


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def dataset_digest(directory) -> str:
    """Digest of the split files, so a moved dataset keeps its identity."""
    h = hashlib.sha256()
    for name in ("train", "valid", "test"):
        path = Path(directory) / f"{name}.txt"
        h.update(f"{name}:{file_digest(path) if path.exists() else '-'}\n".encode())
    return h.hexdigest()


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_jsonl(path, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def _load(cfg: ExperimentConfig):
    if not cfg.data:
        raise ConfigError("no dataset directory given (use --data or data = ... in the config)")
    store = augment_inverse(load_dataset(cfg.data))
    return store, AdjacencyIndex.from_store(store)


def _out(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require(value, flag: str, command: str):
    if value is None:
        raise ConfigError(f"{command} needs {flag}")
    return value


# commands

def cmd_prepare(cfg: ExperimentConfig, args) -> dict:
    raw = load_dataset(_require(cfg.data or None, "--data", "prepare"))
    store = augment_inverse(raw)
    adj = AdjacencyIndex.from_store(store)
    out = _out(cfg)
    store.vocab.save_manifest(out / "vocab.tsv")
    return {"entities": store.vocab.entity_count, "relations": store.vocab.relation_count,
            "vocab_size": len(store.vocab), "vocab_hash": store.vocab.hash,
            "triples": {name: len(raw[name]) for name in raw.splits},
            "augmented_triples": {name: len(store[name]) for name in store.splits},
            "adjacency_edges": len(adj)}


def cmd_synth(cfg: ExperimentConfig, args) -> dict:
    rng = np.random.default_rng([cfg.seed, STREAM_SYNTH])
    kg = generate_synthetic_kg(cfg.entities, rng=rng, noise_relations=cfg.noise_relations)
    kg.write(_out(cfg))
    return {"entities": cfg.entities, "train": len(kg.train), "valid": len(kg.valid), "test": len(kg.test),
            "rule": [kg.rule.first, kg.rule.second, kg.rule.target]}


def cmd_sample_paths(cfg: ExperimentConfig, args) -> dict:
    store, adj = _load(cfg)
    fmt = ChainFormat(args.format)
    if args.K is not None:
        k_policy = fixed_k(args.K)
    elif fmt is ChainFormat.RELONLY:
        k_policy = uniform_mix(cfg.k_min, cfg.k_max)
    else:
        k_policy = fixed_k(cfg.k_fixed)
    rng = np.random.default_rng([cfg.seed, STREAM_SAMPLE])
    chains = sample_pretraining_set(adj, store[cfg.split], fmt, cfg.chains_per_triple, k_policy, rng)
    out = _out(cfg)
    dump_chains(chains, out / "chains.txt")
    return {"chains": len(chains), "format": fmt.value, "split": cfg.split,
            "chains_sha256": file_digest(out / "chains.txt")}


def cmd_pretrain(cfg: ExperimentConfig, args) -> dict:
    store, adj = _load(cfg)
    if args.init:
        model = load_predictor(args.init, store.vocab)
    else:
        model = PredictorModel(cfg.predictor_config(len(store.vocab), store.vocab.hash), seed=cfg.seed)
    out = _out(cfg)
    rng = np.random.default_rng([cfg.seed, STREAM_PRETRAIN])
    curve = pretrain(model, store, cfg.pretrain_config(), rng, adj)
    ckpt = out / "predictor.ckpt"
    save_predictor(ckpt, model)
    write_jsonl(out / "pretrain_curve.jsonl", [{"step": step, "loss": loss} for step, loss in curve])
    return {"steps": len(curve), "final_loss": curve[-1][1] if curve else None,
            "vocab_hash": store.vocab.hash, "checkpoint_sha256": file_digest(ckpt)}


def cmd_train_rl(cfg: ExperimentConfig, args) -> dict:
    store, adj = _load(cfg)
    predictor, before = None, None
    if cfg.reward == "predictor":
        path = _require(args.predictor, "--predictor", "train-rl --reward predictor")
        before = file_digest(path)
        predictor = load_predictor(path, store.vocab)
    policy = new_policy(store.vocab, seed=cfg.seed, **cfg.policy_overrides())
    out = _out(cfg)
    rng = np.random.default_rng([cfg.seed, STREAM_RL])
    curve = train_reinforce(policy, adj, store["train"], cfg.N, cfg.reward, cfg.reinforce_config(), rng,
                            predictor=predictor)
    ckpt = out / "policy.ckpt"
    save_policy(ckpt, policy, {"reward": cfg.reward, "N": cfg.N})
    write_jsonl(out / "rl_curve.jsonl", curve)
    summary = {"reward": cfg.reward, "N": cfg.N, "epochs": len(curve),
               "updates": curve[-1]["updates"] if curve else 0,
               "final_mean_reward": curve[-1]["mean_reward"] if curve else None,
               "checkpoint_sha256": file_digest(ckpt)}
    if predictor is not None:
        summary["predictor_sha256"] = before
        if file_digest(args.predictor) != before:
            raise ContractError("predictor checkpoint changed during policy training")
    return summary


def cmd_evaluate(cfg: ExperimentConfig, args) -> dict:
    store, adj = _load(cfg)
    queries = store[cfg.split]
    if cfg.limit is not None:
        queries = queries[:cfg.limit]
    strategy = cfg.strategy
    if strategy in ("rl", "minerva", "answer-search"):
        policy = load_policy(_require(args.policy, "--policy", f"evaluate --strategy {strategy}"), store.vocab)
    if strategy == "answer-search":
        report = evaluate_minerva(policy, adj, store, cfg.N, cfg.beam_width, cfg.split, cfg.ks, queries)
    else:
        model = load_predictor(_require(args.predictor, "--predictor", "evaluate"), store.vocab)
        if strategy == "sampling":
            ctx = SamplingStrategy(adj, cfg.N, seed=cfg.seed)
        elif strategy == "rl":
            ctx = RLStrategy(policy, adj, cfg.N)
        else:
            ctx = MinervaStrategy(policy, adj, cfg.N, cfg.beam_width)
        report = evaluate_predictor(model, ctx, store, cfg.split, cfg.ks, queries)
    out = _out(cfg)
    write_jsonl(out / "records.jsonl", [r.to_json() for r in report.records])
    summary = report.summary()
    summary.update({"N": cfg.N, "split": cfg.split})
    return summary


COMMANDS = {
    "prepare": cmd_prepare,
    "synth": cmd_synth,
    "sample-paths": cmd_sample_paths,
    "pretrain": cmd_pretrain,
    "train-rl": cmd_train_rl,
    "evaluate": cmd_evaluate,
}


def _ks(text: str):
    try:
        return tuple(int(k) for k in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="master random seed")
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--out", help="output directory")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any configuration key (repeatable)")
    common.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    parser = argparse.ArgumentParser(prog="kgctx", description="Contextualized link prediction on knowledge graphs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def data(p):
        p.add_argument("--data", help="directory with train.txt, valid.txt, test.txt")

    p = sub.add_parser("prepare", parents=[common], help="load and augment a dataset, write the vocabulary")
    data(p)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic two-hop knowledge graph")
    p.add_argument("--entities", type=int)
    p.add_argument("--noise-relations", dest="noise_relations", type=int)

    p = sub.add_parser("sample-paths", parents=[common], help="dump random-walk chains as token ids")
    data(p)
    p.add_argument("--format", choices=[f.value for f in ChainFormat], default="interent")
    p.add_argument("--K", type=int, help="steps per chain (default: the pretraining length policy)")
    p.add_argument("--count", dest="chains_per_triple", type=int, help="chains per triple")
    p.add_argument("--split")

    p = sub.add_parser("pretrain", parents=[common], help="pretrain the masked-entity predictor")
    data(p)
    p.add_argument("--variant", choices=["coke", "interent"])
    p.add_argument("--N", type=int, help="context length the model must accept")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--max-steps", dest="max_steps", type=int)
    p.add_argument("--init", help="continue from this predictor checkpoint")

    p = sub.add_parser("train-rl", parents=[common], help="train a path policy with REINFORCE")
    data(p)
    p.add_argument("--reward", choices=["answer", "predictor"])
    p.add_argument("--predictor", help="frozen predictor checkpoint (predictor reward)")
    p.add_argument("--N", type=int, help="walk length")
    p.add_argument("--epochs", dest="rl_epochs", type=int)
    p.add_argument("--lr", dest="rl_lr", type=float)
    p.add_argument("--max-updates", dest="max_updates", type=int)

    p = sub.add_parser("evaluate", parents=[common], help="filtered ranking evaluation")
    data(p)
    p.add_argument("--strategy", choices=["sampling", "minerva", "rl", "answer-search"])
    p.add_argument("--predictor", help="predictor checkpoint")
    p.add_argument("--policy", help="policy checkpoint (rl, minerva, answer-search)")
    p.add_argument("--N", type=int)
    p.add_argument("--beam-width", dest="beam_width", type=int)
    p.add_argument("--k", dest="ks", type=_ks, help="cut-offs for Hits@k, e.g. 1,3,10")
    p.add_argument("--split", choices=["train", "valid", "test"])
    p.add_argument("--limit", type=int, help="evaluate only the first LIMIT queries")
    return parser


def resolve_config(args) -> ExperimentConfig:
    overrides = {k: getattr(args, k) for k in KEYS if hasattr(args, k)}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        if overrides.get(key.strip()) is None:
            overrides[key.strip()] = value
    return load_config(args.config, **overrides)


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = resolve_config(args)
        summary = COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        parser.print_usage(sys.stderr)
        print(f"kgctx {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (KGError, OSError) as exc:
        print(f"kgctx {args.command}: error: {exc}", file=sys.stderr)
        return 1
    summary = {"command": args.command, "seed": cfg.seed, "config_hash": cfg.hash(), **summary}
    if cfg.data and args.command != "synth":
        summary["dataset_sha256"] = dataset_digest(cfg.data)
    write_json(Path(cfg.out) / "summary.json", summary)
    print(json.dumps(summary, sort_keys=True))
    return 0


def main() -> None:
    sys.exit(run_cli())
