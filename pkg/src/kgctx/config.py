"""Experiment configuration: one flat set of keys, read from ``key = value`` files.

Files are UTF-8, one assignment per line, ``#`` starts a comment.  Values from a
file override the defaults below and command-line flags override the file.
"""
from __future__ import annotations

import hashlib
import json
import typing
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .agent import ReinforceConfig
from .errors import ContractError, ParseError
from .predictor import PredictorConfig, PretrainConfig


class ConfigError(ContractError):
    """Unknown key or a value that cannot be coerced to the key's type."""


@dataclass
class ExperimentConfig:
    data: str = ""
    out: str = "runs/default"
    seed: int = 0

    # predictor
    variant: str = "coke"
    d: int = 64
    layers: int = 2
    heads: int = 4
    ffn_dim: int = 256
    dropout: float = 0.1
    max_seq_len: int = 16
    dtype: str = "float32"
    N: int = 2

    # pretraining
    epochs: int = 10
    batch_size: int = 128
    lr: float = 1e-3
    chains_per_triple: int = 1
    k_fixed: int = 3
    k_min: int = 1
    k_max: int = 5
    clip_norm: float = 5.0
    max_steps: int | None = None

    # policy and REINFORCE
    reward: str = "predictor"
    emb_dim: int = 32
    hidden: int = 64
    mlp_hidden: int = 64
    max_actions: int = 200
    rl_epochs: int = 10
    rl_batch_queries: int = 64
    rollouts: int = 20
    rl_lr: float = 1e-3
    baseline_decay: float = 0.95
    entropy_weight: float = 0.01
    entropy_decay: float = 0.99
    max_updates: int | None = None

    # evaluation
    strategy: str = "rl"
    beam_width: int = 40
    ks: tuple = (1, 3, 10)
    split: str = "test"
    limit: int | None = None

    # synthetic data
    entities: int = 200
    noise_relations: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.N < 1:
            raise ConfigError(f"N must be >= 1, got {self.N}")
        if self.strategy not in ("sampling", "minerva", "rl", "answer-search"):
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if self.reward not in ("answer", "predictor"):
            raise ConfigError(f"unknown reward {self.reward!r}")
        try:
            self.predictor_config(vocab_size=1)   # N vs max_seq_len, heads vs d
        except ConfigError:
            raise
        except ContractError as exc:
            raise ConfigError(str(exc)) from None

    def predictor_config(self, vocab_size: int, vocab_hash: str = "") -> PredictorConfig:
        return PredictorConfig(variant=self.variant, d=self.d, layers=self.layers, heads=self.heads,
                               ffn_dim=self.ffn_dim, max_seq_len=self.max_seq_len, dropout=self.dropout,
                               context_length=self.N, vocab_size=vocab_size, vocab_hash=vocab_hash,
                               dtype=self.dtype)

    def pretrain_config(self) -> PretrainConfig:
        return PretrainConfig(epochs=self.epochs, batch_size=self.batch_size, lr=self.lr,
                              chains_per_triple=self.chains_per_triple, k_fixed=self.k_fixed,
                              k_min=self.k_min, k_max=self.k_max, clip_norm=self.clip_norm,
                              max_steps=self.max_steps)

    def policy_overrides(self) -> dict:
        return {"emb_dim": self.emb_dim, "hidden": self.hidden, "mlp_hidden": self.mlp_hidden,
                "max_actions": self.max_actions, "dtype": self.dtype}

    def reinforce_config(self) -> ReinforceConfig:
        return ReinforceConfig(epochs=self.rl_epochs, batch_queries=self.rl_batch_queries,
                               rollouts_per_query=self.rollouts, lr=self.rl_lr,
                               baseline_decay=self.baseline_decay, entropy_weight=self.entropy_weight,
                               entropy_decay=self.entropy_decay, clip_norm=self.clip_norm,
                               max_updates=self.max_updates)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ks"] = list(self.ks)
        return d

    def hash(self) -> str:
        """Digest of every setting except file locations (the dataset is identified by content)."""
        d = self.to_dict()
        d.pop("out")
        d.pop("data")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    def replace(self, **changes) -> "ExperimentConfig":
        d = asdict(self)
        d.update(changes)
        return ExperimentConfig(**d)


_HINTS = typing.get_type_hints(ExperimentConfig)
KEYS = tuple(f.name for f in fields(ExperimentConfig))


def coerce(key: str, value):
    """Convert a raw string (or already typed value) to the type of ``key``."""
    if key not in _HINTS:
        raise ConfigError(f"unknown config key {key!r}")
    if not isinstance(value, str):
        return tuple(value) if key == "ks" else value
    hint = _HINTS[key]
    text = value.strip()
    args = typing.get_args(hint)
    if type(None) in args:
        if text.lower() in ("none", "null", ""):
            return None
        hint = next(a for a in args if a is not type(None))
    try:
        if key == "ks":
            return tuple(int(k) for k in text.replace(",", " ").split())
        if hint is bool:
            if text.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return text.lower() in ("true", "1", "yes")
        if hint in (int, float, str):
            return hint(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot read {value!r} as {hint.__name__}") from None
    raise ConfigError(f"{key}: unsupported type {hint}")


def parse_config_text(text: str, source: str = "<config>") -> dict:
    values = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(source, line_no, "expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            values[key] = coerce(key, value)
        except ConfigError as exc:
            raise ParseError(source, line_no, str(exc)) from None
    return values


def load_config(path=None, **overrides) -> ExperimentConfig:
    """Defaults, then the file at ``path`` (if any), then non-None ``overrides``."""
    values = {}
    if path is not None:
        path = Path(path)
        values.update(parse_config_text(path.read_text(encoding="utf-8"), str(path)))
    for key, value in overrides.items():
        if value is not None:
            values[key] = coerce(key, value)
    return ExperimentConfig(**values)
