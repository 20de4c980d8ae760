from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError
from .nn import ParameterStore


@dataclass
class OptimConfig:
    kind: str = "adam"  # "adam" | "sgd"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    clip_norm: float | None = None


def global_grad_norm(store: ParameterStore) -> float:
    return float(np.sqrt(sum(float((p.grad ** 2).sum()) for _, p in store if p.grad is not None)))


def optimizer_step(store: ParameterStore, lr: float, config: OptimConfig | None = None,
                   allow_missing: bool = False) -> None:
    """Apply one update to every parameter and clear the gradients.

    Adam uses bias-corrected moment estimates; ``weight_decay`` is decoupled
    (AdamW style).  Parameters without a gradient raise unless ``allow_missing``,
    in which case they are skipped.
    """
    config = config or OptimConfig()
    missing = [name for name, p in store if p.grad is None]
    if missing and (not allow_missing or len(missing) == len(store)):
        raise ContractError(f"no gradient for parameters: {', '.join(missing[:5])}")
    scale = 1.0
    if config.clip_norm is not None:
        norm = global_grad_norm(store)
        if norm > config.clip_norm:
            scale = config.clip_norm / norm
    store.step += 1
    t = store.step
    for name, p in store:
        if p.grad is None:
            continue
        g = p.grad * scale if scale != 1.0 else p.grad
        if config.kind == "sgd":
            p.data = p.data - lr * g
        elif config.kind == "adam":
            st = store.opt_state.setdefault(name, {"m": np.zeros_like(p.data), "v": np.zeros_like(p.data)})
            st["m"] = config.beta1 * st["m"] + (1 - config.beta1) * g
            st["v"] = config.beta2 * st["v"] + (1 - config.beta2) * g * g
            m_hat = st["m"] / (1 - config.beta1 ** t)
            v_hat = st["v"] / (1 - config.beta2 ** t)
            update = m_hat / (np.sqrt(v_hat) + config.eps)
            if config.weight_decay:
                update = update + config.weight_decay * p.data
            p.data = p.data - lr * update
        else:
            raise ContractError(f"unknown optimizer kind {config.kind!r}")
        p.grad = None
