"""Minimal reverse-mode autodiff on numpy arrays."""
from . import tensor as ops
from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import check_gradients, numerical_gradient, relative_error
from .nn import (
    ParameterStore,
    affine,
    categorical_sample,
    categorical_sample_rows,
    cross_entropy,
    embed,
    ffn,
    layer_norm,
    lstm_cell,
    lstm_params,
    multi_head_attention,
    softmax,
    truncated_normal,
)
from .optim import OptimConfig, global_grad_norm, optimizer_step
from .tensor import Tensor, as_tensor, grad_enabled, no_grad

__all__ = [
    "ops", "Tensor", "as_tensor", "no_grad", "grad_enabled",
    "ParameterStore", "truncated_normal", "embed", "affine", "layer_norm", "softmax",
    "cross_entropy", "ffn", "multi_head_attention", "lstm_cell", "lstm_params",
    "categorical_sample", "categorical_sample_rows",
    "OptimConfig", "optimizer_step", "global_grad_norm",
    "save_checkpoint", "load_checkpoint",
    "check_gradients", "numerical_gradient", "relative_error",
]
