"""Central-difference gradient checking."""
from __future__ import annotations

import numpy as np

from .tensor import Tensor


def numerical_gradient(loss_fn, param: Tensor, eps=1e-5) -> np.ndarray:
    """Central differences of the scalar ``loss_fn()`` w.r.t. every entry of ``param``."""
    grad = np.zeros_like(param.data)
    flat = param.data.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        up = float(loss_fn().data)
        flat[i] = old - eps
        down = float(loss_fn().data)
        flat[i] = old
        gflat[i] = (up - down) / (2 * eps)
    return grad


def relative_error(analytic, numeric, zero_tol=1e-7) -> float:
    """``||a - n|| / max(||a||, ||n||)``.

    When both norms are below ``zero_tol`` the gradient is zero up to round-off
    (e.g. a key bias under softmax, which cancels exactly) and the ratio of two
    noise terms carries no information, so 0.0 is returned.
    """
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = max(np.linalg.norm(a), np.linalg.norm(n))
    if denom < zero_tol:
        return 0.0
    return float(np.linalg.norm(a - n) / denom)


def check_gradients(loss_fn, params, eps=1e-5) -> dict[str, float]:
    """Relative error between backprop and central differences for each parameter.

    ``params`` maps names to leaf tensors; ``loss_fn`` must rebuild the graph on every call.
    """
    items = params.items() if hasattr(params, "items") else enumerate(params)
    items = list(items)
    for _, p in items:
        p.grad = None
    loss_fn().backward()
    analytic = {name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data)) for name, p in items}
    return {name: relative_error(analytic[name], numerical_gradient(loss_fn, p, eps)) for name, p in items}
