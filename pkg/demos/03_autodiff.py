"""
The numpy autodiff engine
=========================

Models are built from ``Tensor`` operations that record a graph; ``backward``
fills in ``.grad`` on every leaf.  Gradients can be verified against central
differences.
"""
import numpy as np

from kgctx import autodiff as ad
from kgctx.autodiff import ops

rng = np.random.default_rng(0)
x = ad.Tensor(rng.standard_normal((4, 3)), requires_grad=True)
W = ad.Tensor(rng.standard_normal((3, 5)), requires_grad=True)
b = ad.Tensor(np.zeros(5), requires_grad=True)

loss = ad.cross_entropy(ad.affine(x, W, b), [0, 4, 2, 2])
loss.backward()
print("loss", float(loss.data))
print("dL/db", np.round(b.grad, 4))

# compare every parameter gradient with finite differences
errors = ad.check_gradients(lambda: ad.cross_entropy(ad.affine(x, W, b), [0, 4, 2, 2]), {"x": x, "W": W, "b": b})
print({k: f"{v:.1e}" for k, v in errors.items()})

# a few Adam steps on a least-squares problem
store = ad.ParameterStore("float64")
w = store.add("w", np.zeros(3))
target = np.array([1.0, -2.0, 0.5])
for step in range(300):
    store.zero_grad()
    err = ops.tsum(ops.power(w - target, 2.0))
    err.backward()
    ad.optimizer_step(store, 0.05)
print("fitted", np.round(w.data, 3))
