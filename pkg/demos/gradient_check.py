# Finite-difference audit of the reverse-mode engine, up to a full network.

import time

import numpy as np

from difflogic import autodiff as ad
from difflogic.verify import gradcheck, machine_gradcheck

# a scalar chain first: d/dw sigmoid(w) at w=0 is exactly 1/4
w = ad.leaf(np.array(0.0))
loss = ad.sum_all(ad.sigmoid(w))
ad.backward(loss)
print("d sigmoid/dw at 0:", float(w.adjoint), "(expected 0.25)")

# a composite loss against central differences
rng = np.random.default_rng(0)
x0 = rng.normal(size=(4, 3))
probe = rng.uniform(0.5, 1.5, (4, 6))


def build(params):
    y = ad.concat_last([ad.sigmoid(params["x"]), ad.exp(ad.scale(params["x"], 0.3))])
    return ad.sum_all(ad.mul(y, probe))


err = gradcheck(build, {"x": x0})
print(f"composite expression: max rel err vs finite differences {err:.2e}")

# every parameter of a 3-layer breadth-3 residual network, m=4
t0 = time.time()
err = machine_gradcheck()
print(f"full network (depth 3, breadth 3, residual): max rel err {err:.2e} "
      f"in {time.time() - t0:.1f}s")
assert err <= 1e-4
