"""
Autoencoder with a dynamics-identification penalty
==================================================

Backpropagated gradients of the full training loss (reconstruction, latent
dynamics mismatch and coefficient penalty) are checked against central finite
differences, then a small autoencoder is trained with Adam on a toy dataset.
"""

import numpy as np

from mlasdi.autoencoder import (AdamState, AutoencoderPair, adam_step,
                                loss_and_gradients, loss_value)
from mlasdi.data import center_scale_stats, generate_toy
from mlasdi.latent_dynamics import SindyContext

data = generate_toy([1.0, 1.4], nx=40, nt=41)
stats = center_scale_stats(data)
rng = np.random.default_rng(0)
net = AutoencoderPair.initialize((40, 16, 3), "tanh", rng, stats, stats)
ctx = SindyContext(beta1=0.1, beta2=1e-3, dt=data.dt)

# gradient check on a handful of weights
terms, grads, _ = loss_and_gradients(net, data.values, ctx)
W = net.encoder.weights[0]
h = 1e-6
for idx in [(0, 0), (5, 17), (15, 39)]:
    old = W[idx]
    W[idx] = old + h
    lp = loss_value(net, data.values, ctx)
    W[idx] = old - h
    lm = loss_value(net, data.values, ctx)
    W[idx] = old
    print(f"dL/dW{idx}: backprop {grads[0][idx]: .6e}  finite diff {(lp - lm) / (2 * h): .6e}")

# a short Adam run
params = net.parameters()
opt = AdamState.for_params(params, lr=2e-3)
for it in range(1501):
    terms, grads, coeffs = loss_and_gradients(net, data.values, ctx)
    if it % 300 == 0:
        print(f"iter {it:5d}  total {terms.total:.3e}  ae {terms.ae:.3e}  "
              f"di {terms.di:.3e}  |Xi|^2 {terms.ridge:.3e}")
    adam_step(params, grads, opt)
print("coefficient tensor shape:", coeffs.shape)
