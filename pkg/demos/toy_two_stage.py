"""
Two-stage model of the multiscale toy problem
=============================================

Trains a first stage on the toy data and a second stage on its normalized
residual, then compares one- and two-stage errors on the training amplitudes
and on the held-out amplitude A = 1.2.

Usage: ``python toy_two_stage.py [iterations] [seed]`` (default 10000 and 0;
each stage takes about two minutes at 10000 iterations on one CPU core).
"""

import sys

import numpy as np

from mlasdi import (StageConfig, StageStack, generate_toy, max_relative_error,
                    predict, stage_residual, train_multistage)

iterations = int(sys.argv[1]) if len(sys.argv) > 1 else 10000
seed = int(sys.argv[2]) if len(sys.argv) > 2 else 0

train = generate_toy([1.0, 1.4])
test = generate_toy([1.2])
configs = [
    StageConfig((600, 100, 5), iterations, 1e-3, beta1=0.1, beta2=1e-3),
    StageConfig((600, 100, 5), iterations, 1e-3, beta1=1.0, beta2=1e-3),
]
stack = train_multistage(train, configs, seed)
for k, s in enumerate(stack.stages):
    print(f"stage {k + 1}: {s.wall_time:.1f}s, eps_prev={s.epsilon_prev:.4g}, "
          f"final loss {s.loss_history[-1][1]:.3e}")

for n in (1, 2):
    sub = StageStack(stack.stages[:n], stack.parameters, stack.t0, stack.dt, stack.n_times)
    residual, eps = stage_residual(train, sub)
    errors = []
    for data in (train, test):
        for i in range(data.n_params):
            pred = predict(sub, data.parameters[i], data.values[i, 0])
            errors.append(max_relative_error(data.values[i], pred.mean_trajectory))
    print(f"{n} stage(s): A=1.0 {errors[0]:.2%}  A=1.4 {errors[1]:.2%}  "
          f"A=1.2 {errors[2]:.2%}  |R|={np.linalg.norm(residual.values):.3f}")

pred = predict(stack, [1.2], test.values[0, 0], n_samples=50, seed=seed)
print("posterior std score at A=1.2:",
      np.max(np.linalg.norm(pred.std_field, axis=1) / np.linalg.norm(pred.mean_trajectory, axis=1)))
