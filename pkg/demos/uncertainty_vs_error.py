"""
Posterior spread as an error indicator
======================================

A two-parameter toy family (amplitude and frequency) is trained on a 3x3 grid
and evaluated on a 5x5 grid. For each test point the maximum relative error is
compared with the spread of 20 posterior samples; the two are rank
correlated.
"""

import numpy as np
from scipy.stats import spearmanr

from mlasdi import (StageConfig, generate_toy_family, max_relative_error,
                    predict, prediction_std_summary, train_multistage)

grid = lambda n: np.array([[a, w] for a in np.linspace(0.8, 1.2, n)
                           for w in np.linspace(0.8, 1.2, n)])
train = generate_toy_family(grid(3), nx=100, nt=101)
test = generate_toy_family(grid(5), nx=100, nt=101)

configs = [StageConfig((100, 40, 4), 1500, 2e-3, 0.1, 1e-3),
           StageConfig((100, 40, 4), 1500, 2e-3, 1.0, 1e-3)]
stack = train_multistage(train, configs, seed=0)

errors, stds = [], []
for i in range(test.n_params):
    pred = predict(stack, test.parameters[i], test.values[i, 0], n_samples=20, seed=i)
    errors.append(max_relative_error(test.values[i], pred.mean_trajectory))
    stds.append(prediction_std_summary(pred))

print("   A      w    error    std")
for (a, w), e, s in zip(test.parameters, errors, stds):
    print(f"{a:5.2f}  {w:5.2f}  {e:6.2%}  {s:.4f}")
print("Spearman rank correlation:", spearmanr(stds, errors)[0])
