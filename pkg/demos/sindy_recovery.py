"""
Identifying linear latent dynamics
==================================

A trajectory of ``zdot = b + A z`` is sampled on a uniform grid, its time
derivative is estimated with second-order finite differences and the
coefficients are recovered by least squares. Rolling the fitted model forward
with RK4 reproduces the trajectory.
"""

import numpy as np
from scipy.linalg import expm

from mlasdi.latent_dynamics import estimate_time_derivative, fit_sindy
from mlasdi.rom import rollout_latent

b = np.array([0.2, -0.1, 0.05])
A = np.array([[-0.3, 1.0, 0.0],
              [-1.0, -0.3, 0.0],
              [0.0, 0.0, -0.5]])
z0 = np.array([1.0, 0.0, 0.5])
t = np.linspace(0, 6, 121)
dt = t[1] - t[0]

# exact solution through the augmented matrix exponential
M = np.zeros((4, 4))
M[:3, :3], M[:3, 3] = A, b
Z = np.array([(expm(M * s) @ np.append(z0, 1.0))[:3] for s in t])

# exact derivatives recover the system to round-off
exact = fit_sindy(Z, b + Z @ A.T)
print("max |A - A_fit| (exact derivatives):", np.abs(exact.A - A).max())

# finite-difference derivatives are second-order accurate
Zdot = estimate_time_derivative(Z, dt)
model = fit_sindy(Z, Zdot)
print("max |A - A_fit| (finite differences):", np.abs(model.A - A).max())

# a small ridge shrinks the coefficients
ridged = fit_sindy(Z, Zdot, ridge=1.0)
print("coefficient norms, ridge 0 vs 1:", np.linalg.norm(model.coefficients),
      np.linalg.norm(ridged.coefficients))

Zr = rollout_latent(model, z0, t.size, dt)
print("max rollout error:", np.abs(Zr - Z).max())
