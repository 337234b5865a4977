"""
Interpolating coefficients over parameter space
===============================================

One Gaussian process per coefficient maps a parameter point to a predictive
mean and standard deviation. The standard deviation vanishes at the training
points and grows away from them; posterior draws scatter accordingly.
"""

import numpy as np

from mlasdi.gp_interp import GpCoefficientField, sample_coefficients

mu_train = np.array([[0.8], [1.0], [1.3], [1.6]])
# coefficients of a one-dimensional latent model zdot = b + a z, laid out as [b | a]
coeffs = np.stack([np.sin(2 * mu_train), mu_train ** 2], axis=-1)

field = GpCoefficientField(mu_train, coeffs, kind="matern15")
for c, k in enumerate(field.kernels):
    print(f"coefficient {c}: A={k.amplitude:.3g} L={k.lengthscale:.3g} sigma2={k.noise:.2g}")

print("\n  mu    mean_b   std_b  truth_b")
for mu in np.linspace(0.6, 1.8, 7):
    mean, std = field.predict([mu])
    print(f"{mu:5.2f} {mean[0, 0]:8.4f} {std[0, 0]:7.4f} {np.sin(2 * mu):8.4f}")

# radial basis kernel on the same data
rbf = GpCoefficientField(mu_train, coeffs, kind="rbf")
print("\nrbf mean/std at 1.15:", rbf.predict([1.15]))

models = sample_coefficients(field, [1.15], 5, seed=0)
print("five posterior draws of b at mu=1.15:",
      np.round([m.b[0] for m in models], 4))
