"""Linear SINDy in the latent space.

The library is ``Theta(Z) = [1, Z]`` and the coefficients of one trajectory
are stored as a ``(N_z, N_z + 1)`` matrix ``C = [b | A]`` so that
``zdot = b + A z`` and ``Zdot ~= Theta(Z) @ C.T``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, TooFewTimesteps
from .linalg import solve_ridge_least_squares


@dataclass(frozen=True, eq=False)
class SindyModel:
    """Coefficients of ``zdot = b + A z`` for one parameter point."""

    b: np.ndarray
    A: np.ndarray
    parameter: np.ndarray = None

    def __post_init__(self):
        b = np.asarray(self.b, dtype=np.float64).reshape(-1)
        A = np.asarray(self.A, dtype=np.float64)
        if A.shape != (b.size, b.size):
            raise DimensionMismatch(f"A must be {b.size}x{b.size}, got {A.shape}")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "A", A)

    @classmethod
    def from_coefficients(cls, coefficients, parameter=None):
        c = np.asarray(coefficients, dtype=np.float64)
        return cls(c[:, 0], c[:, 1:], parameter)

    @property
    def latent_dim(self):
        return self.b.size

    @property
    def coefficients(self):
        return np.column_stack([self.b, self.A])

    def rhs(self, z):
        return self.b + z @ self.A.T


@dataclass(frozen=True)
class SindyContext:
    """Weights of the dynamics terms of the training loss.

    ``beta1`` multiplies the dynamics-identification loss and ``beta2`` the
    coefficient penalty; ``segments`` (optional) gives the number of time rows
    per parameter when a flat batch is used.
    """

    beta1: float
    beta2: float
    dt: float
    segments: tuple = field(default=None)

    def __post_init__(self):
        if self.beta1 < 0 or self.beta2 < 0:
            raise ValueError("beta1 and beta2 must be nonnegative")
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    def ridge(self, n_times, latent_dim):
        """Ridge weight making the per-trajectory fit minimize the loss terms.

        With every term a mean over its entries, the part of the loss that
        depends on ``C`` is ``beta1/(N_mu T N_z) ||Zdot - Theta C^T||^2 +
        beta2/(N_mu N_z (N_z+1)) ||C||^2``; dividing through gives this ratio.
        ``None`` means the dynamics term is switched off and ``C = 0`` is used.
        """
        if self.beta1 == 0:
            return None
        return self.beta2 * n_times / (self.beta1 * (latent_dim + 1))


def library(Z):
    Z = np.asarray(Z, dtype=np.float64)
    return np.concatenate([np.ones(Z.shape[:-1] + (1,)), Z], axis=-1)


def estimate_time_derivative(Z, dt):
    """Second-order finite differences along axis ``-2``.

    Central differences in the interior and one-sided three-point stencils at
    both ends, so quadratics are differentiated exactly.
    """
    Z = np.asarray(Z, dtype=np.float64)
    n = Z.shape[-2]
    if n < 3:
        raise TooFewTimesteps(f"need at least 3 time steps, got {n}")
    out = np.empty_like(Z)
    h2 = 2.0 * dt
    out[..., 1:-1, :] = (Z[..., 2:, :] - Z[..., :-2, :]) / h2
    out[..., 0, :] = (-3.0 * Z[..., 0, :] + 4.0 * Z[..., 1, :] - Z[..., 2, :]) / h2
    out[..., -1, :] = (3.0 * Z[..., -1, :] - 4.0 * Z[..., -2, :] + Z[..., -3, :]) / h2
    return out


def time_derivative_adjoint(G, dt):
    """Transpose of :func:`estimate_time_derivative` applied to ``G``."""
    G = np.asarray(G, dtype=np.float64)
    n = G.shape[-2]
    if n < 3:
        raise TooFewTimesteps(f"need at least 3 time steps, got {n}")
    h2 = 2.0 * dt
    out = np.zeros_like(G)
    gi = G[..., 1:-1, :] / h2
    out[..., 2:, :] += gi
    out[..., :-2, :] -= gi
    g0 = G[..., 0, :] / h2
    out[..., 0, :] -= 3.0 * g0
    out[..., 1, :] += 4.0 * g0
    out[..., 2, :] -= g0
    gn = G[..., -1, :] / h2
    out[..., -1, :] += 3.0 * gn
    out[..., -2, :] -= 4.0 * gn
    out[..., -3, :] += gn
    return out


def fit_sindy(Z, Zdot, ridge=0.0, parameter=None):
    """Dense ridge least-squares fit of ``Zdot ~= b + Z A^T``."""
    Z = np.asarray(Z, dtype=np.float64)
    Zdot = np.asarray(Zdot, dtype=np.float64)
    if Z.shape != Zdot.shape or Z.ndim != 2:
        raise DimensionMismatch(f"Z {Z.shape} and Zdot {Zdot.shape} must match")
    Xi = solve_ridge_least_squares(library(Z), Zdot, ridge)
    return SindyModel.from_coefficients(Xi.T, parameter)


def di_loss(Z, Zdot, model):
    """Mean squared mismatch between ``Zdot`` and the SINDy prediction."""
    Z = np.asarray(Z, dtype=np.float64)
    Zdot = np.asarray(Zdot, dtype=np.float64)
    if Z.shape != Zdot.shape or Z.shape[-1] != model.latent_dim:
        raise DimensionMismatch("Z, Zdot and model dimensions disagree")
    r = Zdot - library(Z) @ model.coefficients.T
    return float(np.mean(r**2))


def fit_batch(Z, ctx):
    """Per-trajectory coefficients ``(N_mu, N_z, N_z+1)`` for latents ``(N_mu, T, N_z)``."""
    n_mu, n_t, n_z = Z.shape
    ridge = ctx.ridge(n_t, n_z)
    if ridge is None:
        return np.zeros((n_mu, n_z, n_z + 1))
    Zdot = estimate_time_derivative(Z, ctx.dt)
    return np.stack(
        [solve_ridge_least_squares(library(Z[i]), Zdot[i], ridge).T for i in range(n_mu)]
    )


def dynamics_loss_and_grad(Z, ctx):
    """Dynamics terms of the training loss and their gradient w.r.t. ``Z``.

    Returns ``(l_di, l_ridge, coefficients, dZ)`` where ``dZ`` is the gradient
    of ``beta1 * l_di + beta2 * l_ridge`` with the coefficients held at their
    ridge optimum. Because the coefficients minimize exactly these two terms,
    this is also the total derivative through the coefficient solve.
    """
    Z = np.asarray(Z, dtype=np.float64)
    C = fit_batch(Z, ctx)
    Zdot = estimate_time_derivative(Z, ctx.dt)
    pred = library(Z) @ np.swapaxes(C, 1, 2)
    r = Zdot - pred
    l_di = float(np.mean(r**2))
    l_ridge = float(np.mean(C**2))
    if ctx.beta1 == 0:
        return l_di, l_ridge, C, np.zeros_like(Z)
    g = (2.0 * ctx.beta1 / r.size) * r
    # d/dZ of r = D Z - 1 b^T - Z A^T
    dZ = time_derivative_adjoint(g, ctx.dt) - g @ C[:, :, 1:]
    return l_di, l_ridge, C, dZ
