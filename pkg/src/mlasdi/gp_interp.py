"""Independent Gaussian processes over parameter space, one per SINDy coefficient.

Each GP has a zero prior mean and a stationary kernel (RBF or Matern 3/2).
Hyperparameters are chosen by maximizing the log marginal likelihood with a
log-spaced grid search followed by coordinate-wise golden-section refinement.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NotPositiveDefinite
from .latent_dynamics import SindyModel
from .linalg import cho_solve_factor, cholesky_lower

KERNELS = ("rbf", "matern15")

GRID_SIZE = 16
AMPLITUDE_RANGE = (1e-3, 1e3)  # times var(y)
LENGTHSCALE_RANGE = (1e-2, 1e2)  # times the median inter-point distance
REFINE_ROUNDS = 20
GOLDEN_ITERS = 24
NOISE_FRACTION = 1e-8  # default noise variance, times var(y)
_SQRT3 = math.sqrt(3.0)
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class Kernel:
    kind: str
    amplitude: float
    lengthscale: float
    noise: float = 0.0

    def __post_init__(self):
        if self.kind not in KERNELS:
            raise ValueError(f"kernel kind must be one of {KERNELS}")
        if not (self.amplitude > 0 and self.lengthscale > 0 and self.noise >= 0):
            raise ValueError("need amplitude > 0, lengthscale > 0, noise >= 0")

    def from_distance(self, d):
        r = np.asarray(d, dtype=np.float64) / self.lengthscale
        if self.kind == "rbf":
            return self.amplitude * np.exp(-0.5 * r**2)
        s = _SQRT3 * r
        return self.amplitude * (1.0 + s) * np.exp(-s)

    def matrix(self, X1, X2):
        X1 = np.atleast_2d(np.asarray(X1, dtype=np.float64))
        X2 = np.atleast_2d(np.asarray(X2, dtype=np.float64))
        if X1.shape[1] != X2.shape[1]:
            raise DimensionMismatch("parameter dimensions differ")
        d = np.sqrt(np.maximum(((X1[:, None, :] - X2[None, :, :]) ** 2).sum(-1), 0.0))
        return self.from_distance(d)


def kernel_eval(kernel, x, y):
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if x.shape != y.shape:
        raise DimensionMismatch(f"points have shapes {x.shape} and {y.shape}")
    return float(kernel.from_distance(np.linalg.norm(x - y)))


def _pairwise_distances(X):
    d = np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(-1))
    return d, d[np.triu_indices(X.shape[0], 1)]


def log_marginal_likelihood(D, y, kind, amplitude, lengthscale, noise):
    """Log evidence of ``y`` given the distance matrix ``D`` and hyperparameters."""
    K = Kernel(kind, amplitude, lengthscale, noise).from_distance(D)
    K.flat[:: K.shape[0] + 1] += noise
    try:
        L = np.linalg.cholesky(K)
    except np.linalg.LinAlgError:
        try:
            L = cholesky_lower(K)
        except NotPositiveDefinite:
            return -np.inf
    w = np.linalg.solve(L, y)
    n = y.size
    return float(
        -0.5 * (w @ w) - np.log(np.diag(L)).sum() - 0.5 * n * math.log(2 * math.pi)
    )


def _golden_max(f, lo, hi, iters=GOLDEN_ITERS):
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


@dataclass(frozen=True)
class HyperparameterFit:
    kernel: Kernel
    degenerate: bool
    log_likelihood: float


def fit_hyperparameters(X, y, kind="matern15", noise=None):
    """Maximize the log marginal likelihood over amplitude and lengthscale.

    ``X`` is used as given (callers standardize it). The noise variance is
    ``1e-8 * var(y)`` unless ``noise`` is passed. Constant targets return a
    flagged, non-fatal :class:`HyperparameterFit` with ``degenerate=True``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if X.shape[0] != y.size:
        raise DimensionMismatch("X and y must have the same number of rows")
    if y.size < 2:
        raise ValueError("need at least two training points")
    if not np.all(np.isfinite(y)):
        raise ValueError("targets must be finite")
    D, dists = _pairwise_distances(X)
    positive = dists[dists > 0]
    span = float(dists.max()) if dists.size and dists.max() > 0 else 1.0
    var = float(np.var(y))
    if var <= (1e-12 * max(1.0, float(np.max(np.abs(y))))) ** 2:
        floor = 1e-12 * max(1.0, float(np.max(y**2)))
        nz = floor * NOISE_FRACTION if noise is None else noise
        return HyperparameterFit(Kernel(kind, floor, span, nz), True, float("nan"))
    nz = var * NOISE_FRACTION if noise is None else float(noise)
    med = float(np.median(positive)) if positive.size else 1.0

    a_lo, a_hi = (math.log(var * s) for s in AMPLITUDE_RANGE)
    l_lo, l_hi = (math.log(med * s) for s in LENGTHSCALE_RANGE)
    a_grid = np.linspace(a_lo, a_hi, GRID_SIZE)
    l_grid = np.linspace(l_lo, l_hi, GRID_SIZE)

    def lml(log_a, log_l):
        return log_marginal_likelihood(D, y, kind, math.exp(log_a), math.exp(log_l), nz)

    best = (-np.inf, a_grid[0], l_grid[0])
    for la in a_grid:
        for ll in l_grid:
            v = lml(la, ll)
            if v > best[0]:
                best = (v, la, ll)
    value, la, ll = best
    a_step = a_grid[1] - a_grid[0]
    l_step = l_grid[1] - l_grid[0]
    for _ in range(REFINE_ROUNDS):
        la_new, va = _golden_max(
            lambda t: lml(t, ll), max(a_lo, la - a_step), min(a_hi, la + a_step)
        )
        if va > value:
            la, value = la_new, va
        ll_new, vl = _golden_max(
            lambda t: lml(la, t), max(l_lo, ll - l_step), min(l_hi, ll + l_step)
        )
        if vl > value:
            ll, value = ll_new, vl
    return HyperparameterFit(Kernel(kind, math.exp(la), math.exp(ll), nz), False, value)


class GpCoefficientField:
    """Fitted GPs for every entry of a coefficient tensor.

    Parameters
    ----------
    parameters : array (N_mu, N)
        Training parameter points.
    coefficients : array (N_mu, ...)
        Coefficient values per training point; the trailing shape (for SINDy
        ``(N_z, N_z + 1)``) is kept for predictions.
    kind : {"rbf", "matern15"}
    noise : float, optional
        Observation noise variance for every GP (default ``1e-8 var(y)``).

    Parameters are standardized per dimension before kernel evaluation.
    """

    def __init__(self, parameters, coefficients, kind="matern15", noise=None,
                 kernels=None, degenerate=None):
        X = np.atleast_2d(np.asarray(parameters, dtype=np.float64))
        if X.shape[0] == 1 and np.ndim(parameters) == 1:
            X = X.T
        Y = np.asarray(coefficients, dtype=np.float64)
        if Y.shape[0] != X.shape[0]:
            raise DimensionMismatch("one coefficient set per parameter point required")
        self.parameters = X
        self.coefficients = Y
        self.coef_shape = Y.shape[1:]
        self.kind = kind
        self.x_mean = X.mean(axis=0)
        std = X.std(axis=0)
        self.x_scale = np.where(std > 0, std, 1.0)
        self._Xs = self.standardize(X)
        Yf = Y.reshape(Y.shape[0], -1)
        degenerate_flags = (np.zeros(Yf.shape[1], dtype=bool) if degenerate is None
                            else np.asarray(degenerate, dtype=bool).reshape(-1))
        self.kernels = []
        self.degenerate = np.zeros(Yf.shape[1], dtype=bool)
        self._offset = np.zeros(Yf.shape[1])
        self._chol = []
        self._alpha = []
        for c in range(Yf.shape[1]):
            if kernels is None and X.shape[0] == 1:
                # a single training point carries no spatial information
                kern = Kernel(kind, 1.0, 1.0, 0.0 if noise is None else noise)
                degenerate = True
            elif kernels is None:
                fit = fit_hyperparameters(self._Xs, Yf[:, c], kind, noise)
                kern, degenerate = fit.kernel, fit.degenerate
            else:
                # restoring a saved field: reuse the stored hyperparameters
                kern = kernels[c]
                degenerate = bool(degenerate_flags[c])
            self.kernels.append(kern)
            self.degenerate[c] = degenerate
            y = Yf[:, c]
            if degenerate:
                self._offset[c] = y[0]
                y = y - y[0]
            K = kern.matrix(self._Xs, self._Xs)
            K[np.diag_indices_from(K)] += kern.noise
            L = cholesky_lower(K)
            self._chol.append(L)
            self._alpha.append(cho_solve_factor(L, y[:, None])[:, 0])

    @property
    def n_coefficients(self):
        return len(self.kernels)

    def standardize(self, mu):
        return (np.atleast_2d(np.asarray(mu, dtype=np.float64)) - self.x_mean) / self.x_scale

    def _flat_index(self, coeff):
        if isinstance(coeff, (int, np.integer)):
            return int(coeff)
        return int(np.ravel_multi_index(tuple(coeff), self.coef_shape))

    def predict_one(self, coeff, mu_star):
        """Predictive mean and standard deviation of a single coefficient."""
        c = self._flat_index(coeff)
        mu = np.atleast_2d(np.asarray(mu_star, dtype=np.float64))
        if mu.shape[1] != self._Xs.shape[1]:
            raise DimensionMismatch("mu_star has the wrong dimension")
        if self.degenerate[c]:
            # constant training targets: the coefficient is known exactly
            return float(self._offset[c]), 0.0
        xs = self.standardize(mu)
        kern = self.kernels[c]
        kstar = kern.matrix(self._Xs, xs)[:, 0]
        mean = kstar @ self._alpha[c] + self._offset[c]
        v = cho_solve_factor(self._chol[c], kstar[:, None])[:, 0]
        var = kern.amplitude - kstar @ v
        return float(mean), float(math.sqrt(max(var, 0.0)))

    def predict(self, mu_star):
        """Means and standard deviations of every coefficient at ``mu_star``."""
        out = np.array([self.predict_one(c, mu_star) for c in range(self.n_coefficients)])
        return out[:, 0].reshape(self.coef_shape), out[:, 1].reshape(self.coef_shape)

    def mean_model(self, mu_star):
        mean, _ = self.predict(mu_star)
        return SindyModel.from_coefficients(mean, np.atleast_1d(mu_star))

    def sample(self, mu_star, n_samples, rng=None):
        """Independent normal draws of every coefficient, shape ``(n, *coef_shape)``."""
        rng = np.random.default_rng(rng)
        mean, std = self.predict(mu_star)
        noise = rng.standard_normal((n_samples,) + mean.shape)
        return mean + std * noise

    def export_csv(self, path, stage=None):
        with open(path, "w", newline="") as fh:
            write_gp_rows(csv.writer(fh), self, stage, header=True)


def write_gp_rows(writer, field, stage=None, header=False):
    if header:
        writer.writerow(["stage", "j", "k", "kind", "A", "L", "sigma2", "degenerate"])
    for c, kern in enumerate(field.kernels):
        j, k = np.unravel_index(c, field.coef_shape) if len(field.coef_shape) == 2 else (c, 0)
        writer.writerow([
            "" if stage is None else stage, int(j), int(k), kern.kind,
            repr(float(kern.amplitude)), repr(float(kern.lengthscale)), repr(float(kern.noise)),
            int(field.degenerate[c]),
        ])


def predict(field, coeff, mu_star):
    return field.predict_one(coeff, mu_star)


def sample_coefficients(field, mu_star, n_samples, seed=None):
    """``n_samples`` SINDy models drawn from the GP predictive distributions."""
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    draws = field.sample(mu_star, n_samples, seed)
    mu = np.atleast_1d(np.asarray(mu_star, dtype=np.float64))
    return [SindyModel.from_coefficients(d, mu) for d in draws]
