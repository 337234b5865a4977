"""Multi-stage training and prediction.

Stage 1 is an ordinary GP-interpolated LaSDI model of the data. Every later
stage reads the same raw data but reconstructs the normalized residual left by
the stages before it, so the data are approximated as

    U ~= U1 + eps1 * U2 + eps2 * U3 + ...

where ``Uk`` is the latent-ODE reconstruction of stage ``k`` and ``eps(k)``
the standard deviation of the residual after stage ``k``.
"""

import logging
import time
import warnings
from dataclasses import dataclass, field, asdict

import numpy as np

from .autoencoder import (
    AdamState,
    AutoencoderPair,
    _standardized_loss_and_gradients,
    adam_step,
    decode,
    encode,
    standardized_batch,
)
from .data import SnapshotTensor, center_scale_stats
from .errors import DimensionMismatch, NonFiniteLoss, NonFiniteState
from .gp_interp import GpCoefficientField
from .latent_dynamics import SindyContext, SindyModel, dynamics_loss_and_grad

log = logging.getLogger(__name__)

LOG_EVERY = 100
EPS_UNDERFLOW = 1e-14


def rollout_latent(model, z0, n_times, dt, substeps=1):
    """Integrate ``zdot = b + A z`` from ``z0`` with classical RK4.

    Returns an ``(n_times, N_z)`` array sampled every ``dt``; each interval is
    split into ``substeps`` RK4 steps.
    """
    if isinstance(model, SindyModel):
        b, A = model.b, model.A
    else:
        C = np.asarray(model, dtype=np.float64)
        b, A = C[:, 0], C[:, 1:]
    z = np.array(z0, dtype=np.float64).reshape(-1)
    if z.size != b.size:
        raise DimensionMismatch(f"z0 has length {z.size}, model latent dim is {b.size}")
    h = dt / substeps
    At = A.T
    out = np.empty((n_times, z.size))
    out[0] = z
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(1, n_times):
            for _ in range(substeps):
                k1 = b + z @ At
                k2 = b + (z + 0.5 * h * k1) @ At
                k3 = b + (z + 0.5 * h * k2) @ At
                k4 = b + (z + h * k3) @ At
                z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(z)):
                raise NonFiniteState(f"latent trajectory blew up at step {n}")
            out[n] = z
    return out


@dataclass
class StageConfig:
    """Hyperparameters of one stage.

    ``architecture`` is the full encoder layout including the input size,
    e.g. ``(600, 100, 5)``; the decoder mirrors it.
    """

    architecture: tuple
    iterations: int
    lr: float
    beta1: float
    beta2: float
    activation: str = "tanh"
    gp_kind: str = "matern15"
    gp_noise: float = None
    substeps: int = 1

    def __post_init__(self):
        self.architecture = tuple(int(d) for d in self.architecture)
        if len(self.architecture) < 2 or min(self.architecture) < 1:
            raise ValueError(f"invalid architecture {self.architecture}")
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")
        if self.lr <= 0:
            raise ValueError("lr must be positive")

    def to_dict(self):
        d = asdict(self)
        d["architecture"] = list(self.architecture)
        return d


@dataclass(eq=False)
class StageModel:
    autoencoder: AutoencoderPair
    coefficients: np.ndarray  # (N_mu, N_z, N_z + 1)
    parameters: np.ndarray  # (N_mu, N)
    gp_field: GpCoefficientField
    epsilon_prev: float = 1.0
    config: StageConfig = None
    loss_history: list = field(default_factory=list)
    wall_time: float = 0.0

    def __post_init__(self):
        if self.coefficients.shape[0] != self.parameters.shape[0]:
            raise DimensionMismatch("one coefficient set per training parameter required")
        if not self.epsilon_prev > 0:
            raise ValueError("epsilon_prev must be positive")

    @property
    def sindy(self):
        return [SindyModel.from_coefficients(c, p)
                for c, p in zip(self.coefficients, self.parameters)]

    def reconstruct(self, states0, coefficients, n_times, dt):
        """Decoded latent rollouts, one per (initial state, coefficient set) pair."""
        z0 = encode(self.autoencoder, np.atleast_2d(states0))
        sub = self.config.substeps if self.config is not None else 1
        Z = np.stack([rollout_latent(c, z, n_times, dt, sub)
                      for z, c in zip(z0, coefficients)])
        return decode(self.autoencoder, Z)


@dataclass(eq=False)
class StageStack:
    stages: list
    parameters: np.ndarray
    t0: float
    dt: float
    n_times: int
    seed: int = 0

    def __post_init__(self):
        if not self.stages:
            raise ValueError("a stage stack needs at least one stage")

    @property
    def epsilons(self):
        return [s.epsilon_prev for s in self.stages]

    @property
    def state_dim(self):
        return self.stages[0].autoencoder.state_dim

    def training_reconstruction(self, data, upto=None):
        """Composite latent-ODE reconstruction of the training trajectories."""
        u0 = data.values[:, 0, :]
        total = np.zeros_like(data.values)
        for stage in self.stages[:upto]:
            total += stage.epsilon_prev * stage.reconstruct(
                u0, stage.coefficients, data.n_times, data.dt)
        return total


@dataclass
class Prediction:
    mean_trajectory: np.ndarray
    std_field: np.ndarray
    samples: np.ndarray = None
    stage_means: list = None


def _stage_seed(seed, index):
    return np.random.default_rng([int(seed), int(index)])


def train_stage(data, config, seed=0, target=None, epsilon_prev=1.0, stage_index=0):
    """Train one autoencoder + SINDy + GP stage.

    ``data`` is the raw training tensor fed to the encoder; ``target`` (same
    shape, defaults to ``data.values``) is what the decoder reconstructs.
    """
    values = data.values
    target = values if target is None else np.asarray(target, dtype=np.float64)
    if target.shape != values.shape:
        raise DimensionMismatch("target must have the same shape as the data")
    if config.architecture[0] != data.state_dim:
        raise DimensionMismatch(
            f"architecture input {config.architecture[0]} != state dim {data.state_dim}")
    rng = _stage_seed(seed, stage_index)
    net = AutoencoderPair.initialize(
        config.architecture, config.activation, rng,
        input_stats=center_scale_stats(values),
        output_stats=center_scale_stats(target),
    )
    ctx = SindyContext(config.beta1, config.beta2, data.dt)
    flat = net.flatten()
    opt = AdamState.for_params([flat], lr=config.lr)
    x, t = standardized_batch(net, values, target)
    history = []
    start = time.perf_counter()
    for it in range(config.iterations):
        try:
            # divergence surfaces as NonFiniteLoss, so silence numpy's overflow chatter
            with np.errstate(over="ignore", invalid="ignore"):
                terms, grads, _ = _standardized_loss_and_gradients(
                    net, x, t, values.shape[:2], ctx)
        except NonFiniteLoss as exc:
            raise NonFiniteLoss(f"stage {stage_index}: non-finite loss at iteration {it}",
                                iteration=it, stage=stage_index) from exc
        if it % LOG_EVERY == 0:
            history.append((it, terms.total, terms.ae, terms.di, terms.ridge))
        adam_step([flat], [np.concatenate([g.ravel() for g in grads])], opt)
    n_mu, n_t, n_u = values.shape
    z = encode(net, values.reshape(-1, n_u)).reshape(n_mu, n_t, -1)
    l_di, l_ridge, coeffs, _ = dynamics_loss_and_grad(z, ctx)
    l_ae = float(np.mean((decode(net, z) - target) ** 2))
    total = l_ae + ctx.beta1 * l_di + ctx.beta2 * l_ridge
    if not np.isfinite(total):
        raise NonFiniteLoss(f"stage {stage_index}: non-finite final loss",
                            iteration=config.iterations, stage=stage_index)
    history.append((config.iterations, total, l_ae, l_di, l_ridge))
    gp = GpCoefficientField(data.parameters, coeffs, config.gp_kind, config.gp_noise)
    wall = time.perf_counter() - start
    log.info("stage %d trained in %.2fs, final loss %.3e", stage_index, wall, total)
    return StageModel(net, coeffs, data.parameters.copy(), gp, float(epsilon_prev),
                      config, history, wall)


def _std(a):
    a = np.asarray(a)
    return float(np.sqrt(np.mean((a - a.mean()) ** 2)))


def stage_residual(data, stack):
    """Residual of the composite reconstruction and its standard deviation.

    A zero-variance residual gives ``epsilon = 1``.
    """
    residual = data.values - stack.training_reconstruction(data)
    eps = _std(residual)
    return data.with_values(residual), (eps if eps > 0 else 1.0)


def train_multistage(data, configs, seed=0):
    """Train stages sequentially, each on the normalized residual of the previous."""
    if not configs:
        raise ValueError("at least one stage config is required")
    stages = []
    target = data.values
    eps_prev = 1.0
    for k, cfg in enumerate(configs):
        if k > 0:
            stack = StageStack(stages, data.parameters, data.t0, data.dt, data.n_times, seed)
            residual = data.values - stack.training_reconstruction(data)
            eps = _std(residual)
            if eps < EPS_UNDERFLOW:
                warnings.warn(f"residual std {eps:.3e} underflowed; stopping after "
                              f"{k} stage(s)", RuntimeWarning)
                break
            target, eps_prev = residual / eps, eps
        try:
            stage = train_stage(data, cfg, seed, target, eps_prev, stage_index=k)
        except NonFiniteLoss as exc:
            exc.stage = k
            raise
        stages.append(stage)
    return StageStack(stages, data.parameters.copy(), data.t0, data.dt, data.n_times, seed)


def sample_std(samples):
    """Population standard deviation over axis 0.

    The data are shifted by the first sample before accumulating, so identical
    samples give exactly zero.
    """
    d = samples - samples[0]
    return np.sqrt(np.mean((d - d.mean(axis=0)) ** 2, axis=0))


def predict(stack, mu_star, u0, n_samples=0, seed=0):
    """Predict the full trajectory at ``mu_star`` from the initial state ``u0``.

    Every stage encodes ``u0`` itself, rolls out the latent ODE with the GP
    mean coefficients and decodes; stage outputs are combined with their
    epsilon weights. With ``n_samples > 0`` each sample redraws the
    coefficients of every stage from its GPs and ``std_field`` is the
    pointwise standard deviation of the sampled trajectories.
    """
    u0 = np.asarray(u0, dtype=np.float64).reshape(1, -1)
    if u0.shape[1] != stack.state_dim:
        raise DimensionMismatch(f"u0 has length {u0.shape[1]}, expected {stack.state_dim}")
    mu = np.atleast_1d(np.asarray(mu_star, dtype=np.float64))
    n_t, dt = stack.n_times, stack.dt
    mean = np.zeros((n_t, stack.state_dim))
    stage_means = []
    draws = []
    rng = np.random.default_rng(seed)
    for stage in stack.stages:
        m, _ = stage.gp_field.predict(mu)
        part = stage.epsilon_prev * stage.reconstruct(u0, [m], n_t, dt)[0]
        stage_means.append(part)
        mean += part
        if n_samples > 0:
            draws.append(stage.gp_field.sample(mu, n_samples, rng))
    if n_samples <= 0:
        return Prediction(mean, np.zeros_like(mean), None, stage_means)
    samples = np.zeros((n_samples, n_t, stack.state_dim))
    for stage, coeffs in zip(stack.stages, draws):
        samples += stage.epsilon_prev * stage.reconstruct(
            np.repeat(u0, n_samples, axis=0), coeffs, n_t, dt)
    return Prediction(mean, sample_std(samples), samples, stage_means)


def predict_tensor(stack, data, n_samples=0, seed=0):
    """Predictions for every parameter of ``data`` using its initial states."""
    return [predict(stack, data.parameters[i], data.values[i, 0], n_samples, seed)
            for i in range(data.n_params)]
