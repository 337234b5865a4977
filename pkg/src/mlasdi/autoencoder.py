"""Fully connected autoencoders with hand-written backpropagation and Adam."""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import DimensionMismatch, NonFiniteLoss
from .latent_dynamics import dynamics_loss_and_grad

ACTIVATIONS = ("tanh", "softplus")


def softplus(x):
    # logaddexp(0, x) = log(1 + e^x) without overflow
    return np.logaddexp(0.0, x)


def _activate(kind, x):
    if kind == "tanh":
        return np.tanh(x)
    return softplus(x)


def _activation_grad(kind, pre, post):
    """Derivative of the activation, given pre- and post-activation values."""
    if kind == "tanh":
        return 1.0 - post**2
    return expit(pre)


@dataclass(eq=False)
class MlpNetwork:
    """Dense network; the activation follows every layer except the last.

    ``weights[i]`` has shape ``(layer_dims[i+1], layer_dims[i])`` and a layer
    computes ``x @ W.T + b``.
    """

    layer_dims: tuple
    weights: list
    biases: list
    activation: str = "tanh"

    def __post_init__(self):
        self.layer_dims = tuple(int(d) for d in self.layer_dims)
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        if len(self.layer_dims) < 2:
            raise ValueError("a network needs at least an input and an output size")
        n = len(self.layer_dims) - 1
        if len(self.weights) != n or len(self.biases) != n:
            raise DimensionMismatch("need one weight matrix and bias per layer")
        for i in range(n):
            shape = (self.layer_dims[i + 1], self.layer_dims[i])
            if np.shape(self.weights[i]) != shape:
                raise DimensionMismatch(f"weights[{i}] must be {shape}")
            if np.shape(self.biases[i]) != (shape[0],):
                raise DimensionMismatch(f"biases[{i}] must have length {shape[0]}")

    @classmethod
    def initialize(cls, layer_dims, activation="tanh", rng=None):
        """Uniform ``+-1/sqrt(fan_in)`` initialization of weights and biases."""
        rng = np.random.default_rng(rng)
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            biases.append(rng.uniform(-bound, bound, size=fan_out))
        return cls(tuple(layer_dims), weights, biases, activation)

    @property
    def n_layers(self):
        return len(self.weights)

    def parameters(self):
        out = []
        for W, b in zip(self.weights, self.biases):
            out.extend((W, b))
        return out

    def forward(self, x, cache=False):
        acts = [x]
        last = self.n_layers - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            h = x @ W.T + b
            x = h if i == last else _activate(self.activation, h)
            if cache:
                acts.append((h, x))
        return (x, acts) if cache else x

    def backward(self, acts, grad_out, need_input_grad=True):
        """Backpropagate ``grad_out``; returns ``(param_grads, input_grad)``."""
        grads = [None] * (2 * self.n_layers)
        g = grad_out
        last = self.n_layers - 1
        for i in range(last, -1, -1):
            h, post = acts[i + 1]
            if i != last:
                g = g * _activation_grad(self.activation, h, post)
            layer_in = acts[0] if i == 0 else acts[i][1]
            grads[2 * i] = g.T @ layer_in
            grads[2 * i + 1] = g.sum(axis=0)
            if i > 0 or need_input_grad:
                g = g @ self.weights[i]
        return grads, (g if need_input_grad else None)

    def copy(self):
        return MlpNetwork(
            self.layer_dims,
            [W.copy() for W in self.weights],
            [b.copy() for b in self.biases],
            self.activation,
        )


@dataclass(eq=False)
class AutoencoderPair:
    """Encoder/decoder with affine standardization on both ends.

    Inputs are mapped through ``(u - input_mean) / input_scale`` before the
    encoder; decoder outputs are mapped back with
    ``output_mean + output_scale * y``. For a first stage both sets of
    statistics come from the data; later stages read the raw data but
    reconstruct a residual, so the two differ.
    """

    encoder: MlpNetwork
    decoder: MlpNetwork
    input_mean: np.ndarray
    input_scale: float
    output_mean: np.ndarray
    output_scale: float

    def __post_init__(self):
        if tuple(reversed(self.encoder.layer_dims)) != self.decoder.layer_dims:
            raise DimensionMismatch("decoder must mirror the encoder architecture")
        self.input_mean = np.asarray(self.input_mean, dtype=np.float64)
        self.output_mean = np.asarray(self.output_mean, dtype=np.float64)
        self.input_scale = float(self.input_scale)
        self.output_scale = float(self.output_scale)
        if self.input_mean.shape != (self.state_dim,):
            raise DimensionMismatch("input_mean must have length N_u")
        if self.output_mean.shape != (self.state_dim,):
            raise DimensionMismatch("output_mean must have length N_u")

    @classmethod
    def initialize(cls, layer_dims, activation="tanh", rng=None,
                   input_stats=None, output_stats=None):
        rng = np.random.default_rng(rng)
        n_u = layer_dims[0]
        encoder = MlpNetwork.initialize(layer_dims, activation, rng)
        decoder = MlpNetwork.initialize(tuple(reversed(layer_dims)), activation, rng)
        in_mean, in_scale = input_stats if input_stats is not None else (np.zeros(n_u), 1.0)
        out_mean, out_scale = output_stats if output_stats is not None else (in_mean, in_scale)
        return cls(encoder, decoder, in_mean, in_scale, out_mean, out_scale)

    @property
    def state_dim(self):
        return self.encoder.layer_dims[0]

    @property
    def latent_dim(self):
        return self.encoder.layer_dims[-1]

    @property
    def layer_dims(self):
        return self.encoder.layer_dims

    @property
    def activation(self):
        return self.encoder.activation

    def parameters(self):
        return self.encoder.parameters() + self.decoder.parameters()

    def flatten(self):
        """Move every weight and bias into one contiguous buffer.

        The networks keep views into the returned vector, so in-place updates
        of the buffer update the model.
        """
        params = self.parameters()
        flat = np.concatenate([p.ravel() for p in params])
        views, pos = [], 0
        for p in params:
            views.append(flat[pos:pos + p.size].reshape(p.shape))
            pos += p.size
        for net in (self.encoder, self.decoder):
            n = net.n_layers
            net.weights = views[0:2 * n:2]
            net.biases = views[1:2 * n:2]
            views = views[2 * n:]
        return flat

    def copy(self):
        return AutoencoderPair(
            self.encoder.copy(), self.decoder.copy(),
            self.input_mean.copy(), self.input_scale,
            self.output_mean.copy(), self.output_scale,
        )


def encode(net, states):
    states = np.asarray(states, dtype=np.float64)
    if states.shape[-1] != net.state_dim:
        raise DimensionMismatch(
            f"states have {states.shape[-1]} columns, network expects {net.state_dim}"
        )
    x = (states - net.input_mean) / net.input_scale
    return net.encoder.forward(x)


def decode(net, latents):
    latents = np.asarray(latents, dtype=np.float64)
    if latents.shape[-1] != net.latent_dim:
        raise DimensionMismatch(
            f"latents have {latents.shape[-1]} columns, network expects {net.latent_dim}"
        )
    return net.output_mean + net.output_scale * net.decoder.forward(latents)


@dataclass
class LossTerms:
    ae: float
    di: float
    ridge: float
    total: float


def loss_and_gradients(net, inputs, sindy, targets=None):
    """Training loss ``L_AE + beta1 L_DI + beta2 ||Xi||^2`` and its gradient.

    ``inputs`` (and ``targets``, defaulting to ``inputs``) have shape
    ``(N_mu, N_t + 1, N_u)``: one trajectory per parameter. All three terms
    are means over their entries. Returns ``(terms, grads, coefficients)``
    with ``grads`` ordered like ``net.parameters()`` and ``coefficients`` the
    per-trajectory SINDy solution of shape ``(N_mu, N_z, N_z + 1)``.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    targets = inputs if targets is None else np.asarray(targets, dtype=np.float64)
    if inputs.ndim != 3 or inputs.shape[-1] != net.state_dim:
        raise DimensionMismatch("inputs must be (N_mu, N_t+1, N_u)")
    if targets.shape != inputs.shape:
        raise DimensionMismatch("targets must match inputs")
    x, t = standardized_batch(net, inputs, targets)
    return _standardized_loss_and_gradients(net, x, t, inputs.shape[:2], sindy)


def standardized_batch(net, inputs, targets):
    """Flattened encoder inputs and decoder targets in network units."""
    n_u = inputs.shape[-1]
    x = ((inputs - net.input_mean) / net.input_scale).reshape(-1, n_u)
    t = ((targets - net.output_mean) / net.output_scale).reshape(-1, n_u)
    return x, t


def _standardized_loss_and_gradients(net, x, t, traj_shape, sindy):
    n_mu, n_t = traj_shape
    z, enc_acts = net.encoder.forward(x, cache=True)
    y, dec_acts = net.decoder.forward(z, cache=True)
    # reconstruction error in target units is output_scale * (y - t)
    err = y
    err -= t
    s2 = net.output_scale**2
    l_ae = s2 * float(np.vdot(err, err)) / err.size

    Z = z.reshape(n_mu, n_t, -1)
    l_di, l_ridge, coeffs, dZ_dyn = dynamics_loss_and_grad(Z, sindy)
    total = l_ae + sindy.beta1 * l_di + sindy.beta2 * l_ridge
    if not np.isfinite(total):
        raise NonFiniteLoss(f"non-finite loss {total}")

    err *= 2.0 * s2 / err.size
    dec_grads, dz = net.decoder.backward(dec_acts, err)
    dz += dZ_dyn.reshape(dz.shape)
    enc_grads, _ = net.encoder.backward(enc_acts, dz, need_input_grad=False)
    terms = LossTerms(l_ae, l_di, l_ridge, total)
    return terms, enc_grads + dec_grads, coeffs


def loss_value(net, inputs, sindy, targets=None):
    """Total loss with the coefficients re-solved; used as a gradient oracle."""
    inputs = np.asarray(inputs, dtype=np.float64)
    targets = inputs if targets is None else np.asarray(targets, dtype=np.float64)
    n_mu, n_t, n_u = inputs.shape
    z = encode(net, inputs.reshape(-1, n_u))
    recon = decode(net, z)
    l_ae = np.mean((recon - targets.reshape(-1, n_u)) ** 2)
    l_di, l_ridge, _, _ = dynamics_loss_and_grad(z.reshape(n_mu, n_t, -1), sindy)
    return float(l_ae + sindy.beta1 * l_di + sindy.beta2 * l_ridge)


@dataclass(eq=False)
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default=None)
    v: list = field(default=None)

    @classmethod
    def for_params(cls, params, lr=1e-3, **kw):
        return cls(lr=lr, m=[np.zeros_like(p) for p in params],
                   v=[np.zeros_like(p) for p in params], **kw)


def adam_step(params, grads, state):
    """One bias-corrected Adam update, applied to ``params`` in place.

    ``params`` and ``grads`` are lists of arrays (a single flat buffer from
    :meth:`AutoencoderPair.flatten` is the fast path).
    """
    if state.m is None:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    if len(params) != len(grads) or len(params) != len(state.m):
        raise DimensionMismatch("params, grads and optimizer state disagree")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    step_size = state.lr / c1
    inv_root_c2 = 1.0 / np.sqrt(c2)
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise DimensionMismatch(f"gradient shape {g.shape} != parameter {p.shape}")
        tmp = np.empty_like(p)
        # m += (1 - b1) (g - m);  v += (1 - b2) (g^2 - v)
        np.subtract(g, m, out=tmp)
        tmp *= 1.0 - b1
        m += tmp
        np.square(g, out=tmp)
        tmp -= v
        tmp *= 1.0 - b2
        v += tmp
        np.sqrt(v, out=tmp)
        tmp *= inv_root_c2
        tmp += state.eps
        np.divide(m, tmp, out=tmp)
        tmp *= step_size
        p -= tmp
    return params, state
