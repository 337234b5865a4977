import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mlasdi.autoencoder import (
    AdamState,
    AutoencoderPair,
    MlpNetwork,
    adam_step,
    decode,
    encode,
    loss_and_gradients,
    loss_value,
    softplus,
)
from mlasdi.data import center_scale_stats
from mlasdi.errors import DimensionMismatch, NonFiniteLoss
from mlasdi.latent_dynamics import SindyContext


def identity_pair(n):
    enc = MlpNetwork((n, n), [np.eye(n)], [np.zeros(n)])
    dec = MlpNetwork((n, n), [np.eye(n)], [np.zeros(n)])
    return AutoencoderPair(enc, dec, np.zeros(n), 1.0, np.zeros(n), 1.0)


def random_pair(rng, dims, activation):
    stats = (rng.standard_normal(dims[0]) * 0.1, 0.7)
    out = (rng.standard_normal(dims[0]) * 0.1, 1.3)
    return AutoencoderPair.initialize(dims, activation, rng, stats, out)


class TestForward:
    def test_identity_encode(self, rng):
        v = rng.standard_normal((4, 3))
        np.testing.assert_array_equal(encode(identity_pair(3), v), v)

    def test_identity_round_trip(self, rng):
        v = rng.standard_normal((4, 3))
        net = identity_pair(3)
        np.testing.assert_allclose(decode(net, encode(net, v)), v, rtol=0, atol=1e-12)

    def test_shapes(self, rng):
        net = AutoencoderPair.initialize((600, 100, 5), "tanh", rng)
        assert encode(net, rng.standard_normal((1, 600))).shape == (1, 5)
        z = encode(net, rng.standard_normal((402, 600)))
        assert z.shape == (402, 5)
        u = decode(net, z)
        assert u.shape == (402, 600) and np.all(np.isfinite(u))

    def test_zero_latent_gives_mean(self, rng):
        net = AutoencoderPair.initialize((6, 4, 2), "tanh", rng, (np.zeros(6), 1.0),
                                         (np.arange(6.0), 2.0))
        for b in net.decoder.biases:
            b[:] = 0.0
        np.testing.assert_allclose(decode(net, np.zeros((3, 2))), np.tile(np.arange(6.0), (3, 1)))

    def test_linear_edge_layers(self):
        # a single layer is affine: no activation on the output
        net = MlpNetwork((1, 1), [np.array([[3.0]])], [np.array([-1.0])], "tanh")
        assert net.forward(np.array([[2.0]]))[0, 0] == 5.0

    def test_dimension_mismatch(self, rng):
        net = AutoencoderPair.initialize((5, 3, 2), "tanh", rng)
        with pytest.raises(DimensionMismatch):
            encode(net, np.zeros((2, 4)))
        with pytest.raises(DimensionMismatch):
            decode(net, np.zeros((2, 3)))

    def test_mirror_required(self, rng):
        enc = MlpNetwork.initialize((5, 3, 2), "tanh", rng)
        dec = MlpNetwork.initialize((2, 4, 5), "tanh", rng)
        with pytest.raises(DimensionMismatch):
            AutoencoderPair(enc, dec, np.zeros(5), 1.0, np.zeros(5), 1.0)

    def test_weight_shapes_validated(self):
        with pytest.raises(DimensionMismatch):
            MlpNetwork((3, 2), [np.zeros((3, 2))], [np.zeros(2)])

    def test_init_bounds_and_determinism(self):
        a = MlpNetwork.initialize((16, 8, 3), "tanh", np.random.default_rng(0))
        b = MlpNetwork.initialize((16, 8, 3), "tanh", np.random.default_rng(0))
        assert np.all(np.abs(a.weights[0]) <= 0.25)
        assert np.all(np.abs(a.weights[1]) <= 1 / np.sqrt(8))
        for p, q in zip(a.parameters(), b.parameters()):
            np.testing.assert_array_equal(p, q)

    def test_softplus_overflow_safe(self):
        x = np.array([30.5, 100.0, 800.0])
        assert np.all(softplus(x) - x < 1e-12)
        np.testing.assert_allclose(softplus(np.array([0.0, -50.0])), [np.log(2.0), np.exp(-50.0)], rtol=1e-12)

    def test_flatten_keeps_values_and_links(self, rng):
        net = random_pair(rng, (6, 4, 2), "tanh")
        x = rng.standard_normal((5, 6))
        before = decode(net, encode(net, x))
        flat = net.flatten()
        np.testing.assert_array_equal(decode(net, encode(net, x)), before)
        flat *= 0.0
        np.testing.assert_array_equal(net.encoder.weights[0], 0.0)


class TestLoss:
    def test_plain_mse(self, rng):
        net = random_pair(rng, (6, 4, 2), "tanh")
        u = rng.standard_normal((2, 5, 6))
        terms, _, _ = loss_and_gradients(net, u, SindyContext(0.0, 0.0, 0.1))
        recon = decode(net, encode(net, u.reshape(-1, 6)))
        assert terms.total == pytest.approx(np.mean((recon - u.reshape(-1, 6)) ** 2), rel=1e-12)
        assert terms.total == terms.ae

    def test_zero_network(self, rng):
        u = rng.standard_normal((2, 5, 6)) + 3.0
        mean, scale = center_scale_stats(u)
        net = AutoencoderPair.initialize((6, 4, 2), "tanh", rng, (mean, scale), (mean, scale))
        for p in net.parameters():
            p[...] = 0.0
        terms, _, _ = loss_and_gradients(net, u, SindyContext(0.0, 0.0, 0.1))
        assert terms.ae == pytest.approx(np.mean((u - mean) ** 2), rel=1e-12)

    def test_terms_combine(self, rng):
        net = random_pair(rng, (6, 4, 2), "softplus")
        u = rng.standard_normal((2, 5, 6))
        ctx = SindyContext(0.3, 0.02, 0.1)
        terms, _, C = loss_and_gradients(net, u, ctx)
        assert C.shape == (2, 2, 3)
        assert terms.total == pytest.approx(terms.ae + 0.3 * terms.di + 0.02 * terms.ridge, rel=1e-14)
        assert terms.total == pytest.approx(loss_value(net, u, ctx), rel=1e-12)

    def test_non_finite(self, rng):
        net = random_pair(rng, (3, 2), "tanh")
        net.decoder.biases[0][0] = np.inf
        with pytest.raises(NonFiniteLoss):
            loss_and_gradients(net, rng.standard_normal((1, 4, 3)), SindyContext(0.1, 0.1, 0.1))

    def test_shape_checks(self, rng):
        net = random_pair(rng, (3, 2), "tanh")
        with pytest.raises(DimensionMismatch):
            loss_and_gradients(net, np.zeros((4, 3)), SindyContext(0.1, 0.1, 0.1))
        with pytest.raises(DimensionMismatch):
            loss_and_gradients(net, np.zeros((1, 4, 3)), SindyContext(0.1, 0.1, 0.1), np.zeros((1, 3, 3)))


def fd_check(net, u, ctx, rng, n_checks, target=None, h=1e-6):
    _, grads, _ = loss_and_gradients(net, u, ctx, target)
    params = net.parameters()
    worst = 0.0
    for _ in range(n_checks):
        k = rng.integers(len(params))
        idx = tuple(rng.integers(s) for s in params[k].shape)
        old = params[k][idx]
        params[k][idx] = old + h
        lp = loss_value(net, u, ctx, target)
        params[k][idx] = old - h
        lm = loss_value(net, u, ctx, target)
        params[k][idx] = old
        fd = (lp - lm) / (2 * h)
        worst = max(worst, abs(fd - grads[k][idx]) / (abs(grads[k][idx]) + 1e-12))
    return worst


class TestGradients:
    @pytest.mark.parametrize("activation", ["tanh", "softplus"])
    def test_finite_differences(self, rng, activation):
        net = random_pair(rng, (7, 5, 3), activation)
        u = rng.standard_normal((2, 6, 7))
        assert fd_check(net, u, SindyContext(0.5, 0.1, 0.2), rng, 40) < 1e-5

    def test_distinct_target(self, rng):
        net = random_pair(rng, (5, 4, 2), "tanh")
        u = rng.standard_normal((2, 6, 5))
        assert fd_check(net, u, SindyContext(1.0, 1e-3, 0.2), rng, 30, target=rng.standard_normal(u.shape)) < 1e-5

    @settings(max_examples=10, deadline=None)
    @given(seed=st.integers(0, 2**31), depth=st.integers(1, 3), act=st.sampled_from(["tanh", "softplus"]))
    def test_random_architectures(self, seed, depth, act):
        rng = np.random.default_rng(seed)
        dims = tuple(int(d) for d in rng.integers(2, 8, size=depth + 1))
        net = random_pair(rng, dims, act)
        u = rng.standard_normal((2, 5, dims[0]))
        assert fd_check(net, u, SindyContext(0.4, 0.05, 0.3), rng, 15) < 1e-5


class TestAdam:
    def test_zero_gradient(self):
        p = [np.array([1.0, -2.0])]
        state = AdamState.for_params(p, lr=0.1)
        adam_step(p, [np.zeros(2)], state)
        np.testing.assert_array_equal(p[0], [1.0, -2.0])
        assert state.step == 1

    def test_first_step(self):
        p = [np.zeros(3)]
        g = np.array([0.5, -3.0, 1e-3])
        state = AdamState.for_params(p, lr=1e-2)
        adam_step(p, [g], state)
        expected = -1e-2 * g / (np.abs(g) + 1e-8)
        np.testing.assert_allclose(p[0], expected, rtol=1e-12)
        np.testing.assert_allclose(p[0], -1e-2 * np.sign(g), rtol=1e-4)

    def test_constant_gradient(self):
        p = [np.zeros(2)]
        state = AdamState.for_params(p, lr=1e-3)
        g = np.array([2.0, -0.5])
        for _ in range(200):
            adam_step(p, [g], state)
        np.testing.assert_allclose(p[0], -200 * 1e-3 * np.sign(g), rtol=1e-6)

    def test_matches_textbook(self, rng):
        p = [rng.standard_normal(4)]
        ref = p[0].copy()
        m = np.zeros(4)
        v = np.zeros(4)
        state = AdamState.for_params(p, lr=0.01)
        for t in range(1, 6):
            g = rng.standard_normal(4)
            adam_step(p, [g], state)
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g**2
            ref = ref - 0.01 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
        np.testing.assert_allclose(p[0], ref, rtol=1e-12)

    def test_shape_mismatch(self):
        p = [np.zeros(2)]
        with pytest.raises(DimensionMismatch):
            adam_step(p, [np.zeros(3)], AdamState.for_params(p))
