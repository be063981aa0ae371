import math

import numpy as np
import pytest

from dicnn.errors import ShapeError
from dicnn.nn import (
    Adam,
    DicnnNetwork,
    LayerSpec,
    TrainConfig,
    conv_spec,
    default_architecture,
    dense_spec,
    dilated_conv1d_backward,
    dilated_conv1d_forward,
    softmax,
    train,
    validate_specs,
)
from dicnn.data import one_hot

from oracles import central_difference, naive_dilated_conv, relative_error


class TestConvForward:
    def test_hand_case_dilation_two(self):
        out = dilated_conv1d_forward(
            np.array([[1.0, 2, 3, 4, 5]]), np.array([[[1.0, 1.0]]]), 2
        )
        assert out.tolist() == [[4.0, 6.0, 8.0]]

    def test_dilation_one_matches_convolve(self, rng_np):
        # independent oracle: numpy's valid-mode convolution per channel
        x = rng_np.standard_normal((3, 20))
        k = rng_np.standard_normal((2, 3, 5))
        out = dilated_conv1d_forward(x, k, 1)
        for o in range(2):
            expected = sum(np.convolve(x[c], k[o, c], mode="valid") for c in range(3))
            assert np.allclose(out[o], expected, atol=1e-12)

    def test_random_case_matches_naive_loops(self, rng_np):
        x = rng_np.standard_normal((4, 32))
        k = rng_np.standard_normal((8, 4, 3))
        out = dilated_conv1d_forward(x, k, 4)
        expected = naive_dilated_conv(x, k, 4)
        assert out.shape == (8, 32 - 2 * 4)
        assert np.max(np.abs(out - expected)) <= 1e-12

    def test_random_shapes_and_dilations(self, rng_np):
        for _ in range(25):
            c_in = int(rng_np.integers(1, 4))
            c_out = int(rng_np.integers(1, 5))
            taps = int(rng_np.integers(1, 4))
            dil = int(rng_np.integers(1, 5))
            length = (taps - 1) * dil + int(rng_np.integers(1, 9))
            x = rng_np.standard_normal((c_in, length))
            k = rng_np.standard_normal((c_out, c_in, taps))
            got = dilated_conv1d_forward(x, k, dil)
            assert np.max(np.abs(got - naive_dilated_conv(x, k, dil))) <= 1e-12

    def test_bias_added_per_output_channel(self, rng_np):
        x = rng_np.standard_normal((2, 10))
        k = rng_np.standard_normal((3, 2, 3))
        b = np.array([1.0, -2.0, 0.5])
        with_bias = dilated_conv1d_forward(x, k, 1, b)
        expected = naive_dilated_conv(x, k, 1, b)
        assert np.allclose(with_bias, expected, atol=1e-12)

    def test_too_short_input_reports_minimum(self):
        with pytest.raises(ShapeError) as err:
            dilated_conv1d_forward(np.zeros((1, 4)), np.zeros((1, 1, 3)), 2)
        assert "5" in str(err.value)  # needs (3-1)*2 + 1


class TestConvBackward:
    def test_zero_upstream_gives_zero_grads(self, rng_np):
        x = rng_np.standard_normal((2, 12))
        k = rng_np.standard_normal((3, 2, 3))
        out = dilated_conv1d_forward(x, k, 2)
        gx, gk, gb = dilated_conv1d_backward(np.zeros_like(out), x, k, 2)
        assert not gx.any() and not gk.any() and not gb.any()

    def test_one_tap_kernel_is_scalar_chain(self, rng_np):
        x = rng_np.standard_normal((1, 6))
        k = np.array([[[2.5]]])
        out = dilated_conv1d_forward(x, k, 1)
        upstream = rng_np.standard_normal(out.shape)
        gx, gk, gb = dilated_conv1d_backward(upstream, x, k, 1)
        assert np.allclose(gx, 2.5 * upstream)
        assert np.allclose(gk[0, 0, 0], (upstream * x).sum())
        assert np.allclose(gb, upstream.sum())

    def test_shape_mismatch_with_cache(self, rng_np):
        x = rng_np.standard_normal((2, 12))
        k = rng_np.standard_normal((3, 2, 3))
        with pytest.raises(ShapeError):
            dilated_conv1d_backward(np.zeros((3, 99)), x, k, 2)

    def test_matches_finite_differences(self, rng_np):
        x = rng_np.standard_normal((1, 2, 14))
        k = rng_np.standard_normal((3, 2, 3))
        b = rng_np.standard_normal(3)
        upstream = rng_np.standard_normal((1, 3, 14 - 2 * 2))

        def objective():
            out = dilated_conv1d_forward(x, k, 2, b)
            return float((out * upstream).sum())

        gx, gk, gb = dilated_conv1d_backward(upstream, x, k, 2)
        assert relative_error(gx, central_difference(objective, x)) < 1e-6
        assert relative_error(gk, central_difference(objective, k)) < 1e-6
        assert relative_error(gb, central_difference(objective, b)) < 1e-6


def tiny_network(seed=0, width=12, k=3, dilations=(1, 2)):
    specs = default_architecture(width, k, channels=3, kernel_size=3,
                                 dilations=dilations)
    return DicnnNetwork(specs, width, seed)


def safe_случай():  # pragma: no cover - guard against accidental call
    raise AssertionError


def make_batch(network, rng, batch=4):
    """Batch placed away from ReLU kinks so finite differences stay clean."""
    while True:
        x = rng.standard_normal((batch, network.input_width))
        y = one_hot(rng.integers(0, network.n_classes, size=batch),
                    network.n_classes)
        pre_kink = []
        h = x[:, np.newaxis, :]
        for layer in network.layers:
            h = layer.forward(h)
            if layer.__class__.__name__ == "Relu":
                pre_kink.append(np.abs(layer._mask * 1.0).min())
        # resample if any pre-activation sits within FD reach of zero
        mins = []
        h = x[:, np.newaxis, :]
        for layer in network.layers:
            if layer.__class__.__name__ == "Relu":
                mins.append(np.min(np.abs(h)))
            h = layer.forward(h)
        if min(mins, default=1.0) > 1e-4:
            return x, y


class TestNetworkGradients:
    def test_all_parameter_grads_match_finite_differences(self):
        rng = np.random.Generator(np.random.PCG64(21))
        network = tiny_network(seed=5)
        x, y = make_batch(network, rng)
        _, grads, _ = network.loss_and_grads(x, y)
        for name, arr in network.parameters():
            numeric = central_difference(
                lambda: network.loss_and_grads(x, y)[0], arr
            )
            assert relative_error(grads[name], numeric) < 1e-4, name

    def test_input_gradient_matches_finite_differences(self):
        rng = np.random.Generator(np.random.PCG64(22))
        network = tiny_network(seed=6)
        x, y = make_batch(network, rng)
        _, _, input_grad = network.loss_and_grads(x, y)
        numeric = central_difference(lambda: network.loss_and_grads(x, y)[0], x)
        assert relative_error(input_grad, numeric) < 1e-4

    def test_dense_only_network_gradients(self):
        rng = np.random.Generator(np.random.PCG64(23))
        specs = [dense_spec(6, 3), LayerSpec(kind="softmax_head")]
        network = DicnnNetwork(specs, 6, 9)
        x = rng.standard_normal((5, 6))
        y = one_hot(rng.integers(0, 3, size=5), 3)
        _, grads, input_grad = network.loss_and_grads(x, y)
        for name, arr in network.parameters():
            numeric = central_difference(
                lambda: network.loss_and_grads(x, y)[0], arr
            )
            assert relative_error(grads[name], numeric) < 1e-4, name
        numeric = central_difference(lambda: network.loss_and_grads(x, y)[0], x)
        assert relative_error(input_grad, numeric) < 1e-4


class TestNetworkForward:
    def test_deterministic_rebuild(self):
        a = tiny_network(seed=3)
        b = tiny_network(seed=3)
        x = np.linspace(-1, 1, 2 * 12).reshape(2, 12)
        assert np.array_equal(a.forward(x), b.forward(x))

    def test_zero_head_gives_uniform_probabilities(self):
        network = tiny_network(seed=4, k=3)
        params = network.snapshot()
        for name in params:
            if name.startswith(f"{len(network.layers) - 1}."):
                params[name] = np.zeros_like(params[name])
        network.set_parameters(params)
        probs = network.predict_proba(np.ones((2, 12)))
        assert np.allclose(probs, 1.0 / 3.0)

    def test_softmax_rows_sum_to_one(self, rng_np):
        network = tiny_network(seed=7)
        probs = network.predict_proba(rng_np.standard_normal((8, 12)))
        assert np.max(np.abs(probs.sum(axis=1) - 1.0)) < 1e-12

    def test_width_mismatch(self):
        with pytest.raises(ShapeError):
            tiny_network().forward(np.zeros((2, 99)))

    def test_uniform_prediction_loss_is_log_k(self):
        network = tiny_network(seed=4, k=3)
        logits = np.zeros((5, 3))
        y = one_hot([0, 1, 2, 0, 1], 3)
        assert network.loss_head.loss(logits, y) == pytest.approx(math.log(3))

    def test_perfect_prediction_loss_near_zero(self):
        network = tiny_network(seed=4, k=3)
        y = one_hot([0, 1], 3)
        logits = (y * 2 - 1) * 40.0  # huge margin toward the true class
        assert network.loss_head.loss(logits, y) < 1e-12


class TestReceptiveField:
    def test_exponential_dilation_span(self, rng_np):
        # stack of kernel-3 convs at dilations 1,2,4: span 1+(3-1)*(2^3-1)=15
        specs = [
            conv_spec(1, 2, 3, 1),
            conv_spec(2, 2, 3, 2),
            conv_spec(2, 2, 3, 4),
            LayerSpec(kind="global_avg_pool"),
            dense_spec(2, 2),
            LayerSpec(kind="softmax_head"),
        ]
        network = DicnnNetwork(specs, 29, 13)
        conv_layers = network.layers[:3]

        def conv_stack(x):
            h = x[np.newaxis, np.newaxis, :]
            for layer in conv_layers:
                h = layer.forward(h)
            return h[0]

        x = rng_np.standard_normal(29)
        base = conv_stack(x)
        bumped = x.copy()
        bumped[14] += 1.0
        changed = np.any(conv_stack(bumped) != base, axis=0)
        assert changed.sum() == 15
        assert changed.tolist() == [True] * 15  # output length is exactly 15


class TestValidateSpecs:
    def test_chain_mismatch_detected(self):
        specs = [
            conv_spec(1, 4, 3, 1),
            conv_spec(8, 4, 3, 1),  # expects 8 channels, gets 4
            LayerSpec(kind="global_avg_pool"),
            dense_spec(4, 2),
            LayerSpec(kind="softmax_head"),
        ]
        with pytest.raises(ShapeError):
            validate_specs(specs, 16)

    def test_sequence_exhausted(self):
        with pytest.raises(ShapeError):
            default_architecture(8, 2, kernel_size=3, dilations=(1, 2, 4))

    def test_returns_class_count(self):
        specs = default_architecture(32, 5)
        assert validate_specs(specs, 32) == 5


class TestAdam:
    def test_zero_grads_leave_params(self):
        p = np.array([1.0, -2.0])
        opt = Adam([("p", p)])
        opt.step({"p": np.zeros(2)})
        assert p.tolist() == [1.0, -2.0]

    def test_two_step_hand_oracle(self):
        lr, b1, b2, eps = 0.1, 0.9, 0.999, 1e-8
        p = np.array([2.0])
        opt = Adam([("p", p)], learning_rate=lr, beta1=b1, beta2=b2, eps=eps)
        grads = [0.5, -0.3]
        # hand recurrence with plain floats
        m = v = 0.0
        expected = 2.0
        for t, g in enumerate(grads, start=1):
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            mhat = m / (1 - b1**t)
            vhat = v / (1 - b2**t)
            expected -= lr * mhat / (math.sqrt(vhat) + eps)
            opt.step({"p": np.array([g])})
        assert p[0] == pytest.approx(expected, abs=1e-15)

    def test_trajectory_bitwise_reproducible(self, rng_np):
        seq = [rng_np.standard_normal(3) for _ in range(10)]

        def run():
            p = np.array([0.1, 0.2, 0.3])
            opt = Adam([("p", p)])
            for g in seq:
                opt.step({"p": g})
            return p

        assert np.array_equal(run(), run())

    def test_single_step_reduces_loss_on_scalar_model(self):
        # J(w) = (w - 3)^2; gradient step from w=0 must lower J for small lr
        w = np.array([0.0])
        opt = Adam([("w", w)], learning_rate=0.01)
        before = (w[0] - 3.0) ** 2
        opt.step({"w": np.array([2 * (w[0] - 3.0)])})
        assert (w[0] - 3.0) ** 2 < before


class TestTrainLoop:
    def test_learns_separable_blobs(self, blobs):
        x, y = blobs
        std = (x - x.mean(axis=0)) / x.std(axis=0)
        specs = default_architecture(16, 2, channels=8, kernel_size=3,
                                     dilations=(1, 2, 4))
        network = DicnnNetwork(specs, 16, 1)
        config = TrainConfig(batch_size=16, max_epochs=50, patience=50, seed=2)
        train_rows = np.arange(0, 32)
        val_rows = np.arange(32, 40)
        history = train(
            network,
            std[train_rows], one_hot(y[train_rows], 2),
            std[val_rows], y[val_rows],
            config,
        )
        assert max(h["val_accuracy"] for h in history) == 1.0
        assert len(history) <= 50

    def test_patience_zero_stops_after_first_flat_epoch(self, blobs):
        x, y = blobs
        std = (x - x.mean(axis=0)) / x.std(axis=0)
        specs = default_architecture(16, 2, channels=4, kernel_size=3,
                                     dilations=(1,))
        network = DicnnNetwork(specs, 16, 1)
        # vanishing step size: accuracy cannot move, so epoch 1 is flat
        config = TrainConfig(learning_rate=1e-15, batch_size=40, max_epochs=30,
                             patience=0, seed=3)
        history = train(network, std, one_hot(y, 2), std, y, config)
        assert len(history) == 2

    def test_history_bounded_by_max_epochs(self, blobs):
        x, y = blobs
        std = (x - x.mean(axis=0)) / x.std(axis=0)
        specs = default_architecture(16, 2, channels=4, kernel_size=3,
                                     dilations=(1,))
        network = DicnnNetwork(specs, 16, 1)
        config = TrainConfig(batch_size=16, max_epochs=5, patience=99, seed=4)
        history = train(network, std, one_hot(y, 2), std, y, config)
        assert len(history) <= 5
