import numpy as np
import pytest

from hdsense.convnet import (ConvNet, ConvNetConfig, extract_features, forward,
                             gradient_check, train_offline)
from hdsense.errors import NotTrainedError, TrainingError


def naive_conv3x3(x, kernel, bias):
    """Loop-based same-padding 3x3 convolution oracle; x (C,H,W), kernel (Cout,Cin,3,3)."""
    c_in, h, w = x.shape
    c_out = kernel.shape[0]
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    out = np.zeros((c_out, h, w))
    for o in range(c_out):
        for i in range(h):
            for j in range(w):
                out[o, i, j] = np.sum(xp[:, i:i + 3, j:j + 3] * kernel[o]) + bias[o]
    return out


def naive_forward(net, x):
    """Independent loop-based forward oracle for a (H, W) input."""
    a = x[None, :, :]
    for wmat, bias in zip(net.weights, net.biases):
        c_in = a.shape[0]
        c_out = wmat.shape[1]
        # wmat rows are (channel, ki, kj) patches in channel-major order
        kernel = wmat.T.reshape(c_out, c_in, 3, 3)
        a = np.maximum(naive_conv3x3(a, kernel, bias), 0.0)
        c, h, w = a.shape
        h2, w2 = h // 2, w // 2
        pooled = np.zeros((c, h2, w2))
        for i in range(h2):
            for j in range(w2):
                pooled[:, i, j] = a[:, 2 * i:2 * i + 2, 2 * j:2 * j + 2].reshape(c, 4).max(axis=1)
        a = pooled
    return a.mean(axis=(1, 2))


def separable_dataset(n=20, size=16, seed=0):
    rng = np.random.default_rng(seed)
    specs, labels = [], []
    for i in range(n):
        x = rng.normal(0, 0.1, (size, size))
        if i % 2 == 0:
            x[:4, :4] += 2.0
            labels.append(1.0)
        else:
            x[-4:, -4:] += 2.0
            labels.append(0.0)
        specs.append(x)
    return specs, np.array(labels)


class TestForward:
    def test_zero_input_zero_biases_gives_zero_features(self):
        net = ConvNet(ConvNetConfig.default(2))
        feats, _ = forward(net, np.zeros((16, 16)))
        np.testing.assert_array_equal(feats, 0.0)

    def test_matches_naive_oracle(self):
        net = ConvNet(ConvNetConfig(num_conv_layers=2, channels_per_layer=(3, 5), seed=1))
        for b in net.biases:
            b[:] = np.random.default_rng(2).normal(0, 0.1, b.shape)
        x = np.random.default_rng(3).standard_normal((10, 12))
        feats, _ = forward(net, x)
        np.testing.assert_allclose(feats, naive_forward(net, x), atol=1e-10)

    def test_single_identity_kernel_hand_value(self):
        net = ConvNet(ConvNetConfig(num_conv_layers=1, channels_per_layer=(1,), seed=0))
        kernel = np.zeros((9, 1))
        kernel[4, 0] = 1.0  # center tap: convolution acts as identity
        net.weights[0] = kernel
        x = np.arange(64, dtype=float).reshape(8, 8)
        feats, _ = forward(net, x)
        # identity conv -> ReLU (all non-negative) -> 2x2 max -> mean
        pooled = x.reshape(4, 2, 4, 2).transpose(0, 2, 1, 3).reshape(4, 4, 4).max(axis=2)
        assert feats[0] == pytest.approx(pooled.mean())

    def test_final_layer_positive_homogeneity(self):
        net = ConvNet(ConvNetConfig.default(3))
        x = np.random.default_rng(4).standard_normal((24, 24))
        base, _ = forward(net, x)
        net.weights[-1] = net.weights[-1] * 2.5
        scaled, _ = forward(net, x)
        np.testing.assert_allclose(scaled, 2.5 * base, rtol=1e-10)

    def test_bias_perturbation_locality(self):
        net = ConvNet(ConvNetConfig.default(2))
        x = np.abs(np.random.default_rng(5).standard_normal((16, 16)))
        base, _ = forward(net, x)
        net.biases[-1][0] += 1.0
        bumped, _ = forward(net, x)
        assert bumped[0] != base[0]
        np.testing.assert_allclose(bumped[1:], base[1:])

    def test_input_too_small_names_minimum(self):
        net = ConvNet(ConvNetConfig.default(4))
        with pytest.raises(ValueError, match="16x16"):
            forward(net, np.zeros((8, 8)))


class TestTrainOffline:
    def test_lr_zero_leaves_weights_unchanged(self):
        specs, labels = separable_dataset()
        net = ConvNet(ConvNetConfig.default(2))
        before = [p.copy() for p in net.parameters()]
        train_offline(net, specs, labels, epochs=3, lr=0.0)
        for p, q in zip(net.parameters(), before):
            np.testing.assert_array_equal(p, q)

    def test_separable_set_reaches_full_accuracy(self):
        specs, labels = separable_dataset()
        net = ConvNet(ConvNetConfig.default(2))
        train_offline(net, specs, labels, epochs=40, lr=0.05, batch_size=4)
        _, logits = net.forward_batch(np.stack(specs))
        acc = np.mean((logits > 0) == labels.astype(bool))
        assert acc == 1.0

    def test_loss_descends_after_first_epoch(self):
        specs, labels = separable_dataset()
        net = ConvNet(ConvNetConfig.default(2))
        train_offline(net, specs, labels, epochs=2, lr=0.01, batch_size=4)
        assert net.loss_history[1] <= net.loss_history[0]

    def test_single_class_rejected(self):
        specs, _ = separable_dataset()
        net = ConvNet(ConvNetConfig.default(2))
        with pytest.raises(TrainingError, match="both classes"):
            train_offline(net, specs, np.ones(len(specs)), epochs=1)

    @pytest.mark.filterwarnings("ignore:overflow:RuntimeWarning")
    def test_divergence_detected(self):
        specs, labels = separable_dataset()
        net = ConvNet(ConvNetConfig.default(2))
        with pytest.raises(TrainingError, match="diverged"):
            train_offline(net, specs, labels, epochs=50, lr=1e9)

    def test_extract_features_requires_trained(self):
        net = ConvNet(ConvNetConfig.default(2))
        with pytest.raises(NotTrainedError):
            extract_features(net, np.zeros((16, 16)))


class TestGradientCheck:
    def test_two_layer_net_passes(self):
        net = ConvNet(ConvNetConfig(num_conv_layers=2, channels_per_layer=(4, 6), seed=7))
        x = np.random.default_rng(8).standard_normal((12, 12))
        assert gradient_check(net, x, 1.0, seed=0, fraction=0.05) < 1e-4

    def test_saturated_sample_still_passes(self):
        net = ConvNet(ConvNetConfig(num_conv_layers=1, channels_per_layer=(2,), seed=9))
        net.head_w[:] = 50.0  # drive the logit deep into saturation
        x = np.abs(np.random.default_rng(10).standard_normal((8, 8)))
        assert gradient_check(net, x, 1.0, seed=0, fraction=0.2) < 1e-4

    def test_corrupted_gradient_flagged(self):
        net = ConvNet(ConvNetConfig(num_conv_layers=2, channels_per_layer=(4, 6), seed=7))
        x = np.random.default_rng(8).standard_normal((12, 12))
        assert gradient_check(net, x, 1.0, seed=0, fraction=0.05, corruption=0.5) > 1e-2


class TestSerialization:
    def test_round_trip_bit_exact(self, tmp_path):
        specs, labels = separable_dataset()
        net = ConvNet(ConvNetConfig.default(2))
        train_offline(net, specs, labels, epochs=2, lr=0.01)
        path = tmp_path / "net.bin"
        net.save(path)
        loaded = ConvNet.load(path)
        assert loaded.trained
        assert loaded.config == net.config
        for p, q in zip(loaded.parameters(), net.parameters()):
            np.testing.assert_array_equal(p, q)

    def test_shape_check_on_load(self, tmp_path):
        net = ConvNet(ConvNetConfig.default(1))
        path = tmp_path / "net.bin"
        net.save(path)
        import hdsense.container as container
        meta, arrays = container.load_container(path)
        arrays["w0"] = arrays["w0"][:, :-1]
        container.save_container(path, meta, arrays)
        with pytest.raises(ValueError, match="inconsistent"):
            ConvNet.load(path)
