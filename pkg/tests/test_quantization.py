import numpy as np
import pytest

from hdsense.convnet import ConvNet, ConvNetConfig, extract_features_batch, train_offline
from hdsense.errors import NotCalibratedError, NotTrainedError
from hdsense.quantization import (QuantizedConvNet, calibrate, dequantize_tensor,
                                  forward_int8, quantize_int8, quantize_tensor)


@pytest.fixture(scope="module")
def trained_net():
    rng = np.random.default_rng(0)
    specs, labels = [], []
    for i in range(24):
        x = rng.normal(0, 0.1, (16, 16))
        if i % 2 == 0:
            x[:4, :4] += 2.0
        else:
            x[-4:, -4:] += 2.0
        specs.append(x)
        labels.append(float(i % 2 == 0))
    net = ConvNet(ConvNetConfig.default(2))
    train_offline(net, specs, np.array(labels), epochs=15, lr=0.05, batch_size=4)
    return net, specs


class TestQuantizeTensor:
    def test_exact_round_trip_for_grid_weights(self):
        step = 0.003
        w = np.array([-127, -40, 0, 13, 127]) * step  # exact multiples of the step
        q, scale = quantize_tensor(w)
        assert scale == pytest.approx(step)
        np.testing.assert_allclose(dequantize_tensor(q, scale), w, atol=1e-12)

    def test_rounding_bound(self):
        rng = np.random.default_rng(1)
        w = rng.standard_normal((50, 7))
        q, scale = quantize_tensor(w)
        assert np.max(np.abs(dequantize_tensor(q, scale) - w)) <= scale / 2 + 1e-12

    def test_all_zero_tensor_scale_one(self):
        q, scale = quantize_tensor(np.zeros((3, 3)))
        assert scale == 1.0
        assert q.dtype == np.int8
        np.testing.assert_array_equal(q, 0)


class TestQuantizedNet:
    def test_requires_trained(self):
        with pytest.raises(NotTrainedError):
            quantize_int8(ConvNet(ConvNetConfig.default(1)))

    def test_every_weight_within_one_step(self, trained_net):
        net, specs = trained_net
        qnet = quantize_int8(net, specs)
        for wq, s, w in zip(qnet.weights_q, qnet.weight_scales, net.weights):
            assert np.max(np.abs(dequantize_tensor(wq, s) - w)) <= s / 2 + 1e-12

    def test_uncalibrated_forward_rejected(self, trained_net):
        net, specs = trained_net
        qnet = quantize_int8(net)
        with pytest.raises(NotCalibratedError):
            forward_int8(qnet, specs[0])

    def test_zero_input_gives_zero_features_with_zero_biases(self, trained_net):
        net, specs = trained_net
        qnet = quantize_int8(net, specs)
        qnet.biases = [np.zeros_like(b) for b in qnet.biases]
        feats = forward_int8(qnet, np.zeros((16, 16)))
        np.testing.assert_array_equal(feats, 0.0)

    def test_deterministic(self, trained_net):
        net, specs = trained_net
        qnet = quantize_int8(net, specs)
        a = forward_int8(qnet, specs[0])
        b = forward_int8(qnet, specs[0])
        np.testing.assert_array_equal(a, b)

    def test_int8_features_close_to_float(self, trained_net):
        net, specs = trained_net
        qnet = quantize_int8(net, specs)
        float_feats = extract_features_batch(net, specs)
        int8_feats = np.stack([forward_int8(qnet, s) for s in specs])
        scale = np.abs(float_feats).max()
        rel = np.abs(int8_feats - float_feats).max() / scale
        assert rel < 0.1

    def test_serialization_round_trip(self, trained_net, tmp_path):
        net, specs = trained_net
        qnet = quantize_int8(net, specs)
        path = tmp_path / "qnet.bin"
        qnet.save(path)
        loaded = QuantizedConvNet.load(path)
        np.testing.assert_array_equal(loaded.weights_q[0], qnet.weights_q[0])
        assert loaded.weight_scales == qnet.weight_scales
        assert loaded.act_scales == qnet.act_scales
        np.testing.assert_array_equal(forward_int8(loaded, specs[0]),
                                      forward_int8(qnet, specs[0]))
