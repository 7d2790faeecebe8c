import numpy as np
import pytest
import scipy.io.wavfile
from hypothesis import given, settings
from hypothesis import strategies as st

from hdsense import frontend
from hdsense.errors import UnsupportedCodecError, WavFormatError


def naive_dft(x):
    n = len(x)
    k = np.arange(n)
    basis = np.exp(-2j * np.pi * np.outer(k, k) / n)
    return basis @ x


class TestLoadWav:
    def test_silence_pcm16(self, tmp_path):
        path = tmp_path / "silence.wav"
        scipy.io.wavfile.write(path, 22050, np.zeros(22050, dtype=np.int16))
        samples, rate = frontend.load_wav(path)
        assert rate == 22050
        np.testing.assert_array_equal(samples, np.zeros(22050))

    def test_full_scale_square_scaling(self, tmp_path):
        path = tmp_path / "square.wav"
        wave = np.tile([32767, -32768], 100).astype(np.int16)
        scipy.io.wavfile.write(path, 8000, wave)
        samples, _ = frontend.load_wav(path)
        assert samples.min() >= -1.0
        assert samples.max() <= 0.99997
        assert samples.max() == pytest.approx(32767 / 32768)

    def test_stereo_mean_cancellation(self, tmp_path):
        path = tmp_path / "stereo.wav"
        x = (np.random.default_rng(0).integers(-1000, 1000, 500)).astype(np.int16)
        scipy.io.wavfile.write(path, 8000, np.stack([x, -x], axis=1))
        samples, _ = frontend.load_wav(path)
        np.testing.assert_array_equal(samples, np.zeros(500))

    def test_float32_passthrough(self, tmp_path):
        path = tmp_path / "float.wav"
        x = np.linspace(-0.5, 0.5, 256, dtype=np.float32)
        scipy.io.wavfile.write(path, 8000, x)
        samples, _ = frontend.load_wav(path)
        np.testing.assert_allclose(samples, x, atol=1e-7)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            frontend.load_wav(tmp_path / "nope.wav")

    def test_malformed_riff(self, tmp_path):
        path = tmp_path / "bad.wav"
        path.write_bytes(b"definitely not a wav file" * 4)
        with pytest.raises(WavFormatError):
            frontend.load_wav(path)

    def test_unsupported_codec(self, tmp_path):
        path = tmp_path / "u8.wav"
        scipy.io.wavfile.write(path, 8000, np.zeros(100, dtype=np.uint8))
        with pytest.raises(UnsupportedCodecError):
            frontend.load_wav(path)


class TestResample:
    def test_identity_when_rates_equal(self):
        x = np.random.default_rng(1).uniform(-1, 1, 100)
        np.testing.assert_array_equal(frontend.resample_linear(x, 8000, 8000), x)

    def test_constant_stays_constant(self):
        x = np.full(100, 0.3)
        out = frontend.resample_linear(x, 44100, 22050)
        assert len(out) == 50
        np.testing.assert_allclose(out, 0.3)

    def test_nonpositive_rate(self):
        with pytest.raises(ValueError):
            frontend.resample_linear(np.zeros(10), 0, 8000)

    def test_sine_peak_survives_downsampling(self):
        # dominant bin stays at 100 Hz after 44100 -> 22050 resampling
        t = np.arange(44100) / 44100
        x = np.sin(2 * np.pi * 100 * t)
        out = frontend.resample_linear(x, 44100, 22050)
        spectrum = np.abs(naive_dft(out[:1024]))
        peak_bin = int(np.argmax(spectrum[:512]))
        peak_hz = peak_bin * 22050 / 1024
        assert abs(peak_hz - 100) < 22050 / 1024


class TestSegment:
    def test_padding_of_last_window(self):
        segs = frontend.segment(np.ones(10 * 100), 100, 4.0)
        assert len(segs) == 3
        assert segs[2].samples[200:].sum() == 0

    def test_exact_fit_no_padding(self):
        segs = frontend.segment(np.ones(400), 100, 4.0)
        assert len(segs) == 1
        assert segs[0].samples.sum() == 400

    def test_short_input_mostly_zeros(self):
        segs = frontend.segment(np.ones(50), 100, 4.0)
        assert len(segs) == 1
        assert np.mean(segs[0].samples == 0) == pytest.approx(0.875)

    def test_empty_input(self):
        assert frontend.segment(np.array([]), 100, 4.0) == []

    def test_concat_reproduces_original(self):
        x = np.random.default_rng(2).uniform(-1, 1, 973)
        segs = frontend.segment(x, 100, 1.0)
        joined = np.concatenate([s.samples for s in segs])[: len(x)]
        np.testing.assert_array_equal(joined, x)


class TestDft:
    def test_impulse_flat_spectrum(self):
        frame = np.zeros(8)
        frame[0] = 1.0
        np.testing.assert_allclose(frontend.dft_magnitude(frame), np.ones(5), atol=1e-12)

    def test_pure_cosine_single_bin(self):
        n, k = 1024, 37
        frame = np.cos(2 * np.pi * k * np.arange(n) / n)
        mags = frontend.dft_magnitude(frame)
        assert mags[k] == pytest.approx(n / 2)
        others = np.delete(mags, k)
        assert np.max(others) < 1e-8

    def test_matches_naive_dft(self):
        rng = np.random.default_rng(3)
        for n in (8, 64, 256):
            frame = rng.uniform(-1, 1, n)
            expected = np.abs(naive_dft(frame))[: n // 2 + 1]
            np.testing.assert_allclose(frontend.dft_magnitude(frame), expected, atol=1e-6)

    def test_rejects_non_power_of_two(self):
        with pytest.raises(ValueError):
            frontend.dft_magnitude(np.zeros(12))

    def test_parseval(self):
        rng = np.random.default_rng(4)
        x = rng.uniform(-1, 1, 512)
        spectrum = frontend.fft_radix2(x)
        time_energy = np.sum(x ** 2)
        freq_energy = np.sum(np.abs(spectrum) ** 2) / 512
        assert freq_energy == pytest.approx(time_energy, rel=1e-6)


class TestStft:
    def make_segment(self, samples, rate=22050):
        return frontend.AudioSegment(samples=np.clip(samples, -1, 1), sample_rate=rate)

    def test_all_zero_segment_maps_to_zero(self):
        spec = frontend.stft_spectrogram(self.make_segment(np.zeros(22050)), 512, 256)
        np.testing.assert_array_equal(spec.values, 0.0)

    def test_shapes(self):
        spec = frontend.stft_spectrogram(self.make_segment(np.zeros(22050)), 512, 256)
        assert spec.shape == ((22050 - 512) // 256 + 1, 512 // 2 + 1)

    def test_steady_sinusoid_stable_peak(self):
        t = np.arange(22050) / 22050
        seg = self.make_segment(0.5 * np.sin(2 * np.pi * 1000 * t))
        spec = frontend.stft_spectrogram(seg, 512, 256)
        peaks = spec.values.argmax(axis=1)
        assert np.all(peaks == peaks[0])

    def test_white_noise_normalization(self):
        rng = np.random.default_rng(5)
        seg = self.make_segment(rng.uniform(-0.9, 0.9, 22050))
        spec = frontend.stft_spectrogram(seg, 512, 256)
        assert abs(spec.values.mean()) < 1e-6
        assert abs(spec.values.std() - 1.0) < 1e-3
        assert spec.normalized

    def test_deterministic(self):
        rng = np.random.default_rng(6)
        samples = rng.uniform(-0.9, 0.9, 22050)
        a = frontend.stft_spectrogram(self.make_segment(samples), 512, 256)
        b = frontend.stft_spectrogram(self.make_segment(samples), 512, 256)
        np.testing.assert_array_equal(a.values, b.values)

    def test_too_short_segment(self):
        with pytest.raises(ValueError, match="shorter than one"):
            frontend.stft_spectrogram(self.make_segment(np.zeros(100)), 512, 256)

    @given(st.integers(1100, 4000), st.sampled_from([128, 256, 512]), st.data())
    @settings(max_examples=25, deadline=None)
    def test_shape_invariants_hold(self, length, frame_size, data):
        hop = data.draw(st.integers(1, frame_size))
        samples = np.random.default_rng(length).uniform(-0.5, 0.5, length)
        spec = frontend.stft_spectrogram(self.make_segment(samples), frame_size, hop)
        t, f = spec.shape
        assert f == frame_size // 2 + 1
        assert t == (length - frame_size) // hop + 1
