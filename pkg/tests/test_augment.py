"""Augmentation transforms: closed forms, lengths, chain behavior."""

import numpy as np
import pytest

from melmask.augment import (
    AugmentationConfig,
    add_delay,
    add_noise,
    apply_gain,
    augment,
    first_order_filter,
    no_augmentation,
    pitch_shift,
    polarity_inversion,
)
from melmask.dsp import Waveform


def noise_burst(n=4096, seed=0, amp=0.4):
    rng = np.random.default_rng(seed)
    return rng.uniform(-amp, amp, size=n)


class TestIndividualTransforms:
    def test_polarity_is_exact_negation(self):
        x = noise_burst()
        np.testing.assert_array_equal(polarity_inversion(x), -x)

    def test_double_polarity_identity(self):
        x = noise_burst()
        np.testing.assert_array_equal(polarity_inversion(polarity_inversion(x)), x)

    def test_gain_closed_form(self):
        x = noise_burst()
        y = apply_gain(x, -6.02)
        np.testing.assert_allclose(y, x * 10 ** (-6.02 / 20), rtol=1e-15)
        assert 10 ** (-6.02 / 20) == pytest.approx(0.5, abs=1e-3)

    def test_zero_gain_identity(self):
        x = noise_burst()
        np.testing.assert_array_equal(apply_gain(x, 0.0), x)

    def test_noise_snr_statistics(self):
        x = np.sin(2 * np.pi * 440 * np.arange(32768) / 16000) * 0.5
        rng = np.random.default_rng(42)
        y = add_noise(x, 20.0, rng)
        noise = y - x
        measured = 10 * np.log10(np.mean(x**2) / np.mean(noise**2))
        assert measured == pytest.approx(20.0, abs=0.5)

    def test_noise_on_silence_is_noop(self):
        x = np.zeros(100)
        y = add_noise(x, 20.0, np.random.default_rng(0))
        np.testing.assert_array_equal(y, x)

    def test_lowpass_attenuates_high_frequency(self):
        sr = 16000
        t = np.arange(8192) / sr
        low = np.sin(2 * np.pi * 100 * t)
        high = np.sin(2 * np.pi * 6000 * t)
        y_low = first_order_filter(low, sr, 1000.0, "lowpass")
        y_high = first_order_filter(high, sr, 1000.0, "lowpass")
        assert np.std(y_low) > 0.5 * np.std(low)
        assert np.std(y_high) < 0.5 * np.std(high)

    def test_highpass_attenuates_low_frequency(self):
        sr = 16000
        t = np.arange(8192) / sr
        low = np.sin(2 * np.pi * 60 * t)
        high = np.sin(2 * np.pi * 4000 * t)
        y_low = first_order_filter(low, sr, 800.0, "highpass")
        y_high = first_order_filter(high, sr, 800.0, "highpass")
        assert np.std(y_low) < 0.5 * np.std(low)
        assert np.std(y_high) > 0.5 * np.std(high)

    def test_filter_complementary(self):
        # First-order low and high branches split the signal exactly.
        x = noise_burst()
        lo = first_order_filter(x, 16000, 900.0, "lowpass")
        hi = first_order_filter(x, 16000, 900.0, "highpass")
        np.testing.assert_allclose(lo + hi, x, atol=1e-12)

    def test_delay_closed_form(self):
        x = np.zeros(1000)
        x[0] = 0.5
        y = add_delay(x, 1000, 250, 0.5)
        # 250 ms at 1 kHz is exactly 250 samples.
        assert y[0] == pytest.approx(0.5)
        assert y[250] == pytest.approx(0.25)
        assert np.count_nonzero(y) == 2
        assert len(y) == len(x)

    def test_delay_rescales_to_prevent_clipping(self):
        x = np.ones(100) * 0.9
        y = add_delay(x, 1000, 10, 0.5)
        assert np.max(np.abs(y)) <= 1.0 + 1e-12

    def test_pitch_shift_preserves_length(self):
        x = noise_burst(5000)
        for st in (-5, -1, 0, 3, 5):
            assert len(pitch_shift(x, st)) == 5000

    def test_pitch_shift_zero_identity(self):
        x = noise_burst(2048)
        np.testing.assert_allclose(pitch_shift(x, 0), x, atol=1e-12)

    def test_pitch_shift_moves_frequency(self):
        sr = 16000
        t = np.arange(16384) / sr
        x = np.sin(2 * np.pi * 1000 * t)
        y = pitch_shift(x, 12)
        spec_x = np.abs(np.fft.rfft(x))
        spec_y = np.abs(np.fft.rfft(y[: len(x)]))
        fx = np.argmax(spec_x) * sr / len(x)
        fy = np.argmax(spec_y) * sr / len(x)
        assert fy == pytest.approx(2 * fx, rel=0.05)


class TestChain:
    def test_all_zero_probabilities_identity(self):
        w = Waveform(noise_burst(), 16000)
        out = augment(w, no_augmentation(), np.random.default_rng(0))
        np.testing.assert_array_equal(out.samples, w.samples)
        assert out.sample_rate == w.sample_rate

    def test_polarity_only(self):
        w = Waveform(noise_burst(), 16000)
        cfg = AugmentationConfig(
            polarity_prob=1.0, noise_prob=0.0, gain_prob=0.0,
            filter_prob=0.0, delay_prob=0.0, pitch_prob=0.0,
        )
        out = augment(w, cfg, np.random.default_rng(0))
        np.testing.assert_array_equal(out.samples, -w.samples)

    def test_gain_only_closed_form(self):
        w = Waveform(noise_burst(), 16000)
        cfg = AugmentationConfig(
            polarity_prob=0.0, noise_prob=0.0, gain_prob=1.0,
            gain_db=(-6.02, -6.02),
            filter_prob=0.0, delay_prob=0.0, pitch_prob=0.0,
        )
        out = augment(w, cfg, np.random.default_rng(0))
        np.testing.assert_allclose(out.samples, w.samples * 10 ** (-6.02 / 20), rtol=1e-12)

    def test_length_preserved_under_full_chain(self):
        w = Waveform(noise_burst(16000), 16000)
        cfg = AugmentationConfig(
            polarity_prob=1.0, noise_prob=1.0, gain_prob=1.0,
            filter_prob=1.0, delay_prob=1.0, pitch_prob=1.0,
        )
        for seed in range(5):
            out = augment(w, cfg, np.random.default_rng(seed))
            assert len(out) == len(w)
            assert np.all(np.isfinite(out.samples))

    def test_seeded_chain_reproducible(self):
        w = Waveform(noise_burst(8192), 16000)
        cfg = AugmentationConfig()
        a = augment(w, cfg, np.random.default_rng(99)).samples
        b = augment(w, cfg, np.random.default_rng(99)).samples
        np.testing.assert_array_equal(a, b)

    def test_invalid_probability_rejected(self):
        with pytest.raises(ValueError):
            AugmentationConfig(noise_prob=1.5)

    def test_inverted_range_rejected(self):
        with pytest.raises(ValueError):
            AugmentationConfig(gain_db=(0.0, -6.0))
