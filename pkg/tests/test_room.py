import math

import numpy as np
import pytest

from gtvv.room import (SPEED_OF_SOUND, AmbisonicSignal, add_noise,
                       encode_scene, fractional_delay_kernel,
                       image_source_scene, make_burst_source, read_wav,
                       write_wav)
from gtvv.sh import Direction, angular_distance, sh_eval

ROOM = (5.0, 4.0, 2.8)
SRC = (1.0, 1.0, 1.4)
MIC = (3.5, 2.5, 1.4)


class TestImageSourceScene:
    def test_first_order_counts(self):
        scene = image_source_scene(ROOM, SRC, MIC, 0.3, 1)
        assert len(scene.wavefronts) == 7
        assert sum(scene.first_order_flags) == 6
        assert not scene.first_order_flags[0]
        d = np.linalg.norm(np.subtract(SRC, MIC))
        assert scene.direct.toa == pytest.approx(d / SPEED_OF_SOUND)

    def test_order_zero_single_wavefront(self):
        scene = image_source_scene(ROOM, SRC, MIC, 0.3, 0)
        assert len(scene.wavefronts) == 1
        d = np.linalg.norm(np.subtract(SRC, MIC))
        assert scene.direct.gain == pytest.approx(1.0 / d)

    def test_ceiling_image_hand_computed(self):
        scene = image_source_scene(ROOM, SRC, MIC, 0.3, 1)
        # mirror the source across z = 2.8
        img = np.array([1.0, 1.0, 2 * 2.8 - 1.4])
        delta = img - np.asarray(MIC)
        dist = np.linalg.norm(delta)
        expected_dir = Direction(math.atan2(delta[1], delta[0]),
                                 math.asin(delta[2] / dist))
        found = [w for w, f in zip(scene.wavefronts, scene.first_order_flags)
                 if f and w.direction.elevation > 0.1]
        assert len(found) == 1
        assert found[0].toa == pytest.approx(dist / SPEED_OF_SOUND)
        assert angular_distance(found[0].direction, expected_dir) < 1e-12

    def test_direct_has_largest_gain(self):
        scene = image_source_scene(ROOM, SRC, MIC, 0.44, 3)
        gains = [w.gain for w in scene.wavefronts]
        assert gains[0] == max(gains)

    def test_reciprocity(self):
        a = image_source_scene(ROOM, SRC, MIC, 0.3, 2)
        b = image_source_scene(ROOM, MIC, SRC, 0.3, 2)
        np.testing.assert_allclose(sorted(w.toa for w in a.wavefronts),
                                   sorted(w.toa for w in b.wavefronts),
                                   rtol=1e-12)

    def test_sabine_rt60_consistency(self):
        # the image set only covers the decay out to roughly
        # max_order * min(room) / c seconds, so truncate the energy-decay
        # analysis to that window and fit a shallower dB range
        for rt60, max_order in ((0.16, 8), (0.44, 24)):
            scene = image_source_scene(ROOM, SRC, MIC, rt60, max_order)
            fs = 16000.0
            n = int(0.9 * max_order * min(ROOM) / SPEED_OF_SOUND * fs)
            rir = np.zeros(n)
            for w in scene.wavefronts:
                k = int(round(w.toa * fs))
                if k < n:
                    rir[k] += w.gain
            edc = np.cumsum(rir[::-1] ** 2)[::-1]
            edc_db = 10 * np.log10(edc / edc[0] + 1e-300)
            # fit the Schroeder curve between -5 and -20 dB
            t = np.arange(n) / fs
            sel = (edc_db < -5) & (edc_db > -20)
            slope = np.polyfit(t[sel], edc_db[sel], 1)[0]
            rt_est = -60.0 / slope
            assert rt_est == pytest.approx(rt60, rel=0.30)

    def test_geometry_violations(self):
        with pytest.raises(ValueError):
            image_source_scene(ROOM, (0.0, 1, 1), MIC, 0.3, 1)
        with pytest.raises(ValueError):
            image_source_scene(ROOM, SRC, (6.0, 1, 1), 0.3, 1)
        with pytest.raises(ValueError):
            image_source_scene(ROOM, SRC, SRC, 0.3, 1)
        with pytest.raises(ValueError):
            image_source_scene(ROOM, SRC, MIC, -1.0, 1)


class TestFractionalDelay:
    def test_integer_delay_is_exact(self):
        n0, kernel = fractional_delay_kernel(32.0)
        x = np.zeros(80)
        x[n0:n0 + kernel.size] = kernel
        assert x[32] == pytest.approx(1.0)
        assert np.max(np.abs(np.delete(x, 32))) < 1e-15

    def test_fractional_delay_accuracy(self):
        # delay a bandlimited signal and compare against exact resampling
        fs = 16000.0
        t = np.arange(512) / fs
        f0 = 1000.0
        delay = 10.37
        x = np.sin(2 * np.pi * f0 * t)
        n0, kernel = fractional_delay_kernel(delay)
        y = np.convolve(x, kernel)
        expect = np.sin(2 * np.pi * f0 * (t - delay / fs))
        # sample i of the convolution corresponds to output time i + n0
        got = y[np.arange(512) - n0]
        # compare away from the edges
        sel = slice(64, 448)
        err = np.max(np.abs(got[sel] - expect[sel]))
        assert err < 1e-3


class TestEncodeScene:
    def _single_wave_scene(self, toa, gain=1.0, fs=16000.0):
        from gtvv.room import GroundTruthScene, Wavefront
        wf = Wavefront(Direction(0.7, -0.3), toa, gain)
        return GroundTruthScene((wf,), (False,), ROOM, SRC, MIC, 0.3, fs)

    def test_integer_delay_impulse(self):
        fs = 16000.0
        scene = self._single_wave_scene(32.0 / fs)
        src = np.zeros(128)
        src[0] = 1.0
        sig = encode_scene(scene, src, 2)
        y = sh_eval(Direction(0.7, -0.3), 2).coeffs
        np.testing.assert_allclose(sig.channels[:, 32], y, atol=1e-12)
        rest = np.delete(sig.channels, 32, axis=1)
        assert np.max(np.abs(rest)) < 1e-3 * np.max(np.abs(y))

    def test_two_wavefronts_match_convolution_oracle(self):
        from gtvv.room import GroundTruthScene, Wavefront
        fs = 16000.0
        rng = np.random.default_rng(3)
        src = rng.standard_normal(256)
        w0 = Wavefront(Direction(0.0, 0.0), 16.0 / fs, 0.9)
        w1 = Wavefront(Direction(1.0, 0.2), 48.0 / fs, 0.4)
        scene = GroundTruthScene((w0, w1), (False, False), ROOM, SRC, MIC,
                                 0.3, fs)
        sig = encode_scene(scene, src, 0)
        # omni channel = g0 s(t - 16) + g1 s(t - 48)
        expect = np.zeros(sig.num_samples)
        expect[16:16 + 256] += 0.9 * src
        expect[48:48 + 256] += 0.4 * src
        np.testing.assert_allclose(sig.channels[0], expect, atol=1e-12)

    def test_order0_is_multipath_convolution(self):
        fs = 16000.0
        scene = image_source_scene(ROOM, SRC, MIC, 0.3, 1, fs)
        rng = np.random.default_rng(1)
        src = rng.standard_normal(512)
        sig = encode_scene(scene, src, 0)
        expect = np.zeros(sig.num_samples)
        for w in scene.wavefronts:
            n0, kernel = fractional_delay_kernel(w.toa * fs)
            d = np.convolve(src, kernel)
            expect[n0:n0 + d.size] += w.gain * d
        np.testing.assert_allclose(sig.channels[0], expect, atol=1e-12)

    def test_linearity(self):
        fs = 16000.0
        scene = image_source_scene(ROOM, SRC, MIC, 0.3, 1, fs)
        rng = np.random.default_rng(2)
        s1 = rng.standard_normal(300)
        s2 = rng.standard_normal(300)
        a, b = 0.7, -1.3
        lhs = encode_scene(scene, a * s1 + b * s2, 1).channels
        rhs = (a * encode_scene(scene, s1, 1).channels
               + b * encode_scene(scene, s2, 1).channels)
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)

    def test_empty_source(self):
        scene = image_source_scene(ROOM, SRC, MIC, 0.3, 0)
        with pytest.raises(ValueError):
            encode_scene(scene, np.array([]), 1)


class TestAddNoise:
    def _signal(self, seconds=10.0, fs=16000.0):
        rng = np.random.default_rng(0)
        return AmbisonicSignal(fs, rng.standard_normal((4, int(seconds * fs))))

    def test_variance_calibration(self):
        sig = self._signal(1.0)
        power = np.mean(sig.channels[0] ** 2)
        noisy = add_noise(sig, 20.0, 0)
        noise = noisy.channels - sig.channels
        assert np.var(noise) == pytest.approx(power / 100.0, rel=0.05)

    def test_infinite_snr_is_identity(self):
        sig = self._signal(0.1)
        out = add_noise(sig, math.inf, 0)
        np.testing.assert_array_equal(out.channels, sig.channels)

    def test_empirical_snr_within_half_db(self):
        sig = self._signal(10.0)
        noisy = add_noise(sig, 20.0, 1)
        noise = noisy.channels - sig.channels
        p_sig = np.mean(sig.channels[0] ** 2)
        for c in range(4):
            snr = 10 * np.log10(p_sig / np.mean(noise[c] ** 2))
            assert abs(snr - 20.0) < 0.5

    def test_zero_signal_rejected(self):
        sig = AmbisonicSignal(16000.0, np.zeros((4, 100)))
        with pytest.raises(ValueError):
            add_noise(sig, 20.0, 0)

    def test_deterministic(self):
        sig = self._signal(0.5)
        a = add_noise(sig, 20.0, 7)
        b = add_noise(sig, 20.0, 7)
        np.testing.assert_array_equal(a.channels, b.channels)


class TestBurstSource:
    def test_length(self):
        assert make_burst_source(2.0, 16000, 0).size == 32000

    def test_has_silent_gaps(self):
        fs = 16000.0
        x = make_burst_source(5.0, fs, 3)
        frame = int(0.02 * fs)
        rms = np.sqrt(np.mean(
            x[: x.size // frame * frame].reshape(-1, frame) ** 2, axis=1))
        silent = rms < 1e-6
        # count contiguous silent stretches
        gaps = np.sum(np.diff(silent.astype(int)) == 1) + int(silent[0])
        assert gaps >= 3

    def test_nonstationarity(self):
        fs = 16000.0
        frame = int(0.064 * fs)
        x = make_burst_source(5.0, fs, 4)
        rng = np.random.default_rng(5)
        flat = rng.standard_normal(x.size) * np.std(x)

        def frame_power_var(sig):
            n = sig.size // frame * frame
            p = np.mean(sig[:n].reshape(-1, frame) ** 2, axis=1)
            return np.var(p / np.mean(p))

        assert frame_power_var(x) > 10 * frame_power_var(flat)

    def test_deterministic(self):
        np.testing.assert_array_equal(make_burst_source(1.0, 16000, 9),
                                      make_burst_source(1.0, 16000, 9))


class TestWavRoundTrip:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        sig = AmbisonicSignal(16000.0, rng.standard_normal((4, 1000)) * 0.1)
        path = tmp_path / "sig.wav"
        write_wav(path, sig)
        back = read_wav(path)
        assert back.fs == 16000.0
        np.testing.assert_allclose(back.channels, sig.channels, atol=1e-6)
