import math

import numpy as np
import pytest

from gtvv.errors import InconsistentSpectrumError
from gtvv.room import AmbisonicSignal
from gtvv.sh import Direction, sh_eval
from gtvv.spectral import GtvvMatrix, gfvv_to_gtvv, make_time_axis, stft

FS = 16000.0


def make_signal(data):
    return AmbisonicSignal(FS, np.atleast_2d(np.asarray(data, dtype=float)))


class TestStft:
    def test_paper_framing(self):
        sig = make_signal(np.random.default_rng(0).standard_normal(32000))
        spec = stft(sig, int(0.064 * FS))
        assert spec.win_len == 1024
        assert spec.hop == 256
        assert spec.bins == 513
        assert spec.frames == (32000 - 1024) // 256 + 1

    def test_pure_cosine_magnitude(self):
        win = 1024
        k = 100
        amp = 0.7
        t = np.arange(4 * win)
        sig = make_signal(amp * np.cos(2 * np.pi * k * t / win))
        spec = stft(sig, win)
        frame = np.abs(spec.data[0, :, 0])
        assert np.argmax(frame) == k
        coherent_gain = np.mean(np.hamming(win))
        expected = coherent_gain * amp * win / 2
        assert frame[k] == pytest.approx(expected, rel=0.01)

    def test_zero_signal(self):
        spec = stft(make_signal(np.zeros(4096)), 1024)
        assert np.all(spec.data == 0)

    def test_too_short(self):
        with pytest.raises(ValueError):
            stft(make_signal(np.zeros(512)), 1024)

    def test_bad_window(self):
        sig = make_signal(np.zeros(4096))
        with pytest.raises(ValueError):
            stft(sig, 1000)
        with pytest.raises(ValueError):
            stft(sig, 1024, hop=300)

    def test_parseval_per_frame(self):
        win = 256
        rng = np.random.default_rng(1)
        x = rng.standard_normal(4 * win)
        spec = stft(make_signal(x), win, hop=win)
        w = np.hamming(win)
        for u in range(spec.frames):
            frame = x[u * win:(u + 1) * win] * w
            X = spec.data[u, :, 0]
            two_sided = 2 * np.sum(np.abs(X) ** 2) \
                - np.abs(X[0]) ** 2 - np.abs(X[-1]) ** 2
            assert two_sided / win == pytest.approx(np.sum(frame ** 2),
                                                    rel=1e-6)


class TestGfvvToGtvv:
    def test_constant_spectrum_is_t0_spike(self):
        win = 1024
        y = sh_eval(Direction(0.4, 0.1), 2).coeffs
        v_f = np.tile(y[:, None], (1, win // 2 + 1)).astype(complex)
        v = gfvv_to_gtvv(v_f, win, FS)
        zero = v.zero_index
        assert v.time_axis[zero] == 0.0
        np.testing.assert_allclose(v.data[:, zero], y, atol=1e-12)
        off = np.delete(v.data, zero, axis=1)
        assert np.max(np.abs(off)) < 1e-12

    def test_shift_theorem(self):
        win = 1024
        tau = 32.0 / FS  # 2 ms
        f = np.arange(win // 2 + 1) * FS / win
        v_f = np.exp(-2j * np.pi * f * tau)[None, :]
        v = gfvv_to_gtvv(v_f, win, FS)
        peak = int(np.argmax(np.abs(v.data[0])))
        assert v.time_axis[peak] == pytest.approx(0.002)

    def test_round_trip(self):
        win = 512
        rng = np.random.default_rng(2)
        v_f = rng.standard_normal((4, win // 2 + 1)) \
            + 1j * rng.standard_normal((4, win // 2 + 1))
        v_f[:, 0] = v_f[:, 0].real
        v_f[:, -1] = v_f[:, -1].real
        v = gfvv_to_gtvv(v_f, win, FS)
        back = np.fft.rfft(np.roll(v.data, -win // 2, axis=1), axis=1)
        np.testing.assert_allclose(back, v_f, atol=1e-10)

    def test_linearity(self):
        win = 256
        rng = np.random.default_rng(3)

        def rand_vf():
            v = rng.standard_normal((2, win // 2 + 1)) \
                + 1j * rng.standard_normal((2, win // 2 + 1))
            v[:, 0] = v[:, 0].real
            v[:, -1] = v[:, -1].real
            return v

        a_f, b_f = rand_vf(), rand_vf()
        lhs = gfvv_to_gtvv(2.0 * a_f - 0.5 * b_f, win, FS).data
        rhs = (2.0 * gfvv_to_gtvv(a_f, win, FS).data
               - 0.5 * gfvv_to_gtvv(b_f, win, FS).data)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_inconsistent_spectrum_raises(self):
        win = 256
        v_f = np.ones((1, win // 2 + 1), dtype=complex)
        v_f[0, 0] = 1j  # complex DC cannot come from a real response
        with pytest.raises(InconsistentSpectrumError):
            gfvv_to_gtvv(v_f, win, FS)

    def test_time_axis_zero_column(self):
        axis = make_time_axis(1024, FS)
        assert axis[512] == 0.0
        assert axis[511] < 0.0
        v = GtvvMatrix(np.zeros((1, 1024)), axis, FS)
        assert v.zero_index == 512


class TestGtvvMatrix:
    def test_requires_zero_in_axis(self):
        axis = make_time_axis(64, FS) + 1e-6
        with pytest.raises(ValueError):
            GtvvMatrix(np.zeros((1, 64)), axis, FS)

    def test_requires_increasing_axis(self):
        axis = np.zeros(64)
        with pytest.raises(ValueError):
            GtvvMatrix(np.zeros((1, 64)), axis, FS)
