"""Shoebox image-source scenes, Ambisonic encoding and noise injection.

Ground truth is kept exact: every wavefront is a plane wave with a known
direction, time of arrival and frequency-independent gain, and the encoded
signal is the sum of fractionally delayed copies of the source weighted by
the SH vectors of those directions.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile
from scipy.signal import fftconvolve

from .sh import Direction, num_channels, sh_matrix

SPEED_OF_SOUND = 343.0  # m/s

FRAC_DELAY_TAPS = 64


@dataclass(frozen=True)
class Wavefront:
    direction: Direction
    toa: float      # seconds
    gain: float     # linear

    def __post_init__(self):
        if not (math.isfinite(self.gain) and math.isfinite(self.toa)):
            raise ValueError("wavefront gain/toa must be finite")
        if self.toa < 0:
            raise ValueError("time of arrival must be non-negative")


@dataclass(frozen=True)
class GroundTruthScene:
    """Plane-wave decomposition of a shoebox room response.

    `wavefronts` are sorted by time of arrival, index 0 being the direct
    path; `first_order_flags` marks the six single-reflection images.
    """

    wavefronts: tuple
    first_order_flags: tuple
    room: tuple
    src: tuple
    mic: tuple
    rt60: float
    fs: float

    def __post_init__(self):
        toas = [w.toa for w in self.wavefronts]
        if toas != sorted(toas):
            raise ValueError("wavefronts must be sorted by time of arrival")
        if len(self.first_order_flags) != len(self.wavefronts):
            raise ValueError("one flag per wavefront required")

    @property
    def direct(self) -> Wavefront:
        return self.wavefronts[0]

    def first_order_reflections(self):
        return [w for w, f in zip(self.wavefronts, self.first_order_flags) if f]

    def to_json(self) -> str:
        payload = {
            "room_m": list(self.room),
            "src_m": list(self.src),
            "mic_m": list(self.mic),
            "rt60_s": self.rt60,
            "fs_hz": self.fs,
            "wavefronts": [
                {
                    "azimuth_deg": math.degrees(w.direction.azimuth),
                    "elevation_deg": math.degrees(w.direction.elevation),
                    "toa_s": w.toa,
                    "gain": w.gain,
                    "first_order": bool(flag),
                }
                for w, flag in zip(self.wavefronts, self.first_order_flags)
            ],
        }
        return json.dumps(payload, indent=2, sort_keys=True)


@dataclass(frozen=True)
class AmbisonicSignal:
    fs: float
    channels: np.ndarray  # ((L+1)^2, num_samples)

    def __post_init__(self):
        ch = np.asarray(self.channels, dtype=float)
        if ch.ndim != 2:
            raise ValueError("channels must be a 2-D array")
        if self.fs <= 0:
            raise ValueError("sampling rate must be positive")
        object.__setattr__(self, "channels", ch)

    @property
    def num_samples(self) -> int:
        return self.channels.shape[1]


def sabine_reflection_coefficient(room, rt60: float) -> float:
    """Uniform wall reflection coefficient matching the requested RT60."""
    lx, ly, lz = room
    volume = lx * ly * lz
    surface = 2.0 * (lx * ly + lx * lz + ly * lz)
    absorption = 0.161 * volume / (rt60 * surface)
    if absorption >= 1.0:
        warnings.warn("requested RT60 below the Sabine limit of this room; "
                      "walls set fully absorbent")
        return 0.0
    return math.sqrt(1.0 - absorption)


def image_source_scene(room, src, mic, rt60: float, max_order: int,
                       fs: float = 16000.0) -> GroundTruthScene:
    """Enumerate image sources of a shoebox room up to `max_order` reflections.

    Gains are (reflection coefficient)^order / distance, times of arrival are
    distance / c, directions point from the microphone toward each image.
    """
    room = tuple(float(v) for v in room)
    src = np.asarray(src, dtype=float)
    mic = np.asarray(mic, dtype=float)
    if src.shape != (3,) or mic.shape != (3,) or len(room) != 3:
        raise ValueError("room, src and mic must be 3-dimensional")
    for p, name in ((src, "src"), (mic, "mic")):
        if not np.all((p > 0) & (p < np.asarray(room))):
            raise ValueError(f"{name} must lie strictly inside the room")
    if np.allclose(src, mic):
        raise ValueError("source and microphone must not coincide")
    if rt60 <= 0:
        raise ValueError("rt60 must be positive")
    if max_order < 0:
        raise ValueError("max_order must be non-negative")

    beta = sabine_reflection_coefficient(room, rt60)
    dims = np.asarray(room)
    m_max = (max_order + 1) // 2 + 1
    entries = []
    for qx in (0, 1):
        for qy in (0, 1):
            for qz in (0, 1):
                q = np.array([qx, qy, qz])
                for mx in range(-m_max, m_max + 1):
                    for my in range(-m_max, m_max + 1):
                        for mz in range(-m_max, m_max + 1):
                            m = np.array([mx, my, mz])
                            order = int(np.sum(np.abs(m - q) + np.abs(m)))
                            if order > max_order:
                                continue
                            pos = (1 - 2 * q) * src + 2 * m * dims
                            delta = pos - mic
                            dist = float(np.linalg.norm(delta))
                            direction = Direction(
                                math.atan2(delta[1], delta[0]),
                                math.asin(np.clip(delta[2] / dist, -1.0, 1.0)),
                            )
                            gain = beta ** order / dist
                            entries.append(
                                (dist / SPEED_OF_SOUND, Wavefront(
                                    direction, dist / SPEED_OF_SOUND, gain),
                                 order == 1)
                            )
    entries.sort(key=lambda e: e[0])
    wavefronts = tuple(e[1] for e in entries)
    flags = tuple(e[2] for e in entries)
    return GroundTruthScene(wavefronts, flags, room, tuple(src), tuple(mic),
                            rt60, fs)


def fractional_delay_kernel(delay_samples: float, taps: int = FRAC_DELAY_TAPS):
    """Hann-windowed sinc interpolator realizing a non-integer delay.

    Returns (start_index, taps-array): adding taps[i] at output sample
    start_index + i applies the delay. Exact for integer delays.
    """
    half = taps // 2
    n0 = math.floor(delay_samples) - half + 1
    t = n0 + np.arange(taps) - delay_samples  # in (-half, half]
    kernel = np.sinc(t) * (0.5 + 0.5 * np.cos(np.pi * t / half))
    return n0, kernel


def encode_scene(scene: GroundTruthScene, source, order: int) -> AmbisonicSignal:
    """Encode a mono source through the scene's wavefronts into SH channels."""
    source = np.asarray(source, dtype=float)
    if source.ndim != 1 or source.size == 0:
        raise ValueError("source must be a non-empty 1-D signal")
    fs = scene.fs
    max_delay = max(w.toa for w in scene.wavefronts) * fs
    out_len = source.size + int(math.ceil(max_delay)) + FRAC_DELAY_TAPS
    out = np.zeros((num_channels(order), out_len))
    az = np.array([w.direction.azimuth for w in scene.wavefronts])
    el = np.array([w.direction.elevation for w in scene.wavefronts])
    atoms = sh_matrix(az, el, order)
    for j, wave in enumerate(scene.wavefronts):
        n0, kernel = fractional_delay_kernel(wave.toa * fs)
        delayed = fftconvolve(source, kernel)
        start, offset = n0, 0
        if start < 0:
            offset = -start
            start = 0
        seg = delayed[offset:]
        out[:, start:start + seg.size] += (
            wave.gain * np.outer(atoms[:, j], seg))
    return AmbisonicSignal(fs, out)


def add_noise(sig: AmbisonicSignal, snr_db: float, seed: int) -> AmbisonicSignal:
    """Add white Gaussian noise, equal variance on every channel.

    The variance is set against the omnidirectional channel power so that
    omni power / per-channel noise power = 10^(snr_db/10). snr_db=inf is a
    no-noise sentinel.
    """
    if math.isinf(snr_db) and snr_db > 0:
        return AmbisonicSignal(sig.fs, sig.channels.copy())
    power = float(np.mean(sig.channels[0] ** 2))
    if power == 0.0:
        raise ValueError("cannot calibrate noise against an all-zero signal")
    variance = power / 10.0 ** (snr_db / 10.0)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(sig.channels.shape) * math.sqrt(variance)
    return AmbisonicSignal(sig.fs, sig.channels + noise)


def make_burst_source(duration: float, fs: float, seed: int) -> np.ndarray:
    """Nonstationary test source: Gaussian-noise bursts separated by silence.

    Burst lengths are drawn from [0.2, 0.5] s, gaps from [0.05, 0.2] s, with
    short raised-cosine ramps at the burst edges. Deterministic given seed.
    """
    n = int(round(duration * fs))
    rng = np.random.default_rng(seed)
    out = np.zeros(n)
    ramp = max(1, int(0.005 * fs))
    pos = 0
    while pos < n:
        burst_len = int(rng.uniform(0.2, 0.5) * fs)
        amp = rng.uniform(0.5, 1.5)
        end = min(pos + burst_len, n)
        seg = rng.standard_normal(end - pos) * amp
        env = np.ones(end - pos)
        k = min(ramp, env.size // 2)
        if k > 0:
            fade = 0.5 - 0.5 * np.cos(np.pi * np.arange(k) / k)
            env[:k] *= fade
            env[-k:] *= fade[::-1]
        out[pos:end] = seg * env
        pos = end + int(rng.uniform(0.05, 0.2) * fs)
    return out


def write_wav(path, sig: AmbisonicSignal):
    """Write an Ambisonic signal as a multichannel 32-bit float WAV."""
    wavfile.write(path, int(round(sig.fs)),
                  sig.channels.T.astype(np.float32))


def read_wav(path) -> AmbisonicSignal:
    fs, data = wavfile.read(path)
    if data.dtype.kind == "i":
        data = data.astype(np.float64) / float(np.iinfo(data.dtype).max)
    if data.ndim == 1:
        data = data[:, None]
    return AmbisonicSignal(float(fs), np.ascontiguousarray(data.T, dtype=float))
