"""STFT front-end and the inverse transform from GFVV to GTVV.

The time axis of a GTVV matrix is fixed here once: a length-T analysis
window maps to lags (index - T/2) / fs, so column T/2 (0-indexed) is t = 0
and column T/2 - 1 is the last negative lag. Downstream code reads delays
off `time_axis`, never off raw column indices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InconsistentSpectrumError
from .room import AmbisonicSignal

_IMAG_RESIDUE_TOL = 1e-8


@dataclass(frozen=True)
class SpectrumTensor:
    """STFT of all SH channels: data[frame, bin, channel]."""

    data: np.ndarray
    fs: float
    win_len: int
    hop: int

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        if data.ndim != 3:
            raise ValueError("spectrum data must be frames x bins x channels")
        if not np.all(np.isfinite(data)):
            raise ValueError("spectrum data must be finite")
        if data.shape[1] != self.win_len // 2 + 1:
            raise ValueError("bin count must equal win_len/2 + 1")
        object.__setattr__(self, "data", data)

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def bins(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class GtvvMatrix:
    """Time-domain velocity vector: data[channel, lag] over `time_axis`."""

    data: np.ndarray
    time_axis: np.ndarray
    fs: float

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        axis = np.asarray(self.time_axis, dtype=float)
        if data.ndim != 2 or data.shape[1] != axis.size:
            raise ValueError("data columns must match the time axis length")
        if np.any(np.diff(axis) <= 0):
            raise ValueError("time axis must be strictly increasing")
        if not np.any(axis == 0.0):
            raise ValueError("time axis must contain t = 0 exactly")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "time_axis", axis)

    @property
    def zero_index(self) -> int:
        return int(np.nonzero(self.time_axis == 0.0)[0][0])

    @property
    def win_len(self) -> int:
        return self.data.shape[1]


def make_time_axis(win_len: int, fs: float) -> np.ndarray:
    return (np.arange(win_len) - win_len // 2) / fs


def stft(sig: AmbisonicSignal, win_len: int, hop: int = None) -> SpectrumTensor:
    """Hamming-windowed one-sided STFT of every channel.

    Frame u starts at sample u*hop; hop defaults to win_len/4 (75% overlap).
    """
    if win_len <= 0 or (win_len & (win_len - 1)) != 0:
        raise ValueError("win_len must be a power of two")
    if hop is None:
        hop = win_len // 4
    if hop <= 0 or win_len % hop != 0:
        raise ValueError("hop must divide win_len")
    n = sig.num_samples
    if n < win_len:
        raise ValueError("signal shorter than one analysis window")
    window = np.hamming(win_len)
    num_frames = (n - win_len) // hop + 1
    starts = np.arange(num_frames) * hop
    frames = np.stack([sig.channels[:, s:s + win_len] for s in starts])
    spec = np.fft.rfft(frames * window, axis=-1)  # (frames, channels, bins)
    return SpectrumTensor(np.transpose(spec, (0, 2, 1)), sig.fs, win_len, hop)


def gfvv_to_gtvv(v_f: np.ndarray, win_len: int, fs: float) -> GtvvMatrix:
    """Inverse transform of a one-sided GFVV to the lag domain.

    The one-sided spectrum (channels x (T/2+1)) is Hermitian-extended,
    inverse-DFT'd and circularly shifted so that columns cover the lags
    (index - T/2)/fs. An imaginary residue above 1e-8 relative signals an
    inconsistent spectrum and raises.
    """
    v_f = np.asarray(v_f, dtype=complex)
    if v_f.ndim != 2 or v_f.shape[1] != win_len // 2 + 1:
        raise ValueError("expected channels x (win_len/2 + 1) spectrum")
    if not np.all(np.isfinite(v_f)):
        raise ValueError("spectrum must be finite")
    full = np.empty((v_f.shape[0], win_len), dtype=complex)
    full[:, : v_f.shape[1]] = v_f
    full[:, v_f.shape[1]:] = np.conj(v_f[:, -2:0:-1])
    x = np.fft.ifft(full, axis=1)
    scale = float(np.max(np.abs(x)))
    if scale > 0 and float(np.max(np.abs(x.imag))) > _IMAG_RESIDUE_TOL * scale:
        raise InconsistentSpectrumError(
            "non-negligible imaginary residue after the inverse transform")
    data = np.roll(x.real, win_len // 2, axis=1)
    return GtvvMatrix(data, make_time_axis(win_len, fs), fs)
