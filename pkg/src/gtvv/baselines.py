"""Comparison methods: omni-referenced H-TDVV and a steered-response-power
direction scan over the same dictionary.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .sh import Dictionary, Direction, make_omni_beam, order_from_channels
from .spectral import GtvvMatrix, SpectrumTensor
from .velocity import EstimatorConfig, estimate_gtvv


@dataclass(frozen=True)
class PowerMap:
    """Steered power per dictionary direction."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if np.any(values < 0):
            raise ValueError("power values must be non-negative")
        object.__setattr__(self, "values", values)


def h_tdvv(spec: SpectrumTensor, cfg: EstimatorConfig) -> GtvvMatrix:
    """GTVV with the omnidirectional channel as reference.

    Identical code path to the steered variant: only the weights change.
    """
    order = order_from_channels(spec.channels)
    return estimate_gtvv(spec, replace(cfg, reference=make_omni_beam(order)))


def srp_map(spec: SpectrumTensor, dictionary: Dictionary) -> PowerMap:
    """Plain steered-response power over the dictionary directions.

    Each frame's contribution is normalized by the frame energy, so the map
    (and its argmax in particular) is invariant to global signal scaling.
    """
    if spec.frames == 0:
        raise ValueError("empty spectrum")
    if dictionary.atoms.shape[0] != spec.channels:
        raise ValueError("dictionary order does not match the spectrum")
    values = np.zeros(len(dictionary))
    for u in range(spec.frames):
        b = spec.data[u]  # bins x channels
        frame_energy = float(np.sum(np.abs(b) ** 2))
        if frame_energy == 0.0:
            continue
        proj = b @ dictionary.atoms  # bins x atoms
        values += np.sum(np.abs(proj) ** 2, axis=0) / frame_energy
    return PowerMap(values)


def srp_doa(pmap: PowerMap, dictionary: Dictionary) -> Direction:
    """Direction of the power-map maximum."""
    return dictionary.directions[int(np.argmax(pmap.values))]
