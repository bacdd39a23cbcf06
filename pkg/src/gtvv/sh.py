"""Real spherical harmonics (ACN/SN3D), direction grids and beamformer weights.

Conventions used throughout the package:

* real-valued spherical harmonics, SN3D normalization, ACN channel ordering
  (channel index ``l*l + l + m``), so the omnidirectional channel of any
  direction equals exactly 1;
* directions as (azimuth, elevation) pairs in radians, azimuth in (-pi, pi]
  counterclockwise from +x, elevation in [-pi/2, pi/2] upward from the xy
  plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import lpmv

MAX_ORDER = 8

# minimum allowed separation between dictionary entries
_MIN_SEPARATION_RAD = math.radians(0.1)

_GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


def num_channels(order: int) -> int:
    """Number of spherical-harmonic channels up to `order` inclusive."""
    return (order + 1) ** 2


def order_from_channels(channels: int) -> int:
    order = int(round(math.sqrt(channels))) - 1
    if num_channels(order) != channels:
        raise ValueError(f"{channels} is not a full-order channel count")
    return order


@dataclass(frozen=True)
class Direction:
    """A point on the unit sphere, normalized on construction."""

    azimuth: float
    elevation: float

    def __post_init__(self):
        az = float(self.azimuth)
        el = float(self.elevation)
        if not (math.isfinite(az) and math.isfinite(el)):
            raise ValueError("direction angles must be finite")
        # fold elevation into [-pi/2, pi/2]; crossing a pole flips azimuth
        el = math.remainder(el, 2.0 * math.pi)
        if el > math.pi / 2.0:
            el = math.pi - el
            az += math.pi
        elif el < -math.pi / 2.0:
            el = -math.pi - el
            az += math.pi
        az = math.remainder(az, 2.0 * math.pi)
        if az <= -math.pi:
            az += 2.0 * math.pi
        object.__setattr__(self, "azimuth", az)
        object.__setattr__(self, "elevation", el)

    def unit_vector(self) -> np.ndarray:
        ce = math.cos(self.elevation)
        return np.array(
            [
                ce * math.cos(self.azimuth),
                ce * math.sin(self.azimuth),
                math.sin(self.elevation),
            ]
        )

    @staticmethod
    def from_unit_vector(v) -> "Direction":
        v = np.asarray(v, dtype=float)
        n = np.linalg.norm(v)
        if n == 0.0:
            raise ValueError("zero vector has no direction")
        v = v / n
        return Direction(math.atan2(v[1], v[0]), math.asin(np.clip(v[2], -1.0, 1.0)))


@dataclass(frozen=True)
class ShVector:
    """SH coefficients of a single direction up to `order` (ACN/SN3D)."""

    order: int
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        if coeffs.shape != (num_channels(self.order),):
            raise ValueError("coefficient length does not match the order")
        object.__setattr__(self, "coeffs", coeffs)


@dataclass(frozen=True)
class BeamWeights:
    """Frequency-independent spatial filter applied to the SH channels."""

    order: int
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (num_channels(self.order),):
            raise ValueError("weight length does not match the order")
        object.__setattr__(self, "weights", w)


def sh_matrix(azimuths, elevations, order: int) -> np.ndarray:
    """Evaluate real SN3D spherical harmonics for arrays of angles.

    Returns an array of shape ((order+1)^2, n) whose column j holds the ACN
    ordered coefficients of direction j.
    """
    if not 0 <= order <= MAX_ORDER:
        raise ValueError(f"order must lie in [0, {MAX_ORDER}], got {order}")
    az = np.atleast_1d(np.asarray(azimuths, dtype=float))
    el = np.atleast_1d(np.asarray(elevations, dtype=float))
    if az.shape != el.shape:
        raise ValueError("azimuth/elevation arrays must have equal shapes")
    x = np.sin(el)
    out = np.empty((num_channels(order), az.size))
    for l in range(order + 1):
        for m in range(-l, l + 1):
            am = abs(m)
            # lpmv carries the Condon-Shortley phase; real SH do not
            leg = (-1.0) ** am * lpmv(am, l, x)
            if m == 0:
                val = leg
            else:
                norm = math.sqrt(
                    2.0 * math.factorial(l - am) / math.factorial(l + am)
                )
                trig = np.cos(am * az) if m > 0 else np.sin(am * az)
                val = norm * leg * trig
            out[l * l + l + m] = val
    return out


def sh_eval(direction: Direction, order: int) -> ShVector:
    """Real SN3D/ACN spherical-harmonic vector of a single direction."""
    coeffs = sh_matrix(direction.azimuth, direction.elevation, order)[:, 0]
    return ShVector(order, coeffs)


def make_reference_beam(direction: Direction, order: int) -> BeamWeights:
    """Maximum-directivity beam at `direction`, normalized to unit gain there.

    The weights are y(dir) / ||y(dir)||^2 so that w . y(dir) == 1, which makes
    the direct-path coefficient of the velocity vector equal to one.
    """
    y = sh_eval(direction, order).coeffs
    return BeamWeights(order, y / float(y @ y))


def make_omni_beam(order: int) -> BeamWeights:
    """Weights selecting the omnidirectional channel only."""
    w = np.zeros(num_channels(order))
    w[0] = 1.0
    return BeamWeights(order, w)


def angular_distance(a: Direction, b: Direction) -> float:
    """Great-circle distance between two directions, in radians."""
    d = float(np.clip(a.unit_vector() @ b.unit_vector(), -1.0, 1.0))
    return math.acos(d)


@dataclass(frozen=True)
class Dictionary:
    """Direction grid and the matrix of its SH atoms (one per column)."""

    order: int
    directions: tuple
    atoms: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        if atoms.shape != (num_channels(self.order), len(self.directions)):
            raise ValueError("atom matrix shape does not match directions/order")
        vecs = np.stack([d.unit_vector() for d in self.directions])
        gram = vecs @ vecs.T
        np.fill_diagonal(gram, -1.0)
        if gram.max() > math.cos(_MIN_SEPARATION_RAD):
            raise ValueError("dictionary directions closer than 0.1 degrees")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "directions", tuple(self.directions))

    def __len__(self):
        return len(self.directions)

    def nearest(self, direction: Direction) -> int:
        """Index of the atom closest to `direction` (great circle)."""
        v = direction.unit_vector()
        dots = np.array([d.unit_vector() @ v for d in self.directions])
        return int(np.argmax(dots))


def fibonacci_directions(count: int) -> list:
    """Quasi-uniform golden-angle spiral on the sphere."""
    dirs = []
    for i in range(count):
        z = 1.0 - 2.0 * (i + 0.5) / count
        az = math.remainder(i * _GOLDEN_ANGLE, 2.0 * math.pi)
        dirs.append(Direction(az, math.asin(z)))
    return dirs


def read_direction_file(path) -> list:
    """Parse a direction-list file: one "azimuth_rad elevation_rad" per line.

    Blank lines and '#' comments are skipped.
    """
    dirs = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected two numbers")
            try:
                az, el = float(parts[0]), float(parts[1])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: malformed number") from exc
            dirs.append(Direction(az, el))
    return dirs


def build_dictionary(count: int, order: int, scheme: str = "fibonacci",
                     path=None) -> Dictionary:
    """Build an SH dictionary over `count` quasi-uniform directions.

    scheme="fibonacci" generates a deterministic spiral grid; scheme="file"
    loads directions from a text file (e.g. a tabulated Lebedev grid), in
    which case `count` must match the number of entries read.
    """
    if count < num_channels(order):
        raise ValueError("dictionary smaller than the SH channel count")
    if scheme == "fibonacci":
        dirs = fibonacci_directions(count)
    elif scheme == "file":
        if path is None:
            raise ValueError("scheme='file' requires a path")
        dirs = read_direction_file(path)
        if len(dirs) != count:
            raise ValueError(
                f"direction file holds {len(dirs)} entries, expected {count}"
            )
    else:
        raise ValueError(f"unknown dictionary scheme {scheme!r}")
    az = np.array([d.azimuth for d in dirs])
    el = np.array([d.elevation for d in dirs])
    return Dictionary(order, tuple(dirs), sh_matrix(az, el, order))
