"""Deployment geometry, local coordinate frames, and geodetic ground-truth conversion.

All positions are meters in a local Cartesian frame (x east-ish, y north-ish,
z up).  Survey fixes arrive as WGS-84 geodetic coordinates and are converted
to ENU, then aligned to the local frame with a rigid transform fitted from
tie points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# WGS-84 ellipsoid
WGS84_A = 6378137.0
WGS84_F = 1.0 / 298.257223563
WGS84_E2 = WGS84_F * (2.0 - WGS84_F)

# Free-space propagation speed used for delay <-> range conversion
DEFAULT_PROPAGATION_SPEED = 3.0e8


class DegenerateGeometry(ValueError):
    """Tie points or antenna layout do not constrain the requested fit."""


@dataclass(frozen=True)
class Position:
    """A point in the local Cartesian frame, meters."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.z)):
            raise ValueError(f"non-finite position {(self.x, self.y, self.z)}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    def distance_to(self, other: "Position") -> float:
        dx = self.x - other.x
        dy = self.y - other.y
        dz = self.z - other.z
        return math.sqrt(dx * dx + dy * dy + dz * dz)


@dataclass(frozen=True, order=True)
class AntennaId:
    """Identifies one antenna as (radio unit index, antenna index within unit)."""

    ru_index: int
    antenna_index: int

    def __post_init__(self):
        if self.ru_index < 0 or self.antenna_index < 0:
            raise ValueError(f"negative antenna id {(self.ru_index, self.antenna_index)}")


@dataclass(frozen=True)
class RadioUnit:
    """One radio unit: its antenna positions and the reference antenna used for differencing."""

    antennas: tuple[Position, ...]
    reference_index: int = 0

    def __post_init__(self):
        if len(self.antennas) < 2:
            raise ValueError("a radio unit needs at least 2 antennas")
        if not 0 <= self.reference_index < len(self.antennas):
            raise ValueError(f"reference index {self.reference_index} out of range")


@dataclass(frozen=True)
class DeploymentGeometry:
    """Full deployment: radio units with antennas, plus the propagation speed."""

    rus: tuple[RadioUnit, ...]
    propagation_speed: float = DEFAULT_PROPAGATION_SPEED

    def __post_init__(self):
        if self.propagation_speed <= 0:
            raise ValueError("propagation speed must be positive")
        if self.total_antennas < 3:
            raise ValueError("need at least 3 antennas in total for 2D solving")

    @property
    def total_antennas(self) -> int:
        return sum(len(ru.antennas) for ru in self.rus)

    def antenna_ids(self) -> list[AntennaId]:
        """All antenna ids in stable (ru_index, antenna_index) order."""
        return [
            AntennaId(k, m)
            for k, ru in enumerate(self.rus)
            for m in range(len(ru.antennas))
        ]

    def antenna_position(self, antenna: AntennaId) -> Position:
        try:
            return self.rus[antenna.ru_index].antennas[antenna.antenna_index]
        except IndexError:
            raise KeyError(f"unknown antenna {antenna}") from None

    def reference_antenna(self, ru_index: int) -> AntennaId:
        return AntennaId(ru_index, self.rus[ru_index].reference_index)

    def antenna_array(self) -> np.ndarray:
        """Antenna coordinates as an (M, 3) array in antenna_ids() order."""
        return np.array(
            [self.antenna_position(a).as_array() for a in self.antenna_ids()]
        )


@dataclass(frozen=True)
class GeodeticFix:
    """WGS-84 geodetic coordinates; altitude is ellipsoidal, meters."""

    latitude: float
    longitude: float
    altitude: float

    def __post_init__(self):
        if abs(self.latitude) > 90.0:
            raise ValueError(f"latitude {self.latitude} out of range")
        if abs(self.longitude) > 180.0:
            raise ValueError(f"longitude {self.longitude} out of range")


@dataclass(frozen=True)
class AffineAlignment:
    """Rigid transform p -> R p + t between the ENU frame and the local frame."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=float)
        t = np.asarray(self.translation, dtype=float)
        if r.shape != (3, 3) or t.shape != (3,):
            raise ValueError("alignment needs a 3x3 rotation and a 3-vector translation")
        if not np.allclose(r.T @ r, np.eye(3), atol=1e-9):
            raise ValueError("rotation is not orthonormal")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "AffineAlignment":
        return cls(np.eye(3), np.zeros(3))

    def inverse(self) -> "AffineAlignment":
        return AffineAlignment(self.rotation.T, -self.rotation.T @ self.translation)


def _geodetic_to_ecef(fix: GeodeticFix) -> np.ndarray:
    lat = math.radians(fix.latitude)
    lon = math.radians(fix.longitude)
    n = WGS84_A / math.sqrt(1.0 - WGS84_E2 * math.sin(lat) ** 2)
    x = (n + fix.altitude) * math.cos(lat) * math.cos(lon)
    y = (n + fix.altitude) * math.cos(lat) * math.sin(lon)
    z = (n * (1.0 - WGS84_E2) + fix.altitude) * math.sin(lat)
    return np.array([x, y, z])


def geodetic_to_enu(fix: GeodeticFix, origin: GeodeticFix) -> Position:
    """Convert a geodetic fix to East-North-Up coordinates relative to ``origin``.

    Uses the geodetic -> ECEF -> ENU chain on the WGS-84 ellipsoid.
    """
    d = _geodetic_to_ecef(fix) - _geodetic_to_ecef(origin)
    lat = math.radians(origin.latitude)
    lon = math.radians(origin.longitude)
    sin_lat, cos_lat = math.sin(lat), math.cos(lat)
    sin_lon, cos_lon = math.sin(lon), math.cos(lon)
    east = -sin_lon * d[0] + cos_lon * d[1]
    north = -sin_lat * cos_lon * d[0] - sin_lat * sin_lon * d[1] + cos_lat * d[2]
    up = cos_lat * cos_lon * d[0] + cos_lat * sin_lon * d[1] + sin_lat * d[2]
    return Position(east, north, up)


def fit_alignment(pairs: list[tuple[Position, Position]]) -> AffineAlignment:
    """Fit the rigid transform mapping ENU points onto local points.

    Least-squares rotation + translation (no scale) minimizing
    sum ||R*enu + t - local||^2 over the tie points.

    Parameters
    ----------
    pairs : list of (enu, local) Position pairs, at least 3, not collinear.
    """
    if len(pairs) < 3:
        raise DegenerateGeometry("need at least 3 tie points")
    enu = np.array([p[0].as_array() for p in pairs])
    loc = np.array([p[1].as_array() for p in pairs])
    c_enu = enu.mean(axis=0)
    c_loc = loc.mean(axis=0)
    h = (enu - c_enu).T @ (loc - c_loc)
    u, s, vt = np.linalg.svd(h)
    # collinear tie points leave the rotation about their axis unconstrained
    spread = np.linalg.svd(enu - c_enu, compute_uv=False)
    if spread[1] <= 1e-9 * max(spread[0], 1.0):
        raise DegenerateGeometry("tie points are collinear")
    d = np.sign(np.linalg.det(vt.T @ u.T))
    rot = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    t = c_loc - rot @ c_enu
    return AffineAlignment(rot, t)


def apply_alignment(alignment: AffineAlignment, p: Position) -> Position:
    """Map ``p`` through the rigid transform: R*p + t."""
    out = alignment.rotation @ p.as_array() + alignment.translation
    return Position(out[0], out[1], out[2])


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box of the deployment, used to constrain the solver."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != (3,) or hi.shape != (3,):
            raise ValueError("bounds are 3-vectors")
        if np.any(lo > hi):
            raise ValueError("lower bound exceeds upper bound")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def contains(self, p: Position, atol: float = 0.0) -> bool:
        a = p.as_array()
        return bool(np.all(a >= self.lo - atol) and np.all(a <= self.hi + atol))

    def expanded(self, margin: float) -> "BoundingBox":
        return BoundingBox(self.lo - margin, self.hi + margin)


def bounding_region(geometry: DeploymentGeometry, margin: float = 0.0) -> BoundingBox:
    """Component-wise min/max box over all antenna positions, optionally expanded."""
    coords = geometry.antenna_array()
    box = BoundingBox(coords.min(axis=0), coords.max(axis=0))
    if margin:
        box = box.expanded(margin)
    return box


def inside_antenna_hull(geometry: DeploymentGeometry, p: Position) -> bool:
    """Diagnostic: is the x-y projection of ``p`` inside the antennas' convex hull?

    The solver constraint stays the axis-aligned box; this predicate is only
    for reporting and test sweeps.  Falls back to the 1D span for collinear
    layouts.
    """
    from scipy.spatial import Delaunay, QhullError

    xy = geometry.antenna_array()[:, :2]
    try:
        tri = Delaunay(xy)
    except QhullError:
        lo, hi = xy.min(axis=0), xy.max(axis=0)
        a = p.as_array()[:2]
        return bool(np.all(a >= lo - 1e-9) and np.all(a <= hi + 1e-9))
    return bool(tri.find_simplex([p.x, p.y]) >= 0)
