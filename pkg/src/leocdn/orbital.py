"""Satellite and ground-station positions in an Earth-fixed frame.

Models a Walker-style constellation of circular orbits: planes are spread
evenly in right ascension, satellites evenly in anomaly within each plane.
The Earth is a rotating sphere; positions come out in the Earth-centered
Earth-fixed (ECEF) frame so ground stations are stationary.

Conventions: angles are degrees at the API boundary and radians
internally; lengths are meters. At t=0 the Greenwich meridian coincides
with the inertial x-axis, so the ECEF and inertial frames agree there.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError

EARTH_RADIUS_M = 6_371_000.0
EARTH_MU = 3.986004418e14          # m³/s² gravitational parameter
EARTH_ROTATION_PERIOD_S = 86_400.0


@dataclass(frozen=True)
class ConstellationConfig:
    """Geometry of the constellation. Defaults are the 1,584-satellite
    = 24x66 Starlink phase I shell at 550 km and 53° inclination.

    The default inter-plane anomaly stagger is the Walker delta F=1 value
    for this shell, 360/1584 degrees. Zero stagger would put satellites of
    opposing planes through the same point at every track crossing."""

    num_planes: int = 24
    sats_per_plane: int = 66
    altitude_m: float = 550_000.0
    inclination_deg: float = 53.0
    raan_spread_deg: float = 360.0            # total right-ascension span of planes
    phasing_offset_deg: float = 360.0 / 1584  # anomaly offset between adjacent planes
    earth_radius_m: float = EARTH_RADIUS_M
    earth_mu: float = EARTH_MU
    earth_rotation_period_s: float = EARTH_ROTATION_PERIOD_S

    def __post_init__(self):
        if self.num_planes < 1 or self.sats_per_plane < 1:
            raise ConfigError(
                f"need at least one plane and one satellite per plane, got "
                f"{self.num_planes}x{self.sats_per_plane}"
            )
        if self.altitude_m <= 0:
            raise ConfigError(f"altitude must be positive, got {self.altitude_m}")
        if not 0.0 <= self.inclination_deg <= 180.0:
            raise ConfigError(
                f"inclination must lie in [0, 180] degrees, got {self.inclination_deg}"
            )
        if self.earth_mu <= 0 or self.earth_radius_m <= 0:
            raise ConfigError("earth radius and mu must be positive")
        if self.earth_rotation_period_s <= 0:
            raise ConfigError("earth rotation period must be positive")

    @property
    def num_satellites(self) -> int:
        return self.num_planes * self.sats_per_plane

    @property
    def orbit_radius_m(self) -> float:
        return self.earth_radius_m + self.altitude_m


class SatelliteId(NamedTuple):
    """Identity of one satellite; orders lexicographically by (plane, slot)."""

    plane: int
    slot: int

    def flat(self, config: ConstellationConfig) -> int:
        """Dense plane-major index in [0, num_satellites)."""
        return self.plane * config.sats_per_plane + self.slot


def satellite_from_flat(config: ConstellationConfig, index: int) -> SatelliteId:
    """Inverse of SatelliteId.flat."""
    if not 0 <= index < config.num_satellites:
        raise ValueError(f"flat satellite index {index} out of range")
    return SatelliteId(index // config.sats_per_plane, index % config.sats_per_plane)


class EcefPoint(NamedTuple):
    """Position in the Earth-centered Earth-fixed frame, meters."""

    x: float
    y: float
    z: float

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)


def orbital_period(config: ConstellationConfig) -> float:
    """Circular-orbit period in seconds, T = 2*pi*sqrt(a^3 / mu)."""
    a = config.orbit_radius_m
    return 2.0 * math.pi * math.sqrt(a * a * a / config.earth_mu)


def _check_satellite_id(config: ConstellationConfig, sat: SatelliteId) -> None:
    if not (0 <= sat.plane < config.num_planes and 0 <= sat.slot < config.sats_per_plane):
        raise ValueError(
            f"satellite id {sat} out of range for "
            f"{config.num_planes}x{config.sats_per_plane} constellation"
        )


def plane_raan_rad(config: ConstellationConfig, plane: int) -> float:
    """Right ascension of a plane's ascending node."""
    return math.radians(config.raan_spread_deg) * plane / config.num_planes


def _anomaly_rad(config: ConstellationConfig, sat: SatelliteId, t: float) -> float:
    """Argument of latitude (angle from the ascending node) at time t."""
    base = 2.0 * math.pi * sat.slot / config.sats_per_plane
    phased = base + math.radians(config.phasing_offset_deg) * sat.plane
    return phased + 2.0 * math.pi * t / orbital_period(config)


def earth_rotation_angle_rad(config: ConstellationConfig, t: float) -> float:
    return 2.0 * math.pi * t / config.earth_rotation_period_s


def satellite_position_inertial(
    config: ConstellationConfig, sat: SatelliteId, t: float
) -> EcefPoint:
    """Inertial-frame position; periodic in the orbital period."""
    _check_satellite_id(config, sat)
    if t < 0:
        raise ValueError(f"time must be non-negative, got {t}")
    r = config.orbit_radius_m
    u = _anomaly_rad(config, sat, t)
    raan = plane_raan_rad(config, sat.plane)
    inc = math.radians(config.inclination_deg)
    cos_u, sin_u = math.cos(u), math.sin(u)
    cos_o, sin_o = math.cos(raan), math.sin(raan)
    cos_i, sin_i = math.cos(inc), math.sin(inc)
    x = r * (cos_u * cos_o - sin_u * cos_i * sin_o)
    y = r * (cos_u * sin_o + sin_u * cos_i * cos_o)
    z = r * sin_u * sin_i
    return EcefPoint(x, y, z)


def satellite_position(
    config: ConstellationConfig, sat: SatelliteId, t: float
) -> EcefPoint:
    """ECEF position at time t: the inertial position rotated back by the
    Earth rotation angle."""
    xi, yi, zi = satellite_position_inertial(config, sat, t)
    theta = earth_rotation_angle_rad(config, t)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    # Rz(-theta)
    return EcefPoint(xi * cos_t + yi * sin_t, -xi * sin_t + yi * cos_t, zi)


def satellite_positions_array(config: ConstellationConfig, t: float) -> np.ndarray:
    """ECEF positions of all satellites at time t as an (S, 3) array in
    plane-major order. Vectorized equivalent of satellite_position."""
    if t < 0:
        raise ValueError(f"time must be non-negative, got {t}")
    planes = np.repeat(np.arange(config.num_planes), config.sats_per_plane)
    slots = np.tile(np.arange(config.sats_per_plane), config.num_planes)
    r = config.orbit_radius_m
    u = (
        2.0 * np.pi * slots / config.sats_per_plane
        + np.radians(config.phasing_offset_deg) * planes
        + 2.0 * np.pi * t / orbital_period(config)
    )
    raan = np.radians(config.raan_spread_deg) * planes / config.num_planes
    inc = math.radians(config.inclination_deg)
    cos_u, sin_u = np.cos(u), np.sin(u)
    cos_o, sin_o = np.cos(raan), np.sin(raan)
    cos_i, sin_i = math.cos(inc), math.sin(inc)
    xi = r * (cos_u * cos_o - sin_u * cos_i * sin_o)
    yi = r * (cos_u * sin_o + sin_u * cos_i * cos_o)
    zi = r * sin_u * sin_i
    theta = earth_rotation_angle_rad(config, t)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    out = np.empty((config.num_satellites, 3))
    out[:, 0] = xi * cos_t + yi * sin_t
    out[:, 1] = -xi * sin_t + yi * cos_t
    out[:, 2] = zi
    return out


def ground_station_position(
    lat_deg: float, lon_deg: float, config: ConstellationConfig
) -> EcefPoint:
    """ECEF position of a point on the spherical Earth surface."""
    if not -90.0 <= lat_deg <= 90.0:
        raise ValueError(f"latitude must lie in [-90, 90], got {lat_deg}")
    if not -180.0 <= lon_deg <= 180.0:
        raise ValueError(f"longitude must lie in [-180, 180], got {lon_deg}")
    lat = math.radians(lat_deg)
    lon = math.radians(lon_deg)
    r = config.earth_radius_m
    return EcefPoint(
        r * math.cos(lat) * math.cos(lon),
        r * math.cos(lat) * math.sin(lon),
        r * math.sin(lat),
    )


def elevation_angle(gst: EcefPoint, sat: EcefPoint) -> float:
    """Elevation of the line of sight from a surface point to a satellite,
    in degrees above the local horizon plane. 90° at zenith, negative when
    the satellite is below the horizon."""
    los = (sat.x - gst.x, sat.y - gst.y, sat.z - gst.z)
    los_norm = math.sqrt(los[0] ** 2 + los[1] ** 2 + los[2] ** 2)
    gst_norm = gst.norm()
    if los_norm == 0.0 or gst_norm == 0.0:
        raise ValueError("coincident or degenerate points have no elevation")
    up_dot_los = (gst.x * los[0] + gst.y * los[1] + gst.z * los[2]) / gst_norm
    s = up_dot_los / los_norm
    s = max(-1.0, min(1.0, s))
    return math.degrees(math.asin(s))
