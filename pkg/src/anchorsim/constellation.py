"""Walker-delta shell geometry, +Grid inter-satellite topology, visibility.

Positions are kilometres in an Earth-centred Earth-fixed frame over a
spherical Earth. Orbits are circular; at epoch 0 the inertial and rotating
frames coincide, so later epochs only differ by Earth rotation and in-plane
mean motion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import CoverageGapError, InputError

EARTH_RADIUS_KM = 6371.0
LIGHT_SPEED_KM_S = 299792.458
EARTH_ROTATION_RAD_S = 7.2921159e-5
MU_EARTH_KM3_S2 = 398600.4418


@dataclass(frozen=True)
class OrbitalShell:
    """One circular Walker-delta shell.

    plane_count ascending nodes are spread evenly over 360 deg of RAAN;
    slots within a plane are spread evenly in phase, with adjacent planes
    shifted by phase_offset of one in-plane slot spacing.
    """

    plane_count: int
    sats_per_plane: int
    altitude_km: float
    inclination_deg: float
    phase_offset: float = 0.5

    def __post_init__(self) -> None:
        if self.plane_count < 1 or self.sats_per_plane < 1:
            raise InputError("shell needs at least one plane and one slot per plane")
        if self.altitude_km <= 0:
            raise InputError(f"altitude must be positive, got {self.altitude_km}")
        if not 0.0 <= self.inclination_deg <= 180.0:
            raise InputError(f"inclination out of [0, 180]: {self.inclination_deg}")
        if not 0.0 <= self.phase_offset < 1.0:
            raise InputError(f"phase offset out of [0, 1): {self.phase_offset}")

    @property
    def size(self) -> int:
        return self.plane_count * self.sats_per_plane

    @property
    def radius_km(self) -> float:
        return EARTH_RADIUS_KM + self.altitude_km

    @property
    def mean_motion_rad_s(self) -> float:
        return math.sqrt(MU_EARTH_KM3_S2 / self.radius_km**3)


@dataclass(frozen=True)
class EcefPosition:
    x_km: float
    y_km: float
    z_km: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x_km, self.y_km, self.z_km])

    def distance_to(self, other: "EcefPosition") -> float:
        return math.dist(
            (self.x_km, self.y_km, self.z_km), (other.x_km, other.y_km, other.z_km)
        )


@dataclass(frozen=True)
class GroundSite:
    """A named point on the ground (station, user position, or server)."""

    id: str
    lat_deg: float
    lon_deg: float

    def __post_init__(self) -> None:
        if not self.id:
            raise InputError("ground site id must be non-empty")
        if not -90.0 <= self.lat_deg <= 90.0:
            raise InputError(f"latitude out of [-90, 90]: {self.lat_deg}")
        if not -180.0 <= self.lon_deg <= 180.0:
            raise InputError(f"longitude out of [-180, 180]: {self.lon_deg}")

    def ecef(self) -> EcefPosition:
        x, y, z = _site_xyz(self.lat_deg, self.lon_deg)
        return EcefPosition(x, y, z)


@dataclass(frozen=True)
class VisibilityPolicy:
    min_elevation_deg: float = 25.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.min_elevation_deg < 90.0:
            raise InputError(
                f"elevation mask out of [0, 90): {self.min_elevation_deg}"
            )


@dataclass(frozen=True, eq=False)
class IslGraph:
    """+Grid topology over a shell: ring in-plane, ring across planes.

    Node index is plane * sats_per_plane + slot. Every node has exactly
    four neighbours (front/rear in its plane, left/right across planes);
    the edge set is time-invariant even though edge lengths are not.
    """

    plane_count: int
    sats_per_plane: int
    edges: tuple[tuple[int, int], ...]

    @property
    def node_count(self) -> int:
        return self.plane_count * self.sats_per_plane

    def node(self, plane: int, slot: int) -> int:
        if not 0 <= plane < self.plane_count or not 0 <= slot < self.sats_per_plane:
            raise InputError(f"satellite ({plane}, {slot}) out of range")
        return plane * self.sats_per_plane + slot

    def neighbors(self, node: int) -> dict[str, int]:
        """Map role -> neighbour index for one satellite."""
        if not 0 <= node < self.node_count:
            raise InputError(f"node {node} out of range")
        p, s = divmod(node, self.sats_per_plane)
        return {
            "front": p * self.sats_per_plane + (s + 1) % self.sats_per_plane,
            "rear": p * self.sats_per_plane + (s - 1) % self.sats_per_plane,
            "right": ((p + 1) % self.plane_count) * self.sats_per_plane + s,
            "left": ((p - 1) % self.plane_count) * self.sats_per_plane + s,
        }


def build_isl_topology(shell: OrbitalShell) -> IslGraph:
    """Build the 4-regular +Grid graph for a shell.

    Requires at least 3 planes and 3 slots per plane so the two rings are
    simple cycles (no self loops or doubled edges).
    """
    if shell.plane_count < 3 or shell.sats_per_plane < 3:
        raise InputError("+Grid needs plane_count >= 3 and sats_per_plane >= 3")
    p_count, s_count = shell.plane_count, shell.sats_per_plane
    edges = []
    for p in range(p_count):
        for s in range(s_count):
            node = p * s_count + s
            edges.append((node, p * s_count + (s + 1) % s_count))
            edges.append((node, ((p + 1) % p_count) * s_count + s))
    canon = sorted({(min(u, v), max(u, v)) for u, v in edges})
    return IslGraph(p_count, s_count, tuple(canon))


def satellite_position(
    shell: OrbitalShell, plane: int, slot: int, epoch_s: float
) -> EcefPosition:
    """ECEF position of one satellite at an epoch (seconds since 0)."""
    if not 0 <= plane < shell.plane_count:
        raise InputError(f"plane {plane} out of range")
    if not 0 <= slot < shell.sats_per_plane:
        raise InputError(f"slot {slot} out of range")
    pos = shell_positions(shell, float(epoch_s))
    x, y, z = pos[plane * shell.sats_per_plane + slot]
    return EcefPosition(float(x), float(y), float(z))


@lru_cache(maxsize=512)
def shell_positions(shell: OrbitalShell, epoch_s: float) -> np.ndarray:
    """ECEF positions of the whole shell, shape (size, 3), row-indexed by node."""
    r = shell.radius_km
    inc = math.radians(shell.inclination_deg)
    planes = np.arange(shell.plane_count)
    slots = np.arange(shell.sats_per_plane)
    raan = 2.0 * math.pi * planes / shell.plane_count
    phase = (
        2.0 * math.pi
        * (slots[None, :] + shell.phase_offset * planes[:, None])
        / shell.sats_per_plane
        + shell.mean_motion_rad_s * epoch_s
    )
    cos_u, sin_u = np.cos(phase), np.sin(phase)
    cos_o, sin_o = np.cos(raan)[:, None], np.sin(raan)[:, None]
    cos_i, sin_i = math.cos(inc), math.sin(inc)
    x_eci = r * (cos_o * cos_u - sin_o * sin_u * cos_i)
    y_eci = r * (sin_o * cos_u + cos_o * sin_u * cos_i)
    z_eci = r * (sin_u * sin_i)
    theta = EARTH_ROTATION_RAD_S * epoch_s
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    x = cos_t * x_eci + sin_t * y_eci
    y = -sin_t * x_eci + cos_t * y_eci
    out = np.stack([x, y, z_eci], axis=-1).reshape(shell.size, 3)
    out.setflags(write=False)
    return out


def _site_xyz(lat_deg: float, lon_deg: float) -> tuple[float, float, float]:
    lat, lon = math.radians(lat_deg), math.radians(lon_deg)
    return (
        EARTH_RADIUS_KM * math.cos(lat) * math.cos(lon),
        EARTH_RADIUS_KM * math.cos(lat) * math.sin(lon),
        EARTH_RADIUS_KM * math.sin(lat),
    )


@lru_cache(maxsize=65536)
def _site_elevations(
    site: GroundSite, shell: OrbitalShell, epoch_s: float
) -> np.ndarray:
    """Elevation in degrees of every satellite as seen from a site."""
    sat = shell_positions(shell, epoch_s)
    p = np.array(_site_xyz(site.lat_deg, site.lon_deg))
    d = sat - p
    d_norm = np.linalg.norm(d, axis=1)
    # elevation = angle of the line-of-sight vector above the local horizon
    sin_el = (d @ (p / EARTH_RADIUS_KM)) / d_norm
    out = np.degrees(np.arcsin(np.clip(sin_el, -1.0, 1.0)))
    out.setflags(write=False)
    return out


def visible_satellites(
    site: GroundSite,
    shell: OrbitalShell,
    epoch_s: float,
    policy: VisibilityPolicy = VisibilityPolicy(),
) -> list[tuple[int, float]]:
    """(node, elevation_deg) for every satellite above the mask.

    Sorted by descending elevation, ties by ascending node index.
    """
    elev = _site_elevations(site, shell, float(epoch_s))
    idx = np.nonzero(elev >= policy.min_elevation_deg)[0]
    pairs = [(int(i), float(elev[i])) for i in idx]
    pairs.sort(key=lambda t: (-t[1], t[0]))
    return pairs


def access_satellite(
    site: GroundSite,
    shell: OrbitalShell,
    epoch_s: float,
    policy: VisibilityPolicy = VisibilityPolicy(),
) -> int:
    """Highest-elevation visible satellite (lowest index on exact ties)."""
    vis = visible_satellites(site, shell, epoch_s, policy)
    if not vis:
        raise CoverageGapError(
            f"no satellite above {policy.min_elevation_deg} deg elevation "
            f"for {site.id} at epoch {epoch_s}"
        )
    return vis[0][0]


def link_delay_ms(a: EcefPosition, b: EcefPosition) -> float:
    """One-way propagation delay of a line-of-sight link, in milliseconds."""
    return a.distance_to(b) / LIGHT_SPEED_KM_S * 1000.0


def slant_range_km(altitude_km: float, elevation_deg: float) -> float:
    """Ground-to-satellite distance at a given elevation (law of cosines)."""
    if altitude_km <= 0:
        raise InputError("altitude must be positive")
    if not 0.0 <= elevation_deg <= 90.0:
        raise InputError("elevation out of [0, 90]")
    r, a = EARTH_RADIUS_KM, EARTH_RADIUS_KM + altitude_km
    el = math.radians(elevation_deg)
    # solve |sat - site| from the triangle centre / site / satellite
    return -r * math.sin(el) + math.sqrt(a * a - (r * math.cos(el)) ** 2)
