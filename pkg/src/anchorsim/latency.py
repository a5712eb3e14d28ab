"""End-to-end latency: uplink + ISL shortest path + downlink + terrestrial tail.

The in-network part is minimized jointly over the exit satellite: entry is
pinned to the user's access satellite, but any satellite visible to the
ground anchor may terminate the space segment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .constellation import (
    EARTH_RADIUS_KM,
    LIGHT_SPEED_KM_S,
    GroundSite,
    IslGraph,
    OrbitalShell,
    VisibilityPolicy,
    access_satellite,
    build_isl_topology,
    shell_positions,
)
from .errors import CoverageGapError, InputError

SCHEMES = ("standard", "standard-gs", "standard-sat", "skyoctopus")


@dataclass(frozen=True)
class TerrestrialModel:
    """Great-circle fibre model for the anchor-to-server tail."""

    medium_speed_km_s: float = LIGHT_SPEED_KM_S * 2.0 / 3.0
    inflation: float = 1.4
    fixed_overhead_ms: float = 1.5

    def __post_init__(self) -> None:
        if self.medium_speed_km_s <= 0:
            raise InputError("medium speed must be positive")
        if self.inflation < 1.0:
            raise InputError(f"path inflation below 1: {self.inflation}")
        if self.fixed_overhead_ms < 0:
            raise InputError("fixed overhead must be non-negative")


@dataclass(frozen=True)
class PathResult:
    """One end-to-end measurement, decomposed."""

    total_ms: float
    intra_ms: float
    inter_ms: float
    anchor_id: str
    hops: tuple[int, ...]


def great_circle_km(a: GroundSite, b: GroundSite) -> float:
    """Haversine distance on the spherical Earth."""
    la1, lo1 = math.radians(a.lat_deg), math.radians(a.lon_deg)
    la2, lo2 = math.radians(b.lat_deg), math.radians(b.lon_deg)
    s = (
        math.sin((la2 - la1) / 2.0) ** 2
        + math.cos(la1) * math.cos(la2) * math.sin((lo2 - lo1) / 2.0) ** 2
    )
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(s)))


@lru_cache(maxsize=262144)
def terrestrial_latency_ms(
    anchor: GroundSite, server: GroundSite, model: TerrestrialModel = TerrestrialModel()
) -> float:
    """Inflated great-circle propagation plus a fixed processing overhead."""
    gc = great_circle_km(anchor, server)
    return gc / model.medium_speed_km_s * model.inflation * 1000.0 + model.fixed_overhead_ms


@lru_cache(maxsize=64)
def _edge_arrays(isl: IslGraph) -> tuple[np.ndarray, np.ndarray]:
    e = np.asarray(isl.edges, dtype=np.int32)
    return e[:, 0], e[:, 1]


@lru_cache(maxsize=256)
def _weighted_graph(
    shell: OrbitalShell, isl: IslGraph, epoch_s: float
) -> csr_matrix:
    pos = shell_positions(shell, epoch_s)
    u, v = _edge_arrays(isl)
    w = np.linalg.norm(pos[u] - pos[v], axis=1) / LIGHT_SPEED_KM_S * 1000.0
    n = isl.node_count
    rows = np.concatenate([u, v])
    cols = np.concatenate([v, u])
    data = np.concatenate([w, w])
    return csr_matrix((data, (rows, cols)), shape=(n, n))


@lru_cache(maxsize=8192)
def _sssp(
    shell: OrbitalShell, isl: IslGraph, epoch_s: float, source: int
) -> tuple[np.ndarray, np.ndarray]:
    """Single-source shortest path delays (ms) over the ISL mesh."""
    graph = _weighted_graph(shell, isl, epoch_s)
    dist, pred = dijkstra(graph, indices=source, return_predecessors=True)
    dist.setflags(write=False)
    pred.setflags(write=False)
    return dist, pred


def _walk_back(pred: np.ndarray, source: int, target: int) -> tuple[int, ...]:
    hops = [target]
    while hops[-1] != source:
        prev = int(pred[hops[-1]])
        if prev < 0:
            raise InputError("no ISL path between satellites")
        hops.append(prev)
    hops.reverse()
    return tuple(hops)


def _check_isl(shell: OrbitalShell, isl: IslGraph) -> None:
    if (isl.plane_count, isl.sats_per_plane) != (
        shell.plane_count,
        shell.sats_per_plane,
    ):
        raise InputError("ISL graph does not match the shell dimensions")


def isl_path_ms(
    shell: OrbitalShell,
    isl: IslGraph,
    a: int,
    b: int,
    epoch_s: float,
) -> tuple[float, tuple[int, ...]]:
    """Minimum-delay ISL route between two satellites at one epoch."""
    _check_isl(shell, isl)
    if not 0 <= a < isl.node_count or not 0 <= b < isl.node_count:
        raise InputError("satellite index out of range")
    dist, pred = _sssp(shell, isl, float(epoch_s), a)
    return float(dist[b]), _walk_back(pred, a, b)


def _exit_nodes(
    site: GroundSite, shell: OrbitalShell, epoch_s: float, policy: VisibilityPolicy
) -> np.ndarray:
    """Node indices visible from a site, ascending, as a read-only array."""
    return _exit_nodes_cached(site, shell, epoch_s, policy)


@lru_cache(maxsize=65536)
def _exit_nodes_cached(
    site: GroundSite, shell: OrbitalShell, epoch_s: float, policy: VisibilityPolicy
) -> np.ndarray:
    from .constellation import _site_elevations

    elev = _site_elevations(site, shell, epoch_s)
    nodes = np.nonzero(elev >= policy.min_elevation_deg)[0]
    nodes.setflags(write=False)
    return nodes


def _best_exit(
    dist: np.ndarray,
    pos: np.ndarray,
    nodes: np.ndarray,
    site_xyz: np.ndarray,
) -> tuple[int, float]:
    """Exit node minimizing ISL distance plus downlink; lowest index on ties."""
    downs = np.linalg.norm(pos[nodes] - site_xyz, axis=1) / LIGHT_SPEED_KM_S * 1000.0
    costs = dist[nodes] + downs
    best = float(costs.min())
    node = int(nodes[costs == best].min())
    return node, best


@lru_cache(maxsize=262144)
def intra_network_latency(
    user: GroundSite,
    anchor: GroundSite,
    shell: OrbitalShell,
    isl: IslGraph,
    epoch_s: float,
    policy: VisibilityPolicy = VisibilityPolicy(),
) -> tuple[float, tuple[int, ...]]:
    """User -> access sat -> ISL route -> exit sat -> anchor, in milliseconds.

    Exit satellite and route are chosen jointly to minimize the sum of the
    ISL path and the downlink to the anchor; ties fall to the lowest exit
    index. Raises CoverageGapError when either endpoint sees no satellite.
    """
    _check_isl(shell, isl)
    epoch_s = float(epoch_s)
    entry = access_satellite(user, shell, epoch_s, policy)
    nodes = _exit_nodes(anchor, shell, epoch_s, policy)
    if nodes.size == 0:
        raise CoverageGapError(
            f"no satellite above {policy.min_elevation_deg} deg elevation "
            f"for {anchor.id} at epoch {epoch_s}"
        )
    pos = shell_positions(shell, epoch_s)
    dist, pred = _sssp(shell, isl, epoch_s, entry)
    best_exit, best_cost = _best_exit(dist, pos, nodes, anchor.ecef().as_array())
    up = float(np.linalg.norm(pos[entry] - user.ecef().as_array())) / LIGHT_SPEED_KM_S * 1000.0
    return up + best_cost, _walk_back(pred, entry, best_exit)


def end_to_end_latency(
    user: GroundSite,
    anchor: GroundSite,
    server: GroundSite,
    shell: OrbitalShell,
    isl: IslGraph,
    epoch_s: float,
    policy: VisibilityPolicy = VisibilityPolicy(),
    model: TerrestrialModel = TerrestrialModel(),
) -> PathResult:
    """Full user-to-server latency through one ground anchor."""
    intra, hops = intra_network_latency(user, anchor, shell, isl, epoch_s, policy)
    inter = terrestrial_latency_ms(anchor, server, model)
    return PathResult(intra + inter, intra, inter, anchor.id, hops)


def best_anchor(
    user: GroundSite,
    server: GroundSite,
    anchors: tuple[GroundSite, ...],
    shell: OrbitalShell,
    isl: IslGraph,
    epoch_s: float,
    policy: VisibilityPolicy = VisibilityPolicy(),
    model: TerrestrialModel = TerrestrialModel(),
) -> PathResult:
    """Minimum end-to-end latency over the deployed anchors.

    Anchors with no visible satellite are skipped; if every anchor is dark
    the coverage gap propagates. Exact ties go to the lexicographically
    smallest anchor id.
    """
    if not anchors:
        raise InputError("anchor set must be non-empty")
    best: PathResult | None = None
    gaps = 0
    for anchor in sorted(anchors, key=lambda a: a.id):
        try:
            res = end_to_end_latency(
                user, anchor, server, shell, isl, epoch_s, policy, model
            )
        except CoverageGapError:
            gaps += 1
            continue
        if best is None or res.total_ms < best.total_ms:
            best = res
    if best is None:
        raise CoverageGapError(
            f"all {gaps} anchors lack satellite coverage at epoch {epoch_s}"
        )
    return best


def intra_latency_map(
    user: GroundSite,
    sites: tuple[GroundSite, ...],
    shell: OrbitalShell,
    isl: IslGraph,
    epoch_s: float,
    policy: VisibilityPolicy = VisibilityPolicy(),
) -> dict[str, float]:
    """Intra-network latency from one user to many ground sites.

    Reuses a single shortest-path tree. Sites in a coverage gap map to inf
    rather than raising, so callers can rank whatever is reachable.
    """
    _check_isl(shell, isl)
    epoch_s = float(epoch_s)
    access_satellite(user, shell, epoch_s, policy)  # user-side gap raises
    out: dict[str, float] = {}
    for site in sites:
        try:
            out[site.id], _hops = intra_network_latency(
                user, site, shell, isl, epoch_s, policy
            )
        except CoverageGapError:
            out[site.id] = math.inf
    return out


def _nearest_site(
    point: GroundSite, sites: tuple[GroundSite, ...]
) -> GroundSite:
    if not sites:
        raise InputError("site set must be non-empty")
    return min(sites, key=lambda s: (great_circle_km(point, s), s.id))


def _cluster_anchor_node(shell: OrbitalShell, cluster_count: int, entry: int) -> int:
    """Designated satellite of the plane block containing a given node.

    Planes are split into cluster_count contiguous, near-equal blocks; the
    designated satellite sits at the middle plane of the block, middle slot.
    """
    if not 1 <= cluster_count <= shell.plane_count:
        raise InputError(
            f"cluster count out of [1, {shell.plane_count}]: {cluster_count}"
        )
    plane = entry // shell.sats_per_plane
    bounds = np.linspace(0, shell.plane_count, cluster_count + 1).astype(int)
    block = int(np.searchsorted(bounds, plane, side="right")) - 1
    lo, hi = int(bounds[block]), int(bounds[block + 1])
    mid_plane = lo + (hi - lo) // 2
    return mid_plane * shell.sats_per_plane + shell.sats_per_plane // 2


def scheme_latency(
    scheme: str,
    user: GroundSite,
    server: GroundSite,
    anchors: tuple[GroundSite, ...],
    shell: OrbitalShell,
    isl: IslGraph,
    epoch_s: float,
    policy: VisibilityPolicy = VisibilityPolicy(),
    model: TerrestrialModel = TerrestrialModel(),
    *,
    stations: tuple[GroundSite, ...] | None = None,
    registered_position: GroundSite | None = None,
    establishment_position: GroundSite | None = None,
    sat_cluster_count: int | None = None,
) -> PathResult:
    """Latency of one sample under one anchor-selection scheme.

    standard      anchor nearest the user's registered position, held fixed
    standard-gs   ground station nearest the user at establishment, held fixed
    standard-sat  designated satellite of the access sat's plane block, then
                  down at the station nearest its subpoint
    skyoctopus    per-sample best deployed anchor
    """
    if scheme not in SCHEMES:
        raise InputError(f"unknown scheme {scheme!r}, expected one of {SCHEMES}")
    if scheme == "skyoctopus":
        return best_anchor(user, server, anchors, shell, isl, epoch_s, policy, model)
    if scheme == "standard":
        ref = registered_position or user
        fixed = _nearest_site(ref, anchors)
        return end_to_end_latency(
            user, fixed, server, shell, isl, epoch_s, policy, model
        )
    if scheme == "standard-gs":
        pool = stations if stations is not None else anchors
        ref = establishment_position or user
        fixed = _nearest_site(ref, pool)
        return end_to_end_latency(
            user, fixed, server, shell, isl, epoch_s, policy, model
        )
    # standard-sat
    pool = stations if stations is not None else anchors
    if not pool:
        raise InputError("standard-sat needs at least one ground station")
    clusters = sat_cluster_count if sat_cluster_count is not None else max(1, len(anchors))
    _check_isl(shell, isl)
    epoch_s = float(epoch_s)
    entry = access_satellite(user, shell, epoch_s, policy)
    anchor_node = _cluster_anchor_node(shell, clusters, entry)
    pos = shell_positions(shell, epoch_s)
    dist, pred = _sssp(shell, isl, epoch_s, entry)
    sx, sy, sz = pos[anchor_node]
    sub = GroundSite(
        "subpoint",
        math.degrees(math.asin(sz / math.sqrt(sx * sx + sy * sy + sz * sz))),
        math.degrees(math.atan2(sy, sx)),
    )
    station = _nearest_site(sub, pool)
    up = float(np.linalg.norm(pos[entry] - user.ecef().as_array())) / LIGHT_SPEED_KM_S * 1000.0
    down = float(np.linalg.norm(pos[anchor_node] - station.ecef().as_array())) / LIGHT_SPEED_KM_S * 1000.0
    intra = up + float(dist[anchor_node]) + down
    inter = terrestrial_latency_ms(station, server, model)
    return PathResult(
        intra + inter, intra, inter, station.id, _walk_back(pred, entry, anchor_node)
    )


def default_isl(shell: OrbitalShell) -> IslGraph:
    """Convenience cached topology builder."""
    return _default_isl_cached(shell)


@lru_cache(maxsize=16)
def _default_isl_cached(shell: OrbitalShell) -> IslGraph:
    return build_isl_topology(shell)
