"""Anchor placement: choose h of n candidate stations to host anchors.

The cost tensor pl[i, j, k] is the demand-weighted end-to-end latency of
serving flow (user j, server k) through candidate station i; the objective
of a chosen set is the sum over flows of the per-flow minimum. Solvers:
backward-greedy elimination, k-means representatives, uniform random, and
a guarded exhaustive search for small instances.
"""

from __future__ import annotations

import itertools
import json
import math
import random
from dataclasses import dataclass

import numpy as np
from sklearn.cluster import KMeans

from .constellation import GroundSite
from .errors import InputError, InstanceTooLargeError

BRUTE_FORCE_LIMIT = 10**6


@dataclass
class DistributionInstance:
    """Candidate stations plus the demand-weighted latency tensor."""

    stations: tuple[GroundSite, ...]
    users: tuple[GroundSite, ...]
    servers: tuple[GroundSite, ...]
    demand: np.ndarray  # (p, q), entries >= 0, sums to 1
    pl: np.ndarray  # (n, p, q), demand-weighted latency, >= 0

    def __post_init__(self) -> None:
        n, p, q = len(self.stations), len(self.users), len(self.servers)
        if n < 1 or p < 1 or q < 1:
            raise InputError("instance needs stations, users and servers")
        self.demand = np.asarray(self.demand, dtype=float)
        self.pl = np.asarray(self.pl, dtype=float)
        if self.demand.shape != (p, q):
            raise InputError(
                f"demand shape {self.demand.shape} does not match ({p}, {q})"
            )
        if self.pl.shape != (n, p, q):
            raise InputError(f"pl shape {self.pl.shape} does not match ({n}, {p}, {q})")
        if np.any(self.demand < 0):
            raise InputError("demand entries must be non-negative")
        if abs(float(self.demand.sum()) - 1.0) > 1e-6:
            raise InputError(f"demand must sum to 1, got {self.demand.sum()}")
        if not np.all(np.isfinite(self.pl)) or np.any(self.pl < 0):
            raise InputError("pl entries must be finite and non-negative")

    @property
    def station_count(self) -> int:
        return len(self.stations)


@dataclass(frozen=True)
class DistributionSolution:
    chosen: tuple[int, ...]
    cost: float
    assignment: tuple[tuple[int, ...], ...]  # (p, q) -> chosen station index


def uniform_demand(p: int, q: int) -> np.ndarray:
    if p < 1 or q < 1:
        raise InputError("demand matrix needs at least one user and server")
    return np.full((p, q), 1.0 / (p * q))


def build_instance(
    stations, users, servers, latency_ms: np.ndarray, demand: np.ndarray | None = None
) -> DistributionInstance:
    """Assemble an instance from a raw latency tensor and a demand matrix."""
    stations, users, servers = tuple(stations), tuple(users), tuple(servers)
    latency_ms = np.asarray(latency_ms, dtype=float)
    if demand is None:
        demand = uniform_demand(len(users), len(servers))
    pl = np.asarray(demand, dtype=float)[None, :, :] * latency_ms
    return DistributionInstance(stations, users, servers, demand, pl)


def path_cost(instance: DistributionInstance, i: int, j: int, k: int) -> float:
    """Demand-weighted cost of serving flow (j, k) through station i."""
    n, p, q = instance.pl.shape
    if not (0 <= i < n and 0 <= j < p and 0 <= k < q):
        raise InputError(f"index ({i}, {j}, {k}) out of range for ({n}, {p}, {q})")
    return float(instance.pl[i, j, k])


def _check_chosen(instance: DistributionInstance, chosen) -> list[int]:
    idx = list(chosen)
    if not idx:
        raise InputError("chosen set must be non-empty")
    n = instance.station_count
    if len(set(idx)) != len(idx):
        raise InputError("chosen set contains duplicates")
    for i in idx:
        if not 0 <= i < n:
            raise InputError(f"station index {i} out of range")
    return sorted(idx)


def objective_cost(instance: DistributionInstance, chosen) -> float:
    """Sum over flows of the cheapest chosen station."""
    idx = _check_chosen(instance, chosen)
    return float(instance.pl[idx].min(axis=0).sum())


def solution_from(instance: DistributionInstance, chosen) -> DistributionSolution:
    idx = _check_chosen(instance, chosen)
    sub = instance.pl[idx]
    arg = np.argmin(sub, axis=0)  # first (lowest chosen index) on ties
    assignment = tuple(tuple(int(idx[a]) for a in row) for row in arg)
    return DistributionSolution(tuple(idx), float(sub.min(axis=0).sum()), assignment)


def _check_h(instance: DistributionInstance, h: int) -> None:
    if not 1 <= h <= instance.station_count:
        raise InputError(
            f"h out of [1, {instance.station_count}]: {h}"
        )


def greedy_distribution(instance: DistributionInstance, h: int) -> DistributionSolution:
    """Backward elimination: drop the station whose removal costs least.

    Starts from the full candidate set and removes one station per round
    until h remain; ties remove the lowest station index. Each round is
    evaluated with the best/second-best trick so the whole run is
    O((n - h) * n * p * q) flops rather than a full re-evaluation per pair.
    """
    _check_h(instance, h)
    chosen = list(range(instance.station_count))
    pl = instance.pl
    while len(chosen) > h:
        sub = pl[chosen]
        order = np.argsort(sub, axis=0, kind="stable")
        best = np.take_along_axis(sub, order[:1], axis=0)[0]
        second = np.take_along_axis(sub, order[1:2], axis=0)[0]
        argbest = order[0]
        costs = np.full(len(chosen), best.sum())
        np.add.at(costs, argbest.ravel(), (second - best).ravel())
        chosen.pop(int(np.argmin(costs)))
    return solution_from(instance, chosen)


def _unit_sphere(sites: tuple[GroundSite, ...]) -> np.ndarray:
    lat = np.radians([s.lat_deg for s in sites])
    lon = np.radians([s.lon_deg for s in sites])
    return np.stack(
        [np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)], axis=1
    )


def kmeans_distribution(
    instance: DistributionInstance, h: int, seed: int = 0, restarts: int = 10
) -> DistributionSolution:
    """Geographic baseline: cluster stations, keep one per cluster.

    Stations are embedded on the unit sphere and clustered with k-means;
    each cluster is represented by its member nearest the centroid. Ignores
    demand and latency entirely, which is exactly why it is a baseline.
    """
    _check_h(instance, h)
    n = instance.station_count
    if h == n:
        return solution_from(instance, range(n))
    xyz = _unit_sphere(instance.stations)
    km = KMeans(n_clusters=h, n_init=restarts, random_state=seed)
    labels = km.fit_predict(xyz)
    chosen: list[int] = []
    for c in range(h):
        members = np.nonzero(labels == c)[0]
        if members.size == 0:
            continue
        d = np.linalg.norm(xyz[members] - km.cluster_centers_[c], axis=1)
        chosen.append(int(members[int(np.argmin(d))]))
    for i in range(n):  # backfill if a cluster came out empty
        if len(chosen) == h:
            break
        if i not in chosen:
            chosen.append(i)
    return solution_from(instance, chosen)


def random_distribution(
    instance: DistributionInstance, h: int, seed: int = 0
) -> DistributionSolution:
    """Uniform random h-subset of the candidate stations."""
    _check_h(instance, h)
    rng = random.Random(seed)
    return solution_from(instance, rng.sample(range(instance.station_count), h))


def brute_force_distribution(
    instance: DistributionInstance, h: int
) -> DistributionSolution:
    """Exact optimum by enumeration, guarded against blow-up.

    Refuses instances with more than BRUTE_FORCE_LIMIT candidate subsets.
    Ties resolve to the lexicographically smallest chosen set because
    enumeration is lexicographic and only strict improvements replace the
    incumbent.
    """
    _check_h(instance, h)
    n = instance.station_count
    if math.comb(n, h) > BRUTE_FORCE_LIMIT:
        raise InstanceTooLargeError(
            f"C({n}, {h}) = {math.comb(n, h)} exceeds {BRUTE_FORCE_LIMIT}"
        )
    pl = instance.pl
    best_set: tuple[int, ...] | None = None
    best_cost = math.inf
    for combo in itertools.combinations(range(n), h):
        cost = float(pl[list(combo)].min(axis=0).sum())
        if cost < best_cost:
            best_set, best_cost = combo, cost
    assert best_set is not None
    return solution_from(instance, best_set)


def save_instance(instance: DistributionInstance, path) -> None:
    """Write an instance as JSON (sites, demand matrix, cost tensor)."""
    doc = {
        "stations": [
            {"id": s.id, "lat_deg": s.lat_deg, "lon_deg": s.lon_deg}
            for s in instance.stations
        ],
        "users": [
            {"id": s.id, "lat_deg": s.lat_deg, "lon_deg": s.lon_deg}
            for s in instance.users
        ],
        "servers": [
            {"id": s.id, "lat_deg": s.lat_deg, "lon_deg": s.lon_deg}
            for s in instance.servers
        ],
        "demand": instance.demand.tolist(),
        "pl": instance.pl.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_instance(path) -> DistributionInstance:
    with open(path) as fh:
        doc = json.load(fh)
    try:
        stations = tuple(
            GroundSite(s["id"], s["lat_deg"], s["lon_deg"]) for s in doc["stations"]
        )
        users = tuple(
            GroundSite(s["id"], s["lat_deg"], s["lon_deg"]) for s in doc["users"]
        )
        servers = tuple(
            GroundSite(s["id"], s["lat_deg"], s["lon_deg"]) for s in doc["servers"]
        )
        demand = np.asarray(doc["demand"], dtype=float)
        pl = np.asarray(doc["pl"], dtype=float)
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed instance file {path}: {exc}") from None
    return DistributionInstance(stations, users, servers, demand, pl)
