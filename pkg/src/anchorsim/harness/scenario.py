"""Scenario files: everything one experiment needs, in one JSON document.

A scenario pins the constellation, ground stations, deployed anchors, user
tracks, destination servers, model parameters and the epoch grid, so every
bench run is reproducible from the file plus a seed.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, replace

from ..classifier import GeoPrefixMap
from ..constellation import GroundSite, OrbitalShell, VisibilityPolicy
from ..errors import InputError, ScenarioError
from ..latency import TerrestrialModel
from ..signaling import TimingModel

NAMED_CONSTELLATIONS: dict[str, OrbitalShell] = {
    "starlink": OrbitalShell(72, 22, 550.0, 53.0),
    "kuiper": OrbitalShell(36, 36, 630.0, 51.9),
    "oneweb": OrbitalShell(12, 53, 1200.0, 87.9),
}


@dataclass(frozen=True)
class UserTrack:
    """A user id plus a piecewise-linear ground track."""

    id: str
    waypoints: tuple[tuple[float, float, float], ...]  # (epoch_s, lat, lon)

    def __post_init__(self) -> None:
        if not self.id:
            raise InputError("user id must be non-empty")
        if not self.waypoints:
            raise InputError(f"user {self.id}: needs at least one waypoint")
        times = [w[0] for w in self.waypoints]
        if times != sorted(times) or len(set(times)) != len(times):
            raise InputError(f"user {self.id}: waypoint times must strictly increase")

    def position_at(self, epoch_s: float) -> GroundSite:
        """Linear interpolation along the track, clamped at both ends."""
        w = self.waypoints
        if epoch_s <= w[0][0]:
            return GroundSite(self.id, w[0][1], w[0][2])
        if epoch_s >= w[-1][0]:
            return GroundSite(self.id, w[-1][1], w[-1][2])
        for (t0, la0, lo0), (t1, la1, lo1) in zip(w, w[1:]):
            if t0 <= epoch_s <= t1:
                f = (epoch_s - t0) / (t1 - t0)
                return GroundSite(self.id, la0 + f * (la1 - la0), lo0 + f * (lo1 - lo0))
        raise InputError(f"user {self.id}: epoch {epoch_s} outside track")


@dataclass(frozen=True)
class ServerSite:
    site: GroundSite
    address: str

    @property
    def id(self) -> str:
        return self.site.id


@dataclass(frozen=True)
class PathUpdateConfig:
    enabled: bool = False
    noise_sigma_ms: float = 0.5
    geo_error_fraction: float = 0.0

    def __post_init__(self) -> None:
        if self.noise_sigma_ms < 0:
            raise InputError("noise sigma must be non-negative")
        if not 0.0 <= self.geo_error_fraction <= 1.0:
            raise InputError("geo error fraction out of [0, 1]")


@dataclass(frozen=True)
class TimingConfig:
    """Flat signaling knobs; expands to a TimingModel role map."""

    nf_processing_ms: float = 2.0
    ue_gnb_ms: float = 2.0
    gnb_core_ms: float = 15.0
    supf_core_ms: float = 15.0
    anchor_core_ms: float = 20.0
    jitter_fraction: float = 0.1

    def build(self) -> TimingModel:
        return TimingModel(
            self.nf_processing_ms,
            {
                ("gnb", "ue"): self.ue_gnb_ms,
                ("core", "gnb"): self.gnb_core_ms,
                ("core", "supf"): self.supf_core_ms,
                ("anchor", "core"): self.anchor_core_ms,
            },
        )


@dataclass
class Scenario:
    name: str
    seed: int
    constellation_name: str
    shell: OrbitalShell
    stations: tuple[GroundSite, ...]
    anchor_ids: tuple[str, ...]
    users: tuple[UserTrack, ...]
    servers: tuple[ServerSite, ...]
    epochs: tuple[float, ...]
    visibility: VisibilityPolicy = VisibilityPolicy()
    terrestrial: TerrestrialModel = TerrestrialModel()
    timing: TimingConfig = TimingConfig()
    path_updates: PathUpdateConfig = PathUpdateConfig()
    geo: GeoPrefixMap | None = None
    sat_cluster_count: int | None = None

    def __post_init__(self) -> None:
        ids = [s.id for s in self.stations]
        if len(set(ids)) != len(ids):
            raise InputError("station ids must be unique")
        known = set(ids)
        for a in self.anchor_ids:
            if a not in known:
                raise InputError(f"anchor {a!r} is not a listed station")
        if not self.anchor_ids:
            raise InputError("scenario needs at least one anchor")
        if not self.users or not self.servers:
            raise InputError("scenario needs users and servers")
        if not self.epochs:
            raise InputError("scenario needs at least one epoch")

    def anchor_sites(self) -> tuple[GroundSite, ...]:
        by_id = {s.id: s for s in self.stations}
        return tuple(by_id[a] for a in sorted(self.anchor_ids))

    def station_by_id(self, station_id: str) -> GroundSite:
        for s in self.stations:
            if s.id == station_id:
                return s
        raise InputError(f"unknown station {station_id!r}")


def load_stations_csv(path) -> tuple[GroundSite, ...]:
    """Ground stations from CSV with columns id,lat_deg,lon_deg."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        expected = {"id", "lat_deg", "lon_deg"}
        if reader.fieldnames is None or not expected <= set(reader.fieldnames):
            raise InputError(f"stations file {path} must have columns id,lat_deg,lon_deg")
        for i, row in enumerate(reader):
            try:
                out.append(
                    GroundSite(row["id"], float(row["lat_deg"]), float(row["lon_deg"]))
                )
            except (ValueError, InputError) as exc:
                raise InputError(f"stations file {path} row {i + 1}: {exc}") from None
    return tuple(out)


def _require(doc: dict, key: str, where: str):
    if key not in doc:
        raise ScenarioError(f"{where}{key}: missing required field")
    return doc[key]


def _shell_from(value, where: str) -> tuple[str, OrbitalShell]:
    if isinstance(value, str):
        if value not in NAMED_CONSTELLATIONS:
            raise ScenarioError(
                f"{where}: unknown constellation {value!r}, "
                f"expected one of {sorted(NAMED_CONSTELLATIONS)}"
            )
        return value, NAMED_CONSTELLATIONS[value]
    if isinstance(value, dict):
        try:
            shell = OrbitalShell(
                int(value["plane_count"]),
                int(value["sats_per_plane"]),
                float(value["altitude_km"]),
                float(value["inclination_deg"]),
                float(value.get("phase_offset", 0.5)),
            )
        except (KeyError, ValueError, TypeError, InputError) as exc:
            raise ScenarioError(f"{where}: {exc}") from None
        return "custom", shell
    raise ScenarioError(f"{where}: expected a name or an object")


def load_scenario(path) -> Scenario:
    """Load and validate a scenario JSON file.

    File references (stations_csv, geo_csv) resolve relative to the
    scenario file's directory. Any structural problem raises ScenarioError
    whose message starts with the offending field path.
    """
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ScenarioError(f"{path}: top level must be an object")
    base = os.path.dirname(os.path.abspath(path))

    def resolve(rel: str) -> str:
        return rel if os.path.isabs(rel) else os.path.join(base, rel)

    name = str(doc.get("name", os.path.splitext(os.path.basename(path))[0]))
    try:
        seed = int(doc.get("seed", 0))
    except (TypeError, ValueError):
        raise ScenarioError("seed: expected an integer") from None
    constellation_name, shell = _shell_from(
        _require(doc, "constellation", ""), "constellation"
    )

    if "stations_csv" in doc:
        try:
            stations = load_stations_csv(resolve(doc["stations_csv"]))
        except (OSError, InputError) as exc:
            raise ScenarioError(f"stations_csv: {exc}") from None
    else:
        raw = _require(doc, "stations", "")
        stations = []
        for i, row in enumerate(raw):
            try:
                stations.append(
                    GroundSite(str(row["id"]), float(row["lat_deg"]), float(row["lon_deg"]))
                )
            except (KeyError, TypeError, ValueError, InputError) as exc:
                raise ScenarioError(f"stations[{i}]: {exc}") from None
        stations = tuple(stations)

    anchors = tuple(str(a) for a in _require(doc, "anchors", ""))

    users = []
    for i, row in enumerate(_require(doc, "users", "")):
        try:
            waypoints = tuple(
                (float(t), float(la), float(lo)) for t, la, lo in row["waypoints"]
            )
            users.append(UserTrack(str(row["id"]), waypoints))
        except (KeyError, TypeError, ValueError, InputError) as exc:
            raise ScenarioError(f"users[{i}]: {exc}") from None

    servers = []
    for i, row in enumerate(_require(doc, "servers", "")):
        try:
            site = GroundSite(str(row["id"]), float(row["lat_deg"]), float(row["lon_deg"]))
            servers.append(ServerSite(site, str(row["address"])))
        except (KeyError, TypeError, ValueError, InputError) as exc:
            raise ScenarioError(f"servers[{i}]: {exc}") from None
    addresses = [s.address for s in servers]
    if len(set(addresses)) != len(addresses):
        raise ScenarioError("servers: addresses must be unique")

    ep = _require(doc, "epochs", "")
    try:
        if isinstance(ep, list):
            epochs = tuple(float(t) for t in ep)
        else:
            start, step = float(ep.get("start", 0.0)), float(ep.get("step", 60.0))
            count = int(ep["count"])
            if count < 1:
                raise ValueError("count must be >= 1")
            epochs = tuple(start + i * step for i in range(count))
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"epochs: {exc}") from None

    def section(key: str, cls, **renames):
        raw = doc.get(key)
        if raw is None:
            return cls()
        if not isinstance(raw, dict):
            raise ScenarioError(f"{key}: expected an object")
        try:
            return cls(**{renames.get(k, k): v for k, v in raw.items()})
        except (TypeError, InputError) as exc:
            raise ScenarioError(f"{key}: {exc}") from None

    visibility = section("visibility", VisibilityPolicy)
    terrestrial = section("terrestrial", TerrestrialModel)
    timing = section("timing", TimingConfig)
    path_updates = section("path_updates", PathUpdateConfig)

    geo = None
    if "geo_csv" in doc:
        try:
            geo = GeoPrefixMap.from_csv(resolve(doc["geo_csv"]))
        except (OSError, InputError) as exc:
            raise ScenarioError(f"geo_csv: {exc}") from None
    elif "geo" in doc:
        try:
            geo = GeoPrefixMap.from_pairs(doc["geo"])
        except (TypeError, ValueError, InputError) as exc:
            raise ScenarioError(f"geo: {exc}") from None

    cluster = doc.get("sat_cluster_count")
    if cluster is not None:
        try:
            cluster = int(cluster)
        except (TypeError, ValueError):
            raise ScenarioError("sat_cluster_count: expected an integer") from None

    try:
        return Scenario(
            name=name,
            seed=seed,
            constellation_name=constellation_name,
            shell=shell,
            stations=tuple(stations),
            anchor_ids=anchors,
            users=tuple(users),
            servers=tuple(servers),
            epochs=epochs,
            visibility=visibility,
            terrestrial=terrestrial,
            timing=timing,
            path_updates=path_updates,
            geo=geo,
            sat_cluster_count=cluster,
        )
    except InputError as exc:
        raise ScenarioError(str(exc)) from None


def with_overrides(
    scenario: Scenario,
    seed: int | None = None,
    constellation: str | None = None,
    epoch_count: int | None = None,
) -> Scenario:
    """CLI-style overrides without touching the file."""
    out = scenario
    if seed is not None:
        out = replace(out, seed=seed)
    if constellation is not None:
        cname, shell = _shell_from(constellation, "constellation")
        out = replace(out, constellation_name=cname, shell=shell)
    if epoch_count is not None:
        if epoch_count < 1:
            raise InputError("epoch count must be >= 1")
        eps = out.epochs
        if len(eps) >= 2:
            step = eps[1] - eps[0]
        else:
            step = 60.0
        out = replace(out, epochs=tuple(eps[0] + i * step for i in range(epoch_count)))
    return out
