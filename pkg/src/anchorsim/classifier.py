"""Traffic classification at the serving UPF: PDR tables, merges, updates.

Rules follow PFCP conventions: a packet is matched by the highest-priority
rule whose prefix contains the destination, where a numerically lower
precedence wins. Geo-mapped prefixes are assigned to their nearest anchor,
sibling prefixes with one owner are merged, and measured path updates
install narrow high-priority overrides.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from ipaddress import IPv4Address, IPv4Network, ip_address, ip_network

from .constellation import GroundSite
from .errors import IncompleteMeasurementError, InputError, RuleTableError
from .latency import TerrestrialModel, great_circle_km, terrestrial_latency_ms

INITIAL_PRECEDENCE = 1000
UPDATED_PRECEDENCE = INITIAL_PRECEDENCE - 900
DEFAULT_PRECEDENCE = 65535


def _parse_network(value) -> IPv4Network:
    if isinstance(value, IPv4Network):
        return value
    try:
        net = ip_network(value, strict=True)
    except ValueError as exc:
        raise InputError(f"malformed CIDR {value!r}: {exc}") from None
    if net.version != 4:
        raise InputError(f"only IPv4 prefixes are supported, got {value!r}")
    return net


def _parse_address(value) -> IPv4Address:
    if isinstance(value, IPv4Address):
        return value
    try:
        addr = ip_address(value)
    except ValueError as exc:
        raise InputError(f"malformed address {value!r}: {exc}") from None
    if addr.version != 4:
        raise InputError(f"only IPv4 addresses are supported, got {value!r}")
    return addr


@dataclass(frozen=True)
class ForwardingActionRule:
    far_id: int
    target_anchor: str
    teid: int


@dataclass
class PacketDetectionRule:
    """One detection rule; mutable because path updates edit it in place."""

    pdr_id: int
    precedence: int
    prefix: IPv4Network
    far_id: int
    origin: str  # "initial" or "updated"

    def __post_init__(self) -> None:
        if self.precedence < 0:
            raise InputError(f"precedence must be non-negative: {self.precedence}")
        if self.origin not in ("initial", "updated"):
            raise InputError(f"unknown rule origin {self.origin!r}")


@dataclass(frozen=True)
class ProbeReport:
    """One measured anchor-to-destination latency sample."""

    anchor_id: str
    destination: IPv4Address
    latency_ms: float
    epoch_s: float


@dataclass(frozen=True)
class PathUpdateRequest:
    session_id: int
    destination: IPv4Address
    epoch_s: float


@dataclass(frozen=True)
class PdrChange:
    """Outcome of one path-update evaluation."""

    kind: str  # "created" | "modified" | "unchanged"
    destination: IPv4Address
    anchor_id: str
    pdr_id: int
    precedence: int


@dataclass(frozen=True)
class GeoPrefixMap:
    """Destination prefixes with representative coordinates."""

    entries: tuple[tuple[IPv4Network, float, float], ...]

    def __post_init__(self) -> None:
        seen: set[IPv4Network] = set()
        for net, lat, lon in self.entries:
            if net in seen:
                raise InputError(f"duplicate geo prefix {net}")
            seen.add(net)
            if not -90.0 <= lat <= 90.0 or not -180.0 <= lon <= 180.0:
                raise InputError(f"geo coordinates out of range for {net}")

    @classmethod
    def from_pairs(cls, pairs) -> "GeoPrefixMap":
        return cls(tuple((_parse_network(c), float(a), float(b)) for c, a, b in pairs))

    @classmethod
    def from_csv(cls, path) -> "GeoPrefixMap":
        import csv

        rows = []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            expected = {"cidr", "lat_deg", "lon_deg"}
            if reader.fieldnames is None or not expected <= set(reader.fieldnames):
                raise InputError(
                    f"geo map {path} must have columns cidr,lat_deg,lon_deg"
                )
            for row in reader:
                rows.append((row["cidr"], row["lat_deg"], row["lon_deg"]))
        return cls.from_pairs(rows)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class PfcpSessionContext:
    """Per-session rule state held at the serving UPF."""

    session_id: int
    user_id: str
    pdrs: list[PacketDetectionRule] = field(default_factory=list)
    fars: dict[int, ForwardingActionRule] = field(default_factory=dict)
    anchor_far: dict[str, int] = field(default_factory=dict)
    seen: set[IPv4Address] = field(default_factory=set)
    # BAR/QER/URR slots ride along with each session but are not simulated
    associated_rule_ids: tuple[int, ...] = ()
    next_pdr_id: int = 1

    def allocate_pdr_id(self) -> int:
        pdr_id = self.next_pdr_id
        self.next_pdr_id += 1
        return pdr_id


def merge_prefixes(
    assignments,
) -> list[tuple[IPv4Network, str]]:
    """Collapse sibling prefixes that share an owner.

    Input is an iterable of (prefix, anchor_id). Works longest prefix first
    so freshly created parents are considered in later passes. A parent
    entry that becomes fully shadowed by two same-owner children is
    overwritten. The merged table classifies every address exactly like
    the input table under longest-prefix-match with these owners.
    """
    table: dict[IPv4Network, str] = {}
    for prefix, anchor in assignments:
        net = _parse_network(prefix)
        if net in table and table[net] != anchor:
            raise InputError(f"conflicting assignment for {net}")
        table[net] = anchor
    for length in range(32, 0, -1):
        level = sorted(
            (n for n in table if n.prefixlen == length),
            key=lambda n: int(n.network_address),
        )
        done = set()
        for net in level:
            if net in done or net not in table:
                continue
            sib_addr = int(net.network_address) ^ (1 << (32 - length))
            sibling = ip_network((sib_addr, length))
            if sibling in table and table[sibling] == table[net]:
                owner = table[net]
                del table[net]
                del table[sibling]
                done.add(sibling)
                table[net.supernet()] = owner
    return sorted(table.items(), key=lambda kv: (int(kv[0].network_address), kv[0].prefixlen))


def classify(table, destination) -> str:
    """Longest-prefix / precedence-free lookup over (prefix, anchor) pairs."""
    dest = _parse_address(destination)
    best = None
    for net, anchor in table:
        if dest in net:
            if best is None or net.prefixlen > best[0].prefixlen:
                best = (net, anchor)
    if best is None:
        raise RuleTableError(f"no prefix covers {dest}")
    return best[1]


def build_initial_pdrs(
    geo: GeoPrefixMap,
    anchors: tuple[GroundSite, ...],
    ip_allocating_anchor: str | None = None,
) -> tuple[list[PacketDetectionRule], dict[int, ForwardingActionRule]]:
    """Initial geo-derived rule table for one session.

    Every geo prefix is assigned to its nearest anchor (great circle, ties
    to the lexicographically smallest id), sibling-merged, and written at
    the initial precedence. A catch-all 0.0.0.0/0 at the weakest precedence
    forwards to the IP-allocating anchor.
    """
    if not anchors:
        raise InputError("anchor set must be non-empty")
    ids = sorted(a.id for a in anchors)
    if len(set(ids)) != len(ids):
        raise InputError("anchor ids must be unique")
    if ip_allocating_anchor is None:
        ip_allocating_anchor = ids[0]
    if ip_allocating_anchor not in ids:
        raise InputError(f"unknown IP-allocating anchor {ip_allocating_anchor!r}")
    fars: dict[int, ForwardingActionRule] = {}
    anchor_far: dict[str, int] = {}
    for i, anchor_id in enumerate(ids, start=1):
        fars[i] = ForwardingActionRule(i, anchor_id, teid=i)
        anchor_far[anchor_id] = i
    by_id = {a.id: a for a in anchors}
    raw = []
    for net, lat, lon in geo.entries:
        point = GroundSite("geo", lat, lon)
        owner = min(ids, key=lambda aid: (great_circle_km(point, by_id[aid]), aid))
        raw.append((net, owner))
    pdrs: list[PacketDetectionRule] = []
    next_id = 1
    for net, owner in merge_prefixes(raw):
        pdrs.append(
            PacketDetectionRule(next_id, INITIAL_PRECEDENCE, net, anchor_far[owner], "initial")
        )
        next_id += 1
    pdrs.append(
        PacketDetectionRule(
            next_id,
            DEFAULT_PRECEDENCE,
            ip_network("0.0.0.0/0"),
            anchor_far[ip_allocating_anchor],
            "initial",
        )
    )
    return pdrs, fars


def new_session(
    session_id: int,
    user_id: str,
    geo: GeoPrefixMap,
    anchors: tuple[GroundSite, ...],
    ip_allocating_anchor: str | None = None,
) -> PfcpSessionContext:
    """Session context pre-populated with the initial rule table."""
    pdrs, fars = build_initial_pdrs(geo, anchors, ip_allocating_anchor)
    anchor_far = {far.target_anchor: fid for fid, far in fars.items()}
    return PfcpSessionContext(
        session_id=session_id,
        user_id=user_id,
        pdrs=pdrs,
        fars=fars,
        anchor_far=anchor_far,
        next_pdr_id=len(pdrs) + 1,
    )


def match_packet(ctx: PfcpSessionContext, destination) -> ForwardingActionRule:
    """Highest-priority rule containing the destination.

    Priority: lowest precedence value, then longest prefix, then lowest
    rule id. Raises RuleTableError when nothing matches (no catch-all).
    """
    dest = _parse_address(destination)
    best: PacketDetectionRule | None = None
    for pdr in ctx.pdrs:
        if dest not in pdr.prefix:
            continue
        if best is None or (pdr.precedence, -pdr.prefix.prefixlen, pdr.pdr_id) < (
            best.precedence,
            -best.prefix.prefixlen,
            best.pdr_id,
        ):
            best = pdr
    if best is None:
        raise RuleTableError(f"no rule matches {dest} in session {ctx.session_id}")
    return ctx.fars[best.far_id]


def process_packet(
    ctx: PfcpSessionContext, destination, epoch_s: float
) -> tuple[str, list[PathUpdateRequest]]:
    """Forward one packet and, for first-seen destinations, request an update.

    The seen set deduplicates requests: a destination triggers at most one
    PathUpdateRequest over the lifetime of the session.
    """
    far = match_packet(ctx, destination)
    dest = _parse_address(destination)
    requests: list[PathUpdateRequest] = []
    if dest not in ctx.seen:
        ctx.seen.add(dest)
        requests.append(PathUpdateRequest(ctx.session_id, dest, float(epoch_s)))
    return far.target_anchor, requests


def trigger_path_update(
    ctx: PfcpSessionContext,
    destination,
    probes,
    intra_ms: dict[str, float],
    epoch_s: float,
) -> PdrChange:
    """Re-point one destination at the measured-best anchor.

    Needs a probe and an intra-network figure for every session anchor;
    otherwise raises IncompleteMeasurementError and changes nothing. The
    override is a /32 rule at a stronger (lower) precedence than the
    initial table; re-triggering modifies it in place, and a no-op result
    is reported as kind="unchanged".
    """
    dest = _parse_address(destination)
    anchors = sorted(ctx.anchor_far)
    probe_by_anchor: dict[str, float] = {}
    for report in probes:
        if report.destination == dest and report.anchor_id in ctx.anchor_far:
            probe_by_anchor[report.anchor_id] = report.latency_ms
    missing = [a for a in anchors if a not in probe_by_anchor or a not in intra_ms]
    if missing:
        raise IncompleteMeasurementError(
            f"no measurement for anchors {missing} toward {dest}"
        )
    best = min(anchors, key=lambda a: (intra_ms[a] + probe_by_anchor[a], a))
    if not math.isfinite(intra_ms[best] + probe_by_anchor[best]):
        raise IncompleteMeasurementError(f"no finite path toward {dest}")
    ctx.seen.add(dest)
    target = ip_network(f"{dest}/32")
    existing = next(
        (p for p in ctx.pdrs if p.origin == "updated" and p.prefix == target), None
    )
    if existing is None:
        pdr = PacketDetectionRule(
            ctx.allocate_pdr_id(),
            UPDATED_PRECEDENCE,
            target,
            ctx.anchor_far[best],
            "updated",
        )
        ctx.pdrs.append(pdr)
        return PdrChange("created", dest, best, pdr.pdr_id, pdr.precedence)
    if ctx.fars[existing.far_id].target_anchor != best:
        existing.far_id = ctx.anchor_far[best]
        return PdrChange("modified", dest, best, existing.pdr_id, existing.precedence)
    return PdrChange("unchanged", dest, best, existing.pdr_id, existing.precedence)


def simulate_probes(
    anchors: tuple[GroundSite, ...],
    destination,
    server: GroundSite,
    epoch_s: float,
    rng: random.Random,
    model: TerrestrialModel = TerrestrialModel(),
    noise_sigma_ms: float = 0.5,
) -> list[ProbeReport]:
    """Measured anchor-to-destination latencies: terrestrial model + noise."""
    if noise_sigma_ms < 0:
        raise InputError("noise sigma must be non-negative")
    dest = _parse_address(destination)
    reports = []
    for anchor in sorted(anchors, key=lambda a: a.id):
        base = terrestrial_latency_ms(anchor, server, model)
        noisy = max(0.0, base + rng.gauss(0.0, noise_sigma_ms))
        reports.append(ProbeReport(anchor.id, dest, noisy, float(epoch_s)))
    return reports


def perturb_geo_map(
    geo: GeoPrefixMap, fraction: float, rng: random.Random
) -> GeoPrefixMap:
    """Corrupt a fraction of geo entries with random coordinates.

    Models a stale or wrong IP-geolocation feed; prefix set is unchanged.
    """
    if not 0.0 <= fraction <= 1.0:
        raise InputError(f"fraction out of [0, 1]: {fraction}")
    n = len(geo.entries)
    k = int(round(fraction * n))
    chosen = set(rng.sample(range(n), k)) if k else set()
    entries = []
    for i, (net, lat, lon) in enumerate(geo.entries):
        if i in chosen:
            entries.append((net, rng.uniform(-60.0, 60.0), rng.uniform(-180.0, 180.0)))
        else:
            entries.append((net, lat, lon))
    return GeoPrefixMap(tuple(entries))


def dump_rule_table(ctx: PfcpSessionContext) -> str:
    """Rule table as CSV text: session,precedence,prefix,anchor,origin."""
    lines = ["session,precedence,prefix,anchor,origin"]
    ordered = sorted(
        ctx.pdrs,
        key=lambda p: (p.precedence, int(p.prefix.network_address), p.prefix.prefixlen, p.pdr_id),
    )
    for pdr in ordered:
        anchor = ctx.fars[pdr.far_id].target_anchor
        lines.append(
            f"{ctx.session_id},{pdr.precedence},{pdr.prefix},{anchor},{pdr.origin}"
        )
    return "\n".join(lines) + "\n"
