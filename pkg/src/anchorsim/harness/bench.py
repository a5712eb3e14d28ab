"""Benchmark drivers: latency comparison, establishment sweep, placement.

Every driver consumes a Scenario and returns ResultRow records; rows
serialize to CSV with fixed float formatting so identical inputs produce
byte-identical files.
"""

from __future__ import annotations

import math
import random
import statistics
from dataclasses import dataclass

import numpy as np

from ..classifier import (
    new_session,
    perturb_geo_map,
    process_packet,
    simulate_probes,
    trigger_path_update,
)
from ..distribution import (
    BRUTE_FORCE_LIMIT,
    DistributionInstance,
    brute_force_distribution,
    build_instance,
    greedy_distribution,
    kmeans_distribution,
    random_distribution,
)
from ..errors import (
    CoverageGapError,
    IncompleteMeasurementError,
    InputError,
)
from ..latency import (
    SCHEMES,
    end_to_end_latency,
    default_isl,
    intra_latency_map,
    scheme_latency,
    terrestrial_latency_ms,
)
from .scenario import Scenario

GAP_SENTINEL = "coverage_gaps"


@dataclass(frozen=True)
class ResultRow:
    """One measurement or summary value.

    For session-establishment rows the epoch column carries the anchor
    count (the x-axis of that experiment); summary rows leave epoch unset.
    """

    experiment: str
    scheme: str
    constellation: str
    epoch: float | None
    user: str
    server: str
    metric: str
    value: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.value) or self.value < 0:
            raise InputError(
                f"row value must be finite and >= 0, got {self.value!r} "
                f"for {self.experiment}/{self.metric}"
            )


def rows_to_csv(rows) -> str:
    lines = ["experiment,scheme,constellation,epoch,user,server,metric,value"]
    for r in rows:
        epoch = "" if r.epoch is None else f"{r.epoch:.3f}"
        lines.append(
            f"{r.experiment},{r.scheme},{r.constellation},{epoch},"
            f"{r.user},{r.server},{r.metric},{r.value:.6f}"
        )
    return "\n".join(lines) + "\n"


def write_rows(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(rows_to_csv(rows))


def run_latency_bench(scenario: Scenario) -> list[ResultRow]:
    """Compare the four anchor-selection schemes over the scenario grid.

    Emits one end_to_end_ms row per (scheme, epoch, user, server) sample,
    per-scheme mean/max/sample-count summaries, a coverage-gap count per
    scheme, and, when path updates are enabled, the concordance between
    geo-derived initial anchors and measured best anchors.
    """
    shell, isl = scenario.shell, default_isl(scenario.shell)
    anchors = scenario.anchor_sites()
    stations = scenario.stations
    cname = scenario.constellation_name
    rows: list[ResultRow] = []
    values: dict[str, list[float]] = {s: [] for s in SCHEMES}
    gaps: dict[str, int] = {s: 0 for s in SCHEMES}
    registered = {u.id: u.position_at(scenario.epochs[0]) for u in scenario.users}
    for epoch in scenario.epochs:
        for user in scenario.users:
            pos = user.position_at(epoch)
            for server in scenario.servers:
                for scheme in SCHEMES:
                    try:
                        res = scheme_latency(
                            scheme,
                            pos,
                            server.site,
                            anchors,
                            shell,
                            isl,
                            epoch,
                            scenario.visibility,
                            scenario.terrestrial,
                            stations=stations,
                            registered_position=registered[user.id],
                            establishment_position=registered[user.id],
                            sat_cluster_count=scenario.sat_cluster_count,
                        )
                    except CoverageGapError:
                        gaps[scheme] += 1
                        continue
                    values[scheme].append(res.total_ms)
                    rows.append(
                        ResultRow(
                            "latency", scheme, cname, epoch,
                            user.id, server.id, "end_to_end_ms", res.total_ms,
                        )
                    )
    for scheme in SCHEMES:
        vals = values[scheme]
        if vals:
            rows.append(
                ResultRow("latency", scheme, cname, None, "", "",
                          "mean_ms", statistics.fmean(vals))
            )
            rows.append(
                ResultRow("latency", scheme, cname, None, "", "", "max_ms", max(vals))
            )
        rows.append(
            ResultRow("latency", scheme, cname, None, "", "",
                      "samples", float(len(vals)))
        )
        rows.append(
            ResultRow("latency", scheme, cname, None, "", "",
                      GAP_SENTINEL, float(gaps[scheme]))
        )
    if scenario.path_updates.enabled and scenario.geo is not None:
        rows.extend(_concordance_rows(scenario))
    return rows


def _concordance_rows(scenario: Scenario) -> list[ResultRow]:
    """Initial geo anchor vs measured best anchor, per (user, server) pair.

    The statistic is reported as-is; desk-scale scenarios are too small
    for the full-scale figure, so no threshold is applied here.
    """
    shell, isl = scenario.shell, default_isl(scenario.shell)
    anchors = scenario.anchor_sites()
    cname = scenario.constellation_name
    epoch0 = scenario.epochs[0]
    rng = random.Random(scenario.seed)
    geo = scenario.geo
    if scenario.path_updates.geo_error_fraction > 0:
        geo = perturb_geo_map(geo, scenario.path_updates.geo_error_fraction, rng)
    pairs = 0
    concordant = 0
    improvements: list[float] = []
    for ui, user in enumerate(scenario.users):
        pos = user.position_at(epoch0)
        try:
            intra = intra_latency_map(
                pos, anchors, shell, isl, epoch0, scenario.visibility
            )
        except CoverageGapError:
            continue
        ctx = new_session(1000 + ui, user.id, geo, anchors)
        for server in scenario.servers:
            initial_anchor, _requests = process_packet(ctx, server.address, epoch0)
            probes = simulate_probes(
                anchors,
                server.address,
                server.site,
                epoch0,
                rng,
                scenario.terrestrial,
                scenario.path_updates.noise_sigma_ms,
            )
            try:
                change = trigger_path_update(
                    ctx, server.address, probes, intra, epoch0
                )
            except IncompleteMeasurementError:
                continue
            probe_by_anchor = {p.anchor_id: p.latency_ms for p in probes}
            before = intra[initial_anchor] + probe_by_anchor[initial_anchor]
            after = intra[change.anchor_id] + probe_by_anchor[change.anchor_id]
            pairs += 1
            concordant += int(change.anchor_id == initial_anchor)
            improvements.append(before - after)
    rows = []
    if pairs:
        rows.append(
            ResultRow("latency", "skyoctopus", cname, None, "", "",
                      "concordance_rate", concordant / pairs)
        )
        rows.append(
            ResultRow("latency", "skyoctopus", cname, None, "", "",
                      "concordance_pairs", float(pairs))
        )
        rows.append(
            ResultRow("latency", "skyoctopus", cname, None, "", "",
                      "mean_update_improvement_ms", statistics.fmean(improvements))
        )
    return rows


def run_session_bench(
    scenario: Scenario, h_values=None, repetitions: int = 1
) -> list[ResultRow]:
    """Establishment-time sweep over anchor counts, both schemes."""
    from ..signaling import session_establishment_sweep

    if h_values is None:
        h_values = range(1, 21)
    points = session_establishment_sweep(
        h_values,
        scenario.timing.build(),
        repetitions=repetitions,
        seed=scenario.seed,
        jitter_fraction=scenario.timing.jitter_fraction,
    )
    rows = []
    for pt in points:
        rows.append(
            ResultRow("session", pt.scheme, scenario.constellation_name,
                      float(pt.anchor_count), "", "",
                      "mean_establishment_ms", pt.mean_ms)
        )
        if repetitions > 1:
            rows.append(
                ResultRow("session", pt.scheme, scenario.constellation_name,
                          float(pt.anchor_count), "", "",
                          "std_establishment_ms", pt.std_ms)
            )
    return rows


def build_distribution_instance(scenario: Scenario) -> DistributionInstance:
    """Demand-weighted placement instance from the scenario geometry.

    The latency of serving (user, server) through candidate station i is
    the epoch-averaged space segment into station i plus the terrestrial
    tail from station i; epochs where a leg is in a coverage gap are
    dropped, and a flow/station pair dark at every epoch is rejected.
    """
    shell, isl = scenario.shell, default_isl(scenario.shell)
    stations = scenario.stations
    n, p, q = len(stations), len(scenario.users), len(scenario.servers)
    sums = np.zeros((p, n))
    counts = np.zeros((p, n))
    for epoch in scenario.epochs:
        for j, user in enumerate(scenario.users):
            try:
                intra = intra_latency_map(
                    user.position_at(epoch), stations, shell, isl, epoch,
                    scenario.visibility,
                )
            except CoverageGapError:
                continue
            for i, st in enumerate(stations):
                v = intra[st.id]
                if math.isfinite(v):
                    sums[j, i] += v
                    counts[j, i] += 1
    if np.any(counts == 0):
        dark = int((counts == 0).sum())
        raise CoverageGapError(
            f"{dark} user/station pairs have no coverage at any epoch"
        )
    mean_intra = sums / counts  # (p, n)
    tail = np.array(
        [
            [
                terrestrial_latency_ms(st, sv.site, scenario.terrestrial)
                for sv in scenario.servers
            ]
            for st in stations
        ]
    )  # (n, q)
    latency = mean_intra.T[:, :, None] + tail[:, None, :]  # (n, p, q)
    users = tuple(u.position_at(scenario.epochs[0]) for u in scenario.users)
    servers = tuple(s.site for s in scenario.servers)
    return build_instance(stations, users, servers, latency)


def run_distribution_bench(scenario: Scenario, h: int) -> list[ResultRow]:
    """Compare placement algorithms on the scenario's instance.

    Emits an objective_cost row per algorithm plus one chosen row per
    selected station; the exhaustive optimum is included only when the
    subset count fits under the enumeration guard.
    """
    instance = build_distribution_instance(scenario)
    cname = scenario.constellation_name
    solvers = [
        ("greedy", lambda: greedy_distribution(instance, h)),
        ("kmeans", lambda: kmeans_distribution(instance, h, seed=scenario.seed)),
        ("random", lambda: random_distribution(instance, h, seed=scenario.seed)),
    ]
    if math.comb(instance.station_count, h) <= BRUTE_FORCE_LIMIT:
        solvers.append(("brute_force", lambda: brute_force_distribution(instance, h)))
    rows = []
    for name, solve in solvers:
        sol = solve()
        rows.append(
            ResultRow("distribution", name, cname, None, "", "",
                      "objective_cost", sol.cost)
        )
        for i in sol.chosen:
            rows.append(
                ResultRow("distribution", name, cname, None, "",
                          instance.stations[i].id, "chosen", 1.0)
            )
    return rows


def reproduce_table1(scenario: Scenario) -> list[ResultRow]:
    """Per-anchor latency decomposition for a single pinned flow.

    Needs exactly one user and one server; reports the space segment, the
    terrestrial tail, the total and the saving relative to the worst
    anchor, then a winner row carrying the minimum total.
    """
    if len(scenario.users) != 1 or len(scenario.servers) != 1:
        raise InputError("table1 scenarios pin exactly one user and one server")
    if len(scenario.anchor_ids) < 2:
        raise InputError("table1 scenarios compare at least two anchors")
    shell, isl = scenario.shell, default_isl(scenario.shell)
    user = scenario.users[0]
    server = scenario.servers[0]
    epoch = scenario.epochs[0]
    pos = user.position_at(epoch)
    cname = scenario.constellation_name
    results = []
    for anchor in scenario.anchor_sites():
        res = end_to_end_latency(
            pos, anchor, server.site, shell, isl, epoch,
            scenario.visibility, scenario.terrestrial,
        )
        results.append(res)
    worst = max(r.total_ms for r in results)
    rows = []
    for res in results:
        common = ("table1", res.anchor_id, cname, epoch, user.id, server.id)
        rows.append(ResultRow(*common, "user_to_gs_ms", res.intra_ms))
        rows.append(ResultRow(*common, "gs_to_server_ms", res.inter_ms))
        rows.append(ResultRow(*common, "total_ms", res.total_ms))
        saved = 0.0 if worst == 0 else (worst - res.total_ms) / worst * 100.0
        rows.append(ResultRow(*common, "saved_pct", saved))
    winner = min(results, key=lambda r: (r.total_ms, r.anchor_id))
    rows.append(
        ResultRow("table1", winner.anchor_id, cname, epoch, user.id, server.id,
                  "winner_total_ms", winner.total_ms)
    )
    return rows
