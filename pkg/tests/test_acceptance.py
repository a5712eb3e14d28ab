"""End-to-end acceptance checks.

Each test prints one PASS/FAIL line with its measured numbers (visible
even under output capture) and asserts the same condition, so a verbose
run doubles as a scoreboard for the eight headline behaviors.
"""

import ipaddress
import json
import os
import random
import time

import numpy as np
import pytest

from anchorsim.classifier import (
    GeoPrefixMap,
    ProbeReport,
    classify,
    merge_prefixes,
    new_session,
    process_packet,
    trigger_path_update,
)
from anchorsim.constellation import GroundSite
from anchorsim.distribution import (
    brute_force_distribution,
    build_instance,
    greedy_distribution,
    kmeans_distribution,
    random_distribution,
)
from anchorsim.harness.bench import reproduce_table1, run_distribution_bench, run_latency_bench
from anchorsim.harness.cli import EXIT_OK, main
from anchorsim.harness.scenario import (
    NAMED_CONSTELLATIONS,
    Scenario,
    ServerSite,
    TimingConfig,
    UserTrack,
    load_scenario,
    load_stations_csv,
)
from anchorsim.latency import great_circle_km
from anchorsim.signaling import session_establishment_sweep


def report(capsys, label: str, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
    assert ok, f"{label}: {detail}"


@pytest.fixture(scope="module")
def atlantic(scenario_dir):
    """The shipped Atlantic scenario run once, shared by criteria 2 and 3."""
    sc = load_scenario(os.path.join(scenario_dir, "atlantic.json"))
    t0 = time.perf_counter()
    rows = run_latency_bench(sc)
    elapsed = time.perf_counter() - t0
    return sc, rows, elapsed


def test_criterion_1_pinned_two_anchor_flow(scenario_dir, capsys):
    t0 = time.perf_counter()
    sc = load_scenario(os.path.join(scenario_dir, "table1.json"))
    rows = reproduce_table1(sc)
    elapsed = time.perf_counter() - t0
    totals = {r.scheme: r.value for r in rows if r.metric == "total_ms"}
    winner = next(r.scheme for r in rows if r.metric == "winner_total_ms")
    saving = (totals["ashburn"] - totals["london"]) / totals["ashburn"]
    ok = winner == "london" and saving >= 0.30 and elapsed < 5.0
    report(
        capsys,
        "criterion 1, pinned two-anchor flow",
        ok,
        f"winner={winner}, london saves {saving:.1%} vs ashburn (need >=30%), "
        f"{elapsed:.2f}s (budget 5s)",
    )


def test_criterion_2_dominance_over_nearest_gs(atlantic, capsys):
    sc, rows, _ = atlantic
    samples: dict[tuple, dict[str, float]] = {}
    for r in rows:
        if r.metric == "end_to_end_ms":
            samples.setdefault((r.epoch, r.user, r.server), {})[r.scheme] = r.value
    triples = len(samples)
    # the per-sample pool anchors at the station nearest the registered
    # position, so dominance is guaranteed exactly when that station is a
    # deployed anchor and the per-sample minimum includes it
    anchor_ids = set(sc.anchor_ids)
    qualifying_users = set()
    for user in sc.users:
        pos0 = user.position_at(sc.epochs[0])
        nearest = min(sc.stations, key=lambda s: (great_circle_km(pos0, s), s.id))
        if nearest.id in anchor_ids:
            qualifying_users.add(user.id)
    checked = violations = 0
    for (_epoch, uid, _server), values in samples.items():
        if uid not in qualifying_users:
            continue
        if "skyoctopus" in values and "standard-gs" in values:
            checked += 1
            if values["skyoctopus"] > values["standard-gs"]:
                violations += 1
    ok = triples >= 10_000 and checked > 0 and violations == 0
    report(
        capsys,
        "criterion 2, per-sample dominance",
        ok,
        f"{triples} triples (need >=10000), {checked} qualifying samples, "
        f"{violations} violations (exact)",
    )


def test_criterion_3_directional_mean_reduction(atlantic, capsys):
    _sc, rows, elapsed = atlantic
    means = {r.scheme: r.value for r in rows if r.metric == "mean_ms"}
    reduction = 1.0 - means["skyoctopus"] / means["standard"]
    ok = reduction >= 0.30 and elapsed < 600.0
    report(
        capsys,
        "criterion 3, Atlantic mean reduction",
        ok,
        f"skyoctopus {means['skyoctopus']:.2f}ms vs standard {means['standard']:.2f}ms, "
        f"reduction {reduction:.1%} (need >=30%), bench {elapsed:.1f}s (budget 600s)",
    )


def test_criterion_4_session_time_scaling(capsys):
    t0 = time.perf_counter()
    timing = TimingConfig().build()
    fixed = session_establishment_sweep(
        range(1, 21), timing, repetitions=1, seed=0, jitter_fraction=0.0
    )
    ins = {p.anchor_count: p.mean_ms for p in fixed if p.scheme == "insertion"}
    par = {p.anchor_count: p.mean_ms for p in fixed if p.scheme == "parallel"}
    hs = np.arange(1, 21)
    y = np.array([ins[h] for h in hs])
    slope, intercept = np.polyfit(hs, y, 1)
    pred = slope * hs + intercept
    r2 = 1.0 - float(((y - pred) ** 2).sum()) / float(((y - y.mean()) ** 2).sum())
    jittered = session_establishment_sweep(
        range(1, 21), timing, repetitions=30, seed=7, jitter_fraction=0.1
    )
    par_j = [p.mean_ms for p in jittered if p.scheme == "parallel"]
    variation = (max(par_j) - min(par_j)) / (sum(par_j) / len(par_j))
    saving = 1.0 - par[20] / ins[20]
    elapsed = time.perf_counter() - t0
    ok = (
        slope > 0
        and r2 >= 0.99
        and variation <= 0.15
        and saving >= 0.80
        and elapsed < 60.0
    )
    report(
        capsys,
        "criterion 4, session-time scaling",
        ok,
        f"insertion affine R2={r2:.6f} slope={slope:.1f}ms/anchor, parallel "
        f"variation {variation:.1%} (cap 15%), saving at h=20 {saving:.1%} "
        f"(need >=80%), {elapsed:.1f}s (budget 60s)",
    )


def synth_instance(seed: int, n=8, p=5, q=5):
    rng = np.random.default_rng(seed)
    stations = tuple(
        GroundSite(f"s{i:02d}", float(rng.uniform(-55, 55)), float(rng.uniform(-180, 179)))
        for i in range(n)
    )
    users = tuple(
        GroundSite(f"u{j}", float(rng.uniform(-55, 55)), float(rng.uniform(-180, 179)))
        for j in range(p)
    )
    servers = tuple(
        GroundSite(f"v{k}", float(rng.uniform(-55, 55)), float(rng.uniform(-180, 179)))
        for k in range(q)
    )
    latency = rng.uniform(5.0, 100.0, size=(n, p, q))
    demand = rng.uniform(0.2, 1.0, size=(p, q))
    demand /= demand.sum()
    return build_instance(stations, users, servers, latency, demand)


def test_criterion_5_greedy_vs_exhaustive(capsys):
    t0 = time.perf_counter()
    worst_ratio = 0.0
    dominance_ok = True
    for seed in range(20):
        inst = synth_instance(seed)
        g = greedy_distribution(inst, 3)
        b = brute_force_distribution(inst, 3)
        k = kmeans_distribution(inst, 3, seed=seed)
        r = random_distribution(inst, 3, seed=seed)
        worst_ratio = max(worst_ratio, g.cost / b.cost)
        dominance_ok &= b.cost <= g.cost and b.cost <= k.cost and b.cost <= r.cost
    elapsed = time.perf_counter() - t0
    ok = worst_ratio <= 1.2 and dominance_ok and elapsed < 60.0
    report(
        capsys,
        "criterion 5, greedy vs exhaustive",
        ok,
        f"worst greedy/optimal ratio {worst_ratio:.4f} over 20 instances "
        f"(cap 1.2), exhaustive dominance={'exact' if dominance_ok else 'VIOLATED'}, "
        f"{elapsed:.1f}s (budget 60s)",
    )


def clustered_scenario(seed: int, pool, h=6, per_cluster=3, p=12, q=10, base=1000):
    """Station pool with metro-style clusters; placement quality separates here."""
    rng = random.Random(base + seed)
    centers = rng.sample(list(pool), h)
    stations = []
    for c in centers:
        for v in range(per_cluster):
            lat = max(-55.0, min(55.0, c.lat_deg + rng.uniform(-4, 4)))
            lon = c.lon_deg + rng.uniform(-4.8, 4.8)
            if lon > 180:
                lon -= 360
            if lon < -180:
                lon += 360
            stations.append(GroundSite(f"{c.id}-{v}", lat, lon))
    stations = tuple(stations)
    users = tuple(
        UserTrack(f"u{j}", ((0.0, rng.uniform(-50, 55), rng.uniform(-180, 179)),))
        for j in range(p)
    )
    servers = tuple(
        ServerSite(
            GroundSite(f"v{k}", rng.uniform(-50, 55), rng.uniform(-180, 179)),
            f"198.18.{k}.10",
        )
        for k in range(q)
    )
    return Scenario(
        name=f"clustered-{seed}",
        seed=seed,
        constellation_name="starlink",
        shell=NAMED_CONSTELLATIONS["starlink"],
        stations=stations,
        anchor_ids=tuple(s.id for s in stations),
        users=users,
        servers=servers,
        epochs=(0.0, 300.0),
    )


def test_criterion_6_distribution_ordering(scenario_dir, capsys):
    t0 = time.perf_counter()
    pool = load_stations_csv(os.path.join(scenario_dir, "stations.csv"))
    wins = 0
    details = []
    for seed in range(10):
        sc = clustered_scenario(seed, pool)
        rows = run_distribution_bench(sc, 6)
        cost = {r.scheme: r.value for r in rows if r.metric == "objective_cost"}
        ordered = cost["greedy"] <= cost["kmeans"] <= cost["random"]
        wins += ordered
        if not ordered:
            details.append(seed)
    elapsed = time.perf_counter() - t0
    ok = wins >= 9 and elapsed < 300.0
    report(
        capsys,
        "criterion 6, placement ordering",
        ok,
        f"greedy<=kmeans<=random in {wins}/10 scenarios (need >=9"
        + (f", violated seeds {details}" if details else "")
        + f"), {elapsed:.1f}s (budget 300s)",
    )


def test_criterion_7_classifier_suite(capsys):
    rng = random.Random(42)
    geo = GeoPrefixMap.from_pairs([("198.18.0.0/24", 10.0, 10.0)])
    argmin_mismatches = 0
    for snap in range(1000):
        count = rng.randint(2, 8)
        anchors = tuple(
            GroundSite(f"a{i}", rng.uniform(-50, 50), rng.uniform(-180, 179))
            for i in range(count)
        )
        ctx = new_session(snap, "ue", geo, anchors)
        dest = f"198.18.0.{rng.randrange(256)}"
        process_packet(ctx, dest, 0.0)
        probes = [
            ProbeReport(a.id, ipaddress.ip_address(dest), rng.uniform(1, 60), 0.0)
            for a in anchors
        ]
        intra = {a.id: rng.uniform(1, 60) for a in anchors}
        change = trigger_path_update(ctx, dest, probes, intra, 0.0)
        by_id = {p.anchor_id: p.latency_ms for p in probes}
        want = min((intra[a.id] + by_id[a.id], a.id) for a in anchors)[1]
        argmin_mismatches += change.anchor_id != want

    universe = ipaddress.ip_network("198.18.0.0/18")
    owners = ["east", "west", "north"]
    merge_mismatches = 0
    for _trial in range(2):
        table = {universe: "root"}
        for _ in range(70):
            length = rng.randint(19, 26)
            idx = rng.randrange(1 << (length - 18))
            addr = int(universe.network_address) + idx * (1 << (32 - length))
            net = ipaddress.ip_network((addr, length))
            table.setdefault(net, rng.choice(owners))
        original = list(table.items())
        merged = merge_prefixes(original)
        for offset in range(universe.num_addresses):
            a = ipaddress.ip_address(int(universe.network_address) + offset)
            if classify(original, a) != classify(merged, a):
                merge_mismatches += 1
    ok = argmin_mismatches == 0 and merge_mismatches == 0
    report(
        capsys,
        "criterion 7, classifier correctness",
        ok,
        f"argmin mismatches {argmin_mismatches}/1000 snapshots (exact), "
        f"merge mismatches {merge_mismatches}/{2 * universe.num_addresses} "
        f"addresses over a /18 (exact)",
    )


def test_criterion_8_determinism(tmp_path, scenario_dir, capsys):
    doc = {
        "name": "det",
        "seed": 13,
        "constellation": "starlink",
        "stations": [
            {"id": "gs-a", "lat_deg": 48.0, "lon_deg": 2.0},
            {"id": "gs-b", "lat_deg": 40.0, "lon_deg": -74.0},
        ],
        "anchors": ["gs-a", "gs-b"],
        "users": [{"id": "ue-1", "waypoints": [[0.0, 44.0, -30.0]]}],
        "servers": [
            {"id": "srv-1", "lat_deg": 50.0, "lon_deg": 8.0, "address": "198.18.0.10"}
        ],
        "epochs": [60.0],
        "path_updates": {"enabled": True, "noise_sigma_ms": 2.0},
        "geo": [["198.18.0.0/24", 40.0, -74.0]],
    }
    tiny = tmp_path / "tiny.json"
    tiny.write_text(json.dumps(doc))
    runs = [
        ("latency-bench", ["latency-bench", "--scenario", str(tiny), "--seed", "99"]),
        ("session-bench", ["session-bench", "--scenario", str(tiny),
                           "--repetitions", "3", "--h-max", "5"]),
        ("distribute", ["distribute", "--scenario",
                        os.path.join(scenario_dir, "atlantic.json"), "--h", "20"]),
        ("table1", ["table1", "--scenario", os.path.join(scenario_dir, "table1.json")]),
    ]
    mismatched = []
    for i, (name, args) in enumerate(runs):
        a = tmp_path / f"{i}-a.csv"
        b = tmp_path / f"{i}-b.csv"
        assert main(args + ["--out", str(a)]) == EXIT_OK
        assert main(args + ["--out", str(b)]) == EXIT_OK
        if a.read_bytes() != b.read_bytes():
            mismatched.append(name)
    ok = not mismatched
    report(
        capsys,
        "criterion 8, byte-identical reruns",
        ok,
        "4/4 subcommands byte-identical"
        if ok
        else f"subcommands differ: {mismatched}",
    )
