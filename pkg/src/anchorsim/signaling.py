"""Control-plane timing: session establishment, insertion, S-UPF handover.

Modeled as a small discrete-event exchange between five node roles (ue,
gnb, core, supf, anchor-*). Every trace event carries the delivery time at
the receiver; every handled message costs one network-function processing
interval. Establishment toward multiple anchors either fans out in one
parallel round or inserts anchors one at a time, each with its own rule
installation round.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import EstablishmentTimeoutError, InputError, TeidMismatchError


def _default_legs() -> dict[tuple[str, str], float]:
    return {
        ("gnb", "ue"): 2.0,
        ("core", "gnb"): 15.0,
        ("core", "supf"): 15.0,
        ("anchor", "core"): 20.0,
    }


def _role(node: str) -> str:
    return node.split("-", 1)[0]


@dataclass
class TimingModel:
    """Leg delays (ms, one way) between node roles plus per-message cost.

    Keys are unordered pairs; an exact node-pair key (e.g. core/anchor-3)
    overrides the role-pair key. An infinite leg models an unresponsive
    peer. Values are invented plumbing, sized so defaults land near a
    hundred milliseconds per parallel establishment.
    """

    nf_processing_ms: float = 2.0
    legs: dict[tuple[str, str], float] = field(default_factory=_default_legs)

    def __post_init__(self) -> None:
        if self.nf_processing_ms < 0:
            raise InputError("processing cost must be non-negative")
        normalized = {}
        for key, value in self.legs.items():
            a, b = key
            if value < 0:
                raise InputError(f"negative leg delay for {key}: {value}")
            normalized[tuple(sorted((a, b)))] = float(value)
        self.legs = normalized

    def leg(self, a: str, b: str) -> float:
        exact = tuple(sorted((a, b)))
        if exact in self.legs:
            return self.legs[exact]
        by_role = tuple(sorted((_role(a), _role(b))))
        if by_role in self.legs:
            return self.legs[by_role]
        raise InputError(f"no leg delay configured between {a!r} and {b!r}")


@dataclass(frozen=True)
class TraceEvent:
    """One delivered (or completed, for internal steps) message."""

    time_ms: float
    sender: str
    receiver: str
    message: str


@dataclass(frozen=True)
class PduSession:
    session_id: int
    user_id: str
    anchor_ids: tuple[str, ...]
    serving_supf: str
    ip_token: str


@dataclass
class EstablishmentTrace:
    scheme: str
    anchor_count: int
    events: tuple[TraceEvent, ...]
    total_duration_ms: float
    teids: dict[str, int]
    session: PduSession


@dataclass(frozen=True)
class SweepPoint:
    anchor_count: int
    scheme: str
    mean_ms: float
    std_ms: float


class _Tape:
    """Accumulates trace events and enforces responsive legs."""

    def __init__(self, timing: TimingModel):
        self.timing = timing
        self.events: list[TraceEvent] = []

    def send(self, t: float, sender: str, receiver: str, message: str) -> float:
        leg = self.timing.leg(sender, receiver)
        if math.isinf(leg):
            raise EstablishmentTimeoutError(
                f"leg {sender} -> {receiver} is unresponsive"
            )
        arrival = t + leg
        self.events.append(TraceEvent(arrival, sender, receiver, message))
        return arrival

    def step(self, t: float, node: str, message: str) -> float:
        done = t + self.timing.nf_processing_ms
        self.events.append(TraceEvent(done, node, node, message))
        return done

    def freeze(self) -> tuple[TraceEvent, ...]:
        return tuple(sorted(self.events, key=lambda e: e.time_ms))


def _preamble(tape: _Tape) -> float:
    """UE request up to the core's policy step; returns core-ready time."""
    t = tape.send(0.0, "ue", "gnb", "pdu-session-establishment-request")
    t += tape.timing.nf_processing_ms
    t = tape.send(t, "gnb", "core", "pdu-session-establishment-request")
    t = tape.step(t, "core", "request-validated")
    t = tape.step(t, "core", "ue-authenticated")
    t = tape.step(t, "core", "policy-associated")
    return t


def _anchor_round_trip(tape: _Tape, t: float, anchor: str, teid: int) -> float:
    arr = tape.send(t, "core", anchor, "anchor-session-request")
    arr += tape.timing.nf_processing_ms
    return tape.send(arr, anchor, "core", f"anchor-session-response teid={teid}")


def _finish(
    tape: _Tape, t_rules_ready: float, teids: dict[str, int], reported: dict[str, int]
) -> float:
    """Concluding N2 + rule-installation round, run in parallel."""
    proc = tape.timing.nf_processing_ms
    arr_gnb = tape.send(t_rules_ready, "core", "gnb", "n2-session-setup")
    tape.send(arr_gnb + proc, "gnb", "ue", "radio-resource-reconfiguration")
    ack_a = tape.send(arr_gnb + proc, "gnb", "core", "n2-session-setup-ack")
    arr_supf = tape.send(t_rules_ready, "core", "supf", "pfcp-rule-installation")
    ack_b = tape.send(arr_supf + proc, "supf", "core", "pfcp-installation-ack")
    done = max(ack_a, ack_b) + proc
    for anchor, teid in reported.items():
        if teids[anchor] != teid:
            raise TeidMismatchError(
                f"{anchor} reported teid {teid}, expected {teids[anchor]}"
            )
    tape.events.append(TraceEvent(done, "core", "core", "pdu-session-established"))
    return done


def _session(anchors: list[str], session_id: int = 1) -> PduSession:
    return PduSession(session_id, "ue", tuple(anchors), "supf", f"ip-token-{session_id}")


def _check_anchor_count(n_anchors: int) -> None:
    if n_anchors < 1:
        raise InputError(f"need at least one anchor, got {n_anchors}")


def establish_parallel(
    n_anchors: int,
    timing: TimingModel | None = None,
    corrupt_teid_for: str | None = None,
) -> EstablishmentTrace:
    """Single fan-out establishment: all anchors contacted concurrently.

    The core aggregates anchor responses after the last arrival, then runs
    the N2 setup and the rule installation in parallel. Tunnel ids are
    verified against the installation ack; a corrupted one raises
    TeidMismatchError.
    """
    _check_anchor_count(n_anchors)
    timing = timing or TimingModel()
    tape = _Tape(timing)
    t = _preamble(tape)
    anchors = [f"anchor-{i}" for i in range(1, n_anchors + 1)]
    teids = {a: 1000 + i for i, a in enumerate(anchors, start=1)}
    last = max(_anchor_round_trip(tape, t, a, teids[a]) for a in anchors)
    t4 = tape.step(last, "core", "anchor-responses-aggregated")
    reported = dict(teids)
    if corrupt_teid_for is not None:
        if corrupt_teid_for not in reported:
            raise InputError(f"unknown anchor {corrupt_teid_for!r}")
        reported[corrupt_teid_for] += 7
    total = _finish(tape, t4, teids, reported)
    return EstablishmentTrace(
        "parallel", n_anchors, tape.freeze(), total, teids, _session(anchors)
    )


def establish_insertion_based(
    n_anchors: int,
    timing: TimingModel | None = None,
    corrupt_teid_for: str | None = None,
) -> EstablishmentTrace:
    """Anchor-at-a-time establishment: one rule round per extra anchor.

    The first anchor follows the same flow as the parallel scheme; every
    additional anchor costs a serial core->anchor round trip plus a
    core->supf rule installation round before the next one starts.
    """
    _check_anchor_count(n_anchors)
    timing = timing or TimingModel()
    tape = _Tape(timing)
    t = _preamble(tape)
    anchors = [f"anchor-{i}" for i in range(1, n_anchors + 1)]
    teids = {a: 1000 + i for i, a in enumerate(anchors, start=1)}
    if corrupt_teid_for is not None and corrupt_teid_for not in teids:
        raise InputError(f"unknown anchor {corrupt_teid_for!r}")
    proc = timing.nf_processing_ms
    first = anchors[0]
    t = _anchor_round_trip(tape, t, first, teids[first])
    t4 = tape.step(t, "core", "anchor-responses-aggregated")
    reported = {first: teids[first]}
    if corrupt_teid_for == first:
        reported[first] += 7
    t = _finish(tape, t4, {first: teids[first]}, reported)
    for anchor in anchors[1:]:
        t = _anchor_round_trip(tape, t, anchor, teids[anchor])
        t += proc
        arr = tape.send(t, "core", "supf", "pfcp-rule-installation")
        ack = tape.send(arr + proc, "supf", "core", "pfcp-installation-ack")
        t = ack + proc
        if corrupt_teid_for == anchor:
            raise TeidMismatchError(
                f"{anchor} reported teid {teids[anchor] + 7}, "
                f"expected {teids[anchor]}"
            )
        tape.events.append(TraceEvent(t, "core", "core", f"{anchor}-inserted"))
    return EstablishmentTrace(
        "insertion", n_anchors, tape.freeze(), t, teids, _session(anchors)
    )


def supf_handover(
    session: PduSession, new_supf: str, timing: TimingModel | None = None
) -> tuple[PduSession, float, tuple[TraceEvent, ...]]:
    """Move a session to another serving UPF without re-establishment.

    The rule table travels in one transfer round; user traffic is
    interrupted for the transfer round trip plus processing at both ends.
    Anchors and the IP token are untouched.
    """
    timing = timing or TimingModel()
    if new_supf == session.serving_supf:
        raise InputError(f"session already served by {new_supf!r}")
    tape = _Tape(timing)
    t = tape.send(0.0, "core", new_supf, "pfcp-session-transfer")
    t += timing.nf_processing_ms
    t = tape.send(t, new_supf, "core", "pfcp-transfer-ack")
    t += timing.nf_processing_ms
    moved = replace(session, serving_supf=new_supf)
    return moved, t, tape.freeze()


def _jittered(
    timing: TimingModel, h: int, rep: int, seed: int, fraction: float
) -> TimingModel:
    """Materialize per-anchor legs with multiplicative uniform jitter."""
    rng = np.random.default_rng([seed, h, rep])
    factors = rng.uniform(1.0 - fraction, 1.0 + fraction, size=h)
    legs = dict(timing.legs)
    base_model = TimingModel(timing.nf_processing_ms, dict(timing.legs))
    for i in range(1, h + 1):
        anchor = f"anchor-{i}"
        legs[("core", anchor)] = base_model.leg("core", anchor) * float(factors[i - 1])
    return TimingModel(timing.nf_processing_ms, legs)


def session_establishment_sweep(
    h_values,
    timing: TimingModel | None = None,
    repetitions: int = 1,
    seed: int = 0,
    jitter_fraction: float = 0.1,
) -> list[SweepPoint]:
    """Mean establishment time per anchor count for both schemes.

    With repetitions > 1 every repetition redraws each materialized
    per-anchor leg within +/- jitter_fraction; both schemes share the same
    drawn timing so the comparison stays paired.
    """
    timing = timing or TimingModel()
    if repetitions < 1:
        raise InputError("repetitions must be >= 1")
    if not 0.0 <= jitter_fraction < 1.0:
        raise InputError(f"jitter fraction out of [0, 1): {jitter_fraction}")
    points = []
    for h in h_values:
        _check_anchor_count(h)
        durations: dict[str, list[float]] = {"parallel": [], "insertion": []}
        for rep in range(repetitions):
            t = timing if repetitions == 1 else _jittered(timing, h, rep, seed, jitter_fraction)
            durations["parallel"].append(establish_parallel(h, t).total_duration_ms)
            durations["insertion"].append(
                establish_insertion_based(h, t).total_duration_ms
            )
        for scheme in ("parallel", "insertion"):
            vals = durations[scheme]
            std = statistics.pstdev(vals) if len(vals) > 1 else 0.0
            points.append(SweepPoint(h, scheme, statistics.fmean(vals), std))
    return points


def trace_to_csv(trace: EstablishmentTrace) -> str:
    """Signaling trace as CSV text: time_ms,sender,receiver,message."""
    lines = ["time_ms,sender,receiver,message"]
    for ev in trace.events:
        lines.append(f"{ev.time_ms:.3f},{ev.sender},{ev.receiver},{ev.message}")
    return "\n".join(lines) + "\n"
