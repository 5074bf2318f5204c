"""The four run metrics and the trace-file plumbing that feeds them.

Throughput is reported two ways: raw delivered bits per second, and the
delivered-to-sent byte percentage (the form that can actually be a
percentage bounded by 100).  The loss rate divides by packets *received*,
with the conventional by-sent form available via the denominator switch.
Jitter is the first difference of consecutive per-packet delays within a
flow.  Byte counters are application payload throughout, so header
translation along the path does not skew the ratios.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

from .network import ACK_FLOW_OFFSET


class UndefinedMetricError(ValueError):
    """The metric's denominator is empty for these stats."""


class TraceInvariantError(AssertionError):
    """A trace violated conservation, queue bounds or causality."""


@dataclass
class FlowStats:
    """Counters for one flow, or an aggregate over flows."""

    sent_count: int = 0
    received_count: int = 0
    sent_bytes: int = 0
    received_bytes: int = 0
    delays: list = field(default_factory=list)  # seconds, receive order
    sim_time: float = 0.0

    def merged_with(self, other: "FlowStats") -> "FlowStats":
        return FlowStats(
            self.sent_count + other.sent_count,
            self.received_count + other.received_count,
            self.sent_bytes + other.sent_bytes,
            self.received_bytes + other.received_bytes,
            self.delays + other.delays,
            max(self.sim_time, other.sim_time),
        )


def throughput(stats: FlowStats) -> tuple[float, float]:
    """(bits per second, delivered percentage)."""
    if stats.sim_time <= 0:
        raise UndefinedMetricError("sim_time must be positive")
    if stats.sent_bytes == 0:
        raise UndefinedMetricError("no bytes sent")
    bps = stats.received_bytes * 8.0 / stats.sim_time
    pct = 100.0 * stats.received_bytes / stats.sent_bytes
    return bps, pct


def mean_eed(stats: FlowStats) -> float:
    """Mean end-to-end delay in milliseconds."""
    if stats.received_count < 1:
        raise UndefinedMetricError("no packets received")
    return sum(stats.delays) / len(stats.delays) * 1000.0


def plr(stats: FlowStats, denominator: str = "received") -> float:
    """Loss percentage: (sent - received) / received by default, or
    / sent with denominator='sent'."""
    lost = stats.sent_count - stats.received_count
    if denominator == "received":
        if stats.received_count < 1:
            raise UndefinedMetricError("no packets received (total loss)")
        return 100.0 * lost / stats.received_count
    if denominator == "sent":
        if stats.sent_count < 1:
            raise UndefinedMetricError("no packets sent")
        return 100.0 * lost / stats.sent_count
    raise ValueError(f"unknown denominator {denominator!r}")


def jitter_series(stats: FlowStats) -> list[float]:
    """Consecutive delay differences in ms; empty below two packets."""
    d = stats.delays
    return [(d[i + 1] - d[i]) * 1000.0 for i in range(len(d) - 1)]


# -- trace parsing ------------------------------------------------------------

def _parse_time_us(text: str) -> int:
    sec, _, frac = text.partition(".")
    return int(sec) * 1_000_000 + int(frac.ljust(6, "0"))


def parse_trace(text: str, sim_time: float) -> dict[int, FlowStats]:
    """Rebuild per-flow stats from a trace.

    A receive is matched to the most recent send of the same (flow, seq),
    which handles retransmitted sequence numbers.
    """
    flows: dict[int, FlowStats] = {}
    pending: dict[tuple[int, int], int] = {}
    for line in text.splitlines():
        ev, t_text, _node, flow_text, seq_text, nbytes_text, _proto = line.split()
        flow = int(flow_text)
        st = flows.get(flow)
        if st is None:
            st = flows[flow] = FlowStats(sim_time=sim_time)
        if ev == "s":
            st.sent_count += 1
            st.sent_bytes += int(nbytes_text)
            pending[(flow, int(seq_text))] = _parse_time_us(t_text)
        elif ev == "r":
            st.received_count += 1
            st.received_bytes += int(nbytes_text)
            sent_at = pending[(flow, int(seq_text))]
            st.delays.append((_parse_time_us(t_text) - sent_at) / 1_000_000)
    return flows


def data_flows(flows: dict[int, FlowStats]) -> dict[int, FlowStats]:
    """Drop transport-ack flows, keeping application flows."""
    return {f: st for f, st in flows.items() if f < ACK_FLOW_OFFSET}


def aggregate(flows: dict[int, FlowStats], sim_time: float | None = None) -> FlowStats:
    """Merge flows (ascending id) into one FlowStats."""
    total = FlowStats(sim_time=sim_time or 0.0)
    for flow_id in sorted(flows):
        total = total.merged_with(flows[flow_id])
    if sim_time is not None:
        total.sim_time = sim_time
    return total


def check_trace_invariants(text: str, queue_capacity: int) -> dict:
    """Verify conservation, queue bounds and causality on a trace.

    Per flow: sends = receives + drops + in-flight with in-flight >= 0.
    Per port: running occupancy stays within [0, capacity].  Receives must
    match an earlier send.  Raises TraceInvariantError on violation;
    returns summary counters otherwise.
    """
    sent: dict[int, int] = {}
    received: dict[int, int] = {}
    dropped: dict[int, int] = {}
    occupancy: dict[str, int] = {}
    sends_seen: dict[tuple[int, int], int] = {}
    last_t = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        ev, t_text, node, flow_text, seq_text, _nbytes, _proto = line.split()
        t = _parse_time_us(t_text)
        if t < last_t:
            raise TraceInvariantError(f"line {lineno}: time goes backwards")
        last_t = t
        flow = int(flow_text)
        if ev == "s":
            sent[flow] = sent.get(flow, 0) + 1
            sends_seen[(flow, int(seq_text))] = t
        elif ev == "r":
            received[flow] = received.get(flow, 0) + 1
            key = (flow, int(seq_text))
            if key not in sends_seen:
                raise TraceInvariantError(f"line {lineno}: receive without send {key}")
            if t < sends_seen[key]:
                raise TraceInvariantError(f"line {lineno}: receive before send {key}")
        elif ev == "d":
            dropped[flow] = dropped.get(flow, 0) + 1
        elif ev == "+":
            occ = occupancy.get(node, 0) + 1
            if occ > queue_capacity:
                raise TraceInvariantError(
                    f"line {lineno}: occupancy {occ} exceeds capacity {queue_capacity} at {node}")
            occupancy[node] = occ
        elif ev == "-":
            occ = occupancy.get(node, 0) - 1
            if occ < 0:
                raise TraceInvariantError(f"line {lineno}: dequeue from empty queue at {node}")
            occupancy[node] = occ
        else:
            raise TraceInvariantError(f"line {lineno}: unknown event {ev!r}")
    in_flight = {}
    for flow in sent:
        inflight = sent[flow] - received.get(flow, 0) - dropped.get(flow, 0)
        if inflight < 0:
            raise TraceInvariantError(
                f"flow {flow}: received+dropped exceeds sent ({inflight})")
        in_flight[flow] = inflight
    return {
        "sent": sum(sent.values()),
        "received": sum(received.values()),
        "dropped": sum(dropped.values()),
        "in_flight": sum(in_flight.values()),
    }


# -- report rows --------------------------------------------------------------

REPORT_HEADER = ("mechanism,traffic,packet_size_bytes,throughput_pct,"
                 "throughput_bps,mean_eed_ms,plr_pct")


@dataclass(frozen=True)
class MetricsReport:
    mechanism: str
    traffic: str
    packet_size: int
    throughput_pct: float
    throughput_bps: float
    mean_eed_ms: float
    plr_pct: float

    def csv_row(self) -> str:
        return (f"{self.mechanism},{self.traffic},{self.packet_size},"
                f"{self.throughput_pct:.6f},{self.throughput_bps:.6f},"
                f"{self.mean_eed_ms:.6f},{self.plr_pct:.6f}")


def report_from_stats(mechanism: str, traffic: str, packet_size: int,
                      stats: FlowStats, plr_denominator: str = "received") -> MetricsReport:
    """Build a report row; an all-lost run reports zero throughput,
    undefined delay (nan) and total loss (inf)."""
    bps, pct = throughput(stats)
    if stats.received_count:
        eed = mean_eed(stats)
        loss = plr(stats, plr_denominator)
    else:
        eed = float("nan")
        loss = 100.0 if plr_denominator == "sent" else float("inf")
    return MetricsReport(mechanism, traffic, packet_size, pct, bps, eed, loss)


def write_report_csv(rows, path) -> None:
    lines = [REPORT_HEADER] + [r.csv_row() for r in rows]
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def read_report_csv(path) -> list[dict]:
    """Parse a report back; numeric columns become floats (size an int)."""
    with open(path) as f:
        text = f.read()
    reader = csv.DictReader(io.StringIO(text))
    expected = REPORT_HEADER.split(",")
    if reader.fieldnames != expected:
        raise ValueError(f"unexpected report header {reader.fieldnames}")
    rows = []
    for rec in reader:
        rows.append({
            "mechanism": rec["mechanism"],
            "traffic": rec["traffic"],
            "packet_size_bytes": int(rec["packet_size_bytes"]),
            "throughput_pct": float(rec["throughput_pct"]),
            "throughput_bps": float(rec["throughput_bps"]),
            "mean_eed_ms": float(rec["mean_eed_ms"]),
            "plr_pct": float(rec["plr_pct"]),
        })
    return rows


def write_jitter_csv(flows: dict[int, FlowStats], path) -> None:
    """Sidecar: one row per consecutive delivered pair, per data flow."""
    lines = ["flow,seq,jitter_ms"]
    for flow_id in sorted(flows):
        for i, j in enumerate(jitter_series(flows[flow_id]), start=1):
            lines.append(f"{flow_id},{i},{j:.6f}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")
