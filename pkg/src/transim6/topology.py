"""Dumbbell topology: IPv6 sources, one transition gateway, IPv4 sinks.

Forward path: each source has its own access link into the gateway; the
gateway's egress interface onto the bottleneck link holds the drop-tail
IFQ.  The gateway's per-packet processing cost is spent in that
interface's server, so translation work and transmission serialize like a
store-and-forward software router.  Replies come back over a shared
reverse bottleneck, are processed by the gateway and fan out over
per-source reverse access links.

Addressing plan (fixed, documented for trace reading):
  source i        2001:db8:1:<i+1>::1   mapped to 203.0.113.<i+1>
  sink j          198.51.100.<j+1>      reachable as 2001:db8:64::<v4>
The sink representations are installed as /128 mapping entries under a
covering /96, so forward lookups exercise nested prefixes.
"""

from __future__ import annotations

from dataclasses import dataclass, replace as dc_replace

from .addressing import IPv4Address, IPv6Address, Ipv6Prefix, parse_ipv6
from .config import ScenarioConfig
from .engine import EventQueue, SplitMix64, ms_to_us, s_to_us
from .gateways import (
    BdsiitGateway,
    DstmGateway,
    DwcGateway,
    GatewayKind,
    encapsulate_packet,
)
from .headers import Ipv4Header, Ipv6Header
from .lpm import MappingEntry, SuccessionTree, load_mapping_table
from .network import ACK_FLOW_OFFSET, PROTO_TCP, PROTO_UDP, Packet, Port, TraceRecorder
from .pool import AddressPool
from .traffic import CbrSource, FtpSender, TcpReceiver

PROTO_NUM = {PROTO_TCP: 6, PROTO_UDP: 17}
INITIAL_HOPS = 64

SINK_V6_PREFIX = parse_ipv6("2001:db8:64::")
SINK_V4_BASE = 0xC6336400   # 198.51.100.0
SRC_V4_BASE = 0xCB007100    # 203.0.113.0


@dataclass
class FlowRunStats:
    """Per-flow counters accumulated during a run; byte counters are
    application payload."""

    sent: int = 0
    received: int = 0
    sent_bytes: int = 0
    received_bytes: int = 0
    delays_us: list = None

    def __post_init__(self):
        if self.delays_us is None:
            self.delays_us = []


@dataclass(frozen=True)
class FlowSpec:
    flow_id: int
    kind: str  # FTP | CBR
    src_index: int
    sink_index: int


def source_v6(i: int) -> IPv6Address:
    return IPv6Address.from_chunks((0x2001, 0x0DB8, 1, i + 1, 0, 0, 0, 1))


def source_v4rep(i: int) -> IPv4Address:
    return IPv4Address(SRC_V4_BASE + i + 1)


def sink_v4(j: int) -> IPv4Address:
    return IPv4Address(SINK_V4_BASE + j + 1)


def sink_v6rep(j: int) -> IPv6Address:
    return IPv6Address(SINK_V6_PREFIX.value | sink_v4(j).value)


class Simulation:
    """One fully wired scenario, ready to run."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.events = EventQueue()
        self.trace = TraceRecorder()
        self.stats: dict[int, FlowRunStats] = {}
        self.mechanism = GatewayKind(cfg.mechanism)
        self._senders = {}       # data flow id -> FtpSender (TCP flows only)
        self._receivers = {}     # data flow id -> TcpReceiver
        self._reply_v4 = {}      # data flow id -> v4 address acks go to
        self._build()

    # -- construction --------------------------------------------------------

    def _build(self) -> None:
        cfg = self.cfg
        self.flows = self._make_flows()
        if not self.flows:
            raise ValueError("scenario has no active flows "
                             "(check traffic and traffic.*_flows)")
        self._sink_of = {f.flow_id: f.sink_index for f in self.flows}
        self.gateway = self._make_gateway()

        ev, tr = self.events, self.trace
        cap = cfg.queue_capacity
        acc_prop = ms_to_us(cfg.access_delay_ms)
        bn_prop = ms_to_us(cfg.bottleneck_delay_ms)

        self.sinks_by_v4 = {sink_v4(j): j for j in range(cfg.sinks)}
        self.src_by_v6 = {source_v6(i): i for i in range(cfg.sources)}

        self.bottleneck_port = Port("gw:bn", cap, cfg.bottleneck_rate_bps, bn_prop,
                                    ev, tr, self._deliver_to_sink)
        self.reverse_bottleneck_port = Port("agg:rbn", cap, cfg.bottleneck_rate_bps,
                                            bn_prop, ev, tr, self._gw_reverse)
        self.access_ports = [
            Port(f"src{i}:acc", cap, cfg.access_rate_bps, acc_prop, ev, tr,
                 self._gw_forward)
            for i in range(cfg.sources)
        ]
        self.rev_access_ports = {
            source_v6(i): Port(f"gw:r{i}", cap, cfg.access_rate_bps, acc_prop,
                               ev, tr, self._make_source_receiver(i))
            for i in range(cfg.sources)
        }

        self._start_flows()

    def _make_flows(self) -> list[FlowSpec]:
        cfg = self.cfg
        flows = []
        if cfg.traffic in ("FTP", "MIXED"):
            for k in range(cfg.ftp_flows):
                flows.append(FlowSpec(k, "FTP", k % cfg.sources, k % cfg.sinks))
        if cfg.traffic in ("CBR", "MIXED"):
            for k in range(cfg.cbr_flows):
                flows.append(FlowSpec(cfg.ftp_flows + k, "CBR",
                                      k % cfg.sources, k % cfg.sinks))
        return flows

    def _mapping_entries(self) -> list[MappingEntry]:
        cfg = self.cfg
        entries = [MappingEntry(
            Ipv6Prefix.canonical(IPv6Address(SINK_V6_PREFIX.value), 96),
            IPv4Address(SINK_V4_BASE), entry_id=-1)]
        for j in range(cfg.sinks):
            entries.append(MappingEntry(
                Ipv6Prefix(sink_v6rep(j), 128), sink_v4(j), entry_id=j))
        if cfg.mapping_table:
            entries.extend(load_mapping_table(cfg.mapping_table))
        return entries

    def _make_gateway(self):
        cfg = self.cfg
        host_map = {source_v6(i): source_v4rep(i) for i in range(cfg.sources)}
        reverse = {sink_v4(j): sink_v6rep(j) for j in range(cfg.sinks)}
        reverse.update({source_v4rep(i): source_v6(i) for i in range(cfg.sources)})
        if self.mechanism is GatewayKind.DWC:
            tree = SuccessionTree()
            for e in self._mapping_entries():
                tree.insert(e)
            return DwcGateway(tree, ms_to_us(cfg.dwc_ms), host_map, reverse)
        if self.mechanism is GatewayKind.BDSIIT:
            return BdsiitGateway(self._mapping_entries(), ms_to_us(cfg.bdsiit_ms),
                                 host_map, reverse)
        pool = AddressPool.from_spec(cfg.dstm_pool, s_to_us(cfg.dstm_lease_s))
        return DstmGateway(pool, parse_ipv6("2001:db8:ffff::1"),
                           ms_to_us(cfg.dstm_encap_ms), ms_to_us(cfg.dstm_alloc_ms))

    def _start_flows(self) -> None:
        cfg = self.cfg
        rng = SplitMix64(cfg.seed)
        end_us = s_to_us(cfg.sim_time_s)
        cbr_flows = [f for f in self.flows if f.kind == "CBR"]
        interval_us = 0
        if cbr_flows:
            load = cfg.cbr_load_mixed if cfg.traffic == "MIXED" else cfg.cbr_load
            wire = cfg.packet_size + 40  # native v6 size, mechanism independent
            per_flow_bps = load * cfg.bottleneck_rate_bps / len(cbr_flows)
            interval_us = round(wire * 8 * 1_000_000 / per_flow_bps)
        ftp_rank = cbr_rank = 0
        for flow in self.flows:
            jitter = rng.randrange(1000)
            if flow.kind == "FTP":
                start = 10_000 * (ftp_rank + 1) + jitter
                sender = FtpSender(self.events, flow.flow_id, cfg.packet_size,
                                   start, self._make_emitter(flow),
                                   window_cap=cfg.tcp_window)
                self._senders[flow.flow_id] = sender
                self._receivers[flow.flow_id] = TcpReceiver(
                    self._make_acker(flow.flow_id))
                sender.start()
                ftp_rank += 1
            else:
                start = 100_000 + cbr_rank * interval_us // len(cbr_flows) + jitter
                CbrSource(self.events, flow.flow_id, cfg.packet_size, interval_us,
                          start, end_us, self._make_emitter(flow)).start()
                cbr_rank += 1
            self.stats[flow.flow_id] = FlowRunStats()

    # -- forward path --------------------------------------------------------

    def _make_emitter(self, flow: FlowSpec):
        proto = PROTO_TCP if flow.kind == "FTP" else PROTO_UDP
        src_i, sink_j = flow.src_index, flow.sink_index

        def emit(flow_id: int, seq: int, payload: int) -> None:
            self._app_send(flow_id, seq, payload, proto, src_i, sink_j)

        return emit

    def _app_send(self, flow_id: int, seq: int, payload: int, proto: str,
                  src_i: int, sink_j: int) -> None:
        now = self.events.now_us
        pkt = Packet(flow_id, seq, payload, proto, created_at_us=now)
        st = self.stats[flow_id]
        st.sent += 1
        st.sent_bytes += payload
        src_name = f"src{src_i}"
        self.trace.send(now, src_name, pkt)
        if self.mechanism is GatewayKind.DSTM:
            host = source_v6(src_i)
            leased, alloc_extra = self.gateway.lease_for(host, flow_id, now)
            if leased is None:
                self.trace.drop(now, src_name, pkt)
                return
            inner = Ipv4Header(src=leased, dst=sink_v4(sink_j), ttl=INITIAL_HOPS,
                               protocol=PROTO_NUM[proto], tos=0,
                               total_length=payload + 20)
            pkt.headers.append(inner)
            encapsulate_packet(pkt, host, self.gateway.tunnel_addr)
            pkt.alloc_service_us = alloc_extra
        else:
            pkt.headers.append(Ipv6Header(
                src=source_v6(src_i), dst=sink_v6rep(sink_j),
                hop_limit=INITIAL_HOPS, next_header=PROTO_NUM[proto],
                traffic_class=0, payload_length=payload))
        self.access_ports[src_i].send(pkt)

    def _gw_forward(self, pkt: Packet) -> None:
        now = self.events.now_us
        if self.mechanism is GatewayKind.DSTM:
            reason = self.gateway.process_forward(pkt, now)
            if reason is None:
                inner = pkt.headers[0]
                if inner.ttl < 1:
                    reason = "hop_limit"
                else:
                    pkt.headers[0] = dc_replace(inner, ttl=inner.ttl - 1)
        else:
            reason = self.gateway.process_forward(pkt, now)
        if reason is not None:
            self.trace.drop(now, "gw", pkt)
            return
        self.bottleneck_port.send(pkt)

    def _deliver_to_sink(self, pkt: Packet) -> None:
        now = self.events.now_us
        dst = pkt.headers[-1].dst
        sink_j = self.sinks_by_v4[dst]
        pkt.received_at_us = now
        st = self.stats[pkt.flow_id]
        st.received += 1
        st.received_bytes += pkt.payload_size
        st.delays_us.append(now - pkt.created_at_us)
        self.trace.receive(now, f"dst{sink_j}", pkt)
        if pkt.proto == PROTO_TCP and pkt.flow_id in self._receivers:
            self._reply_v4[pkt.flow_id] = pkt.headers[-1].src
            self._receivers[pkt.flow_id].on_data(pkt.seq_no)

    # -- reverse path --------------------------------------------------------

    def _make_acker(self, flow_id: int):
        def send_ack(ack_no: int) -> None:
            self._emit_ack(flow_id, ack_no)
        return send_ack

    def _emit_ack(self, flow_id: int, ack_no: int) -> None:
        now = self.events.now_us
        sink_j = self._sink_of[flow_id]
        ack_flow = flow_id + ACK_FLOW_OFFSET
        ack = Packet(ack_flow, ack_no, 0, PROTO_TCP, created_at_us=now)
        ack.headers.append(Ipv4Header(
            src=sink_v4(sink_j), dst=self._reply_v4[flow_id], ttl=INITIAL_HOPS,
            protocol=PROTO_NUM[PROTO_TCP], tos=0, total_length=20))
        st = self.stats.setdefault(ack_flow, FlowRunStats())
        st.sent += 1
        self.trace.send(now, f"dst{sink_j}", ack)
        self.reverse_bottleneck_port.send(ack)

    def _gw_reverse(self, pkt: Packet) -> None:
        now = self.events.now_us
        if self.mechanism is GatewayKind.DSTM:
            h = pkt.headers[-1]
            if h.ttl < 1:
                self.trace.drop(now, "gw", pkt)
                return
            pkt.headers[-1] = dc_replace(h, ttl=h.ttl - 1)
            reason = self.gateway.process_reverse(pkt, now)
        else:
            reason = self.gateway.process_reverse(pkt, now)
        if reason is not None:
            self.trace.drop(now, "gw", pkt)
            return
        dst = pkt.headers[-1].dst
        self.rev_access_ports[dst].send(pkt)

    def _make_source_receiver(self, src_i: int):
        def deliver(pkt: Packet) -> None:
            now = self.events.now_us
            if self.mechanism is GatewayKind.DSTM and len(pkt.headers) == 2:
                pkt.headers.pop()  # host strips the tunnel header
            pkt.received_at_us = now
            st = self.stats.setdefault(pkt.flow_id, FlowRunStats())
            st.received += 1
            st.delays_us.append(now - pkt.created_at_us)
            self.trace.receive(now, f"src{src_i}", pkt)
            sender = self._senders.get(pkt.flow_id - ACK_FLOW_OFFSET)
            if sender is not None:
                sender.on_ack(pkt.seq_no)
        return deliver

    # -- running -------------------------------------------------------------

    def run(self) -> None:
        self.events.run_until(s_to_us(self.cfg.sim_time_s))

    def trace_text(self) -> str:
        return self.trace.text()


def build_topology(cfg: ScenarioConfig) -> Simulation:
    """Wire a scenario into a ready-to-run simulation."""
    return Simulation(cfg)
