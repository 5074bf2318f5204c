"""The three transition gateway models.

All three sit at the border between the IPv6 source network and the IPv4
destination network:

* DWC: resolves the destination with a succession-tree longest-prefix
  lookup, then applies stateless translation.
* BDSIIT: the same stateless translation, but resolution uses a flat
  pre-provisioned prefix table scanned linearly.
* DSTM: hosts hold temporary IPv4 leases and tunnel IPv4-in-IPv6 to the
  gateway, which detunnels toward the IPv4 side and re-tunnels replies.

Each gateway charges a configurable per-packet processing cost carried on
the packet and spent at the egress port.  Every ingress packet is counted
exactly once as forwarded or as dropped with a reason.
"""

from __future__ import annotations

import enum
from collections import Counter

from .addressing import IPv4Address, IPv6Address
from .headers import (
    HopLimitExceeded,
    Ipv4Header,
    Ipv6Header,
    NestedTunnelError,
    dstm_decapsulate,
    dstm_encapsulate,
    siit_v4_to_v6,
    siit_v6_to_v4,
)
from .lpm import SuccessionTree, oracle_lookup
from .network import Packet
from .pool import AddressPool


class GatewayKind(enum.Enum):
    DWC = "DWC"
    BDSIIT = "BDSIIT"
    DSTM = "DSTM"


class DropReason(enum.Enum):
    MAPPING_MISS = "mapping_miss"
    POOL_EXHAUSTED = "pool_exhausted"
    HOP_LIMIT = "hop_limit"
    BAD_FORMAT = "bad_format"


def encapsulate_packet(pkt: Packet, tunnel_src: IPv6Address, tunnel_dst: IPv6Address) -> None:
    """Wrap a v4 packet for the tunnel.  Nesting is refused."""
    if len(pkt.headers) != 1 or not isinstance(pkt.headers[0], Ipv4Header):
        raise NestedTunnelError("can only tunnel a plain IPv4 packet")
    inner = pkt.headers[0]
    pkt.headers.append(dstm_encapsulate(inner, tunnel_src, tunnel_dst))


def decapsulate_packet(pkt: Packet) -> Ipv6Header:
    """Strip the tunnel header, returning it.  The inner v4 header stays."""
    outer = pkt.headers[-1]
    inner = pkt.headers[0]
    dstm_decapsulate(outer, inner)
    pkt.headers.pop()
    return outer


class TranslationGateway:
    """Shared machinery for the two stateless translators (DWC, BDSIIT).

    Forward resolution maps the v6 destination to its v4 target (strategy
    differs per subclass); the v6 source maps through an exact
    pre-provisioned host table.  The reverse direction uses one exact
    v4-to-v6 map for both addresses.
    """

    kind: GatewayKind

    def __init__(self, latency_us: int,
                 host_v6_to_v4: dict[IPv6Address, IPv4Address],
                 reverse_v4_to_v6: dict[IPv4Address, IPv6Address]):
        self.latency_us = latency_us
        self.host_v6_to_v4 = host_v6_to_v4
        self.reverse_v4_to_v6 = reverse_v4_to_v6
        self.counters: Counter = Counter()

    def resolve_dst(self, dst: IPv6Address) -> IPv4Address | None:
        raise NotImplementedError

    def process_forward(self, pkt: Packet, now_us: int) -> DropReason | None:
        """Translate a v6 packet toward the v4 side, in place.  Returns a
        DropReason instead when the packet must be discarded."""
        self.counters["ingress"] += 1
        h = pkt.headers[-1]
        if not isinstance(h, Ipv6Header):
            self.counters["drop_" + DropReason.BAD_FORMAT.value] += 1
            return DropReason.BAD_FORMAT
        mapped_dst = self.resolve_dst(h.dst)
        mapped_src = self.host_v6_to_v4.get(h.src)
        if mapped_dst is None or mapped_src is None:
            self.counters["drop_" + DropReason.MAPPING_MISS.value] += 1
            return DropReason.MAPPING_MISS
        try:
            pkt.headers[-1] = siit_v6_to_v4(h, mapped_src, mapped_dst)
        except HopLimitExceeded:
            self.counters["drop_" + DropReason.HOP_LIMIT.value] += 1
            return DropReason.HOP_LIMIT
        pkt.gw_service_us = self.latency_us
        self.counters["translated"] += 1
        return None

    def process_reverse(self, pkt: Packet, now_us: int) -> DropReason | None:
        """Translate a v4 packet back toward the v6 side, in place."""
        self.counters["ingress"] += 1
        h = pkt.headers[-1]
        if not isinstance(h, Ipv4Header):
            self.counters["drop_" + DropReason.BAD_FORMAT.value] += 1
            return DropReason.BAD_FORMAT
        mapped_src = self.reverse_v4_to_v6.get(h.src)
        mapped_dst = self.reverse_v4_to_v6.get(h.dst)
        if mapped_src is None or mapped_dst is None:
            self.counters["drop_" + DropReason.MAPPING_MISS.value] += 1
            return DropReason.MAPPING_MISS
        try:
            pkt.headers[-1] = siit_v4_to_v6(h, mapped_src, mapped_dst)
        except HopLimitExceeded:
            self.counters["drop_" + DropReason.HOP_LIMIT.value] += 1
            return DropReason.HOP_LIMIT
        pkt.gw_service_us = self.latency_us
        self.counters["translated"] += 1
        return None

    def check_conservation(self) -> None:
        drops = sum(v for k, v in self.counters.items() if k.startswith("drop_"))
        out = self.counters["translated"] + self.counters["detunneled"] + self.counters["tunneled"]
        assert self.counters["ingress"] == out + drops, dict(self.counters)


class DwcGateway(TranslationGateway):
    """Dollop-tree resolution feeding stateless translation."""

    kind = GatewayKind.DWC

    def __init__(self, tree: SuccessionTree, latency_us: int,
                 host_v6_to_v4, reverse_v4_to_v6):
        super().__init__(latency_us, host_v6_to_v4, reverse_v4_to_v6)
        self.tree = tree

    def resolve_dst(self, dst: IPv6Address) -> IPv4Address | None:
        result = self.tree.lookup(dst)
        return None if result is None else result.entry.target


class BdsiitGateway(TranslationGateway):
    """Flat-table resolution feeding the same stateless translation."""

    kind = GatewayKind.BDSIIT

    def __init__(self, entries, latency_us: int, host_v6_to_v4, reverse_v4_to_v6):
        super().__init__(latency_us, host_v6_to_v4, reverse_v4_to_v6)
        self.entries = list(entries)

    def resolve_dst(self, dst: IPv6Address) -> IPv4Address | None:
        result = oracle_lookup(self.entries, dst)
        return None if result is None else result.entry.target


class DstmGateway:
    """Tunnel endpoint plus temporary-IPv4 address server."""

    kind = GatewayKind.DSTM

    def __init__(self, pool: AddressPool, tunnel_addr: IPv6Address,
                 encap_latency_us: int, alloc_latency_us: int):
        self.pool = pool
        self.tunnel_addr = tunnel_addr
        self.encap_latency_us = encap_latency_us
        self.alloc_latency_us = alloc_latency_us
        self.counters: Counter = Counter()
        self._flows_seen: set[int] = set()

    def lease_for(self, host: IPv6Address, flow_id: int, now_us: int) -> tuple[IPv4Address | None, int]:
        """Allocate (or renew) the host's temporary address.

        Returns (address, extra_latency_us).  The allocation cost is
        charged once per flow, on its first packet; a denial returns
        (None, 0) and the caller drops the packet.
        """
        addr = self.pool.allocate(host, now_us)
        if addr is None:
            self.counters["ingress"] += 1
            self.counters["drop_" + DropReason.POOL_EXHAUSTED.value] += 1
            return None, 0
        extra = 0
        if flow_id not in self._flows_seen:
            self._flows_seen.add(flow_id)
            extra = self.alloc_latency_us
        return addr, extra

    def holder_of(self, addr: IPv4Address) -> IPv6Address | None:
        for host, lease in self.pool._leases.items():
            if lease.address == addr:
                return host
        return None

    def process_forward(self, pkt: Packet, now_us: int) -> DropReason | None:
        """Detunnel a v4-in-v6 packet and forward the inner v4 packet."""
        self.counters["ingress"] += 1
        if len(pkt.headers) != 2 or not isinstance(pkt.headers[-1], Ipv6Header):
            self.counters["drop_" + DropReason.BAD_FORMAT.value] += 1
            return DropReason.BAD_FORMAT
        decapsulate_packet(pkt)
        pkt.gw_service_us = self.encap_latency_us + pkt.alloc_service_us
        pkt.alloc_service_us = 0
        self.counters["detunneled"] += 1
        return None

    def process_reverse(self, pkt: Packet, now_us: int) -> DropReason | None:
        """Tunnel a v4 reply back to the dual-stack host holding the lease."""
        self.counters["ingress"] += 1
        h = pkt.headers[-1]
        if not isinstance(h, Ipv4Header):
            self.counters["drop_" + DropReason.BAD_FORMAT.value] += 1
            return DropReason.BAD_FORMAT
        host = self.holder_of(h.dst)
        if host is None:
            self.counters["drop_" + DropReason.MAPPING_MISS.value] += 1
            return DropReason.MAPPING_MISS
        encapsulate_packet(pkt, self.tunnel_addr, host)
        pkt.gw_service_us = self.encap_latency_us
        self.counters["tunneled"] += 1
        return None

    def check_conservation(self) -> None:
        drops = sum(v for k, v in self.counters.items() if k.startswith("drop_"))
        out = self.counters["detunneled"] + self.counters["tunneled"]
        assert self.counters["ingress"] == out + drops, dict(self.counters)
