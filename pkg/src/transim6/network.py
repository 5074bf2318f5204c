"""Packets, drop-tail queues, store-and-forward ports and the trace log.

A Port is one egress interface: a drop-tail queue in front of a single
server.  The server holds each packet for its serialization time
(wire_size * 8 / bandwidth, floored to the microsecond) plus any
processing cost the owning node attached to the packet, then delivers it
after the propagation delay.  Ports are work-conserving: the server never
idles while the queue is non-empty.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .engine import (
    KIND_PACKET_ARRIVAL,
    KIND_TRANSMIT_COMPLETE,
    US_PER_S,
    EventQueue,
    format_time,
)
from .headers import IPV4_HEADER_BYTES, IPV6_HEADER_BYTES, Ipv4Header, Ipv6Header

PROTO_TCP = "TCP"
PROTO_UDP = "UDP"

# flow ids >= this are transport acknowledgements of (id - offset)
ACK_FLOW_OFFSET = 1000


@dataclass
class Packet:
    """One simulated datagram (or one transmission of one, for TCP)."""

    flow_id: int
    seq_no: int
    payload_size: int
    proto: str
    created_at_us: int
    received_at_us: int | None = None
    headers: list = field(default_factory=list)  # innermost first
    gw_service_us: int = 0     # processing cost to spend at the next port
    alloc_service_us: int = 0  # one-shot address-allocation cost (tunnel flows)

    @property
    def wire_size(self) -> int:
        size = self.payload_size
        for h in self.headers:
            size += IPV4_HEADER_BYTES if isinstance(h, Ipv4Header) else IPV6_HEADER_BYTES
        return size


class TraceRecorder:
    """Collects trace records; one line per event.

    Format: `<ev> <time> <node> <flow> <seq> <bytes> <proto>` with ev one
    of s(end), r(eceive), +(enqueue), -(dequeue), d(rop).  The byte column
    is the application payload for s/r records and the on-wire size for
    queue records.
    """

    def __init__(self):
        self.lines: list[str] = []

    def record(self, ev: str, t_us: int, node: str, pkt: Packet, nbytes: int) -> None:
        self.lines.append(
            f"{ev} {format_time(t_us)} {node} {pkt.flow_id} {pkt.seq_no} {nbytes} {pkt.proto}")

    def send(self, t_us: int, node: str, pkt: Packet) -> None:
        self.record("s", t_us, node, pkt, pkt.payload_size)

    def receive(self, t_us: int, node: str, pkt: Packet) -> None:
        self.record("r", t_us, node, pkt, pkt.payload_size)

    def enqueue(self, t_us: int, node: str, pkt: Packet) -> None:
        self.record("+", t_us, node, pkt, pkt.wire_size)

    def dequeue(self, t_us: int, node: str, pkt: Packet) -> None:
        self.record("-", t_us, node, pkt, pkt.wire_size)

    def drop(self, t_us: int, node: str, pkt: Packet) -> None:
        self.record("d", t_us, node, pkt, pkt.wire_size)

    def text(self) -> str:
        return "\n".join(self.lines) + ("\n" if self.lines else "")


class DropTailQueue:
    """Bounded FIFO; a full queue rejects new arrivals."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self._items: deque = deque()
        self.drop_count = 0

    @property
    def occupancy(self) -> int:
        return len(self._items)

    def try_enqueue(self, pkt: Packet) -> bool:
        if len(self._items) >= self.capacity:
            self.drop_count += 1
            return False
        self._items.append(pkt)
        return True

    def dequeue(self) -> Packet:
        return self._items.popleft()


def serialization_us(wire_bytes: int, bandwidth_bps: int) -> int:
    return wire_bytes * 8 * US_PER_S // bandwidth_bps


class Port:
    """Egress interface: drop-tail queue + single transmit server + wire."""

    def __init__(self, name: str, queue_capacity: int, bandwidth_bps: int,
                 prop_delay_us: int, events: EventQueue, trace: TraceRecorder,
                 deliver):
        self.name = name
        self.queue = DropTailQueue(queue_capacity)
        self.bandwidth_bps = bandwidth_bps
        self.prop_delay_us = prop_delay_us
        self.events = events
        self.trace = trace
        self.deliver = deliver  # callback(pkt) at the far end
        self.busy = False

    def send(self, pkt: Packet) -> bool:
        """Hand a packet to this interface.  False means queue-full drop."""
        now = self.events.now_us
        if not self.queue.try_enqueue(pkt):
            self.trace.drop(now, self.name, pkt)
            return False
        self.trace.enqueue(now, self.name, pkt)
        if not self.busy:
            self._transmit_next()
        return True

    def _transmit_next(self) -> None:
        pkt = self.queue.dequeue()
        now = self.events.now_us
        self.trace.dequeue(now, self.name, pkt)
        self.busy = True
        service = pkt.gw_service_us + serialization_us(pkt.wire_size, self.bandwidth_bps)
        pkt.gw_service_us = 0
        self.events.schedule_in(service, KIND_TRANSMIT_COMPLETE, self._on_tx_done, pkt)

    def _on_tx_done(self, pkt: Packet) -> None:
        self.events.schedule_in(self.prop_delay_us, KIND_PACKET_ARRIVAL, self.deliver, pkt)
        if self.queue.occupancy:
            self._transmit_next()
        else:
            self.busy = False
