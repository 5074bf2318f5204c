import random

import pytest

from transim6.addressing import IPv4Address, IPv6Address, parse_ipv4, parse_ipv6, parse_prefix
from transim6.gateways import (
    BdsiitGateway,
    DropReason,
    DstmGateway,
    DwcGateway,
    encapsulate_packet,
)
from transim6.headers import (
    ENCAPSULATED_IPV4,
    HopLimitExceeded,
    Ipv4Header,
    Ipv6Header,
    NestedTunnelError,
    TunnelFormatError,
    dstm_decapsulate,
    dstm_encapsulate,
    siit_v4_to_v6,
    siit_v6_to_v4,
)
from transim6.lpm import MappingEntry, SuccessionTree
from transim6.network import Packet
from transim6.pool import AddressPool

V4A = parse_ipv4("192.0.2.1")
V4B = parse_ipv4("198.51.100.7")
V6A = parse_ipv6("2001:db8::1")
V6B = parse_ipv6("2001:db8:64::c633:6407")  # V4B embedded under the /96


def v6_header(payload=100, hops=64, nh=17, tc=0):
    return Ipv6Header(src=V6A, dst=V6B, hop_limit=hops, next_header=nh,
                      traffic_class=tc, payload_length=payload)


# -- stateless translation ----------------------------------------------------

def test_siit_v6_to_v4_field_mapping():
    h4 = siit_v6_to_v4(v6_header(payload=100, hops=64, nh=6, tc=0x20), V4A, V4B)
    assert h4.ttl == 63
    assert h4.protocol == 6
    assert h4.tos == 0x20
    assert h4.total_length == 120
    assert (h4.src, h4.dst) == (V4A, V4B)


def test_siit_header_size_delta_is_20_bytes():
    # v6 wire = payload + 40; v4 wire = payload + 20
    h6 = v6_header(payload=100)
    h4 = siit_v6_to_v4(h6, V4A, V4B)
    assert (h6.payload_length + 40) - h4.total_length == 20


def test_siit_discards_on_exhausted_hops():
    with pytest.raises(HopLimitExceeded):
        siit_v6_to_v4(v6_header(hops=0), V4A, V4B)
    with pytest.raises(HopLimitExceeded):
        siit_v4_to_v6(Ipv4Header(V4A, V4B, 0, 17, 0, 40), V6A, V6B)


def test_siit_empty_payload_boundary():
    h6 = siit_v4_to_v6(Ipv4Header(V4A, V4B, 1, 17, 0, 20), V6A, V6B)
    assert h6.payload_length == 0
    assert h6.hop_limit == 0


def test_siit_round_trip_preserves_fields():
    h6 = v6_header(payload=321, hops=64, nh=6, tc=7)
    back = siit_v4_to_v6(siit_v6_to_v4(h6, V4A, V4B), h6.src, h6.dst)
    assert back.next_header == h6.next_header
    assert back.traffic_class == h6.traffic_class
    assert back.payload_length == h6.payload_length
    assert back.hop_limit == h6.hop_limit - 2


def test_siit_is_stateless_under_reordering():
    rng = random.Random(5)
    headers = [v6_header(payload=rng.randint(0, 1000), hops=rng.randint(1, 255),
                         nh=rng.choice([6, 17]), tc=rng.randint(0, 255))
               for _ in range(50)]
    first = [siit_v6_to_v4(h, V4A, V4B) for h in headers]
    order = list(range(50))
    rng.shuffle(order)
    second = {i: siit_v6_to_v4(headers[i], V4A, V4B) for i in order}
    for i, h in enumerate(first):
        assert second[i] == h


# -- tunneling ----------------------------------------------------------------

def test_encapsulate_adds_exactly_40_bytes():
    inner = Ipv4Header(V4A, V4B, 64, 17, 0, 120)
    outer = dstm_encapsulate(inner, V6A, V6B)
    assert outer.payload_length == inner.total_length
    assert outer.next_header == ENCAPSULATED_IPV4
    # wire: inner 120 -> tunneled 120 + 40
    assert outer.payload_length + 40 == 160


def test_decapsulate_inverts_encapsulate():
    inner = Ipv4Header(V4A, V4B, 64, 6, 3, 543)
    outer = dstm_encapsulate(inner, V6A, V6B)
    assert dstm_decapsulate(outer, inner) == inner
    with pytest.raises(TunnelFormatError):
        dstm_decapsulate(v6_header(), inner)


def test_packet_level_nested_tunnel_forbidden():
    inner = Ipv4Header(V4A, V4B, 64, 17, 0, 120)
    pkt = Packet(1, 0, 100, "UDP", 0, headers=[inner])
    encapsulate_packet(pkt, V6A, V6B)
    assert pkt.wire_size == 160
    with pytest.raises(NestedTunnelError):
        encapsulate_packet(pkt, V6A, V6B)


# -- address pool -------------------------------------------------------------

def make_pool(n, lease_us=1000):
    return AddressPool([IPv4Address(0x0A000000 + i) for i in range(n)], lease_us)


def test_pool_exhaustion_denies_second_host():
    pool = make_pool(1)
    assert pool.allocate("h1", 0) is not None
    assert pool.allocate("h2", 0) is None


def test_pool_renewal_returns_same_address():
    pool = make_pool(2, lease_us=100)
    a1 = pool.allocate("h1", 0)
    a2 = pool.allocate("h1", 50)
    assert a1 == a2
    assert pool.lease_of("h1").expiry_us == 150


def test_pool_release_then_allocate_reuses():
    pool = make_pool(1)
    a1 = pool.allocate("h1", 0)
    assert pool.release("h1") is True
    assert pool.release("h1") is False  # reported no-op
    assert pool.allocate("h2", 0) == a1


def test_pool_expiry_reclaims():
    pool = make_pool(1, lease_us=100)
    pool.allocate("h1", 0)
    assert pool.allocate("h2", 50) is None
    assert pool.allocate("h2", 100) is not None  # h1 expired at 100


def test_pool_lowest_address_first():
    pool = make_pool(3)
    assert pool.allocate("h1", 0).value == 0x0A000000
    assert pool.allocate("h2", 0).value == 0x0A000001


def test_pool_from_spec_forms():
    cidr = AddressPool.from_spec("198.18.0.0/30", 1000)
    assert cidr.size == 2  # hosts only
    explicit = AddressPool.from_spec("10.0.0.1, 10.0.0.2, 10.0.0.3", 1000)
    assert explicit.size == 3
    assert AddressPool.from_spec("", 1000).size == 0


def test_pool_invariants_under_random_ops():
    rng = random.Random(99)
    pool = make_pool(5, lease_us=70)
    hosts = [f"h{i}" for i in range(9)]
    now = 0
    for _ in range(1000):
        now += rng.randint(0, 20)
        op = rng.random()
        host = rng.choice(hosts)
        if op < 0.5:
            pool.allocate(host, now)
        elif op < 0.8:
            pool.release(host)
        else:
            pool.expire(now)
        pool.check_invariants()
        leased = [l.address for l in pool._leases.values()]
        assert len(set(leased)) == len(leased)


# -- gateways -----------------------------------------------------------------

def make_siit_gateways():
    entries = [
        MappingEntry(parse_prefix("2001:db8:64::/96"), parse_ipv4("198.51.100.0"), -1),
        MappingEntry(parse_prefix("2001:db8:64::c633:6407/128"), V4B, 0),
    ]
    tree = SuccessionTree()
    for e in entries:
        tree.insert(e)
    host_map = {V6A: V4A}
    reverse = {V4B: V6B, V4A: V6A}
    return (DwcGateway(tree, 50, host_map, reverse),
            BdsiitGateway(entries, 80, host_map, reverse))


def data_packet(dst=V6B, payload=100):
    h = Ipv6Header(src=V6A, dst=dst, hop_limit=64, next_header=17,
                   traffic_class=0, payload_length=payload)
    return Packet(7, 0, payload, "UDP", 0, headers=[h])


@pytest.mark.parametrize("which", ["dwc", "bdsiit"])
def test_translator_forward_hit(which):
    dwc, bdsiit = make_siit_gateways()
    gw = dwc if which == "dwc" else bdsiit
    pkt = data_packet()
    assert gw.process_forward(pkt, 0) is None
    h4 = pkt.headers[-1]
    assert isinstance(h4, Ipv4Header)
    assert h4.dst == V4B
    assert h4.src == V4A
    assert pkt.gw_service_us == gw.latency_us
    assert pkt.wire_size == 120
    gw.check_conservation()


def test_translator_forward_miss_drops_with_reason():
    dwc, _ = make_siit_gateways()
    pkt = data_packet(dst=parse_ipv6("2001:db9::1"))  # outside every prefix
    assert dwc.process_forward(pkt, 0) is DropReason.MAPPING_MISS
    assert dwc.counters["drop_mapping_miss"] == 1
    dwc.check_conservation()


def test_translator_nested_prefix_uses_longer():
    dwc, bdsiit = make_siit_gateways()
    # inside the /96 but not the /128: the covering entry wins
    other = parse_ipv6("2001:db8:64::c633:6499")
    for gw in (dwc, bdsiit):
        pkt = data_packet(dst=other)
        assert gw.process_forward(pkt, 0) is None
        assert pkt.headers[-1].dst == parse_ipv4("198.51.100.0")
        exact = data_packet(dst=parse_ipv6("2001:db8:64::c633:6407"))
        assert gw.process_forward(exact, 0) is None
        assert exact.headers[-1].dst == V4B


def test_translator_reverse_path():
    dwc, _ = make_siit_gateways()
    ack = Packet(1007, 3, 0, "TCP", 0,
                 headers=[Ipv4Header(V4B, V4A, 64, 6, 0, 20)])
    assert dwc.process_reverse(ack, 0) is None
    h6 = ack.headers[-1]
    assert (h6.src, h6.dst) == (V6B, V6A)
    assert h6.hop_limit == 63


def test_dstm_gateway_forward_and_reverse():
    pool = AddressPool.from_spec("198.18.0.0/28", 1_000_000)
    gw = DstmGateway(pool, parse_ipv6("2001:db8:ffff::1"), 100, 2000)
    leased, extra = gw.lease_for(V6A, flow_id=7, now_us=0)
    assert leased is not None
    assert extra == 2000  # first packet of the flow pays allocation
    leased2, extra2 = gw.lease_for(V6A, flow_id=7, now_us=10)
    assert leased2 == leased and extra2 == 0

    inner = Ipv4Header(leased, V4B, 64, 17, 0, 120)
    pkt = Packet(7, 0, 100, "UDP", 0, headers=[inner])
    encapsulate_packet(pkt, V6A, gw.tunnel_addr)
    assert pkt.wire_size == 160
    pkt.alloc_service_us = extra
    assert gw.process_forward(pkt, 0) is None
    assert pkt.wire_size == 120  # tunnel stripped
    assert pkt.gw_service_us == 100 + 2000

    reply = Packet(1007, 1, 0, "TCP", 0,
                   headers=[Ipv4Header(V4B, leased, 64, 6, 0, 20)])
    assert gw.process_reverse(reply, 0) is None
    assert len(reply.headers) == 2
    assert reply.headers[-1].dst == V6A
    gw.check_conservation()


def test_dstm_pool_exhaustion_counted():
    pool = AddressPool.from_spec("", 1000)
    gw = DstmGateway(pool, parse_ipv6("2001:db8:ffff::1"), 100, 2000)
    leased, _ = gw.lease_for(V6A, 1, 0)
    assert leased is None
    assert gw.counters["drop_pool_exhausted"] == 1
    gw.check_conservation()


def test_dstm_reverse_without_lease_is_mapping_miss():
    pool = AddressPool.from_spec("198.18.0.0/28", 1000)
    gw = DstmGateway(pool, parse_ipv6("2001:db8:ffff::1"), 100, 2000)
    reply = Packet(1007, 1, 0, "TCP", 0,
                   headers=[Ipv4Header(V4B, parse_ipv4("198.18.0.1"), 64, 6, 0, 20)])
    assert gw.process_reverse(reply, 0) is DropReason.MAPPING_MISS
