"""Modeled IPv4/IPv6 headers, stateless translation and tunnel wrapping.

Headers carry only the fields the simulation measures.  Checksums are not
modeled.  Translation is stateless: each call depends only on its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

from .addressing import IPv4Address, IPv6Address

IPV4_HEADER_BYTES = 20
IPV6_HEADER_BYTES = 40
ENCAPSULATED_IPV4 = 4  # protocol number carried by next_header for IPv4-in-IPv6


class HopLimitExceeded(Exception):
    """Packet arrived with no hops left; discard."""


class NestedTunnelError(Exception):
    """Refusing to wrap an already tunneled packet."""


class TunnelFormatError(Exception):
    """Outer header does not describe the given inner packet."""


@dataclass(frozen=True)
class Ipv4Header:
    src: IPv4Address
    dst: IPv4Address
    ttl: int
    protocol: int
    tos: int
    total_length: int  # header (20) + payload, bytes

    def __post_init__(self):
        for name in ("ttl", "protocol", "tos"):
            v = getattr(self, name)
            if not 0 <= v <= 255:
                raise ValueError(f"{name} out of range: {v}")
        if self.total_length < IPV4_HEADER_BYTES:
            raise ValueError(f"total_length {self.total_length} < {IPV4_HEADER_BYTES}")

    @property
    def payload_bytes(self) -> int:
        return self.total_length - IPV4_HEADER_BYTES


@dataclass(frozen=True)
class Ipv6Header:
    src: IPv6Address
    dst: IPv6Address
    hop_limit: int
    next_header: int
    traffic_class: int
    payload_length: int  # bytes, excludes the 40-byte header

    def __post_init__(self):
        for name in ("hop_limit", "next_header", "traffic_class"):
            v = getattr(self, name)
            if not 0 <= v <= 255:
                raise ValueError(f"{name} out of range: {v}")
        if self.payload_length < 0:
            raise ValueError(f"payload_length negative: {self.payload_length}")


def siit_v6_to_v4(h: Ipv6Header, mapped_src: IPv4Address, mapped_dst: IPv4Address) -> Ipv4Header:
    """Translate an IPv6 header to IPv4 with the supplied address mapping.

    The hop budget is decremented once, translating and forwarding being
    one router traversal.  Raises HopLimitExceeded when none remains.
    """
    if h.hop_limit < 1:
        raise HopLimitExceeded(f"hop_limit exhausted toward {h.dst}")
    return Ipv4Header(
        src=mapped_src,
        dst=mapped_dst,
        ttl=h.hop_limit - 1,
        protocol=h.next_header,
        tos=h.traffic_class,
        total_length=h.payload_length + IPV4_HEADER_BYTES,
    )


def siit_v4_to_v6(h: Ipv4Header, mapped_src: IPv6Address, mapped_dst: IPv6Address) -> Ipv6Header:
    """Mirror of siit_v6_to_v4."""
    if h.ttl < 1:
        raise HopLimitExceeded(f"ttl exhausted toward {h.dst}")
    return Ipv6Header(
        src=mapped_src,
        dst=mapped_dst,
        hop_limit=h.ttl - 1,
        next_header=h.protocol,
        traffic_class=h.tos,
        payload_length=h.total_length - IPV4_HEADER_BYTES,
    )


def dstm_encapsulate(inner: Ipv4Header, tunnel_src: IPv6Address,
                     tunnel_dst: IPv6Address, *, hop_limit: int = 64) -> Ipv6Header:
    """Wrap an IPv4 header in an IPv6 tunnel header.

    The wire grows by exactly the 40-byte outer header; the inner header
    rides as payload, untouched.
    """
    return Ipv6Header(
        src=tunnel_src,
        dst=tunnel_dst,
        hop_limit=hop_limit,
        next_header=ENCAPSULATED_IPV4,
        traffic_class=inner.tos,
        payload_length=inner.total_length,
    )


def dstm_decapsulate(outer: Ipv6Header, inner: Ipv4Header) -> Ipv4Header:
    """Strip a tunnel header, returning the untouched inner packet.

    Validates that the outer header actually describes `inner`.
    """
    if outer.next_header != ENCAPSULATED_IPV4:
        raise TunnelFormatError(f"next_header {outer.next_header} is not a tunnel")
    if outer.payload_length != inner.total_length:
        raise TunnelFormatError(
            f"outer payload {outer.payload_length} != inner length {inner.total_length}")
    return inner
