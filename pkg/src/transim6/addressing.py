"""Exact-width IP address types and the dollop decomposition.

An IPv6 address is treated as eight 16-bit chunks ordered most significant
first.  A routing prefix decomposes into a fixed vector of eight "dollops":
inclusive 16-bit ranges, one per chunk, each carrying the number of
significant bits it constrains.  Chunks fully inside the prefix become
exact ranges (ml=16), the chunk the prefix ends in becomes a partial range
(0 < ml < 16), and everything after it is a full wildcard (ml=0).

All types here are immutable values; the operations are pure functions.
"""

from __future__ import annotations

from dataclasses import dataclass

CHUNK_BITS = 16
CHUNK_COUNT = 8
CHUNK_MAX = 0xFFFF
IPV6_BITS = 128
IPV4_BITS = 32


class AddressParseError(ValueError):
    """Malformed address text.  `position` is the offending char offset."""

    def __init__(self, text: str, position: int, reason: str):
        super().__init__(f"{reason} at position {position} in {text!r}")
        self.text = text
        self.position = position
        self.reason = reason


class CanonicalizationError(ValueError):
    """Prefix has nonzero bits below its length boundary."""


@dataclass(frozen=True, order=True)
class IPv4Address:
    """32-bit address, stored as an unsigned integer."""

    value: int

    def __post_init__(self):
        if not 0 <= self.value < (1 << IPV4_BITS):
            raise ValueError(f"IPv4 value out of range: {self.value}")

    def __str__(self) -> str:
        return format_ipv4(self)


@dataclass(frozen=True, order=True)
class IPv6Address:
    """128-bit address, stored as an unsigned integer."""

    value: int

    def __post_init__(self):
        if not 0 <= self.value < (1 << IPV6_BITS):
            raise ValueError(f"IPv6 value out of range: {self.value}")

    def chunks(self) -> tuple[int, ...]:
        return chunks_of(self)

    @classmethod
    def from_chunks(cls, chunks) -> "IPv6Address":
        if len(chunks) != CHUNK_COUNT:
            raise ValueError(f"need {CHUNK_COUNT} chunks, got {len(chunks)}")
        value = 0
        for c in chunks:
            if not 0 <= c <= CHUNK_MAX:
                raise ValueError(f"chunk out of range: {c:#x}")
            value = (value << CHUNK_BITS) | c
        return cls(value)

    def __str__(self) -> str:
        return format_ipv6(self)


def chunks_of(addr: IPv6Address) -> tuple[int, ...]:
    """Split an address into eight 16-bit chunks, leftmost (most
    significant) first."""
    v = addr.value
    return tuple((v >> (IPV6_BITS - CHUNK_BITS * (z + 1))) & CHUNK_MAX
                 for z in range(CHUNK_COUNT))


@dataclass(frozen=True)
class Ipv6Prefix:
    """Canonical prefix: all bits below the length boundary are zero."""

    address: IPv6Address
    length: int

    def __post_init__(self):
        if not 0 <= self.length <= IPV6_BITS:
            raise ValueError(f"prefix length out of range: {self.length}")
        host_bits = IPV6_BITS - self.length
        if host_bits and self.address.value & ((1 << host_bits) - 1):
            raise CanonicalizationError(
                f"{self.address}/{self.length} has nonzero host bits; "
                f"use Ipv6Prefix.canonical() to mask them")

    @classmethod
    def canonical(cls, address: IPv6Address, length: int) -> "Ipv6Prefix":
        """Build a prefix, masking any bits below the length boundary."""
        if not 0 <= length <= IPV6_BITS:
            raise ValueError(f"prefix length out of range: {length}")
        host_bits = IPV6_BITS - length
        masked = address.value >> host_bits << host_bits if host_bits else address.value
        return cls(IPv6Address(masked), length)

    def matches(self, addr: IPv6Address) -> bool:
        """True when the top `length` bits of addr equal this prefix."""
        shift = IPV6_BITS - self.length
        if shift == IPV6_BITS:
            return True
        return (addr.value >> shift) == (self.address.value >> shift)

    def __str__(self) -> str:
        return f"{self.address}/{self.length}"


@dataclass(frozen=True)
class Dollop:
    """One 16-bit chunk range: inclusive [strt, stp] constraining the top
    `ml` bits of the chunk."""

    strt: int
    stp: int
    ml: int

    def __post_init__(self):
        if not 0 <= self.ml <= CHUNK_BITS:
            raise ValueError(f"ml out of range: {self.ml}")
        if not (0 <= self.strt <= CHUNK_MAX and 0 <= self.stp <= CHUNK_MAX):
            raise ValueError(f"range out of 16-bit bounds: [{self.strt:#x}, {self.stp:#x}]")
        if self.strt > self.stp:
            raise ValueError(f"empty range: [{self.strt:#x}, {self.stp:#x}]")
        width = 1 << (CHUNK_BITS - self.ml)
        if self.stp - self.strt + 1 != width:
            raise ValueError(
                f"range width {self.stp - self.strt + 1} does not match ml={self.ml}")
        if self.strt & (width - 1):
            raise ValueError(f"range start {self.strt:#x} not aligned for ml={self.ml}")

    def contains(self, chunk: int) -> bool:
        return self.strt <= chunk <= self.stp


WILDCARD_DOLLOP = Dollop(0, CHUNK_MAX, 0)


def dollop_contains(d: Dollop, chunk: int) -> bool:
    """Range membership: strt <= chunk <= stp."""
    return d.strt <= chunk <= d.stp


@dataclass(frozen=True)
class DollopVector:
    """Fixed vector of eight dollops describing one prefix.

    Shape invariant: a run of exact dollops (ml=16), at most one partial
    dollop, then wildcards to the end.
    """

    dollops: tuple[Dollop, ...]

    def __post_init__(self):
        if len(self.dollops) != CHUNK_COUNT:
            raise ValueError(f"need {CHUNK_COUNT} dollops, got {len(self.dollops)}")
        seen_partial = False
        seen_wild = False
        for d in self.dollops:
            if d.ml == CHUNK_BITS:
                if seen_partial or seen_wild:
                    raise ValueError("exact dollop after partial/wildcard")
            elif d.ml > 0:
                if seen_partial or seen_wild:
                    raise ValueError("more than one partial dollop, or partial after wildcard")
                seen_partial = True
            else:
                seen_wild = True

    @property
    def total_match_length(self) -> int:
        return sum(d.ml for d in self.dollops)

    def contains(self, addr: IPv6Address) -> bool:
        return all(d.strt <= c <= d.stp
                   for d, c in zip(self.dollops, chunks_of(addr)))


def decompose_prefix(prefix: Ipv6Prefix) -> DollopVector:
    """Decompose a canonical prefix into its eight-dollop vector.

    With div = length // 16 and md = length % 16: chunks before `div` are
    exact ranges, chunk `div` (when md > 0) keeps its top md bits and
    wildcards the rest, and later chunks are full wildcards.
    """
    chunks = chunks_of(prefix.address)
    div, md = divmod(prefix.length, CHUNK_BITS)
    out = []
    for z in range(div):
        c = chunks[z]
        out.append(Dollop(c, c, CHUNK_BITS))
    if md:
        c = chunks[div]
        width = 1 << (CHUNK_BITS - md)
        # canonical prefix guarantees the low 16-md bits of this chunk are 0
        out.append(Dollop(c, c + width - 1, md))
    while len(out) < CHUNK_COUNT:
        out.append(WILDCARD_DOLLOP)
    return DollopVector(tuple(out))


# -- textual forms -----------------------------------------------------------

def parse_ipv4(text: str) -> IPv4Address:
    """Parse dotted-quad notation."""
    parts = text.split(".")
    if len(parts) != 4:
        raise AddressParseError(text, len(text), "expected 4 dotted groups")
    value = 0
    pos = 0
    for part in parts:
        if not part.isdigit():
            raise AddressParseError(text, pos, "non-decimal octet")
        if len(part) > 1 and part[0] == "0":
            raise AddressParseError(text, pos, "leading zero in octet")
        octet = int(part)
        if octet > 255:
            raise AddressParseError(text, pos, f"octet {octet} > 255")
        value = (value << 8) | octet
        pos += len(part) + 1
    return IPv4Address(value)


def format_ipv4(addr: IPv4Address) -> str:
    v = addr.value
    return ".".join(str((v >> shift) & 0xFF) for shift in (24, 16, 8, 0))


def _parse_hex_group(text: str, group: str, pos: int) -> int:
    if not group:
        raise AddressParseError(text, pos, "empty group")
    if len(group) > 4:
        raise AddressParseError(text, pos, "group longer than 4 hex digits")
    try:
        return int(group, 16)
    except ValueError:
        raise AddressParseError(text, pos, f"invalid hex group {group!r}") from None


def parse_ipv6(text: str) -> IPv6Address:
    """Parse colon-hex notation with optional `::` compression.

    Mixed dotted-quad tails and zone identifiers are out of scope and
    rejected.
    """
    if "." in text:
        raise AddressParseError(text, text.index("."), "dotted groups not supported in IPv6")
    if "%" in text:
        raise AddressParseError(text, text.index("%"), "zone identifiers not supported")
    if text.count("::") > 1:
        raise AddressParseError(text, text.index("::", text.index("::") + 1),
                                "more than one '::'")

    if "::" in text:
        head_text, tail_text = text.split("::", 1)
        head = head_text.split(":") if head_text else []
        tail = tail_text.split(":") if tail_text else []
        if len(head) + len(tail) > CHUNK_COUNT - 1:
            raise AddressParseError(text, text.index("::"), "too many groups around '::'")
    else:
        head = text.split(":")
        tail = []
        if len(head) != CHUNK_COUNT:
            raise AddressParseError(text, len(text),
                                    f"expected {CHUNK_COUNT} groups, got {len(head)}")

    chunks = []
    pos = 0
    for group in head:
        chunks.append(_parse_hex_group(text, group, pos))
        pos += len(group) + 1
    chunks.extend([0] * (CHUNK_COUNT - len(head) - len(tail)))
    pos = len(text) - len(":".join(tail))
    for group in tail:
        chunks.append(_parse_hex_group(text, group, pos))
        pos += len(group) + 1
    return IPv6Address.from_chunks(chunks)


def format_ipv6(addr: IPv6Address) -> str:
    """Canonical text form: lowercase hex, no leading zeros, the longest
    run of two or more zero groups (leftmost on ties) compressed to `::`."""
    chunks = chunks_of(addr)
    best_start, best_len = -1, 0
    run_start, run_len = -1, 0
    for i, c in enumerate(chunks):
        if c == 0:
            if run_len == 0:
                run_start = i
            run_len += 1
            if run_len > best_len:
                best_start, best_len = run_start, run_len
        else:
            run_len = 0
    groups = [format(c, "x") for c in chunks]
    if best_len >= 2:
        left = ":".join(groups[:best_start])
        right = ":".join(groups[best_start + best_len:])
        return f"{left}::{right}"
    return ":".join(groups)


def parse_prefix(text: str, *, canonicalize: bool = False) -> Ipv6Prefix:
    """Parse `addr/len` notation.

    Strict by default: host bits below the length must already be zero.
    With canonicalize=True they are masked away instead.
    """
    if "/" not in text:
        raise AddressParseError(text, len(text), "missing '/length'")
    addr_text, _, len_text = text.rpartition("/")
    addr = parse_ipv6(addr_text)
    if not len_text.isdigit():
        raise AddressParseError(text, len(addr_text) + 1, "prefix length not a number")
    length = int(len_text)
    if length > IPV6_BITS:
        raise AddressParseError(text, len(addr_text) + 1, f"prefix length {length} > 128")
    if canonicalize:
        return Ipv6Prefix.canonical(addr, length)
    return Ipv6Prefix(addr, length)
