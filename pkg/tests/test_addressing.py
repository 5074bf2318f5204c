import ipaddress
import random

import pytest

from transim6.addressing import (
    AddressParseError,
    CanonicalizationError,
    Dollop,
    DollopVector,
    IPv4Address,
    IPv6Address,
    Ipv6Prefix,
    chunks_of,
    decompose_prefix,
    dollop_contains,
    format_ipv4,
    format_ipv6,
    parse_ipv4,
    parse_ipv6,
    parse_prefix,
)


# -- independent oracles ------------------------------------------------------

def oracle_chunk_mask(ml: int) -> int:
    """Mask keeping the top ml bits of a 16-bit value, built bit by bit."""
    mask = 0
    for bit in range(16):
        if bit < ml:
            mask += 2 ** (15 - bit)
    return mask


def oracle_dollop_bounds(chunk: int, ml: int) -> tuple[int, int]:
    """Expected [strt, stp] for a chunk constrained to its top ml bits."""
    mask = oracle_chunk_mask(ml)
    strt = chunk & mask
    stp = strt | (0xFFFF - mask)
    return strt, stp


def oracle_members(chunk: int, ml: int) -> set[int]:
    """All 16-bit values whose top ml bits equal chunk's, by full
    enumeration.  Slow; used on a few sampled cases."""
    members = set()
    for v in range(0x10000):
        if all((v >> (15 - b)) & 1 == (chunk >> (15 - b)) & 1 for b in range(ml)):
            members.add(v)
    return members


def random_prefix(rng: random.Random, length: int | None = None) -> Ipv6Prefix:
    if length is None:
        length = rng.randint(0, 128)
    return Ipv6Prefix.canonical(IPv6Address(rng.getrandbits(128)), length)


# -- chunks -------------------------------------------------------------------

def test_chunks_of_zero():
    assert chunks_of(IPv6Address(0)) == (0,) * 8


def test_chunks_of_positional():
    addr = parse_ipv6("2001:0db8:0000:0000:0000:0000:0000:0001")
    assert chunks_of(addr) == (0x2001, 0x0DB8, 0, 0, 0, 0, 0, 0x0001)


def test_chunks_roundtrip_seeded():
    rng = random.Random(0xC0FFEE)
    for _ in range(1000):
        value = rng.getrandbits(128)
        addr = IPv6Address(value)
        reassembled = 0
        for c in chunks_of(addr):
            reassembled = (reassembled << 16) | c
        assert reassembled == value
        assert IPv6Address.from_chunks(chunks_of(addr)) == addr


# -- decomposition ------------------------------------------------------------

def test_decompose_length_zero_is_all_wildcards():
    dv = decompose_prefix(Ipv6Prefix(IPv6Address(0), 0))
    assert all(d == Dollop(0, 0xFFFF, 0) for d in dv.dollops)


def test_decompose_length_128_is_all_exact():
    addr = parse_ipv6("2001:db8::1")
    dv = decompose_prefix(Ipv6Prefix(addr, 128))
    for d, c in zip(dv.dollops, chunks_of(addr)):
        assert (d.strt, d.stp, d.ml) == (c, c, 16)


def test_decompose_worked_partial_example():
    # /35 with host bits set must be canonicalized first, then splits as
    # two exact chunks, a 3-bit partial chunk and five wildcards.
    with pytest.raises(CanonicalizationError):
        parse_prefix("2001:0db8:1234::/35")
    prefix = parse_prefix("2001:0db8:1234::/35", canonicalize=True)
    dv = decompose_prefix(prefix)
    assert dv.dollops[0] == Dollop(0x2001, 0x2001, 16)
    assert dv.dollops[1] == Dollop(0x0DB8, 0x0DB8, 16)
    assert dv.dollops[2] == Dollop(0x0000, 0x1FFF, 3)
    for z in range(3, 8):
        assert dv.dollops[z] == Dollop(0, 0xFFFF, 0)


def test_decompose_md_zero_has_no_partial():
    prefix = parse_prefix("2001:db8::/32")
    dv = decompose_prefix(prefix)
    assert [d.ml for d in dv.dollops] == [16, 16, 0, 0, 0, 0, 0, 0]


def test_decompose_against_bit_oracle_all_lengths():
    rng = random.Random(7)
    for length in range(129):
        for _ in range(20):
            prefix = random_prefix(rng, length)
            dv = decompose_prefix(prefix)
            chunks = chunks_of(prefix.address)
            for z in range(8):
                ml = min(16, max(0, length - 16 * z))
                strt, stp = oracle_dollop_bounds(chunks[z], ml)
                d = dv.dollops[z]
                assert (d.strt, d.stp, d.ml) == (strt, stp, ml)
            assert dv.total_match_length == length


def test_decompose_ranges_equal_enumerated_members():
    rng = random.Random(11)
    cases = [parse_prefix("2001:0db8:1234::/35", canonicalize=True)]
    cases += [random_prefix(rng) for _ in range(8)]
    for prefix in cases:
        dv = decompose_prefix(prefix)
        for z, d in enumerate(dv.dollops):
            ml = min(16, max(0, prefix.length - 16 * z))
            members = oracle_members(chunks_of(prefix.address)[z], ml)
            assert members == set(range(d.strt, d.stp + 1))


def test_decompose_rejects_noncanonical():
    with pytest.raises(CanonicalizationError):
        Ipv6Prefix(parse_ipv6("2001:db8::1"), 32)


def test_prefix_match_equals_dollop_containment():
    rng = random.Random(13)
    for _ in range(2000):
        prefix = random_prefix(rng)
        dv = decompose_prefix(prefix)
        if rng.random() < 0.5:
            addr = IPv6Address(rng.getrandbits(128))
        else:
            # bias toward addresses inside the prefix
            host = rng.getrandbits(128 - prefix.length) if prefix.length < 128 else 0
            addr = IPv6Address(prefix.address.value | host)
        assert prefix.matches(addr) == dv.contains(addr)


def test_dollop_vector_shape_enforced():
    exact = Dollop(1, 1, 16)
    wild = Dollop(0, 0xFFFF, 0)
    partial = Dollop(0, 0x0FFF, 4)
    DollopVector((exact, partial) + (wild,) * 6)
    with pytest.raises(ValueError):
        DollopVector((wild, exact) + (wild,) * 6)
    with pytest.raises(ValueError):
        DollopVector((partial, partial) + (wild,) * 6)


# -- dollop_contains ----------------------------------------------------------

def test_dollop_contains_wildcard_and_exact():
    assert dollop_contains(Dollop(0, 0xFFFF, 0), 0x1234)
    assert dollop_contains(Dollop(0x2001, 0x2001, 16), 0x2001)
    assert not dollop_contains(Dollop(0x2001, 0x2001, 16), 0x2000)


def test_dollop_contains_agrees_with_bitmask():
    rng = random.Random(17)
    for _ in range(500):
        ml = rng.randint(0, 16)
        chunk = rng.getrandbits(16)
        strt, stp = oracle_dollop_bounds(chunk, ml)
        d = Dollop(strt, stp, ml)
        probe = rng.getrandbits(16)
        mask = oracle_chunk_mask(ml)
        assert dollop_contains(d, probe) == ((probe & mask) == (chunk & mask))


def test_dollop_invariants_enforced():
    with pytest.raises(ValueError):
        Dollop(2, 1, 16)
    with pytest.raises(ValueError):
        Dollop(0, 0xFFFE, 0)
    with pytest.raises(ValueError):
        Dollop(1, 2, 15)  # misaligned start


# -- textual forms ------------------------------------------------------------

def test_parse_ipv4_trivial():
    assert parse_ipv4("0.0.0.0") == IPv4Address(0)
    assert parse_ipv4("255.255.255.255") == IPv4Address(0xFFFFFFFF)
    assert format_ipv4(parse_ipv4("192.0.2.33")) == "192.0.2.33"


def test_parse_ipv6_trivial():
    assert chunks_of(parse_ipv6("2001:db8::1")) == (0x2001, 0x0DB8, 0, 0, 0, 0, 0, 1)
    assert parse_ipv6("::") == IPv6Address(0)
    assert parse_ipv6("::1") == IPv6Address(1)


def test_format_roundtrip_seeded_corpus():
    rng = random.Random(23)
    for _ in range(100):
        addr = IPv6Address(rng.getrandbits(128))
        assert parse_ipv6(format_ipv6(addr)) == addr
        a4 = IPv4Address(rng.getrandbits(32))
        assert parse_ipv4(format_ipv4(a4)) == a4


def test_format_matches_stdlib_canonical_form():
    rng = random.Random(29)
    for _ in range(200):
        value = rng.getrandbits(128)
        assert format_ipv6(IPv6Address(value)) == str(ipaddress.IPv6Address(value))
        v4 = rng.getrandbits(32)
        assert format_ipv4(IPv4Address(v4)) == str(ipaddress.IPv4Address(v4))
    # parse agrees with stdlib on stdlib-generated text too
    for value in (0, 1, 0x20010DB8 << 96, (1 << 128) - 1):
        text = str(ipaddress.IPv6Address(value))
        assert parse_ipv6(text).value == value


def test_parse_errors_carry_position():
    with pytest.raises(AddressParseError) as e:
        parse_ipv4("1.2.3.999")
    assert e.value.position == 6
    with pytest.raises(AddressParseError) as e:
        parse_ipv6("2001:zz8::1")
    assert e.value.position == 5
    with pytest.raises(AddressParseError):
        parse_ipv6("1::2::3")
    with pytest.raises(AddressParseError):
        parse_ipv6("1:2:3:4:5:6:7")
    with pytest.raises(AddressParseError):
        parse_prefix("2001:db8::/200")


def test_prefix_text_roundtrip():
    p = parse_prefix("2001:db8:ff00::/40")
    assert str(p) == "2001:db8:ff00::/40"
    assert p.length == 40
