import random

import pytest

from transim6.addressing import IPv4Address, IPv6Address, Ipv6Prefix, parse_ipv4, parse_ipv6, parse_prefix
from transim6.lpm import LookupResult, MappingEntry, SuccessionTree, load_mapping_table, oracle_lookup


def entry(prefix_text: str, v4_text: str, entry_id: int = 0) -> MappingEntry:
    return MappingEntry(parse_prefix(prefix_text), parse_ipv4(v4_text), entry_id)


def random_prefix(rng: random.Random) -> Ipv6Prefix:
    # cluster stems so nested and sibling prefixes actually occur
    stem = rng.choice([0x20010DB8, 0x20010DB9, 0xFD00_0000, 0x2001_0000])
    base = stem << 96 | rng.getrandbits(96)
    length = rng.choice([0, 16, 24, 32, 35, 40, 48, 56, 64, 96, 112, 128,
                         rng.randint(0, 128)])
    return Ipv6Prefix.canonical(IPv6Address(base), length)


def build_random_table(rng: random.Random, n: int) -> tuple[SuccessionTree, dict]:
    tree = SuccessionTree()
    by_prefix: dict[Ipv6Prefix, MappingEntry] = {}
    for i in range(n):
        e = MappingEntry(random_prefix(rng), IPv4Address(rng.getrandbits(32)), i)
        tree.insert(e)
        by_prefix[e.prefix] = e
    return tree, by_prefix


def probe_addresses(rng: random.Random, prefixes, n: int):
    probes = []
    for _ in range(n):
        if prefixes and rng.random() < 0.6:
            p = rng.choice(prefixes)
            host = rng.getrandbits(128 - p.length) if p.length < 128 else 0
            probes.append(IPv6Address(p.address.value | host))
        else:
            probes.append(IPv6Address(rng.getrandbits(128)))
    return probes


def test_empty_tree_no_match():
    tree = SuccessionTree()
    assert tree.lookup(parse_ipv6("2001:db8::1")) is None
    assert oracle_lookup([], parse_ipv6("::1")) is None


def test_single_entry_lookup():
    tree = SuccessionTree()
    e = entry("2001:db8::/32", "192.0.2.1")
    assert tree.insert(e) is None
    got = tree.lookup(parse_ipv6("2001:db8::1"))
    assert got == LookupResult(e, 32)
    assert len(tree) == 1


def test_nested_prefixes_prefer_longer():
    tree = SuccessionTree()
    e32 = entry("2001:db8::/32", "192.0.2.1", 1)
    e40 = entry("2001:db8:ff00::/40", "192.0.2.2", 2)
    tree.insert(e32)
    tree.insert(e40)
    table = [e32, e40]
    probe = parse_ipv6("2001:db8:ff01::1")
    assert tree.lookup(probe) == oracle_lookup(table, probe)
    assert tree.lookup(probe).entry is e40
    outside = parse_ipv6("2001:db8:0001::1")
    assert tree.lookup(outside).entry is e32


def test_chunk_mismatch_is_no_match():
    tree = SuccessionTree()
    tree.insert(entry("2001:db8::/32", "192.0.2.1"))
    assert tree.lookup(parse_ipv6("2001:db9::1")) is None


def test_universal_prefix_always_matches():
    e = entry("::/0", "10.0.0.1")
    tree = SuccessionTree()
    tree.insert(e)
    for text in ("::", "2001:db8::1", "ffff:ffff:ffff:ffff:ffff:ffff:ffff:ffff"):
        got = tree.lookup(parse_ipv6(text))
        assert got == LookupResult(e, 0)
        assert oracle_lookup([e], parse_ipv6(text)) == got


def test_duplicate_prefix_replaces_and_reports():
    tree = SuccessionTree()
    old = entry("2001:db8::/32", "192.0.2.1", 1)
    new = entry("2001:db8::/32", "192.0.2.9", 2)
    assert tree.insert(old) is None
    assert tree.insert(new) == old
    assert len(tree) == 1
    assert tree.lookup(parse_ipv6("2001:db8::5")).entry == new


def test_insert_count_matches_distinct_prefixes():
    rng = random.Random(101)
    tree, by_prefix = build_random_table(rng, 1000)
    assert len(tree) == len(by_prefix)
    assert sorted(e.entry_id for e in tree.entries()) == sorted(e.entry_id for e in by_prefix.values())


def test_remove_falls_back_to_next_longest():
    tree = SuccessionTree()
    e32 = entry("2001:db8::/32", "192.0.2.1", 1)
    e48 = entry("2001:db8:1::/48", "192.0.2.2", 2)
    tree.insert(e32)
    tree.insert(e48)
    probe = parse_ipv6("2001:db8:1::42")
    assert tree.lookup(probe).entry is e48
    assert tree.remove(e48.prefix) is True
    assert tree.lookup(probe).entry is e32
    assert tree.remove(e48.prefix) is False  # reported no-op
    assert tree.remove(e32.prefix) is True
    assert tree.lookup(probe) is None
    assert len(tree) == 0


def test_random_insert_remove_interleaving_matches_set_semantics():
    rng = random.Random(202)
    tree = SuccessionTree()
    model: dict[Ipv6Prefix, MappingEntry] = {}
    for i in range(500):
        p = random_prefix(rng)
        if rng.random() < 0.6 or p not in model:
            e = MappingEntry(p, IPv4Address(rng.getrandbits(32)), i)
            tree.insert(e)
            model[p] = e
        else:
            assert tree.remove(p) is True
            del model[p]
        assert len(tree) == len(model)
    for probe in probe_addresses(rng, list(model), 300):
        assert tree.lookup(probe) == oracle_lookup(model.values(), probe)


def test_lookup_equals_oracle_seeded():
    rng = random.Random(303)
    tree, by_prefix = build_random_table(rng, 400)
    entries = list(by_prefix.values())
    for probe in probe_addresses(rng, [e.prefix for e in entries], 2000):
        got = tree.lookup(probe)
        want = oracle_lookup(entries, probe)
        assert got == want


def test_tree_depth_bounded():
    rng = random.Random(404)
    tree, _ = build_random_table(rng, 500)
    assert tree.max_depth() <= 8


def test_monotone_specialization():
    # installing a longer prefix never changes lookups outside its range
    rng = random.Random(505)
    tree, by_prefix = build_random_table(rng, 200)
    probes = probe_addresses(rng, [p for p in by_prefix], 500)
    before = [tree.lookup(a) for a in probes]
    longer = parse_prefix("2001:db8:ffff:ffff::/64")
    tree.insert(MappingEntry(longer, IPv4Address(1), 9999))
    for a, old in zip(probes, before):
        if not longer.matches(a):
            assert tree.lookup(a) == old


def test_load_mapping_table(tmp_path):
    path = tmp_path / "map.txt"
    path.write_text(
        "# sink-side mappings\n"
        "2001:db8:64::/96 198.51.100.0\n"
        "\n"
        "2001:db8:64::c633:6401/128 198.51.100.1  # host route\n"
    )
    entries = load_mapping_table(path)
    assert len(entries) == 2
    assert entries[0].prefix.length == 96
    assert entries[1].target == parse_ipv4("198.51.100.1")

    bad = tmp_path / "bad.txt"
    bad.write_text("2001:db8::/32\n")
    with pytest.raises(ValueError, match="bad.txt:1"):
        load_mapping_table(bad)
