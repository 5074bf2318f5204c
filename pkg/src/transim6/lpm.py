"""Succession tree: chunk-classified longest-prefix-match over dollops.

The tree has at most eight levels, one per 16-bit chunk of the address.
Children at a node are classified by match length: exact dollops (ml=16)
live in a dict keyed by chunk value, partial dollops (0 < ml < 16) in a
list ordered longest-ml-first.  Because a partial dollop can only be the
last constrained chunk of a prefix, partial children are always leaves
holding a terminal entry, so lookup is a single descent through exact
children with fallback across the partial classes and then the node's own
terminal.

`oracle_lookup` is the independent reference: a linear scan comparing top
bits directly.  It is kept deliberately free of dollop machinery.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .addressing import (
    CHUNK_BITS,
    CHUNK_COUNT,
    IPV6_BITS,
    Dollop,
    IPv4Address,
    IPv6Address,
    Ipv6Prefix,
    chunks_of,
    decompose_prefix,
    parse_ipv4,
    parse_prefix,
)


@dataclass(frozen=True)
class MappingEntry:
    """One installed prefix-to-IPv4 mapping."""

    prefix: Ipv6Prefix
    target: IPv4Address
    entry_id: int


@dataclass(frozen=True)
class LookupResult:
    entry: MappingEntry
    matched_length: int


class _Node:
    __slots__ = ("exact", "partial", "terminal")

    def __init__(self):
        self.exact: dict[int, _Node] = {}
        self.partial: list[tuple[Dollop, _Node]] = []  # sorted by ml desc, strt asc
        self.terminal: MappingEntry | None = None

    def is_empty(self) -> bool:
        return not self.exact and not self.partial and self.terminal is None


class SuccessionTree:
    """Prefix-to-IPv4 mapping table with longest-prefix-match lookup."""

    def __init__(self):
        self._root = _Node()
        self._count = 0

    def __len__(self) -> int:
        return self._count

    def insert(self, entry: MappingEntry) -> MappingEntry | None:
        """Install an entry.  Returns the replaced entry when the same
        prefix was already present, else None."""
        dollops = decompose_prefix(entry.prefix).dollops
        node = self._root
        for d in dollops:
            if d.ml == 0:
                break
            if d.ml == CHUNK_BITS:
                node = node.exact.setdefault(d.strt, _Node())
            else:
                for existing, child in node.partial:
                    if existing == d:
                        node = child
                        break
                else:
                    child = _Node()
                    node.partial.append((d, child))
                    node.partial.sort(key=lambda dc: (-dc[0].ml, dc[0].strt))
                    node = child
        replaced = node.terminal
        node.terminal = entry
        if replaced is None:
            self._count += 1
        return replaced

    def lookup(self, addr: IPv6Address) -> LookupResult | None:
        """Return the longest installed prefix matching addr, if any."""
        chunks = chunks_of(addr)
        entry = self._search(self._root, chunks, 0)
        if entry is None:
            return None
        return LookupResult(entry, entry.prefix.length)

    def _search(self, node: _Node, chunks, z: int) -> MappingEntry | None:
        if z < CHUNK_COUNT:
            c = chunks[z]
            child = node.exact.get(c)
            if child is not None:
                found = self._search(child, chunks, z + 1)
                if found is not None:
                    return found
            # partial children are leaves; longest ml listed first
            for d, leaf in node.partial:
                if d.strt <= c <= d.stp and leaf.terminal is not None:
                    return leaf.terminal
        return node.terminal

    def remove(self, prefix: Ipv6Prefix) -> bool:
        """Remove the entry for prefix.  Returns False when absent."""
        dollops = decompose_prefix(prefix).dollops
        path: list[tuple[_Node, Dollop]] = []
        node = self._root
        for d in dollops:
            if d.ml == 0:
                break
            path.append((node, d))
            if d.ml == CHUNK_BITS:
                node = node.exact.get(d.strt)
            else:
                node = next((child for existing, child in node.partial if existing == d), None)
            if node is None:
                return False
        if node.terminal is None:
            return False
        node.terminal = None
        self._count -= 1
        # prune now-empty nodes bottom-up
        for parent, d in reversed(path):
            child = (parent.exact.get(d.strt) if d.ml == CHUNK_BITS
                     else next(c for dd, c in parent.partial if dd == d))
            if not child.is_empty():
                break
            if d.ml == CHUNK_BITS:
                del parent.exact[d.strt]
            else:
                parent.partial = [(dd, c) for dd, c in parent.partial if dd != d]
        return True

    def entries(self) -> list[MappingEntry]:
        """All installed entries, in no particular order."""
        out: list[MappingEntry] = []
        stack = [self._root]
        while stack:
            node = stack.pop()
            if node.terminal is not None:
                out.append(node.terminal)
            stack.extend(node.exact.values())
            stack.extend(child for _, child in node.partial)
        return out

    def max_depth(self) -> int:
        def depth(node: _Node) -> int:
            children = list(node.exact.values()) + [c for _, c in node.partial]
            return 1 + max((depth(c) for c in children), default=0)
        return depth(self._root) - 1


def oracle_lookup(entries, addr: IPv6Address) -> LookupResult | None:
    """Reference longest-prefix-match: linear scan with direct top-bits
    comparison."""
    best: MappingEntry | None = None
    v = addr.value
    for e in entries:
        length = e.prefix.length
        shift = IPV6_BITS - length
        if (v >> shift) == (e.prefix.address.value >> shift) if shift else v == e.prefix.address.value:
            if best is None or length > best.prefix.length:
                best = e
    if best is None:
        return None
    return LookupResult(best, best.prefix.length)


def load_mapping_table(path: str | Path) -> list[MappingEntry]:
    """Read a mapping table file: one `<ipv6-prefix>/<len> <ipv4>` per
    line, `#` starts a comment, blank lines ignored."""
    entries: list[MappingEntry] = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected '<prefix>/<len> <ipv4>', got {raw!r}")
        prefix = parse_prefix(parts[0])
        target = parse_ipv4(parts[1])
        entries.append(MappingEntry(prefix, target, entry_id=lineno))
    return entries
