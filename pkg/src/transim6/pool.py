"""Temporary IPv4 address pool with time-limited leases.

Allocation hands out the lowest free address.  A host asking again before
its lease expires gets the same address back with a renewed expiry.
Times are simulation microseconds.
"""

from __future__ import annotations

import heapq
import ipaddress
from dataclasses import dataclass

from .addressing import IPv4Address


@dataclass
class Lease:
    address: IPv4Address
    expiry_us: int


class AddressPool:
    def __init__(self, addresses, lease_duration_us: int):
        values = sorted({a.value for a in addresses})
        self._all = set(values)
        self._free = values  # heap of ints, lowest address first
        heapq.heapify(self._free)
        self._leases: dict[object, Lease] = {}
        self.lease_duration_us = lease_duration_us

    @classmethod
    def from_spec(cls, spec: str, lease_duration_us: int) -> "AddressPool":
        """Build from a CIDR block ('198.18.0.0/28') or a comma-separated
        address list.  A /31 or wider block contributes its host addresses."""
        spec = spec.strip()
        if not spec:
            return cls([], lease_duration_us)
        if "/" in spec:
            net = ipaddress.IPv4Network(spec)
            hosts = net.hosts() if net.prefixlen < 31 else net
            return cls([IPv4Address(int(a)) for a in hosts], lease_duration_us)
        addrs = [IPv4Address(int(ipaddress.IPv4Address(part.strip())))
                 for part in spec.split(",") if part.strip()]
        return cls(addrs, lease_duration_us)

    @property
    def size(self) -> int:
        return len(self._all)

    @property
    def free_count(self) -> int:
        return len(self._free)

    def lease_of(self, host) -> Lease | None:
        return self._leases.get(host)

    def allocate(self, host, now_us: int) -> IPv4Address | None:
        """Lease an address to host, renewing an existing unexpired lease.
        Returns None when the pool is exhausted (denial)."""
        self.expire(now_us)
        lease = self._leases.get(host)
        if lease is not None:
            lease.expiry_us = now_us + self.lease_duration_us
            return lease.address
        if not self._free:
            return None
        addr = IPv4Address(heapq.heappop(self._free))
        self._leases[host] = Lease(addr, now_us + self.lease_duration_us)
        return addr

    def release(self, host) -> bool:
        """Return a host's address to the free set.  False when the host
        holds no lease (reported no-op)."""
        lease = self._leases.pop(host, None)
        if lease is None:
            return False
        heapq.heappush(self._free, lease.address.value)
        return True

    def expire(self, now_us: int) -> list[IPv4Address]:
        """Reclaim every lease with expiry <= now."""
        reclaimed = []
        for host in [h for h, l in self._leases.items() if l.expiry_us <= now_us]:
            lease = self._leases.pop(host)
            heapq.heappush(self._free, lease.address.value)
            reclaimed.append(lease.address)
        return reclaimed

    def check_invariants(self) -> None:
        """Raise AssertionError if the free/leased partition is broken."""
        free = set(self._free)
        leased = {l.address.value for l in self._leases.values()}
        assert len(self._free) == len(free), "duplicate address in free heap"
        assert len(leased) == len(self._leases), "one address leased twice"
        assert free.isdisjoint(leased), "address both free and leased"
        assert free | leased == self._all, "address lost from pool"
