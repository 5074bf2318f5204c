"""transim6: packet-level comparison of IPv4/IPv6 transition mechanisms.

The package provides exact-width address types with the eight-chunk
dollop decomposition, a succession-tree longest-prefix-match table,
models of three transition gateways (DWC, BD-SIIT, DSTM), a deterministic
discrete-event network simulator, the four run metrics, and a sweep
harness with declarative trend checking.
"""

from .addressing import (
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
from .config import ConfigError, ScenarioConfig, load_scenario
from .gateways import BdsiitGateway, DropReason, DstmGateway, DwcGateway, GatewayKind
from .headers import (
    Ipv4Header,
    Ipv6Header,
    dstm_decapsulate,
    dstm_encapsulate,
    siit_v4_to_v6,
    siit_v6_to_v4,
)
from .lpm import LookupResult, MappingEntry, SuccessionTree, load_mapping_table, oracle_lookup
from .metrics import FlowStats, MetricsReport, UndefinedMetricError, jitter_series, mean_eed, plr, throughput
from .pool import AddressPool
from .topology import Simulation, build_topology

__version__ = "0.1.0"
