"""Scenario files: line-oriented `key = value` with `#` comments.

Every key is typed and bounds-checked at load; unknown keys are errors
naming the key and line.  The effective configuration (defaults plus
overrides) can be echoed back out in a form the loader accepts again.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

MECHANISMS = ("DWC", "BDSIIT", "DSTM")
TRAFFICS = ("FTP", "CBR", "MIXED")


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        where = f" (key {key!r}" + (f", line {line}" if line else "") + ")" if key else ""
        super().__init__(message + where)
        self.key = key
        self.line = line


@dataclass(frozen=True)
class ScenarioConfig:
    mechanism: str = "DWC"
    traffic: str = "MIXED"
    packet_size: int = 256
    sim_time_s: float = 200.0
    seed: int = 1
    mapping_table: str = ""
    queue_capacity: int = 50
    sources: int = 4
    sinks: int = 4
    access_rate_bps: int = 2_000_000
    access_delay_ms: float = 1.0
    bottleneck_rate_bps: int = 250_000
    bottleneck_delay_ms: float = 10.0
    ftp_flows: int = 4
    cbr_flows: int = 4
    cbr_load: float = 0.85        # aggregate CBR offered load, pure-CBR runs
    cbr_load_mixed: float = 1.36  # aggregate CBR offered load, MIXED runs
    tcp_window: int = 8
    dwc_ms: float = 0.05
    bdsiit_ms: float = 0.08
    dstm_alloc_ms: float = 2.0
    dstm_encap_ms: float = 0.1
    dstm_pool: str = "198.18.0.0/28"
    dstm_lease_s: float = 120.0


def _positive(v, key, line):
    if v <= 0:
        raise ConfigError(f"value must be positive, got {v}", key, line)
    return v


def _non_negative(v, key, line):
    if v < 0:
        raise ConfigError(f"value must be >= 0, got {v}", key, line)
    return v


def _choice(options):
    def check(v, key, line):
        if v not in options:
            raise ConfigError(f"expected one of {options}, got {v!r}", key, line)
        return v
    return check


def _any(v, key, line):
    return v


# file key -> (dataclass field, converter, validator)
_KEYS = {
    "mechanism": ("mechanism", str, _choice(MECHANISMS)),
    "traffic": ("traffic", str, _choice(TRAFFICS)),
    "packet_size": ("packet_size", int, _positive),
    "sim_time_s": ("sim_time_s", float, _positive),
    "seed": ("seed", int, _non_negative),
    "mapping_table": ("mapping_table", str, _any),
    "queue.capacity": ("queue_capacity", int, _positive),
    "topology.sources": ("sources", int, _positive),
    "topology.sinks": ("sinks", int, _positive),
    "topology.access_rate_bps": ("access_rate_bps", int, _positive),
    "topology.access_delay_ms": ("access_delay_ms", float, _non_negative),
    "topology.bottleneck_rate_bps": ("bottleneck_rate_bps", int, _positive),
    "topology.bottleneck_delay_ms": ("bottleneck_delay_ms", float, _non_negative),
    "traffic.ftp_flows": ("ftp_flows", int, _non_negative),
    "traffic.cbr_flows": ("cbr_flows", int, _non_negative),
    "traffic.cbr_load": ("cbr_load", float, _positive),
    "traffic.cbr_load_mixed": ("cbr_load_mixed", float, _positive),
    "traffic.tcp_window": ("tcp_window", int, _positive),
    "latency.dwc_ms": ("dwc_ms", float, _non_negative),
    "latency.bdsiit_ms": ("bdsiit_ms", float, _non_negative),
    "latency.dstm_alloc_ms": ("dstm_alloc_ms", float, _non_negative),
    "latency.dstm_encap_ms": ("dstm_encap_ms", float, _non_negative),
    "dstm.pool": ("dstm_pool", str, _any),
    "dstm.lease_s": ("dstm_lease_s", float, _positive),
}

_FIELD_TO_KEY = {field: key for key, (field, _, _) in _KEYS.items()}


def parse_scenario_text(text: str, source: str = "<scenario>") -> ScenarioConfig:
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}: expected 'key = value', got {raw!r}", line=lineno)
        key, _, value_text = line.partition("=")
        key = key.strip()
        value_text = value_text.strip()
        if key not in _KEYS:
            raise ConfigError(f"{source}: unknown key", key, lineno)
        field_name, convert, validate = _KEYS[key]
        try:
            value = convert(value_text)
        except ValueError:
            raise ConfigError(
                f"{source}: expected {convert.__name__} value, got {value_text!r}",
                key, lineno) from None
        values[field_name] = validate(value, key, lineno)
    return ScenarioConfig(**values)


def load_scenario(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"scenario file not found: {path}")
    return parse_scenario_text(path.read_text(), source=str(path))


def apply_overrides(cfg: ScenarioConfig, **overrides) -> ScenarioConfig:
    """Apply CLI-style overrides (field names), revalidating each."""
    clean = {}
    for name, value in overrides.items():
        if value is None:
            continue
        key = _FIELD_TO_KEY[name]
        _, _, validate = _KEYS[key]
        clean[name] = validate(value, key, None)
    return replace(cfg, **clean) if clean else cfg


def echo_scenario(cfg: ScenarioConfig) -> str:
    """The effective configuration in loadable form, keys sorted."""
    lines = []
    for f in sorted(fields(cfg), key=lambda f: _FIELD_TO_KEY[f.name]):
        lines.append(f"{_FIELD_TO_KEY[f.name]} = {getattr(cfg, f.name)}")
    return "\n".join(lines) + "\n"
