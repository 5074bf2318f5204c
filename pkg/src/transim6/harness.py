"""Experiment harness: single runs, sweeps and declarative trend checks.

A run writes a self-contained output directory: the effective config, the
trace, a one-row report CSV and a jitter sidecar, and validates the trace
invariants before returning.  A sweep enumerates mechanism x traffic x
size cells from a spec file, combines the rows, and emits the comparison
tables and per-figure plot data.

Expectations files assert orderings, bounds and monotonicity over a
report; the grammar is documented in the README and in
data/paper-trends.expect.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

from . import metrics
from .config import MECHANISMS, TRAFFICS, ConfigError, ScenarioConfig, echo_scenario, load_scenario
from .topology import build_topology

METRIC_COLUMNS = ("throughput_pct", "throughput_bps", "mean_eed_ms", "plr_pct")


def builtin_data_path(name: str) -> Path:
    """Path of a packaged data file (scenarios, sweep specs, expectations)."""
    return Path(resources.files("transim6").joinpath("data", name))


def resolve_scenario(spec: str | Path) -> ScenarioConfig:
    """Load a scenario from a path, or from the packaged data directory
    when `spec` names a built-in like 'paper-default'."""
    path = Path(spec)
    if not path.exists():
        builtin = builtin_data_path(f"{spec}.cfg")
        if builtin.exists():
            path = builtin
        else:
            raise ConfigError(f"scenario not found: {spec}")
    return load_scenario(path)


# -- single run ---------------------------------------------------------------

def run(cfg: ScenarioConfig, out_dir: str | Path,
        plr_denominator: str = "received") -> metrics.MetricsReport:
    """Build, run and persist one scenario.  Returns the report row."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sim = build_topology(cfg)
    sim.run()

    trace_text = sim.trace_text()
    (out / "trace.txt").write_text(trace_text)
    (out / "effective.cfg").write_text(echo_scenario(cfg))

    metrics.check_trace_invariants(trace_text, cfg.queue_capacity)

    flows = {
        fid: metrics.FlowStats(s.sent, s.received, s.sent_bytes, s.received_bytes,
                               [d / 1_000_000 for d in s.delays_us], cfg.sim_time_s)
        for fid, s in sim.stats.items()
    }
    data = metrics.data_flows(flows)
    agg = metrics.aggregate(data, cfg.sim_time_s)
    report = metrics.report_from_stats(cfg.mechanism, cfg.traffic, cfg.packet_size,
                                       agg, plr_denominator)
    metrics.write_report_csv([report], out / "report.csv")
    metrics.write_jitter_csv(data, out / "jitter.csv")
    return report


# -- sweeps -------------------------------------------------------------------

@dataclass(frozen=True)
class SweepGrid:
    traffics: tuple[str, ...]
    sizes: tuple[int, ...]


@dataclass(frozen=True)
class SweepSpec:
    scenario: str
    mechanisms: tuple[str, ...]
    grids: tuple[SweepGrid, ...]
    repeats: int = 1

    def cells(self):
        """Deterministic cartesian enumeration, grid by grid."""
        for grid in self.grids:
            for mech in self.mechanisms:
                for traffic in grid.traffics:
                    for size in grid.sizes:
                        for rep in range(self.repeats):
                            yield mech, traffic, size, rep


def _split_list(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def load_sweep_spec(path: str | Path) -> SweepSpec:
    """Sweep spec format: `key = value` lines plus one `[grid]` section
    per traffic/size grid."""
    path = Path(path)
    scenario = "paper-default"
    mechanisms: tuple[str, ...] = tuple(MECHANISMS)
    repeats = 1
    grids: list[dict] = []
    current: dict | None = None
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line == "[grid]":
            current = {"traffics": None, "sizes": None}
            grids.append(current)
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if current is None:
            if key == "scenario":
                scenario = value
            elif key == "mechanisms":
                mechanisms = tuple(_split_list(value))
                for m in mechanisms:
                    if m not in MECHANISMS:
                        raise ConfigError(f"{path}:{lineno}: unknown mechanism {m!r}")
            elif key == "repeats":
                repeats = int(value)
                if repeats < 1:
                    raise ConfigError(f"{path}:{lineno}: repeats must be >= 1")
            else:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        else:
            if key == "traffics":
                traffics = tuple(_split_list(value))
                for t in traffics:
                    if t not in TRAFFICS:
                        raise ConfigError(f"{path}:{lineno}: unknown traffic {t!r}")
                current["traffics"] = traffics
            elif key == "sizes":
                current["sizes"] = tuple(int(v) for v in _split_list(value))
            else:
                raise ConfigError(f"{path}:{lineno}: unknown grid key {key!r}")
    if not grids:
        raise ConfigError(f"{path}: no [grid] section")
    built = []
    for g in grids:
        if not g["traffics"] or not g["sizes"]:
            raise ConfigError(f"{path}: each [grid] needs traffics and sizes")
        built.append(SweepGrid(g["traffics"], g["sizes"]))
    return SweepSpec(scenario, mechanisms, tuple(built), repeats)


def sweep(spec: SweepSpec, out_dir: str | Path,
          plr_denominator: str = "received") -> list[metrics.MetricsReport]:
    """Run every cell, combine rows, emit tables and plot data.

    A failing cell is recorded in errors.txt and the sweep continues.
    Rows are sorted by (mechanism, traffic, size, repeat).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    base = resolve_scenario(spec.scenario)
    rows: list[metrics.MetricsReport] = []
    errors: list[str] = []
    for mech, traffic, size, rep in spec.cells():
        name = f"{mech}_{traffic}_{size}" + (f"_r{rep}" if spec.repeats > 1 else "")
        cfg = replace(base, mechanism=mech, traffic=traffic, packet_size=size,
                      seed=base.seed + rep)
        try:
            rows.append(run(cfg, out / name, plr_denominator))
        except Exception as exc:  # record and continue per cell
            errors.append(f"{name}: {exc}")
    rows.sort(key=lambda r: (r.mechanism, r.traffic, r.packet_size))
    metrics.write_report_csv(rows, out / "report.csv")
    if errors:
        (out / "errors.txt").write_text("\n".join(errors) + "\n")
    emit_tables(out)
    emit_plotdata(out)
    return rows


def _report_index(rows: list[dict]) -> dict[tuple[str, str, int], dict[str, float]]:
    """(mechanism, traffic, size) -> column means over repeats."""
    groups: dict[tuple[str, str, int], list[dict]] = {}
    for r in rows:
        groups.setdefault((r["mechanism"], r["traffic"], r["packet_size_bytes"]), []).append(r)
    index = {}
    for key, members in groups.items():
        index[key] = {col: sum(m[col] for m in members) / len(members)
                      for col in METRIC_COLUMNS}
    return index


def _pivot_csv(index, metric: str, traffic: str, header_fmt: str) -> str | None:
    sizes = sorted({size for (m, t, size) in index if t == traffic})
    mechs = [m for m in MECHANISMS
             if any((m, traffic, s) in index for s in sizes)]
    if not sizes or not mechs:
        return None
    lines = ["packet_size_bytes," + ",".join(header_fmt.format(m.lower()) for m in mechs)]
    for size in sizes:
        cells = []
        for m in mechs:
            v = index.get((m, traffic, size))
            cells.append(f"{v[metric]:.6f}" if v else "")
        lines.append(f"{size}," + ",".join(cells))
    return "\n".join(lines) + "\n"


def emit_tables(out_dir: str | Path) -> None:
    """table1/2: mean delay vs size (FTP and CBR); table3/4: throughput
    and loss vs size on the mixed TCP+UDP grid."""
    out = Path(out_dir)
    index = _report_index(metrics.read_report_csv(out / "report.csv"))

    sizes = sorted({s for (m, t, s) in index if t in ("FTP", "CBR")})
    if sizes and any(m == "DSTM" for (m, t, s) in index):
        lines = ["packet_size_bytes,ftp_eed_ms,cbr_eed_ms"]
        for size in sizes:
            cells = [str(size)]
            for traffic in ("FTP", "CBR"):
                v = index.get(("DSTM", traffic, size))
                cells.append(f"{v['mean_eed_ms']:.6f}" if v else "")
            lines.append(",".join(cells))
        (out / "table1.csv").write_text("\n".join(lines) + "\n")
    if sizes:
        lines = ["packet_size_bytes,dwc_ftp_eed_ms,dwc_cbr_eed_ms,"
                 "bdsiit_ftp_eed_ms,bdsiit_cbr_eed_ms"]
        for size in sizes:
            cells = [str(size)]
            for mech in ("DWC", "BDSIIT"):
                for traffic in ("FTP", "CBR"):
                    v = index.get((mech, traffic, size))
                    cells.append(f"{v['mean_eed_ms']:.6f}" if v else "")
            lines.append(",".join(cells))
        (out / "table2.csv").write_text("\n".join(lines) + "\n")

    t3 = _pivot_csv(index, "throughput_pct", "MIXED", "{}_throughput_pct")
    if t3:
        (out / "table3.csv").write_text(t3)
    t4 = _pivot_csv(index, "plr_pct", "MIXED", "{}_plr_pct")
    if t4:
        (out / "table4.csv").write_text(t4)


def emit_plotdata(out_dir: str | Path) -> list[Path]:
    """Per-figure CSVs: x = packet size, one y column per mechanism."""
    out = Path(out_dir)
    index = _report_index(metrics.read_report_csv(out / "report.csv"))
    written = []
    for metric, traffic, name in (
        ("throughput_pct", "MIXED", "fig_throughput.csv"),
        ("plr_pct", "MIXED", "fig_plr.csv"),
        ("mean_eed_ms", "FTP", "fig_eed_ftp.csv"),
        ("mean_eed_ms", "CBR", "fig_eed_cbr.csv"),
    ):
        text = _pivot_csv(index, metric, traffic, "{}")
        if text:
            (out / name).write_text(text)
            written.append(out / name)
    return written


# -- expectations -------------------------------------------------------------

class ExpectationError(ValueError):
    """Malformed expectations file."""


_REF_RE = re.compile(r"^(?P<metric>\w+)\(\s*(?P<args>[^)]*?)\s*\)$")
_OPS = {
    "<=": lambda a, b: a <= b,
    ">=": lambda a, b: a >= b,
    "<": lambda a, b: a < b,
    ">": lambda a, b: a > b,
}


@dataclass(frozen=True)
class MetricRef:
    metric: str
    mechanism: str
    traffic: str | None
    size: int | str  # int, or the loop variable name

    def resolve(self, index, size_value: int | None):
        size = size_value if self.size == "size" else self.size
        candidates = []
        for (m, t, s), cols in index.items():
            if m == self.mechanism and s == size and (self.traffic is None or t == self.traffic):
                candidates.append(cols[self.metric])
        if not candidates:
            raise ExpectationError(
                f"no report row for {self.metric}({self.mechanism},"
                f"{self.traffic or '*'},{size})")
        if len(candidates) > 1:
            raise ExpectationError(
                f"ambiguous reference {self.metric}({self.mechanism},{size}): "
                f"give a traffic")
        return candidates[0]

    def sizes_in(self, index) -> set[int]:
        return {s for (m, t, s) in index
                if m == self.mechanism and (self.traffic is None or t == self.traffic)}


def _parse_ref(text: str, lineno: int) -> MetricRef:
    m = _REF_RE.match(text.strip())
    if not m:
        raise ExpectationError(f"line {lineno}: bad metric reference {text!r}")
    metric = m.group("metric")
    if metric not in METRIC_COLUMNS:
        raise ExpectationError(f"line {lineno}: unknown metric {metric!r}")
    args = [a.strip() for a in m.group("args").split(",") if a.strip()]
    if not 2 <= len(args) <= 3:
        raise ExpectationError(f"line {lineno}: {metric} needs (mech[,traffic],size)")
    mech = args[0]
    if mech not in MECHANISMS:
        raise ExpectationError(f"line {lineno}: unknown mechanism {mech!r}")
    traffic = None
    if len(args) == 3:
        traffic = args[1]
        if traffic not in TRAFFICS:
            raise ExpectationError(f"line {lineno}: unknown traffic {traffic!r}")
    size_text = args[-1]
    size: int | str
    if size_text == "size":
        size = "size"
    else:
        try:
            size = int(size_text)
        except ValueError:
            raise ExpectationError(f"line {lineno}: bad size {size_text!r}") from None
    return MetricRef(metric, mech, traffic, size)


def _parse_over_ref(text: str, lineno: int) -> MetricRef:
    """metric(mech[,traffic]) for monotone lines; size implied."""
    m = _REF_RE.match(text.strip())
    if not m:
        raise ExpectationError(f"line {lineno}: bad metric reference {text!r}")
    inner = text.strip()
    inner = inner[:-1] + ", size)"
    return _parse_ref(inner, lineno)


@dataclass(frozen=True)
class Assertion:
    lineno: int
    text: str
    kind: str  # compare | forall | monotone
    left: MetricRef | None = None
    op: str | None = None
    right: MetricRef | float | None = None
    direction: str | None = None

    def evaluate(self, index) -> tuple[bool, str]:
        try:
            if self.kind in ("compare", "forall"):
                sizes: list[int | None]
                if self.kind == "forall":
                    domain = self.left.sizes_in(index)
                    if isinstance(self.right, MetricRef):
                        domain &= self.right.sizes_in(index)
                    if not domain:
                        raise ExpectationError(f"line {self.lineno}: empty size domain")
                    sizes = sorted(domain)
                else:
                    sizes = [None]
                for size in sizes:
                    a = self.left.resolve(index, size)
                    b = (self.right.resolve(index, size)
                         if isinstance(self.right, MetricRef) else self.right)
                    if math.isnan(a) or (isinstance(b, float) and math.isnan(b)):
                        return False, f"{self.text}: NaN operand at size {size}"
                    if not _OPS[self.op](a, b):
                        return False, f"{self.text}: {a:.6f} {self.op} {b:.6f} fails at size {size}"
                return True, self.text
            # monotone
            sizes = sorted(self.left.sizes_in(index))
            if len(sizes) < 2:
                raise ExpectationError(f"line {self.lineno}: fewer than two sizes")
            values = [self.left.resolve(index, s) for s in sizes]
            ok = {
                "increasing": lambda a, b: a < b,
                "decreasing": lambda a, b: a > b,
                "nonincreasing": lambda a, b: a >= b,
                "nondecreasing": lambda a, b: a <= b,
            }[self.direction]
            for (s1, v1), (s2, v2) in zip(zip(sizes, values), zip(sizes[1:], values[1:])):
                if not ok(v1, v2):
                    return False, (f"{self.text}: {v1:.6f} -> {v2:.6f} breaks "
                                   f"{self.direction} between sizes {s1} and {s2}")
            return True, self.text
        except ExpectationError as exc:
            return False, str(exc)


def parse_expectations(text: str) -> list[Assertion]:
    assertions = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("monotone"):
            m = re.match(r"monotone\s+(increasing|decreasing|nonincreasing|nondecreasing)"
                         r"\s+(.+?)\s+over\s+size$", line)
            if not m:
                raise ExpectationError(f"line {lineno}: bad monotone form {raw!r}")
            ref = _parse_over_ref(m.group(2), lineno)
            assertions.append(Assertion(lineno, line, "monotone", left=ref,
                                        direction=m.group(1)))
            continue
        kind = "compare"
        body = line
        if line.startswith("forall"):
            m = re.match(r"forall\s+size\s*:\s*(.+)$", line)
            if not m:
                raise ExpectationError(f"line {lineno}: bad forall form {raw!r}")
            kind = "forall"
            body = m.group(1)
        m = re.match(r"^(.+?)\s*(<=|>=|<|>)\s*(.+)$", body)
        if not m:
            raise ExpectationError(f"line {lineno}: expected '<ref> <op> <ref-or-number>'")
        left = _parse_ref(m.group(1), lineno)
        op = m.group(2)
        right_text = m.group(3).strip()
        right: MetricRef | float
        try:
            right = float(right_text)
        except ValueError:
            right = _parse_ref(right_text, lineno)
        if kind == "forall" and left.size != "size" and not (
                isinstance(right, MetricRef) and right.size == "size"):
            raise ExpectationError(f"line {lineno}: forall body never uses 'size'")
        assertions.append(Assertion(lineno, line, kind, left=left, op=op, right=right))
    return assertions


def report_check(report_path: str | Path, expect_path: str | Path) -> tuple[list[str], list[str]]:
    """Evaluate an expectations file against a report CSV.

    Returns (passed, failed) assertion descriptions; a malformed file
    raises ExpectationError.
    """
    rows = metrics.read_report_csv(report_path)
    index = _report_index(rows)
    assertions = parse_expectations(Path(expect_path).read_text())
    passed, failed = [], []
    for a in assertions:
        ok, message = a.evaluate(index)
        (passed if ok else failed).append(message)
    return passed, failed
