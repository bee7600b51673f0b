"""Trace-driven simulation of the execution units, register files and caches.

Cycle charge model (in order): every event is shifted by the delay
accumulated so far. Delay grows by unit stalls, dispatch-width overflow,
data-access latency (loads and stores, full latency of the hitting level),
instruction-fetch latency beyond an L1-I hit, and cache-port cycles spent on
swap-shift fills (one per invalidated line). Register rotation and PRBS
injection are charged nothing.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Iterable

from .cache import CacheHierarchy
from .config import ExperimentConfig
from .netsim import write_histogram_csv
from .regfile import RegisterFileSet
from .trace import Kind, TraceError, TraceEvent, gen_synthetic, read_trace
from .units import ExecCore

CODE_BASE = 0x0040_0000
REPORT_VERSION = 1
_M64 = (1 << 64) - 1

NOTES = [
    "stress metrics are exposure counts and duty cycles; no threshold-voltage or delay model",
    "set remapping is computed before the access stage and charged zero access latency",
    "PRBS fill writes cache data arrays only; tag arrays are not exercised",
    "execution-unit stress is tracked on the operand side only",
    "register rotation is triggered by cycle count only (no CR3 or interrupt hooks)",
    "TLBs are observed, not mitigated",
]


def event_pattern(seed: int, seq: int) -> int:
    """Seeded 64-bit operand pattern for events without a data payload (splitmix64)."""
    z = ((seed << 32) ^ seq) + 0x9E3779B97F4A7C15 & _M64
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _M64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _M64
    return z ^ (z >> 31)


def trace_identity(cfg: ExperimentConfig) -> str:
    wl = cfg.workload()
    if wl is None:
        h = hashlib.sha256()
        try:
            with open(cfg.trace["file"], "rb") as f:
                for chunk in iter(lambda: f.read(1 << 20), b""):
                    h.update(chunk)
        except OSError as e:
            raise TraceError(f"cannot read trace: {e}") from None
        return "file:" + h.hexdigest()
    blob = json.dumps(wl.to_dict(), sort_keys=True).encode()
    return "synthetic:" + hashlib.sha256(blob).hexdigest()


def open_events(cfg: ExperimentConfig) -> Iterable[TraceEvent]:
    wl = cfg.workload()
    if wl is not None:
        return gen_synthetic(wl)
    path = Path(cfg.trace["file"])

    def _iter():
        try:
            f = open(path, encoding="utf-8")
        except OSError as e:
            raise TraceError(f"cannot read trace: {e}") from None
        with f:
            yield from read_trace(f)

    return _iter()


class Simulator:
    def __init__(self, cfg: ExperimentConfig, start_cycle: int = 0, record_fills: bool = False):
        self.cfg = cfg
        m = cfg.mitigation
        self.start_cycle = start_cycle
        self.core = ExecCore(cfg.unit_mix(), m["injection"], m["injection_period"],
                             seed=cfg.seed, start_cycle=start_cycle, track_bits=cfg.track_bits)
        self.regs = RegisterFileSet(cfg.reg_sizes(), m["rotation_period"], m["rotation"],
                                    start_cycle=start_cycle, track_bits=cfg.track_bits)
        self.caches = CacheHierarchy(cfg.geometries(), cfg.memory_latency, cfg.swap_enables(),
                                     m["swap_period"], cfg.tracked_way if cfg.track_bits else None,
                                     seed=cfg.seed + 1, tlbs=cfg.tlb_params(),
                                     start_cycle=start_cycle, record_fills=record_fills)
        self.events = 0
        self.delay = 0
        self.stall_cycles = 0
        self.width_stall_cycles = 0
        self.memory_cycles = 0
        self.fetch_cycles = 0
        self.swap_port_cycles = 0
        self.first_cycle = None
        self.last_cycle = None
        self.last_eff = start_cycle
        self.max_eff = start_cycle
        self.end_cycle = None
        self.loads = []  # (seq, addr, value) when recording
        self.record_loads = False
        self.dispatch_log = None

    def run(self, events: Iterable[TraceEvent]) -> "Simulator":
        core, regs, caches = self.core, self.regs, self.caches
        width = self.cfg.dispatch_width
        code_fp = self.cfg.code_footprint
        seed = self.cfg.seed
        l1i_lat = caches.l1i.latency
        files = regs.files
        Load, Store = Kind.Load, Kind.Store
        delay = self.delay
        last_eff, same = self.last_eff, 0
        swapping = caches._swapping
        seen_inval = caches.lines_invalidated
        record_loads = self.record_loads
        dlog = self.dispatch_log
        n = 0
        for ev in events:
            if self.first_cycle is None:
                self.first_cycle = ev.cycle
                # anchor trace time at the simulation start
                delay = self.start_cycle - ev.cycle
            eff = ev.cycle + delay
            if eff < last_eff:
                eff = last_eff
                delay = eff - ev.cycle
            if eff == last_eff:
                same += 1
                if same > width:
                    eff += 1
                    delay += 1
                    self.width_stall_cycles += 1
                    same = 1
            else:
                same = 1
            last_eff = eff

            lat, hit = caches.fetch(CODE_BASE + (ev.seq * 4) % code_fp, eff)
            if hit:
                d = lat - l1i_lat
                delay += d
                eff += d
                self.fetch_cycles += d

            kind = ev.kind
            operand = ev.data if ev.data is not None else event_pattern(seed, ev.seq)
            core.advance(eff)
            unit, start = core.dispatch(kind, eff, operand)
            if dlog is not None:
                dlog.append((unit, start))
            if start > eff:
                delay += start - eff
                self.stall_cycles += start - eff
                eff = start

            value = operand
            if kind is Load:
                value, lat, _ = caches.load(ev.mem_addr, eff)
                delay += lat
                eff += lat
                self.memory_cycles += lat
                if record_loads:
                    self.loads.append((ev.seq, ev.mem_addr, value))
            elif kind is Store:
                lat, _ = caches.store(ev.mem_addr, ev.data, eff)
                delay += lat
                eff += lat
                self.memory_cycles += lat
            if swapping and caches.lines_invalidated != seen_inval:
                d = caches.lines_invalidated - seen_inval
                seen_inval = caches.lines_invalidated
                delay += d
                eff += d
                self.swap_port_cycles += d

            dst = ev.dst_reg
            if dst is not None:
                f = files.get(dst[0])
                if f is None or not 0 <= dst[1] < f.n_regs:
                    raise TraceError(f"seq {ev.seq}: register {dst} not in the configured register file")
                regs.advance(eff)
                f.write(dst[1], value, eff)
            n += 1
            self.last_cycle = ev.cycle
        self.events += n
        self.delay = delay
        self.last_eff = last_eff
        if n:
            self.max_eff = max(self.max_eff, eff)
        return self

    def finish(self) -> int:
        """Close the observation window; returns the end cycle."""
        if self.end_cycle is not None:
            return self.end_cycle
        if self.events:
            end = max(self.max_eff + 1, max(u.busy_until for u in self.core.units))
        else:
            end = self.start_cycle
        # periodic mechanisms keep running until the window closes
        if end > self.start_cycle:
            self.core.advance(end - 1)
            self.regs.advance(end - 1)
        self.core.finalize(end)
        self.regs.finalize(end)
        self.caches.finalize(end)
        self.end_cycle = end
        return end

    @property
    def total_cycles(self) -> int:
        return self.finish() - self.start_cycle

    def report(self, trace_id: str = "") -> dict:
        end = self.finish()
        bins = self.cfg.histogram_bins
        regs = {}
        for cls, f in self.regs.files.items():
            rec = {
                "n_regs": f.n_regs,
                "static_slots": f.static_slots(),
                "min_slot_writes": min(f.write_counts),
                "rotations": f.rotations,
                "rotation_counter": f.rotation_counter,
            }
            if f.stress is not None:
                rec["histogram"] = f.stress.histogram(bins).tolist()
                rec["max_static_interval"] = int(f.stress.max_static.max()) if f.n_regs else 0
            regs[cls.name] = rec
        units = self.core.unit_stress_table()
        unit_hist = self.core.bus.histogram(bins).tolist() if self.core.bus is not None else None
        caches = self.caches.stress_report(bins)
        trace_span = (self.last_cycle - self.first_cycle + 1) if self.events else 0
        return {
            "version": REPORT_VERSION,
            "config": self.cfg.to_dict(),
            "trace_id": trace_id,
            "events": self.events,
            "cycles": {
                "start": self.start_cycle,
                "end": end,
                "total": end - self.start_cycle,
                "trace_span": trace_span,
                "unit_stall": self.stall_cycles,
                "dispatch_width_stall": self.width_stall_cycles,
                "memory": self.memory_cycles,
                "fetch": self.fetch_cycles,
                "swap_port": self.swap_port_cycles,
            },
            "units": units,
            "unit_bus_histogram": unit_hist,
            "static_units": [u["unit"] for u in units if u["static"]],
            "registers": regs,
            "static_registers": sum(r["static_slots"] for r in regs.values()),
            "caches": caches["levels"],
            "tlbs": caches["tlbs"],
            "static_cache_lines": sum(l["static_lines"] for l in caches["levels"].values()),
            "injection_ticks": self.core.ticks,
            "notes": NOTES + _scaling_notes(self.cfg),
        }


def _scaling_notes(cfg: ExperimentConfig) -> list[str]:
    m = cfg.mitigation
    notes = []
    if m["rotation"] and m["rotation_period"] != 10_000_000:
        notes.append(f"rotation period scaled to {m['rotation_period']} cycles (reference 10000000)")
    if any(cfg.swap_enables().values()) and m["swap_period"] != 10_000_000:
        notes.append(f"swap period scaled to {m['swap_period']} accesses (reference 10000000)")
    return notes


def histogram_tables(report: dict) -> dict[str, list]:
    out = {}
    if report.get("unit_bus_histogram") is not None:
        out["units"] = report["unit_bus_histogram"]
    for cls, r in report["registers"].items():
        if "histogram" in r:
            out[f"reg_{cls}"] = r["histogram"]
    for name, l in report["caches"].items():
        if "tracked_way_histogram" in l:
            out[f"cache_{name}"] = l["tracked_way_histogram"]
    return out


def dump_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def run(cfg: ExperimentConfig, write: bool = True) -> dict:
    """Simulate the configured trace and return the report; writes outputs if configured."""
    trace_id = trace_identity(cfg)
    sim = Simulator(cfg)
    sim.run(open_events(cfg))
    report = sim.report(trace_id)
    if write:
        write_outputs(cfg, report)
    return report


def write_outputs(cfg: ExperimentConfig, report: dict) -> None:
    out = cfg.outputs
    if out.get("report"):
        Path(out["report"]).write_text(dump_report(report))
    if out.get("histograms"):
        d = Path(out["histograms"])
        d.mkdir(parents=True, exist_ok=True)
        bins = cfg.histogram_bins
        for name, counts in histogram_tables(report).items():
            write_histogram_csv(d / f"{name}.csv", counts, bins)


class CompareError(ValueError):
    pass


def _pct(a, b):
    if a == b:
        return 0.0
    if a == 0:
        return None
    return (b - a) / a * 100.0


_SAME_SECTIONS = ("dispatch_width", "units", "caches", "tlbs", "regfile", "memory_latency",
                  "seed", "code_footprint", "tracked_way", "track_bits")


def compare(a: dict, b: dict) -> dict:
    """Percentage deltas of report ``b`` relative to report ``a``."""
    if a.get("trace_id") != b.get("trace_id"):
        raise CompareError("reports come from different traces")
    diff = [k for k in _SAME_SECTIONS if a["config"].get(k) != b["config"].get(k)]
    if diff:
        raise CompareError(f"core configuration differs in {diff}")

    def entry(x, y):
        return {"a": x, "b": y, "delta_pct": _pct(x, y)}

    return {
        "trace_id": a["trace_id"],
        "mitigation_a": a["config"]["mitigation"],
        "mitigation_b": b["config"]["mitigation"],
        "total_cycles": entry(a["cycles"]["total"], b["cycles"]["total"]),
        "misses": {n: entry(a["caches"][n]["misses"], b["caches"][n]["misses"]) for n in a["caches"]},
        "static_cache_lines": {n: entry(a["caches"][n]["static_lines"], b["caches"][n]["static_lines"])
                               for n in a["caches"]},
        "static_registers": entry(a["static_registers"], b["static_registers"]),
        "static_units": entry(len(a["static_units"]), len(b["static_units"])),
    }

