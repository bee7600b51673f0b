"""Execution-unit occupancy, idle detection and PRBS injection on operand buses."""

from __future__ import annotations

from dataclasses import dataclass

from .prbs import Prbs
from .stress import BitStressArray
from .trace import Kind

DEFAULT_INJECTION_PERIOD = 4096
BUS_BITS = 64
_WORD_BATCH = 1024

# kind -> (count, latency); FpMulDiv carries the multiply latency, the divide's 6 is not separable
BASELINE_UNITS = {
    Kind.IntAlu: (3, 1),
    Kind.FpAddSub: (1, 3),
    Kind.FpMulDiv: (1, 5),
    Kind.Branch: (1, 1),
    Kind.Load: (1, 1),
    Kind.Store: (1, 1),
}

_UNIT_NAMES = {
    Kind.IntAlu: "ALU",
    Kind.FpAddSub: "FpAddSub",
    Kind.FpMulDiv: "FpMulDiv",
    Kind.Branch: "Branch",
    Kind.Load: "Load",
    Kind.Store: "Store",
}


@dataclass
class ExecUnit:
    name: str
    kind: Kind
    latency_cycles: int
    busy_until: int = 0
    op_count: int = 0
    injections: int = 0


class ExecCore:
    def __init__(self, mix: dict | None = None, injection_enabled: bool = False,
                 injection_period_cycles: int = DEFAULT_INJECTION_PERIOD, seed: int = 1,
                 start_cycle: int = 0, track_bits: bool = True):
        mix = {**BASELINE_UNITS, **(mix or {})}
        if injection_period_cycles < 1:
            raise ValueError("injection period must be >= 1")
        self.units: list[ExecUnit] = []
        self.by_kind: dict[Kind, list[int]] = {}
        for kind in Kind:
            count, latency = mix[kind]
            if count < 1 or latency < 1:
                raise ValueError(f"{kind.name}: need at least one unit with latency >= 1")
            idx = []
            for i in range(count):
                base = _UNIT_NAMES[kind]
                name = f"{base}{i}" if count > 1 or kind is Kind.IntAlu else base
                idx.append(len(self.units))
                self.units.append(ExecUnit(name, kind, latency, start_cycle))
            self.by_kind[kind] = idx
        self.bus = BitStressArray(len(self.units), BUS_BITS, start_cycle) if track_bits else None
        self.bus_writes = [0] * len(self.units)
        self.injection_enabled = injection_enabled
        self.injection_period_cycles = injection_period_cycles
        self.prbs = Prbs(23, seed=seed)
        self._words: list[int] = []  # pre-drawn PRBS words, consumed from the end
        self.next_tick = start_cycle + injection_period_cycles
        self.stall_cycles = 0
        self.ticks = 0

    def dispatch(self, kind: Kind, cycle: int, operand: int) -> tuple[int, int]:
        """Route one event; returns (unit index, start cycle). Waits for a free unit."""
        units = self.units
        best = -1
        best_t = None
        for i in self.by_kind[kind]:
            t = units[i].busy_until
            if best_t is None or t < best_t:
                best, best_t = i, t
        u = units[best]
        start = cycle if best_t <= cycle else best_t
        self.stall_cycles += start - cycle
        u.busy_until = start + u.latency_cycles
        u.op_count += 1
        self.bus_writes[best] += 1
        if self.bus is not None:
            self.bus.observe(best, start, operand)
        return best, start

    def inject_tick(self, cycle: int) -> int:
        """Drive one PRBS word onto the operand bus of every unit idle at ``cycle``."""
        n = 0
        for i, u in enumerate(self.units):
            if u.busy_until > cycle:
                continue
            if not self._words:
                self._words = self.prbs.words(_WORD_BATCH, BUS_BITS).tolist()[::-1]
            word = self._words.pop()
            u.injections += 1
            self.bus_writes[i] += 1
            if self.bus is not None:
                self.bus.observe(i, cycle, word)
            n += 1
        self.ticks += 1
        return n

    def advance(self, cycle: int) -> None:
        if not self.injection_enabled:
            return
        period = self.injection_period_cycles
        while self.next_tick <= cycle:
            self.inject_tick(self.next_tick)
            self.next_tick += period

    def finalize(self, end_cycle: int) -> None:
        if self.bus is not None:
            self.bus.finalize(end_cycle)

    def unit_stress_table(self) -> list[dict]:
        rows = []
        for i, u in enumerate(self.units):
            row = {
                "unit": u.name,
                "kind": u.kind.name,
                "op_count": u.op_count,
                "injections": u.injections,
                "static": u.op_count == 0 and u.injections == 0,
                "bus_writes": self.bus_writes[i],
            }
            if self.bus is not None and self.bus.end_cycle is not None:
                row["max_static_interval"] = [int(x) for x in self.bus.max_static[i]]
                row["min_bit_toggles"] = int(self.bus.toggles[i].min())
            rows.append(row)
        return rows


def dispatch(core: ExecCore, event, cycle: int, operand: int) -> tuple[int, int]:
    return core.dispatch(event.kind, cycle, operand)


def inject_tick(core: ExecCore, cycle: int) -> int:
    return core.inject_tick(cycle)


def unit_stress_table(core: ExecCore) -> list[dict]:
    return core.unit_stress_table()
