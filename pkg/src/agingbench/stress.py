"""BTI stress bookkeeping.

Time-credit convention: a value written at cycle ``t`` holds from ``t``
(inclusive) up to the next write (exclusive). Every cell starts at the
reset value 0 at the start of observation, so a first write of 1 counts as
a toggle.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class SimulationOrderError(RuntimeError):
    """Observations arrived out of cycle order (harness bug)."""


class FinalizeError(RuntimeError):
    pass


def is_static(entry_write_count: int) -> bool:
    """Written at most once over the observation window."""
    return entry_write_count <= 1


@dataclass(slots=True)
class CellStress:
    current_value: int = 0
    last_change_cycle: int = 0
    time_at_one: int = 0
    time_at_zero: int = 0
    toggle_count: int = 0
    write_count: int = 0
    max_static_interval: int = 0
    initialized: bool = False
    start_cycle: int = 0
    last_write_cycle: int = 0
    finalized: bool = False

    @classmethod
    def starting_at(cls, cycle: int) -> "CellStress":
        return cls(last_change_cycle=cycle, start_cycle=cycle, last_write_cycle=cycle)

    def observe(self, cycle: int, new_value: int) -> "CellStress":
        if self.finalized:
            raise FinalizeError("observe after finalize")
        if cycle < self.last_write_cycle:
            raise SimulationOrderError(
                f"cycle {cycle} precedes last write at {self.last_write_cycle}"
            )
        self._credit(cycle)
        if new_value != self.current_value:
            self.toggle_count += 1
            self.max_static_interval = max(self.max_static_interval, cycle - self.last_change_cycle)
            self.last_change_cycle = cycle
            self.current_value = new_value
        self.write_count += 1
        self.initialized = True
        return self

    def _credit(self, cycle):
        dt = cycle - self.last_write_cycle
        if self.current_value:
            self.time_at_one += dt
        else:
            self.time_at_zero += dt
        self.last_write_cycle = cycle

    def finalize(self, end_cycle: int) -> "CellStress":
        if self.finalized:
            raise FinalizeError("cell already finalized")
        if end_cycle < self.last_write_cycle:
            raise SimulationOrderError(
                f"end cycle {end_cycle} precedes last write at {self.last_write_cycle}"
            )
        self._credit(end_cycle)
        self.max_static_interval = max(self.max_static_interval, end_cycle - self.last_change_cycle)
        self.finalized = True
        return self

    @property
    def span(self) -> int:
        return self.time_at_one + self.time_at_zero

    @property
    def signal_probability(self) -> float:
        if not self.finalized:
            raise FinalizeError("signal probability needs a finalized cell")
        return self.time_at_one / self.span if self.span else float(self.current_value)


def observe(c: CellStress, cycle: int, new_value: int) -> CellStress:
    return c.observe(cycle, new_value)


def finalize(c: CellStress, end_cycle: int) -> CellStress:
    return c.finalize(end_cycle)


class Granularity(str, Enum):
    PER_BIT = "per_bit"
    PER_ENTRY = "per_entry"


@dataclass
class StructStress:
    """Named collection of cells plus per-entry write counts."""

    name: str
    granularity: Granularity
    cells: list[CellStress] = field(default_factory=list)
    entry_write_counts: list[int] = field(default_factory=list)

    def static_entries(self) -> int:
        return sum(1 for w in self.entry_write_counts if is_static(w))


def histogram(probabilities, bins: int = 10) -> np.ndarray:
    """Uniform bins over [0, 1]; left edges inclusive, last bin closed."""
    if bins < 2:
        raise ValueError("need at least 2 bins")
    p = np.asarray(probabilities, dtype=np.float64)
    if p.size and (p.min() < 0 or p.max() > 1):
        raise ValueError("probabilities must lie in [0, 1]")
    idx = np.minimum(np.floor(p * bins).astype(np.int64), bins - 1)
    return np.bincount(idx, minlength=bins)


def bin_edges(bins: int) -> list[tuple[float, float]]:
    return [(i / bins, (i + 1) / bins) for i in range(bins)]


def signal_probability_histogram(s: StructStress, bins: int = 10) -> np.ndarray:
    if any(not c.finalized for c in s.cells):
        raise FinalizeError(f"{s.name}: unfinalized cells")
    return histogram([c.signal_probability for c in s.cells], bins)


try:
    from numba import njit
except ImportError:  # pragma: no cover - plain Python fallback, same semantics
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


@njit(cache=True)
def _fold(slots, cycles, values, value, run_start, time_one, toggles, max_static,
          last_write, write_count):
    # returns the index of the first out-of-order observation, or -1
    width = value.shape[1]
    for j in range(slots.shape[0]):
        s = slots[j]
        t = cycles[j]
        v = values[j]
        dt = t - last_write[s]
        if dt < 0:
            return j
        for b in range(width):
            old = value[s, b]
            if old:
                time_one[s, b] += dt
            nb = (v >> np.uint64(b)) & np.uint64(1)
            if nb != old:
                toggles[s, b] += 1
                iv = t - run_start[s, b]
                if iv > max_static[s, b]:
                    max_static[s, b] = iv
                run_start[s, b] = t
                value[s, b] = nb
        last_write[s] = t
        write_count[s] += 1
    return -1


class BitStressArray:
    """Per-bit stress for ``n_slots`` words of ``width`` bits.

    Observations are buffered and folded into array state in chunks; results
    are exactly those of one :class:`CellStress` per bit observing the same
    stream. Every observation writes a whole word, so all bits of a slot
    share one write count.
    """

    CHUNK = 8192

    def __init__(self, n_slots: int, width: int = 64, start_cycle: int = 0):
        if not 1 <= width <= 64:
            raise ValueError("width must be in [1, 64]")
        self.n_slots = n_slots
        self.width = width
        self.start_cycle = start_cycle
        self.value = np.zeros((n_slots, width), dtype=np.uint8)
        self.run_start = np.zeros((n_slots, width), dtype=np.int64)
        self.last_write = np.zeros(n_slots, dtype=np.int64)
        if start_cycle:
            self.run_start += start_cycle
            self.last_write += start_cycle
        self.time_one = np.zeros((n_slots, width), dtype=np.int64)
        self.toggles = np.zeros((n_slots, width), dtype=np.int64)
        self.max_static = np.zeros((n_slots, width), dtype=np.int64)
        self.write_count = np.zeros(n_slots, dtype=np.int64)
        self.end_cycle: int | None = None
        self._buf: list[tuple[int, int, int]] = []

    def observe(self, slot: int, cycle: int, value: int) -> None:
        buf = self._buf
        buf.append((slot, cycle, value))
        if len(buf) >= self.CHUNK:
            self.flush()

    def flush(self) -> None:
        if not self._buf:
            return
        if self.end_cycle is not None:
            raise FinalizeError("observe after finalize")
        slots, cycles, values = zip(*self._buf)
        self._buf.clear()
        slots = np.array(slots, dtype=np.int64)
        cycles = np.array(cycles, dtype=np.int64)
        values = np.array(values, dtype=np.uint64)
        if slots.min() < 0 or slots.max() >= self.n_slots:
            raise IndexError("slot out of range")
        bad = _fold(slots, cycles, values, self.value, self.run_start, self.time_one,
                    self.toggles, self.max_static, self.last_write, self.write_count)
        if bad >= 0:
            raise SimulationOrderError(
                f"slot {int(slots[bad])}: cycle {int(cycles[bad])} precedes last write"
            )

    def finalize(self, end_cycle: int) -> None:
        if self.end_cycle is not None:
            raise FinalizeError("already finalized")
        self.flush()
        if self.n_slots and int(self.last_write.max()) > end_cycle:
            raise SimulationOrderError(f"end cycle {end_cycle} precedes last write")
        self.time_one += self.value * (end_cycle - self.last_write)[:, None]
        np.maximum(self.max_static, end_cycle - self.run_start, out=self.max_static)
        self.last_write[:] = end_cycle
        self.end_cycle = end_cycle

    @property
    def span(self) -> int:
        if self.end_cycle is None:
            raise FinalizeError("not finalized")
        return self.end_cycle - self.start_cycle

    def probabilities(self) -> np.ndarray:
        """Signal probability per (slot, bit)."""
        span = self.span
        if span == 0:
            return self.value.astype(np.float64)
        return self.time_one / span

    def histogram(self, bins: int = 10) -> np.ndarray:
        return histogram(self.probabilities().ravel(), bins)

    def cell(self, slot: int, bit: int) -> CellStress:
        """Materialize one bit as a :class:`CellStress` (finalized state only)."""
        span = self.span
        c = CellStress(
            current_value=int(self.value[slot, bit]),
            last_change_cycle=int(self.run_start[slot, bit]),
            time_at_one=int(self.time_one[slot, bit]),
            time_at_zero=span - int(self.time_one[slot, bit]),
            toggle_count=int(self.toggles[slot, bit]),
            write_count=int(self.write_count[slot]),
            max_static_interval=int(self.max_static[slot, bit]),
            initialized=bool(self.write_count[slot]),
            start_cycle=self.start_cycle,
            last_write_cycle=self.end_cycle,
            finalized=True,
        )
        return c

    def static_slots(self) -> int:
        self.flush()
        return int((self.write_count <= 1).sum())
