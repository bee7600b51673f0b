"""Register files with periodic modulo rotation of the architectural-to-physical map."""

from __future__ import annotations

from .stress import BitStressArray, is_static
from .trace import REG_COUNTS, RegClass

DEFAULT_ROTATION_PERIOD = 10_000_000
WORD_BITS = 64


def reg_map(arch_id: int, r: int, n: int) -> int:
    """Physical slot of ``arch_id`` under rotation counter ``r``."""
    if not 0 <= arch_id < n:
        raise ValueError(f"arch id {arch_id} out of range [0, {n})")
    if not 0 <= r < n:
        raise ValueError(f"rotation counter {r} out of range [0, {n})")
    return (arch_id + r) % n


class RotatingRegFile:
    """``n_regs`` 64-bit registers whose physical placement rotates by one slot per trigger.

    Stress is tracked per physical slot and bit.
    """

    def __init__(self, n_regs: int, trigger_period_cycles: int = DEFAULT_ROTATION_PERIOD,
                 rotation_enabled: bool = False, name: str = "rf", start_cycle: int = 0,
                 track_bits: bool = True):
        if n_regs < 1:
            raise ValueError("n_regs must be >= 1")
        if trigger_period_cycles < 1:
            raise ValueError("trigger period must be >= 1")
        self.name = name
        self.n_regs = n_regs
        self.rotation_counter = 0
        self.trigger_period_cycles = trigger_period_cycles
        self.rotation_enabled = rotation_enabled
        self.storage = [0] * n_regs
        self.stress = BitStressArray(n_regs, WORD_BITS, start_cycle) if track_bits else None
        self.write_counts = [0] * n_regs
        self.rotations = 0
        self.next_trigger = start_cycle + trigger_period_cycles

    def phys(self, arch_id: int) -> int:
        return reg_map(arch_id, self.rotation_counter, self.n_regs)

    def read(self, arch_id: int) -> int:
        return self.storage[self.phys(arch_id)]

    def write(self, arch_id: int, value: int, cycle: int) -> None:
        p = self.phys(arch_id)
        self.storage[p] = value
        self.write_counts[p] += 1
        if self.stress is not None:
            self.stress.observe(p, cycle, value)

    def rotate(self, cycle: int) -> None:
        """Advance the counter and move every value to its owner's new slot."""
        if not self.rotation_enabled:
            raise RuntimeError(f"{self.name}: rotation disabled")
        n = self.n_regs
        old = self.storage
        # slot (a + r) moves to (a + r + 1): a right rotation of the physical array
        self.storage = [old[(p - 1) % n] for p in range(n)]
        self.rotation_counter = (self.rotation_counter + 1) % n
        self.rotations += 1
        for p in range(n):
            self.write_counts[p] += 1
            if self.stress is not None:
                self.stress.observe(p, cycle, self.storage[p])

    def advance(self, cycle: int) -> int:
        """Fire every periodic trigger at or before ``cycle``; returns how many fired."""
        fired = 0
        if not self.rotation_enabled:
            return 0
        while self.next_trigger <= cycle:
            self.rotate(self.next_trigger)
            self.next_trigger += self.trigger_period_cycles
            fired += 1
        return fired

    def static_slots(self) -> int:
        return sum(1 for w in self.write_counts if is_static(w))

    def finalize(self, end_cycle: int) -> None:
        if self.stress is not None:
            self.stress.finalize(end_cycle)


def reg_read(f: RotatingRegFile, arch_id: int) -> int:
    return f.read(arch_id)


def reg_write(f: RotatingRegFile, arch_id: int, value: int, cycle: int) -> RotatingRegFile:
    f.write(arch_id, value, cycle)
    return f


def rotate(f: RotatingRegFile, cycle: int) -> RotatingRegFile:
    f.rotate(cycle)
    return f


class RegisterFileSet:
    """One independent rotating pool per register class."""

    def __init__(self, sizes: dict | None = None, period: int = DEFAULT_ROTATION_PERIOD,
                 enabled: bool = False, start_cycle: int = 0, track_bits: bool = True,
                 periods: dict | None = None, enables: dict | None = None):
        sizes = dict(REG_COUNTS if sizes is None else sizes)
        periods = periods or {}
        enables = enables or {}
        self.files = {
            RegClass(c): RotatingRegFile(
                n,
                periods.get(RegClass(c), period),
                enables.get(RegClass(c), enabled),
                name=RegClass(c).name,
                start_cycle=start_cycle,
                track_bits=track_bits,
            )
            for c, n in sizes.items()
        }
        self._any_enabled = any(f.rotation_enabled for f in self.files.values())
        self._next = min((f.next_trigger for f in self.files.values() if f.rotation_enabled),
                         default=None)

    def __getitem__(self, cls) -> RotatingRegFile:
        return self.files[cls]

    def advance(self, cycle: int) -> None:
        if self._next is None or cycle < self._next:
            return
        for f in self.files.values():
            f.advance(cycle)
        self._next = min(f.next_trigger for f in self.files.values() if f.rotation_enabled)

    def finalize(self, end_cycle: int) -> None:
        for f in self.files.values():
            f.finalize(end_cycle)
