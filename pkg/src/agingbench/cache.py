"""Three-level set-associative LRU hierarchy with swap-shift set remapping.

Fill policy: a miss fills every level it passed through (no back-invalidation),
write-back and write-allocate everywhere. Dirty lines in swapped sets are
written back before invalidation so data survives the remap.
"""

from __future__ import annotations

from dataclasses import dataclass

from .prbs import Prbs
from .stress import BitStressArray, is_static

LINE_BYTES = 64
WORDS_PER_LINE = LINE_BYTES // 8
PAGE_BYTES = 4096
DEFAULT_SWAP_PERIOD = 10_000_000
DEFAULT_MEMORY_LATENCY = 200


@dataclass(frozen=True)
class CacheGeometry:
    size_bytes: int
    ways: int
    access_latency_cycles: int
    line_bytes: int = LINE_BYTES

    def __post_init__(self):
        if self.line_bytes != LINE_BYTES:
            raise ValueError("only 64-byte lines are modeled")
        if self.ways < 1 or self.size_bytes % (self.ways * self.line_bytes):
            raise ValueError(f"{self.size_bytes} bytes do not divide into {self.ways} ways of 64B lines")
        if self.access_latency_cycles < 0:
            raise ValueError("latency must be >= 0")

    @property
    def n_sets(self) -> int:
        return self.size_bytes // (self.ways * self.line_bytes)


BASELINE_CACHES = {
    "l1d": CacheGeometry(32 << 10, 8, 4),
    "l1i": CacheGeometry(32 << 10, 4, 4),
    "l2": CacheGeometry(256 << 10, 8, 8),
    "l3": CacheGeometry(8 << 20, 16, 30),
}

# entries, ways
BASELINE_TLBS = {
    "dtlb": (64, 4),
    "itlb": (128, 4),
    "stlb": (512, 4),
}


def physical_set(s: int, k: int, c: int, n_sets: int) -> int:
    """Physical set of logical set ``s`` after base rotation ``k`` and ``c`` adjacent swaps."""
    if n_sets < 2:
        raise ValueError("swap-shift needs at least 2 sets")
    if not 0 <= s < n_sets:
        raise ValueError(f"set {s} out of range")
    if not 0 <= k < n_sets:
        raise ValueError(f"set shift {k} out of range")
    if not 0 <= c < n_sets - 1:
        raise ValueError(f"swap counter {c} out of range")
    if s < c:
        return (s + k + 1) % n_sets
    if s == c:
        return k
    return (s + k) % n_sets


class SwapShiftState:
    """Set-shift counter ``k`` and swapped-set counter ``c`` for one cache level."""

    def __init__(self, n_sets: int, trigger_period_accesses: int = DEFAULT_SWAP_PERIOD,
                 enabled: bool = False):
        if n_sets < 2:
            raise ValueError("swap-shift needs at least 2 sets")
        if trigger_period_accesses < 1:
            raise ValueError("trigger period must be >= 1")
        self.n_sets = n_sets
        self.set_shift = 0
        self.swapped_set_counter = 0
        self.trigger_period_accesses = trigger_period_accesses
        self.enabled = enabled

    def physical(self, s: int) -> int:
        return physical_set(s, self.set_shift, self.swapped_set_counter, self.n_sets)

    def mapping(self) -> list[int]:
        return [self.physical(s) for s in range(self.n_sets)]

    def swap_pair(self) -> tuple[int, int]:
        """Physical sets owned by logical sets ``c`` and ``c + 1``."""
        c = self.swapped_set_counter
        return self.physical(c), self.physical(c + 1)

    def advance(self) -> None:
        self.swapped_set_counter += 1
        if self.swapped_set_counter == self.n_sets - 1:
            self.swapped_set_counter = 0
            self.set_shift = (self.set_shift + 1) % self.n_sets


class CacheLine:
    __slots__ = ("way", "dirty", "data")

    def __init__(self, way, data, dirty=False):
        self.way = way
        self.data = data
        self.dirty = dirty


class CacheLevel:
    """One set-associative LRU level.

    Each physical set is a dict keyed by line address; insertion order is
    recency order (LRU first).
    """

    def __init__(self, name: str, geometry: CacheGeometry, swap_enabled: bool = False,
                 swap_period: int = DEFAULT_SWAP_PERIOD, tracked_way: int | None = 0,
                 prbs: Prbs | None = None, start_cycle: int = 0, record_fills: bool = False):
        self.name = name
        self.geometry = geometry
        self.n_sets = S = geometry.n_sets
        self.ways = geometry.ways
        self.latency = geometry.access_latency_cycles
        if swap_enabled and S < 2:
            raise ValueError(f"{name}: swap-shift needs at least 2 sets")
        self.swap = SwapShiftState(max(S, 2), swap_period, swap_enabled)
        self.perm = list(range(S))
        self.sets: list[dict] = [{} for _ in range(S)]
        self.free: list[list[int]] = [list(range(self.ways - 1, -1, -1)) for _ in range(S)]
        self.write_counts = [0] * (S * self.ways)
        if tracked_way is not None and not 0 <= tracked_way < self.ways:
            raise ValueError(f"{name}: tracked way {tracked_way} out of range")
        self.tracked_way = tracked_way
        self.stress = (BitStressArray(S * WORDS_PER_LINE, 64, start_cycle)
                       if tracked_way is not None else None)
        self.prbs = prbs if prbs is not None else Prbs(23, seed=1)
        self.below: list[CacheLevel] = []
        self.accesses = self.hits = self.misses = 0
        self.writebacks = 0
        self.swaps = 0
        self.pending_swaps = 0
        self._until_trigger = swap_period
        self.fill_log: set | None = set() if record_fills else None

    def logical_set(self, line: int) -> int:
        return line % self.n_sets

    def physical_of(self, line: int) -> int:
        return self.perm[line % self.n_sets]

    def lookup(self, line: int) -> CacheLine | None:
        """Demand lookup; updates LRU and the swap trigger counter."""
        self.accesses += 1
        if self.swap.enabled:
            self._until_trigger -= 1
            if self._until_trigger == 0:
                self.pending_swaps += 1
                self._until_trigger = self.swap.trigger_period_accesses
        d = self.sets[self.perm[line % self.n_sets]]
        ln = d.pop(line, None)
        if ln is None:
            self.misses += 1
            return None
        d[line] = ln
        self.hits += 1
        return ln

    def peek(self, line: int) -> CacheLine | None:
        return self.sets[self.perm[line % self.n_sets]].get(line)

    def contains(self, line: int) -> bool:
        return line in self.sets[self.perm[line % self.n_sets]]

    def _record_write(self, phys: int, way: int, cycle: int, data, word: int | None = None):
        self.write_counts[phys * self.ways + way] += 1
        if way == self.tracked_way and self.stress is not None:
            base = phys * WORDS_PER_LINE
            if word is None:
                obs = self.stress.observe
                for i in range(WORDS_PER_LINE):
                    obs(base + i, cycle, data[i])
            else:
                self.stress.observe(base + word, cycle, data[word])

    def install(self, line: int, data: list, cycle: int) -> CacheLine:
        """Allocate ``line`` with a copy of ``data``, evicting the LRU line if needed."""
        phys = self.perm[line % self.n_sets]
        d = self.sets[phys]
        free = self.free[phys]
        if free:
            way = free.pop()
        else:
            victim_line = next(iter(d))
            victim = d.pop(victim_line)
            way = victim.way
            if victim.dirty:
                self.writeback_below(victim_line, victim.data, cycle)
        ln = CacheLine(way, list(data))
        d[line] = ln
        self._record_write(phys, way, cycle, ln.data)
        if self.fill_log is not None:
            self.fill_log.add(line)
        return ln

    def write_word(self, line: int, ln: CacheLine, word: int, value: int, cycle: int) -> None:
        ln.data[word] = value
        ln.dirty = True
        self._record_write(self.perm[line % self.n_sets], ln.way, cycle, ln.data, word)

    def absorb_writeback(self, line: int, data: list, cycle: int) -> bool:
        """Take a dirty line from above if present here; no allocation."""
        phys = self.perm[line % self.n_sets]
        ln = self.sets[phys].get(line)
        if ln is None:
            return False
        ln.data = list(data)
        ln.dirty = True
        self._record_write(phys, ln.way, cycle, ln.data)
        return True

    def writeback_below(self, line: int, data: list, cycle: int) -> None:
        self.writebacks += 1
        for lvl in self.below:
            if lvl.absorb_writeback(line, data, cycle):
                return
        self.memory[line] = list(data)

    def swap_trigger(self, cycle: int) -> int:
        """Swap the sets of logical ``c`` and ``c + 1`` and PRBS-fill both.

        Returns the number of lines invalidated.
        """
        st = self.swap
        c = st.swapped_set_counter
        pair = (self.perm[c], self.perm[c + 1])
        invalidated = 0
        for phys in pair:
            d = self.sets[phys]
            for line, ln in d.items():
                if ln.dirty:
                    self.writeback_below(line, ln.data, cycle)
            invalidated += self.ways
            self.sets[phys] = {}
            self.free[phys] = list(range(self.ways - 1, -1, -1))
        words = self.prbs.words(2 * self.ways * WORDS_PER_LINE).tolist()
        i = 0
        for phys in pair:
            for way in range(self.ways):
                self._record_write(phys, way, cycle, words[i:i + WORDS_PER_LINE])
                i += WORDS_PER_LINE
        self.perm[c], self.perm[c + 1] = self.perm[c + 1], self.perm[c]
        st.advance()
        self.swaps += 1
        return invalidated

    def static_lines(self) -> int:
        return sum(1 for w in self.write_counts if is_static(w))

    def min_write_count(self) -> int:
        return min(self.write_counts)


class Tlb:
    """Set-associative LRU translation buffer, modeled for write-count observation only."""

    def __init__(self, name: str, entries: int, ways: int):
        if entries % ways:
            raise ValueError(f"{name}: {entries} entries not divisible by {ways} ways")
        self.name = name
        self.entries = entries
        self.ways = ways
        self.n_sets = entries // ways
        self.sets: list[dict] = [{} for _ in range(self.n_sets)]
        self.write_counts = [0] * entries
        self.accesses = self.misses = 0

    def access(self, page: int) -> bool:
        self.accesses += 1
        s = page % self.n_sets
        d = self.sets[s]
        way = d.pop(page, None)
        if way is not None:
            d[page] = way
            return True
        self.misses += 1
        if len(d) < self.ways:
            way = len(d)
        else:
            way = d.pop(next(iter(d)))
        d[page] = way
        self.write_counts[s * self.ways + way] += 1
        return False

    def static_entries(self) -> int:
        return sum(1 for w in self.write_counts if is_static(w))


class CacheHierarchy:
    def __init__(self, geometries: dict | None = None, memory_latency: int = DEFAULT_MEMORY_LATENCY,
                 swap_enabled=False, swap_period: int = DEFAULT_SWAP_PERIOD,
                 tracked_way: int | None = 0, seed: int = 1, tlbs: dict | None = None,
                 start_cycle: int = 0, record_fills: bool = False):
        geometries = {**BASELINE_CACHES, **(geometries or {})}
        tlbs = {**BASELINE_TLBS, **(tlbs or {})}
        if isinstance(swap_enabled, bool):
            swap_enabled = {name: swap_enabled for name in geometries}
        self.prbs = Prbs(23, seed=seed)
        self.memory: dict[int, list] = {}
        self.memory_latency = memory_latency
        self.levels = {}
        for name in ("l1d", "l1i", "l2", "l3"):
            g = geometries[name]
            tw = None if tracked_way is None else min(tracked_way, g.ways - 1)
            lvl = CacheLevel(name, g, swap_enabled.get(name, False), swap_period, tw,
                             self.prbs, start_cycle, record_fills)
            lvl.memory = self.memory
            self.levels[name] = lvl
        self.l1d, self.l1i = self.levels["l1d"], self.levels["l1i"]
        self.l2, self.l3 = self.levels["l2"], self.levels["l3"]
        self.l1d.below = [self.l2, self.l3]
        self.l1i.below = [self.l2, self.l3]
        self.l2.below = [self.l3]
        self.d_chain = [self.l1d, self.l2, self.l3]
        self.i_chain = [self.l1i, self.l2, self.l3]
        self.tlbs = {name: Tlb(name, e, w) for name, (e, w) in tlbs.items()}
        self.dtlb, self.itlb, self.stlb = self.tlbs["dtlb"], self.tlbs["itlb"], self.tlbs["stlb"]
        self._swapping = any(l.swap.enabled for l in self.levels.values())
        self.swap_events = 0
        self.lines_invalidated = 0

    def _fetch(self, chain, line, cycle):
        """Return (hit level index, line object at chain[0]); fills upper levels."""
        hit = len(chain)
        src = None
        for i, lvl in enumerate(chain):
            ln = lvl.lookup(line)
            if ln is not None:
                hit, src = i, ln.data
                break
        if hit == 0:
            return 0, ln
        if src is None:
            src = self.memory.get(line) or [0] * WORDS_PER_LINE
        top = None
        for lvl in reversed(chain[:hit]):
            top = lvl.install(line, src, cycle)
            src = top.data
        return hit, top

    def latency_of(self, chain, hit: int) -> int:
        return chain[hit].latency if hit < len(chain) else self.memory_latency

    def load(self, addr: int, cycle: int) -> tuple[int, int, int]:
        """Returns (value, latency, hit level)."""
        page = addr >> 12
        if not self.dtlb.access(page):
            self.stlb.access(page)
        line = addr >> 6
        hit, ln = self._fetch(self.d_chain, line, cycle)
        value = ln.data[(addr >> 3) & 7]
        if self._swapping:
            self._service_swaps(cycle)
        return value, self.latency_of(self.d_chain, hit), hit

    def store(self, addr: int, value: int, cycle: int) -> tuple[int, int]:
        page = addr >> 12
        if not self.dtlb.access(page):
            self.stlb.access(page)
        line = addr >> 6
        hit, ln = self._fetch(self.d_chain, line, cycle)
        self.l1d.write_word(line, ln, (addr >> 3) & 7, value, cycle)
        if self._swapping:
            self._service_swaps(cycle)
        return self.latency_of(self.d_chain, hit), hit

    def fetch(self, addr: int, cycle: int) -> tuple[int, int]:
        page = addr >> 12
        if not self.itlb.access(page):
            self.stlb.access(page)
        hit, _ = self._fetch(self.i_chain, addr >> 6, cycle)
        if self._swapping:
            self._service_swaps(cycle)
        return self.latency_of(self.i_chain, hit), hit

    def access(self, addr: int, rw: str, data: int | None, cycle: int):
        """Generic data access: ``rw`` is ``"r"`` or ``"w"``. Returns (hit level, latency, value)."""
        if rw == "r":
            value, lat, hit = self.load(addr, cycle)
            return hit, lat, value
        if rw == "w":
            lat, hit = self.store(addr, data, cycle)
            return hit, lat, data
        raise ValueError(f"rw must be 'r' or 'w', got {rw!r}")

    def _service_swaps(self, cycle: int) -> None:
        for lvl in self.levels.values():
            while lvl.pending_swaps:
                lvl.pending_swaps -= 1
                self.lines_invalidated += lvl.swap_trigger(cycle)
                self.swap_events += 1

    def swap_trigger(self, level: str, cycle: int = 0) -> int:
        """Force one swap on ``level``; returns lines invalidated."""
        lvl = self.levels[level]
        n = lvl.swap_trigger(cycle)
        self.lines_invalidated += n
        self.swap_events += 1
        return n

    def memory_word(self, addr: int) -> int:
        return (self.memory.get(addr >> 6) or [0] * WORDS_PER_LINE)[(addr >> 3) & 7]

    def finalize(self, end_cycle: int) -> None:
        for lvl in self.levels.values():
            if lvl.stress is not None:
                lvl.stress.finalize(end_cycle)

    def stress_report(self, bins: int = 10) -> dict:
        out = {"levels": {}, "tlbs": {}}
        for name, lvl in self.levels.items():
            rec = {
                "sets": lvl.n_sets,
                "ways": lvl.ways,
                "total_lines": lvl.n_sets * lvl.ways,
                "static_lines": lvl.static_lines(),
                "min_line_writes": lvl.min_write_count(),
                "accesses": lvl.accesses,
                "hits": lvl.hits,
                "misses": lvl.misses,
                "writebacks": lvl.writebacks,
                "swaps": lvl.swaps,
                "set_shift": lvl.swap.set_shift,
                "swapped_set_counter": lvl.swap.swapped_set_counter,
                "tracked_way": lvl.tracked_way,
            }
            if lvl.stress is not None and lvl.stress.end_cycle is not None:
                rec["tracked_way_histogram"] = lvl.stress.histogram(bins).tolist()
            out["levels"][name] = rec
        for name, t in self.tlbs.items():
            out["tlbs"][name] = {
                "entries": t.entries,
                "static_entries": t.static_entries(),
                "accesses": t.accesses,
                "misses": t.misses,
            }
        return out


def stress_report(h: CacheHierarchy, end_cycle: int, bins: int = 10) -> dict:
    h.finalize(end_cycle)
    return h.stress_report(bins)

