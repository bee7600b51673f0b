import random

import pytest
from hypothesis import given, settings, strategies as st

from agingbench.cache import (
    BASELINE_CACHES,
    CacheGeometry,
    CacheHierarchy,
    CacheLevel,
    SwapShiftState,
    physical_set,
    stress_report,
)


def transposition_oracle(n_sets, k, c):
    """Rotate by k, then apply the adjacent swaps (0,1) .. (c-1,c) to the logical->physical table."""
    table = [(s + k) % n_sets for s in range(n_sets)]
    for i in range(c):
        table[i], table[i + 1] = table[i + 1], table[i]
    return table


def stepped_oracle(n_sets, triggers):
    """Replay ``triggers`` swaps one by one from the identity, wrapping rounds explicitly."""
    table = list(range(n_sets))
    c = 0
    for _ in range(triggers):
        table[c], table[c + 1] = table[c + 1], table[c]
        c += 1
        if c == n_sets - 1:
            c = 0
    return table


class LruOracle:
    """Textbook inclusive-fill LRU hierarchy over line addresses."""

    def __init__(self, geoms):
        self.levels = [(g.n_sets, g.ways, [[] for _ in range(g.n_sets)]) for g in geoms]

    def access(self, line):
        hit = len(self.levels)
        for i, (n_sets, _, sets) in enumerate(self.levels):
            s = sets[line % n_sets]
            if line in s:
                s.remove(line)
                s.append(line)
                hit = i
                break
        for n_sets, ways, sets in self.levels[:hit]:
            s = sets[line % n_sets]
            if len(s) == ways:
                s.pop(0)
            s.append(line)
        return hit


SMALL = {
    "l1d": CacheGeometry(1024, 2, 4),
    "l1i": CacheGeometry(1024, 2, 4),
    "l2": CacheGeometry(4096, 4, 8),
    "l3": CacheGeometry(16384, 4, 30),
}


def small_hierarchy(**kw):
    return CacheHierarchy(SMALL, **kw)


def test_table_geometries():
    assert {n: (g.n_sets, g.ways, g.access_latency_cycles) for n, g in BASELINE_CACHES.items()} == {
        "l1d": (64, 8, 4), "l1i": (128, 4, 4), "l2": (512, 8, 8), "l3": (8192, 16, 30)
    }
    with pytest.raises(ValueError):
        CacheGeometry(1000, 8, 4)


@pytest.mark.parametrize("k,c,expected", [(0, 0, [0, 1, 2, 3]), (0, 2, [1, 2, 0, 3]), (1, 0, [1, 2, 3, 0])])
def test_physical_set_examples(k, c, expected):
    assert [physical_set(s, k, c, 4) for s in range(4)] == expected


@pytest.mark.parametrize("n_sets", [4, 8, 16, 64])
def test_closed_form_equals_oracle(n_sets):
    for k in range(n_sets):
        for c in range(n_sets - 1):
            got = [physical_set(s, k, c, n_sets) for s in range(n_sets)]
            assert got == transposition_oracle(n_sets, k, c)
            assert sorted(got) == list(range(n_sets))


@pytest.mark.parametrize("n_sets", [4, 8, 16, 64])
def test_state_tracks_stepped_swaps(n_sets):
    st_ = SwapShiftState(n_sets, enabled=True)
    for t in range(3 * n_sets):
        assert st_.mapping() == stepped_oracle(n_sets, t)
        st_.advance()


@pytest.mark.parametrize("n_sets", [2, 4, 8, 16, 64])
def test_round_closure(n_sets):
    st_ = SwapShiftState(n_sets, enabled=True)
    for _ in range(n_sets - 1):
        st_.advance()
    assert (st_.set_shift, st_.swapped_set_counter) == (1, 0)
    assert st_.mapping() == [(s + 1) % n_sets for s in range(n_sets)]


@pytest.mark.parametrize("args", [(4, 0, 0, 4), (0, 4, 0, 4), (0, 0, 3, 4), (0, 0, 0, 1)])
def test_physical_set_bounds(args):
    with pytest.raises(ValueError):
        physical_set(*args)


def test_level_perm_follows_closed_form():
    lvl = CacheLevel("t", CacheGeometry(8 * 64 * 2, 2, 1), swap_enabled=True, swap_period=1)
    for _ in range(20):
        lvl.swap_trigger(0)
        assert lvl.perm == lvl.swap.mapping()


def test_second_load_is_l1_hit():
    h = CacheHierarchy()
    _, lat1, hit1 = h.load(0x1000, 0)
    _, lat2, hit2 = h.load(0x1000, 1)
    assert (hit1, lat1) == (3, 200)
    assert (hit2, lat2) == (0, 4)
    assert h.access(0x1008, "r", None, 2)[:2] == (0, 4)


def test_matches_textbook_lru_without_mitigation():
    rng = random.Random(3)
    h = small_hierarchy()
    ref = LruOracle([SMALL["l1d"], SMALL["l2"], SMALL["l3"]])
    for t in range(100_000):
        addr = rng.randrange(1 << 16) & ~7
        if rng.random() < 0.3:
            hit, _, _ = h.access(addr, "w", rng.getrandbits(64), t)
        else:
            hit, _, _ = h.access(addr, "r", None, t)
        assert hit == ref.access(addr >> 6), t


@pytest.mark.parametrize("period", [1, 3, 50])
def test_flat_memory_oracle(period):
    rng = random.Random(period)
    for swap in (False, True):
        h = small_hierarchy(swap_enabled=swap, swap_period=period)
        mem = {}
        for t in range(20_000):
            addr = rng.randrange(1 << 15) & ~7
            if rng.random() < 0.4:
                v = rng.getrandbits(64)
                h.store(addr, v, t)
                mem[addr] = v
            else:
                assert h.load(addr, t)[0] == mem.get(addr, 0)
        if swap:
            assert h.swap_events > 0


def test_load_after_swap_misses_but_keeps_data():
    h = small_hierarchy(swap_enabled={"l1d": True}, swap_period=10**9)
    h.store(0, 0x55, 0)  # line 0 lives in logical set 0 of every level
    h.swap_trigger("l1d", 1)
    assert h.l1d.peek(0) is None
    v, _, hit = h.load(0, 2)
    assert v == 0x55 and hit == 1


def test_trigger_invalidates_two_sets_of_lines():
    h = small_hierarchy(swap_enabled=True, swap_period=10**9)
    lvl = h.l2
    before = list(lvl.write_counts)
    n = h.swap_trigger("l2", 5)
    assert n == 2 * lvl.ways
    changed = [i for i, (a, b) in enumerate(zip(before, lvl.write_counts)) if a != b]
    assert len(changed) == 2 * lvl.ways
    assert all(lvl.write_counts[i] == 1 for i in changed)
    assert lvl.writebacks == 0
    # tracked way observes a full line of PRBS words in each set
    assert len(lvl.stress._buf) == 2 * 8


def test_dirty_lines_written_back_on_swap():
    h = small_hierarchy(swap_enabled=True, swap_period=10**9)
    h.store(0, 7, 0)
    for i, name in enumerate(("l1d", "l2", "l3")):
        h.swap_trigger(name, i + 1)
        assert h.levels[name].writebacks == 1
    assert h.memory_word(0) == 7
    assert h.load(0, 10)[0] == 7


def test_swap_triggers_follow_period():
    h = small_hierarchy(swap_enabled={"l1d": True}, swap_period=10)
    for t in range(95):
        h.load(64 * t, t)
    assert h.l1d.swaps == 9
    assert h.l2.swaps == 0


def test_inclusive_fill_log():
    rng = random.Random(9)
    h = small_hierarchy(record_fills=True, swap_enabled=True, swap_period=7)
    for t in range(5000):
        h.load(rng.randrange(1 << 16) & ~7, t)
        h.fetch(0x40_0000 + 4 * rng.randrange(2048), t)
    for top in (h.l1d, h.l1i):
        for d in top.sets:
            for line in d:
                assert line in h.l2.fill_log and line in h.l3.fill_log


def test_untouched_cache_all_static():
    h = small_hierarchy()
    rep = stress_report(h, 100)
    for name, lvl in rep["levels"].items():
        assert lvl["static_lines"] == lvl["total_lines"]
    for t in rep["tlbs"].values():
        assert t["static_entries"] == t["entries"]


@settings(max_examples=10, deadline=None)
@given(period=st.integers(1, 4), rounds=st.integers(1, 3), seed=st.integers(0, 1000))
def test_mitigation_write_count_bound(period, rounds, seed):
    geom = CacheGeometry(8 * 2 * 64, 2, 1)
    lvl = CacheLevel("t", geom, swap_enabled=True, swap_period=period)
    h = CacheHierarchy({"l1d": geom, "l2": SMALL["l2"], "l3": SMALL["l3"]},
                       swap_enabled={"l1d": True}, swap_period=period)
    rng = random.Random(seed)
    n_access = period * (lvl.n_sets - 1) * rounds
    for t in range(n_access):
        h.load(rng.randrange(1 << 12) & ~7, t)
    assert h.l1d.min_write_count() >= rounds
    if rounds >= 2:
        assert h.l1d.static_lines() == 0


def test_tlb_observation():
    h = CacheHierarchy()
    for p in range(100):
        h.load(p << 12, p)
    rep = h.stress_report()
    assert rep["tlbs"]["dtlb"]["misses"] == 100
    assert rep["tlbs"]["dtlb"]["static_entries"] < 64
    assert rep["tlbs"]["itlb"]["static_entries"] == 128


def test_bad_rw():
    with pytest.raises(ValueError):
        CacheHierarchy().access(0, "x", None, 0)
