import random

import pytest

from agingbench.trace import Kind
from agingbench.units import ExecCore, dispatch, inject_tick, unit_stress_table


def names(core):
    return [u.name for u in core.units]


def test_table_mix():
    core = ExecCore()
    assert names(core) == ["ALU0", "ALU1", "ALU2", "FpAddSub", "FpMulDiv", "Branch", "Load", "Store"]
    assert [u.latency_cycles for u in core.units] == [1, 1, 1, 3, 5, 1, 1, 1]


def test_same_cycle_alus_tie_break():
    core = ExecCore()
    assert core.dispatch(Kind.IntAlu, 10, 0)[0] == 0
    assert core.dispatch(Kind.IntAlu, 10, 0)[0] == 1
    assert core.dispatch(Kind.IntAlu, 10, 0)[0] == 2
    unit, start = core.dispatch(Kind.IntAlu, 10, 0)
    assert (unit, start) == (0, 11)
    assert core.stall_cycles == 1


def test_fp_mul_latency():
    core = ExecCore()
    unit, _ = core.dispatch(Kind.FpMulDiv, 100, 0)
    assert core.units[unit].busy_until >= 105


def test_wrapper_uses_event_kind():
    class Ev:
        kind = Kind.Branch

    core = ExecCore()
    assert dispatch(core, Ev, 0, 1) == (5, 0)


def test_inject_skips_busy_units():
    core = ExecCore(injection_enabled=True)
    core.dispatch(Kind.FpMulDiv, 0, 0xFF)
    before = core.bus.write_count.copy()
    n = inject_tick(core, 2)
    core.bus.flush()
    fpmul = 4
    assert n == len(core.units) - 1
    assert core.bus.write_count[fpmul] == before[fpmul] + 1  # only the dispatch write
    assert core.units[fpmul].injections == 0
    assert all(u.op_count == (1 if i == fpmul else 0) for i, u in enumerate(core.units))


def test_empty_trace_all_static():
    core = ExecCore()
    core.finalize(1000)
    assert all(r["static"] for r in unit_stress_table(core))


def test_injection_relieves_idle_units():
    period = 64
    core = ExecCore(injection_enabled=True, injection_period_cycles=period)
    span = 1000 * period
    core.advance(span - 1)
    core.finalize(span)
    table = unit_stress_table(core)
    assert not any(r["static"] for r in table)
    assert all(r["op_count"] == 0 for r in table)
    assert int(core.bus.toggles.min()) >= 1
    assert int(core.bus.max_static.max()) <= 64 * period


def random_stream(n, seed):
    rng = random.Random(seed)
    t = 0
    for _ in range(n):
        t += rng.randint(0, 2)
        yield rng.choice(list(Kind)), t, rng.getrandbits(64)


def test_injection_does_not_change_dispatch():
    results = []
    for inj in (False, True):
        core = ExecCore(injection_enabled=inj, injection_period_cycles=7)
        out = []
        for kind, t, op in random_stream(20_000, 5):
            core.advance(t)
            out.append(core.dispatch(kind, t, op))
        results.append((out, core.stall_cycles, [u.op_count for u in core.units],
                        [u.busy_until for u in core.units]))
    assert results[0] == results[1]


def test_op_count_matches_kind_counts():
    core = ExecCore()
    counts = {k: 0 for k in Kind}
    for kind, t, op in random_stream(5000, 8):
        core.dispatch(kind, t, op)
        counts[kind] += 1
    for kind, idx in core.by_kind.items():
        assert sum(core.units[i].op_count for i in idx) == counts[kind]


def test_bad_mix():
    with pytest.raises(ValueError):
        ExecCore({Kind.IntAlu: (0, 1)})
    with pytest.raises(ValueError):
        ExecCore(injection_period_cycles=0)
