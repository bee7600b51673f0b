import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from agingbench.prbs import Prbs
from agingbench.stress import (
    BitStressArray,
    CellStress,
    FinalizeError,
    Granularity,
    SimulationOrderError,
    StructStress,
    finalize,
    histogram,
    is_static,
    observe,
    signal_probability_histogram,
)


def timeline_oracle(writes, end):
    """Expand writes into a per-cycle value array and measure it directly.

    ``writes`` must have strictly increasing cycles.
    """
    line = np.zeros(end, dtype=np.int8)
    cur, prev_t = 0, 0
    toggles = 0
    for t, v in writes:
        line[prev_t:t] = cur
        if v != cur:
            toggles += 1
        cur, prev_t = v, t
    line[prev_t:end] = cur
    runs = np.diff(np.flatnonzero(np.diff(np.concatenate(([2], line, [2])))))
    return {
        "time_at_one": int(line.sum()),
        "time_at_zero": int(end - line.sum()),
        "toggle_count": toggles,
        "write_count": len(writes),
        "max_static_interval": int(runs.max()) if end else 0,
    }


def run_cell(writes, end):
    c = CellStress()
    for t, v in writes:
        c.observe(t, v)
    return c.finalize(end)


write_streams = st.lists(
    st.tuples(st.integers(1, 50), st.integers(0, 1)), max_size=40
).map(lambda steps: [(sum(d for d, _ in steps[: i + 1]), v) for i, (_, v) in enumerate(steps)])


def test_constant_zero_writes():
    c = run_cell([(0, 0), (100, 0)], 200)
    assert (c.write_count, c.toggle_count, c.time_at_zero) == (2, 0, 200)
    assert c.signal_probability == 0.0


def test_half_duty():
    c = run_cell([(0, 0), (100, 1)], 200)
    assert (c.time_at_zero, c.time_at_one, c.toggle_count) == (100, 100, 1)
    assert c.signal_probability == 0.5


def test_alternating_every_cycle():
    n = 50
    c = run_cell([(t, (t + 1) % 2) for t in range(2 * n)], 2 * n)
    assert c.max_static_interval == 1
    assert c.toggle_count == 2 * n


def test_never_written():
    c = CellStress().finalize(1000)
    assert c.write_count == 0
    assert c.max_static_interval == 1000
    assert c.signal_probability == 0.0


def test_single_write_of_one():
    c = run_cell([(0, 1)], 500)
    assert c.signal_probability == 1.0
    assert c.toggle_count == 1  # from the reset value


def test_finalize_at_last_write_has_no_trailing_credit():
    c = run_cell([(0, 1), (40, 0)], 40)
    assert (c.time_at_one, c.time_at_zero) == (40, 0)


def test_same_cycle_rewrite_is_a_zero_length_run():
    c = run_cell([(10, 1), (10, 0)], 20)
    assert c.toggle_count == 2
    assert c.time_at_one == 0
    assert c.max_static_interval == 10


def test_module_functions():
    c = CellStress()
    observe(c, 5, 1)
    finalize(c, 10)
    assert c.time_at_one == 5


@pytest.mark.parametrize("wc,expected", [(0, True), (1, True), (2, False), (10, False)])
def test_is_static(wc, expected):
    assert is_static(wc) is expected


def test_order_errors():
    c = CellStress()
    c.observe(10, 1)
    with pytest.raises(SimulationOrderError):
        c.observe(9, 0)
    with pytest.raises(SimulationOrderError):
        c.finalize(5)
    c.finalize(10)
    with pytest.raises(FinalizeError):
        c.finalize(11)
    with pytest.raises(FinalizeError):
        c.observe(12, 0)


def test_probability_needs_finalize():
    with pytest.raises(FinalizeError):
        CellStress().signal_probability


@settings(max_examples=200, deadline=None)
@given(writes=write_streams, tail=st.integers(0, 30))
def test_cell_matches_timeline(writes, tail):
    end = (writes[-1][0] if writes else 0) + tail
    c = run_cell(writes, end)
    ref = timeline_oracle(writes, end)
    for k, v in ref.items():
        assert getattr(c, k) == v, k
    # invariants
    assert c.time_at_one + c.time_at_zero == end
    assert c.toggle_count <= c.write_count
    assert c.max_static_interval <= end


@settings(max_examples=100, deadline=None)
@given(writes=write_streams, cut=st.integers(0, 40))
def test_split_passes_merge(writes, cut):
    end = writes[-1][0] + 3 if writes else 3
    whole = run_cell(writes, end)
    c = CellStress()
    for t, v in writes[:cut]:
        c.observe(t, v)
    for t, v in writes[cut:]:
        c.observe(t, v)
    assert c.finalize(end) == whole


def test_histogram_edges():
    assert histogram([0.0] * 5, 10).tolist() == [5] + [0] * 9
    h = histogram([0.5], 10)
    assert h[5] == 1
    assert histogram([1.0], 10)[9] == 1
    with pytest.raises(ValueError):
        histogram([0.5], 1)
    with pytest.raises(ValueError):
        histogram([1.5], 10)


@settings(max_examples=50, deadline=None)
@given(p=st.lists(st.floats(0, 1), max_size=100), bins=st.integers(2, 20))
def test_histogram_mass(p, bins):
    assert int(histogram(p, bins).sum()) == len(p)


def test_struct_histogram():
    cells = [run_cell([(0, 0)], 100) for _ in range(3)]
    s = StructStress("rf", Granularity.PER_BIT, cells, [1, 1, 1])
    assert signal_probability_histogram(s, 10).tolist()[0] == 3
    assert s.static_entries() == 3
    s.cells.append(CellStress())
    with pytest.raises(FinalizeError):
        signal_probability_histogram(s, 10)


def test_prbs_register_is_balanced():
    # 8-bit register rewritten with PRBS bytes every cycle
    p = Prbs(23, seed=11)
    arr = BitStressArray(1, width=8)
    for t in range(20_000):
        arr.observe(0, t, p.word(8))
    arr.finalize(20_000)
    probs = arr.probabilities()[0]
    assert ((probs >= 0.45) & (probs <= 0.55)).all()


@settings(max_examples=60, deadline=None)
@given(
    data=st.lists(
        st.tuples(st.integers(0, 3), st.integers(0, 5), st.integers(0, 2**64 - 1)),
        max_size=60,
    ),
    tail=st.integers(0, 10),
    chunk=st.integers(1, 7),
)
def test_bit_array_matches_cells(data, tail, chunk):
    n_slots, width = 4, 64
    arr = BitStressArray(n_slots, width, start_cycle=2)
    arr.CHUNK = chunk
    cells = [[CellStress.starting_at(2) for _ in range(width)] for _ in range(n_slots)]
    t = 2
    for slot, dt, v in data:
        t += dt
        arr.observe(slot, t, v)
        for b in range(width):
            cells[slot][b].observe(t, (v >> b) & 1)
    end = t + tail
    arr.finalize(end)
    for s in range(n_slots):
        for b in range(width):
            ref = cells[s][b].finalize(end)
            got = arr.cell(s, b)
            assert got == ref
            assert got.signal_probability == ref.signal_probability


def test_bit_array_errors():
    arr = BitStressArray(2, 8)
    arr.observe(0, 10, 1)
    arr.observe(0, 5, 1)
    with pytest.raises(SimulationOrderError):
        arr.flush()
    arr = BitStressArray(2, 8)
    arr.observe(5, 1, 1)
    with pytest.raises(IndexError):
        arr.flush()
    arr = BitStressArray(2, 8)
    arr.finalize(3)
    with pytest.raises(FinalizeError):
        arr.finalize(4)
    with pytest.raises(ValueError):
        BitStressArray(1, 65)


def test_static_slots():
    arr = BitStressArray(3, 4)
    arr.observe(0, 1, 1)
    arr.observe(0, 2, 1)
    arr.observe(1, 2, 1)
    assert arr.static_slots() == 2
