"""BLIF-subset combinational netlists and signal-probability runs.

Supported: ``.model``, ``.inputs``, ``.outputs``, ``.names`` with 0/1/- cover
rows, ``.end``, ``#`` comments and ``\\`` line continuation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from graphlib import CycleError, TopologicalSorter
from importlib import resources
from pathlib import Path

import numpy as np

from .prbs import LfsrState, lfsr_bits
from .stress import CellStress, bin_edges, histogram

MAX_EXHAUSTIVE_INPUTS = 20
DEFAULT_VECTORS = 1_000_000


class NetlistError(ValueError):
    def __init__(self, msg: str, line: int | None = None):
        super().__init__(f"line {line}: {msg}" if line is not None else msg)
        self.line = line


@dataclass
class Node:
    output: str
    fanins: list[str]
    rows: list[str]
    polarity: int = 1  # 1: rows list the on-set, 0: the off-set
    line: int = 0


@dataclass
class Netlist:
    name: str
    inputs: list[str]
    outputs: list[str]
    nodes: dict[str, Node]
    order: list[str] = field(default_factory=list)
    forced_injection_nets: list[str] = field(default_factory=list)

    @property
    def nets(self) -> list[str]:
        return list(self.inputs) + list(self.order)


def _logical_lines(text: str):
    buf, start = "", None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if start is None:
            start = lineno
        if line.endswith("\\"):
            buf += line[:-1] + " "
            continue
        buf += line
        if buf.strip():
            yield start, buf.strip()
        buf, start = "", None
    if buf.strip():
        yield start, buf.strip()


def parse_blif(text: str) -> Netlist:
    name = ""
    inputs: list[str] = []
    outputs: list[str] = []
    nodes: dict[str, Node] = {}
    current: Node | None = None
    for lineno, line in _logical_lines(text):
        if line.startswith("."):
            words = line.split()
            cmd, args = words[0], words[1:]
            current = None
            if cmd == ".model":
                name = args[0] if args else ""
            elif cmd == ".inputs":
                inputs.extend(args)
            elif cmd == ".outputs":
                outputs.extend(args)
            elif cmd == ".names":
                if not args:
                    raise NetlistError(".names needs at least an output", lineno)
                out = args[-1]
                if out in nodes:
                    raise NetlistError(f"net {out!r} has more than one driver", lineno)
                current = Node(out, args[:-1], [], line=lineno)
                nodes[out] = current
            elif cmd == ".end":
                break
            else:
                raise NetlistError(f"unsupported directive {cmd}", lineno)
            continue
        if current is None:
            raise NetlistError(f"cover row outside .names: {line!r}", lineno)
        parts = line.split()
        k = len(current.fanins)
        if k == 0:
            if len(parts) != 1 or parts[0] not in ("0", "1"):
                raise NetlistError(f"malformed constant row {line!r}", lineno)
            pattern, out = "", parts[0]
        else:
            if len(parts) != 2:
                raise NetlistError(f"malformed cover row {line!r}", lineno)
            pattern, out = parts
            if len(pattern) != k or set(pattern) - set("01-"):
                raise NetlistError(f"cover row {pattern!r} does not match {k} fanins", lineno)
            if out not in ("0", "1"):
                raise NetlistError(f"cover output must be 0 or 1, got {out!r}", lineno)
        pol = int(out)
        if current.rows and pol != current.polarity:
            raise NetlistError("mixed on-set and off-set rows", lineno)
        current.polarity = pol
        current.rows.append(pattern)

    seen = set()
    for i in inputs:
        if i in seen:
            raise NetlistError(f"input {i!r} declared twice")
        seen.add(i)
        if i in nodes:
            raise NetlistError(f"input {i!r} is also driven by a node", nodes[i].line)
    for n in nodes.values():
        for f in n.fanins:
            if f not in nodes and f not in seen:
                raise NetlistError(f"net {f!r} is undriven", n.line)
    for o in outputs:
        if o not in nodes and o not in seen:
            raise NetlistError(f"output {o!r} is undriven")
    ts = TopologicalSorter({n.output: [f for f in n.fanins if f in nodes] for n in nodes.values()})
    try:
        order = list(ts.static_order())
    except CycleError as e:
        cyc = e.args[1]
        raise NetlistError(f"combinational cycle through {' -> '.join(cyc)}", nodes[cyc[0]].line) from None
    return Netlist(name, inputs, outputs, nodes, order)


def load_blif(path) -> Netlist:
    return parse_blif(Path(path).read_text())


def fixture_path(name: str) -> Path:
    return Path(str(resources.files("agingbench") / "fixtures" / name))


def _eval_node(node: Node, vals: dict) -> int:
    hit = 0
    for row in node.rows:
        for ch, f in zip(row, node.fanins):
            if ch != "-" and int(ch) != vals[f]:
                break
        else:
            hit = 1
            break
    return hit if node.polarity else 1 - hit


def evaluate(n: Netlist, input_vector) -> dict[str, int]:
    """Evaluate one vector; ``input_vector`` maps input names to bits (or lists bits in input order)."""
    if not isinstance(input_vector, dict):
        vec = list(input_vector)
        if len(vec) != len(n.inputs):
            raise ValueError(f"expected {len(n.inputs)} input bits, got {len(vec)}")
        input_vector = dict(zip(n.inputs, vec))
    missing = [i for i in n.inputs if i not in input_vector]
    if missing:
        raise ValueError(f"missing input assignment for {missing}")
    vals = {i: int(input_vector[i]) & 1 for i in n.inputs}
    for out in n.order:
        vals[out] = _eval_node(n.nodes[out], vals)
    return vals


def _eval_node_vec(node: Node, vals: dict, size: int) -> np.ndarray:
    acc = np.zeros(size, dtype=bool)
    for row in node.rows:
        term = np.ones(size, dtype=bool)
        for ch, f in zip(row, node.fanins):
            if ch == "1":
                term &= vals[f]
            elif ch == "0":
                term &= ~vals[f]
        acc |= term
    return acc if node.polarity else ~acc


def evaluate_vectors(n: Netlist, inputs: dict[str, np.ndarray], forced: dict[str, np.ndarray] | None = None) -> dict[str, np.ndarray]:
    """Bit-parallel evaluation over many vectors; ``forced`` nets are overridden before fanout."""
    forced = forced or {}
    size = len(next(iter(inputs.values()))) if inputs else len(next(iter(forced.values()), []))
    vals = {}
    for i in n.inputs:
        vals[i] = np.asarray(forced[i] if i in forced else inputs[i], dtype=bool)
    for out in n.order:
        vals[out] = (np.asarray(forced[out], dtype=bool) if out in forced
                     else _eval_node_vec(n.nodes[out], vals, size))
    return vals


def stress_from_series(values: np.ndarray) -> CellStress:
    """One write per cycle, cycle ``j`` carrying ``values[j]``; finalized at ``len(values)``."""
    v = np.asarray(values, dtype=np.int8)
    n = v.size
    prev = np.empty_like(v)
    if n:
        prev[0] = 0
        prev[1:] = v[:-1]
    changes = np.flatnonzero(v != prev)
    bounds = np.concatenate(([0], changes, [n]))
    ones = int(v.sum(dtype=np.int64))
    return CellStress(
        current_value=int(v[-1]) if n else 0,
        last_change_cycle=int(changes[-1]) if changes.size else 0,
        time_at_one=ones,
        time_at_zero=n - ones,
        toggle_count=int(changes.size),
        write_count=n,
        max_static_interval=int(np.diff(bounds).max()) if n else 0,
        initialized=n > 0,
        start_cycle=0,
        last_write_cycle=n,
        finalized=True,
    )


@dataclass
class ProbabilityResult:
    netlist: Netlist
    source: str
    n_vectors: int
    cells: dict[str, CellStress]
    bins: int = 10

    @property
    def probabilities(self) -> dict[str, float]:
        return {net: c.signal_probability for net, c in self.cells.items()}

    @property
    def histogram(self) -> np.ndarray:
        return histogram(list(self.probabilities.values()), self.bins)

    def out_of_band(self, lo: float = 0.3, hi: float = 0.7) -> list[str]:
        return [net for net, p in self.probabilities.items() if not lo <= p <= hi]

    def write_net_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["net", "prob", "toggles", "max_static_interval"])
            for net, c in self.cells.items():
                w.writerow([net, repr(c.signal_probability), c.toggle_count, c.max_static_interval])

    def write_histogram_csv(self, path) -> None:
        write_histogram_csv(path, self.histogram, self.bins)


def write_histogram_csv(path, counts, bins: int) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["bin_lo", "bin_hi", "count"])
        for (lo, hi), c in zip(bin_edges(bins), counts):
            w.writerow([lo, hi, int(c)])


def probability_run(n: Netlist, source: str = "lfsr", n_vectors: int = DEFAULT_VECTORS,
                    seed: int = 1, width: int = 23, constant_vector=None,
                    forced_injection_nets=None, bins: int = 10) -> ProbabilityResult:
    """Drive the inputs from ``source`` and measure per-net signal probability.

    ``lfsr``: each vector is the next ``len(inputs)`` emitted bits, first bit
    to the first input. ``exhaustive``: all ``2^k`` vectors in counting order
    (``n_vectors`` ignored). ``constant``: ``constant_vector`` (default all
    zeros) repeated.
    """
    forced_nets = list(n.forced_injection_nets if forced_injection_nets is None else forced_injection_nets)
    for net in forced_nets:
        if net not in n.nodes and net not in n.inputs:
            raise ValueError(f"forced net {net!r} not in netlist")
    k = len(n.inputs)
    lfsr = LfsrState.default(width, seed)
    if source == "exhaustive":
        if k > MAX_EXHAUSTIVE_INPUTS:
            raise ValueError(f"exhaustive source limited to {MAX_EXHAUSTIVE_INPUTS} inputs, netlist has {k}")
        n_vectors = 1 << k
        j = np.arange(n_vectors, dtype=np.int64)
        inputs = {name: ((j >> i) & 1).astype(bool) for i, name in enumerate(n.inputs)}
    elif source == "lfsr":
        bits, lfsr = lfsr_bits(lfsr, k * n_vectors)
        mat = bits.reshape(n_vectors, k).astype(bool) if k else np.zeros((n_vectors, 0), bool)
        inputs = {name: mat[:, i] for i, name in enumerate(n.inputs)}
    elif source == "constant":
        vec = [0] * k if constant_vector is None else list(constant_vector)
        if len(vec) != k:
            raise ValueError(f"constant vector needs {k} bits")
        inputs = {name: np.full(n_vectors, bool(b)) for name, b in zip(n.inputs, vec)}
    else:
        raise ValueError(f"unknown source {source!r}")
    forced = {}
    for net in forced_nets:
        bits, lfsr = lfsr_bits(lfsr, n_vectors)
        forced[net] = bits.astype(bool)
    vals = evaluate_vectors(n, inputs, forced) if (inputs or forced) else {}
    cells = {net: stress_from_series(vals[net]) for net in n.nets}
    return ProbabilityResult(n, source, n_vectors, cells, bins)
