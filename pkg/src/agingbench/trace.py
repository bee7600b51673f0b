"""Trace events, the ``#agingtrace v1`` file format, and synthetic workloads."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from enum import IntEnum
from typing import IO, Iterable, Iterator

import numpy as np

from .prbs import Prbs

HEADER = "#agingtrace v1"
LINE_BYTES = 64
DATA_BASE = 0x1000_0000
CONSTANT_STORE_WORD = 0


class TraceError(ValueError):
    def __init__(self, msg: str, line: int | None = None):
        super().__init__(f"line {line}: {msg}" if line is not None else msg)
        self.line = line


class Kind(IntEnum):
    IntAlu = 0
    FpAddSub = 1
    FpMulDiv = 2
    Branch = 3
    Load = 4
    Store = 5


class RegClass(IntEnum):
    Gpr = 0
    FpVec = 1
    Control = 2
    Mask = 3
    Segment = 4
    Temp = 5


# architectural registers per class; shared by the generator and the register file
REG_COUNTS = {
    RegClass.Gpr: 16,
    RegClass.FpVec: 32,
    RegClass.Control: 16,
    RegClass.Mask: 8,
    RegClass.Segment: 8,
    RegClass.Temp: 16,
}

Reg = tuple  # (RegClass, index)


@dataclass(slots=True)
class TraceEvent:
    seq: int
    cycle: int
    kind: Kind
    dst_reg: Reg | None = None
    src_regs: tuple = ()
    mem_addr: int | None = None
    data: int | None = None

    def to_record(self) -> dict:
        rec = {"seq": self.seq, "cycle": self.cycle, "kind": self.kind.name}
        if self.dst_reg is not None:
            rec["dst"] = _reg_str(self.dst_reg)
        if self.src_regs:
            rec["srcs"] = [_reg_str(r) for r in self.src_regs]
        if self.mem_addr is not None:
            rec["addr"] = f"{self.mem_addr:#x}"
        if self.data is not None:
            rec["data"] = f"{self.data:#x}"
        return rec


def _reg_str(r) -> str:
    return f"{RegClass(r[0]).name}:{r[1]}"


def _parse_reg(text, lineno) -> Reg:
    try:
        cls, idx = str(text).split(":")
        return (RegClass[cls], int(idx))
    except (ValueError, KeyError):
        raise TraceError(f"bad register {text!r}", lineno) from None


def _parse_hex(text, name, lineno) -> int:
    try:
        v = int(text, 16)
    except (TypeError, ValueError):
        raise TraceError(f"{name} must be a hex string, got {text!r}", lineno) from None
    if not 0 <= v < 1 << 64:
        raise TraceError(f"{name} out of 64-bit range", lineno)
    return v


_FIELDS = {"seq", "cycle", "kind", "dst", "srcs", "addr", "data"}


def parse_record(line: str, lineno: int) -> TraceEvent:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as e:
        raise TraceError(f"malformed record: {e.msg}", lineno) from None
    if not isinstance(rec, dict):
        raise TraceError("record must be an object", lineno)
    extra = set(rec) - _FIELDS
    if extra:
        raise TraceError(f"unknown fields {sorted(extra)}", lineno)
    for req in ("seq", "cycle", "kind"):
        if req not in rec:
            raise TraceError(f"missing required field {req!r}", lineno)
    seq, cycle = rec["seq"], rec["cycle"]
    if not (isinstance(seq, int) and isinstance(cycle, int)) or seq < 0 or cycle < 0:
        raise TraceError("seq and cycle must be non-negative integers", lineno)
    try:
        kind = Kind[rec["kind"]]
    except (KeyError, TypeError):
        raise TraceError(f"unknown kind {rec['kind']!r}", lineno) from None
    dst = _parse_reg(rec["dst"], lineno) if "dst" in rec else None
    srcs = rec.get("srcs", [])
    if not isinstance(srcs, list):
        raise TraceError("srcs must be a list", lineno)
    addr = _parse_hex(rec["addr"], "addr", lineno) if "addr" in rec else None
    data = _parse_hex(rec["data"], "data", lineno) if "data" in rec else None
    if kind in (Kind.Load, Kind.Store) and addr is None:
        raise TraceError(f"{kind.name} requires addr", lineno)
    if kind is Kind.Store and data is None:
        raise TraceError("Store requires data", lineno)
    return TraceEvent(seq, cycle, kind, dst, tuple(_parse_reg(r, lineno) for r in srcs), addr, data)


def read_trace(stream: IO[str]) -> Iterator[TraceEvent]:
    """Yield validated events; raises :class:`TraceError` at the first bad line.

    A completely empty stream is an empty trace.
    """
    prev_seq = prev_cycle = None
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\n")
        if lineno == 1:
            if line.strip() != HEADER:
                raise TraceError(f"missing {HEADER!r} header", lineno)
            continue
        if not line.strip():
            continue
        ev = parse_record(line, lineno)
        if prev_seq is not None:
            if ev.seq <= prev_seq:
                raise TraceError(f"seq {ev.seq} not greater than {prev_seq}", lineno)
            if ev.cycle < prev_cycle:
                raise TraceError(f"cycle {ev.cycle} precedes {prev_cycle}", lineno)
        prev_seq, prev_cycle = ev.seq, ev.cycle
        yield ev


def write_trace(events: Iterable[TraceEvent], stream: IO[str]) -> int:
    stream.write(HEADER + "\n")
    n = 0
    dumps = json.dumps
    for ev in events:
        stream.write(dumps(ev.to_record(), separators=(",", ":")) + "\n")
        n += 1
    return n


PROFILE_NAMES = ("IntOnly", "FpMixed", "SmallFootprint", "LargeFootprint")
_CLI_NAMES = {
    "int-only": "IntOnly",
    "fp-mixed": "FpMixed",
    "small-footprint": "SmallFootprint",
    "large-footprint": "LargeFootprint",
}

_PROFILE_DEFAULTS = {
    "IntOnly": dict(footprint_bytes=1 << 20, fp_fraction=0.0),
    "FpMixed": dict(footprint_bytes=1 << 20, fp_fraction=0.3),
    "SmallFootprint": dict(footprint_bytes=16 << 10, fp_fraction=0.0),
    "LargeFootprint": dict(footprint_bytes=64 << 20, fp_fraction=0.0),
}


def profile_name(name: str) -> str:
    if name in PROFILE_NAMES:
        return name
    try:
        return _CLI_NAMES[name.lower()]
    except KeyError:
        raise ValueError(f"unknown profile {name!r}") from None


@dataclass(frozen=True)
class WorkloadProfile:
    name: str
    length: int
    seed: int = 1
    footprint_bytes: int | None = None
    fp_fraction: float | None = None
    control_reg_writes: str = "once"
    mem_fraction: float = 0.35
    store_data: str = "prbs"
    dispatch_rate: float = 2.0
    control_period: int = 100_000

    def __post_init__(self):
        object.__setattr__(self, "name", profile_name(self.name))
        d = _PROFILE_DEFAULTS[self.name]
        if self.footprint_bytes is None:
            object.__setattr__(self, "footprint_bytes", d["footprint_bytes"])
        if self.fp_fraction is None:
            object.__setattr__(self, "fp_fraction", d["fp_fraction"])
        if self.length < 0:
            raise ValueError("length must be >= 0")
        if self.footprint_bytes < LINE_BYTES:
            raise ValueError(f"footprint {self.footprint_bytes} is smaller than one cache line")
        if self.name == "IntOnly" and self.fp_fraction != 0:
            raise ValueError("IntOnly requires fp_fraction = 0")
        if not 0 <= self.fp_fraction <= 1 or not 0 <= self.mem_fraction <= 1:
            raise ValueError("fractions must lie in [0, 1]")
        if self.fp_fraction + self.mem_fraction > 1:
            raise ValueError("fp_fraction + mem_fraction must not exceed 1")
        if self.control_reg_writes not in ("none", "once", "periodic"):
            raise ValueError(f"bad control_reg_writes {self.control_reg_writes!r}")
        if self.store_data not in ("prbs", "constant"):
            raise ValueError(f"bad store_data {self.store_data!r}")
        if not 0 < self.dispatch_rate <= 4:
            raise ValueError("dispatch_rate must be in (0, 4]")
        if self.control_period < 1:
            raise ValueError("control_period must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


_CHUNK = 1 << 16


def gen_synthetic(p: WorkloadProfile) -> Iterator[TraceEvent]:
    """Deterministic event stream for profile ``p``."""
    rng = np.random.default_rng([p.seed & 0xFFFF_FFFF_FFFF_FFFF, 0xA61])
    prbs = Prbs(23, seed=p.seed)
    n_ctrl = REG_COUNTS[RegClass.Control]
    n_gpr = REG_COUNTS[RegClass.Gpr]
    n_fp_used = REG_COUNTS[RegClass.FpVec] // 2  # upper half stays idle, as in wide-vector files
    fp, mem = p.fp_fraction, p.mem_fraction
    other = 1.0 - fp - mem
    probs = np.array([other * 0.75, fp / 2, fp / 2, other * 0.25, mem * 0.7, mem * 0.3])
    probs = probs / probs.sum()
    n_words = p.footprint_bytes // 8
    stream_ptr = 0
    kinds_list = list(Kind)
    emitted = 0
    while emitted < p.length:
        n = min(_CHUNK, p.length - emitted)
        seqs = np.arange(emitted, emitted + n)
        kinds = rng.choice(6, size=n, p=probs)
        dsts = rng.integers(0, n_gpr, size=n)
        fdsts = rng.integers(0, n_fp_used, size=n)
        srcs = rng.integers(0, n_gpr, size=(n, 2))
        nsrc = rng.integers(1, 3, size=n)
        rand_words = rng.integers(0, n_words, size=n)
        use_stream = rng.random(n) < 0.5
        load_fp = rng.random(n) < fp
        if p.store_data == "prbs":
            store_words = prbs.words(n).tolist()
        else:
            store_words = None
        cycles = np.floor(seqs / p.dispatch_rate).astype(np.int64).tolist()
        kinds, dsts, fdsts, srcs, nsrc = kinds.tolist(), dsts.tolist(), fdsts.tolist(), srcs.tolist(), nsrc.tolist()
        rand_words, use_stream, load_fp = rand_words.tolist(), use_stream.tolist(), load_fp.tolist()
        for i in range(n):
            seq = emitted + i
            k = kinds[i]
            ctrl = _control_write(p.control_reg_writes, seq, n_ctrl, p.control_period)
            if ctrl is not None:
                yield TraceEvent(seq, cycles[i], Kind.IntAlu, (RegClass.Control, ctrl),
                                 ((RegClass.Gpr, srcs[i][0]),))
                continue
            kind = kinds_list[k]
            if k == 1 or k == 2:
                s = tuple((RegClass.FpVec, x % n_fp_used) for x in srcs[i][: nsrc[i]])
                yield TraceEvent(seq, cycles[i], kind, (RegClass.FpVec, fdsts[i]), s)
                continue
            s = tuple((RegClass.Gpr, x) for x in srcs[i][: nsrc[i]])
            if k == 0:
                yield TraceEvent(seq, cycles[i], kind, (RegClass.Gpr, dsts[i]), s)
            elif k == 3:
                yield TraceEvent(seq, cycles[i], kind, None, s)
            else:
                if use_stream[i]:
                    w = stream_ptr
                    stream_ptr = (stream_ptr + 1) % n_words
                else:
                    w = rand_words[i]
                addr = DATA_BASE + 8 * w
                if k == 4:
                    dst = (RegClass.FpVec, fdsts[i]) if load_fp[i] else (RegClass.Gpr, dsts[i])
                    yield TraceEvent(seq, cycles[i], kind, dst, s[:1], addr)
                else:
                    data = store_words[i] if store_words is not None else CONSTANT_STORE_WORD
                    yield TraceEvent(seq, cycles[i], kind, None, s, addr, data)
        emitted += n


def _control_write(policy, seq, n_ctrl, period):
    if policy == "once":
        return seq if seq < n_ctrl else None
    if policy == "periodic":
        return (seq // period) % n_ctrl if seq % period == 0 else None
    return None
