"""Experiment configuration (JSON) with Table 1 defaults."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

from .cache import DEFAULT_MEMORY_LATENCY, DEFAULT_SWAP_PERIOD, BASELINE_CACHES, BASELINE_TLBS, CacheGeometry
from .regfile import DEFAULT_ROTATION_PERIOD
from .trace import REG_COUNTS, Kind, RegClass, WorkloadProfile
from .units import DEFAULT_INJECTION_PERIOD, BASELINE_UNITS


class ConfigError(ValueError):
    pass


def _default_units():
    return {k.name: {"count": c, "latency": lat} for k, (c, lat) in BASELINE_UNITS.items()}


def _default_caches():
    return {n: {"size_bytes": g.size_bytes, "ways": g.ways, "latency": g.access_latency_cycles}
            for n, g in BASELINE_CACHES.items()}


def _default_tlbs():
    return {n: {"entries": e, "ways": w} for n, (e, w) in BASELINE_TLBS.items()}


def _default_regfile():
    return {c.name: n for c, n in REG_COUNTS.items()}


def _default_mitigation():
    return {
        "injection": False,
        "injection_period": DEFAULT_INJECTION_PERIOD,
        "rotation": False,
        "rotation_period": DEFAULT_ROTATION_PERIOD,
        "swap_shift": False,
        "swap_period": DEFAULT_SWAP_PERIOD,
    }


@dataclass
class ExperimentConfig:
    trace: dict = field(default_factory=lambda: {"profile": "IntOnly", "length": 100_000, "seed": 1})
    dispatch_width: int = 4
    units: dict = field(default_factory=_default_units)
    caches: dict = field(default_factory=_default_caches)
    tlbs: dict = field(default_factory=_default_tlbs)
    regfile: dict = field(default_factory=_default_regfile)
    mitigation: dict = field(default_factory=_default_mitigation)
    memory_latency: int = DEFAULT_MEMORY_LATENCY
    seed: int = 1
    tracked_way: int | None = 0
    track_bits: bool = True
    code_footprint: int = 8192
    histogram_bins: int = 10
    outputs: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        cfg = cls()
        for key in ("units", "caches", "tlbs", "regfile", "mitigation"):
            if key in d:
                _merge(getattr(cfg, key), d[key], key)
        for key in known - {"units", "caches", "tlbs", "regfile", "mitigation"}:
            if key in d:
                setattr(cfg, key, copy.deepcopy(d[key]))
        if base_dir is not None and "file" in cfg.trace:
            p = Path(cfg.trace["file"])
            if not p.is_absolute():
                cfg.trace["file"] = str(base_dir / p)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        p = Path(path)
        try:
            d = json.loads(p.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {p}") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"{p}: invalid JSON: {e}") from None
        return cls.from_dict(d, p.parent)

    def to_dict(self) -> dict:
        return {k: copy.deepcopy(getattr(self, k)) for k in self.__dataclass_fields__}

    def validate(self) -> None:
        try:
            self.workload()
            self.unit_mix()
            self.geometries()
            self.tlb_params()
            self.reg_sizes()
        except (ValueError, TypeError, KeyError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(str(e)) from None
        m = self.mitigation
        for key in ("injection_period", "rotation_period", "swap_period"):
            if not isinstance(m[key], int) or m[key] < 1:
                raise ConfigError(f"mitigation.{key} must be an integer >= 1")
        for key in ("injection", "rotation"):
            if not isinstance(m[key], bool):
                raise ConfigError(f"mitigation.{key} must be a boolean")
        sw = m["swap_shift"]
        if not isinstance(sw, bool) and not (
                isinstance(sw, dict) and set(sw) <= set(BASELINE_CACHES)
                and all(isinstance(v, bool) for v in sw.values())):
            raise ConfigError("mitigation.swap_shift must be a boolean or a {level: bool} map")
        if not 1 <= self.dispatch_width <= 64:
            raise ConfigError("dispatch_width must be in [1, 64]")
        if not isinstance(self.memory_latency, int) or self.memory_latency < 0:
            raise ConfigError("memory_latency must be a non-negative integer")
        if self.tracked_way is not None and (not isinstance(self.tracked_way, int) or self.tracked_way < 0):
            raise ConfigError("tracked_way must be null or a non-negative integer")
        if self.code_footprint < 64:
            raise ConfigError("code_footprint must be at least one line")
        if self.histogram_bins < 2:
            raise ConfigError("histogram_bins must be >= 2")
        if set(self.outputs) - {"report", "histograms"}:
            raise ConfigError("outputs accepts only 'report' and 'histograms'")

    def workload(self) -> WorkloadProfile | None:
        t = self.trace
        if not isinstance(t, dict):
            raise ConfigError("trace must be an object")
        if "file" in t:
            if set(t) != {"file"}:
                raise ConfigError("a file trace takes no other keys")
            return None
        if "profile" not in t:
            raise ConfigError("trace needs 'file' or 'profile'")
        params = {k: v for k, v in t.items() if k != "profile"}
        params.setdefault("length", 100_000)
        params.setdefault("seed", self.seed)
        return WorkloadProfile(name=t["profile"], **params)

    def unit_mix(self) -> dict:
        mix = {}
        for name, v in self.units.items():
            mix[Kind[name]] = (int(v["count"]), int(v["latency"]))
        return mix

    def geometries(self) -> dict:
        return {n: CacheGeometry(v["size_bytes"], v["ways"], v["latency"]) for n, v in self.caches.items()}

    def tlb_params(self) -> dict:
        return {n: (v["entries"], v["ways"]) for n, v in self.tlbs.items()}

    def reg_sizes(self) -> dict:
        out = {}
        for name, n in self.regfile.items():
            if not isinstance(n, int) or n < 1:
                raise ConfigError(f"regfile.{name} must be a positive integer")
            out[RegClass[name]] = n
        return out

    def swap_enables(self) -> dict:
        sw = self.mitigation["swap_shift"]
        if isinstance(sw, bool):
            return {n: sw for n in self.caches}
        return {n: sw.get(n, False) for n in self.caches}


def _merge(target: dict, update, section: str) -> None:
    if not isinstance(update, dict):
        raise ConfigError(f"{section} must be an object")
    for k, v in update.items():
        if k not in target:
            raise ConfigError(f"unknown key {section}.{k}")
        if isinstance(target[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(f"{section}.{k} must be an object")
            extra = set(v) - set(target[k])
            if extra:
                raise ConfigError(f"unknown keys {section}.{k}.{sorted(extra)}")
            target[k].update(v)
        else:
            target[k] = v
