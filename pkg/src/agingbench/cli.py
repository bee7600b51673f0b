"""``aging-bench`` command line: gen, run, compare, netsim.

Exit codes: 0 ok, 1 configuration or compare mismatch, 2 trace or netlist
input error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, ExperimentConfig
from .netsim import NetlistError, load_blif, probability_run
from .sim import CompareError, compare, dump_report, run
from .trace import TraceError, WorkloadProfile, gen_synthetic, write_trace

log = logging.getLogger("agingbench")

EXIT_CONFIG = 1
EXIT_INPUT = 2
EXIT_INTERNAL = 3


def _count(text: str) -> int:
    # accepts 1e6 style lengths
    v = float(text)
    if v != int(v) or v < 0:
        raise argparse.ArgumentTypeError(f"not a non-negative integer: {text}")
    return int(v)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aging-bench", description="Static-stress observation and mitigation simulator.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a synthetic trace")
    g.add_argument("--profile", required=True, help="int-only, fp-mixed, small-footprint or large-footprint")
    g.add_argument("--len", dest="length", type=_count, default=1_000_000)
    g.add_argument("--seed", type=int, default=1)
    g.add_argument("--footprint", type=_count, help="data footprint in bytes")
    g.add_argument("--fp-fraction", type=float)
    g.add_argument("--mem-fraction", type=float)
    g.add_argument("--control-reg-writes", choices=["none", "once", "periodic"])
    g.add_argument("--store-data", choices=["prbs", "constant"])
    g.add_argument("--out", default="-", help="output file, '-' for stdout")

    r = sub.add_parser("run", help="simulate a config and write the report")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int, help="override the config seed")
    r.add_argument("--out", help="report path (overrides outputs.report)")
    r.add_argument("--histograms", help="directory for histogram CSVs")

    c = sub.add_parser("compare", help="percentage deltas between two reports")
    c.add_argument("a")
    c.add_argument("b")
    c.add_argument("--out", help="write the comparison JSON here")

    n = sub.add_parser("netsim", help="signal probabilities of a BLIF netlist")
    n.add_argument("--blif", required=True)
    n.add_argument("--source", choices=["lfsr", "exhaustive", "constant"], default="lfsr")
    n.add_argument("--vectors", type=_count, default=1_000_000)
    n.add_argument("--seed", type=int, default=1)
    n.add_argument("--force", action="append", default=[], metavar="NET",
                   help="drive NET from the PRBS source (repeatable)")
    n.add_argument("--bins", type=int, default=10)
    n.add_argument("--out", default=".", help="output directory for nets.csv and histogram.csv")
    return p


def cmd_gen(args) -> int:
    extra = {k: v for k, v in {
        "footprint_bytes": args.footprint,
        "fp_fraction": args.fp_fraction,
        "mem_fraction": args.mem_fraction,
        "control_reg_writes": args.control_reg_writes,
        "store_data": args.store_data,
    }.items() if v is not None}
    try:
        profile = WorkloadProfile(args.profile, args.length, args.seed, **extra)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    if args.out == "-":
        write_trace(gen_synthetic(profile), sys.stdout)
    else:
        with open(args.out, "w", encoding="utf-8") as f:
            n = write_trace(gen_synthetic(profile), f)
        log.info("wrote %d events to %s", n, args.out)
    return 0


def cmd_run(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.seed is not None:
        d = cfg.to_dict()
        d["seed"] = args.seed
        if "profile" in d["trace"]:
            d["trace"]["seed"] = args.seed
        cfg = ExperimentConfig.from_dict(d)
    if args.out:
        cfg.outputs["report"] = args.out
    if args.histograms:
        cfg.outputs["histograms"] = args.histograms
    report = run(cfg)
    if not cfg.outputs.get("report"):
        sys.stdout.write(dump_report(report))
    log.info("total cycles %d, static units %s", report["cycles"]["total"], report["static_units"])
    return 0


def _load_report(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"report not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON: {e}") from None


def cmd_compare(args) -> int:
    out = compare(_load_report(args.a), _load_report(args.b))
    text = json.dumps(out, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_netsim(args) -> int:
    try:
        netlist = load_blif(args.blif)
    except FileNotFoundError:
        raise NetlistError(f"netlist not found: {args.blif}") from None
    try:
        res = probability_run(netlist, args.source, args.vectors, seed=args.seed,
                              forced_injection_nets=args.force, bins=args.bins)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    res.write_net_csv(out / "nets.csv")
    res.write_histogram_csv(out / "histogram.csv")
    log.info("%d nets, %d outside [0.3, 0.7]", len(res.cells), len(res.out_of_band()))
    return 0


COMMANDS = {"gen": cmd_gen, "run": cmd_run, "compare": cmd_compare, "netsim": cmd_netsim}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, CompareError) as e:
        log.error("%s", e)
        return EXIT_CONFIG
    except (TraceError, NetlistError, OSError) as e:
        log.error("%s", e)
        return EXIT_INPUT
    except Exception:
        log.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
