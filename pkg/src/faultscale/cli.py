"""``faultscale`` command line."""
from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import _kernels
from .analysis import (ERROR, merge_report_rows, read_report_csv, rows_to_csv, run_matrix, summarize_rows,
                       summary_to_csv, write_outputs)
from .catalog import CatalogError, load_catalog
from .config import ConfigError, env_default_seed, load_config
from .faults import FAULT_KINDS, FaultKind, FaultScenario, apply_fault
from .metrics import TraceError, Window, export_trace, max_aggregate, read_trace, write_trace
from .workload import FAULT_PHASE_S, NORMAL_PHASE_S, WorkloadProfile, generate_baseline

log = logging.getLogger("faultscale")


def _emit(text: str, output: str | None) -> None:
    if output is None or output == "-":
        sys.stdout.write(text)
    else:
        Path(output).write_text(text, encoding="utf-8")


def _parse_params(items) -> dict:
    params = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"expected key=value, got {item!r}")
        params[key.strip()] = float(value)
    return params


def cmd_run(args) -> int:
    overrides = {
        "faults": args.faults, "policies": args.policies, "slos": args.slos, "instances": args.instances,
        "seeds": args.seeds, "catalog": args.catalog, "sizing_rule": args.sizing,
        "current_replicas": args.replicas, "hours_per_month": args.hours,
    }
    cfg = load_config(args.config, overrides)
    if args.out:
        cfg = replace(cfg, out_dir=args.out)
    t0 = time.perf_counter()
    reports = run_matrix(cfg, jobs=max(1, args.jobs))
    elapsed = time.perf_counter() - t0
    files = write_outputs(reports, Path(cfg.out_dir), cfg.calibration(),
                          write_json=cfg.write_json, write_plots=cfg.write_plots)
    failed = [r for r in reports if r.classification == ERROR]
    log.info("%d scenarios in %.2fs (%s kernels)", len(reports), elapsed, _kernels.BACKEND)
    for path in files:
        print(path)
    if failed:
        print(f"{len(failed)} scenario(s) recorded errors", file=sys.stderr)
        for r in failed[:5]:
            print(f"  {r.fault} {r.instance} {r.slo} {r.policy} seed={r.seed}: {r.note}", file=sys.stderr)
        if args.strict:
            return 1
    return 0


def cmd_trace_gen(args) -> int:
    profile = WorkloadProfile(seed=args.seed if args.seed is not None else env_default_seed(),
                              duration=args.duration, volatility=args.volatility)
    trace = generate_baseline(profile)
    if args.output in (None, "-"):
        sys.stdout.write(export_trace(trace))
    else:
        write_trace(trace, args.output)
    return 0


def cmd_trace_import(args) -> int:
    trace = read_trace(args.input)
    util = max_aggregate(trace)
    print(f"{args.input}: {len(trace)} samples, interval {trace.sample_interval:g}s, "
          f"t=[{trace.start_offset:g}, {trace.end:g})s, latency={'yes' if trace.latency is not None else 'no'}")
    print("max " + " ".join(f"{k}={v:.4f}" for k, v in zip(("cpu", "memory", "disk_io", "network"),
                                                            util.to_array())))
    if args.output:
        write_trace(trace, args.output)
    return 0


def cmd_trace_apply(args) -> int:
    kind = FaultKind.parse(args.kind)
    trace = read_trace(args.input)
    start = args.start if args.start is not None else NORMAL_PHASE_S
    scenario = FaultScenario(kind, Window(start, args.duration), _parse_params(args.param),
                             seed=args.seed if args.seed is not None else env_default_seed())
    out = apply_fault(trace, scenario, args.burstable)
    if args.output in (None, "-"):
        sys.stdout.write(export_trace(out))
    else:
        write_trace(out, args.output)
    return 0


def cmd_catalog_list(args) -> int:
    catalog = load_catalog(args.catalog)
    rows = catalog.filter(args.family)
    print(f"{'family':<8}{'size':<9}{'GHz':>5}{'vCPU':>6}{'mem_GB':>8}{'net_Gbps':>10}{'disk_MBps':>11}{'usd_h':>8}")
    for e in rows:
        disk = "-" if e.specs.disk_io is None else f"{e.specs.disk_io:g}"
        print(f"{e.family:<8}{e.size:<9}{e.cpu_perf_ghz:>5g}{e.specs.cpu:>6g}{e.specs.memory:>8g}"
              f"{e.specs.network:>10g}{disk:>11}{e.hourly_cost:>8.3f}")
    return 0


def cmd_catalog_validate(args) -> int:
    catalog = load_catalog(args.path)
    print(f"{args.path}: ok ({len(catalog)} instance types)")
    return 0


def cmd_report_merge(args) -> int:
    tables = [read_report_csv(Path(p).read_text(encoding="utf-8")) for p in args.inputs]
    merged = merge_report_rows(tables)
    _emit(rows_to_csv(merged), args.output)
    if args.summary:
        Path(args.summary).write_text(summary_to_csv(summarize_rows(merged)), encoding="utf-8")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="faultscale",
                                     description="Fault-distorted autoscaling decision and cost simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the experiment matrix and write reports")
    run.add_argument("--config", default="default", help="TOML config path, or 'default'")
    run.add_argument("--faults", help="comma list of fault kinds (syn,udp,vol,rtr,disk,app)")
    run.add_argument("--policies", help="comma list: vertical,horizontal")
    run.add_argument("--slos", help="comma list, e.g. slo85,slo50 or 0.7")
    run.add_argument("--instances", help="comma list, e.g. m5.large,c5.xlarge")
    run.add_argument("--seeds", help="comma list of integer seeds")
    run.add_argument("--catalog", help="catalog CSV path or 'builtin'")
    run.add_argument("--sizing", choices=("literal", "headroom"), help="vertical sizing formula reading")
    run.add_argument("--replicas", type=int, help="current replica count for horizontal scaling")
    run.add_argument("--hours", type=float, help="billing hours per month")
    run.add_argument("--out", help="output directory")
    run.add_argument("--jobs", type=int, default=1)
    run.add_argument("--strict", action="store_true", help="nonzero exit if any scenario errored")
    run.set_defaults(func=cmd_run)

    trace = sub.add_parser("trace", help="generate, import or distort traces")
    tsub = trace.add_subparsers(dest="trace_command", required=True)
    gen = tsub.add_parser("gen", help="write a baseline trace")
    gen.add_argument("--seed", type=int)
    gen.add_argument("--duration", type=float, default=900.0)
    gen.add_argument("--volatility", type=float, default=0.05)
    gen.add_argument("-o", "--output")
    gen.set_defaults(func=cmd_trace_gen)
    imp = tsub.add_parser("import", help="validate a trace file and print its maxima")
    imp.add_argument("input")
    imp.add_argument("-o", "--output", help="write the normalized trace")
    imp.set_defaults(func=cmd_trace_import)
    app = tsub.add_parser("apply-fault", help="apply a fault to a trace")
    app.add_argument("input")
    app.add_argument("--kind", required=True, help=f"one of {', '.join(k.value for k in FAULT_KINDS)}")
    app.add_argument("--start", type=float, help="window start in seconds (default 750)")
    app.add_argument("--duration", type=float, default=FAULT_PHASE_S)
    app.add_argument("--param", action="append", metavar="KEY=VALUE")
    app.add_argument("--burstable", action="store_true")
    app.add_argument("--seed", type=int)
    app.add_argument("-o", "--output")
    app.set_defaults(func=cmd_trace_apply)

    cat = sub.add_parser("catalog", help="inspect instance catalogs")
    csub = cat.add_subparsers(dest="catalog_command", required=True)
    lst = csub.add_parser("list")
    lst.add_argument("--family")
    lst.add_argument("--catalog", default="builtin")
    lst.set_defaults(func=cmd_catalog_list)
    val = csub.add_parser("validate")
    val.add_argument("path")
    val.set_defaults(func=cmd_catalog_validate)

    rep = sub.add_parser("report", help="combine report files")
    rsub = rep.add_subparsers(dest="report_command", required=True)
    merge = rsub.add_parser("merge", help="merge report.csv files (e.g. one per seed)")
    merge.add_argument("inputs", nargs="+")
    merge.add_argument("-o", "--output")
    merge.add_argument("--summary", help="write mean/min/max over seeds to this path")
    merge.set_defaults(func=cmd_report_merge)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, CatalogError, TraceError, ValueError, KeyError, FileNotFoundError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        if isinstance(exc, FileNotFoundError) and exc.filename:
            msg = f"file not found: {exc.filename}"
        print(f"faultscale: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
