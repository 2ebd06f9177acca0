"""Command-line entry point.

One subcommand per pipeline phase:

  constellation  dump ISL snapshot edge CSVs for chosen times
  workload       emit the derived stations and content catalog
  trace          run phase one and persist the request trace
  replay         replay a trace file under one strategy
  report         summarize metrics files into plot-ready CSVs + JSON

Exit codes: 1 configuration error, 2 input/output error, 3 simulation
error. Output files are written atomically (temp + rename). The
LEOCDN_LOG environment variable sets the log level.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .config import parse_config
from .engine import ScenarioSetup, generate_traces, replay, summarize
from .errors import ConfigError, InputError, LeoCdnError, SimulationError
from .strategies import EpochSchedule, StrategyKind
from .topology import build_isl_graph, snapshot_edges_csv
from .traceio import (
    atomic_write,
    read_metrics_csv,
    read_traces,
    write_metrics_csv,
    write_summary_json,
    write_trace_bin,
    write_trace_csv,
)

log = logging.getLogger("leocdn")

EXIT_CONFIG = 1
EXIT_IO = 2
EXIT_SIMULATION = 3


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML config file")
    p.add_argument("--preset", help="named scenario preset (us, switzerland)")
    p.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="config override, e.g. scenario.rate=100 (repeatable)",
    )
    p.add_argument("--seed", type=int, help="override scenario.seed")
    p.add_argument("--out", default=".", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leocdn",
        description="CDN replica placement simulator for LEO constellations",
    )
    parser.add_argument("--version", action="version", version=f"leocdn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constellation", help="dump ISL snapshot edges")
    _add_common(p)
    p.add_argument(
        "--at",
        action="append",
        type=float,
        default=None,
        metavar="T",
        help="snapshot time in seconds (repeatable, default 0)",
    )

    p = sub.add_parser("workload", help="emit stations and catalog")
    _add_common(p)

    p = sub.add_parser("trace", help="generate the request trace")
    _add_common(p)
    p.add_argument("--format", choices=("csv", "bin"), default="csv")

    p = sub.add_parser("replay", help="replay a trace under a strategy")
    _add_common(p)
    p.add_argument("--traces", required=True, help="trace file from the trace phase")
    p.add_argument("--strategy", help="baseline|gst|sat|sat-ttl|sat-rep")

    p = sub.add_parser("report", help="summarize metrics files")
    _add_common(p)
    p.add_argument(
        "--metrics",
        action="append",
        required=True,
        metavar="NAME=FILE",
        help="labeled metrics CSV, e.g. sat=metrics_sat.csv (repeatable)",
    )
    return parser


def _load_config(args):
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"scenario.seed={args.seed}")
    return parse_config(path=args.config, preset=args.preset, overrides=tuple(overrides))


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_constellation(args) -> int:
    cfg = _load_config(args)
    out = _outdir(args)
    times = args.at if args.at else [0.0]
    for t in times:
        snap = build_isl_graph(cfg.constellation, t)
        path = out / f"snapshot_t{t:g}.csv"
        with atomic_write(path) as fh:
            fh.write(f"# seed={cfg.scenario.seed}\n")
            fh.write(snapshot_edges_csv(snap))
        log.info("wrote %s (%d edges)", path, len(snap.edge_pairs))
    return 0


def cmd_workload(args) -> int:
    cfg = _load_config(args)
    out = _outdir(args)
    setup = ScenarioSetup(cfg)
    stations_path = out / "stations.csv"
    with atomic_write(stations_path) as fh:
        fh.write(f"# seed={cfg.scenario.seed}\n")
        fh.write("station_id,city_name,lat,lon,num_clients\n")
        for st in setup.stations:
            name = st.city_name.replace('"', "").replace(",", " ")
            fh.write(f"{st.id},{name},{st.lat},{st.lon},{st.num_clients}\n")
    catalog_path = out / "catalog.csv"
    with atomic_write(catalog_path) as fh:
        fh.write(f"# seed={cfg.scenario.seed}\n")
        fh.write(setup.catalog.to_csv())
    log.info(
        "wrote %s (%d stations) and %s (%d items)",
        stations_path, len(setup.stations), catalog_path, len(setup.catalog),
    )
    return 0


def cmd_trace(args) -> int:
    cfg = _load_config(args)
    out = _outdir(args)
    setup = ScenarioSetup(cfg)
    steps = generate_traces(cfg, setup)
    spp = cfg.constellation.sats_per_plane
    if args.format == "bin":
        path = out / "traces.lcdn"
        n = write_trace_bin(path, steps, cfg.scenario.seed, spp)
    else:
        path = out / "traces.csv"
        n = write_trace_csv(path, steps, cfg.scenario.seed, spp)
    log.info("wrote %s (%d requests)", path, n)
    return 0


def cmd_replay(args) -> int:
    cfg = _load_config(args)
    if args.strategy:
        try:
            kind = StrategyKind.parse(args.strategy)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    else:
        kind = cfg.strategy
    out = _outdir(args)
    if not Path(args.traces).exists():
        raise InputError(f"trace file not found: {args.traces}")
    setup = ScenarioSetup(cfg)
    steps = read_traces(args.traces, cfg.constellation.sats_per_plane)
    metrics, report = replay(steps, kind, cfg, setup=setup)
    tag = kind.value.replace("-", "_")
    write_metrics_csv(out / f"metrics_{tag}.csv", metrics, cfg.scenario.seed)
    write_summary_json(out / f"summary_{tag}.json", report, cfg.scenario.seed)
    log.info("replayed %d steps under %s", len(metrics), kind.value)
    return 0


def cmd_report(args) -> int:
    cfg = _load_config(args)
    out = _outdir(args)
    series = {}
    for spec in args.metrics:
        if "=" not in spec:
            raise ConfigError(f"--metrics expects NAME=FILE, got {spec!r}")
        name, path = spec.split("=", 1)
        if not Path(path).exists():
            raise InputError(f"metrics file not found: {path}")
        series[name] = read_metrics_csv(path)
    lengths = {len(v) for v in series.values()}
    if len(lengths) != 1:
        raise SimulationError(f"metrics series lengths differ: {sorted(lengths)}")
    names = list(series)
    fields = [
        ("avg_hops", lambda m: repr(m.avg_hops)),
        ("hit_ratio", lambda m: repr(m.hit_ratio)),
        ("avg_storage_bytes", lambda m: repr(m.avg_storage_bytes)),
        ("nonempty_pops", lambda m: str(m.nonempty_pops)),
        ("request_bytes", lambda m: str(m.request_bytes)),
        ("propagation_bytes", lambda m: str(m.propagation_bytes)),
    ]
    times = [m.time for m in series[names[0]]]
    for field_name, getter in fields:
        path = out / f"report_{field_name}.csv"
        with atomic_write(path) as fh:
            fh.write(f"# seed={cfg.scenario.seed}\n")
            fh.write("t," + ",".join(names) + "\n")
            for i, t in enumerate(times):
                row = ",".join(getter(series[n][i]) for n in names)
                fh.write(f"{t:g},{row}\n")
    # summary JSON per series, with bandwidth ratio against the first one
    schedule = EpochSchedule.from_constellation(cfg.constellation)
    setup_warmup = (
        cfg.warmup_s if cfg.warmup_s is not None else 2.0 * schedule.cross_s
    )
    baseline = series[names[0]]
    for name in names:
        try:
            kind = StrategyKind.parse(name)
        except ValueError:
            kind = cfg.strategy
        report = summarize(
            series[name],
            strategy=kind,
            cfg=cfg,
            schedule=schedule,
            warmup_s=setup_warmup,
            baseline=baseline,
        )
        report.strategy = name
        write_summary_json(out / f"report_summary_{name}.json", report, cfg.scenario.seed)
    log.info("wrote %d report files to %s", len(fields) + len(names), out)
    return 0


_COMMANDS = {
    "constellation": cmd_constellation,
    "workload": cmd_workload,
    "trace": cmd_trace,
    "replay": cmd_replay,
    "report": cmd_report,
}


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("LEOCDN_LOG", "INFO").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except (InputError, OSError) as exc:
        log.error("input/output error: %s", exc)
        return EXIT_IO
    except (SimulationError, LeoCdnError) as exc:
        log.error("simulation error: %s", exc)
        return EXIT_SIMULATION


if __name__ == "__main__":
    sys.exit(main())
