"""Two-phase simulation engine.

Phase one (generate_traces) routes every request of every step through the
snapshot of the satellite network at that step and emits per-step trace
batches. Phase two (replay / replay_many) feeds a trace stream to one or
more strategies and measures per-step hops, hit ratio, storage, and byte
volumes. Keeping the phases separate lets all strategies replay the same
routed traces, which is what makes their bandwidth numbers comparable.
"""
from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .config import SimulationConfig, resolve_locations_path
from .errors import CoverageGapError, InputError, SimulationError
from .orbital import satellite_positions_array, ground_station_position
from .strategies import EpochSchedule, StrategyKind, StrategyState, _epochs_crossed
from .topology import NetworkSnapshot, isl_edge_pairs, shortest_path_tree, tree_path
from .workload import (
    build_catalog,
    derive_ground_stations,
    generate_request_arrays,
    load_locations,
)

log = logging.getLogger(__name__)


@dataclass
class StepTraces:
    """All routed requests of one timestep, in canonical draw order.

    ingress/full_edges are per request; sat_paths maps each distinct
    ingress satellite (flat index) to the flat-index ISL path toward the
    egress satellite, so full node paths can be reconstructed on demand."""

    t: float
    client: np.ndarray
    item: np.ndarray
    size: np.ndarray
    ingress: np.ndarray
    full_edges: np.ndarray
    egress: int
    origin_gst: int
    sat_paths: dict

    @property
    def num_requests(self) -> int:
        return len(self.client)

    def path_tokens(self, i: int, sats_per_plane: int) -> list:
        """Full node path of request i as trace-file tokens
        (G<station> and S<plane>-<slot>)."""
        sats = self.sat_paths[int(self.ingress[i])]
        return (
            [f"G{int(self.client[i])}"]
            + [f"S{f // sats_per_plane}-{f % sats_per_plane}" for f in sats]
            + [f"G{self.origin_gst}"]
        )


@dataclass
class StepMetrics:
    """Aggregate measurements for one replayed step."""

    time: float
    avg_hops: float
    hit_ratio: float
    avg_storage_bytes: float
    nonempty_pops: int
    request_bytes: int
    propagation_bytes: int


@dataclass
class SummaryReport:
    """Run-level summary of a metrics series."""

    strategy: str
    seed: int
    zipf_exponent: float
    rate: int
    num_steps: int
    warmup_s: float
    epoch_interval_s: float
    mean_hops: float
    mean_hit_ratio: float
    mean_storage_bytes: float
    final_nonempty_pops: int
    max_nonempty_pops: int
    total_request_bytes: int
    total_propagation_bytes: int
    total_bytes: int
    time_to_99_hit_ratio: float | None
    epoch_hop_mean: float | None
    non_epoch_hop_mean: float | None
    epoch_hop_ratio: float | None
    spike_period_steps: int | None
    bandwidth_ratio_vs_baseline: float | None = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


class ScenarioSetup:
    """Everything derived from a SimulationConfig before stepping:
    stations, catalog, origin, per-location geometry."""

    def __init__(self, cfg: SimulationConfig):
        self.cfg = cfg
        locations = load_locations(resolve_locations_path(cfg.scenario.locations))
        self.locations = locations
        stations = derive_ground_stations(locations, cfg.scenario.clients_per_gst)
        self.stations = stations
        self.catalog = build_catalog(
            cfg.scenario.num_items,
            cfg.scenario.size_min_bytes,
            cfg.scenario.size_max_bytes,
            cfg.scenario.zipf_exponent,
            cfg.scenario.seed,
        )
        self.origin_gst = self._find_origin(cfg.scenario.origin_city)
        # per-location arrays; stations of one location share coordinates
        loc_index_of_station = np.empty(len(stations), dtype=np.int64)
        loc_key = {}
        first_station_of_loc = []
        loc_ecef = []
        for st in stations:
            key = (st.city_name, st.lat, st.lon)
            if key not in loc_key:
                loc_key[key] = len(loc_key)
                first_station_of_loc.append(st.id)
                loc_ecef.append(
                    ground_station_position(st.lat, st.lon, cfg.constellation)
                )
            loc_index_of_station[st.id] = loc_key[key]
        self.loc_index_of_station = loc_index_of_station
        self.first_station_of_loc = first_station_of_loc
        self.loc_ecef = np.array(loc_ecef, dtype=float)
        self.loc_ecef_norm = np.linalg.norm(self.loc_ecef, axis=1)
        self.edge_pairs = isl_edge_pairs(cfg.constellation)
        self.schedule = EpochSchedule.from_constellation(cfg.constellation)

    def _find_origin(self, city: str) -> int:
        for st in self.stations:
            if st.city_name == city:
                return st.id
        raise InputError(f"origin city {city!r} not present in the location dataset")

    def warmup_s(self) -> float:
        if self.cfg.warmup_s is not None:
            return self.cfg.warmup_s
        return 2.0 * self.schedule.cross_s

    def assign_locations(self, sat_ecef: np.ndarray, t: float) -> np.ndarray:
        """Closest visible satellite per location, vectorized over the
        (L, S) distance matrix. First argmin = smallest flat id on ties."""
        cfg = self.cfg
        diff = self.loc_ecef[:, None, :] - sat_ecef[None, :, :]
        dist = np.sqrt((diff * diff).sum(axis=2))
        # sin(elevation) = (los . up) / (|los| |up|) with los = sat - station
        los_dot_up = (sat_ecef[None, :, :] * self.loc_ecef[:, None, :]).sum(axis=2) - (
            self.loc_ecef_norm**2
        )[:, None]
        sin_el = los_dot_up / (self.loc_ecef_norm[:, None] * dist)
        visible = sin_el >= math.sin(math.radians(cfg.topology.min_elevation_deg))
        covered = visible.any(axis=1)
        if not covered.all():
            loc = int(np.argmin(covered))
            st = self.stations[self.first_station_of_loc[loc]]
            raise CoverageGapError(st.id, st.city_name, t)
        masked = np.where(visible, dist, np.inf)
        return masked.argmin(axis=1)


def generate_traces(cfg: SimulationConfig, setup: ScenarioSetup | None = None) -> Iterator[StepTraces]:
    """Phase one: per step, rebuild the snapshot, assign stations, route
    all requests to the origin, and yield the step's traces."""
    setup = setup or ScenarioSetup(cfg)
    scen = cfg.scenario
    con = cfg.constellation
    origin_loc = int(setup.loc_index_of_station[setup.origin_gst])
    num_stations = len(setup.stations)
    for k in range(scen.num_steps):
        t = k * scen.step_s
        sat_ecef = satellite_positions_array(con, t)
        assign_loc = setup.assign_locations(sat_ecef, t)
        egress = int(assign_loc[origin_loc])
        clients, items = generate_request_arrays(
            num_stations, setup.catalog, scen.rate, t, scen.seed
        )
        ingress = assign_loc[setup.loc_index_of_station[clients]]
        # shortest-path tree from the egress; path per distinct ingress
        snapshot = _snapshot_for(setup, con, t, sat_ecef)
        dist, parent = shortest_path_tree(snapshot, egress)
        sat_paths: dict = {}
        full_edges = np.empty(len(clients), dtype=np.int32)
        for flat in np.unique(ingress):
            flat = int(flat)
            if flat == egress:
                sat_paths[flat] = (flat,)
            else:
                sat_paths[flat] = tuple(reversed(tree_path(parent, egress, flat)))
        for i, flat in enumerate(ingress):
            full_edges[i] = len(sat_paths[int(flat)]) + 1
        yield StepTraces(
            t=t,
            client=clients,
            item=items,
            size=setup.catalog.sizes[items],
            ingress=ingress.astype(np.int32),
            full_edges=full_edges,
            egress=egress,
            origin_gst=setup.origin_gst,
            sat_paths=sat_paths,
        )


def _snapshot_for(setup: ScenarioSetup, con, t: float, sat_ecef: np.ndarray) -> NetworkSnapshot:
    pairs = setup.edge_pairs
    diffs = sat_ecef[pairs[:, 0]] - sat_ecef[pairs[:, 1]]
    lengths = np.sqrt((diffs * diffs).sum(axis=1))
    return NetworkSnapshot(
        time=t, config=con, sat_ecef=sat_ecef, edge_pairs=pairs, edge_lengths=lengths
    )


def _new_state(cfg: SimulationConfig, setup: ScenarioSetup, kind: StrategyKind) -> StrategyState:
    return StrategyState(
        kind=kind,
        config=cfg.constellation,
        num_stations=len(setup.stations),
        origin_gst=setup.origin_gst,
        item_sizes=setup.catalog.sizes,
        schedule=setup.schedule,
        intra_step=cfg.topology.intra_handoff_step,
        cross_step=cfg.topology.cross_handoff_step,
    )


def replay_many(
    cfg: SimulationConfig,
    kinds: list,
    traces: Iterable[StepTraces],
    setup: ScenarioSetup | None = None,
    states_out: dict | None = None,
) -> dict:
    """Phase two for several strategies over one trace stream in a single
    pass. Returns {kind: (metrics list, SummaryReport)}. When states_out is
    given it receives the final StrategyState per kind (for audits)."""
    setup = setup or ScenarioSetup(cfg)
    states = {kind: _new_state(cfg, setup, kind) for kind in kinds}
    if states_out is not None:
        states_out.update(states)
    series: dict = {kind: [] for kind in kinds}
    expected_rate = cfg.scenario.rate
    prev_t: float | None = None
    step_count = 0
    for step in traces:
        if prev_t is not None and step.t <= prev_t:
            raise SimulationError(
                f"trace stream out of order: step {step.t} after {prev_t}"
            )
        prev_t = step.t
        clients = step.client.tolist()
        items = step.item.tolist()
        sizes = step.size.tolist()
        ingresses = step.ingress.tolist()
        edges = step.full_edges.tolist()
        n = len(clients)
        if n != expected_rate:
            log.debug("step %.0f carries %d requests (rate %d)", step.t, n, expected_rate)
        for kind in kinds:
            state = states[kind]
            events = state.epoch_tick(step.t)
            prop_bytes = sum(
                e.bytes_moved for e in events if e.kind.startswith("propagate")
            )
            hits = 0
            hop_sum = 0
            req_bytes = 0
            serve = state.serve
            for i in range(n):
                out = serve(clients[i], ingresses[i], items[i], sizes[i], edges[i])
                hits += out.hit
                hop_sum += out.hops
                req_bytes += out.request_bytes
            state.commit()
            misses = n - hits
            if misses + hits != n:  # accounting guard, cannot fail
                raise SimulationError("request accounting broke")
            record = StepMetrics(
                time=step.t,
                avg_hops=hop_sum / n if n else 0.0,
                hit_ratio=hits / n if n else 1.0,
                avg_storage_bytes=state.total_bytes / state.pop_eligible_count,
                nonempty_pops=state.nonempty_count,
                request_bytes=req_bytes,
                propagation_bytes=prop_bytes,
            )
            if step_count % cfg.metrics_stride == 0:
                series[kind].append(record)
        step_count += 1
    out = {}
    for kind in kinds:
        report = summarize(
            series[kind],
            strategy=kind,
            cfg=cfg,
            schedule=setup.schedule,
            warmup_s=setup.warmup_s(),
        )
        out[kind] = (series[kind], report)
    return out


def replay(
    traces: Iterable[StepTraces],
    kind: StrategyKind,
    cfg: SimulationConfig,
    setup: ScenarioSetup | None = None,
) -> tuple:
    """Phase two for one strategy: (metrics series, summary)."""
    return replay_many(cfg, [kind], traces, setup=setup)[kind]


def epoch_steps_mask(times: list, interval: float, step_s: float) -> list:
    """Which recorded steps contain an epoch boundary, using the same
    crossing rule as the strategy state."""
    out = []
    for t in times:
        prev = max(0.0, t - step_s)
        out.append(_epochs_crossed(prev, t, interval) > 0 and t > 0)
    return out


def detect_spike_period(values: list) -> int | None:
    """Dominant spacing between spikes (values > 2x median), or None."""
    if len(values) < 3:
        return None
    med = float(np.median(values))
    threshold = 2.0 * med if med > 0 else 0.0
    spikes = [i for i, v in enumerate(values) if v > threshold]
    if len(spikes) < 2:
        return None
    gaps = Counter(b - a for a, b in zip(spikes, spikes[1:]))
    period, _ = max(gaps.items(), key=lambda kv: (kv[1], -kv[0]))
    return period


def time_to_hit_ratio(
    metrics: list, threshold: float = 0.99, window: int = 30
) -> float | None:
    """Earliest time from which the hit ratio consistently holds the
    threshold: the first step whose `window`-step rolling mean reaches the
    threshold and whose mean over the whole remaining run also holds it.
    The windowed form tolerates per-step sampling noise around the
    threshold. None when the run never gets there."""
    n = len(metrics)
    if n == 0:
        return None
    ratios = np.array([m.hit_ratio for m in metrics])
    suffix_mean = np.cumsum(ratios[::-1])[::-1] / np.arange(n, 0, -1)
    for i in range(n):
        end = min(n, i + window)
        if ratios[i:end].mean() >= threshold and suffix_mean[i] >= threshold:
            return metrics[i].time
    return None


def summarize(
    metrics: list,
    strategy: StrategyKind,
    cfg: SimulationConfig,
    schedule: EpochSchedule,
    warmup_s: float,
    baseline: list | None = None,
) -> SummaryReport:
    """Aggregate a metrics series: warm-up-excluded means, epoch spike
    statistics, totals, and optionally a bandwidth ratio against a
    baseline series of the same length."""
    if not metrics:
        raise SimulationError("cannot summarize an empty metrics series")
    times = [m.time for m in metrics]
    tail = [m for m in metrics if m.time >= warmup_s]
    if not tail:
        tail = metrics[-1:]
        log.warning("warm-up window %.0fs covers the whole run; using final step", warmup_s)
    mask = epoch_steps_mask(times, schedule.ttl_s, cfg.scenario.step_s)
    epoch_hops = [m.avg_hops for m, e in zip(metrics, mask) if e and m.time >= warmup_s]
    plain_hops = [m.avg_hops for m, e in zip(metrics, mask) if not e and m.time >= warmup_s]
    epoch_mean = float(np.mean(epoch_hops)) if epoch_hops else None
    plain_mean = float(np.mean(plain_hops)) if plain_hops else None
    ratio = None
    if epoch_mean is not None and plain_mean is not None and plain_mean > 0:
        ratio = epoch_mean / plain_mean
    total_req = int(sum(m.request_bytes for m in metrics))
    total_prop = int(sum(m.propagation_bytes for m in metrics))
    bw_ratio = None
    if baseline is not None:
        if len(baseline) != len(metrics):
            raise SimulationError(
                f"baseline series length {len(baseline)} != {len(metrics)}"
            )
        base_total = sum(m.request_bytes + m.propagation_bytes for m in baseline)
        if base_total > 0:
            bw_ratio = (total_req + total_prop) / base_total
    return SummaryReport(
        strategy=strategy.value,
        seed=cfg.scenario.seed,
        zipf_exponent=cfg.scenario.zipf_exponent,
        rate=cfg.scenario.rate,
        num_steps=len(metrics),
        warmup_s=warmup_s,
        epoch_interval_s=schedule.ttl_s,
        mean_hops=float(np.mean([m.avg_hops for m in tail])),
        mean_hit_ratio=float(np.mean([m.hit_ratio for m in tail])),
        mean_storage_bytes=float(np.mean([m.avg_storage_bytes for m in tail])),
        final_nonempty_pops=metrics[-1].nonempty_pops,
        max_nonempty_pops=max(m.nonempty_pops for m in metrics),
        total_request_bytes=total_req,
        total_propagation_bytes=total_prop,
        total_bytes=total_req + total_prop,
        time_to_99_hit_ratio=time_to_hit_ratio(metrics),
        epoch_hop_mean=epoch_mean,
        non_epoch_hop_mean=plain_mean,
        epoch_hop_ratio=ratio,
        spike_period_steps=detect_spike_period([m.avg_hops for m in metrics]),
        bandwidth_ratio_vs_baseline=bw_ratio,
    )
