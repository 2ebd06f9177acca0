"""The five replica-placement strategies.

BASELINE serves everything from the origin station. GST replicates at the
requesting ground station. SAT replicates at the ingress satellite and
keeps replicas forever. SAT_TTL purges all satellite stores on a fixed
interval: the orbital period divided by the satellites per plane, the
cadence at which ground stations hand off to the next satellite in the
plane. SAT_REP instead moves every satellite store to the handoff target
on that same interval (plus a slower cross-plane move as the Earth turns
under the constellation), so stations stay connected to a store that
already holds their items.

A strategy is driven per step by the replay engine: first epoch_tick for
the time-driven purge or propagation events, then serve for each request
in canonical order, then commit. Replicas pulled on a miss become visible
at the following step (the replication step runs on the finished step's
requests), so a purge makes the whole step miss rather than only the first
request per item. Stores have no capacity limit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .orbital import ConstellationConfig, SatelliteId, orbital_period
from .topology import RoutePath, gst_node, sat_node


class StrategyKind(Enum):
    BASELINE = "baseline"
    GST = "gst"
    SAT = "sat"
    SAT_TTL = "sat-ttl"
    SAT_REP = "sat-rep"

    @classmethod
    def parse(cls, text: str) -> "StrategyKind":
        key = text.strip().lower().replace("_", "-")
        for kind in cls:
            if kind.value == key:
                return kind
        raise ValueError(f"unknown strategy {text!r}; expected one of "
                         f"{[k.value for k in cls]}")


def compute_ttl(config: ConstellationConfig) -> float:
    """Store purge interval: orbital period / satellites per plane, the
    in-plane handoff cadence for a fixed ground point."""
    return orbital_period(config) / config.sats_per_plane


def compute_propagation_intervals(config: ConstellationConfig) -> tuple[float, float]:
    """(intra, cross) propagation intervals. Intra-plane equals the purge
    interval; cross-plane is one Earth rotation / number of planes."""
    return compute_ttl(config), config.earth_rotation_period_s / config.num_planes


@dataclass(frozen=True)
class EpochSchedule:
    """Purge and propagation intervals in seconds."""

    ttl_s: float
    intra_s: float
    cross_s: float

    def __post_init__(self):
        if min(self.ttl_s, self.intra_s, self.cross_s) <= 0:
            raise ValueError("epoch intervals must be positive")

    @classmethod
    def from_constellation(cls, config: ConstellationConfig) -> "EpochSchedule":
        intra, cross = compute_propagation_intervals(config)
        return cls(ttl_s=intra, intra_s=intra, cross_s=cross)


# Handoff directions, overridable via config. In-plane: slot indices
# increase along the direction of motion, so the trailing neighbor
# (slot - 1) is the next to cover a ground point. Cross-plane: with RAAN
# increasing by plane index, the eastward-rotating Earth carries stations
# toward the next-higher plane (measured empirically; see tests).
DEFAULT_INTRA_STEP = -1
DEFAULT_CROSS_STEP = +1


def handoff_target(
    sat: SatelliteId,
    kind: str,
    config: ConstellationConfig,
    intra_step: int = DEFAULT_INTRA_STEP,
    cross_step: int = DEFAULT_CROSS_STEP,
) -> SatelliteId:
    """The satellite that inherits a ground station's connection at the
    next in-plane ("intra") or cross-plane ("cross") handoff."""
    if not (0 <= sat.plane < config.num_planes and 0 <= sat.slot < config.sats_per_plane):
        raise ValueError(f"satellite id {sat} out of range")
    if kind == "intra":
        return SatelliteId(sat.plane, (sat.slot + intra_step) % config.sats_per_plane)
    if kind == "cross":
        return SatelliteId((sat.plane + cross_step) % config.num_planes, sat.slot)
    raise ValueError(f"handoff kind must be 'intra' or 'cross', got {kind!r}")


@dataclass(frozen=True)
class ServeOutcome:
    """Result of serving one routed request."""

    serving_node: tuple
    hit: bool
    hops: int
    request_bytes: int


@dataclass(frozen=True)
class StoreEvent:
    """A time-driven store mutation: purge or propagation."""

    time: float
    kind: str            # "purge" | "propagate_intra" | "propagate_cross"
    bytes_moved: int


@dataclass(frozen=True)
class ReplicaStore:
    """Read-only view of one node's replica store."""

    node_id: tuple
    items: frozenset
    total_bytes: int


def _epochs_crossed(prev_t: float, t: float, interval: float) -> int:
    """Number of k*interval boundaries (k >= 1) inside (prev_t, t]."""
    eps = 1e-9
    return max(0, math.floor(t / interval + eps) - math.floor(prev_t / interval + eps))


class StrategyState:
    """Mutable replica state for one strategy over one replay.

    Satellite stores are indexed by flat satellite id, ground-station
    stores by station id. Byte totals and the non-empty count are
    maintained incrementally so per-step metrics are O(1)."""

    def __init__(
        self,
        kind: StrategyKind,
        config: ConstellationConfig,
        num_stations: int,
        origin_gst: int,
        item_sizes: np.ndarray,
        schedule: EpochSchedule | None = None,
        intra_step: int = DEFAULT_INTRA_STEP,
        cross_step: int = DEFAULT_CROSS_STEP,
    ):
        self.kind = kind
        self.config = config
        self.num_stations = num_stations
        self.origin_gst = origin_gst
        self.item_sizes = item_sizes
        self.schedule = schedule or EpochSchedule.from_constellation(config)
        n = config.num_satellites
        self.sat_items: list = [None] * n
        self.sat_bytes: list = [0] * n
        self.gst_items: dict = {}
        self.gst_bytes: dict = {}
        self.total_bytes = 0
        self.nonempty_count = 0
        self._last_tick_t = 0.0
        # (is_satellite, node, item_id, size) replications queued until commit
        self._pending: list = []
        s_count = config.sats_per_plane
        p_count = config.num_planes
        flats = np.arange(n)
        planes, slots = flats // s_count, flats % s_count
        self._intra_perm = planes * s_count + (slots + intra_step) % s_count
        self._cross_perm = ((planes + cross_step) % p_count) * s_count + slots
        self.intra_step = intra_step
        self.cross_step = cross_step

    @property
    def pop_eligible_count(self) -> int:
        """Number of nodes the storage average is taken over: all stations
        for GST, all satellites for the satellite strategies (and for
        BASELINE, where storage is identically zero)."""
        if self.kind is StrategyKind.GST:
            return self.num_stations
        return self.config.num_satellites

    # -- time-driven events -------------------------------------------------

    def epoch_tick(self, t: float) -> list[StoreEvent]:
        """Apply purge/propagation events for epoch boundaries crossed
        since the previous tick. BASELINE, GST and SAT never emit events."""
        if t < self._last_tick_t:
            raise ValueError(f"epoch_tick time went backwards: {t} < {self._last_tick_t}")
        if self._pending:
            self.commit()  # stray uncommitted step; replication precedes the tick
        events: list[StoreEvent] = []
        if self.kind is StrategyKind.SAT_TTL:
            if _epochs_crossed(self._last_tick_t, t, self.schedule.ttl_s) > 0:
                events.append(StoreEvent(t, "purge", self._purge_satellites()))
        elif self.kind is StrategyKind.SAT_REP:
            for _ in range(_epochs_crossed(self._last_tick_t, t, self.schedule.intra_s)):
                events.append(
                    StoreEvent(t, "propagate_intra", self._propagate(self._intra_perm))
                )
            for _ in range(_epochs_crossed(self._last_tick_t, t, self.schedule.cross_s)):
                events.append(
                    StoreEvent(t, "propagate_cross", self._propagate(self._cross_perm))
                )
        self._last_tick_t = t
        return events

    def _purge_satellites(self) -> int:
        cleared = sum(self.sat_bytes)
        n = len(self.sat_items)
        self.sat_items = [None] * n
        self.sat_bytes = [0] * n
        self.total_bytes -= cleared
        self.nonempty_count = sum(1 for s in self.gst_items.values() if s)
        return cleared

    def _propagate(self, perm: np.ndarray) -> int:
        """Move every satellite store to perm[src] (move-then-clear); on a
        collision the stores merge by union. Returns bytes moved, which is
        the total store volume since each store crosses one ISL."""
        n = len(self.sat_items)
        moved = sum(self.sat_bytes)
        new_items: list = [None] * n
        new_bytes = [0] * n
        for src, items in enumerate(self.sat_items):
            if not items:
                continue
            dst = int(perm[src])
            if new_items[dst] is None:
                new_items[dst] = items
                new_bytes[dst] = self.sat_bytes[src]
            else:
                # only reachable with a non-bijective override
                merged = new_items[dst] | items
                new_items[dst] = merged
                new_bytes[dst] = int(sum(int(self.item_sizes[i]) for i in merged))
        self.sat_items = new_items
        self.sat_bytes = new_bytes
        self.total_bytes = sum(new_bytes) + sum(self.gst_bytes.values())
        self.nonempty_count = sum(1 for s in new_items if s) + sum(
            1 for s in self.gst_items.values() if s
        )
        return moved

    # -- request serving ----------------------------------------------------

    def serve(
        self,
        client_gst: int,
        ingress_flat: int,
        item_id: int,
        size: int,
        full_edges: int,
    ) -> ServeOutcome:
        """Serve one request routed through ingress_flat with a full path
        of full_edges edges. A miss is served from the origin over the full
        path and queues the item for replication at the strategy's check
        node; the replica becomes visible after commit()."""
        if not 0 <= item_id < len(self.item_sizes):
            raise ValueError(f"item {item_id} not in catalog")
        if client_gst == self.origin_gst:
            # origin-local clients are served on the ground at zero hops
            return ServeOutcome(
                serving_node=gst_node(client_gst),
                hit=self.kind is not StrategyKind.BASELINE,
                hops=0,
                request_bytes=0,
            )
        if self.kind is StrategyKind.BASELINE:
            return ServeOutcome(
                serving_node=gst_node(self.origin_gst),
                hit=False,
                hops=full_edges,
                request_bytes=size * full_edges,
            )
        if self.kind is StrategyKind.GST:
            items = self.gst_items.get(client_gst)
            if items is not None and item_id in items:
                return ServeOutcome(gst_node(client_gst), True, 0, 0)
            self._pending.append((False, client_gst, item_id, size))
            return ServeOutcome(
                gst_node(self.origin_gst), False, full_edges, size * full_edges
            )
        # satellite strategies check the ingress satellite's store
        items = self.sat_items[ingress_flat]
        if items is not None and item_id in items:
            sat = SatelliteId(
                ingress_flat // self.config.sats_per_plane,
                ingress_flat % self.config.sats_per_plane,
            )
            return ServeOutcome(sat_node(sat), True, 1, size)
        self._pending.append((True, ingress_flat, item_id, size))
        return ServeOutcome(
            gst_node(self.origin_gst), False, full_edges, size * full_edges
        )

    def commit(self) -> None:
        """Apply the replications queued by this step's misses. Duplicate
        misses of one (node, item) pair collapse to a single store entry."""
        for is_sat, node, item_id, size in self._pending:
            if is_sat:
                items = self.sat_items[node]
                if items is None or item_id not in items:
                    self._add_sat_item(node, item_id, size)
            else:
                items = self.gst_items.get(node)
                if items is None or item_id not in items:
                    self._add_gst_item(node, item_id, size)
        self._pending.clear()

    def _add_gst_item(self, station: int, item_id: int, size: int) -> None:
        items = self.gst_items.get(station)
        if items is None:
            items = set()
            self.gst_items[station] = items
        if not items:
            self.nonempty_count += 1
        items.add(item_id)
        self.gst_bytes[station] = self.gst_bytes.get(station, 0) + size
        self.total_bytes += size

    def _add_sat_item(self, flat: int, item_id: int, size: int) -> None:
        items = self.sat_items[flat]
        if items is None:
            items = set()
            self.sat_items[flat] = items
        if not items:
            self.nonempty_count += 1
        items.add(item_id)
        self.sat_bytes[flat] += size
        self.total_bytes += size

    # -- introspection ------------------------------------------------------

    def store_views(self) -> list[ReplicaStore]:
        """Snapshot of all non-empty stores, for dumps and tests."""
        out = []
        for flat, items in enumerate(self.sat_items):
            if items:
                sat = SatelliteId(
                    flat // self.config.sats_per_plane, flat % self.config.sats_per_plane
                )
                out.append(ReplicaStore(sat_node(sat), frozenset(items), self.sat_bytes[flat]))
        for station in sorted(self.gst_items):
            items = self.gst_items[station]
            if items:
                out.append(
                    ReplicaStore(gst_node(station), frozenset(items), self.gst_bytes[station])
                )
        return out

    def verify_byte_consistency(self) -> None:
        """Recompute byte totals from the item sets; raises on mismatch.
        Test hook for the store accounting invariant."""
        total = 0
        for flat, items in enumerate(self.sat_items):
            expect = int(sum(int(self.item_sizes[i]) for i in items)) if items else 0
            if expect != self.sat_bytes[flat]:
                raise AssertionError(f"satellite {flat}: {self.sat_bytes[flat]} != {expect}")
            total += expect
        for station, items in self.gst_items.items():
            expect = int(sum(int(self.item_sizes[i]) for i in items))
            if expect != self.gst_bytes.get(station, 0):
                raise AssertionError(f"station {station}: bytes mismatch")
            total += expect
        if total != self.total_bytes:
            raise AssertionError(f"total {self.total_bytes} != recomputed {total}")
        nonempty = sum(1 for s in self.sat_items if s) + sum(
            1 for s in self.gst_items.values() if s
        )
        if nonempty != self.nonempty_count:
            raise AssertionError(
                f"nonempty {self.nonempty_count} != recomputed {nonempty}"
            )

    def store_dump_csv(self) -> str:
        """node_id,item_count,total_bytes for every non-empty store."""
        lines = ["node_id,item_count,total_bytes"]
        for view in self.store_views():
            if view.node_id[0] == "sat":
                node = f"S{view.node_id[1]}-{view.node_id[2]}"
            else:
                node = f"G{view.node_id[1]}"
            lines.append(f"{node},{len(view.items)},{view.total_bytes}")
        return "\n".join(lines) + "\n"


def serve_request(state: StrategyState, request, path: RoutePath) -> ServeOutcome:
    """Path-level serving API for a single request: distills the route into
    (ingress, edge count), serves, and commits immediately. The path's
    ingress satellite must be the client's current assignment."""
    node = path.nodes[1]
    if node[0] != "sat":
        raise ValueError("path has no ingress satellite")
    ingress = SatelliteId(node[1], node[2]).flat(state.config)
    size = int(state.item_sizes[request.item_id])
    outcome = state.serve(
        client_gst=request.client_gst,
        ingress_flat=ingress,
        item_id=request.item_id,
        size=size,
        full_edges=path.num_edges,
    )
    state.commit()
    return outcome
