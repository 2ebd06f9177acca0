"""Time-varying network graph: +Grid inter-satellite links, ground-station
assignment, and distance-weighted shortest-path routing.

Every satellite links to its in-plane successor and predecessor and to the
same slot in both adjacent planes (degree 4). Ground stations attach to
the closest satellite above a minimum elevation. Edge weights are
Euclidean distances at the snapshot time; the hop metric is counted on the
resulting paths.
"""
from __future__ import annotations

import heapq
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import CoverageGapError, RoutingError
from .orbital import (
    ConstellationConfig,
    SatelliteId,
    ground_station_position,
    satellite_from_flat,
    satellite_positions_array,
)

DEFAULT_MIN_ELEVATION_DEG = 25.0

# Path nodes are tagged tuples: ("gst", station_id) or ("sat", plane, slot).
GstNode = tuple
SatNode = tuple


def gst_node(station_id: int) -> tuple:
    return ("gst", station_id)


def sat_node(sat: SatelliteId) -> tuple:
    return ("sat", sat.plane, sat.slot)


class DegenerateTopologyWarning(UserWarning):
    """Constellation too small for a proper +Grid; duplicate or self edges
    were collapsed."""


@dataclass(frozen=True)
class GroundStation:
    """A fixed surface terminal aggregating a number of clients."""

    id: int
    city_name: str
    lat: float
    lon: float
    num_clients: int

    def __post_init__(self):
        if self.num_clients < 1:
            raise ValueError(f"station {self.id}: num_clients must be >= 1")
        if not -90.0 <= self.lat <= 90.0 or not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"station {self.id}: invalid coordinates")


def isl_edge_pairs(config: ConstellationConfig) -> np.ndarray:
    """Structural +Grid edge list as an (E, 2) array of flat satellite
    indices with a < b. Time-invariant; lengths vary with the positions.

    Self edges (single plane or single slot) are dropped and duplicates
    (two planes / two slots) collapse to simple edges, with a warning."""
    p_count, s_count = config.num_planes, config.sats_per_plane
    degenerate = p_count < 3 or s_count < 3
    pairs = set()
    for p in range(p_count):
        for s in range(s_count):
            a = p * s_count + s
            neighbors = (
                p * s_count + (s + 1) % s_count,      # in-plane successor
                p * s_count + (s - 1) % s_count,      # in-plane predecessor
                ((p + 1) % p_count) * s_count + s,    # next plane, same slot
                ((p - 1) % p_count) * s_count + s,    # previous plane, same slot
            )
            for b in neighbors:
                if a != b:
                    pairs.add((min(a, b), max(a, b)))
    if degenerate:
        warnings.warn(
            f"{p_count}x{s_count} constellation is too small for a simple "
            "degree-4 +Grid; collapsed duplicate/self edges",
            DegenerateTopologyWarning,
            stacklevel=2,
        )
    out = np.array(sorted(pairs), dtype=np.int32)
    return out.reshape(-1, 2)


@dataclass
class NetworkSnapshot:
    """The network at one instant: satellite positions, ISL edges with
    lengths, and ground-station assignments."""

    time: float
    config: ConstellationConfig
    sat_ecef: np.ndarray                  # (S, 3) meters
    edge_pairs: np.ndarray                # (E, 2) flat indices
    edge_lengths: np.ndarray              # (E,) meters
    # station id -> (flat satellite index, link length in meters)
    gsl_assignments: dict = field(default_factory=dict)
    _adjacency: list = field(default=None, repr=False)

    @property
    def num_satellites(self) -> int:
        return self.sat_ecef.shape[0]

    def isl_edges(self) -> list:
        """Edges as (SatelliteId, SatelliteId, length_m) tuples."""
        cfg = self.config
        return [
            (satellite_from_flat(cfg, int(a)), satellite_from_flat(cfg, int(b)), float(l))
            for (a, b), l in zip(self.edge_pairs, self.edge_lengths)
        ]

    def adjacency(self) -> list:
        """Per-node list of (neighbor flat index, edge length)."""
        if self._adjacency is None:
            adj = [[] for _ in range(self.num_satellites)]
            for (a, b), l in zip(self.edge_pairs, self.edge_lengths):
                adj[int(a)].append((int(b), float(l)))
                adj[int(b)].append((int(a), float(l)))
            for lst in adj:
                lst.sort()
            self._adjacency = adj
        return self._adjacency

    def assignment(self, station_id: int) -> SatelliteId:
        flat, _ = self.gsl_assignments[station_id]
        return satellite_from_flat(self.config, flat)


def build_isl_graph(config: ConstellationConfig, t: float) -> NetworkSnapshot:
    """Snapshot with the ISL part populated (no station assignments)."""
    pos = satellite_positions_array(config, t)
    pairs = isl_edge_pairs(config)
    diffs = pos[pairs[:, 0]] - pos[pairs[:, 1]]
    lengths = np.sqrt((diffs * diffs).sum(axis=1))
    return NetworkSnapshot(
        time=t, config=config, sat_ecef=pos, edge_pairs=pairs, edge_lengths=lengths
    )


def visible_satellite_distances(
    station_ecef: np.ndarray,
    sat_ecef: np.ndarray,
    min_elevation_deg: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Distances from one surface point to all satellites, with a
    visibility mask for the elevation threshold. Vectorized helper shared
    by assignment code."""
    los = sat_ecef - station_ecef[None, :]
    dist = np.sqrt((los * los).sum(axis=1))
    gst_norm = math.sqrt(float(station_ecef @ station_ecef))
    sin_el = (los @ station_ecef) / (gst_norm * dist)
    visible = sin_el >= math.sin(math.radians(min_elevation_deg))
    return dist, visible


def assign_ground_station(
    gst: GroundStation,
    config: ConstellationConfig,
    t: float,
    min_elevation_deg: float = DEFAULT_MIN_ELEVATION_DEG,
    snapshot: NetworkSnapshot | None = None,
) -> SatelliteId:
    """The closest satellite at or above the minimum elevation angle. Ties
    break toward the smallest (plane, slot). Raises CoverageGapError when
    nothing is visible."""
    if snapshot is None:
        snapshot = build_isl_graph(config, t)
    station = ground_station_position(gst.lat, gst.lon, config)
    station_arr = np.array(station, dtype=float)
    dist, visible = visible_satellite_distances(
        station_arr, snapshot.sat_ecef, min_elevation_deg
    )
    if not visible.any():
        raise CoverageGapError(gst.id, gst.city_name, t)
    masked = np.where(visible, dist, np.inf)
    flat = int(np.argmin(masked))  # first minimum = smallest flat index
    return satellite_from_flat(config, flat)


def attach_stations(
    snapshot: NetworkSnapshot,
    stations: list,
    min_elevation_deg: float = DEFAULT_MIN_ELEVATION_DEG,
) -> NetworkSnapshot:
    """Fill gsl_assignments for the given stations, caching per distinct
    coordinate (co-located stations share one computation)."""
    cfg = snapshot.config
    by_coord: dict = {}
    for st in stations:
        key = (st.lat, st.lon)
        if key not in by_coord:
            station_arr = np.array(
                ground_station_position(st.lat, st.lon, cfg), dtype=float
            )
            dist, visible = visible_satellite_distances(
                station_arr, snapshot.sat_ecef, min_elevation_deg
            )
            if not visible.any():
                raise CoverageGapError(st.id, st.city_name, snapshot.time)
            masked = np.where(visible, dist, np.inf)
            flat = int(np.argmin(masked))
            by_coord[key] = (flat, float(masked[flat]))
        snapshot.gsl_assignments[st.id] = by_coord[key]
    return snapshot


@dataclass(frozen=True)
class RoutePath:
    """A routed request path: client station, ingress satellite, zero or
    more intermediate satellites, egress satellite, origin station."""

    nodes: tuple
    total_length: float

    @property
    def num_edges(self) -> int:
        return len(self.nodes) - 1

    @property
    def isl_edge_count(self) -> int:
        # nodes = [gst, sat, ..., sat, gst]; satellite count - 1 ISL edges
        return len(self.nodes) - 3


def shortest_path_tree(
    snapshot: NetworkSnapshot, src_flat: int
) -> tuple[np.ndarray, np.ndarray]:
    """Dijkstra over the ISL graph from one satellite.

    Returns (dist, parent) arrays over flat indices; parent[src] == -1.
    Deterministic: the frontier orders by (distance, flat index), so equal
    distances settle in index order."""
    n = snapshot.num_satellites
    adj = snapshot.adjacency()
    dist = np.full(n, np.inf)
    parent = np.full(n, -2, dtype=np.int64)
    dist[src_flat] = 0.0
    parent[src_flat] = -1
    heap = [(0.0, src_flat)]
    done = np.zeros(n, dtype=bool)
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for v, w in adj[u]:
            nd = d + w
            if nd < dist[v]:
                dist[v] = nd
                parent[v] = u
                heapq.heappush(heap, (nd, v))
    if not done.all():
        raise RoutingError(
            f"ISL graph disconnected at t={snapshot.time}: "
            f"{int((~done).sum())} unreachable satellites"
        )
    return dist, parent


def tree_path(parent: np.ndarray, src_flat: int, dst_flat: int) -> list:
    """Flat-index path src -> dst from a shortest-path tree rooted at src."""
    path = []
    node = dst_flat
    while node != -1:
        path.append(int(node))
        node = int(parent[node])
    path.reverse()
    if path[0] != src_flat:
        raise RoutingError(f"no tree path from {src_flat} to {dst_flat}")
    return path


def route(
    client: GroundStation, origin: GroundStation, snapshot: NetworkSnapshot
) -> RoutePath:
    """Route a request from a client station to the origin station over the
    satellite network: up to the client's satellite, across the shortest
    ISL path (by summed length), down from the origin's satellite."""
    try:
        ingress, up_len = snapshot.gsl_assignments[client.id]
        egress, down_len = snapshot.gsl_assignments[origin.id]
    except KeyError as exc:
        raise RoutingError(f"station {exc} has no assignment in snapshot") from exc
    cfg = snapshot.config
    if ingress == egress:
        nodes = (gst_node(client.id), sat_node(satellite_from_flat(cfg, ingress)),
                 gst_node(origin.id))
        return RoutePath(nodes=nodes, total_length=up_len + down_len)
    dist, parent = shortest_path_tree(snapshot, egress)
    flats = tree_path(parent, egress, ingress)
    flats.reverse()  # ingress -> egress
    nodes = (
        gst_node(client.id),
        *(sat_node(satellite_from_flat(cfg, f)) for f in flats),
        gst_node(origin.id),
    )
    return RoutePath(nodes=nodes, total_length=up_len + float(dist[ingress]) + down_len)


def hop_count(path: RoutePath, serving_node: tuple) -> int:
    """Edges traversed from the client station to the serving node: 0 when
    served at the client station itself, 1 at the ingress satellite, the
    full edge count at the origin."""
    try:
        return path.nodes.index(serving_node)
    except ValueError:
        raise ValueError(f"serving node {serving_node} is not on the path") from None


def snapshot_edges_csv(snapshot: NetworkSnapshot) -> str:
    """ISL edge dump: src_plane,src_slot,dst_plane,dst_slot,length_m."""
    cfg = snapshot.config
    lines = ["src_plane,src_slot,dst_plane,dst_slot,length_m"]
    for (a, b), l in zip(snapshot.edge_pairs, snapshot.edge_lengths):
        sa = satellite_from_flat(cfg, int(a))
        sb = satellite_from_flat(cfg, int(b))
        lines.append(f"{sa.plane},{sa.slot},{sb.plane},{sb.slot},{l:.3f}")
    return "\n".join(lines) + "\n"
