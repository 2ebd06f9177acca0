"""Synthetic web workload: city datasets, ground-station derivation,
content catalog, and per-second request batches.

All randomness flows from one root seed. The catalog and each step's
requests use independent, explicitly keyed streams so that generation for
distinct timesteps is order-independent and reproducible.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, InputError, ParseError
from .topology import GroundStation

# Stream keys mixed into the root seed so the catalog and the per-step
# request draws never share an RNG stream.
_CATALOG_STREAM = 0x5EED_CA7A
_REQUEST_STREAM = 0x5EED_4E90


@dataclass(frozen=True)
class LocationRecord:
    """One populated place from a location dataset."""

    name: str
    lat: float
    lon: float
    population: int


def load_locations(path) -> list[LocationRecord]:
    """Parse a location CSV with header name,lat,lon,population.

    Rejects malformed rows and non-positive populations with the offending
    line number; an empty file (no data rows) is an error."""
    records: list[LocationRecord] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise InputError(f"{path}: empty location file")
        if [c.strip().lower() for c in header] != ["name", "lat", "lon", "population"]:
            raise ParseError(path, 1, f"expected header name,lat,lon,population, got {header}")
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 4:
                raise ParseError(path, line_no, f"expected 4 fields, got {len(row)}")
            name = row[0].strip()
            try:
                lat = float(row[1])
                lon = float(row[2])
                population = int(row[3])
            except ValueError as exc:
                raise ParseError(path, line_no, f"unparseable numeric field: {exc}") from None
            if population < 1:
                raise ParseError(path, line_no, f"population must be >= 1, got {population}")
            if not -90.0 <= lat <= 90.0 or not -180.0 <= lon <= 180.0:
                raise ParseError(path, line_no, f"invalid coordinates ({lat}, {lon})")
            records.append(LocationRecord(name, lat, lon, population))
    if not records:
        raise InputError(f"{path}: no location rows")
    return records


def derive_ground_stations(
    locations: list[LocationRecord], clients_per_gst: int
) -> list[GroundStation]:
    """Expand each location into ceil(population / clients_per_gst)
    co-located stations. Station ids are dense from 0 in dataset order;
    the last station of a location carries the population remainder."""
    if clients_per_gst < 1:
        raise ConfigError(f"clients_per_gst must be >= 1, got {clients_per_gst}")
    if not locations:
        raise InputError("empty location list")
    stations: list[GroundStation] = []
    next_id = 0
    for loc in locations:
        count = math.ceil(loc.population / clients_per_gst)
        for k in range(count):
            remaining = loc.population - k * clients_per_gst
            stations.append(
                GroundStation(
                    id=next_id,
                    city_name=loc.name,
                    lat=loc.lat,
                    lon=loc.lon,
                    num_clients=min(clients_per_gst, remaining),
                )
            )
            next_id += 1
    return stations


class ContentItem(NamedTuple):
    item_id: int
    size_bytes: int
    popularity_rank: int


class ContentCatalog:
    """The universe of replicable items: log-uniform sizes and a Zipf
    popularity law over a random rank permutation.

    rank_of_item[i] is item i's popularity rank; item_of_rank is its
    inverse. Request probability of the rank-r item is
    (r+1)^-exponent / sum over ranks."""

    def __init__(
        self,
        sizes: np.ndarray,
        rank_of_item: np.ndarray,
        zipf_exponent: float,
        seed: int,
    ):
        self.sizes = sizes
        self.rank_of_item = rank_of_item
        self.item_of_rank = np.argsort(rank_of_item)
        self.zipf_exponent = zipf_exponent
        self.seed = seed
        ranks = np.arange(1, len(sizes) + 1, dtype=float)
        weights = ranks ** (-zipf_exponent)
        self.rank_pmf = weights / weights.sum()
        self._rank_cdf = np.cumsum(self.rank_pmf)
        self._rank_cdf[-1] = 1.0

    def __len__(self) -> int:
        return len(self.sizes)

    def item(self, item_id: int) -> ContentItem:
        return ContentItem(item_id, int(self.sizes[item_id]), int(self.rank_of_item[item_id]))

    def items(self) -> list[ContentItem]:
        return [self.item(i) for i in range(len(self))]

    def item_probability(self, item_id: int) -> float:
        return float(self.rank_pmf[self.rank_of_item[item_id]])

    def sample_item_ids(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw n item ids by popularity (inverse-CDF over ranks)."""
        u = rng.random(n)
        ranks = np.searchsorted(self._rank_cdf, u, side="right")
        return self.item_of_rank[ranks]

    def to_csv(self) -> str:
        lines = ["item_id,size_bytes,rank"]
        lines += [
            f"{i},{int(self.sizes[i])},{int(self.rank_of_item[i])}"
            for i in range(len(self))
        ]
        return "\n".join(lines) + "\n"


def build_catalog(
    num_items: int,
    size_min: int,
    size_max: int,
    zipf_exponent: float,
    seed: int,
) -> ContentCatalog:
    """Deterministic catalog: sizes log-uniform in [size_min, size_max]
    bytes, popularity ranks a seed-derived permutation of the item ids."""
    if num_items < 1:
        raise ConfigError(f"num_items must be >= 1, got {num_items}")
    if not 0 < size_min <= size_max:
        raise ConfigError(f"invalid size bounds [{size_min}, {size_max}]")
    if zipf_exponent < 0:
        raise ConfigError(f"zipf exponent must be >= 0, got {zipf_exponent}")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, _CATALOG_STREAM])))
    log_sizes = rng.uniform(math.log(size_min), math.log(size_max), num_items)
    sizes = np.rint(np.exp(log_sizes)).astype(np.int64)
    sizes = np.clip(sizes, size_min, size_max)
    rank_of_item = rng.permutation(num_items)
    return ContentCatalog(sizes, rank_of_item, zipf_exponent, seed)


class Request(NamedTuple):
    time: float
    client_gst: int
    item_id: int


def step_rng(seed: int, t: float) -> np.random.Generator:
    """Request RNG for one timestep, independent of all other steps."""
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([seed, _REQUEST_STREAM, int(t)]))
    )


def generate_request_arrays(
    num_stations: int,
    catalog: ContentCatalog,
    rate: int,
    t: float,
    seed: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized request batch for one step: (client_ids, item_ids),
    each of length `rate`. Clients are uniform over stations, items follow
    the catalog's popularity law."""
    if rate < 1:
        raise ConfigError(f"request rate must be >= 1, got {rate}")
    if num_stations < 1:
        raise InputError("need at least one ground station")
    rng = step_rng(seed, t)
    clients = rng.integers(0, num_stations, size=rate, dtype=np.int64)
    items = catalog.sample_item_ids(rng, rate)
    return clients, items


def generate_requests(
    stations: list[GroundStation],
    catalog: ContentCatalog,
    rate: int,
    t: float,
    seed: int,
) -> list[Request]:
    """Request batch for one step as Request records, in draw order."""
    clients, items = generate_request_arrays(len(stations), catalog, rate, t, seed)
    return [Request(t, int(c), int(i)) for c, i in zip(clients, items)]
