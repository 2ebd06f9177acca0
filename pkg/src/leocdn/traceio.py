"""Persistence formats for traces, metrics, and summaries.

Trace CSV: a `# seed=<seed>` provenance line, then
`t,req,client_gst,ingress_plane,ingress_slot,egress_plane,egress_slot,origin_gst,item,size_bytes,path`
where `path` joins node tokens (G<station>, S<plane>-<slot>) with
semicolons.

Trace binary (magic LCDN1): little-endian; after the magic come u16
version, u64 seed, u32 sats_per_plane, then per step a header
(f64 t, u32 nreq, u32 origin, u32 egress, u16 npaths), npaths path records
(u32 ingress, u16 len, len x u32 flat ids), and nreq request records
(u32 client, u32 item, u32 size, u32 ingress). Much smaller and faster
than CSV for full-scale runs.

All writers go through a write-temp-then-rename helper so failed runs
leave no partial output files.
"""
from __future__ import annotations

import contextlib
import json
import os
import struct
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .engine import StepMetrics, StepTraces, SummaryReport
from .errors import InputError

TRACE_CSV_HEADER = (
    "t,req,client_gst,ingress_plane,ingress_slot,egress_plane,egress_slot,"
    "origin_gst,item,size_bytes,path"
)
METRICS_CSV_HEADER = (
    "t,avg_hops,hit_ratio,avg_storage_bytes,nonempty_pops,request_bytes,"
    "propagation_bytes"
)
BIN_MAGIC = b"LCDN1"
BIN_VERSION = 1


@contextlib.contextmanager
def atomic_write(path, mode: str = "w"):
    """Write to <path>.tmp and rename into place on success."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    kwargs = {} if "b" in mode else {"newline": "", "encoding": "utf-8"}
    fh = open(tmp, mode, **kwargs)
    try:
        yield fh
        fh.close()
        os.replace(tmp, path)
    except BaseException:
        fh.close()
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


# -- trace CSV ----------------------------------------------------------------


def write_trace_csv(path, steps: Iterable[StepTraces], seed: int, sats_per_plane: int) -> int:
    """Stream a trace to CSV; returns the number of requests written."""
    count = 0
    with atomic_write(path) as fh:
        fh.write(f"# seed={seed}\n")
        fh.write(TRACE_CSV_HEADER + "\n")
        for step in steps:
            ep, es = divmod(step.egress, sats_per_plane)
            clients = step.client
            items = step.item
            sizes = step.size
            ingress = step.ingress
            path_str = {
                flat: ";".join(
                    [f"S{f // sats_per_plane}-{f % sats_per_plane}" for f in sats]
                )
                for flat, sats in step.sat_paths.items()
            }
            for i in range(step.num_requests):
                flat = int(ingress[i])
                ip, isl = divmod(flat, sats_per_plane)
                fh.write(
                    f"{step.t:g},{i},{int(clients[i])},{ip},{isl},{ep},{es},"
                    f"{step.origin_gst},{int(items[i])},{int(sizes[i])},"
                    f"G{int(clients[i])};{path_str[flat]};G{step.origin_gst}\n"
                )
                count += 1
    return count


def read_trace_csv(path, sats_per_plane: int) -> Iterator[StepTraces]:
    """Stream StepTraces batches back from a trace CSV."""
    with open(path, newline="", encoding="utf-8") as fh:
        first = fh.readline()
        if not first.startswith("# seed="):
            raise InputError(f"{path}: missing provenance line")
        header = fh.readline().strip()
        if header != TRACE_CSV_HEADER:
            raise InputError(f"{path}: unexpected trace header {header!r}")
        batch: list = []
        cur_t: float | None = None
        meta: dict = {}

        def flush() -> StepTraces:
            clients = np.array([r[0] for r in batch], dtype=np.int64)
            items = np.array([r[1] for r in batch], dtype=np.int64)
            sizes = np.array([r[2] for r in batch], dtype=np.int64)
            ingress = np.array([r[3] for r in batch], dtype=np.int32)
            edges = np.array([r[4] for r in batch], dtype=np.int32)
            return StepTraces(
                t=cur_t,
                client=clients,
                item=items,
                size=sizes,
                ingress=ingress,
                full_edges=edges,
                egress=meta["egress"],
                origin_gst=meta["origin"],
                sat_paths=meta["paths"],
            )

        for line in fh:
            parts = line.rstrip("\n").split(",")
            if len(parts) != 11:
                raise InputError(f"{path}: malformed trace row {line!r}")
            t = float(parts[0])
            if cur_t is None or t != cur_t:
                if batch:
                    yield flush()
                batch = []
                cur_t = t
                meta = {"paths": {}}
            client = int(parts[2])
            ingress_flat = int(parts[3]) * sats_per_plane + int(parts[4])
            meta["egress"] = int(parts[5]) * sats_per_plane + int(parts[6])
            meta["origin"] = int(parts[7])
            tokens = parts[10].split(";")
            sats = tuple(
                int(tok[1:].split("-")[0]) * sats_per_plane + int(tok.split("-")[1])
                for tok in tokens[1:-1]
            )
            meta["paths"].setdefault(ingress_flat, sats)
            batch.append((client, int(parts[8]), int(parts[9]), ingress_flat, len(tokens) - 1))
        if batch:
            yield flush()


# -- trace binary (LCDN1) ------------------------------------------------------

_STEP_HEAD = struct.Struct("<dIIIH")
_PATH_HEAD = struct.Struct("<IH")
_REQ = struct.Struct("<IIII")


def write_trace_bin(path, steps: Iterable[StepTraces], seed: int, sats_per_plane: int) -> int:
    count = 0
    with atomic_write(path, "wb") as fh:
        fh.write(BIN_MAGIC)
        fh.write(struct.pack("<HQI", BIN_VERSION, seed, sats_per_plane))
        for step in steps:
            n = step.num_requests
            fh.write(
                _STEP_HEAD.pack(step.t, n, step.origin_gst, step.egress, len(step.sat_paths))
            )
            for flat, sats in sorted(step.sat_paths.items()):
                fh.write(_PATH_HEAD.pack(flat, len(sats)))
                fh.write(struct.pack(f"<{len(sats)}I", *sats))
            clients = step.client
            items = step.item
            sizes = step.size
            ingress = step.ingress
            for i in range(n):
                fh.write(
                    _REQ.pack(int(clients[i]), int(items[i]), int(sizes[i]), int(ingress[i]))
                )
            count += n
    return count


def read_trace_bin(path) -> Iterator[StepTraces]:
    with open(path, "rb") as fh:
        magic = fh.read(5)
        if magic != BIN_MAGIC:
            raise InputError(f"{path}: not an LCDN1 trace file")
        version, _seed, _spp = struct.unpack("<HQI", fh.read(14))
        if version != BIN_VERSION:
            raise InputError(f"{path}: unsupported trace version {version}")
        while True:
            head = fh.read(_STEP_HEAD.size)
            if not head:
                return
            t, n, origin, egress, npaths = _STEP_HEAD.unpack(head)
            paths = {}
            for _ in range(npaths):
                flat, plen = _PATH_HEAD.unpack(fh.read(_PATH_HEAD.size))
                sats = struct.unpack(f"<{plen}I", fh.read(4 * plen))
                paths[flat] = tuple(sats)
            clients = np.empty(n, dtype=np.int64)
            items = np.empty(n, dtype=np.int64)
            sizes = np.empty(n, dtype=np.int64)
            ingress = np.empty(n, dtype=np.int32)
            edges = np.empty(n, dtype=np.int32)
            raw = fh.read(_REQ.size * n)
            for i in range(n):
                c, it, sz, ing = _REQ.unpack_from(raw, i * _REQ.size)
                clients[i] = c
                items[i] = it
                sizes[i] = sz
                ingress[i] = ing
                edges[i] = len(paths[ing]) + 1
            yield StepTraces(
                t=t, client=clients, item=items, size=sizes, ingress=ingress,
                full_edges=edges, egress=egress, origin_gst=origin, sat_paths=paths,
            )


def read_traces(path, sats_per_plane: int) -> Iterator[StepTraces]:
    """Dispatch on the file's magic: LCDN1 binary or trace CSV."""
    with open(path, "rb") as fh:
        magic = fh.read(5)
    if magic == BIN_MAGIC:
        return read_trace_bin(path)
    return read_trace_csv(path, sats_per_plane)


# -- metrics CSV and summary JSON ----------------------------------------------


def write_metrics_csv(path, metrics: list, seed: int) -> None:
    with atomic_write(path) as fh:
        fh.write(f"# seed={seed}\n")
        fh.write(METRICS_CSV_HEADER + "\n")
        for m in metrics:
            fh.write(
                f"{m.time:g},{m.avg_hops!r},{m.hit_ratio!r},{m.avg_storage_bytes!r},"
                f"{m.nonempty_pops},{m.request_bytes},{m.propagation_bytes}\n"
            )


def read_metrics_csv(path) -> list:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        first = fh.readline()
        if not first.startswith("# seed="):
            raise InputError(f"{path}: missing provenance line")
        header = fh.readline().strip()
        if header != METRICS_CSV_HEADER:
            raise InputError(f"{path}: unexpected metrics header {header!r}")
        for line in fh:
            p = line.rstrip("\n").split(",")
            if len(p) != 7:
                raise InputError(f"{path}: malformed metrics row {line!r}")
            out.append(
                StepMetrics(
                    time=float(p[0]),
                    avg_hops=float(p[1]),
                    hit_ratio=float(p[2]),
                    avg_storage_bytes=float(p[3]),
                    nonempty_pops=int(p[4]),
                    request_bytes=int(p[5]),
                    propagation_bytes=int(p[6]),
                )
            )
    return out


def write_summary_json(path, report: SummaryReport, seed: int) -> None:
    doc = {"seed": seed, **report.to_dict()}
    with atomic_write(path) as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
