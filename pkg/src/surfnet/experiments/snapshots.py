"""Binary container for recorded snapshot sequences.

Layout (all integers little-endian):

    8 bytes   magic "SURFNET1"
    u32       format version (1)
    u32       k
    u32       d
    d * u32   widths n_1..n_d
    u32       n
    u32       snapshot count (T + 1)
    u64       cadence (training steps between snapshots)
    blocks    count * parameter blocks, each the flat layout
              V, W_1, b_1, ..., W_d, b_d as row-major float64

A JSON sidecar at <path>.json carries free-form metadata (seed, trainer
configuration, true snapshot indices when they are not uniform).
Writing then reading reproduces every parameter bit for bit.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..flow import ParameterFlow
from ..network import NetworkDims, NetworkParams

MAGIC = b"SURFNET1"
VERSION = 1


def _flat_size(dims: NetworkDims) -> int:
    size = dims.n * dims.widths[-1]
    prev = dims.k
    for ni in dims.widths:
        size += ni * prev + ni
        prev = ni
    return size


def write_snapshot_file(path: str | Path, sequence: list[NetworkParams],
                        cadence: int, metadata: dict | None = None) -> None:
    if not sequence:
        raise ValueError("cannot write an empty snapshot sequence")
    dims = sequence[0].dims
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<II", dims.k, dims.d))
        fh.write(struct.pack(f"<{dims.d}I", *dims.widths))
        fh.write(struct.pack("<I", dims.n))
        fh.write(struct.pack("<I", len(sequence)))
        fh.write(struct.pack("<Q", cadence))
        for params in sequence:
            if params.dims != dims:
                raise ValueError("snapshots in one file must share dimensions")
            fh.write(params.flat().astype("<f8").tobytes())
    sidecar = dict(metadata or {})
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")


def read_snapshot_file(path: str | Path):
    """Returns (flow, cadence, metadata) for a written snapshot file."""
    path = Path(path)
    raw = path.read_bytes()
    if raw[:8] != MAGIC:
        raise ValueError(f"{path} is not a snapshot file (bad magic)")
    pos = 8

    def take(fmt):
        nonlocal pos
        size = struct.calcsize(fmt)
        vals = struct.unpack_from(fmt, raw, pos)
        pos += size
        return vals

    (version,) = take("<I")
    if version != VERSION:
        raise ValueError(f"unsupported snapshot file version {version}")
    k, d = take("<II")
    widths = take(f"<{d}I")
    (n,) = take("<I")
    (count,) = take("<I")
    (cadence,) = take("<Q")
    dims = NetworkDims(k=k, widths=widths, n=n)
    block = _flat_size(dims)
    sequence = []
    for _ in range(count):
        flat = np.frombuffer(raw, dtype="<f8", count=block, offset=pos).copy()
        pos += block * 8
        sequence.append(NetworkParams.from_flat(dims, flat))
    sidecar_path = Path(str(path) + ".json")
    metadata = json.loads(sidecar_path.read_text()) if sidecar_path.exists() else {}
    indices = metadata.get("indices")
    if indices is None:
        indices = [cadence * i for i in range(count)] if cadence > 0 else list(range(count))
    flow = ParameterFlow.snapshots(sequence, list(indices))
    return flow, int(cadence), metadata
