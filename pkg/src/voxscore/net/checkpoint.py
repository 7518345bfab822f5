"""Self-describing parameter checkpoints.

Layout: magic line, an 8-byte little-endian length, a canonical JSON header
(format version, architecture descriptor, optimizer step, array manifest),
then the raw little-endian float32 array bytes in manifest order. Identical
state serializes to identical bytes.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .model import AdamState, NetworkArchitecture, NetworkParams

MAGIC = b"VOXNET1\n"
FORMAT_VERSION = 1
ARRAY_DTYPE = np.dtype("<f4")


class CheckpointError(ValueError):
    pass


def _array_entries(params: NetworkParams):
    for group, source in (
        ("layers", params.layers),
        ("adam_m", params.adam.m),
        ("adam_v", params.adam.v),
    ):
        for i, p in enumerate(source):
            for key in ("w", "b"):
                yield f"{group}.{i}.{key}", p[key]


def save_checkpoint(arch: NetworkArchitecture, params: NetworkParams) -> bytes:
    manifest = []
    blobs = []
    for name, arr in _array_entries(params):
        data = np.ascontiguousarray(arr, dtype=ARRAY_DTYPE)
        manifest.append({"name": name, "shape": list(arr.shape)})
        blobs.append(data.tobytes())
    header = {
        "format_version": FORMAT_VERSION,
        "architecture": arch.to_descriptor(),
        "adam_step": params.adam.step,
        "dtype": ARRAY_DTYPE.str,
        "arrays": manifest,
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("ascii")
    return MAGIC + struct.pack("<Q", len(head)) + head + b"".join(blobs)


def load_checkpoint(data: bytes) -> tuple[NetworkArchitecture, NetworkParams]:
    if not data.startswith(MAGIC):
        raise CheckpointError("not a checkpoint file")
    offset = len(MAGIC)
    if len(data) < offset + 8:
        raise CheckpointError("checkpoint truncated in header length")
    (head_len,) = struct.unpack_from("<Q", data, offset)
    offset += 8
    try:
        header = json.loads(data[offset : offset + head_len])
    except ValueError as exc:
        raise CheckpointError(f"bad checkpoint header: {exc}") from None
    offset += head_len
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {header.get('format_version')!r}"
        )
    arch = NetworkArchitecture.from_descriptor(header["architecture"])
    dtype = np.dtype(header["dtype"])

    arrays = {}
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        size = int(np.prod(shape)) * dtype.itemsize if shape else dtype.itemsize
        count = int(np.prod(shape)) if shape else 1
        raw = data[offset : offset + count * dtype.itemsize]
        if len(raw) != count * dtype.itemsize:
            raise CheckpointError(f"checkpoint truncated in array {entry['name']}")
        arrays[entry["name"]] = np.frombuffer(raw, dtype=dtype).reshape(shape).copy()
        offset += count * dtype.itemsize
    if offset != len(data):
        raise CheckpointError(f"{len(data) - offset} trailing bytes after arrays")

    n_layers = len(arch.layers)

    def group(prefix):
        out = []
        for i in range(n_layers):
            try:
                out.append(
                    {"w": arrays[f"{prefix}.{i}.w"], "b": arrays[f"{prefix}.{i}.b"]}
                )
            except KeyError as exc:
                raise CheckpointError(f"checkpoint missing array {exc}") from None
        return out

    params = NetworkParams(
        layers=group("layers"),
        adam=AdamState(m=group("adam_m"), v=group("adam_v"), step=int(header["adam_step"])),
        dtype=dtype,
    )
    return arch, params
