"""Checkpoint container.

Layout (all integers and floats little-endian)::

    b"CRCKPT\\0\\0"            8-byte magic
    uint32                     format version
    uint64                     header length in bytes
    header                     UTF-8 JSON: config snapshot, optimizer scalars,
                               and one entry {name, kind, shape, offset, count}
                               per stored array
    payload                    concatenated row-major float64 arrays

A ``<path>.manifest`` text file lists every entry's name and shape.
"""
from __future__ import annotations

import json
import os
import struct
from typing import Optional

import numpy as np

MAGIC = b"CRCKPT\x00\x00"
VERSION = 1


def save_checkpoint(path: str, params: dict, optimizer: Optional[dict] = None,
                    config: Optional[dict] = None, extra: Optional[dict] = None) -> None:
    entries = []
    chunks = []
    offset = 0

    def _add(kind, name, arr):
        nonlocal offset
        arr = np.ascontiguousarray(arr, dtype="<f8")
        entries.append({"name": name, "kind": kind, "shape": list(arr.shape),
                        "offset": offset, "count": int(arr.size)})
        chunks.append(arr.tobytes(order="C"))
        offset += arr.size * 8

    for name, arr in params.items():
        _add("param", name, arr)
    opt_scalars = None
    if optimizer is not None:
        opt_scalars = {k: v for k, v in optimizer.items() if k not in ("m", "v")}
        for name, arr in optimizer.get("m", {}).items():
            _add("adam_m", name, arr)
        for name, arr in optimizer.get("v", {}).items():
            _add("adam_v", name, arr)
    header = {
        "version": VERSION,
        "config": config,
        "optimizer": opt_scalars,
        "extra": extra or {},
        "entries": entries,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", VERSION, len(blob)))
        fh.write(blob)
        for chunk in chunks:
            fh.write(chunk)
    os.replace(tmp, path)
    with open(path + ".manifest", "w", encoding="utf-8") as fh:
        fh.write(f"# checkpoint format v{VERSION}\n")
        for e in entries:
            shape = "x".join(str(s) for s in e["shape"]) or "scalar"
            fh.write(f"{e['kind']}\t{e['name']}\t{shape}\n")


def load_checkpoint(path: str) -> dict:
    """Returns ``{"params", "optimizer", "config", "extra"}``."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        version, header_len = struct.unpack("<IQ", fh.read(12))
        if version > VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        header = json.loads(fh.read(header_len).decode("utf-8"))
        payload = fh.read()
    params: dict = {}
    m: dict = {}
    v: dict = {}
    for e in header["entries"]:
        start = e["offset"]
        arr = np.frombuffer(payload, dtype="<f8", count=e["count"], offset=start)
        arr = arr.reshape(e["shape"]).astype(np.float64)
        {"param": params, "adam_m": m, "adam_v": v}[e["kind"]][e["name"]] = arr
    optimizer = None
    if header.get("optimizer") is not None:
        optimizer = dict(header["optimizer"], m=m, v=v)
    return {
        "params": params,
        "optimizer": optimizer,
        "config": header.get("config"),
        "extra": header.get("extra", {}),
    }
