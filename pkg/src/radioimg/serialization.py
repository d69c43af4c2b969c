"""Flat binary-plus-header persistence for observations and named arrays.

Layout: 4-byte magic, little-endian uint32 header length, UTF-8 JSON header,
then the payload as little-endian complex64 interleaved (re, im).
"""

import json

import numpy as np

from .waveform import ObservationSet

_MAGIC = b"RIMG"


def _write(path, header: dict, arrays):
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(np.array(len(blob), dtype="<u4").tobytes())
        fh.write(blob)
        for a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<c8").tobytes())


def _read(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValueError("not a recognized binary observation file")
        (hlen,) = np.frombuffer(fh.read(4), dtype="<u4")
        header = json.loads(fh.read(int(hlen)).decode("utf-8"))
        payload = np.frombuffer(fh.read(), dtype="<c8")
    return header, payload


def save_arrays(path, arrays: dict, meta: dict = None):
    """Persist named complex arrays with their dimensions in the header."""
    names = list(arrays)
    header = {
        "kind": "arrays",
        "meta": meta or {},
        "entries": [{"name": k, "shape": list(np.shape(arrays[k]))} for k in names],
    }
    _write(path, header, [arrays[k] for k in names])


def load_arrays(path):
    header, payload = _read(path)
    if header.get("kind") != "arrays":
        raise ValueError("file does not hold named arrays")
    out, offset = {}, 0
    for entry in header["entries"]:
        shape = tuple(entry["shape"])
        size = int(np.prod(shape)) if shape else 1
        out[entry["name"]] = payload[offset:offset + size].reshape(shape).astype(complex)
        offset += size
    return out, header["meta"]


def save_observations(path, obs: ObservationSet):
    header = {
        "kind": "observations",
        "sigma2": obs.sigma2,
        "seed": obs.seed,
        "entries": [{"ru": int(ru), "slot": int(slot), "shape": list(y.shape)}
                    for ru, slot, y in obs.entries],
    }
    _write(path, header, [y for _, _, y in obs.entries])


def load_observations(path) -> ObservationSet:
    header, payload = _read(path)
    if header.get("kind") != "observations":
        raise ValueError("file does not hold observations")
    entries, offset = [], 0
    for entry in header["entries"]:
        shape = tuple(entry["shape"])
        size = int(np.prod(shape))
        y = payload[offset:offset + size].reshape(shape).astype(complex)
        entries.append((entry["ru"], entry["slot"], y))
        offset += size
    return ObservationSet(tuple(entries), float(header["sigma2"]), int(header["seed"]))
