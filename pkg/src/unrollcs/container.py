"""Binary array container shared by datasets, dictionaries and checkpoints.

Layout::

    b"UCSC1\\n"                      magic
    uint64 little-endian            header length in bytes
    header                          UTF-8 JSON
    payload                         little-endian float64 arrays, back to back

The header records each array's name, shape and byte offset, free-form
metadata, and the SHA-256 of the payload.  Header keys are sorted so equal
content always serializes to equal bytes.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"UCSC1\n"


class ContainerError(IOError):
    """Raised for malformed or corrupted container files."""


def checksum(arrays: dict[str, np.ndarray]) -> str:
    """SHA-256 over names, shapes and little-endian bytes of ``arrays``."""
    h = hashlib.sha256()
    for name in sorted(arrays):
        a = np.ascontiguousarray(arrays[name], dtype="<f8")
        h.update(name.encode())
        h.update(repr(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()


def dumps(arrays: dict[str, np.ndarray], meta: dict | None = None) -> bytes:
    entries, chunks, offset = [], [], 0
    for name in sorted(arrays):
        a = np.ascontiguousarray(arrays[name], dtype="<f8")
        entries.append({"name": name, "shape": list(a.shape), "offset": offset})
        chunks.append(a.tobytes())
        offset += a.nbytes
    payload = b"".join(chunks)
    header = {
        "arrays": entries,
        "meta": meta or {},
        "checksum": hashlib.sha256(payload).hexdigest(),
        "content_hash": checksum(arrays),
    }
    hbytes = json.dumps(header, sort_keys=True).encode()
    return MAGIC + struct.pack("<Q", len(hbytes)) + hbytes + payload


def loads(blob: bytes) -> tuple[dict[str, np.ndarray], dict]:
    if not blob.startswith(MAGIC):
        raise ContainerError("not a container file (bad magic)")
    pos = len(MAGIC)
    try:
        (hlen,) = struct.unpack_from("<Q", blob, pos)
        header = json.loads(blob[pos + 8: pos + 8 + hlen].decode())
    except (struct.error, ValueError) as exc:
        raise ContainerError(f"unreadable header: {exc}") from exc
    payload = blob[pos + 8 + hlen:]
    if hashlib.sha256(payload).hexdigest() != header.get("checksum"):
        raise ContainerError("checksum mismatch: file is corrupted")
    arrays = {}
    for e in header["arrays"]:
        n = int(np.prod(e["shape"], dtype=np.int64))
        a = np.frombuffer(payload, dtype="<f8", count=n, offset=e["offset"])
        arrays[e["name"]] = a.reshape(e["shape"]).astype(np.float64)
    meta = dict(header.get("meta", {}))
    meta["_content_hash"] = header.get("content_hash")
    return arrays, meta


def save(path, arrays: dict[str, np.ndarray], meta: dict | None = None) -> str:
    """Write a container; returns the content hash of ``arrays``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blob = dumps(arrays, meta)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(blob)
    tmp.replace(path)
    return checksum(arrays)


def load(path) -> tuple[dict[str, np.ndarray], dict]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    return loads(path.read_bytes())
