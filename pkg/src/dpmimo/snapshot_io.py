"""PMS1 snapshot container: a self-describing binary file of channel matrices.

Layout (little-endian):
  bytes 0-3   magic "PMS1"
  4 x u32     N_RX, N_TX, N_t, N_f
  N_TX bytes  TX polarization tags (0 = V, 1 = H)
  N_RX bytes  RX polarization tags
  payload     snapshots in time-major, frequency-minor order; each matrix
              column-major; each complex entry as float64 real, float64 imag
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .channel import PolarizationLayout, SnapshotSet
from .errors import SnapshotFormatError

MAGIC = b"PMS1"
_HEADER = struct.Struct("<4sIIII")
MAX_DIM = 2**20  # guards against garbage headers allocating huge buffers


def write_snapshots(snapshots: SnapshotSet, path: str | Path) -> None:
    """Write a snapshot set atomically (temp file + rename)."""
    layout = snapshots.layout
    header = _HEADER.pack(
        MAGIC, layout.n_rx, layout.n_tx, snapshots.n_time, snapshots.n_freq
    )
    tags = bytes(0 if t == "V" else 1 for t in layout.tx) + bytes(
        0 if t == "V" else 1 for t in layout.rx
    )
    # column-major per matrix == vectorized sub-link order
    vecs = np.ascontiguousarray(snapshots.vectors(), dtype=np.complex128)
    payload = np.empty(vecs.shape + (2,))
    payload[..., 0] = vecs.real
    payload[..., 1] = vecs.imag
    data = header + tags + payload.astype("<f8").tobytes()
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_snapshots(path: str | Path) -> SnapshotSet:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise SnapshotFormatError(
            f"file too short for header: {len(data)} < {_HEADER.size} bytes", offset=0
        )
    magic, n_rx, n_tx, n_time, n_freq = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise SnapshotFormatError(f"bad magic {magic!r}, expected {MAGIC!r}", offset=0)
    for name, v in (("N_RX", n_rx), ("N_TX", n_tx), ("N_t", n_time), ("N_f", n_freq)):
        if not 1 <= v <= MAX_DIM:
            raise SnapshotFormatError(f"{name}={v} out of range 1..{MAX_DIM}", offset=4)
    pos = _HEADER.size
    n_tags = n_tx + n_rx
    if len(data) < pos + n_tags:
        raise SnapshotFormatError(
            f"truncated polarization tags: need {n_tags} bytes", offset=pos
        )
    tags = data[pos:pos + n_tags]
    if any(b not in (0, 1) for b in tags):
        raise SnapshotFormatError("polarization tags must be 0 (V) or 1 (H)", offset=pos)
    tx = tuple("V" if b == 0 else "H" for b in tags[:n_tx])
    rx = tuple("V" if b == 0 else "H" for b in tags[n_tx:])
    try:
        layout = PolarizationLayout(tx=tx, rx=rx)
    except ValueError as exc:
        raise SnapshotFormatError(f"inconsistent layout tags: {exc}", offset=pos) from exc
    pos += n_tags
    expected = n_time * n_freq * n_rx * n_tx * 16
    actual = len(data) - pos
    if actual != expected:
        raise SnapshotFormatError(
            f"payload length mismatch: expected {expected} bytes, got {actual}",
            offset=pos,
        )
    raw = np.frombuffer(data, dtype="<f8", offset=pos).reshape(
        n_time * n_freq, n_rx * n_tx, 2
    )
    vecs = raw[..., 0] + 1j * raw[..., 1]
    mats = vecs.reshape(n_time, n_freq, n_tx, n_rx).transpose(0, 1, 3, 2)
    return SnapshotSet(layout=layout, snapshots=mats)
