"""CSV tables and binary network checkpoints.

Checkpoint layout (all little-endian)::

    b"MGDF1"            magic
    u16 version         currently 1
    u8  role            0 = eps-net, 1 = classifier
    u32 time_width
    u32 n               number of layer widths
    u32 widths[n]
    32 bytes            sha256 of the schedule betas as <f8
    f8  params[...]     W0, b0, W1, b1, ... in C order
"""

from __future__ import annotations

import csv
import io
import struct
from pathlib import Path

import numpy as np

from ..diffusion import NoiseSchedule
from ..nn import MLP

MAGIC = b"MGDF1"
VERSION = 1
ROLES = {"eps": 0, "classifier": 1}


class CheckpointError(ValueError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class FingerprintError(CheckpointError):
    pass


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def emit_csv(header, rows, path) -> None:
    """Write a header line and rows; floats get 17 significant digits, ``\\n`` line ends."""
    header = list(header)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        r = list(r)
        if len(r) != len(header):
            raise ValueError(f"row of length {len(r)} under a {len(header)}-column header")
        w.writerow([_fmt(v) for v in r])
    Path(path).write_bytes(buf.getvalue().encode())


def read_csv(path):
    """``(header, rows)`` with every cell parsed as float where possible."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        rows = []
        for r in reader:
            out = []
            for cell in r:
                try:
                    out.append(float(cell))
                except ValueError:
                    out.append(cell)
            rows.append(out)
    return header, rows


def read_matrix(path) -> np.ndarray:
    header, rows = read_csv(path)
    return np.array(rows, dtype=float).reshape(len(rows), len(header))


def save_checkpoint(path, net: MLP, role: str, schedule: NoiseSchedule, time_width: int) -> None:
    if role not in ROLES:
        raise ValueError(f"role must be one of {sorted(ROLES)}")
    widths = net.widths
    head = MAGIC + struct.pack("<HBII", VERSION, ROLES[role], time_width, len(widths))
    head += struct.pack(f"<{len(widths)}I", *widths) + schedule.fingerprint()
    body = b"".join(np.ascontiguousarray(p, dtype="<f8").tobytes() for p in net.params())
    Path(path).write_bytes(head + body)


def load_checkpoint(path, role: str, schedule: NoiseSchedule) -> tuple[MLP, int]:
    """Returns ``(net, time_width)``; schedule or role mismatches are errors."""
    raw = Path(path).read_bytes()
    fixed = len(MAGIC) + struct.calcsize("<HBII")
    if len(raw) < fixed or raw[: len(MAGIC)] != MAGIC:
        raise CheckpointVersionError(f"{path}: not an MGDF1 checkpoint")
    version, role_id, time_width, n = struct.unpack_from("<HBII", raw, len(MAGIC))
    if version != VERSION:
        raise CheckpointVersionError(f"{path}: format version {version}, expected {VERSION}")
    if ROLES.get(role) != role_id:
        raise CheckpointError(f"{path}: stored role id {role_id} is not {role!r}")
    off = fixed
    if len(raw) < off + 4 * n + 32:
        raise CheckpointError(f"{path}: truncated header")
    widths = struct.unpack_from(f"<{n}I", raw, off)
    off += 4 * n
    if raw[off:off + 32] != schedule.fingerprint():
        raise FingerprintError(f"{path}: saved under a different noise schedule")
    off += 32
    sizes = [(a, b) for a, b in zip(widths[:-1], widths[1:])]
    expected = sum(a * b + b for a, b in sizes) * 8
    if len(raw) - off != expected:
        raise CheckpointError(f"{path}: expected {expected} parameter bytes, found {len(raw) - off}")
    flat = np.frombuffer(raw, dtype="<f8", offset=off).astype(float)
    weights, biases, i = [], [], 0
    for a, b in sizes:
        weights.append(flat[i:i + a * b].reshape(a, b).copy())
        i += a * b
        biases.append(flat[i:i + b].copy())
        i += b
    return MLP(weights, biases), time_width
