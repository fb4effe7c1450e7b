"""Field files and deterministic CSV output.

Field file layout (little-endian):

    magic     8 bytes   b"HMWOCUBE" (cube) or b"HMWORADL" (radial)
    n         float64   points per axis / radial points
    L         float64   box half-width / outer radius
    samples   n^3 (or n) complex128, row-major, interleaved re/im
"""

from __future__ import annotations

import csv
import io as _io
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .grid import ComplexField, GridSpec, RadialGrid

MAGIC_CUBE = b"HMWOCUBE"
MAGIC_RADIAL = b"HMWORADL"
_HEADER = np.dtype([("magic", "S8"), ("n", "<f8"), ("L", "<f8")])


def write_field_file(path, grid, values):
    magic = MAGIC_RADIAL if isinstance(grid, RadialGrid) else MAGIC_CUBE
    head = np.array([(magic, float(grid.n), float(grid.extent))], dtype=_HEADER)
    data = np.ascontiguousarray(values, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(head.tobytes())
        fh.write(data.tobytes())


def read_field_file(path):
    """Return ``(grid, values)``."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.itemsize:
        raise ConfigError(f"{path}: truncated field file")
    head = np.frombuffer(raw[:_HEADER.itemsize], dtype=_HEADER)[0]
    n, L = int(head["n"]), float(head["L"])
    if head["magic"] == MAGIC_CUBE:
        grid = GridSpec(n, L)
    elif head["magic"] == MAGIC_RADIAL:
        grid = RadialGrid(n, L)
    else:
        raise ConfigError(f"{path}: unknown magic {bytes(head['magic'])!r}")
    data = np.frombuffer(raw[_HEADER.itemsize:], dtype="<c16")
    if data.size != np.prod(grid.shape):
        raise ConfigError(f"{path}: expected {np.prod(grid.shape)} samples, found {data.size}")
    return grid, data.reshape(grid.shape).astype(complex)


def save_field(path, field):
    write_field_file(path, field.grid, field.values)


def load_field(path):
    grid, values = read_field_file(path)
    return ComplexField(grid, values)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def csv_text(header, rows):
    """CSV with shortest round-trip float formatting (byte-stable)."""
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows):
    Path(path).write_text(csv_text(header, rows))
