"""
Specrec Grid Files
Little-endian binary container for one grid: 16-byte header (magic, version,
kind), rows and cols as uint32, then row-major float32 values
"""

from enum import IntEnum
from pathlib import Path
from typing import Tuple

import numpy as np

from src.utils.errors import CorpusError, MissingFileError
from src.utils.helpers import PathLike, atomic_write

MAGIC = b"RSSIGRID"
FORMAT_VERSION = 1

HEADER_DTYPE = np.dtype([
    ("magic", "S8"),
    ("version", "<u4"),
    ("kind", "<u4"),
    ("rows", "<u4"),
    ("cols", "<u4"),
])
VALUE_DTYPE = np.dtype("<f4")


class GridKind(IntEnum):
    """Kind code stored in the header"""
    CLEAN = 0
    ATTACKED = 1
    RECONSTRUCTED = 2
    MASK = 3


def encode_grid(values: np.ndarray, kind: GridKind) -> bytes:
    """Serialize a 2D grid"""
    values = np.asarray(values)
    if values.ndim != 2:
        raise CorpusError(f"Only 2D grids can be stored, got shape {values.shape}")
    header = np.zeros(1, dtype=HEADER_DTYPE)
    header["magic"] = MAGIC
    header["version"] = FORMAT_VERSION
    header["kind"] = int(kind)
    header["rows"], header["cols"] = values.shape
    return header.tobytes() + np.ascontiguousarray(values, dtype=VALUE_DTYPE).tobytes()


def decode_grid(payload: bytes, source: str = "<bytes>") -> Tuple[np.ndarray, GridKind]:
    """Parse bytes produced by encode_grid; values come back as float64"""
    if len(payload) < HEADER_DTYPE.itemsize:
        raise CorpusError(f"{source}: truncated header")
    header = np.frombuffer(payload, dtype=HEADER_DTYPE, count=1)[0]
    if header["magic"] != MAGIC:
        raise CorpusError(f"{source}: not a grid file (bad magic)")
    if header["version"] != FORMAT_VERSION:
        raise CorpusError(f"{source}: unsupported format version {header['version']}")

    rows, cols = int(header["rows"]), int(header["cols"])
    expected = HEADER_DTYPE.itemsize + rows * cols * VALUE_DTYPE.itemsize
    if len(payload) != expected:
        raise CorpusError(f"{source}: expected {expected} bytes for {rows}x{cols}, found {len(payload)}")
    values = np.frombuffer(payload, dtype=VALUE_DTYPE, offset=HEADER_DTYPE.itemsize)
    return values.reshape(rows, cols).astype(np.float64), GridKind(int(header["kind"]))


def write_grid(path: PathLike, values: np.ndarray, kind: GridKind) -> Path:
    """Write one grid file atomically"""
    payload = encode_grid(values, kind)
    try:
        return atomic_write(path, lambda tmp: tmp.write_bytes(payload))
    except OSError as e:
        raise CorpusError(f"{path}: cannot write grid file ({e})") from e


def read_grid(path: PathLike) -> Tuple[np.ndarray, GridKind]:
    """Read one grid file"""
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"Grid file not found: {path}")
    try:
        payload = path.read_bytes()
    except OSError as e:
        raise CorpusError(f"{path}: cannot read grid file ({e})") from e
    return decode_grid(payload, str(path))
