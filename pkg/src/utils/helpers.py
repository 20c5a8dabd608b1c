"""
Specrec Helpers
Seed streams, logging setup and atomic file writes
"""

import logging
import os
import tempfile
import zlib
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np
from rich.logging import RichHandler

LOG_LEVEL_ENV = "SPECREC_LOG_LEVEL"

PathLike = Union[str, os.PathLike]


def stream_id(name: str) -> int:
    """Stable integer id for a named random stream"""
    return zlib.crc32(name.encode("utf-8"))


def derive_seed(seed: int, stream: str, *keys: int) -> int:
    """
    Derive a child seed from a base seed, a stream name and integer keys

    Args:
        seed: Base seed
        stream: Stream name, e.g. "los" or "shadow"
        keys: Extra integer keys (record index, row, round, ...)

    Returns:
        A 32-bit integer seed
    """
    sequence = np.random.SeedSequence([int(seed), stream_id(stream), *[int(k) for k in keys]])
    return int(sequence.generate_state(1)[0])


def rng_for(seed: int, stream: str, *keys: int) -> np.random.Generator:
    """Generator for the (seed, stream, keys) sub-stream"""
    return np.random.default_rng(
        np.random.SeedSequence([int(seed), stream_id(stream), *[int(k) for k in keys]])
    )


def setup_logging(level: Optional[str] = None, verbose: bool = False) -> None:
    """
    Configure root logging with a rich handler

    Precedence: --verbose flag, then explicit level, then SPECREC_LOG_LEVEL, then WARNING.
    """
    if verbose:
        resolved = "DEBUG"
    else:
        resolved = (level or os.getenv(LOG_LEVEL_ENV) or "WARNING").upper()

    logging.basicConfig(
        level=getattr(logging, resolved, logging.WARNING),
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(rich_tracebacks=True, show_path=False)],
        force=True,
    )


def atomic_write(path: PathLike, writer: Callable[[Path], None]) -> Path:
    """
    Write a file through a temporary sibling, then rename it into place

    Args:
        path: Final destination
        writer: Callback receiving the temporary path to write to

    Returns:
        The final path
    """
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent)
    os.close(fd)
    tmp_path = Path(tmp_name)
    try:
        writer(tmp_path)
        os.replace(tmp_path, target)
    finally:
        if tmp_path.exists():
            tmp_path.unlink()
    return target
