"""
Specrec Heatmaps
Renders feature spectra as images on a fixed color scale
"""

from pathlib import Path
from typing import List, Optional, Sequence

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from src.data.normalization import NormalizationSpec
from src.utils.errors import DomainError
from src.utils.helpers import PathLike

# One palette for every panel so attacked and reconstructed maps compare directly
COLORMAP = "viridis"


def render_map(
    values_dbm: np.ndarray,
    path: PathLike,
    normalization: NormalizationSpec,
    scale: int = 1,
) -> Path:
    """
    Write one map as a pixel-exact PNG, rows x cols pixels times scale

    The color range is pinned to [min_dbm, max_dbm] of the normalization.
    """
    if scale < 1:
        raise DomainError(f"scale must be a positive integer, got {scale}")
    values = np.asarray(values_dbm, dtype=np.float64)
    if scale > 1:
        values = np.kron(values, np.ones((scale, scale)))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    plt.imsave(
        path, values, cmap=COLORMAP, vmin=normalization.min_dbm, vmax=normalization.max_dbm,
        origin="lower", metadata={"Software": None},
    )
    return path


def render_panel(
    maps: Sequence[np.ndarray],
    titles: Sequence[str],
    path: PathLike,
    normalization: NormalizationSpec,
    suptitle: Optional[str] = None,
) -> Path:
    """Side-by-side maps sharing one colorbar, e.g. clean | attacked | reconstructed"""
    if len(maps) != len(titles) or not maps:
        raise DomainError("Need one title per map and at least one map")
    fig, axes = plt.subplots(1, len(maps), figsize=(4 * len(maps), 4), squeeze=False)
    image = None
    for ax, values, title in zip(axes[0], maps, titles):
        image = ax.imshow(
            values, cmap=COLORMAP, vmin=normalization.min_dbm, vmax=normalization.max_dbm, origin="lower"
        )
        ax.set_title(title)
        ax.set_xticks([])
        ax.set_yticks([])
    fig.colorbar(image, ax=list(axes[0]), label="RSSI (dBm)", shrink=0.8)
    if suptitle:
        fig.suptitle(suptitle)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)
    return path


def render_many(
    maps: Sequence[np.ndarray],
    names: Sequence[str],
    out_dir: PathLike,
    normalization: NormalizationSpec,
    scale: int = 1,
) -> List[Path]:
    """One image per map, named after the inputs"""
    return [
        render_map(values, Path(out_dir) / f"{name}.png", normalization, scale)
        for values, name in zip(maps, names)
    ]
