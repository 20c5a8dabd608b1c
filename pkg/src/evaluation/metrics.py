"""
Specrec Metrics
Structural similarity and squared error on unit-range feature spectra,
plus the per-scenario evaluation report
"""

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List

import numpy as np
import pandas as pd
from skimage.metrics import structural_similarity

from src.utils.errors import DimensionMismatchError
from src.utils.helpers import PathLike, atomic_write

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
DATA_RANGE = 1.0


def _check_pair(a: np.ndarray, b: np.ndarray):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"Cannot compare grids of shape {a.shape} and {b.shape}")
    return a, b


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """
    Mean SSIM over every fully-covered window position

    11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03, data range 1.0.
    """
    a, b = _check_pair(a, b)
    return float(structural_similarity(
        a, b,
        win_size=SSIM_WINDOW,
        gaussian_weights=True,
        sigma=SSIM_SIGMA,
        use_sample_covariance=False,
        K1=SSIM_K1,
        K2=SSIM_K2,
        data_range=DATA_RANGE,
    ))


def mse(a: np.ndarray, b: np.ndarray) -> float:
    a, b = _check_pair(a, b)
    return float(np.mean((a - b) ** 2))


def improvement_pct(ssim_attacked: float, ssim_reconstructed: float) -> float:
    """Relative SSIM gain of the reconstruction over the attacked map, in percent"""
    if ssim_attacked == 0.0:
        return float("nan")
    return 100.0 * (ssim_reconstructed - ssim_attacked) / ssim_attacked


@dataclass
class ScenarioRow:
    """Seed-averaged results for one (mode, p) scenario"""
    mode: str
    p: float
    ssim_attacked: float
    ssim_reconstructed: float
    improvement_pct: float
    mse_attacked: float
    mse_reconstructed: float
    seed_count: int


@dataclass
class EvalReport:
    """Rows for every evaluated scenario"""
    rows: List[ScenarioRow] = field(default_factory=list)
    t_star: int = 0
    rounds: int = 0
    guidance_enabled: bool = True

    @property
    def improvements(self) -> np.ndarray:
        return np.array([r.improvement_pct for r in self.rows], dtype=np.float64)

    def aggregate(self) -> Dict[str, float]:
        values = self.improvements
        values = values[np.isfinite(values)]
        if values.size == 0:
            return {"min_improvement_pct": float("nan"), "max_improvement_pct": float("nan"),
                    "mean_improvement_pct": float("nan")}
        return {
            "min_improvement_pct": float(values.min()),
            "max_improvement_pct": float(values.max()),
            "mean_improvement_pct": float(values.mean()),
        }

    def row(self, mode: str, p: float) -> ScenarioRow:
        for r in self.rows:
            if r.mode == mode and np.isclose(r.p, p):
                return r
        raise KeyError(f"No row for {mode} at p={p}")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(r) for r in self.rows], columns=[f for f in ScenarioRow.__dataclass_fields__])

    def to_csv(self) -> str:
        return self.to_frame().to_csv(index=False, float_format="%.6f")

    def to_text(self) -> str:
        """Aligned text table followed by the aggregate line"""
        table = self.to_frame().to_string(index=False, float_format=lambda v: f"{v:.4f}")
        agg = self.aggregate()
        return (
            f"{table}\n\n"
            f"improvement min {agg['min_improvement_pct']:.2f}% | "
            f"max {agg['max_improvement_pct']:.2f}% | mean {agg['mean_improvement_pct']:.2f}%\n"
        )

    def write(self, out_dir: PathLike, stem: str = "report") -> Dict[str, Path]:
        """Write the text table and CSV under out_dir"""
        out = Path(out_dir)
        text, csv = self.to_text(), self.to_csv()
        return {
            "text": atomic_write(out / f"{stem}.txt", lambda tmp: tmp.write_text(text, encoding="utf-8")),
            "csv": atomic_write(out / f"{stem}.csv", lambda tmp: tmp.write_text(csv, encoding="utf-8")),
        }
