"""
Specrec Corpus
Generation, persistence and loading of (clean, attacked, mask) spectrum triples
"""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterator, List, Optional

import numpy as np
import yaml

from src.channel.attack import AttackMask, AttackScenario, attack_map
from src.channel.channel_model import GridSpec, MapKind, RssiMap, sample_los_mask, synthesize_rssi_map
from src.channel.shadow_field import sample_field
from src.data.grid_io import GridKind, read_grid, write_grid
from src.data.normalization import NormalizationSpec, normalize
from src.utils.config import ScenarioConfig, grid_from_dict, grid_to_dict
from src.utils.errors import CorpusError, MissingFileError
from src.utils.helpers import PathLike, atomic_write, derive_seed

logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1
MANIFEST_NAME = "manifest.yaml"


@dataclass
class SpectrumRecord:
    """One generated spectrum with everything needed to regenerate it"""
    clean: RssiMap
    scenario: ScenarioConfig
    seed: int
    attacked: Optional[RssiMap] = None
    mask: Optional[AttackMask] = None


@dataclass
class RecordEntry:
    """Where a record lives on disk"""
    index: int
    seed: int
    clean: str
    attacked: Optional[str] = None
    mask: Optional[str] = None

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}


@dataclass
class Manifest:
    """Index of a corpus directory"""
    grid: GridSpec
    normalization: NormalizationSpec
    base_seed: int
    records: List[RecordEntry] = field(default_factory=list)
    format_version: int = MANIFEST_VERSION
    root: Path = Path(".")

    @property
    def count(self) -> int:
        return len(self.records)

    @property
    def with_attacks(self) -> bool:
        return any(r.attacked is not None for r in self.records)

    def validate(self) -> None:
        indices = [r.index for r in self.records]
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise CorpusError(f"{self.root}: record indices are not strictly increasing")

    def to_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "count": self.count,
            "base_seed": self.base_seed,
            "grid": grid_to_dict(self.grid),
            "normalization": self.normalization.to_dict(),
            "records": [r.to_dict() for r in self.records],
        }

    def save(self, path: Optional[PathLike] = None) -> Path:
        target = Path(path) if path is not None else self.root / MANIFEST_NAME
        text = yaml.safe_dump(self.to_dict(), sort_keys=False)
        try:
            return atomic_write(target, lambda tmp: tmp.write_text(text, encoding="utf-8"))
        except OSError as e:
            raise CorpusError(f"{target}: cannot write manifest ({e})") from e


def record_seed(base_seed: int, index: int) -> int:
    """Record i is fully determined by (base_seed, i)"""
    return derive_seed(base_seed, "record", index)


def synthesize_clean(config: ScenarioConfig, seed: int) -> RssiMap:
    """Clean map for one seed: LoS draw and shadow field from their own streams"""
    grid, channel = config.grid, config.channel
    mask = sample_los_mask(config.tx, grid, channel, derive_seed(seed, "los-mask"))
    shadow = sample_field(
        grid.rows, grid.cols, grid.cell_size_m, channel.sf_sigma_db, channel.sf_dcorr_m,
        derive_seed(seed, "shadow-field"),
    )
    return synthesize_rssi_map(config.tx, grid, channel, mask, shadow)


def generate_record(
    config: ScenarioConfig,
    seed: int,
    with_attacks: bool = False,
    scenario: Optional[AttackScenario] = None,
) -> SpectrumRecord:
    """Clean map for a seed and, optionally, its attacked version"""
    clean = synthesize_clean(config, seed)
    record = SpectrumRecord(clean=clean, scenario=config, seed=seed)
    if with_attacks:
        scenario = (scenario or config.attack).with_seed(derive_seed(seed, "attack"))
        record.attacked, record.mask = attack_map(clean, scenario, config.tx, config.channel)
    return record


def generate_corpus(
    config: ScenarioConfig,
    n: int,
    base_seed: int,
    out_dir: PathLike,
    with_attacks: bool = False,
    progress: Optional[Callable[[int], None]] = None,
) -> Manifest:
    """
    Generate n records and write them with a manifest under out_dir

    Args:
        config: Scenario description
        n: Number of records
        base_seed: Seed from which every record seed derives
        out_dir: Target directory
        with_attacks: Also store attacked maps and masks
        progress: Called once per finished record

    Returns:
        The saved manifest
    """
    if n < 1:
        raise CorpusError(f"Corpus needs at least one record, got {n}")
    root = Path(out_dir)
    try:
        root.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise CorpusError(f"{root}: cannot create corpus directory ({e})") from e

    manifest = Manifest(grid=config.grid, normalization=config.normalization, base_seed=base_seed, root=root)
    for index in range(n):
        seed = record_seed(base_seed, index)
        record = generate_record(config, seed, with_attacks)
        entry = RecordEntry(index=index, seed=seed, clean=f"{index:06d}_clean.grid")
        write_grid(root / entry.clean, record.clean.values_dbm, GridKind.CLEAN)
        if with_attacks:
            entry.attacked = f"{index:06d}_attacked.grid"
            entry.mask = f"{index:06d}_mask.grid"
            write_grid(root / entry.attacked, record.attacked.values_dbm, GridKind.ATTACKED)
            write_grid(root / entry.mask, record.mask.attacked.astype(np.float32), GridKind.MASK)
        manifest.records.append(entry)
        if progress is not None:
            progress(1)

    manifest.save()
    logger.info("Wrote %d records to %s", n, root)
    return manifest


def load_manifest(path: PathLike) -> Manifest:
    """Read a manifest file, or the manifest inside a corpus directory"""
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    if not path.exists():
        raise MissingFileError(f"Manifest not found: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as e:
        raise CorpusError(f"{path}: cannot parse manifest ({e})") from e

    try:
        if data["format_version"] != MANIFEST_VERSION:
            raise CorpusError(f"{path}: unsupported manifest version {data['format_version']}")
        records = [RecordEntry(**entry) for entry in data["records"]]
        manifest = Manifest(
            grid=grid_from_dict(data["grid"]),
            normalization=NormalizationSpec(**data["normalization"]),
            base_seed=int(data["base_seed"]),
            records=records,
            root=path.parent,
        )
        count = int(data["count"])
    except (KeyError, TypeError) as e:
        raise CorpusError(f"{path}: malformed manifest ({e})") from e

    if count != manifest.count:
        raise CorpusError(f"{path}: manifest says {count} records but lists {manifest.count}")
    manifest.validate()
    return manifest


def iter_records(manifest: Manifest, config: Optional[ScenarioConfig] = None) -> Iterator[SpectrumRecord]:
    """Load every record of a corpus"""
    scenario = config or replace(ScenarioConfig(), grid=manifest.grid, normalization=manifest.normalization)
    for entry in manifest.records:
        clean, _ = read_grid(manifest.root / entry.clean)
        record = SpectrumRecord(clean=RssiMap(clean, manifest.grid, MapKind.CLEAN), scenario=scenario, seed=entry.seed)
        if entry.attacked is not None:
            attacked, _ = read_grid(manifest.root / entry.attacked)
            record.attacked = RssiMap(attacked, manifest.grid, MapKind.ATTACKED)
        if entry.mask is not None:
            mask, _ = read_grid(manifest.root / entry.mask)
            record.mask = AttackMask(mask > 0.5)
        yield record


def load_normalized_clean(manifest: Manifest) -> np.ndarray:
    """Stack of clean maps mapped to [0, 1], shape (count, rows, cols), float32"""
    if manifest.count == 0:
        raise CorpusError(f"{manifest.root}: corpus is empty")
    stack = np.empty((manifest.count, *manifest.grid.shape), dtype=np.float32)
    for i, entry in enumerate(manifest.records):
        values, _ = read_grid(manifest.root / entry.clean)
        if values.shape != manifest.grid.shape:
            raise CorpusError(f"{manifest.root / entry.clean}: shape {values.shape} differs from manifest grid")
        stack[i] = normalize(values, manifest.normalization)
    return stack
