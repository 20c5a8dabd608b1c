import numpy as np
import pandas as pd
import pytest
from click.testing import CliRunner
from matplotlib import pyplot as plt

from src import __version__
from src.cli import cli
from src.data.grid_io import GridKind, read_grid, write_grid

SUBCOMMANDS = {
    "gen-dataset": ["--count", "--seed", "--out-dir", "--with-attacks"],
    "train": ["--corpus", "--steps", "--batch", "--lr", "--seed", "--out"],
    "attack": ["--input", "--mode", "--p", "--seed", "--out"],
    "reconstruct": ["--model", "--input", "--t-star", "--rounds", "--lowpass", "--no-guidance", "--seed", "--out"],
    "evaluate": ["--model", "--scenarios", "--seeds", "--out"],
    "sweep": ["--model", "--t-values", "--out"],
    "render": ["--input", "--out", "--scale", "--panel"],
}


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def workdir(tmp_path, small_config):
    (tmp_path / "config.yaml").write_text(small_config.to_yaml())
    return tmp_path


def run(runner, workdir, *args):
    return runner.invoke(cli, [args[0], "--workdir", str(workdir), *args[1:]])


@pytest.fixture
def corpus(runner, workdir):
    result = run(runner, workdir, "gen-dataset", "--count", "4", "--out-dir", "corpus", "--with-attacks")
    assert result.exit_code == 0, result.output
    return workdir / "corpus"


@pytest.fixture
def model(runner, workdir, corpus):
    result = run(runner, workdir, "train", "--corpus", "corpus", "--steps", "2", "--batch", "2", "--out", "model.pt")
    assert result.exit_code == 0, result.output
    return workdir / "model.pt"


@pytest.mark.parametrize("command, flags", SUBCOMMANDS.items())
def test_help_documents_every_flag(runner, command, flags):
    result = runner.invoke(cli, [command, "--help"])
    assert result.exit_code == 0
    for flag in flags + ["--config", "--workdir", "--verbose"]:
        assert flag in result.output


def test_unknown_flag_is_a_usage_error(runner, workdir):
    result = run(runner, workdir, "gen-dataset", "--bogus")
    assert result.exit_code == 2


def test_version(runner):
    result = runner.invoke(cli, ["version"])
    assert result.exit_code == 0
    assert __version__ in result.output


def test_missing_config_file(runner, workdir):
    result = run(runner, workdir, "gen-dataset", "--config", "absent.yaml")
    assert result.exit_code == 4
    assert "Error" in result.output


def test_malformed_config(runner, workdir):
    (workdir / "config.yaml").write_text("grid:\n  rows: 30\n  cols: 30\n")
    result = run(runner, workdir, "gen-dataset", "--count", "1")
    assert result.exit_code == 3


def test_missing_workdir(runner, tmp_path):
    result = runner.invoke(cli, ["gen-dataset", "--workdir", str(tmp_path / "nowhere")])
    assert result.exit_code == 4


def test_resolved_config_is_shown_at_default_log_level(runner, workdir, small_config, monkeypatch):
    monkeypatch.delenv("SPECREC_LOG_LEVEL", raising=False)
    result = run(runner, workdir, "gen-dataset", "--count", "1", "--out-dir", "one")
    assert result.exit_code == 0, result.output
    assert "Resolved config" in result.output
    assert f"grid {small_config.grid.rows}x{small_config.grid.cols}" in result.output


def test_gen_dataset_writes_corpus(corpus):
    assert (corpus / "manifest.yaml").exists()
    assert sorted(p.name for p in corpus.glob("000000_*.grid")) == [
        "000000_attacked.grid", "000000_clean.grid", "000000_mask.grid",
    ]


def test_attack_with_zero_probability_keeps_values(runner, workdir, corpus):
    result = run(runner, workdir, "attack", "-i", "corpus/000000_clean.grid", "--p", "0", "-o", "same.grid")
    assert result.exit_code == 0, result.output
    clean, _ = read_grid(corpus / "000000_clean.grid")
    attacked, kind = read_grid(workdir / "same.grid")
    assert kind is GridKind.ATTACKED
    np.testing.assert_array_equal(attacked, clean)
    mask, kind = read_grid(workdir / "same_mask.grid")
    assert kind is GridKind.MASK and not mask.any()


def test_attack_missing_input(runner, workdir):
    result = run(runner, workdir, "attack", "-i", "absent.grid")
    assert result.exit_code == 4


def test_attack_rejects_grid_of_wrong_size(runner, workdir):
    write_grid(workdir / "small.grid", np.full((8, 8), -90.0), GridKind.CLEAN)
    result = run(runner, workdir, "attack", "-i", "small.grid")
    assert result.exit_code == 6


def test_render_single_maps_and_panel(runner, workdir, corpus):
    result = run(
        runner, workdir, "render", "-i", "corpus/000000_clean.grid", "-i", "corpus/000000_attacked.grid",
        "--scale", "2", "--panel", "-o", "figures",
    )
    assert result.exit_code == 0, result.output
    image = plt.imread(workdir / "figures" / "000000_clean.png")
    assert image.shape[:2] == (64, 64)
    assert (workdir / "figures" / "000000_attacked.png").exists()
    assert (workdir / "figures" / "panel.png").exists()


def test_evaluate_without_model_reports_attacks(runner, workdir):
    result = run(runner, workdir, "evaluate", "--scenarios", "ground:0.3,airborne:0.3", "-o", "report")
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(workdir / "report" / "report.csv")
    assert frame["mode"].tolist() == ["ground", "airborne"]
    assert frame["ssim_reconstructed"].isna().all()


@pytest.mark.parametrize("spec", ["ground:abc", "orbital:0.3", "ground"])
def test_evaluate_rejects_bad_scenarios(runner, workdir, spec):
    result = run(runner, workdir, "evaluate", "--scenarios", spec)
    assert result.exit_code == 3


def test_full_pipeline(runner, workdir, corpus, model):
    assert (workdir / "model.loss.csv").exists()

    result = run(runner, workdir, "attack", "-i", "corpus/000001_clean.grid", "--mode", "airborne", "--p", "0.4",
                 "-o", "attacked.grid")
    assert result.exit_code == 0, result.output

    for name in ("rec1.grid", "rec2.grid"):
        result = run(runner, workdir, "reconstruct", "-m", "model.pt", "-i", "attacked.grid", "--seed", "3",
                     "-o", name)
        assert result.exit_code == 0, result.output
    assert (workdir / "rec1.grid").read_bytes() == (workdir / "rec2.grid").read_bytes()
    values, kind = read_grid(workdir / "rec1.grid")
    assert kind is GridKind.RECONSTRUCTED
    assert values.min() >= -110.0 - 1e-4 and values.max() <= -40.0 + 1e-4

    result = run(runner, workdir, "evaluate", "-m", "model.pt", "-o", "report", "--html")
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(workdir / "report" / "report.csv")
    assert len(frame) == 10
    for name in ("report.txt", "report.md", "report.html"):
        assert (workdir / "report" / name).exists()


def test_reconstruct_rejects_model_for_other_grid(runner, workdir, model, small_config):
    from dataclasses import replace

    from src.channel.channel_model import GridSpec

    bigger = replace(small_config, grid=GridSpec(rows=64, cols=64))
    (workdir / "big.yaml").write_text(bigger.to_yaml())
    write_grid(workdir / "big.grid", np.full((64, 64), -90.0), GridKind.ATTACKED)
    result = run(runner, workdir, "reconstruct", "--config", "big.yaml", "-m", "model.pt", "-i", "big.grid")
    assert result.exit_code == 8


def test_sweep_writes_one_report_per_depth(runner, workdir, model):
    result = run(runner, workdir, "sweep", "-m", "model.pt", "--t-values", "0,2", "--scenarios", "ground:0.3",
                 "-o", "sweep")
    assert result.exit_code == 0, result.output
    for name in ("report_t0.csv", "report_t2.csv", "sweep.md"):
        assert (workdir / "sweep" / name).exists()
