"""
Specrec - Command Line Interface
"""

import functools
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Tuple

import click
from dotenv import load_dotenv

# Allow `python src/cli.py ...` from a checkout
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from rich.console import Console
from rich.markup import escape
from rich.panel import Panel
from rich.progress import BarColumn, Progress, SpinnerColumn, TextColumn, TimeElapsedColumn
from rich.table import Table

from src import __version__
from src.channel.attack import AttackMode, AttackScenario, attack_map
from src.channel.channel_model import MapKind, RssiMap
from src.data.corpus import generate_corpus, load_manifest
from src.data.grid_io import GridKind, read_grid, write_grid
from src.data.normalization import denormalize, normalize
from src.evaluation.evaluator import default_scenarios, evaluate_scenarios, evaluation_seeds, sweep_t_star
from src.evaluation.metrics import EvalReport
from src.recovery.denoiser import load_checkpoint
from src.recovery.diffusion import guided_reconstruct
from src.recovery.trainer import loss_trace_path, train as train_denoiser
from src.reporter.heatmap import render_many, render_panel
from src.reporter.markdown_generator import generate_markdown_report
from src.utils.config import ScenarioConfig
from src.utils.errors import ConfigError, DimensionMismatchError, MissingFileError, SpecRecError
from src.utils.helpers import derive_seed, setup_logging

console = Console()
logger = logging.getLogger("specrec")

DEFAULT_CONFIG_NAME = "config.yaml"


def handle_errors(command):
    """Turn toolkit errors into a red message and the error's exit code"""
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except SpecRecError as e:
            console.print(f"[red]Error: {e}[/red]")
            sys.exit(e.exit_code)
    return wrapper


def common_options(command):
    """--config, --workdir and --verbose for every pipeline subcommand"""
    command = click.option('--verbose', '-v', is_flag=True, help='Debug logging (overrides SPECREC_LOG_LEVEL)')(command)
    command = click.option('--workdir', '-w', default='.', show_default=True,
                           help='Root directory all relative paths resolve against')(command)
    command = click.option('--config', '-c', 'config_path', default=None,
                           help=f'Scenario config file (default: <workdir>/{DEFAULT_CONFIG_NAME} if present)')(command)
    return command


def guidance_options(command):
    """Reconstruction knobs shared by reconstruct, evaluate and sweep"""
    command = click.option('--no-guidance', is_flag=True, help='Disable low-frequency guidance')(command)
    command = click.option('--lowpass', type=int, default=None, help='Guidance downsample factor N')(command)
    command = click.option('--rounds', type=int, default=None, help='Forward-reverse rounds K')(command)
    command = click.option('--t-star', type=int, default=None, help='Forward depth per round')(command)
    return command


def resolve_path(workdir: Path, path: Optional[str]) -> Optional[Path]:
    if path is None:
        return None
    candidate = Path(path)
    return candidate if candidate.is_absolute() else workdir / candidate


def require_file(path: Path, what: str) -> Path:
    if not path.exists():
        raise MissingFileError(f"{what} not found: {path}")
    return path


def prepare(config_path: Optional[str], workdir: str, verbose: bool) -> Tuple[ScenarioConfig, Path]:
    """Logging, workdir and config resolution shared by every subcommand"""
    setup_logging(verbose=verbose)
    root = Path(workdir)
    if not root.is_dir():
        raise MissingFileError(f"Working directory not found: {root}")

    if config_path is not None:
        config = ScenarioConfig.load(require_file(resolve_path(root, config_path), "Config file"))
    elif (root / DEFAULT_CONFIG_NAME).exists():
        config = ScenarioConfig.load(root / DEFAULT_CONFIG_NAME)
    else:
        config = ScenarioConfig()
    return config, root


def log_config(config: ScenarioConfig) -> None:
    """One-line resolved config on every run; full YAML at DEBUG"""
    console.print(f"[dim]⚙️  Resolved config: {escape(config.summary())}[/dim]", soft_wrap=True)
    logger.debug("Resolved config:\n%s", config.to_yaml())


def apply_guidance(config: ScenarioConfig, t_star, rounds, lowpass, no_guidance) -> ScenarioConfig:
    return config.override(
        "diffusion",
        t_star=t_star,
        rounds=rounds,
        lowpass_factor=lowpass,
        guidance_enabled=False if no_guidance else None,
    )


def parse_scenarios(spec: Optional[str], config: ScenarioConfig) -> List[AttackScenario]:
    """'ground:0.3,airborne:0.5' -> scenarios; empty or 'default' -> configured grid"""
    if spec is None or spec.strip().lower() in ("", "default"):
        return default_scenarios(config)
    scenarios = []
    for item in spec.split(','):
        try:
            mode, p = item.strip().split(':')
            scenarios.append(replace(config.attack, mode=AttackMode(mode.strip().lower()),
                                     attack_probability=float(p)))
        except ValueError as e:
            raise ConfigError(f"Bad scenario '{item}': expected <ground|airborne>:<p> ({e})") from e
    return scenarios


def make_progress() -> Progress:
    return Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        TextColumn("{task.completed}/{task.total}"),
        TimeElapsedColumn(),
        console=console,
    )


def read_map(path: Path, config: ScenarioConfig) -> RssiMap:
    values, kind = read_grid(path)
    if values.shape != config.grid.shape:
        raise DimensionMismatchError(f"{path}: grid {values.shape} does not match config grid {config.grid.shape}")
    map_kind = {GridKind.ATTACKED: MapKind.ATTACKED, GridKind.RECONSTRUCTED: MapKind.RECONSTRUCTED}
    return RssiMap(values, config.grid, map_kind.get(kind, MapKind.CLEAN))


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(version=__version__)
def cli():
    """
    📡 Specrec - Low-Altitude Spectrum Recovery Toolkit

    Synthesize RSSI feature spectra, corrupt them with jammers and
    reconstruct them with a guided diffusion model.
    """
    load_dotenv()


@cli.command('gen-dataset')
@common_options
@click.option('--count', '-n', type=int, default=None, help='Number of records (default: dataset.count)')
@click.option('--seed', type=int, default=None, help='Base seed (default: config seed)')
@click.option('--out-dir', '-o', default='corpus', show_default=True, help='Corpus directory')
@click.option('--with-attacks', is_flag=True, help='Also store attacked maps and attack masks')
@click.option('--mode', type=click.Choice([m.value for m in AttackMode]), default=None, help='Attack mode override')
@click.option('--p', 'probability', type=float, default=None, help='Attack probability override')
@handle_errors
def gen_dataset(config_path, workdir, verbose, count, seed, out_dir, with_attacks, mode, probability):
    """
    Generate a corpus of clean (and optionally attacked) spectra

    Example: specrec gen-dataset --count 256 --out-dir corpus/
    """
    config, root = prepare(config_path, workdir, verbose)
    config = config.override("attack", mode=AttackMode(mode) if mode else None, attack_probability=probability)
    log_config(config)
    count = count if count is not None else config.dataset_count
    seed = seed if seed is not None else config.seed
    target = resolve_path(root, out_dir)

    with make_progress() as progress:
        task = progress.add_task("Generating spectra...", total=count)
        manifest = generate_corpus(config, count, seed, target, with_attacks,
                                   progress=lambda n: progress.advance(task, n))

    console.print(f"\n✅ [green]Corpus saved to:[/green] [bold]{manifest.root}[/bold] ({manifest.count} records)")


@cli.command()
@common_options
@click.option('--corpus', required=True, help='Corpus directory or manifest file')
@click.option('--steps', type=int, default=None, help='Optimizer steps')
@click.option('--batch', type=int, default=None, help='Batch size')
@click.option('--lr', type=float, default=None, help='Learning rate')
@click.option('--seed', type=int, default=None, help='Training seed')
@click.option('--out', '-o', default='model.pt', show_default=True, help='Checkpoint path')
@handle_errors
def train(config_path, workdir, verbose, corpus, steps, batch, lr, seed, out):
    """
    Pretrain the denoiser on the clean maps of a corpus

    Example: specrec train --corpus corpus/ --steps 2000 --out model.pt
    """
    config, root = prepare(config_path, workdir, verbose)
    config = config.override("training", steps=steps, batch_size=batch, learning_rate=lr, seed=seed)
    log_config(config)
    manifest = load_manifest(resolve_path(root, corpus))
    config = replace(config, grid=manifest.grid, normalization=manifest.normalization)
    out_path = resolve_path(root, out)

    with make_progress() as progress:
        task = progress.add_task("Training denoiser...", total=config.training.steps)
        result = train_denoiser(manifest, config.schedule, config.training, config.denoiser_config(),
                                checkpoint_path=out_path, progress=lambda n: progress.advance(task, n))

    window = min(1000, len(result.losses))
    console.print(f"\n📉 Mean loss, last {window} steps: [bold]{sum(result.losses[-window:]) / window:.5f}[/bold]")
    console.print(f"✅ [green]Checkpoint saved to:[/green] [bold]{out_path}[/bold]")
    console.print(f"📄 Loss trace: {loss_trace_path(out_path)}")


@cli.command()
@common_options
@click.option('--input', '-i', 'input_path', required=True, help='Clean grid file')
@click.option('--mode', type=click.Choice([m.value for m in AttackMode]), default=None, help='Attack mode')
@click.option('--p', 'probability', type=float, default=None, help='Attack probability')
@click.option('--jammer-power', type=float, default=None, help='Jammer power in dBm')
@click.option('--seed', type=int, default=None, help='Attack seed (default: config seed)')
@click.option('--out', '-o', default='attacked.grid', show_default=True, help='Attacked grid file')
@click.option('--mask-out', default=None, help='Attack mask file (default: <out>_mask.grid)')
@handle_errors
def attack(config_path, workdir, verbose, input_path, mode, probability, jammer_power, seed, out, mask_out):
    """
    Corrupt a clean map with a ground or airborne jammer

    Example: specrec attack -i clean.grid --mode airborne --p 0.3 -o attacked.grid
    """
    config, root = prepare(config_path, workdir, verbose)
    config = config.override("attack", mode=AttackMode(mode) if mode else None,
                             attack_probability=probability, jammer_power_dbm=jammer_power)
    log_config(config)
    clean = read_map(require_file(resolve_path(root, input_path), "Input grid"), config)

    scenario = config.attack.with_seed(seed if seed is not None else config.seed)
    attacked, mask = attack_map(clean, scenario, config.tx, config.channel)

    out_path = resolve_path(root, out)
    mask_path = resolve_path(root, mask_out) if mask_out else out_path.with_name(f"{out_path.stem}_mask.grid")
    write_grid(out_path, attacked.values_dbm, GridKind.ATTACKED)
    write_grid(mask_path, mask.attacked.astype('float32'), GridKind.MASK)

    console.print(f"⚡ {scenario.label}: {mask.attacked_fraction:.1%} of cells attacked")
    console.print(f"✅ [green]Attacked map saved to:[/green] [bold]{out_path}[/bold]")


@cli.command()
@common_options
@click.option('--model', '-m', required=True, help='Denoiser checkpoint')
@click.option('--input', '-i', 'input_path', required=True, help='Attacked grid file (dBm)')
@guidance_options
@click.option('--seed', type=int, default=None, help='Reconstruction seed (default: config seed)')
@click.option('--out', '-o', default='reconstructed.grid', show_default=True, help='Output grid file')
@handle_errors
def reconstruct(config_path, workdir, verbose, model, input_path, t_star, rounds, lowpass, no_guidance, seed, out):
    """
    Reconstruct an attack-free map from an attacked one

    Example: specrec reconstruct -m model.pt -i attacked.grid --t-star 200 -o rec.grid
    """
    config, root = prepare(config_path, workdir, verbose)
    config = apply_guidance(config, t_star, rounds, lowpass, no_guidance)
    log_config(config)
    denoiser = load_checkpoint(require_file(resolve_path(root, model), "Checkpoint"))
    attacked = read_map(require_file(resolve_path(root, input_path), "Input grid"), config)

    cfg = config.diffusion
    y = normalize(attacked.values_dbm, denoiser.normalization)
    with make_progress() as progress:
        task = progress.add_task("Denoising...", total=cfg.rounds * cfg.t_star)
        unit = guided_reconstruct(y, denoiser, denoiser.schedule, cfg, seed if seed is not None else config.seed,
                                  progress=lambda n: progress.advance(task, n))

    out_path = resolve_path(root, out)
    write_grid(out_path, denormalize(unit, denoiser.normalization), GridKind.RECONSTRUCTED)
    console.print(f"✅ [green]Reconstructed map saved to:[/green] [bold]{out_path}[/bold]")


@cli.command()
@common_options
@click.option('--model', '-m', default=None, help='Denoiser checkpoint (omit to score attacks only)')
@click.option('--scenarios', '-s', default=None, help="e.g. 'ground:0.3,airborne:0.5' (default: all configured)")
@click.option('--seeds', type=int, default=None, help='Evaluation maps per scenario (default: evaluation.seeds)')
@guidance_options
@click.option('--out', '-o', default='report', show_default=True, help='Report directory')
@click.option('--html', is_flag=True, help='Also write an HTML report')
@handle_errors
def evaluate(config_path, workdir, verbose, model, scenarios, seeds, t_star, rounds, lowpass, no_guidance, out, html):
    """
    Score attacked and reconstructed spectra with SSIM and MSE

    Example: specrec evaluate -m model.pt --seeds 10 -o report/
    """
    config, root = prepare(config_path, workdir, verbose)
    config = apply_guidance(config, t_star, rounds, lowpass, no_guidance)
    log_config(config)
    denoiser = load_checkpoint(require_file(resolve_path(root, model), "Checkpoint")) if model else None
    if denoiser is not None:
        config = replace(config, normalization=denoiser.normalization)
    scenario_list = parse_scenarios(scenarios, config)
    seed_list = evaluation_seeds(config.seed, seeds if seeds is not None else config.evaluation.seeds)

    with make_progress() as progress:
        task = progress.add_task("Evaluating scenarios...", total=len(scenario_list))
        report = evaluate_scenarios(denoiser, scenario_list, seed_list, config.diffusion, config,
                                    progress=lambda n: progress.advance(task, n))

    out_dir = resolve_path(root, out)
    paths = report.write(out_dir)
    md_path = generate_markdown_report(report, Path(model).name if model else "none", out_dir / "report.md",
                                       config.summary(), html=html)
    display_report(report)
    console.print(f"\n✅ [green]Report saved to:[/green] [bold]{paths['text']}[/bold], {paths['csv'].name}, {md_path.name}")


@cli.command()
@common_options
@click.option('--model', '-m', required=True, help='Denoiser checkpoint')
@click.option('--t-values', default='100,200,400,600', show_default=True, help='Comma-separated forward depths')
@click.option('--scenarios', '-s', default=None, help="e.g. 'ground:0.3,airborne:0.5' (default: all configured)")
@click.option('--seeds', type=int, default=None, help='Evaluation maps per scenario')
@click.option('--out', '-o', default='sweep', show_default=True, help='Report directory')
@handle_errors
def sweep(config_path, workdir, verbose, model, t_values, scenarios, seeds, out):
    """
    Evaluate several forward depths t* to locate the noise-level trade-off

    Example: specrec sweep -m model.pt --t-values 100,300,500
    """
    config, root = prepare(config_path, workdir, verbose)
    log_config(config)
    try:
        depths = [int(v) for v in t_values.split(',') if v.strip()]
    except ValueError as e:
        raise ConfigError(f"--t-values must be comma-separated integers ({e})") from e
    denoiser = load_checkpoint(require_file(resolve_path(root, model), "Checkpoint"))
    config = replace(config, normalization=denoiser.normalization)
    scenario_list = parse_scenarios(scenarios, config)
    seed_list = evaluation_seeds(config.seed, seeds if seeds is not None else config.evaluation.seeds)

    with make_progress() as progress:
        task = progress.add_task("Sweeping t*...", total=len(depths) * len(scenario_list))
        reports = sweep_t_star(denoiser, scenario_list, seed_list, depths, config.diffusion, config,
                               progress=lambda n: progress.advance(task, n))

    out_dir = resolve_path(root, out)
    for depth, report in reports.items():
        report.write(out_dir, stem=f"report_t{depth}")
    best = max(reports, key=lambda d: reports[d].aggregate()["mean_improvement_pct"])
    generate_markdown_report(reports[best], Path(model).name, out_dir / "sweep.md", config.summary(), sweep=reports)
    console.print(f"🔁 Best mean improvement at t*={best}: {reports[best].aggregate()['mean_improvement_pct']:+.2f}%")
    console.print(f"✅ [green]Sweep saved to:[/green] [bold]{out_dir}[/bold]")


@cli.command()
@common_options
@click.option('--input', '-i', 'inputs', multiple=True, required=True, help='Grid file(s) to render')
@click.option('--out', '-o', default='figures', show_default=True, help='Output directory')
@click.option('--scale', type=int, default=1, show_default=True, help='Pixels per grid cell')
@click.option('--panel', is_flag=True, help='Also render all inputs side by side in panel.png')
@handle_errors
def render(config_path, workdir, verbose, inputs, out, scale, panel):
    """
    Render maps as heatmaps on the fixed normalization color scale

    Example: specrec render -i clean.grid -i attacked.grid -i rec.grid --panel
    """
    config, root = prepare(config_path, workdir, verbose)
    log_config(config)
    paths = [require_file(resolve_path(root, p), "Input grid") for p in inputs]
    maps = [read_grid(p)[0] for p in paths]
    out_dir = resolve_path(root, out)

    images = render_many(maps, [p.stem for p in paths], out_dir, config.normalization, scale)
    if panel:
        images.append(render_panel(maps, [p.stem for p in paths], out_dir / "panel.png", config.normalization))
    for image in images:
        console.print(f"🖼️  {image}")


@cli.command()
def version():
    """Display version information"""
    console.print(Panel.fit(
        f"[bold blue]Specrec v{__version__}[/bold blue]\n\n"
        "Low-altitude ISAC feature spectrum recovery\n"
        "[dim]channel synthesis · jamming · guided diffusion[/dim]",
        border_style="blue"
    ))


def display_report(report: EvalReport):
    """Display evaluation results in a formatted table"""
    table = Table(title="📊 SSIM Against Attack-Free Spectra", show_header=True, header_style="bold magenta")
    table.add_column("Mode", style="dim")
    table.add_column("p", justify="right")
    table.add_column("SSIM attacked", justify="right")
    table.add_column("SSIM reconstructed", justify="right")
    table.add_column("Improvement", justify="right")

    for row in report.rows:
        color = "green" if row.improvement_pct > 0 else "red"
        table.add_row(
            row.mode,
            f"{row.p:g}",
            f"{row.ssim_attacked:.4f}",
            f"{row.ssim_reconstructed:.4f}",
            f"[{color}]{row.improvement_pct:+.2f}%[/{color}]",
        )
    console.print(table)

    agg = report.aggregate()
    console.print(
        f"Improvement min [bold]{agg['min_improvement_pct']:.2f}%[/bold] · "
        f"max [bold]{agg['max_improvement_pct']:.2f}%[/bold] · "
        f"mean [bold]{agg['mean_improvement_pct']:.2f}%[/bold]"
    )


if __name__ == '__main__':
    cli()
