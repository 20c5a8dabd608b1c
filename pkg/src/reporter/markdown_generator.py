"""
Specrec Markdown Report Generator
Generates evaluation reports in Markdown (and HTML through markdown2)
"""

from pathlib import Path
from typing import Dict, List, Optional

import markdown2
import numpy as np

from src.evaluation.metrics import EvalReport, ScenarioRow
from src.utils.helpers import PathLike, atomic_write

# Recovery is expected to hold below this attack probability
RECOVERY_THRESHOLD_P = 0.5


class MarkdownReportGenerator:
    """Generates a reconstruction evaluation report in Markdown"""

    def __init__(self, model_name: str, config_summary: str = ""):
        self.model_name = model_name
        self.config_summary = config_summary

    def generate_report(self, report: EvalReport, sweep: Optional[Dict[int, EvalReport]] = None) -> str:
        """Generate the complete report"""
        sections = [
            self._generate_header(report),
            self._generate_executive_summary(report),
            self._generate_scenario_section(report),
        ]
        if sweep:
            sections.append(self._generate_sweep_section(sweep))
        sections.append(self._generate_observations(report))
        return "\n\n".join(sections) + "\n"

    def _generate_header(self, report: EvalReport) -> str:
        guidance = "on" if report.guidance_enabled else "off"
        lines = [
            "# 📡 Feature Spectrum Recovery Report",
            "",
            f"**Model:** `{self.model_name}`  ",
            f"**Forward depth t\\*:** {report.t_star}  ",
            f"**Rounds:** {report.rounds}  ",
            f"**Guidance:** {guidance}",
        ]
        if self.config_summary:
            lines += ["", f"`{self.config_summary}`"]
        lines += ["", "---"]
        return "\n".join(lines)

    def _generate_executive_summary(self, report: EvalReport) -> str:
        agg = report.aggregate()
        improved = sum(1 for r in report.rows if r.improvement_pct > 0)
        worst = min(report.rows, key=lambda r: r.ssim_attacked)

        if not np.isfinite(agg["mean_improvement_pct"]):
            verdict = "ℹ️ **ATTACK IMPACT ONLY** (no reconstruction was run)"
        elif improved == len(report.rows):
            verdict = "✅ **RECOVERED IN EVERY SCENARIO**"
        elif improved > 0:
            verdict = "🟡 **PARTIAL RECOVERY**"
        else:
            verdict = "🔴 **NO RECOVERY**"

        return f"""## 📊 Executive Summary

{verdict}

| Statistic | Value |
|-----------|-------|
| Scenarios | {len(report.rows)} |
| Scenarios improved | {improved} |
| Min improvement | {agg['min_improvement_pct']:.2f}% |
| Max improvement | {agg['max_improvement_pct']:.2f}% |
| Mean improvement | {agg['mean_improvement_pct']:.2f}% |
| Most damaging scenario | {worst.mode} @ p={worst.p:g} (SSIM {worst.ssim_attacked:.4f}) |

---"""

    def _generate_scenario_section(self, report: EvalReport) -> str:
        sections = ["## 🛡️ Scenario Results"]
        modes: List[str] = []
        for row in report.rows:
            if row.mode not in modes:
                modes.append(row.mode)

        icons = {"ground": "🏠", "airborne": "🛩️"}
        for mode in modes:
            rows = [r for r in report.rows if r.mode == mode]
            sections.append(f"### {icons.get(mode, '')} {mode.capitalize()} jammer ({len(rows)} scenarios)")
            sections.append(self._rows_table(rows))
        sections.append("---")
        return "\n\n".join(sections)

    def _rows_table(self, rows: List[ScenarioRow]) -> str:
        lines = [
            "| p | SSIM attacked | SSIM reconstructed | Improvement | MSE attacked | MSE reconstructed | Seeds |",
            "|---|---------------|--------------------|-------------|--------------|-------------------|-------|",
        ]
        for r in rows:
            lines.append(
                f"| {r.p:g} | {r.ssim_attacked:.4f} | {r.ssim_reconstructed:.4f} | {r.improvement_pct:+.2f}% "
                f"| {r.mse_attacked:.5f} | {r.mse_reconstructed:.5f} | {r.seed_count} |"
            )
        return "\n".join(lines)

    def _generate_sweep_section(self, sweep: Dict[int, EvalReport]) -> str:
        lines = [
            "## 🔁 Forward Depth Sweep",
            "",
            "| t* | Mean SSIM reconstructed | Mean improvement |",
            "|----|-------------------------|------------------|",
        ]
        for t_star, report in sorted(sweep.items()):
            mean_rec = float(np.mean([r.ssim_reconstructed for r in report.rows]))
            lines.append(f"| {t_star} | {mean_rec:.4f} | {report.aggregate()['mean_improvement_pct']:+.2f}% |")
        lines += ["", "---"]
        return "\n".join(lines)

    def _generate_observations(self, report: EvalReport) -> str:
        below = [r for r in report.rows if r.p < RECOVERY_THRESHOLD_P]
        above = [r for r in report.rows if r.p >= RECOVERY_THRESHOLD_P]
        lines = ["## 📋 Observations", ""]
        if below:
            ok = sum(1 for r in below if r.improvement_pct > 0)
            lines.append(f"1. Below p={RECOVERY_THRESHOLD_P:g}: {ok}/{len(below)} scenarios improved.")
        if above:
            ok = sum(1 for r in above if r.improvement_pct > 0)
            lines.append(f"{len(lines) - 1}. At or above p={RECOVERY_THRESHOLD_P:g}: {ok}/{len(above)} scenarios improved.")

        by_mode: Dict[str, List[float]] = {}
        for r in report.rows:
            by_mode.setdefault(r.mode, []).append(r.ssim_attacked)
        if len(by_mode) > 1:
            harshest = min(by_mode, key=lambda m: np.mean(by_mode[m]))
            lines.append(
                f"{len(lines) - 1}. The {harshest} jammer degrades the spectrum most "
                f"(mean attacked SSIM {np.mean(by_mode[harshest]):.4f})."
            )
        return "\n".join(lines)


def generate_markdown_report(
    report: EvalReport,
    model_name: str,
    output_path: PathLike,
    config_summary: str = "",
    sweep: Optional[Dict[int, EvalReport]] = None,
    html: bool = False,
) -> Path:
    """
    Generate and save a markdown report

    Args:
        report: Evaluation results
        model_name: Checkpoint name shown in the header
        output_path: Where to save the report
        config_summary: One-line scenario summary
        sweep: Optional per-t* reports
        html: Also write an HTML rendering next to the markdown

    Returns:
        Path to the generated markdown report
    """
    text = MarkdownReportGenerator(model_name, config_summary).generate_report(report, sweep)
    path = atomic_write(output_path, lambda tmp: tmp.write_text(text, encoding="utf-8"))
    if html:
        rendered = markdown2.markdown(text, extras=["tables"])
        atomic_write(Path(output_path).with_suffix(".html"), lambda tmp: tmp.write_text(rendered, encoding="utf-8"))
    return path
