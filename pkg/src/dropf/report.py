"""CSV tables, SVG plots and the run manifest."""

from __future__ import annotations

import csv
import datetime as _dt
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .scenario import ScenarioResult, compare_scenarios

HOURLY_COLUMNS = ("hour", "baseline_load_mw", "modified_load_mw", "price", "hourly_cost")
SUMMARY_COLUMNS = ("scenario", "total_cost", "peak_load_mw", "percent_saving")
MANIFEST_NAME = "manifest.json"


def _num(value: float) -> str:
    # repr keeps the shortest string that round-trips to the same double
    return repr(float(value))


@dataclass
class RunManifest:
    command: str
    output_dir: str
    scenarios: list[str]
    inputs: dict[str, str]
    outputs: list[str] = field(default_factory=list)
    tool_version: str = __version__
    timestamp: str = field(
        default_factory=lambda: _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"))

    def write(self) -> Path:
        path = Path(self.output_dir) / MANIFEST_NAME
        path.write_text(json.dumps(asdict(self), indent=2) + "\n")
        return path

    @classmethod
    def read(cls, directory) -> "RunManifest":
        return cls(**json.loads((Path(directory) / MANIFEST_NAME).read_text()))


def scenario_files(label: str) -> list[str]:
    return [f"{label}_hourly.csv", f"{label}_load.svg", f"{label}_cost.svg"]


def comparison_files(labels: Sequence[str]) -> list[str]:
    """Overlay plots per program plus a cost bar chart, when there is something to compare."""
    if len(labels) < 2:
        return []
    programs = sorted({label.split("_g")[0] for label in labels[1:]})
    return [f"compare_{p}_load.svg" for p in programs] + ["compare_total_cost.svg"]


def planned_outputs(labels: Sequence[str]) -> list[str]:
    files = [MANIFEST_NAME, "summary.csv"]
    for label in labels:
        files += scenario_files(label)
    return files + comparison_files(labels)


def write_hourly_csv(result: ScenarioResult, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HOURLY_COLUMNS)
        for h in range(len(result.hourly_cost)):
            writer.writerow([h + 1, _num(result.base_profile.hourly_mw[h]),
                             _num(result.modified_profile.hourly_mw[h]),
                             _num(result.prices[h]), _num(result.hourly_cost[h])])
    return path


def read_hourly_csv(path) -> dict[str, np.ndarray]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {col: np.array([float(r[col]) for r in rows]) for col in HOURLY_COLUMNS}


def write_summary_csv(results: Sequence[ScenarioResult], baseline: ScenarioResult, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for r in results:
            saving = 0.0 if r is baseline else compare_scenarios(baseline, r).percent_saving
            writer.writerow([r.label, _num(r.total_cost), _num(r.modified_profile.peak),
                             _num(saving)])
    return path


def _figure():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "dropf"
    plt.rcParams["svg.fonttype"] = "none"
    return plt


def plot_load_profile(result: ScenarioResult, path) -> Path:
    plt = _figure()
    hours = np.arange(1, len(result.base_profile.hourly_mw) + 1)
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.plot(hours, result.base_profile.hourly_mw, "k--", label="without DR")
    ax.plot(hours, result.modified_profile.hourly_mw, "C0-", marker="o", ms=3, label=result.label)
    ax.set_xlabel("hour")
    ax.set_ylabel("system load (MW)")
    ax.set_xticks(hours)
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return Path(path)


def plot_hourly_cost(result: ScenarioResult, path) -> Path:
    plt = _figure()
    hours = np.arange(1, len(result.hourly_cost) + 1)
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.bar(hours, result.hourly_cost, color="C1")
    ax.set_xlabel("hour")
    ax.set_ylabel("operating cost ($/h)")
    ax.set_title(f"{result.label}: total {result.total_cost:,.2f} $")
    ax.set_xticks(hours)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return Path(path)


def plot_program_profiles(baseline: ScenarioResult, runs: Sequence[ScenarioResult], path) -> Path:
    plt = _figure()
    hours = np.arange(1, len(baseline.base_profile.hourly_mw) + 1)
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.plot(hours, baseline.modified_profile.hourly_mw, "k--", label=baseline.label)
    for k, r in enumerate(runs):
        ax.plot(hours, r.modified_profile.hourly_mw, f"C{k}-", marker="o", ms=3, label=r.label)
    ax.set_xlabel("hour")
    ax.set_ylabel("system load (MW)")
    ax.set_xticks(hours)
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return Path(path)


def plot_total_costs(results: Sequence[ScenarioResult], path) -> Path:
    plt = _figure()
    fig, ax = plt.subplots(figsize=(7, 3.5))
    totals = np.array([r.total_cost for r in results])
    ax.bar(range(len(results)), totals, color=["k"] + ["C0"] * (len(results) - 1))
    ax.set_xticks(range(len(results)), [r.label for r in results], rotation=30)
    ax.set_ylabel("24-h operating cost ($)")
    spread = max(float(totals.max() - totals.min()), 1.0)
    ax.set_ylim(totals.min() - 2 * spread, totals.max() + 0.5 * spread)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return Path(path)


def emit_report(results: Sequence[ScenarioResult], out_dir) -> list[Path]:
    """Write per-scenario CSV and plots plus a summary table; the first result is the baseline."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [write_summary_csv(results, results[0], out_dir / "summary.csv")]
    for r in results:
        hourly, load_svg, cost_svg = scenario_files(r.label)
        written.append(write_hourly_csv(r, out_dir / hourly))
        written.append(plot_load_profile(r, out_dir / load_svg))
        written.append(plot_hourly_cost(r, out_dir / cost_svg))
    names = comparison_files([r.label for r in results])
    if names:
        base = results[0]
        for name in names[:-1]:
            program = name[len("compare_"):-len("_load.svg")]
            runs = [r for r in results[1:] if r.label.split("_g")[0] == program]
            written.append(plot_program_profiles(base, runs, out_dir / name))
        written.append(plot_total_costs(results, out_dir / names[-1]))
    return written
