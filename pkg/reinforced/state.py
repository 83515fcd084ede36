"""Run records: the manifest written beside every output, and the CSV/JSON writers."""

import csv
import json
import sys
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

from pydantic import BaseModel, Field

from . import __version__
from .experiments import HittingReport, ScalingReport, SllnReport
from .lerrw import WalkStats
from .resistance import BoundsReport
from .specialfn import MomentTable

SCHEMA_VERSION = 1


def format_float(value: Optional[float]) -> str:
    """17 significant digits; empty for missing values."""
    if value is None:
        return ""
    return f"{value:.17g}"


def _cell(value: Any) -> Any:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return format_float(value)
    if value is None:
        return ""
    return value


def write_rows(path: Path, fieldnames: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        w = csv.DictWriter(f, fieldnames=list(fieldnames), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _cell(row.get(k)) for k in fieldnames})
    return path


def write_json(path: Path, data: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


class RunManifest(BaseModel):
    """Everything needed to regenerate the files in ``output_paths``."""

    schema_version: int = SCHEMA_VERSION
    command: str
    argv: List[str] = Field(default_factory=list)
    config: Dict[str, Any] = Field(default_factory=dict, description="Echo of the effective configuration")
    master_seed: int = 0
    output_paths: List[str] = Field(default_factory=list)
    tool_version: str = __version__
    python_version: str = Field(default_factory=lambda: sys.version.split()[0])
    wall_time: float = Field(default=0.0, description="Seconds; the only field that varies between reruns")

    def save_to_file(self, filepath: Path) -> Path:
        return write_json(filepath, self.model_dump(mode="json"))

    @classmethod
    def load_from_file(cls, filepath: Path) -> "RunManifest":
        return cls.model_validate_json(Path(filepath).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Report writers


SCALING_FIELDS = ("n", "quantile", "max_position", "predictor", "lower", "upper", "ratio")
TRAJECTORY_FIELDS = ("replica", "n", "max_position", "position")
HITTING_FIELDS = ("x", "T", "mc_mean", "mc_se", "z_score", "n_censored", "censored")
SLLN_FIELDS = (
    "x",
    "mean_s",
    "var_s",
    "sample_mean",
    "slln_ratio",
    "normalised",
    "limit",
    "regime_ratio",
    "band_lower_ratio",
    "band_upper_ratio",
)
MOMENT_FIELDS = ("x", "mean_s", "var_s", "predictor_mean", "predictor_var")
BOUND_FIELDS = ("bound", "x", "slack", "relative_slack", "holds")
DISTRIBUTION_FIELDS = ("x", "probability")


def write_scaling_csv(report: ScalingReport, path: Path) -> Path:
    def rows():
        for row in report.rows:
            for q, value in row.quantiles.items():
                yield {
                    "n": row.n,
                    "quantile": q,
                    "max_position": value,
                    "predictor": row.predictor,
                    "lower": row.lower,
                    "upper": row.upper,
                    "ratio": value / row.predictor if row.predictor else None,
                }

    return write_rows(path, SCALING_FIELDS, rows())


def write_trajectories_csv(report: ScalingReport, path: Path) -> Path:
    ns = [r.n for r in report.rows]
    rows = (
        {"replica": k, "n": n, "max_position": m, "position": x}
        for k, (maxima, positions) in enumerate(zip(report.maxima, report.positions))
        for n, m, x in zip(ns, maxima, positions)
    )
    return write_rows(path, TRAJECTORY_FIELDS, rows)


def write_walks_csv(walks: Sequence[WalkStats], path: Path) -> Path:
    rows = (
        {"replica": k, "n": c.n, "max_position": c.max_position, "position": c.position}
        for k, stats in enumerate(walks)
        for c in stats.running_max
    )
    return write_rows(path, TRAJECTORY_FIELDS, rows)


def write_hitting_csv(report: HittingReport, path: Path) -> Path:
    rows = (
        {
            "x": r.x,
            "T": r.t,
            "mc_mean": r.mc_mean,
            "mc_se": r.mc_se,
            "z_score": r.z_score,
            "n_censored": r.n_censored,
            "censored": r.censored,
        }
        for r in report.rows
    )
    return write_rows(path, HITTING_FIELDS, rows)


def write_slln_csv(report: SllnReport, path: Path) -> Path:
    return write_rows(path, SLLN_FIELDS, (r.model_dump() for r in report.rows))


def write_moment_csv(table: MomentTable, path: Path) -> Path:
    return write_rows(path, MOMENT_FIELDS, (r.model_dump() for r in table.rows()))


def write_bounds_csv(report: BoundsReport, path: Path) -> Path:
    rows = (
        {"bound": c.bound.value, "x": c.x, "slack": c.slack, "relative_slack": c.relative_slack, "holds": c.holds}
        for c in report.checks
    )
    return write_rows(path, BOUND_FIELDS, rows)


def write_distribution_csv(distribution: Mapping[int, float], path: Path) -> Path:
    return write_rows(path, DISTRIBUTION_FIELDS, ({"x": x, "probability": p} for x, p in distribution.items()))


def write_summary_json(report: BaseModel, path: Path, exclude: Optional[set] = None) -> Path:
    """JSON summary of a report, stamped with the schema version."""
    data = report.model_dump(mode="json", exclude=exclude)
    data["schema_version"] = SCHEMA_VERSION
    return write_json(path, data)
