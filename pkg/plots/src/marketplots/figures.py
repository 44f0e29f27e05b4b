"""Render simulation CSV outputs as figures.

Consumes the simulator's CSV schemas only:

  efficiency: policy, step, mean_cum_purchases, stderr
  profile:    policy, item, class_or_total, mean_purchases, quality,
              appeal, avg_quality_rank

No statistics are recomputed here; every plotted number is read from the
CSV and echoed verbatim into a `<output>.values.json` sidecar so renders
can be audited against their inputs.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

POLICY_LABELS = ("SQSSI", "SQNSI", "AQGSI", "AQNSI")
# fixed palette so policies keep their colour across figures
POLICY_COLORS = {
    "SQSSI": "#1f77b4",
    "SQNSI": "#ff7f0e",
    "AQGSI": "#2ca02c",
    "AQNSI": "#d62728",
}
EFFICIENCY_COLUMNS = ("policy", "step", "mean_cum_purchases", "stderr")
PROFILE_COLUMNS = (
    "policy",
    "item",
    "class_or_total",
    "mean_purchases",
    "quality",
    "appeal",
    "avg_quality_rank",
)


class FigureInputError(ValueError):
    """The CSV is missing, empty, malformed, or the filter is invalid."""


@dataclass(frozen=True)
class FigureSpec:
    input_csv: str | Path
    kind: str  # "efficiency" | "profile"
    output_path: str | Path
    policies: tuple[str, ...] = field(default=POLICY_LABELS)
    image_format: str = "svg"

    def __post_init__(self):
        if self.kind not in ("efficiency", "profile"):
            raise FigureInputError(f"kind must be 'efficiency' or 'profile', got {self.kind!r}")
        unknown = [p for p in self.policies if p not in POLICY_LABELS]
        if unknown:
            raise FigureInputError(f"unknown policies {unknown}; expected among {POLICY_LABELS}")
        if not self.policies:
            raise FigureInputError("policy filter must keep at least one policy")
        if self.image_format not in ("svg", "png"):
            raise FigureInputError("image format must be svg or png")


def _read_rows(path: str | Path, required: tuple[str, ...]) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise FigureInputError(f"input CSV not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise FigureInputError(f"empty CSV: {path}")
        missing = [c for c in required if c not in reader.fieldnames]
        if missing:
            raise FigureInputError(f"{path} is missing columns {missing}")
        rows = list(reader)
    if not rows:
        raise FigureInputError(f"no data rows in {path}")
    return rows


def _write_sidecar(output_path: Path, payload: dict) -> Path:
    sidecar = output_path.with_suffix(output_path.suffix + ".values.json")
    sidecar.write_text(json.dumps(payload, indent=2))
    return sidecar


def plot_efficiency(spec: FigureSpec) -> Path:
    """One cumulative-purchases line per policy against the step number."""
    rows = _read_rows(spec.input_csv, EFFICIENCY_COLUMNS)
    series: dict[str, dict[str, list[float]]] = {}
    for row in rows:
        label = row["policy"]
        if label not in spec.policies:
            continue
        entry = series.setdefault(label, {"x": [], "y": [], "stderr": []})
        entry["x"].append(int(row["step"]))
        entry["y"].append(float(row["mean_cum_purchases"]))
        entry["stderr"].append(float(row["stderr"]))
    if not series:
        raise FigureInputError(f"no rows match policies {spec.policies}")

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label in POLICY_LABELS:
        if label not in series:
            continue
        entry = series[label]
        ax.plot(entry["x"], entry["y"], label=label, color=POLICY_COLORS[label], linewidth=1.5)
    ax.set_xlabel("item samplings")
    ax.set_ylabel("mean cumulative purchases")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    out = Path(spec.output_path)
    fig.savefig(out, format=spec.image_format)
    plt.close(fig)
    _write_sidecar(out, {"kind": "efficiency", "input": str(spec.input_csv), "series": series})
    return out


def plot_profile(spec: FigureSpec) -> Path:
    """Per-item purchase bars, one panel per class plus the total.

    Within a class panel items are ordered by increasing class quality;
    the total panel is ordered by the CSV's average-quality rank (worst
    first), which is the same increasing-quality convention.  Exactly
    one policy must remain after filtering.
    """
    rows = _read_rows(spec.input_csv, PROFILE_COLUMNS)
    rows = [r for r in rows if r["policy"] in spec.policies]
    if not rows:
        raise FigureInputError(f"no rows match policies {spec.policies}")
    policies = sorted({r["policy"] for r in rows})
    if len(policies) > 1:
        raise FigureInputError(f"profile plots take one policy at a time, found {policies}")
    policy = policies[0]

    groups: dict[str, list[dict]] = {}
    for row in rows:
        groups.setdefault(row["class_or_total"], []).append(row)
    ordered_names = sorted(g for g in groups if g != "total") + (["total"] if "total" in groups else [])

    panels: dict[str, dict[str, list]] = {}
    for name in ordered_names:
        group = groups[name]
        if name == "total":
            group.sort(key=lambda r: -int(r["avg_quality_rank"]))
        else:
            group.sort(key=lambda r: float(r["quality"]))
        panels[name] = {
            "items": [int(r["item"]) for r in group],
            "mean_purchases": [float(r["mean_purchases"]) for r in group],
            "quality": [float(r["quality"]) for r in group],
        }

    fig, axes = plt.subplots(
        1, len(ordered_names), figsize=(4.0 * len(ordered_names), 4.0), squeeze=False
    )
    for ax, name in zip(axes[0], ordered_names):
        panel = panels[name]
        positions = range(len(panel["items"]))
        ax.bar(positions, panel["mean_purchases"], color=POLICY_COLORS[policy])
        ax.set_title(f"{policy} – {name}")
        ax.set_xlabel("items by increasing quality")
        ax.set_ylabel("mean purchases")
        ax.set_xticks(list(positions))
        ax.set_xticklabels([str(i) for i in panel["items"]], rotation=90, fontsize=6)
    fig.tight_layout()
    out = Path(spec.output_path)
    fig.savefig(out, format=spec.image_format)
    plt.close(fig)
    _write_sidecar(
        out,
        {"kind": "profile", "input": str(spec.input_csv), "policy": policy, "panels": panels},
    )
    return out


def render(spec: FigureSpec) -> Path:
    if spec.kind == "efficiency":
        return plot_efficiency(spec)
    return plot_profile(spec)
