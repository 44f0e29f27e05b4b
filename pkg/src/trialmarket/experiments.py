"""Benchmark market generators and the figure-style experiment driver.

Four two-class schemes probe how the appeal/quality relationship shapes
policy performance (classes always have equal weight):

1. independent uniform qualities per class, appeals = 1 - quality;
2. same qualities, appeals proportional to quality with +-20% noise;
3. class 2's qualities near-opposite of class 1's, appeals = 1 - quality;
4. scheme-3 qualities with scheme-2 appeals.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .engine import monte_carlo, write_efficiency_csv, write_profile_csv
from .model import InvalidInstanceError, MarketConfig
from .policies import EXPERIMENT_POLICIES, PolicySpec

APPEAL_FLOOR = 1e-9
DEFAULT_VISIBILITY_EXPONENT = 0.8
SCHEME_IDS = (1, 2, 3, 4)
POLICY_BY_LABEL = {p.label: p for p in EXPERIMENT_POLICIES}


def default_visibilities(num_items: int, exponent: float = DEFAULT_VISIBILITY_EXPONENT) -> np.ndarray:
    """Power-law position weights (1/position)^exponent, top position = 1."""
    return (1.0 / np.arange(1, num_items + 1)) ** exponent


@dataclass(frozen=True)
class SchemeSpec:
    scheme: int
    num_items: int = 50
    seed: int = 0
    visibility_exponent: float = DEFAULT_VISIBILITY_EXPONENT
    no_trial_mass: float = 0.0
    # Reads the correlated-appeal rule as 0.8*q plus uniform(-0.4, 0.4)
    # instead of q*(0.8 + 0.4*uniform); kept selectable because the two
    # plausible readings differ.
    scheme2_additive_noise: bool = False

    def __post_init__(self):
        if self.scheme not in SCHEME_IDS:
            raise InvalidInstanceError(f"scheme must be one of {SCHEME_IDS}")
        if self.num_items < 1:
            raise InvalidInstanceError("need at least one item")


def _correlated_appeals(qualities: np.ndarray, rng: np.random.Generator, additive: bool) -> np.ndarray:
    noise = rng.random(qualities.shape)
    if additive:
        appeals = 0.8 * qualities + (0.8 * noise - 0.4)
    else:
        appeals = qualities * (0.8 + 0.4 * noise)
    return np.maximum(appeals, APPEAL_FLOOR)


def generate_scheme(spec: SchemeSpec) -> MarketConfig:
    """Deterministic market instance for a scheme id and seed."""
    rng = np.random.default_rng(spec.seed)
    n = spec.num_items
    if spec.scheme in (1, 2):
        qualities = rng.random((n, 2))
    else:
        q1 = rng.random(n)
        q2 = np.clip(1.0 - q1 + 0.01 * rng.random(n), 0.0, 1.0)
        qualities = np.stack([q1, q2], axis=1)
    if spec.scheme in (1, 3):
        appeals = np.maximum(1.0 - qualities, APPEAL_FLOOR)
    else:
        appeals = _correlated_appeals(qualities, rng, spec.scheme2_additive_noise)
    return MarketConfig(
        appeals=appeals,
        qualities=qualities,
        visibilities=default_visibilities(n, spec.visibility_exponent),
        class_weights=np.array([0.5, 0.5]),
        no_trial_mass=spec.no_trial_mass,
    )


@dataclass(frozen=True)
class ExperimentScale:
    num_items: int = 20
    horizon: int = 5000
    replications: int = 10000


def parse_figure_id(figure: str) -> tuple[str, int, str | None]:
    """Split a figure id into (kind, scheme, policy label).

    Efficiency figures: ``me-scheme<1-4>``.  Purchase profiles:
    ``profiles-scheme<1-4>-<policy>`` with policy one of sqssi, sqnsi,
    aqgsi, aqnsi.
    """
    parts = figure.lower().split("-")
    try:
        if parts[0] == "me" and len(parts) == 2:
            scheme = int(parts[1].removeprefix("scheme"))
            if scheme in SCHEME_IDS:
                return "efficiency", scheme, None
        if parts[0] == "profiles" and len(parts) == 3:
            scheme = int(parts[1].removeprefix("scheme"))
            label = parts[2].upper()
            if scheme in SCHEME_IDS and label in POLICY_BY_LABEL:
                return "profile", scheme, label
    except ValueError:
        pass
    raise InvalidInstanceError(f"unknown figure id {figure!r}")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_figure_experiment(
    figure: str,
    scale: ExperimentScale,
    seed: int,
    out_dir: str | Path,
    threads: int | None = None,
    visibility_exponent: float = DEFAULT_VISIBILITY_EXPONENT,
    no_trial_mass: float = 0.0,
    checkpoints: np.ndarray | None = None,
) -> dict:
    """Run one figure's policies and write its CSV plus a manifest.

    Returns the manifest dictionary.  The market instance is generated
    from ``seed``, which also seeds the simulation streams.
    """
    kind, scheme, label = parse_figure_id(figure)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = SchemeSpec(
        scheme=scheme,
        num_items=scale.num_items,
        seed=seed,
        visibility_exponent=visibility_exponent,
        no_trial_mass=no_trial_mass,
    )
    config = generate_scheme(spec)
    policies = list(EXPERIMENT_POLICIES) if kind == "efficiency" else [POLICY_BY_LABEL[label]]
    result = monte_carlo(
        config,
        policies,
        horizon=scale.horizon,
        replications=scale.replications,
        base_seed=seed,
        checkpoints=checkpoints,
        threads=threads,
    )
    paths = {}
    if kind == "efficiency":
        csv_path = out / f"{figure}_efficiency.csv"
        write_efficiency_csv(csv_path, result.curves)
        paths["efficiency"] = csv_path
    else:
        csv_path = out / f"{figure}_profile.csv"
        write_profile_csv(csv_path, result.profiles, config)
        paths["profile"] = csv_path
    manifest = {
        "figure": figure,
        "tool_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "seed": seed,
        "scale": {
            "num_items": scale.num_items,
            "horizon": scale.horizon,
            "replications": scale.replications,
        },
        "policies": [p.label for p in policies],
        "config": config.to_json_dict(),
        "outputs": {name: str(p) for name, p in paths.items()},
        "checksums": {name: _sha256(p) for name, p in paths.items()},
    }
    manifest_path = out / f"{figure}_manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2))
    return manifest
