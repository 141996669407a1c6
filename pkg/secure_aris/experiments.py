"""
Experiment Harness
Sweeps and scheme ablations over seeds, written as a versioned CSV table
"""
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from rich.console import Console
from rich.progress import BarColumn, Progress, TextColumn, TimeRemainingColumn

from .channel import ChannelSet, build_channels
from .config import *
from .deploy_rl import DeploymentPolicy, grid_search_deploy, rollout_policy
from .errors import ScenarioError, SecureArisError
from .inner_opt import InnerBudget, bcd_solve
from .scenario import (Placement, Scenario, dbm_to_watts, default_scenario, desk_scenario,
                       draw_eavesdroppers)
from .secrecy_eval import SearchBudget, worst_case_rate

console = Console()

EXPERIMENT_IDS = ("fig-deploy", "sweep-eveloc", "sweep-power", "sweep-elements", "sweep-split",
                  "sweep-uncertainty", "sweep-evecount", "ablation")
SCHEMES = ("robust", "nonrobust", "no-jamming", "no-fixed-ris", "no-aris", "no-aerial",
           "perfect-csi")
PLACEMENT_MODES = ("fixed", "grid", "policy")
RESULT_COLUMNS = ["schema_version", "experiment", "sweep_index", "sweep_value", "scheme", "seed",
                  "nominal_rate", "robust_rate", "worst_case_rate", "x", "y", "status"]


@dataclass
class ExperimentSpec:
    experiment: str
    sweep_values: List[Any] = field(default_factory=lambda: [None])
    seeds: List[int] = field(default_factory=lambda: list(range(EXPERIMENT_SEEDS)))
    schemes: List[str] = field(default_factory=lambda: ["robust"])
    scale: str = "desk"
    overrides: Dict[str, Any] = field(default_factory=dict)
    placement: str = "fixed"
    placement_xy: Tuple[float, float] = (161.0, 89.0)
    grid_step: float = 50.0
    policy_path: Optional[str] = None
    rollout_steps: int = RL_EPOCHS_PER_EPISODE
    total_elements: int = 16
    max_outer: int = BCD_MAX_OUTER
    search_samples: int = WORST_CASE_SAMPLES
    search_steps: int = WORST_CASE_STEPS

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.experiment not in EXPERIMENT_IDS:
            raise ScenarioError(f"unknown experiment '{self.experiment}'")
        if not self.sweep_values:
            raise ScenarioError("sweep_values must not be empty")
        if not self.seeds:
            raise ScenarioError("at least one seed is required")
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad or not self.schemes:
            raise ScenarioError(f"invalid schemes {bad or self.schemes}; choose from {SCHEMES}")
        if self.scale not in ("desk", "full"):
            raise ScenarioError(f"scale must be 'desk' or 'full', got '{self.scale}'")
        if self.placement not in PLACEMENT_MODES:
            raise ScenarioError(f"placement must be one of {PLACEMENT_MODES}")
        if self.placement == "policy" and not self.policy_path:
            raise ScenarioError("placement 'policy' needs policy_path")
        if self.experiment == "sweep-split" and any(not 0 <= float(v) <= 100 for v in self.sweep_values):
            raise ScenarioError("sweep-split values are ARIS shares in percent")

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "ExperimentSpec":
        payload = dict(payload)
        for key in ("schema_version", "kind", "created_at", "description"):
            payload.pop(key, None)
        seeds = payload.get("seeds")
        if isinstance(seeds, int):
            payload["seeds"] = list(range(seeds))
        if "placement_xy" in payload:
            payload["placement_xy"] = tuple(payload["placement_xy"])
        known = set(cls.__dataclass_fields__)
        unknown = set(payload) - known
        if unknown:
            raise ScenarioError(f"unknown experiment keys {sorted(unknown)}")
        return cls(**payload)


def load_spec(path: Union[str, Path]) -> ExperimentSpec:
    """Load a spec file; a bare id such as 'sweep-power' is looked up in EXPERIMENT_SPECS_DIR"""
    path = Path(path)
    if not path.exists():
        shipped = Path(EXPERIMENT_SPECS_DIR) / path.with_suffix(".json").name
        if path.parent != Path(".") or not shipped.exists():
            raise ScenarioError(f"experiment spec not found: {path}")
        path = shipped
    with open(path, "r", encoding="utf-8") as f:
        return ExperimentSpec.from_dict(json.load(f))


def _base_scenario(spec: ExperimentSpec, seed: int) -> Scenario:
    scenario = desk_scenario(seed) if spec.scale == "desk" else default_scenario(seed)
    overrides = dict(spec.overrides)
    for key in ("p_src", "p_jam_max", "noise_power"):
        # overrides may give powers in dBm
        if f"{key}_dbm" in overrides:
            overrides[key] = dbm_to_watts(float(overrides.pop(f"{key}_dbm")))
    if "eve_positions" in overrides:
        overrides["eve_positions"] = tuple(tuple(p) for p in overrides["eve_positions"])
    if "fixed_ris_pos" in overrides:
        overrides["fixed_ris_pos"] = tuple(overrides["fixed_ris_pos"])
    return scenario.replace(**overrides) if overrides else scenario


def apply_sweep(spec: ExperimentSpec, scenario: Scenario, value, seed: int) -> Tuple[Scenario, Dict[str, bool]]:
    """Scenario for one sweep point, plus which surfaces the point switches off"""
    disabled = {"aris": False, "fixed": False}
    kind = spec.experiment
    if kind == "sweep-power":
        scenario = scenario.replace(p_src=dbm_to_watts(float(value)))
    elif kind == "sweep-elements":
        scenario = scenario.replace(n_aris=int(value), n_fixed=int(value))
    elif kind == "sweep-split":
        n_aris = int(round(spec.total_elements * float(value) / 100.0))
        n_fixed = spec.total_elements - n_aris
        disabled = {"aris": n_aris == 0, "fixed": n_fixed == 0}
        scenario = scenario.replace(n_aris=max(n_aris, 1), n_fixed=max(n_fixed, 1))
    elif kind == "sweep-uncertainty":
        scenario = scenario.replace(uncertainty_coeff=float(value))
    elif kind == "sweep-eveloc":
        center = (float(value[0]), float(value[1]))
        scenario = scenario.replace(eve_positions=draw_eavesdroppers(
            scenario.n_eves, center, EAVESDROPPER_RADIUS, seed))
    elif kind == "sweep-evecount":
        scenario = scenario.replace(eve_positions=draw_eavesdroppers(
            int(value), EAVESDROPPER_CENTER, EAVESDROPPER_RADIUS, seed))
    elif kind == "fig-deploy":
        scenario = scenario.replace(fixed_ris_pos=tuple(float(v) for v in value))
    return scenario, disabled


def scheme_channels(scheme: str, channels: ChannelSet) -> Tuple[ChannelSet, ChannelSet, bool]:
    """(design channels, evaluation channels, jamming enabled) for one scheme"""
    if scheme == "nonrobust":
        return channels.without_uncertainty(), channels, True
    if scheme == "perfect-csi":
        exact = channels.without_uncertainty()
        return exact, exact, True
    if scheme == "no-jamming":
        return channels, channels, False
    if scheme == "no-fixed-ris":
        reduced = channels.without_fixed_ris()
        return reduced, reduced, True
    if scheme == "no-aris":
        reduced = channels.without_aris()
        return reduced, reduced, True
    if scheme == "no-aerial":
        reduced = channels.without_aris()
        return reduced, reduced, False
    return channels, channels, True


def _choose_placement(spec: ExperimentSpec, scenario: Scenario, seed: int,
                      budget: InnerBudget) -> Placement:
    if spec.placement == "grid":
        placement, _, _ = grid_search_deploy(scenario, spec.grid_step, seed, workers=1, budget=budget)
        return placement
    if spec.placement == "policy":
        policy = DeploymentPolicy.load(spec.policy_path)
        x0, x1, y0, y1 = scenario.area_bounds
        start = Placement(((x0 + x1) / 2, (y0 + y1) / 2))
        placement, _, _ = rollout_policy(policy, scenario, start, spec.rollout_steps, seed)
        return placement
    return Placement(scenario.clip(spec.placement_xy))


def _row(spec, index, value, scheme, seed, placement=None, **values) -> Dict[str, Any]:
    row = {"schema_version": RESULTS_SCHEMA_VERSION, "experiment": spec.experiment,
           "sweep_index": index, "sweep_value": json.dumps(value), "scheme": scheme,
           "seed": seed, "nominal_rate": np.nan, "robust_rate": np.nan,
           "worst_case_rate": np.nan, "x": np.nan, "y": np.nan, "status": "ok"}
    if placement is not None:
        row["x"], row["y"] = placement.xy
    row.update(values)
    return row


def run_point(spec: ExperimentSpec, index: int, seed: int) -> List[Dict[str, Any]]:
    """Every scheme at one (sweep point, seed); failures become rows with an error status"""
    value = spec.sweep_values[index]
    budget = InnerBudget(max_outer=spec.max_outer)
    search = SearchBudget(samples=spec.search_samples, steps=spec.search_steps, seed=seed)
    try:
        scenario, disabled = apply_sweep(spec, _base_scenario(spec, seed), value, seed)
        placement = _choose_placement(spec, scenario, seed, budget)
        channels = build_channels(scenario, placement, seed)
        if disabled["aris"]:
            channels = channels.without_aris()
        if disabled["fixed"]:
            channels = channels.without_fixed_ris()
    except SecureArisError as e:
        console.print(f"[yellow]Warning: point {index} seed {seed} failed: {e}[/yellow]")
        return [_row(spec, index, value, s, seed, status=f"error: {e}") for s in spec.schemes]

    rows = []
    for scheme in spec.schemes:
        design, evaluate, jamming = scheme_channels(scheme, channels)
        try:
            solution = bcd_solve(design, budget=budget, jamming=jamming, seed=seed)
            report = worst_case_rate(solution.strategy, evaluate, search)
            rows.append(_row(spec, index, value, scheme, seed, placement,
                             nominal_rate=report.nominal_rate,
                             robust_rate=solution.robust_rate,
                             worst_case_rate=report.worst_case_rate))
        except SecureArisError as e:
            console.print(f"[yellow]Warning: {scheme} at point {index} seed {seed} failed: {e}[/yellow]")
            rows.append(_row(spec, index, value, scheme, seed, placement, status=f"error: {e}"))
    return rows


def _run_job(args) -> List[Dict[str, Any]]:
    return run_point(*args)


def write_table(table: pd.DataFrame, path: Union[str, Path]):
    """Write through a temporary file so readers never see a partial table"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    table.to_csv(tmp, index=False)
    os.replace(tmp, path)


def run_experiment(spec: ExperimentSpec, out_dir: Optional[Union[str, Path]] = None,
                   workers: int = EXPERIMENT_WORKERS) -> pd.DataFrame:
    """
    Sweep Runner
    One job per (sweep point, seed); rows are sorted afterwards so the table does not
    depend on the worker count.
    """
    jobs = [(spec, i, seed) for i in range(len(spec.sweep_values)) for seed in spec.seeds]
    rows: List[Dict[str, Any]] = []
    console.print(f"[cyan]🧪 {spec.experiment}: {len(spec.sweep_values)} points x "
                  f"{len(spec.seeds)} seeds x {len(spec.schemes)} schemes[/cyan]")
    with Progress(TextColumn("[progress.description]{task.description}"), BarColumn(),
                  TimeRemainingColumn(), console=console) as progress:
        task = progress.add_task(f"Running {spec.experiment}...", total=len(jobs))
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for job_rows in pool.map(_run_job, jobs):
                    rows.extend(job_rows)
                    progress.advance(task)
        else:
            for job in jobs:
                rows.extend(_run_job(job))
                progress.advance(task)

    order = {s: i for i, s in enumerate(spec.schemes)}
    table = pd.DataFrame(rows, columns=RESULT_COLUMNS)
    table = table.assign(_order=table["scheme"].map(order)) \
                 .sort_values(["sweep_index", "seed", "_order"]).drop(columns="_order") \
                 .reset_index(drop=True)
    if out_dir is not None:
        write_table(table, Path(out_dir) / f"{spec.experiment}.csv")
        console.print(f"💾 Results written to [cyan]{Path(out_dir) / (spec.experiment + '.csv')}[/cyan]")
    fraction = failure_fraction(table)
    if fraction > 0:
        console.print(f"[yellow]⚠️ {fraction:.1%} of runs failed[/yellow]")
    return table


def scheme_ablation(spec: ExperimentSpec, out_dir: Optional[Union[str, Path]] = None,
                    workers: int = EXPERIMENT_WORKERS) -> pd.DataFrame:
    """Run every scheme on the same channels; summarize() gives the per-scheme means"""
    full = ExperimentSpec(**{**spec.__dict__, "schemes": list(SCHEMES)}) \
        if spec.schemes == ["robust"] else spec
    return run_experiment(full, out_dir, workers)


def summarize(table: pd.DataFrame) -> pd.DataFrame:
    ok = table[table["status"] == "ok"]
    return ok.groupby(["sweep_index", "sweep_value", "scheme"], sort=False)[
        ["nominal_rate", "robust_rate", "worst_case_rate"]].mean().reset_index()


def failure_fraction(table: pd.DataFrame) -> float:
    if len(table) == 0:
        return 0.0
    return float((table["status"] != "ok").mean())
