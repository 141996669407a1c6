import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from secure_aris.errors import ScenarioError
from secure_aris.experiments import (RESULT_COLUMNS, SCHEMES, ExperimentSpec, _base_scenario,
                                     apply_sweep, failure_fraction, load_spec, run_experiment,
                                     run_point, scheme_channels, summarize, write_table)
from secure_aris.channel import perturb
from secure_aris.scenario import desk_scenario
from tests.conftest import random_channels

SPEC_DIR = Path(__file__).resolve().parent.parent / "experiments"
TINY = {"n_aris": 2, "n_fixed": 2, "n_jam_antennas": 1}


def quick_spec(**changes):
    values = dict(experiment="sweep-uncertainty", sweep_values=[0.01], seeds=[0],
                  overrides=dict(TINY), max_outer=1, search_samples=50, search_steps=5)
    values.update(changes)
    return ExperimentSpec(**values)


@pytest.mark.parametrize("path", sorted(SPEC_DIR.glob("*.json")), ids=lambda p: p.stem)
def test_shipped_specs_load(path):
    spec = load_spec(path)
    assert spec.experiment in path.stem


def test_spec_from_dict():
    spec = ExperimentSpec.from_dict({"experiment": "sweep-power", "description": "x",
                                     "sweep_values": [20, 30], "seeds": 3,
                                     "placement_xy": [10, 20]})
    assert spec.seeds == [0, 1, 2]
    assert spec.placement_xy == (10, 20)
    with pytest.raises(ScenarioError):
        ExperimentSpec.from_dict({"experiment": "sweep-power", "colour": "red"})


@pytest.mark.parametrize("changes", [
    {"experiment": "sweep-nothing"},
    {"sweep_values": []},
    {"seeds": []},
    {"schemes": ["robust", "psychic"]},
    {"scale": "huge"},
    {"placement": "random"},
    {"placement": "policy"},
    {"experiment": "sweep-split", "sweep_values": [120]},
])
def test_invalid_specs(changes):
    with pytest.raises(ScenarioError):
        quick_spec(**changes)


def test_power_overrides_in_dbm():
    spec = quick_spec(overrides={"p_jam_max_dbm": 30.0, "n_aris": 3})
    scenario = _base_scenario(spec, seed=1)
    assert scenario.p_jam_max == pytest.approx(1.0)
    assert scenario.n_aris == 3


def test_split_sweep_disables_empty_surfaces():
    spec = quick_spec(experiment="sweep-split", sweep_values=[0, 50, 100], total_elements=16)
    base = desk_scenario(1)
    scenario, disabled = apply_sweep(spec, base, 0, 1)
    assert disabled == {"aris": True, "fixed": False}
    assert (scenario.n_aris, scenario.n_fixed) == (1, 16)
    scenario, disabled = apply_sweep(spec, base, 50, 1)
    assert disabled == {"aris": False, "fixed": False}
    assert (scenario.n_aris, scenario.n_fixed) == (8, 8)
    _, disabled = apply_sweep(spec, base, 100, 1)
    assert disabled == {"aris": False, "fixed": True}


def test_other_sweeps():
    base = desk_scenario(2)
    scenario, _ = apply_sweep(quick_spec(experiment="sweep-power"), base, 30, 2)
    assert scenario.p_src == pytest.approx(1.0)
    scenario, _ = apply_sweep(quick_spec(experiment="sweep-elements"), base, 4, 2)
    assert (scenario.n_aris, scenario.n_fixed) == (4, 4)
    scenario, _ = apply_sweep(quick_spec(experiment="sweep-uncertainty"), base, 0.05, 2)
    assert scenario.uncertainty_coeff == 0.05
    scenario, _ = apply_sweep(quick_spec(experiment="sweep-evecount"), base, 3, 2)
    assert scenario.n_eves == 3
    scenario, _ = apply_sweep(quick_spec(experiment="sweep-eveloc"), base, [200, 250], 2)
    offsets = np.array(scenario.eve_positions) - [200, 250]
    assert np.all(np.linalg.norm(offsets, axis=1) <= 50.0)


def test_scheme_channels(rng):
    channels = perturb(random_channels(rng), 0.1, seed=1)
    design, evaluate, jamming = scheme_channels("nonrobust", channels)
    assert not design.has_uncertainty and evaluate is channels and jamming
    design, evaluate, jamming = scheme_channels("perfect-csi", channels)
    assert design is evaluate and not design.has_uncertainty
    _, _, jamming = scheme_channels("no-jamming", channels)
    assert not jamming
    design, _, jamming = scheme_channels("no-aerial", channels)
    assert not design.aris_enabled and not jamming
    design, _, _ = scheme_channels("no-fixed-ris", channels)
    assert not design.fixed_ris_enabled
    np.testing.assert_array_equal(design.h_SRD, 0)
    assert scheme_channels("robust", channels)[0] is channels
    assert set(SCHEMES) >= {"robust", "nonrobust"}


def test_failed_point_becomes_error_rows():
    spec = quick_spec(overrides={"n_jam_antennas": 0}, schemes=["robust", "no-jamming"])
    rows = run_point(spec, 0, 0)
    assert len(rows) == 2
    assert all(row["status"].startswith("error") for row in rows)
    assert all(np.isnan(row["robust_rate"]) for row in rows)


def test_run_experiment_writes_a_sorted_table(tmp_path):
    spec = quick_spec(seeds=[1, 0], schemes=["no-jamming", "robust"])
    table = run_experiment(spec, out_dir=tmp_path, workers=1)
    assert list(table.columns) == RESULT_COLUMNS
    assert list(table["seed"]) == [0, 0, 1, 1]
    assert list(table["scheme"]) == ["no-jamming", "robust"] * 2
    ok = table[table["status"] == "ok"]
    assert np.all(ok["worst_case_rate"] <= ok["nominal_rate"] + 1e-9)
    written = pd.read_csv(tmp_path / "sweep-uncertainty.csv", dtype={"sweep_value": str})
    assert len(written) == 4
    assert json.loads(written["sweep_value"][0]) == 0.01
    assert not list(tmp_path.glob("*.tmp"))


def test_summary_and_failure_fraction():
    table = pd.DataFrame({
        "sweep_index": [0, 0, 0, 0], "sweep_value": ["1", "1", "1", "1"],
        "scheme": ["robust", "robust", "nonrobust", "nonrobust"],
        "nominal_rate": [1.0, 3.0, 2.0, np.nan], "robust_rate": [0.5, 1.5, 1.0, np.nan],
        "worst_case_rate": [0.8, 1.2, 0.4, np.nan], "status": ["ok", "ok", "ok", "error: x"]})
    summary = summarize(table)
    robust = summary[summary["scheme"] == "robust"].iloc[0]
    assert robust["nominal_rate"] == pytest.approx(2.0)
    assert robust["worst_case_rate"] == pytest.approx(1.0)
    assert len(summary) == 2
    assert failure_fraction(table) == pytest.approx(0.25)
    assert failure_fraction(table.iloc[:0]) == 0.0


def test_write_table_replaces_atomically(tmp_path):
    path = tmp_path / "nested" / "out.csv"
    write_table(pd.DataFrame({"a": [1]}), path)
    write_table(pd.DataFrame({"a": [2, 3]}), path)
    assert list(pd.read_csv(path)["a"]) == [2, 3]
    assert not list(path.parent.glob("*.tmp"))


def test_bare_ids_resolve_to_shipped_specs(monkeypatch):
    monkeypatch.setattr("secure_aris.experiments.EXPERIMENT_SPECS_DIR", str(SPEC_DIR))
    assert load_spec("sweep-power").experiment == "sweep-power"
    with pytest.raises(ScenarioError):
        load_spec("sweep-nothing")
