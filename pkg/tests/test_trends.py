"""Desk-scale trend checks over paired seeds; every test here is long running"""
import pytest

from secure_aris.config import EXPERIMENT_WORKERS
from secure_aris.experiments import ExperimentSpec, run_experiment, scheme_ablation

SEEDS = list(range(20))

pytestmark = pytest.mark.slow


def run(experiment, sweep_values, **changes):
    values = dict(experiment=experiment, sweep_values=sweep_values, seeds=SEEDS, max_outer=4,
                  search_samples=500, search_steps=60)
    values.update(changes)
    table = run_experiment(ExperimentSpec(**values), workers=EXPERIMENT_WORKERS)
    return table[table["status"] == "ok"]


def paired_gap(table, column, key, better, worse):
    """Mean over seeds of column[better] - column[worse], seeds where both succeeded"""
    wide = table.pivot_table(index="seed", columns=key, values=column)[[better, worse]].dropna()
    assert len(wide) >= len(SEEDS) // 2
    return float((wide[better] - wide[worse]).mean())


def test_robust_rate_grows_with_source_power():
    table = run("sweep-power", [20, 35])
    assert paired_gap(table, "robust_rate", "sweep_index", 1, 0) > 0


def test_robust_rate_does_not_drop_with_more_elements():
    table = run("sweep-elements", [4, 8])
    assert paired_gap(table, "robust_rate", "sweep_index", 1, 0) >= 0


def test_worst_case_rate_does_not_grow_with_uncertainty():
    table = run("sweep-uncertainty", [0.0, 0.05])
    assert paired_gap(table, "worst_case_rate", "sweep_index", 0, 1) >= 0


@pytest.fixture(scope="module")
def ablation():
    spec = ExperimentSpec(experiment="ablation", seeds=SEEDS, max_outer=4,
                          schemes=["robust", "nonrobust", "no-jamming", "no-aris", "no-aerial"],
                          overrides={"uncertainty_coeff": 0.05},
                          search_samples=500, search_steps=60)
    table = scheme_ablation(spec, workers=EXPERIMENT_WORKERS)
    return table[table["status"] == "ok"]


def test_robust_design_beats_nonrobust_under_the_worst_case(ablation):
    assert paired_gap(ablation, "worst_case_rate", "scheme", "robust", "nonrobust") >= 0


@pytest.mark.parametrize("baseline", ["no-jamming", "no-aris", "no-aerial"])
def test_full_design_beats_each_ablation(ablation, baseline):
    assert paired_gap(ablation, "worst_case_rate", "scheme", "robust", baseline) >= 0
