import numpy as np
import pytest

from secure_aris.errors import ScenarioError
from secure_aris.scenario import (Placement, dbm_to_watts, default_scenario, desk_scenario,
                                  load_scenario, save_scenario, watts_to_dbm)


def test_default_scenario_constants():
    scenario = default_scenario(seed=1)
    assert scenario.n_fixed == 50 and scenario.n_aris == 50
    assert scenario.n_jam_antennas == 4 and scenario.n_eves == 3
    assert scenario.p_src == pytest.approx(1.0)
    assert scenario.noise_power == pytest.approx(1e-14)
    assert scenario.rician_aris == pytest.approx(10.0)
    assert scenario.pl_ref == pytest.approx(1e-2)
    for pos in scenario.eve_positions:
        assert np.hypot(pos[0] - 300.0, pos[1] - 300.0) <= 50.0 + 1e-9


def test_power_conversions_round_trip():
    assert dbm_to_watts(30.0) == pytest.approx(1.0)
    assert watts_to_dbm(dbm_to_watts(25.0)) == pytest.approx(25.0)


@pytest.mark.parametrize("changes", [
    {"area_bounds": (0.0, 0.0, 0.0, 400.0)},
    {"dst_pos": (500.0, 0.0)},
    {"aris_altitude": 10.0},
    {"p_src": 0.0},
    {"uncertainty_coeff": -0.1},
    {"n_aris": 0},
    {"los_model": "spherical"},
    {"eve_positions": ()},
])
def test_invalid_scenarios_are_rejected(changes):
    with pytest.raises(ScenarioError):
        desk_scenario(seed=1).replace(**changes)


def test_clip_and_contains(desk):
    assert desk.clip((-20.0, 450.0)) == (0.0, 400.0)
    assert desk.contains((0.0, 400.0))
    assert not desk.contains((400.1, 10.0))
    with pytest.raises(ScenarioError):
        desk.check_placement(Placement((-1.0, 3.0)))


def test_placement_parse():
    assert Placement.parse("161,89").xy == (161.0, 89.0)
    with pytest.raises(ScenarioError):
        Placement.parse("161;89")


def test_scenario_file_round_trip_is_lossless(tmp_path, desk):
    scenario = desk.replace(p_src=dbm_to_watts(27.3), los_model="random")
    path = tmp_path / "scenario.env"
    save_scenario(scenario, path)
    assert load_scenario(path) == scenario


def test_missing_key_is_reported(tmp_path, desk):
    path = tmp_path / "scenario.env"
    save_scenario(desk, path)
    text = "\n".join(line for line in path.read_text().splitlines()
                     if not line.startswith("N_ARIS="))
    path.write_text(text)
    with pytest.raises(ScenarioError, match="N_ARIS"):
        load_scenario(path)


def test_positions_3d_puts_jammer_with_aris(desk):
    pos = desk.positions_3d(Placement((100.0, 120.0)))
    np.testing.assert_allclose(pos["A"], [100.0, 120.0, desk.aris_altitude])
    np.testing.assert_allclose(pos["A"], pos["J"])
    assert pos["E"].shape == (desk.n_eves, 3)
