import dataclasses

import numpy as np
import pytest

from secure_aris.channel import cascade, perturb
from secure_aris.errors import OracleBudgetError
from secure_aris.inner_opt import TransmitStrategy
from secure_aris.secrecy_eval import (WORST_CASE_LABEL, SearchBudget, _EveErrorModel,
                                      exhaustive_oracle, rate_from_sinr, secrecy_rate,
                                      sinr_destination, sinr_eavesdroppers, worst_case_rate)
from tests.conftest import random_channels, random_complex, random_raw

BUDGET = SearchBudget(samples=300, seeds=4, steps=40, seed=0)


def random_strategy(rng, cs, power=1.0):
    return TransmitStrategy.random(cs.n_aris, cs.n_fixed, cs.n_jam, power, rng)


def test_rate_formula_by_hand(rng):
    cs = random_channels(rng, n_a=2, n_r=2, m=1, k=2)
    strategy = random_strategy(rng, cs)
    s_D = np.vdot(strategy.theta_A, cs.h_SAD) + np.vdot(strategy.theta_R, cs.h_SRD)
    c_D = cs.h_JD + cs.h_JRD.conj().T @ strategy.theta_R
    gamma_D = abs(s_D) ** 2 / (strategy.Z[0, 0].real * abs(c_D[0]) ** 2 + 1.0)
    assert sinr_destination(strategy, cs) == pytest.approx(gamma_D, rel=1e-12)

    gamma_k = []
    for k in range(2):
        s = np.vdot(strategy.theta_A, cs.h_SAk[k]) + np.vdot(strategy.theta_R, cs.h_SRk[k])
        c = cs.h_Jk[k] + cs.H_JRk[k].conj().T @ strategy.theta_R
        gamma_k.append(abs(s) ** 2 / (strategy.Z[0, 0].real * abs(c[0]) ** 2 + 1.0))
    np.testing.assert_allclose(sinr_eavesdroppers(strategy, cs), gamma_k, rtol=1e-12)
    expected = max(0.0, np.log2(1 + gamma_D) - np.log2(1 + max(gamma_k)))
    assert secrecy_rate(strategy, cs) == pytest.approx(expected, abs=1e-12)


def test_rate_is_clipped_at_zero():
    assert rate_from_sinr(0.5, np.array([3.0, 0.1])) == 0.0
    assert rate_from_sinr(3.0, np.array([0.0])) == pytest.approx(2.0)


def test_estimates_versus_truth(rng):
    cs = perturb(random_channels(rng), 0.2, seed=4)
    strategy = random_strategy(rng, cs)
    assert not np.allclose(sinr_eavesdroppers(strategy, cs, use_true=True),
                           sinr_eavesdroppers(strategy, cs, use_true=False))


def test_worst_case_never_exceeds_nominal(rng):
    for seed in range(5):
        cs = perturb(random_channels(rng), 0.1, seed=seed)
        strategy = random_strategy(rng, cs)
        report = worst_case_rate(strategy, cs, BUDGET)
        assert report.worst_case_rate <= report.nominal_rate + 1e-12
        assert np.all(report.worst_gamma_k >= report.gamma_k - 1e-12)
        assert report.label == WORST_CASE_LABEL


def test_worst_case_error_stays_in_the_balls(rng):
    cs = perturb(random_channels(rng), 0.1, seed=9)
    report = worst_case_rate(random_strategy(rng, cs), cs, BUDGET)
    radii = {"SAk": cs.r_SAk, "SRk": cs.r_SRk, "Jk": cs.r_Jk, "JRk": cs.r_JRk}
    for name, error in report.worst_error.items():
        norms = np.linalg.norm(error.reshape(cs.n_eves, -1), axis=1)
        assert np.all(norms <= radii[name] * (1 + 1e-9))


def test_zero_radius_worst_case_is_nominal(rng):
    cs = random_channels(rng)
    report = worst_case_rate(random_strategy(rng, cs), cs, BUDGET)
    assert report.worst_case_rate == report.nominal_rate


def test_search_finds_a_bad_error(rng):
    # a sizeable ball around a weak eavesdropper must raise its SINR
    cs = perturb(random_channels(rng), 0.5, seed=2)
    report = worst_case_rate(random_strategy(rng, cs), cs, BUDGET)
    assert np.all(report.worst_gamma_k > report.gamma_k)


def test_wirtinger_gradient_matches_finite_differences(rng):
    cs = perturb(random_channels(rng, m=2), 0.3, seed=1)
    strategy = random_strategy(rng, cs)
    model = _EveErrorModel(strategy, cs, 1)
    point = {name: 0.3 * v[None] for name, v in model.true_error.items()}
    grad = model.gradient(point)
    step = 1e-6
    for name in point:
        direction = random_complex(rng, *point[name].shape)
        up = {k: v + (step * direction if k == name else 0) for k, v in point.items()}
        down = {k: v - (step * direction if k == name else 0) for k, v in point.items()}
        numeric = (model.gamma(up) - model.gamma(down))[0] / (2 * step)
        analytic = 2 * np.real(np.vdot(grad[name], direction))
        assert numeric == pytest.approx(analytic, rel=1e-5, abs=1e-9)


def test_report_serialises(rng):
    cs = perturb(random_channels(rng), 0.1, seed=3)
    payload = worst_case_rate(random_strategy(rng, cs), cs, BUDGET).to_dict()
    assert set(payload) >= {"label", "nominal_rate", "worst_case_rate", "worst_error"}


def test_oracle_refuses_oversized_grids(rng):
    cs = random_channels(rng, n_a=3, n_r=4)
    with pytest.raises(OracleBudgetError):
        exhaustive_oracle(cs, phase_levels=64, power_levels=10)


def test_oracle_rate_matches_its_strategy(rng):
    cs = random_channels(rng, n_a=2, n_r=2, m=1, k=1)
    strategy, rate = exhaustive_oracle(cs, phase_levels=4, power_levels=3)
    assert strategy.is_feasible(cs.p_jam_max)
    assert secrecy_rate(strategy, cs) == pytest.approx(rate, rel=1e-10, abs=1e-12)
    silent = TransmitStrategy(theta_A=np.ones(2, dtype=complex), theta_R=np.ones(2, dtype=complex),
                              Z=np.zeros((1, 1), dtype=complex))
    assert rate >= secrecy_rate(silent, cs) - 1e-12


def test_oracle_refinement_never_hurts(rng):
    cs = random_channels(rng, n_a=2, n_r=1, m=2, k=2)
    _, coarse = exhaustive_oracle(cs, phase_levels=4, power_levels=5)
    _, fine = exhaustive_oracle(cs, phase_levels=8, power_levels=5)
    assert fine >= coarse - 1e-12


def test_oracle_single_phase_alignment(rng):
    raw = random_raw(rng, n_a=1, n_r=1, m=1, k=1)
    raw = dataclasses.replace(raw, h_Ak=np.zeros((1, 1), dtype=complex),
                              h_Rk=np.zeros((1, 1), dtype=complex),
                              h_Jk=np.zeros((1, 1), dtype=complex))
    cs = cascade(raw)
    levels = 64
    _, rate = exhaustive_oracle(cs, phase_levels=levels, power_levels=4)
    a, b = abs(cs.h_SAD[0]), abs(cs.h_SRD[0])
    best = np.log2(1 + (a + b) ** 2)
    # relative phase is quantised to 2 pi / levels
    floor = np.log2(1 + (a + b) ** 2 * np.cos(np.pi / levels) ** 2)
    assert floor - 1e-12 <= rate <= best + 1e-12


def test_oracle_jamming_is_isotropic_for_several_antennas(rng):
    cs = random_channels(rng, n_a=2, n_r=1, m=3, k=2)
    strategy, _ = exhaustive_oracle(cs, phase_levels=4, power_levels=4)
    power = np.trace(strategy.Z).real
    np.testing.assert_allclose(strategy.Z, (power / 3) * np.eye(3), atol=1e-14)
