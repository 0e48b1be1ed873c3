import logging
import time

import numpy as np
import pytest

from app.core.aaa import (
    AAA_ACTIONS,
    AAA_STATES,
    DEAD,
    FIRST_BIN,
    NO_AAA,
    SURGERY,
    SURVEILLANCE,
    build_process,
    build_transition_surgery,
    build_transition_surveillance,
    clinical_policy_55,
    params_horizon,
    reward,
    threshold_policy,
)
from app.core.errors import HorizonError, InvalidParametersError, UnknownBinError
from app.core.mdp import Horizon, evaluate_policy, solve_backward_induction, validate_process
from app.models.enums import BIN_LABELS, AaaAction, AaaState
from conftest import random_params, uniform_params

BIN_INDICES = range(FIRST_BIN, AAA_STATES.size)


def test_state_and_action_order():
    assert AAA_STATES.size == 14
    assert AAA_STATES.labels[:3] == ("dead", "no-AAA", "<30mm")
    assert AAA_STATES.labels[-1] == ">80mm"
    assert AAA_ACTIONS.labels == (AaaAction.CONTINUE_SURVEILLANCE.value, AaaAction.PERFORM_SURGERY.value)
    assert (SURVEILLANCE, SURGERY) == (0, 1)


def test_surveillance_row_composes_rupture_death_and_growth():
    params = uniform_params(rupture=0.1, reach=0.5, emergency=0.2, background=0.05, elective=0.06)
    kernel = build_transition_surveillance(params, 70)
    row = kernel[AAA_STATES.index("45-50mm")]
    assert row[NO_AAA] == pytest.approx(0.04, abs=1e-12)
    assert row[DEAD] == pytest.approx(0.105, abs=1e-12)
    assert row[AAA_STATES.index("45-50mm")] == pytest.approx(0.855, abs=1e-12)
    assert row.sum() == pytest.approx(1.0, abs=1e-12)


def test_surveillance_row_without_hazards_is_growth_row(illustrative_params):
    params = uniform_params(rupture=0.0, background=0.0, growth=illustrative_params.growth)
    kernel = build_transition_surveillance(params, 65)
    growth = params.growth_matrix()
    for b, i in enumerate(BIN_INDICES):
        np.testing.assert_allclose(kernel[i, FIRST_BIN:], growth[b], rtol=0, atol=1e-15)
        assert kernel[i, DEAD] == 0.0 and kernel[i, NO_AAA] == 0.0


def test_certain_rupture_without_hospital_is_fatal():
    kernel = build_transition_surveillance(uniform_params(rupture=1.0, reach=0.0), 80)
    for i in BIN_INDICES:
        assert kernel[i, DEAD] == 1.0


@pytest.mark.parametrize("elective, dead, cured", [(0.0, 0.0, 1.0), (1.0, 1.0, 0.0), (0.03, 0.03, 0.97)])
def test_surgery_rows(elective, dead, cured):
    params = uniform_params(elective=elective, background=0.0 if elective == 0.0 else 0.02)
    kernel = build_transition_surgery(params, 90)
    for i in BIN_INDICES:
        assert kernel[i, DEAD] == pytest.approx(dead, abs=1e-15)
        assert kernel[i, NO_AAA] == pytest.approx(cured, abs=1e-15)
    surveillance = build_transition_surveillance(params, 90)
    np.testing.assert_array_equal(kernel[:FIRST_BIN], surveillance[:FIRST_BIN])


def test_every_row_is_stochastic_and_dead_absorbs(illustrative_params):
    for age in (65, 90, 119):
        for kernel in (
            build_transition_surveillance(illustrative_params, age),
            build_transition_surgery(illustrative_params, age),
        ):
            np.testing.assert_allclose(kernel.sum(axis=1), 1.0, rtol=0, atol=1e-9)
            assert kernel[DEAD, DEAD] == 1.0


def test_transition_rejects_ages_and_invalid_parameters(illustrative_params):
    with pytest.raises(HorizonError):
        build_transition_surveillance(illustrative_params, 120)
    with pytest.raises(HorizonError):
        build_transition_surgery(illustrative_params, 64)
    broken = illustrative_params.model_copy(update={"reach_hospital_prob": 1.5})
    with pytest.raises(InvalidParametersError):
        build_transition_surveillance(broken, 70)


def test_reward_is_alive_indicator_times_qaly_weight(illustrative_params):
    c70 = illustrative_params.qaly_weight[70]
    assert reward(AaaState.DEAD, 70, illustrative_params) == 0.0
    assert reward(AaaState.NO_AAA, 70, illustrative_params) == c70
    assert reward("50-55mm", 70, illustrative_params) == reward("no-AAA", 70, illustrative_params)
    assert reward(NO_AAA, 120, illustrative_params) == illustrative_params.qaly_weight[120]
    with pytest.raises(HorizonError):
        reward(NO_AAA, 121, illustrative_params)


def test_build_process_shape(illustrative_params):
    process = build_process(illustrative_params)
    assert process.horizon == Horizon(65, 120)
    assert process.horizon.length == 55
    assert process.states.size == 14
    assert process.transitions.shape == (55, 2, 14, 14)
    assert validate_process(process).ok
    assert process.terminal_reward[DEAD] == 0.0
    assert process.terminal_reward[NO_AAA] == illustrative_params.qaly_weight[120]


def test_build_process_with_zero_terminal(illustrative_params):
    process = build_process(illustrative_params, terminal="zero")
    assert np.all(process.terminal_reward == 0.0)


def test_build_process_is_valid_for_random_sets(rng):
    for _ in range(10):
        assert validate_process(build_process(random_params(rng))).ok


def test_build_process_warns_when_surgery_undercuts_background(caplog):
    with caplog.at_level(logging.WARNING, logger="aaa_mdp"):
        build_process(uniform_params(background=0.05, elective=0.01))
    assert "Elective mortality below background mortality" in caplog.text


def test_clinical_policy_55():
    policy = clinical_policy_55(Horizon(65, 120))
    for age in (65, 100, 119):
        assert policy.action(age, AAA_STATES.index("50-55mm")) == SURVEILLANCE
        assert policy.action(age, AAA_STATES.index("55-60mm")) == SURGERY
        assert policy.action(age, DEAD) == SURVEILLANCE
        assert policy.action(age, NO_AAA) == SURVEILLANCE
    assert int(np.sum(policy.rule[0] == SURGERY)) == 6
    assert policy.missing_entries() == []


def test_threshold_policy_rejects_non_bins():
    with pytest.raises(UnknownBinError):
        threshold_policy(Horizon(65, 120), "no-AAA")
    with pytest.raises(UnknownBinError):
        threshold_policy(Horizon(65, 120), "85-90mm")


def test_dead_is_worth_nothing_under_any_policy(illustrative_params):
    process = build_process(illustrative_params)
    for first in ("<30mm", "55-60mm", ">80mm"):
        values = evaluate_policy(process, threshold_policy(process.horizon, first))
        assert np.all(values.values[:, DEAD] == 0.0)


def test_no_aaa_dominates_diameter_bins(illustrative_params, rng):
    for params in [illustrative_params] + [random_params(rng) for _ in range(10)]:
        _, values = solve_backward_induction(build_process(params))
        bins = values.values[:, FIRST_BIN:]
        assert np.all(values.values[:, NO_AAA][:, None] >= bins - 1e-12)


@pytest.mark.parametrize("terminal", ["qaly", "zero"])
def test_free_surgery_is_always_taken(terminal):
    rupture = {label: 0.001 * (i + 1) for i, label in enumerate(BIN_LABELS)}
    params = uniform_params(rupture=rupture, elective=0.0, background=0.02, emergency=0.4, reach=0.6)
    policy, _ = solve_backward_induction(build_process(params, terminal))
    # Last decision epoch excluded: with a zero terminal reward both actions tie there
    assert np.all(policy.rule[:-1, FIRST_BIN:] == SURGERY)


def test_zero_rupture_never_operates(illustrative_params):
    params = illustrative_params.model_copy(update={"rupture_prob": {label: 0.0 for label in BIN_LABELS}})
    policy, _ = solve_backward_induction(build_process(params))
    assert np.all(policy.rule[:, FIRST_BIN:] == SURVEILLANCE)

    flat = uniform_params(rupture=0.0, background=0.02, elective=0.03)
    policy, _ = solve_backward_induction(build_process(flat))
    assert np.all(policy.rule[:, FIRST_BIN:] == SURVEILLANCE)


def test_optimal_policy_dominates_clinical_policy(rng):
    started = time.perf_counter()
    for _ in range(50):
        params = random_params(rng)
        process = build_process(params)
        _, v_star = solve_backward_induction(process)
        v_55 = evaluate_policy(process, clinical_policy_55(params_horizon(params)))
        assert np.all(v_star.values >= v_55.values - 1e-12)
        assert np.all(v_star.values >= 0.0)
    assert time.perf_counter() - started < 5.0


def test_illustrative_solve_is_fast(illustrative_params):
    process = build_process(illustrative_params)
    solve_backward_induction(process)
    started = time.perf_counter()
    solve_backward_induction(process)
    assert time.perf_counter() - started < 0.1
