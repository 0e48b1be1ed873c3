"""
AAA treatment model: 14 states (dead, no-AAA, twelve 5 mm diameter bins), two
actions, one-year epochs, QALY rewards.

Within a surveillance year, for a diameter bin d at age k:
  rupture (rho):   reach hospital (h) and survive emergency repair (1 - m_em) -> no-AAA, else -> dead
  no rupture:      background death (beta) -> dead, else grow along g(d -> .)
Surgery on a diameter bin resolves within the year: dead with m_el, no-AAA otherwise.
Surgery on dead or no-AAA is a no-op.
"""
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from app.core.config import settings
from app.core.errors import HorizonError, InvalidParametersError, UnknownBinError
from app.core.logging import logger
from app.core.mdp import ActionSet, DecisionProcess, Horizon, Policy, StateSpace
from app.models.enums import BIN_LABELS, DIAMETER_BINS, AaaAction, AaaState, ParameterFamily, TerminalMode
from app.models.parameters import ParameterSet
from app.services.param_io import validate_parameters

AAA_STATES = StateSpace(tuple(state.value for state in AaaState))
AAA_ACTIONS = ActionSet(tuple(action.value for action in AaaAction))

DEAD = AAA_STATES.index(AaaState.DEAD.value)
NO_AAA = AAA_STATES.index(AaaState.NO_AAA.value)
FIRST_BIN = AAA_STATES.index(DIAMETER_BINS[0].value)
SURVEILLANCE = AAA_ACTIONS.index(AaaAction.CONTINUE_SURVEILLANCE.value)
SURGERY = AAA_ACTIONS.index(AaaAction.PERFORM_SURGERY.value)


@dataclass(frozen=True, eq=False)
class _ModelArrays:
    """ParameterSet flattened into numpy arrays over decision ages."""
    horizon: Horizon
    rupture: np.ndarray  # (B,)
    growth: np.ndarray  # (B, B)
    reach_hospital: float
    qaly: np.ndarray  # (T + 1,) ages M..N
    background: np.ndarray  # (T,)
    elective: np.ndarray  # (T,)
    emergency: np.ndarray  # (T,)


def params_horizon(params: ParameterSet) -> Horizon:
    return Horizon(params.start_age, params.max_age)


def _require_valid(params: ParameterSet) -> None:
    report = validate_parameters(params)
    if not report.ok:
        raise InvalidParametersError(report)


def _arrays(params: ParameterSet) -> _ModelArrays:
    horizon = params_horizon(params)
    ages = horizon.epochs
    return _ModelArrays(
        horizon=horizon,
        rupture=params.rupture_vector(),
        growth=params.growth_matrix(),
        reach_hospital=params.reach_hospital_prob,
        qaly=params.age_vector(ParameterFamily.QALY_WEIGHT, range(params.start_age, params.max_age + 1)),
        background=params.age_vector(ParameterFamily.BACKGROUND_MORTALITY, ages),
        elective=params.age_vector(ParameterFamily.ELECTIVE_MORTALITY, ages),
        emergency=params.age_vector(ParameterFamily.EMERGENCY_MORTALITY, ages),
    )


def _surveillance_kernels(arrays: _ModelArrays) -> np.ndarray:
    n_epochs, n_states = arrays.horizon.length, AAA_STATES.size
    beta = arrays.background[:, None]  # (T, 1)
    rupture = arrays.rupture[None, :]  # (1, B)
    rescued = arrays.reach_hospital * (1.0 - arrays.emergency)[:, None]  # (T, 1)

    kernels = np.zeros((n_epochs, n_states, n_states))
    kernels[:, DEAD, DEAD] = 1.0
    kernels[:, NO_AAA, DEAD] = arrays.background
    kernels[:, NO_AAA, NO_AAA] = 1.0 - arrays.background
    kernels[:, FIRST_BIN:, NO_AAA] = rupture * rescued
    kernels[:, FIRST_BIN:, DEAD] = rupture * (1.0 - rescued) + (1.0 - rupture) * beta
    survive = (1.0 - rupture) * (1.0 - beta)  # (T, B)
    kernels[:, FIRST_BIN:, FIRST_BIN:] = survive[:, :, None] * arrays.growth[None, :, :]
    return kernels


def _surgery_kernels(arrays: _ModelArrays, surveillance: np.ndarray) -> np.ndarray:
    kernels = surveillance.copy()
    kernels[:, FIRST_BIN:, :] = 0.0
    kernels[:, FIRST_BIN:, DEAD] = arrays.elective[:, None]
    kernels[:, FIRST_BIN:, NO_AAA] = 1.0 - arrays.elective[:, None]
    return kernels


def _decision_offset(params: ParameterSet, age: int) -> int:
    if not params.start_age <= age < params.max_age:
        raise HorizonError(f"age {age} outside decision ages {params.start_age}..{params.max_age - 1}")
    return age - params.start_age


def build_transition_surveillance(params: ParameterSet, age: int) -> np.ndarray:
    """Row-stochastic 14x14 kernel for continue-surveillance at `age`."""
    _require_valid(params)
    t = _decision_offset(params, age)
    return _surveillance_kernels(_arrays(params))[t]


def build_transition_surgery(params: ParameterSet, age: int) -> np.ndarray:
    """Row-stochastic 14x14 kernel for perform-surgery at `age`."""
    _require_valid(params)
    t = _decision_offset(params, age)
    arrays = _arrays(params)
    return _surgery_kernels(arrays, _surveillance_kernels(arrays))[t]


def _state_index(state: Union[AaaState, str, int]) -> int:
    if isinstance(state, (int, np.integer)):
        return int(state)
    return AAA_STATES.index(AaaState(state).value)


def reward(state: Union[AaaState, str, int], age: int, params: ParameterSet) -> float:
    """c(age) for every alive state, 0 for dead. Defined for ages M..N."""
    if not params.start_age <= age <= params.max_age:
        raise HorizonError(f"age {age} outside {params.start_age}..{params.max_age}")
    if _state_index(state) == DEAD:
        return 0.0
    return float(params.qaly_weight[age])


def _warn_dominance(arrays: _ModelArrays) -> None:
    # no-AAA dominates the bins only while m_el >= beta and h * (1 - m_em) <= 1 - beta
    ages = np.asarray(arrays.horizon.epochs)
    cheap_surgery = ages[arrays.elective < arrays.background]
    if cheap_surgery.size:
        logger.warning(f"Elective mortality below background mortality at ages {cheap_surgery.tolist()}")
    rescued = arrays.reach_hospital * (1.0 - arrays.emergency)
    cheap_rupture = ages[rescued > 1.0 - arrays.background]
    if cheap_rupture.size:
        logger.warning(f"Surviving a rupture beats surviving the year at ages {cheap_rupture.tolist()}")


def build_process(params: ParameterSet, terminal: Optional[Union[TerminalMode, str]] = None) -> DecisionProcess:
    _require_valid(params)
    mode = TerminalMode(terminal or settings.TERMINAL_REWARD)
    arrays = _arrays(params)
    surveillance = _surveillance_kernels(arrays)
    surgery = _surgery_kernels(arrays, surveillance)
    transitions = np.stack([surveillance, surgery], axis=1)  # (T, U, X, X)

    alive = np.ones(AAA_STATES.size)
    alive[DEAD] = 0.0
    per_epoch = arrays.qaly[:-1, None] * alive[None, :]  # (T, X)
    rewards = np.repeat(per_epoch[:, None, :], AAA_ACTIONS.size, axis=1)
    terminal_reward = arrays.qaly[-1] * alive if mode == TerminalMode.QALY else np.zeros(AAA_STATES.size)

    _warn_dominance(arrays)
    logger.debug(f"Built AAA process for ages {params.start_age}..{params.max_age} (terminal={mode.value})")
    return DecisionProcess(AAA_STATES, AAA_ACTIONS, arrays.horizon, transitions, rewards, terminal_reward)


def threshold_policy(horizon: Horizon, first_surgery_bin: Union[AaaState, str]) -> Policy:
    """Stationary policy operating on every bin from `first_surgery_bin` upward."""
    label = first_surgery_bin.value if isinstance(first_surgery_bin, AaaState) else str(first_surgery_bin)
    if label not in BIN_LABELS:
        raise UnknownBinError([label])
    first = AAA_STATES.index(label)
    decision = np.full(AAA_STATES.size, SURVEILLANCE, dtype=np.int64)
    decision[first:] = SURGERY
    return Policy.stationary(AAA_STATES, AAA_ACTIONS, horizon, decision)


def clinical_policy_55(horizon: Horizon) -> Policy:
    """Current clinical practice: operate once the diameter exceeds 55 mm."""
    return threshold_policy(horizon, AaaState.MM_55_60)
