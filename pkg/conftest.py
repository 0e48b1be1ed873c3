import sys
from pathlib import Path
sys.path.append(str(Path(__file__).parent.absolute()))

from typing import Dict, Optional, Union

import numpy as np
import pytest

from app.core.config import settings
from app.core.mdp import ActionSet, DecisionProcess, Horizon, StateSpace
from app.models.enums import BIN_LABELS
from app.models.parameters import ParameterSet
from app.services.param_io import load_parameters

SNAPSHOT_DIR = Path(__file__).parent / "snapshots"


def uniform_params(
    start_age: int = 65,
    max_age: int = 120,
    rupture: Union[float, Dict[str, float]] = 0.01,
    growth: Optional[Dict[str, Dict[str, float]]] = None,
    qaly: float = 0.8,
    background: float = 0.02,
    elective: float = 0.03,
    emergency: float = 0.5,
    reach: float = 0.5,
) -> ParameterSet:
    """Age-constant parameter set; growth defaults to 'never grows'."""
    if not isinstance(rupture, dict):
        rupture = {label: rupture for label in BIN_LABELS}
    if growth is None:
        growth = {label: {label: 1.0} for label in BIN_LABELS}
    decision_ages = range(start_age, max_age)
    return ParameterSet(
        start_age=start_age,
        max_age=max_age,
        reach_hospital_prob=reach,
        rupture_prob=rupture,
        growth=growth,
        qaly_weight={age: qaly for age in range(start_age, max_age + 1)},
        background_mortality={age: background for age in decision_ages},
        elective_mortality={age: elective for age in decision_ages},
        emergency_mortality={age: emergency for age in decision_ages},
    )


def random_params(rng: np.random.Generator, start_age: int = 65, max_age: int = 120) -> ParameterSet:
    """Random but clinically shaped set; no-AAA dominance holds (elective >= background, rescue below survival)."""
    n_bins = len(BIN_LABELS)
    rupture = np.sort(rng.uniform(0.0, 0.4, n_bins))
    growth = {}
    for i, label in enumerate(BIN_LABELS):
        targets = BIN_LABELS[i:min(i + 3, n_bins)]
        weights = rng.uniform(0.05, 1.0, len(targets))
        weights = weights / weights.sum()
        growth[label] = dict(zip(targets, weights.tolist()))
        growth[label][targets[-1]] = 1.0 - sum(weights[:-1])
    ages = np.arange(start_age, max_age + 1)
    background = np.minimum(0.3, rng.uniform(0.005, 0.03) * np.exp(rng.uniform(0.05, 0.1) * (ages - start_age)))
    elective = np.minimum(0.99, background + rng.uniform(0.0, 0.08))
    qaly = np.clip(rng.uniform(0.7, 1.0) - rng.uniform(0.0, 0.01) * (ages - start_age), 0.0, None)
    return ParameterSet(
        start_age=start_age,
        max_age=max_age,
        reach_hospital_prob=float(rng.uniform(0.2, 0.9)),
        rupture_prob=dict(zip(BIN_LABELS, rupture.tolist())),
        growth=growth,
        qaly_weight={int(a): float(v) for a, v in zip(ages, qaly)},
        background_mortality={int(a): float(v) for a, v in zip(ages[:-1], background[:-1])},
        elective_mortality={int(a): float(v) for a, v in zip(ages[:-1], elective[:-1])},
        emergency_mortality={int(a): float(rng.uniform(0.3, 0.8)) for a in ages[:-1]},
    )


def random_process(rng: np.random.Generator, n_states: int, n_actions: int, length: int, start: int = 0) -> DecisionProcess:
    transitions = rng.uniform(0.0, 1.0, (length, n_actions, n_states, n_states))
    transitions /= transitions.sum(axis=-1, keepdims=True)
    return DecisionProcess(
        states=StateSpace(tuple(f"s{i}" for i in range(n_states))),
        actions=ActionSet(tuple(f"a{u}" for u in range(n_actions))),
        horizon=Horizon(start, start + length),
        transitions=transitions,
        rewards=rng.uniform(0.0, 1.0, (length, n_actions, n_states)),
        terminal_reward=rng.uniform(0.0, 1.0, n_states),
    )


@pytest.fixture(scope="session")
def illustrative_params() -> ParameterSet:
    return load_parameters(settings.DEFAULT_PARAMS_PATH)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)
