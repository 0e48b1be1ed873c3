"""
Finite-horizon, time-inhomogeneous Markov decision processes.

Epochs are absolute integers (ages for the AAA model). Arrays are indexed by the
offset t = k - M:

    transitions[t, u, i, j] = p_ij(u, k)
    rewards[t, u, i]        = r(i, u, k)
    terminal_reward[i]      = r(i, ., N)

Values are kept for every epoch M..N so that per-age maps can be read off.
"""
import itertools
from dataclasses import dataclass
from typing import List, Mapping, Optional, Sequence, Tuple

import numpy as np

from app.core.config import settings
from app.core.errors import (
    AaaMdpError,
    EnumerationTooLargeError,
    HorizonError,
    InvalidPolicyError,
    InvalidProcessError,
)
from app.core.logging import logger
from app.models.report import ValidationReport

MISSING_ACTION = -1


def _check_labels(kind: str, labels: Sequence[str]) -> Tuple[str, ...]:
    labels = tuple(labels)
    if not labels:
        raise AaaMdpError(f"{kind} needs at least one label")
    if any(not isinstance(label, str) or not label for label in labels):
        raise AaaMdpError(f"{kind} labels must be non-empty strings")
    if len(set(labels)) != len(labels):
        raise AaaMdpError(f"{kind} labels must be unique: {labels}")
    return labels


@dataclass(frozen=True)
class StateSpace:
    labels: Tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", _check_labels("StateSpace", self.labels))

    @property
    def size(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise AaaMdpError(f"unknown state: {label}") from None


@dataclass(frozen=True)
class ActionSet:
    labels: Tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", _check_labels("ActionSet", self.labels))

    @property
    def size(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise AaaMdpError(f"unknown action: {label}") from None


@dataclass(frozen=True)
class Horizon:
    start_epoch: int
    end_epoch: int

    def __post_init__(self):
        if self.start_epoch >= self.end_epoch:
            raise HorizonError(f"start_epoch {self.start_epoch} must be < end_epoch {self.end_epoch}")

    @property
    def length(self) -> int:
        return self.end_epoch - self.start_epoch

    @property
    def epochs(self) -> range:
        """Decision epochs M..N-1; N is terminal only."""
        return range(self.start_epoch, self.end_epoch)

    def offset(self, epoch: int, terminal: bool = False) -> int:
        last = self.end_epoch if terminal else self.end_epoch - 1
        if not self.start_epoch <= epoch <= last:
            raise HorizonError(f"epoch {epoch} outside [{self.start_epoch}, {last}]")
        return epoch - self.start_epoch


@dataclass(frozen=True, eq=False)
class DecisionProcess:
    states: StateSpace
    actions: ActionSet
    horizon: Horizon
    transitions: np.ndarray  # (T, U, X, X)
    rewards: np.ndarray  # (T, U, X)
    terminal_reward: np.ndarray  # (X,)

    def __post_init__(self):
        # Content is checked by validate_process, not here
        for name in ("transitions", "rewards", "terminal_reward"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))

    def transition(self, epoch: int, action: int) -> np.ndarray:
        return self.transitions[self.horizon.offset(epoch), action]

    def reward(self, state: int, action: int, epoch: int) -> float:
        return float(self.rewards[self.horizon.offset(epoch), action, state])


@dataclass(frozen=True, eq=False)
class Policy:
    """Deterministic Markov policy; rule[t, i] is an action index or MISSING_ACTION."""
    states: StateSpace
    actions: ActionSet
    horizon: Horizon
    rule: np.ndarray  # (T, X) int

    def __post_init__(self):
        object.__setattr__(self, "rule", np.asarray(self.rule, dtype=np.int64))

    def action(self, epoch: int, state: int) -> int:
        return int(self.rule[self.horizon.offset(epoch), state])

    def action_label(self, epoch: int, state: int) -> str:
        return self.actions.labels[self.action(epoch, state)]

    def missing_entries(self) -> List[Tuple[int, str]]:
        ts, xs = np.nonzero(self.rule == MISSING_ACTION)
        return [(self.horizon.start_epoch + int(t), self.states.labels[int(x)]) for t, x in zip(ts, xs)]

    def invalid_entries(self) -> List[Tuple[int, str, int]]:
        bad = (self.rule != MISSING_ACTION) & ((self.rule < 0) | (self.rule >= self.actions.size))
        ts, xs = np.nonzero(bad)
        return [
            (self.horizon.start_epoch + int(t), self.states.labels[int(x)], int(self.rule[t, x]))
            for t, x in zip(ts, xs)
        ]

    @classmethod
    def from_rule(
        cls,
        states: StateSpace,
        actions: ActionSet,
        horizon: Horizon,
        rule: Mapping[Tuple[int, int], int],
    ) -> "Policy":
        """Builds a policy from {(epoch, state_index): action_index}; gaps stay MISSING_ACTION."""
        table = np.full((horizon.length, states.size), MISSING_ACTION, dtype=np.int64)
        for (epoch, state), action in rule.items():
            table[horizon.offset(epoch), state] = action
        return cls(states, actions, horizon, table)

    @classmethod
    def stationary(cls, states: StateSpace, actions: ActionSet, horizon: Horizon, decision: Sequence[int]) -> "Policy":
        decision = np.asarray(decision, dtype=np.int64)
        return cls(states, actions, horizon, np.tile(decision, (horizon.length, 1)))

    def same_as(self, other: "Policy") -> bool:
        return (
            self.states == other.states
            and self.horizon == other.horizon
            and np.array_equal(self.rule, other.rule)
        )


@dataclass(frozen=True, eq=False)
class ValueFunction:
    states: StateSpace
    horizon: Horizon
    values: np.ndarray  # (T + 1, X)

    def value(self, epoch: int, state: int) -> float:
        return float(self.values[self.horizon.offset(epoch, terminal=True), state])

    def at(self, epoch: int) -> np.ndarray:
        return self.values[self.horizon.offset(epoch, terminal=True)]


def validate_process(process: DecisionProcess, tol: Optional[float] = None) -> ValidationReport:
    """Lists every broken invariant with its (k, u, i) coordinates. Never raises."""
    tol = settings.STOCHASTIC_TOL if tol is None else tol
    report = ValidationReport()
    horizon = process.horizon
    n_states, n_actions, n_epochs = process.states.size, process.actions.size, horizon.length
    trans, rewards, terminal = process.transitions, process.rewards, process.terminal_reward

    if trans.ndim != 4 or trans.shape[1:] != (n_actions, n_states, n_states):
        report.add("shape", f"transitions{trans.shape}")
        return report
    if rewards.ndim != 3 or rewards.shape[1:] != (n_actions, n_states):
        report.add("shape", f"rewards{rewards.shape}")
        return report
    if terminal.shape != (n_states,):
        report.add("shape", f"terminal_reward{terminal.shape}")
    elif not np.all(np.isfinite(terminal)):
        for i in np.nonzero(~np.isfinite(terminal))[0]:
            report.add("nan_reward", f"terminal_reward[i={i}]", float(terminal[i]), state=int(i))

    for t in range(n_epochs):
        epoch = horizon.start_epoch + t
        for name, arr in (("transitions", trans), ("rewards", rewards)):
            if t >= arr.shape[0]:
                report.add("missing_epoch", f"{name}[k={epoch}]", epoch=epoch)
    if trans.shape[0] > n_epochs or rewards.shape[0] > n_epochs:
        report.add("extra_epoch", "transitions/rewards", float(max(trans.shape[0], rewards.shape[0])))

    t_max = min(n_epochs, trans.shape[0])
    for t, u, i in zip(*np.nonzero(~np.isfinite(trans[:t_max]).all(axis=-1))):
        report.add("nan_probability", _coord(horizon, t, u, i), epoch=horizon.start_epoch + int(t),
                   action=int(u), state=int(i))
    for t, u, i, j in zip(*np.nonzero(trans[:t_max] < 0)):
        report.add("negative_probability", f"{_coord(horizon, t, u, i)}[j={j}]", float(trans[t, u, i, j]),
                   epoch=horizon.start_epoch + int(t), action=int(u), state=int(i))
    for t, u, i, j in zip(*np.nonzero(trans[:t_max] > 1)):
        report.add("probability_above_one", f"{_coord(horizon, t, u, i)}[j={j}]", float(trans[t, u, i, j]),
                   epoch=horizon.start_epoch + int(t), action=int(u), state=int(i))
    sums = trans[:t_max].sum(axis=-1)
    for t, u, i in zip(*np.nonzero(~(np.abs(sums - 1.0) <= tol))):
        report.add("row_sum", _coord(horizon, t, u, i), float(sums[t, u, i]),
                   epoch=horizon.start_epoch + int(t), action=int(u), state=int(i))

    r_max = min(n_epochs, rewards.shape[0])
    for t, u, i in zip(*np.nonzero(~np.isfinite(rewards[:r_max]))):
        report.add("nan_reward", f"reward[k={horizon.start_epoch + t},u={u},i={i}]", float(rewards[t, u, i]),
                   epoch=horizon.start_epoch + int(t), action=int(u), state=int(i))
    return report


def _coord(horizon: Horizon, t, u, i) -> str:
    return f"transition[k={horizon.start_epoch + int(t)},u={int(u)},i={int(i)}]"


def _require_valid(process: DecisionProcess) -> None:
    report = validate_process(process)
    if not report.ok:
        raise InvalidProcessError(report)


def solve_backward_induction(process: DecisionProcess) -> Tuple[Policy, ValueFunction]:
    """
    Exact backward induction. V(N) = terminal reward and
    V(k, i) = max_u [ r(i,u,k) + sum_j p_ij(u,k) V(k+1, j) ].
    Ties go to the action listed first.
    """
    _require_valid(process)
    n_epochs, n_states = process.horizon.length, process.states.size
    values = np.empty((n_epochs + 1, n_states))
    rule = np.empty((n_epochs, n_states), dtype=np.int64)
    values[n_epochs] = process.terminal_reward
    columns = np.arange(n_states)

    for t in range(n_epochs - 1, -1, -1):
        q = process.rewards[t] + process.transitions[t] @ values[t + 1]  # (U, X)
        best = np.argmax(q, axis=0)  # first maximiser
        rule[t] = best
        values[t] = q[best, columns]

    policy = Policy(process.states, process.actions, process.horizon, rule)
    return policy, ValueFunction(process.states, process.horizon, values)


def _require_total(process: DecisionProcess, policy: Policy) -> None:
    if policy.rule.shape != (process.horizon.length, process.states.size) or policy.horizon != process.horizon:
        raise InvalidPolicyError(detail=(
            f"policy covers epochs {policy.horizon.start_epoch}..{policy.horizon.end_epoch - 1} "
            f"with shape {policy.rule.shape}, process needs "
            f"{process.horizon.start_epoch}..{process.horizon.end_epoch - 1}"
        ))
    if policy.states != process.states or policy.actions != process.actions:
        raise InvalidPolicyError(detail="policy is defined over different states or actions than the process")
    missing = policy.missing_entries()
    bad = policy.invalid_entries()
    if missing or bad:
        raise InvalidPolicyError(missing=missing, bad_actions=bad)


def evaluate_policy(process: DecisionProcess, policy: Policy) -> ValueFunction:
    """Exact value of a fixed policy: V(k, i) = r(i, mu_k(i), k) + sum_j p_ij(mu_k(i), k) V(k+1, j)."""
    _require_valid(process)
    _require_total(process, policy)
    n_epochs, n_states = process.horizon.length, process.states.size
    values = np.empty((n_epochs + 1, n_states))
    values[n_epochs] = process.terminal_reward
    rows = np.arange(n_states)

    for t in range(n_epochs - 1, -1, -1):
        chosen = policy.rule[t]
        values[t] = process.rewards[t, chosen, rows] + process.transitions[t, chosen, rows] @ values[t + 1]

    return ValueFunction(process.states, process.horizon, values)


def enumerate_optimal_bruteforce(process: DecisionProcess, limit: Optional[int] = None) -> Tuple[Policy, ValueFunction]:
    """
    Test oracle: evaluates every deterministic Markov policy and keeps the one
    with the largest sum of V(M, .). All policies are evaluated at once by
    stacking one value vector per tail of decision rules.
    """
    _require_valid(process)
    limit = settings.BRUTEFORCE_LIMIT if limit is None else limit
    n_epochs, n_states, n_actions = process.horizon.length, process.states.size, process.actions.size
    count = n_actions ** (n_states * n_epochs)
    if count > limit:
        raise EnumerationTooLargeError(count, limit)

    decision_rules = np.array(list(itertools.product(range(n_actions), repeat=n_states)), dtype=np.int64)
    n_rules = len(decision_rules)
    rows = np.arange(n_states)

    # tails[f] is the value at epoch t of the f-th combination of rules t..N-1,
    # with the rule at t as the most significant digit of f
    tails = process.terminal_reward[None, :]
    for t in range(n_epochs - 1, -1, -1):
        r_d = process.rewards[t][decision_rules, rows]  # (D, X)
        p_d = process.transitions[t][decision_rules, rows]  # (D, X, X)
        tails = r_d[:, None, :] + np.einsum("dij,nj->dni", p_d, tails)
        tails = tails.reshape(-1, n_states)

    best = int(np.argmax(tails.sum(axis=1)))
    digits = np.unravel_index(best, (n_rules,) * n_epochs)
    rule = decision_rules[np.asarray(digits, dtype=np.int64)]
    policy = Policy(process.states, process.actions, process.horizon, rule)
    logger.debug(f"Enumerated {count} policies; best index {best}")
    return policy, evaluate_policy(process, policy)
