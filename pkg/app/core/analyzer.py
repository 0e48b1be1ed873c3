from concurrent.futures import ProcessPoolExecutor
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from tqdm import tqdm

from app.core.aaa import (
    AAA_STATES,
    FIRST_BIN,
    NO_AAA,
    SURGERY,
    build_process,
    clinical_policy_55,
    params_horizon,
)
from app.core.config import settings
from app.core.errors import AaaMdpError, GridMismatchError, InvalidPolicyError, ReplicateError
from app.core.logging import logger
from app.core.mdp import Policy, ValueFunction, evaluate_policy, solve_backward_induction
from app.models.enums import BIN_LABELS, AaaState, GridKind, TerminalMode
from app.models.grid import CompareSummary, GridReport, Provenance
from app.models.parameters import ParameterSet, PerturbationSpec
from app.services.param_io import parameter_digest, perturb_parameters, scale_rupture_bias

VALUE_COLUMNS = [AaaState.NO_AAA.value] + BIN_LABELS


def _require_aaa(states, what: str) -> None:
    if states != AAA_STATES:
        raise GridMismatchError(f"{what} is not defined on the AAA state space")


def _ages(horizon) -> List[int]:
    return list(horizon.epochs)


def policy_grid(policy: Policy, provenance: Optional[Provenance] = None) -> GridReport:
    """1 where the policy operates, 0 where it continues surveillance. Diameter bins only."""
    _require_aaa(policy.states, "policy")
    missing = policy.missing_entries()
    if missing:
        raise InvalidPolicyError(missing=missing)
    cells = (policy.rule[:, FIRST_BIN:] == SURGERY).astype(float)
    return GridReport(
        kind=GridKind.POLICY,
        ages=_ages(policy.horizon),
        columns=list(BIN_LABELS),
        cells=cells.tolist(),
        provenance=provenance or Provenance(),
    )


def qaly_map(values: ValueFunction, provenance: Optional[Provenance] = None) -> GridReport:
    """Expected remaining QALYs per (age, state), no-AAA plus diameter bins."""
    _require_aaa(values.states, "value function")
    return GridReport(
        kind=GridKind.VALUE,
        ages=_ages(values.horizon),
        columns=list(VALUE_COLUMNS),
        cells=values.values[:-1, NO_AAA:].tolist(),
        provenance=provenance or Provenance(),
    )


def qaly_gain_map(v_opt: ValueFunction, v_base: ValueFunction, provenance: Optional[Provenance] = None) -> GridReport:
    _require_aaa(v_opt.states, "optimal value function")
    _require_aaa(v_base.states, "baseline value function")
    if v_opt.horizon != v_base.horizon:
        raise GridMismatchError(f"horizons differ: {v_opt.horizon} vs {v_base.horizon}")
    gain = v_opt.values[:-1, FIRST_BIN:] - v_base.values[:-1, FIRST_BIN:]
    return GridReport(
        kind=GridKind.GAIN,
        ages=_ages(v_opt.horizon),
        columns=list(BIN_LABELS),
        cells=gain.tolist(),
        provenance=provenance or Provenance(),
    )


def compare_policies(v_opt: ValueFunction, v_base: ValueFunction, p_opt: Policy, p_base: Policy) -> CompareSummary:
    gain = qaly_gain_map(v_opt, v_base)
    cells = np.asarray(gain.cells)
    flat = int(np.argmax(cells))  # earliest age, then smallest bin
    row, col = divmod(flat, cells.shape[1])
    differing = int(np.count_nonzero(p_opt.rule[:, FIRST_BIN:] != p_base.rule[:, FIRST_BIN:]))
    return CompareSummary(
        max_gain=float(cells[row, col]),
        argmax_age=gain.ages[row],
        argmax_bin=gain.columns[col],
        differing_cells=differing,
    )


def surgery_thresholds(grid: GridReport) -> Dict[int, Optional[str]]:
    """First bin marked for surgery at each age, None when the row is all surveillance."""
    thresholds = {}
    for age, row in zip(grid.ages, grid.cells):
        marked = [column for column, cell in zip(grid.columns, row) if cell >= 0.5]
        thresholds[age] = marked[0] if marked else None
    return thresholds


def non_threshold_ages(grid: GridReport) -> List[int]:
    """Ages whose surgery region is not upward-closed in diameter."""
    ages = []
    for age, row in zip(grid.ages, grid.cells):
        marks = [cell >= 0.5 for cell in row]
        if any(marks) and not all(marks[marks.index(True):]):
            ages.append(age)
    return ages


def _short_label(column: str) -> str:
    if column.startswith("<") or column.startswith(">"):
        return column[:3]
    return column.split("-")[0]


def render_ascii(grid: GridReport) -> str:
    """Rows are ages (increasing downward), columns are bins; '#' surgery, '.' surveillance.
    Ratio grids show partial cells as the tenths digit."""
    lines = ["age " + "".join(f"{_short_label(c):>4}" for c in grid.columns)]
    for age, row in zip(grid.ages, grid.cells):
        marks = []
        for cell in row:
            if cell >= 1.0:
                marks.append("#")
            elif cell <= 0.0:
                marks.append(".")
            else:
                marks.append(str(min(9, max(1, int(round(cell * 10))))))
        lines.append(f"{age:>3} " + "".join(f"{m:>4}" for m in marks))
    return "\n".join(lines)


def _replicate_surgery(params: ParameterSet, spec: PerturbationSpec, replicate: int, terminal: str):
    # Top-level so worker processes can pickle it; errors travel back as text
    try:
        perturbed = perturb_parameters(params, spec, replicate)
        policy, _ = solve_backward_induction(build_process(perturbed, terminal))
        return replicate, policy.rule[:, FIRST_BIN:] == SURGERY, None
    except AaaMdpError as e:
        return replicate, None, str(e)


class Analyzer:
    def __init__(
        self,
        terminal: Optional[Union[TerminalMode, str]] = None,
        workers: Optional[int] = None,
        show_progress: Optional[bool] = None,
    ):
        self.terminal = TerminalMode(terminal or settings.TERMINAL_REWARD)
        self.workers = settings.SENSITIVITY_WORKERS if workers is None else workers
        self.show_progress = settings.SHOW_PROGRESS if show_progress is None else show_progress

    def _provenance(self, params: ParameterSet, digest: Optional[str], **extra) -> Provenance:
        return Provenance(
            parameter_digest=digest or parameter_digest(params),
            terminal=self.terminal.value,
            **extra,
        )

    def solve(self, params: ParameterSet) -> Tuple[Policy, ValueFunction]:
        policy, values = solve_backward_induction(build_process(params, self.terminal))
        logger.info(f"Solved AAA process for ages {params.start_age}..{params.max_age}")
        return policy, values

    def baseline(self, params: ParameterSet) -> Tuple[Policy, ValueFunction]:
        policy = clinical_policy_55(params_horizon(params))
        return policy, evaluate_policy(build_process(params, self.terminal), policy)

    def compare(self, params: ParameterSet, digest: Optional[str] = None) -> Tuple[GridReport, CompareSummary]:
        p_opt, v_opt = self.solve(params)
        p_base, v_base = self.baseline(params)
        gain = qaly_gain_map(v_opt, v_base, self._provenance(params, digest))
        summary = compare_policies(v_opt, v_base, p_opt, p_base)
        logger.info(f"Compared optimal policy with the 55 mm baseline: {summary.line()}")
        return gain, summary

    def _replicate_results(self, params: ParameterSet, spec: PerturbationSpec) -> Iterable:
        replicates = range(spec.replicates)
        terminal = self.terminal.value
        if self.workers > 1:
            with ProcessPoolExecutor(max_workers=self.workers) as pool:
                chunk = max(1, spec.replicates // (self.workers * 8))
                yield from pool.map(
                    _replicate_surgery,
                    [params] * spec.replicates,
                    [spec] * spec.replicates,
                    replicates,
                    [terminal] * spec.replicates,
                    chunksize=chunk,
                )
        else:
            for replicate in replicates:
                yield _replicate_surgery(params, spec, replicate, terminal)

    def sensitivity_ratio(self, params: ParameterSet, spec: PerturbationSpec, digest: Optional[str] = None) -> GridReport:
        """Fraction of perturbed replicates whose optimal action at (age, bin) is surgery."""
        horizon = params_horizon(params)
        counts = np.zeros((horizon.length, len(BIN_LABELS)), dtype=np.int64)
        logger.info(f"🎲 Running {spec.replicates} perturbed replicates (seed={spec.seed}, workers={self.workers})")

        results = self._replicate_results(params, spec)
        for replicate, surgery, error in tqdm(results, total=spec.replicates, desc="replicates", disable=not self.show_progress):
            if error is not None:
                raise ReplicateError(replicate, AaaMdpError(error))
            # Integer sums, so completion order cannot change the grid
            counts += surgery

        ratio = counts / spec.replicates
        return GridReport(
            kind=GridKind.RATIO,
            ages=_ages(horizon),
            columns=list(BIN_LABELS),
            cells=ratio.tolist(),
            provenance=self._provenance(
                params,
                digest,
                seed=spec.seed,
                replicates=spec.replicates,
                widths={family.value: width for family, width in sorted(spec.widths.items(), key=lambda kv: kv[0].value)},
            ),
        )

    def bias_experiment(
        self,
        params: ParameterSet,
        factors: Sequence[float],
        bins: Iterable[Union[str, AaaState]],
        digest: Optional[str] = None,
    ) -> List[Tuple[float, GridReport]]:
        """Optimal policy grid after scaling rupture risk of `bins` by each factor."""
        bins = [b.value if isinstance(b, AaaState) else str(b) for b in bins]
        grids = []
        for factor in factors:
            scaled = scale_rupture_bias(params, factor, bins)
            policy, _ = self.solve(scaled)
            provenance = self._provenance(params, digest, bias_factor=float(factor), bias_bins=bins)
            grids.append((float(factor), policy_grid(policy, provenance)))
            logger.info(f"Bias factor {factor}: {int(np.sum(grids[-1][1].cells))} surgery cells")
        return grids
