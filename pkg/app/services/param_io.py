import hashlib
import math
from pathlib import Path
from typing import Dict, Iterable, Optional, Union

import numpy as np
from pydantic import ValidationError

from app.core.config import settings
from app.core.errors import AaaMdpError, InvalidParametersError, ParameterFileError, UnknownBinError
from app.core.logging import logger
from app.models.enums import AGE_FAMILIES, BIN_LABELS, AaaState, ParameterFamily
from app.models.parameters import SCHEMA_VERSION, ParameterSet, PerturbationSpec
from app.models.report import ValidationReport

PathLike = Union[str, Path]
FAMILY_STREAM = {family: index for index, family in enumerate(ParameterFamily)}


def _is_probability(value: float) -> bool:
    return 0.0 <= value <= 1.0  # False for NaN


def validate_parameters(params: ParameterSet, tol: Optional[float] = None) -> ValidationReport:
    """Checks ranges, coverage, growth row sums and no-shrinkage. Never raises."""
    tol = settings.STOCHASTIC_TOL if tol is None else tol
    report = ValidationReport()

    if params.schema_version != SCHEMA_VERSION:
        report.add("schema_version", "schema_version", float(params.schema_version))
    if params.start_age >= params.max_age:
        report.add("horizon", "start_age/max_age", float(params.start_age))
    if not _is_probability(params.reach_hospital_prob):
        report.add("range", "reach_hospital_prob", params.reach_hospital_prob)

    # Rupture
    for label in sorted(set(params.rupture_prob) - set(BIN_LABELS)):
        report.add("unknown_bin", f"rupture_prob.{label}")
    for label in BIN_LABELS:
        if label not in params.rupture_prob:
            report.add("missing_entry", f"rupture_prob.{label}")
        elif not _is_probability(params.rupture_prob[label]):
            report.add("range", f"rupture_prob.{label}", params.rupture_prob[label])

    # Growth
    for label in sorted(set(params.growth) - set(BIN_LABELS)):
        report.add("unknown_bin", f"growth.{label}")
    for row_index, source in enumerate(BIN_LABELS):
        row = params.growth.get(source)
        if row is None:
            report.add("missing_entry", f"growth.{source}")
            continue
        for target, prob in row.items():
            if target not in BIN_LABELS:
                report.add("unknown_bin", f"growth.{source}.{target}")
                continue
            if not _is_probability(prob):
                report.add("range", f"growth.{source}.{target}", prob)
            if BIN_LABELS.index(target) < row_index and prob > 0:
                report.add("shrinkage", f"growth.{source}.{target}", prob)
        total = math.fsum(row.values())
        if not abs(total - 1.0) <= tol:
            report.add("row_sum", f"growth.{source}", total)

    # Age-indexed families
    for family in AGE_FAMILIES:
        values = params.age_map(family)
        last = params.max_age if family == ParameterFamily.QALY_WEIGHT else params.max_age - 1
        for age in range(params.start_age, last + 1):
            if age not in values:
                report.add("missing_entry", f"{family.value}.{age}")
                continue
            value = values[age]
            if family == ParameterFamily.QALY_WEIGHT:
                if not (math.isfinite(value) and value >= 0):
                    report.add("range", f"{family.value}.{age}", value)
            elif not _is_probability(value):
                report.add("range", f"{family.value}.{age}", value)

    return report


def load_parameters(path: PathLike) -> ParameterSet:
    path = Path(path)
    if not path.is_file():
        raise ParameterFileError(path, "parameter file not found")

    logger.info(f"📂 Loading parameters from {path}")
    try:
        params = ParameterSet.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(part) for part in err['loc']) or '<root>'}: {err['msg']}" for err in e.errors()
        )
        raise ParameterFileError(path, f"schema error: {problems}") from e

    report = validate_parameters(params)
    if not report.ok:
        raise InvalidParametersError(report, source=str(path))
    return params


def save_parameters(params: ParameterSet, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(params.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path


def parameter_digest(params: ParameterSet) -> str:
    return hashlib.sha256(params.model_dump_json().encode("utf-8")).hexdigest()


def file_digest(path: PathLike) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _family_rng(spec: PerturbationSpec, replicate: int, family: ParameterFamily) -> np.random.Generator:
    # One stream per (seed, replicate, family)
    return np.random.default_rng([spec.seed, replicate, FAMILY_STREAM[family]])


def _canonical_key(key):
    # Bins in diameter order, ages ascending
    if isinstance(key, str):
        return BIN_LABELS.index(key) if key in BIN_LABELS else len(BIN_LABELS)
    return key


def _draw(rng: np.random.Generator, nominal: np.ndarray, width: float) -> np.ndarray:
    return rng.uniform(nominal - width * nominal, nominal + width * nominal)


def _perturb_map(rng: np.random.Generator, values: Dict, width: float, upper: Optional[float]) -> Dict:
    keys = sorted(values, key=_canonical_key)
    nominal = np.array([values[key] for key in keys], dtype=float)
    raw = _draw(rng, nominal, width)
    drawn = np.clip(raw, 0.0, upper)
    clamped = int(np.count_nonzero(drawn != raw))
    if clamped:
        logger.debug(f"Clamped {clamped} of {len(keys)} perturbed values")
    return {key: float(value) for key, value in zip(keys, drawn)}


def perturb_parameters(params: ParameterSet, spec: PerturbationSpec, replicate: int) -> ParameterSet:
    """
    Replicate `replicate` of the sensitivity experiment: every value of a family
    with width w > 0 is drawn uniformly on nominal * [1 - w, 1 + w] and clamped.
    Families with width 0 are returned untouched.
    """
    if not 0 <= replicate < spec.replicates:
        raise AaaMdpError(f"replicate {replicate} outside 0..{spec.replicates - 1}")

    update = {}
    for family in spec.active_families():
        rng = _family_rng(spec, replicate, family)
        width = spec.width(family)
        if family == ParameterFamily.RUPTURE_PROB:
            update["rupture_prob"] = _perturb_map(rng, params.rupture_prob, width, 1.0)
        elif family == ParameterFamily.REACH_HOSPITAL_PROB:
            nominal = np.array([params.reach_hospital_prob])
            update["reach_hospital_prob"] = float(np.clip(_draw(rng, nominal, width), 0.0, 1.0)[0])
        elif family == ParameterFamily.QALY_WEIGHT:
            update["qaly_weight"] = _perturb_map(rng, params.qaly_weight, width, None)
        elif family == ParameterFamily.GROWTH:
            update["growth"] = _perturb_growth(rng, params.growth, width)
        else:
            update[family.value] = _perturb_map(rng, params.age_map(family), width, 1.0)

    return params.model_copy(update=update)


def _perturb_growth(rng: np.random.Generator, growth: Dict[str, Dict[str, float]], width: float):
    # Keeps each row's zero pattern, then renormalises
    perturbed = {}
    for source in sorted(growth, key=_canonical_key):
        row = growth[source]
        targets = sorted(row, key=_canonical_key)
        nominal = np.array([row[target] for target in targets], dtype=float)
        drawn = np.clip(_draw(rng, nominal, width), 0.0, None)
        total = drawn.sum()
        if total > 0:
            drawn = drawn / total
        else:
            drawn = nominal
        perturbed[source] = {target: float(value) for target, value in zip(targets, drawn)}
    return perturbed


def _bin_labels(bins: Iterable[Union[str, AaaState]]) -> list:
    labels = [b.value if isinstance(b, AaaState) else str(b) for b in bins]
    unknown = [label for label in labels if label not in BIN_LABELS]
    if unknown:
        raise UnknownBinError(unknown)
    return labels


def scale_rupture_bias(params: ParameterSet, factor: float, bins: Iterable[Union[str, AaaState]]) -> ParameterSet:
    """Multiplies rho(d) by `factor` for d in `bins` (clamped to [0, 1]); everything else is untouched."""
    if not (math.isfinite(factor) and factor >= 0):
        raise AaaMdpError(f"bias factor must be a finite number >= 0, got {factor}")
    labels = set(_bin_labels(bins))
    rupture = {
        label: (min(1.0, value * factor) if label in labels else value)
        for label, value in params.rupture_prob.items()
    }
    return params.model_copy(update={"rupture_prob": rupture})
