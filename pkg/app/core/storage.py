from pathlib import Path
from typing import List, Union

import numpy as np
import pandas as pd

from app.core.aaa import AAA_ACTIONS, AAA_STATES, SURGERY, SURVEILLANCE
from app.core.errors import InvalidPolicyError, ParameterFileError
from app.core.logging import logger
from app.core.mdp import MISSING_ACTION, Horizon, Policy
from app.models.enums import BIN_LABELS, AaaState
from app.models.grid import CompareSummary, GridReport
from app.models.manifest import RunManifest

MANIFEST_NAME = "manifest.json"


class Storage:
    """Writes grids, summaries and manifests under one output directory."""

    def __init__(self, out_dir: Union[str, Path]):
        self.out_dir = Path(out_dir)
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ParameterFileError(self.out_dir, f"cannot create output directory: {e}") from e
        self.written: List[Path] = []

    def _write(self, name: str, text: str) -> Path:
        path = self.out_dir / name
        path.write_text(text, encoding="utf-8")
        self.written.append(path)
        return path

    def save_grid(self, report: GridReport, stem: str) -> List[Path]:
        """Saves `stem`.csv and `stem`.json."""
        paths = [
            self._write(f"{stem}.csv", report.to_csv()),
            self._write(f"{stem}.json", report.to_json() + "\n"),
        ]
        logger.info(f"Saved {report.kind.value} grid to {paths[0]}")
        return paths

    def save_summary(self, summary: CompareSummary, name: str = "summary.json") -> Path:
        return self._write(name, summary.model_dump_json(indent=2) + "\n")

    def save_manifest(self, manifest: RunManifest) -> Path:
        manifest = manifest.model_copy(update={"outputs": [p.name for p in self.written]})
        path = self.out_dir / MANIFEST_NAME
        path.write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
        logger.info(f"Saved run manifest to {path}")
        return path


def _policy_ages(path: Path, labels: pd.Index) -> List[int]:
    """Row labels as ages; each must be a whole number and appear once."""
    numbers = pd.to_numeric(pd.Series(labels, dtype=object), errors="coerce")
    whole = numbers.notna() & (numbers % 1 == 0)
    if not whole.all():
        bad_labels = [str(label) for label, ok in zip(labels, whole) if not ok]
        raise InvalidPolicyError(detail=f"{path}: age labels must be whole numbers, got {bad_labels}")
    ages = numbers.astype(np.int64)
    duplicated = sorted(set(ages[ages.duplicated()].tolist()))
    if duplicated:
        raise InvalidPolicyError(detail=f"{path}: duplicate age rows {duplicated}")
    return ages.tolist()


def load_policy_grid(path: Union[str, Path], horizon: Horizon) -> Policy:
    """
    Reads a policy CSV (header of bin labels, first column age, 0/1 cells) as a
    total AAA policy. dead and no-AAA always continue surveillance.
    """
    path = Path(path)
    if not path.is_file():
        raise ParameterFileError(path, "policy file not found")
    try:
        frame = pd.read_csv(path, index_col=0)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise ParameterFileError(path, f"cannot parse policy CSV: {e}") from e

    unknown = [str(c) for c in frame.columns if c not in BIN_LABELS]
    if unknown:
        raise InvalidPolicyError(detail=f"{path}: unknown columns {unknown}")
    ages = _policy_ages(path, frame.index)
    outside = [age for age in ages if age not in horizon.epochs]
    if outside:
        raise InvalidPolicyError(detail=f"{path}: ages outside the horizon {outside}")

    rule = np.full((horizon.length, AAA_STATES.size), MISSING_ACTION, dtype=np.int64)
    rule[:, AAA_STATES.index(AaaState.DEAD.value)] = SURVEILLANCE
    rule[:, AAA_STATES.index(AaaState.NO_AAA.value)] = SURVEILLANCE
    bad = []
    for age, row in zip(ages, frame.itertuples(index=False)):
        for column, cell in zip(frame.columns, row):
            if pd.isna(cell):
                continue
            if cell not in (0, 1):
                bad.append((age, column, cell))
                continue
            rule[horizon.offset(age), AAA_STATES.index(column)] = SURGERY if cell == 1 else SURVEILLANCE

    policy = Policy(AAA_STATES, AAA_ACTIONS, horizon, rule)
    missing = policy.missing_entries()
    if missing or bad:
        raise InvalidPolicyError(missing=missing, bad_actions=bad)
    return policy
