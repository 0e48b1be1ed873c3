import math
from typing import List, Optional

import pandas as pd
from pydantic import BaseModel, Field, model_validator

from app.core.config import settings
from app.models.enums import GridKind


class Provenance(BaseModel):
    parameter_digest: Optional[str] = None
    seed: Optional[int] = None
    replicates: Optional[int] = None
    widths: Optional[dict] = None
    bias_factor: Optional[float] = None
    bias_bins: Optional[List[str]] = None
    terminal: Optional[str] = None


class GridReport(BaseModel):
    """Age x diameter matrix behind the policy, QALY, gain and ratio maps."""
    kind: GridKind
    ages: List[int] = Field(..., description="Row labels, decision ages M..N-1")
    columns: List[str] = Field(..., description="Column labels, state labels")
    cells: List[List[float]]
    provenance: Provenance = Field(default_factory=Provenance)

    @model_validator(mode="after")
    def _check_cells(self) -> "GridReport":
        if len(self.cells) != len(self.ages):
            raise ValueError(f"{len(self.cells)} rows for {len(self.ages)} ages")
        for age, row in zip(self.ages, self.cells):
            if len(row) != len(self.columns):
                raise ValueError(f"row for age {age} has {len(row)} cells, expected {len(self.columns)}")
            for column, cell in zip(self.columns, row):
                if not math.isfinite(cell):
                    raise ValueError(f"non-finite cell at ({age}, {column})")
                if self.kind == GridKind.POLICY and cell not in (0.0, 1.0):
                    raise ValueError(f"policy cell ({age}, {column}) = {cell} is not 0/1")
                if self.kind == GridKind.RATIO and not 0.0 <= cell <= 1.0:
                    raise ValueError(f"ratio cell ({age}, {column}) = {cell} outside [0, 1]")
                if self.kind == GridKind.GAIN and cell < -settings.GAIN_TOL:
                    raise ValueError(f"gain cell ({age}, {column}) = {cell} is negative")
        return self

    @property
    def shape(self):
        return len(self.ages), len(self.columns)

    def cell(self, age: int, column: str) -> float:
        return self.cells[self.ages.index(age)][self.columns.index(column)]

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.cells, index=pd.Index(self.ages, name="age"), columns=self.columns)
        if self.kind == GridKind.POLICY:
            frame = frame.astype(int)
        return frame

    def to_csv(self) -> str:
        return self.to_frame().to_csv(lineterminator="\n")

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)


class CompareSummary(BaseModel):
    max_gain: float
    argmax_age: Optional[int] = None
    argmax_bin: Optional[str] = None
    differing_cells: int

    def line(self) -> str:
        where = f"age {self.argmax_age}, {self.argmax_bin}" if self.argmax_age is not None else "n/a"
        return (
            f"max gain {self.max_gain:.6f} QALY at {where}; "
            f"policies differ on {self.differing_cells} cells"
        )
