from typing import Dict, List
from pydantic import BaseModel, Field, field_validator

import numpy as np

from app.models.enums import BIN_LABELS, ParameterFamily

SCHEMA_VERSION = 1
MAX_SEED = 2 ** 64 - 1


class ParameterSet(BaseModel):
    """
    Clinical inputs of the AAA model. Diameter-bin maps are keyed by bin label,
    age maps by integer year. Structure is enforced here; ranges, coverage,
    row sums and no-shrinkage are checked by param_io.validate_parameters so
    that every problem is reported at once.
    """
    schema_version: int = SCHEMA_VERSION
    description: str = ""
    start_age: int = Field(65, description="First decision epoch M (years)")
    max_age: int = Field(120, description="Terminal epoch N (years)")
    reach_hospital_prob: float = Field(..., description="h: probability a rupture reaches hospital")
    rupture_prob: Dict[str, float] = Field(..., description="rho(d): annual rupture probability per bin")
    growth: Dict[str, Dict[str, float]] = Field(..., description="g(d -> d'): sparse rows, absent targets are 0")
    qaly_weight: Dict[int, float] = Field(..., description="c(k): QALYs per year alive, ages M..N")
    background_mortality: Dict[int, float] = Field(..., description="beta(k), ages M..N-1")
    elective_mortality: Dict[int, float] = Field(..., description="m_el(k), ages M..N-1")
    emergency_mortality: Dict[int, float] = Field(..., description="m_em(k), ages M..N-1")

    @property
    def decision_ages(self) -> range:
        return range(self.start_age, self.max_age)

    def age_map(self, family: ParameterFamily) -> Dict[int, float]:
        return getattr(self, family.value)

    def rupture_vector(self) -> np.ndarray:
        return np.array([self.rupture_prob[label] for label in BIN_LABELS], dtype=float)

    def growth_matrix(self) -> np.ndarray:
        matrix = np.zeros((len(BIN_LABELS), len(BIN_LABELS)))
        for i, source in enumerate(BIN_LABELS):
            for j, target in enumerate(BIN_LABELS):
                matrix[i, j] = self.growth[source].get(target, 0.0)
        return matrix

    def age_vector(self, family: ParameterFamily, ages) -> np.ndarray:
        values = self.age_map(family)
        return np.array([values[age] for age in ages], dtype=float)


class PerturbationSpec(BaseModel):
    """Relative half-widths per parameter family for uniform +/- width * nominal draws."""
    widths: Dict[ParameterFamily, float] = Field(default_factory=lambda: {ParameterFamily.RUPTURE_PROB: 0.25})
    replicates: int = Field(1000, ge=1)
    seed: int = Field(0, ge=0, le=MAX_SEED)

    @field_validator("widths")
    @classmethod
    def _non_negative(cls, widths: Dict[ParameterFamily, float]) -> Dict[ParameterFamily, float]:
        negative = [f"{family.value}={width}" for family, width in widths.items() if not width >= 0]
        if negative:
            raise ValueError(f"perturbation widths must be >= 0: {', '.join(negative)}")
        return widths

    def width(self, family: ParameterFamily) -> float:
        return self.widths.get(family, 0.0)

    def active_families(self) -> List[ParameterFamily]:
        # Fixed enum order keeps draws independent of dict insertion order
        return [family for family in ParameterFamily if self.width(family) > 0]

