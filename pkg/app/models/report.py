from typing import List, Optional
from pydantic import BaseModel, Field


class Violation(BaseModel):
    rule: str = Field(..., description="Violated rule, e.g. row_sum, negative_probability, missing_entry")
    path: str = Field(..., description="Where the violation sits, e.g. growth.45-50mm or transition[k=70,u=1,i=3]")
    value: Optional[float] = None
    epoch: Optional[int] = None
    action: Optional[int] = None
    state: Optional[int] = None

    def __str__(self) -> str:
        value = f" (value={self.value!r})" if self.value is not None else ""
        return f"{self.rule} at {self.path}{value}"


class ValidationReport(BaseModel):
    violations: List[Violation] = Field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __len__(self) -> int:
        return len(self.violations)

    def add(self, rule: str, path: str, value: Optional[float] = None, **coords) -> None:
        self.violations.append(Violation(rule=rule, path=path, value=value, **coords))

    def rules(self) -> List[str]:
        return [v.rule for v in self.violations]

    def summary(self) -> str:
        if self.ok:
            return "no violations"
        return "\n".join(f"  - {v}" for v in self.violations)
