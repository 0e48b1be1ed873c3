from typing import Dict, List, Optional
from pydantic import BaseModel, Field


class RunManifest(BaseModel):
    """Written next to every output; enough to repeat the run bit for bit."""
    command: str
    tool_version: str
    parameter_path: str
    parameter_digest: str = Field(..., description="SHA-256 of the parameter file bytes")
    start_age: int
    max_age: int
    terminal: str
    seed: Optional[int] = None
    replicates: Optional[int] = None
    widths: Optional[Dict[str, float]] = None
    factors: Optional[List[float]] = None
    bins: Optional[List[str]] = None
    policy: Optional[str] = None
    outputs: List[str] = Field(default_factory=list)
