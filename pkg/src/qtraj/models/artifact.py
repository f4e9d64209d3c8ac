from pydantic import BaseModel, Field


class ArtifactRecord(BaseModel):
    name: str = Field(..., description="Path relative to the run directory")
    sha256: str
    kind: str = Field(..., description="csv | json | npz")
    rows: int | None = None


class RunEvent(BaseModel):
    """One pipeline step; no wall-clock fields so manifests stay reproducible."""
    event_type: str
    entity: str | None = None
    detail: dict = Field(default_factory=dict)
