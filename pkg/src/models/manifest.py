from typing import Any, Dict

from pydantic import BaseModel, Field


class RunManifest(BaseModel):
    """Everything needed to reproduce one CLI invocation's outputs."""

    command: str
    parameters: Dict[str, Any]
    unit: str
    tool_version: str
    tolerances: Dict[str, float]
    outputs: Dict[str, str] = Field(default_factory=dict, description="file name -> sha256")
