import os
from pathlib import Path
from typing import Any, Dict, Literal

import yaml
from pydantic import BaseModel, Field


class SolverConfig(BaseModel):
    xtol: float = Field(default=1e-13)
    max_iterations: int = Field(default=200)
    convergence_gap: float = Field(default=1e-12)
    max_map_iterations: int = Field(default=10_000)
    critical_tol: float = Field(default=1e-9)


class SimulationConfig(BaseModel):
    max_cycles: int = Field(default=10_000)
    warmup_cycles: int = Field(default=0)
    measure_cycles: int = Field(default=3)
    seed_offset: float = Field(default=1e-6)


class OutputConfig(BaseModel):
    float_digits: int = Field(default=12)
    unit: Literal["packets", "bits"] = Field(default="packets")
    write_manifest: bool = Field(default=True)


class RuntimeConfig(BaseModel):
    workers: int = Field(default=1)


class PathConfig(BaseModel):
    logs_dir: str = Field(default="./logs")
    output_dir: str = Field(default=".")
    schema_file: str = Field(default="config/schemas/classification_report.schema.json")


class LoggingConfig(BaseModel):
    level: str = Field(default="WARNING")
    file_logging: bool = Field(default=True)


class Config(BaseModel):
    solver: SolverConfig = Field(default_factory=SolverConfig)
    simulation: SimulationConfig = Field(default_factory=SimulationConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)
    runtime: RuntimeConfig = Field(default_factory=RuntimeConfig)
    paths: PathConfig = Field(default_factory=PathConfig)
    logging: LoggingConfig = Field(default_factory=LoggingConfig)

    @classmethod
    def from_yaml(cls, config_path: str) -> "Config":
        """Load configuration from YAML file."""
        config_file = Path(config_path)

        config_data: Dict[str, Any] = {}
        if config_file.exists():
            with open(config_file, "r") as f:
                config_data = yaml.safe_load(f) or {}

        # Environment wins over the file, and over defaults when no file exists
        config_data = cls._override_with_env(config_data)

        return cls(**config_data)

    @staticmethod
    def _override_with_env(config_data: Dict[str, Any]) -> Dict[str, Any]:
        """Override config values with environment variables."""
        env_mappings = {
            "AIMD_THREADS": ("runtime", "workers"),
            "AIMD_LOG_LEVEL": ("logging", "level"),
            "AIMD_LOGS_DIR": ("paths", "logs_dir"),
            "AIMD_OUTPUT_DIR": ("paths", "output_dir"),
            "AIMD_MAX_CYCLES": ("simulation", "max_cycles"),
        }

        for env_var, (section, key) in env_mappings.items():
            value = os.getenv(env_var)
            if value:
                if section not in config_data or config_data[section] is None:
                    config_data[section] = {}
                config_data[section][key] = value

        return config_data
