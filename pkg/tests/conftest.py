import shutil
from pathlib import Path

import numpy as np
import pytest
import yaml


@pytest.fixture
def temp_dir(tmp_path):
    """Create a temporary directory for test files."""
    yield tmp_path
    # Cleanup
    if tmp_path.exists():
        shutil.rmtree(tmp_path)


@pytest.fixture
def test_config(temp_dir):
    """Create test configuration."""
    from src.utils.config import Config

    config = Config(
        paths={
            "logs_dir": str(temp_dir / "logs"),
            "output_dir": str(temp_dir / "out"),
            "schema_file": str(
                Path(__file__).resolve().parent.parent
                / "config"
                / "schemas"
                / "classification_report.schema.json"
            ),
        },
        logging={"level": "ERROR", "file_logging": False},
    )

    Path(config.paths.output_dir).mkdir(parents=True, exist_ok=True)
    return config


@pytest.fixture
def config_file(test_config, temp_dir):
    """Write the test configuration to YAML for the CLI."""
    path = temp_dir / "config.yaml"
    with open(path, "w") as f:
        yaml.safe_dump(test_config.model_dump(), f)
    return str(path)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def example_link():
    """mu = 10 Mb/s, T = 240 ms, m = 40 kbit, beta = 1/2, so q = 60."""
    from src.models.params import LinkParams

    return LinkParams(mu=1e7, T=0.24, m=40_000.0, beta=0.5, unit="bits")


@pytest.fixture
def example_one():
    """beta = 1/2, q = 0.9: the two-order example with 1- and 2-cycles."""
    return {"beta": 0.5, "q": 0.9}
