import hashlib
import io
import json
import sys
from pathlib import Path

import pandas as pd
import pytest
import yaml
from click.testing import CliRunner
from loguru import logger

from src.application.cli_interface import cli
from src.application.manifest import ManifestManager
from src.models.cycles import ClassificationReport


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture(autouse=True)
def restore_logger():
    yield
    # the CLI binds loguru to the runner's captured stderr
    logger.remove()
    logger.add(sys.stderr, level="WARNING")


def invoke(runner, config_file, *args):
    return runner.invoke(cli, [*args, "--config", config_file])


class TestClassify:
    def test_normalized(self, runner, config_file):
        result = invoke(
            runner, config_file, "classify", "--beta", "0.5", "--q", "0.9", "--b", "0.3"
        )

        assert result.exit_code == 0, result.output
        body = json.loads(result.stdout)
        assert [c["order"] for c in body["cycles"]] == [1, 2]
        assert body["case_tag"] == "A_star_lt_q"
        assert body["constants_table"]["N"] == "2"
        assert body["unit"] == "packets"

    def test_physical_matches_normalized(self, runner, config_file):
        normalized = invoke(
            runner, config_file, "classify", "--beta", "0.5", "--q", "0.9", "--b", "0.3"
        )
        physical = invoke(
            runner, config_file, "classify", "--beta", "0.5",
            "--mu", "2", "--rtt", "0.9", "--m", "2", "--buffer", "0.6",
        )

        assert physical.exit_code == 0, physical.output
        a, b = json.loads(normalized.stdout), json.loads(physical.stdout)
        assert a["constants"]["N"] == b["constants"]["N"]
        for x, y in zip(a["cycles"], b["cycles"]):
            assert x["v0"] == pytest.approx(y["v0"], rel=1e-12)

    def test_verify(self, runner, config_file):
        result = invoke(
            runner, config_file, "classify", "--beta", "0.5", "--q", "0.9", "--b", "0.05",
            "--verify",
        )
        assert result.exit_code == 0, result.output
        assert json.loads(result.stdout)["simulator_agreement"]["agrees"] is True

    def test_negative_buffer(self, runner, config_file):
        result = invoke(runner, config_file, "classify", "--beta", "0.5", "--q", "0.9", "--b", "-1")
        assert result.exit_code == 2
        assert "invalid_parameters" in result.output

    def test_beta_out_of_range(self, runner, config_file):
        result = invoke(runner, config_file, "classify", "--beta", "0.995", "--q", "1", "--b", "1")
        assert result.exit_code == 2

    def test_mixed_parameter_sets(self, runner, config_file):
        result = invoke(
            runner, config_file, "classify", "--beta", "0.5", "--q", "0.9", "--b", "0.3",
            "--mu", "1",
        )
        assert result.exit_code == 2

    def test_seed_is_accepted(self, runner, config_file):
        result = invoke(
            runner, config_file, "classify", "--beta", "0.5", "--q", "0.9", "--b", "0.7",
            "--seed", "7",
        )
        assert result.exit_code == 0, result.output


class TestPareto:
    ARGS = ["pareto", "--mu", "1e7", "--rtt", "0.24", "--m", "40000", "--beta", "0.5"]

    def test_constraint(self, runner, config_file):
        result = invoke(
            runner, config_file, *self.ARGS, "--b-max", "3e6", "--points", "7",
            "--constraint", "gbar>=0.95mu",
        )

        assert result.exit_code == 0, result.output
        df = pd.read_csv(io.StringIO(result.stdout))
        assert list(df.columns) == [
            "B", "lambda_bar", "g_bar", "x_bar", "T_cycle", "regime", "empirical", "tag",
        ]
        tags = set(df["tag"].dropna())
        assert tags == {"knee", "optimum"}
        optimum = df[df["tag"] == "optimum"].iloc[0]
        assert optimum["g_bar"] == pytest.approx(0.95e7, rel=1e-6)

    def test_infeasible_constraint(self, runner, config_file):
        result = invoke(
            runner, config_file, *self.ARGS, "--b-max", "3e6", "--constraint", "gbar>=1.5mu"
        )
        assert result.exit_code == 3
        assert "infeasible" in result.output

    def test_empty_grid(self, runner, config_file):
        result = invoke(runner, config_file, *self.ARGS, "--b-max", "3e6", "--points", "0")
        assert result.exit_code == 2

    def test_hypothesis_outside_regime(self, runner, config_file):
        result = invoke(
            runner, config_file, "pareto", "--mu", "1", "--rtt", "0.9", "--m", "1",
            "--beta", "0.5", "--b-max", "1",
        )
        assert result.exit_code == 1
        assert "hypothesis" in result.output


class TestBmin:
    def test_curve(self, runner, config_file):
        result = invoke(
            runner, config_file, "bmin", "--mu", "600", "--rtt", "1", "--beta", "0.5",
            "--m-range", "1:5000", "--samples", "20",
        )

        assert result.exit_code == 0, result.output
        df = pd.read_csv(io.StringIO(result.stdout))
        assert list(df.columns) == ["m", "N", "B0", "envelope", "breakpoint", "tag"]
        grid = df[df["tag"].isna()]
        assert grid["breakpoint"].sum() == 6
        assert grid["m"].is_monotonic_increasing

        witness = df[df["tag"] == "witness"]
        assert len(witness) == 2
        a, b = witness.iloc[0], witness.iloc[1]
        assert a["m"] < 600.0 <= b["m"]
        assert a["B0"] < b["B0"]
        assert (a["N"], b["N"]) == (1, 2)

    def test_unit_defaults_to_config(self, runner, temp_dir, test_config):
        config = test_config.model_copy(
            update={"output": test_config.output.model_copy(update={"unit": "bits"})}
        )
        path = temp_dir / "bits.yaml"
        with open(path, "w") as f:
            yaml.safe_dump(config.model_dump(), f)

        result = invoke(
            runner, str(path), "bmin", "--mu", "600", "--rtt", "1", "--beta", "0.5",
            "--m-range", "1:5000", "--samples", "5", "--output", "curve.csv",
        )

        assert result.exit_code == 0, result.output
        out = Path(test_config.paths.output_dir)
        manifest = ManifestManager.load(out / "curve.csv.manifest.json")
        assert manifest is not None
        assert manifest.unit == "bits"

    def test_connections(self, runner, config_file):
        result = invoke(
            runner, config_file, "bmin", "--mu", "600", "--rtt", "1", "--beta", "0.5",
            "--m0", "1", "--n-range", "1:3",
        )

        assert result.exit_code == 0, result.output
        df = pd.read_csv(io.StringIO(result.stdout))
        assert df["n"].tolist() == [1, 2, 3]
        assert df["m"].tolist() == [1.0, 2.0, 3.0]

    def test_missing_range(self, runner, config_file):
        result = invoke(runner, config_file, "bmin", "--mu", "600", "--rtt", "1", "--beta", "0.5")
        assert result.exit_code == 2


class TestSimulateAndManifest:
    def test_outputs_and_manifest(self, runner, config_file, test_config):
        result = invoke(
            runner, config_file, "simulate", "--beta", "0.5", "--q", "0.9", "--b", "0.05",
            "--trace", "trace.csv", "--output", "sim.json",
        )
        assert result.exit_code == 0, result.output

        out = Path(test_config.paths.output_dir)
        body = json.loads((out / "sim.json").read_text())
        assert body["limit_cycle"]["order"] == 2
        assert body["limit_cycle"]["shape"] == "clipped"

        manifest = ManifestManager.load(out / "sim.json.manifest.json")
        assert manifest is not None
        assert manifest.command == "simulate"
        assert manifest.tolerances["xtol"] == test_config.solver.xtol
        for name in ("sim.json", "trace.csv"):
            digest = hashlib.sha256((out / name).read_bytes()).hexdigest()
            assert manifest.outputs[name] == digest

        trace = pd.read_csv(out / "trace.csv")
        assert trace["s"].is_monotonic_increasing

    def test_explicit_initial_state(self, runner, config_file):
        result = invoke(
            runner, config_file, "simulate", "--beta", "0.5", "--q", "0.9", "--b", "0.3",
            "--v-init", "0.600001", "--y-init", "0.3",
        )
        assert result.exit_code == 0, result.output
        assert json.loads(result.stdout)["limit_cycle"]["order"] == 2

    def test_cycle_cap(self, runner, config_file):
        result = invoke(
            runner, config_file, "simulate", "--beta", "0.5", "--q", "0.9", "--b", "0.3",
            "--cycles", "1",
        )
        assert result.exit_code == 1
        assert "convergence" in result.output

    def test_deterministic_outputs(self, runner, config_file, test_config):
        for name in ("a.json", "b.json"):
            result = invoke(
                runner, config_file, "classify", "--beta", "0.5", "--q", "0.35", "--b", "0.02",
                "--output", name,
            )
            assert result.exit_code == 0, result.output

        out = Path(test_config.paths.output_dir)
        assert (out / "a.json").read_text() == (out / "b.json").read_text()
        first = json.loads((out / "a.json.manifest.json").read_text())
        second = json.loads((out / "b.json.manifest.json").read_text())
        assert first["outputs"]["a.json"] == second["outputs"]["b.json"]


class TestSchema:
    def test_covers_report_fields(self, runner, config_file):
        result = invoke(runner, config_file, "schema")

        assert result.exit_code == 0, result.output
        schema = json.loads(result.stdout)
        assert set(ClassificationReport.model_fields) <= set(schema["properties"])
        assert {"constants_table", "unit", "simulator_agreement"} <= set(schema["properties"])


class TestGroup:
    def test_help_lists_commands(self, runner):
        result = runner.invoke(cli, ["--help"])

        assert result.exit_code == 0
        assert "Drop-Tail bottleneck" in result.output
        for command in ("classify", "pareto", "bmin", "simulate", "schema"):
            assert command in result.output
