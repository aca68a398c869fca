import pytest

from src.analysis.limit_map import build_context, configure_map, limit_value
from src.analysis.roots import configure_solver
from src.application.manifest import ManifestManager
from src.application.pipelines import AnalysisPipeline, buffer_grid
from src.models.params import LinkParams, NormalizedParams
from src.utils.errors import ConvergenceError, InvalidParametersError


@pytest.fixture(autouse=True)
def reset_solver():
    yield
    configure_solver()
    configure_map()


def with_section(config, section, **values):
    updated = getattr(config, section).model_copy(update=values)
    return config.model_copy(update={section: updated})


class TestSolverSettings:
    def test_map_iteration_cap_applied(self, test_config, example_one):
        config = with_section(test_config, "solver", max_map_iterations=1)
        AnalysisPipeline(config)
        ctx = build_context(NormalizedParams(b=0.3, **example_one))

        with pytest.raises(ConvergenceError):
            limit_value(ctx.lower_end + 1e-6, ctx)
        assert ManifestManager(config).tolerances()["max_map_iterations"] == 1

    def test_defaults_settle(self, test_config, example_one):
        AnalysisPipeline(test_config)
        ctx = build_context(NormalizedParams(b=0.3, **example_one))
        assert limit_value(ctx.lower_end + 1e-6, ctx)[1] == 2


class TestWorkerPool:
    def test_curve_matches_serial(self, test_config):
        serial = AnalysisPipeline(test_config).buffer_curve(600.0, 0.5, (1.0, 5000.0), 12)
        pooled_config = with_section(test_config, "runtime", workers=2)
        pooled = AnalysisPipeline(pooled_config).buffer_curve(600.0, 0.5, (1.0, 5000.0), 12)

        assert pooled.samples == serial.samples
        assert [s.m for s in pooled.samples] == sorted(s.m for s in pooled.samples)

    def test_connections_keep_request_order(self, test_config):
        counts = [5, 1, 3, 2]
        serial = AnalysisPipeline(test_config).buffer_for_connections(600.0, 0.5, 1.0, counts)
        pooled_config = with_section(test_config, "runtime", workers=2)
        pooled = AnalysisPipeline(pooled_config).buffer_for_connections(600.0, 0.5, 1.0, counts)

        assert [row["n"] for row in pooled] == counts
        assert pooled == serial

    def test_pareto_sweep_in_grid_order(self, test_config):
        link = LinkParams(mu=1e7, T=0.24, m=40_000.0, beta=0.5, unit="bits")
        grid = buffer_grid(0.0, 3e6, 6)
        pooled_config = with_section(test_config, "runtime", workers=2)

        pset, _ = AnalysisPipeline(pooled_config).pareto(link, grid)

        assert [p.B for p in pset.points] == grid


class TestBufferGrid:
    def test_includes_ends(self):
        assert buffer_grid(0.0, 1.0, 3) == [0.0, 0.5, 1.0]

    def test_rejects_bad_grids(self):
        with pytest.raises(InvalidParametersError):
            buffer_grid(0.0, 1.0, 0)
        with pytest.raises(InvalidParametersError):
            buffer_grid(1.0, 0.0, 3)
