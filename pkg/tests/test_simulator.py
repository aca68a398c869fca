import math

import pytest
from pydantic import ValidationError

from src.analysis.cycle_constants import critical_buffer
from src.analysis.model_core import rise_time_from_floor
from src.analysis.pareto_metrics import knee_buffer, metrics
from src.models.cycles import CycleShape
from src.models.params import FluidParams
from src.models.simulation import Segment, SegmentKind, SeedRule, SimConfig, TraceEvent
from src.simulation.fluid_simulator import FluidSimulator, classify_shape, run, time_convert
from src.utils.errors import ConvergenceError


def seeded(b, rule=SeedRule.UPPER, beta=0.5, q=0.9, **kwargs):
    return SimConfig.seeded(FluidParams.from_normalized(beta, q, b), rule, **kwargs)


class TestTimeConversion:
    def test_empty_queue(self):
        params = FluidParams(mu=10.0, T=0.5, m=2.0, beta=0.5, B=4.0)
        seg = Segment(kind=SegmentKind.SLIDE, s_start=0.0, length=2.0, v0=1.0, y0=0.0)
        assert time_convert(seg, params) == pytest.approx(1.0)

    def test_overflow(self):
        params = FluidParams(mu=10.0, T=0.5, m=2.0, beta=0.5, B=4.0)
        seg = Segment(kind=SegmentKind.OVERFLOW, s_start=0.0, length=1.0, v0=5.0, y0=2.0)
        assert time_convert(seg, params) == pytest.approx(0.5 + 4.0 / 10.0)


class TestShape:
    def test_classify_shape(self):
        assert classify_shape(1.39, 0.7, 0.9) is CycleShape.UNCLIPPED
        assert classify_shape(0.1, 0.3, 0.9) is CycleShape.CLIPPED


class TestExampleOneDynamics:
    def test_coexisting_limits(self):
        upper = run(seeded(0.3, SeedRule.UPPER))
        lower = run(seeded(0.3, SeedRule.LOWER))

        assert upper.limit_cycle.order == 1
        assert lower.limit_cycle.order == 2
        assert upper.converged and lower.converged
        assert 2 in lower.jump_multiplicities

    def test_final_state_sits_on_the_limit(self):
        result = run(seeded(0.3, SeedRule.UPPER))
        state = result.final_state

        assert state is not None
        assert state.y == pytest.approx(0.3)
        assert state.v == pytest.approx(result.limit_cycle.v0, rel=1e-9)
        assert state.s > result.limit_cycle.S_cycle

    def test_clipped_limit(self):
        result = run(seeded(0.05))
        cycle = result.limit_cycle

        assert cycle.order == 2
        assert cycle.shape is CycleShape.CLIPPED
        assert cycle.clip_duration > 0
        assert cycle.v0 == pytest.approx(0.25 * (0.9 + rise_time_from_floor(0.05) + 1.0))
        assert result.g_bar < 1.0

    def test_critical_limit(self):
        b0 = critical_buffer(0.5, 0.9, 2)
        result = run(seeded(b0))
        assert result.limit_cycle.shape is CycleShape.CRITICAL

    def test_full_utilization(self):
        result = run(seeded(0.7))
        assert result.limit_cycle.order == 1
        assert result.limit_cycle.shape is CycleShape.UNCLIPPED
        assert result.g_bar == pytest.approx(1.0, rel=1e-9)
        assert result.lambda_bar > result.g_bar

    def test_deterministic(self):
        first = run(seeded(0.3, record_trace=True))
        second = run(seeded(0.3, record_trace=True))
        assert first.model_dump() == second.model_dump()


class TestAgainstClosedForms:
    def test_cycle_time(self, example_link):
        p = example_link.with_buffer(0.5 * knee_buffer(example_link))
        result = run(SimConfig.seeded(p, SeedRule.UPPER))
        assert result.T_cycle_measured == pytest.approx(metrics(p).T_cycle, rel=1e-9)


class TestTrace:
    @pytest.fixture
    def clipped_trace(self):
        return run(seeded(0.05, record_trace=True)).trace

    def test_strictly_increasing(self, clipped_trace):
        s = [row.s for row in clipped_trace]
        t = [row.t_seconds for row in clipped_trace]
        assert all(b > a for a, b in zip(s, s[1:]))
        assert all(b >= a for a, b in zip(t, t[1:]))

    def test_slides_follow_touches(self, clipped_trace):
        events = [row.event for row in clipped_trace]
        assert TraceEvent.SLIDE_END in events
        for before, row in zip(clipped_trace, clipped_trace[1:]):
            if row.event is TraceEvent.SLIDE_END:
                assert before.event is TraceEvent.HIT_0
                assert row.y == 0.0
                assert row.v == pytest.approx(0.9)

    def test_jumps_are_powers_of_beta(self, clipped_trace):
        pairs = [
            (before, row)
            for before, row in zip(clipped_trace, clipped_trace[1:])
            if row.event is TraceEvent.JUMP and before.event is TraceEvent.HIT_B
        ]
        assert pairs
        for hit, landed in pairs:
            k = math.log(landed.v / (hit.v + 1.0)) / math.log(0.5)
            assert k == pytest.approx(round(k), abs=1e-9)
            assert round(k) >= 1
            assert landed.y == pytest.approx(0.05)

    def test_physical_columns(self, clipped_trace):
        for row in clipped_trace:
            assert row.w == pytest.approx(row.v)
            assert row.x == pytest.approx(row.y)
            assert row.goodput <= max(row.rate, 1.0) + 1e-12

    def test_no_trace_by_default(self):
        assert run(seeded(0.05)).trace is None


class TestFailures:
    def test_cycle_cap(self):
        with pytest.raises(ConvergenceError) as excinfo:
            FluidSimulator(seeded(0.3, max_cycles=1)).run()
        assert excinfo.value.tail

    def test_initial_queue_above_buffer(self):
        params = FluidParams.from_normalized(0.5, 0.9, 0.3)
        with pytest.raises(ValidationError):
            SimConfig(params=params, v_init=1.0, y_init=0.5)
