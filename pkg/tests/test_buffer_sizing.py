import pytest

from src.analysis.buffer_sizing import (
    b_min,
    b_min_for_connections,
    breakpoints,
    buffer_curve,
    envelope,
    local_maximum,
    non_monotonicity_witness,
)
from src.models.params import FluidParams
from src.models.simulation import SeedRule, SimConfig
from src.simulation.fluid_simulator import run
from src.utils.errors import InvalidParametersError

MU_T = 600.0
BETA = 0.5


class TestBreakpoints:
    def test_values(self):
        assert breakpoints(MU_T, BETA, 10_000.0) == pytest.approx([600.0, 1800.0, 4200.0, 9000.0])

    def test_none_below_first(self):
        assert breakpoints(MU_T, BETA, 100.0) == []


class TestMinimalBuffer:
    def test_small_increment(self):
        N, B0 = b_min(MU_T, BETA, 0.01)
        assert N == 1
        assert B0 == pytest.approx(599.78, abs=0.05)

    def test_moderate_increment(self):
        N, B0 = b_min(MU_T, BETA, 10.0)
        assert N == 1
        assert B0 == pytest.approx(500.0, rel=1e-2)

    def test_order_increases_buffer(self):
        m = 100.0
        N, B0 = b_min(MU_T, BETA, m)
        _, B0_next = b_min(MU_T, BETA, m, order=N + 1)
        assert B0_next > B0

    def test_vanishes_at_breakpoint(self):
        m_1 = breakpoints(MU_T, BETA, 1000.0)[0]
        N, B0 = b_min(MU_T, BETA, m_1 * (1 - 1e-9))
        assert N == 1
        assert B0 < 1e-3 * b_min(MU_T, BETA, 10.0)[1]

    def test_jumps_after_breakpoint(self):
        m_1 = breakpoints(MU_T, BETA, 1000.0)[0]
        N_after, B_after = b_min(MU_T, BETA, m_1)
        assert N_after == 2
        assert B_after > b_min(MU_T, BETA, m_1 * (1 - 1e-9))[1]

    def test_rejects_bad_inputs(self):
        with pytest.raises(InvalidParametersError):
            b_min(MU_T, 1.5, 10.0)
        with pytest.raises(InvalidParametersError):
            b_min(MU_T, BETA, 0.0)
        with pytest.raises(InvalidParametersError):
            b_min(-1.0, BETA, 10.0)


class TestConnections:
    def test_matches_aggregate(self):
        assert b_min_for_connections(MU_T, BETA, 1.0, 10) == b_min(MU_T, BETA, 10.0)

    def test_rejects_zero_connections(self):
        with pytest.raises(InvalidParametersError):
            b_min_for_connections(MU_T, BETA, 1.0, 0)


class TestCurve:
    def test_breakpoints_inserted(self):
        curve = buffer_curve(MU_T, BETA, (1.0, 5000.0), 50)

        assert curve.breakpoints == pytest.approx([600.0, 1800.0, 4200.0])
        flagged = [s for s in curve.samples if s.breakpoint]
        assert len(flagged) == 6
        ms = [s.m for s in curve.samples]
        assert ms == sorted(ms)

    def test_order_switches_at_each_breakpoint(self):
        curve = buffer_curve(MU_T, BETA, (1.0, 5000.0), 50)
        flagged = [s for s in curve.samples if s.breakpoint]
        for below, at in zip(flagged[::2], flagged[1::2]):
            assert at.N == below.N + 1
            assert at.B0 > below.B0

    @pytest.mark.parametrize("beta", [0.1, 0.3, 0.5, 0.8, 0.95])
    def test_witness_straddles_first_breakpoint(self, beta):
        m_1 = MU_T * (1 - beta) / beta
        left, right = non_monotonicity_witness(MU_T, beta)

        assert left.m < m_1 <= right.m
        assert right.m == pytest.approx(m_1)
        assert (left.N, right.N) == (1, 2)
        assert left.B0 < right.B0

    def test_curve_carries_witness(self):
        curve = buffer_curve(MU_T, BETA, (1.0, 5000.0), 50)
        assert curve.witness == non_monotonicity_witness(MU_T, BETA)
        left, right = curve.witness
        assert left.m < 600.0 <= right.m

    def test_witness_rejects_bad_beta(self):
        with pytest.raises(InvalidParametersError):
            non_monotonicity_witness(MU_T, 1.0)

    def test_envelope_column(self):
        curve = buffer_curve(MU_T, BETA, (1.0, 100.0), 5)
        for sample in curve.samples:
            assert sample.envelope == pytest.approx(envelope(MU_T, BETA, sample.m))
            assert sample.envelope == pytest.approx(curve.envelope(sample.m))

    def test_rejects_bad_range(self):
        with pytest.raises(InvalidParametersError):
            buffer_curve(MU_T, BETA, (10.0, 1.0), 50)
        with pytest.raises(InvalidParametersError):
            buffer_curve(MU_T, BETA, (1.0, 10.0), 1)


class TestLocalMaxima:
    def test_approach_envelope(self):
        m, B = local_maximum(MU_T, BETA, 10)
        assert m == pytest.approx(MU_T * 511)
        assert m * B == pytest.approx(0.25 * MU_T**2 / 2, rel=0.02)

    def test_rejects_order_one(self):
        with pytest.raises(InvalidParametersError):
            local_maximum(MU_T, BETA, 1)


class TestFullUtilization:
    """B_0 is the smallest buffer that keeps the link busy on the limit cycle."""

    @staticmethod
    def simulate(m, B):
        params = FluidParams(mu=MU_T, T=1.0, m=m, beta=BETA, B=B)
        return run(SimConfig.seeded(params, SeedRule.UPPER))

    @pytest.mark.parametrize("m", [10.0, 100.0])
    def test_simulator_at_minimal_buffer(self, m):
        N, B0 = b_min(MU_T, BETA, m)

        above = self.simulate(m, B0 * (1 + 1e-3))
        below = self.simulate(m, B0 * (1 - 1e-2))

        assert above.limit_cycle.order == N
        assert above.g_bar == pytest.approx(MU_T, rel=1e-9)
        assert below.limit_cycle.order == N
        assert below.g_bar < MU_T
