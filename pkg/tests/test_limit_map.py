import pytest

from src.analysis.cycle_constants import a_star
from src.analysis.limit_map import (
    ReturnMapContext,
    build_context,
    compute_K,
    configure_map,
    empirical_basin_boundary,
    limit_value,
    phi_k,
    return_time,
    unclipped_fixed_point,
    varphi,
)
from src.analysis.model_core import rise_time_from_floor, segment_state
from src.models.params import NormalizedParams
from src.utils.errors import ConvergenceError, InvalidParametersError

SEED_OFFSET = 1e-6


def context(beta, q, b):
    return build_context(NormalizedParams(beta=beta, q=q, b=b))


class TestComputeK:
    def test_definition(self):
        assert compute_K(0.5, 1.2) == 1
        assert compute_K(0.5, 0.95) == 2
        assert compute_K(0.5, 0.2) == 3

    def test_large_window(self):
        assert compute_K(0.9, 100.0) == 1


class TestFixedPoints:
    def test_unclipped_one_cycle(self):
        v0, s1 = unclipped_fixed_point(0.5, 1.6, 1)
        assert s1 == pytest.approx(0.3915, abs=5e-4)
        assert v0 == pytest.approx(s1 + 1.0)
        # the trajectory from (b, v0) returns to b after s1
        _, y = segment_state(v0, 0.7, 0.9, s1)
        assert y == pytest.approx(0.7, abs=1e-10)

    def test_existence_ends_at_threshold(self):
        A2 = a_star(0.5, 2).finite()
        inside = unclipped_fixed_point(0.5, A2 * (1 - 1e-7), 2)
        assert inside is not None
        assert inside[0] == pytest.approx(0.5 * A2, rel=1e-4)
        assert unclipped_fixed_point(0.5, A2 * 1.01, 2) is None

    def test_none_below_window(self):
        assert unclipped_fixed_point(0.5, 0.9, 1) is None


class TestReturnMap:
    def test_coexistence_context(self, example_one):
        ctx = context(b=0.3, **example_one)
        assert ctx.K == 1
        assert ctx.d is not None
        assert ctx.lower_end < ctx.d < ctx.A
        assert ctx.V1 is not None and ctx.V2 is not None
        assert ctx.V1 < ctx.V2

    def test_fixed_point_of_phi(self, example_one):
        ctx = context(b=0.3, **example_one)
        assert phi_k(ctx.V2, ctx.K, ctx) == pytest.approx(ctx.V2, rel=1e-10)
        assert phi_k(ctx.V1, ctx.K + 1, ctx) == pytest.approx(ctx.V1, rel=1e-10)

    def test_return_time_positive(self, example_one):
        ctx = context(b=0.3, **example_one)
        assert return_time(ctx.V2, ctx) > 0

    def test_limits_from_both_ends(self, example_one):
        ctx = context(b=0.3, **example_one)

        upper, k_upper = limit_value(ctx.A - SEED_OFFSET, ctx)
        lower, k_lower = limit_value(ctx.lower_end + SEED_OFFSET, ctx)

        assert k_upper == 1
        assert upper == pytest.approx(ctx.V2, rel=1e-9)
        assert k_lower == 2
        assert lower == pytest.approx(ctx.V1, rel=1e-9)

    def test_start_above_ceiling_jumps_first(self, example_one):
        ctx = context(b=0.3, **example_one)
        value, order = limit_value(5.0, ctx)
        assert order in (1, 2)
        assert ctx.lower_end <= value < ctx.A

    def test_clipped_limit(self, example_one):
        beta, q, b = example_one["beta"], example_one["q"], 0.05
        ctx = context(beta, q, b)
        expected = beta**2 * (q + rise_time_from_floor(b) + 1.0)

        value, order = limit_value(ctx.A - SEED_OFFSET, ctx)
        step = varphi(value, ctx)

        assert order == 2
        assert value == pytest.approx(expected, rel=1e-9)
        assert step.clipped is True

    def test_iteration_cap(self, example_one):
        ctx = context(b=0.3, **example_one)
        with pytest.raises(ConvergenceError) as excinfo:
            limit_value(ctx.lower_end + SEED_OFFSET, ctx, max_iterations=1)
        assert excinfo.value.tail

    def test_empirical_boundary_separates_orders(self, example_one):
        ctx = context(b=0.3, **example_one)
        boundary = empirical_basin_boundary(ctx)

        assert boundary is not None
        assert ctx.lower_end < boundary < ctx.A
        below = limit_value(boundary - 1e-6, ctx)[1]
        above = limit_value(boundary + 1e-6, ctx)[1]
        assert below != above

    def test_context_is_frozen(self, example_one):
        ctx = context(b=0.3, **example_one)
        assert isinstance(ctx, ReturnMapContext)
        with pytest.raises(Exception):
            ctx.K = 5

    def test_start_below_lower_end_rejected(self, example_one):
        ctx = context(b=0.3, **example_one)
        with pytest.raises(InvalidParametersError):
            limit_value(0.5 * ctx.lower_end, ctx)

    def test_configured_iteration_cap(self, example_one):
        ctx = context(b=0.3, **example_one)
        configure_map(max_map_iterations=1)
        try:
            with pytest.raises(ConvergenceError):
                limit_value(ctx.lower_end + SEED_OFFSET, ctx)
        finally:
            configure_map()
        assert limit_value(ctx.lower_end + SEED_OFFSET, ctx)[1] == 2


GRID = [
    (0.5, 0.9, 0.3),
    (0.5, 0.9, 0.7),
    (0.5, 0.9, 0.05),
    (0.5, 0.35, 0.02),
    (0.3, 1.2, 0.4),
    (0.8, 3.0, 1.0),
]


class TestMapProperties:
    @pytest.mark.parametrize("beta,q,b", GRID)
    def test_phi_is_decreasing_contraction(self, beta, q, b, rng):
        ctx = context(beta, q, b)
        lo, hi = ctx.lower_end, ctx.A * (1 - 1e-3)
        for k in (ctx.K, ctx.K + 1):
            for _ in range(20):
                u = rng.uniform(lo, hi - 1e-3 * ctx.A)
                w = rng.uniform(u + 1e-3 * ctx.A, hi)
                ratio = (phi_k(u, k, ctx) - phi_k(w, k, ctx)) / (w - u)
                assert phi_k(w, k, ctx) < phi_k(u, k, ctx)
                assert 0 < ratio < beta**k

    @pytest.mark.parametrize("beta,q,b", GRID)
    def test_settled_order_is_K_or_next(self, beta, q, b, rng):
        ctx = context(beta, q, b)
        for v0 in rng.uniform(ctx.lower_end, ctx.A, 20):
            _, order = limit_value(float(v0), ctx)
            assert order in (ctx.K, ctx.K + 1)

    def test_limit_constant_within_each_basin(self, example_one, rng):
        ctx = context(b=0.3, **example_one)
        d = ctx.d
        margin = 0.02 * (ctx.A - ctx.lower_end)

        upper = [limit_value(float(v), ctx) for v in rng.uniform(d + margin, ctx.A, 20)]
        lower = [
            limit_value(float(v), ctx) for v in rng.uniform(ctx.lower_end, d - margin, 20)
        ]

        assert {order for _, order in upper} == {ctx.K}
        assert {order for _, order in lower} == {ctx.K + 1}
        for value, _ in upper:
            assert value == pytest.approx(ctx.V2, rel=1e-9)
        for value, _ in lower:
            assert value == pytest.approx(ctx.V1, rel=1e-9)

    def test_clipped_limit_is_global(self, example_one, rng):
        ctx = context(b=0.05, **example_one)
        limits = [limit_value(float(v), ctx) for v in rng.uniform(ctx.lower_end, ctx.A, 20)]

        first, order = limits[0]
        assert order == 2
        for value, k in limits:
            assert k == order
            assert value == pytest.approx(first, rel=1e-9)
