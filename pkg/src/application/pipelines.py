from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from ..analysis.buffer_sizing import b_min_for_connections, buffer_curve, envelope
from ..analysis.cycle_classifier import classify, verify_classification
from ..analysis.pareto_metrics import (
    max_goodput_given_delay,
    min_delay_given_goodput,
    pareto_sweep,
    weighted_optimum,
)
from ..analysis.limit_map import configure_map
from ..analysis.roots import configure_solver
from ..models.cycles import ClassificationReport, SimulatorAgreement
from ..models.metrics import BufferCurve, ConstraintKind, ParetoOptimum, ParetoSet
from ..models.params import FluidParams, LinkParams, NormalizedParams
from ..models.simulation import SeedRule, SimConfig, SimResult
from ..simulation.fluid_simulator import FluidSimulator
from ..utils.config import Config
from ..utils.errors import InvalidParametersError
from ..utils.validators import ConstraintParser

Mapper = Callable[..., Any]


def configure_analysis(
    xtol: float, max_iterations: int, convergence_gap: float, max_map_iterations: int
) -> None:
    """Apply the solver section in this process; also the pool initializer."""
    configure_solver(xtol, max_iterations)
    configure_map(convergence_gap, max_map_iterations)


class AnalysisPipeline:
    """Runs each analysis end to end with the configured solver settings."""

    def __init__(self, config: Config):
        self.config = config
        configure_analysis(*self._solver_args())

    def _solver_args(self) -> Tuple[float, int, float, int]:
        solver = self.config.solver
        return (
            solver.xtol,
            solver.max_iterations,
            solver.convergence_gap,
            solver.max_map_iterations,
        )

    @contextmanager
    def _mapper(self) -> Iterator[Mapper]:
        """Plain map, or a process pool's map when more than one worker is configured."""
        workers = self.config.runtime.workers
        if workers <= 1:
            yield map
            return

        logger.info(f"Fanning out over {workers} worker processes")
        with ProcessPoolExecutor(
            max_workers=workers,
            initializer=configure_analysis,
            initargs=self._solver_args(),
        ) as pool:
            yield pool.map

    def classify(
        self, params: NormalizedParams, verify: bool = False
    ) -> Tuple[ClassificationReport, Optional[SimulatorAgreement]]:
        report = classify(
            params.beta, params.q, params.b, critical_tol=self.config.solver.critical_tol
        )
        logger.info(f"Classified {params.echo()}: orders {report.orders}")

        agreement = None
        if verify:
            agreement = verify_classification(
                report, max_cycles=self.config.simulation.max_cycles
            )
            if not agreement.agrees:
                logger.error(f"Simulator disagrees: {agreement.mismatches}")
        return report, agreement

    def pareto(
        self,
        link: LinkParams,
        buffers: Sequence[float],
        *,
        constraint: Optional[str] = None,
        weights: Optional[Tuple[float, float]] = None,
        empirical: bool = False,
    ) -> Tuple[ParetoSet, Optional[ParetoOptimum]]:
        with self._mapper() as mapper:
            pset = pareto_sweep(link, buffers, empirical=empirical, map_fn=mapper)

        optimum: Optional[ParetoOptimum] = None
        if constraint:
            kind, threshold = ConstraintParser.parse(constraint, link.mu)
            if kind is ConstraintKind.GOODPUT_AT_LEAST:
                optimum = min_delay_given_goodput(pset, threshold)
            else:
                optimum = max_goodput_given_delay(pset, threshold)
        elif weights is not None:
            optimum = weighted_optimum(pset, *weights)

        if optimum is not None:
            logger.info(f"Optimum ({optimum.kind.value}) at B={optimum.point.B:.6g}")
        return pset, optimum

    def buffer_curve(
        self, mu_T: float, beta: float, m_range: Tuple[float, float], samples: int
    ) -> BufferCurve:
        with self._mapper() as mapper:
            return buffer_curve(mu_T, beta, m_range, samples, map_fn=mapper)

    def buffer_for_connections(
        self, mu_T: float, beta: float, m0: float, counts: Sequence[int]
    ) -> List[Dict[str, Any]]:
        if not counts:
            raise InvalidParametersError("connection range is empty")
        n = len(counts)
        with self._mapper() as mapper:
            results = list(
                mapper(b_min_for_connections, [mu_T] * n, [beta] * n, [m0] * n, counts)
            )
        return [
            {"n": c, "m": c * m0, "N": N, "B0": B0, "envelope": envelope(mu_T, beta, c * m0)}
            for c, (N, B0) in zip(counts, results)
        ]

    def simulate(
        self,
        params: FluidParams,
        *,
        v_init: Optional[float] = None,
        y_init: Optional[float] = None,
        seed_rule: SeedRule = SeedRule.UPPER,
        max_cycles: Optional[int] = None,
        record_trace: bool = False,
    ) -> SimResult:
        sim = self.config.simulation
        options: Dict[str, Any] = {
            "max_cycles": max_cycles or sim.max_cycles,
            "warmup_cycles": sim.warmup_cycles,
            "measure_cycles": sim.measure_cycles,
            "record_trace": record_trace,
        }
        if v_init is None:
            cfg = SimConfig.seeded(params, seed_rule, offset=sim.seed_offset, **options)
        else:
            y0 = params.b if y_init is None else y_init
            cfg = SimConfig(params=params, v_init=v_init, y_init=y0, **options)

        result = FluidSimulator(cfg, convergence_gap=self.config.solver.convergence_gap).run()
        logger.info(
            f"Simulated {result.cycles_run} cycles "
            f"({result.transient_cycles} transient), limit order "
            f"{result.limit_cycle.order if result.limit_cycle else '-'}"
        )
        return result


def buffer_grid(lo: float, hi: float, points: int) -> List[float]:
    """Evenly spaced buffer grid including both ends."""
    if points < 1:
        raise InvalidParametersError(f"grid needs at least one point, got {points}")
    if hi < lo:
        raise InvalidParametersError(f"grid bounds reversed: {lo} > {hi}")
    return [float(x) for x in np.linspace(lo, hi, points)]
