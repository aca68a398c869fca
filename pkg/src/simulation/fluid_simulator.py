"""Event-driven oracle for the hybrid fluid model.

The state advances segment by segment in transformed time using the closed
forms of model_core; events are found by root finding on those closed forms,
so no step size is involved anywhere. A cycle runs from one post-jump state
to the next.
"""

import math
from collections import Counter, deque
from typing import Deque, Dict, List, Optional, Tuple

from loguru import logger
from pydantic import BaseModel

from ..analysis.model_core import (
    TOUCH_TOL,
    SegmentIntegrals,
    hit_time_to_level,
    jump,
    minimum_value,
    normalize,
    segment_integrals,
    segment_minimum,
    segment_state,
)
from ..models.cycles import CycleDescriptor, CycleShape
from ..models.params import Direction, FluidParams, NormalizedParams, State
from ..models.simulation import (
    Segment,
    SegmentKind,
    SimConfig,
    SimResult,
    TraceEvent,
    TraceRow,
)
from ..utils.errors import ConvergenceError

CONVERGENCE_GAP = 1e-12
SHAPE_TOL = 1e-9
TRACE_SAMPLES = 16
TAIL_LENGTH = 12


class CycleRecord(BaseModel):
    """One completed cycle: post-jump anchor, path totals and the closing jump."""

    v0: float
    k: int = 0
    s_to_overflow: float = 0.0
    slide: float = 0.0
    lambda_integral: float = 0.0
    goodput_integral: float = 0.0
    x_integral: float = 0.0
    seconds: float = 0.0


def _constant_integrals(seg: Segment) -> SegmentIntegrals:
    L = seg.length
    return SegmentIntegrals(seg.v0 * L + 0.5 * L * L, seg.y0 * L, seg.y0 * seg.y0 * L)


def integrals_of(seg: Segment, q: float) -> SegmentIntegrals:
    if seg.kind is SegmentKind.FREE:
        return segment_integrals(seg.v0, seg.y0, q, seg.length)
    return _constant_integrals(seg)


def time_convert(segment: Segment, params: FluidParams) -> float:
    """Wall-clock seconds spent on a segment: dt = (T + m*y/mu) ds."""
    ints = integrals_of(segment, params.q)
    return params.T * segment.length + params.m / params.mu * ints.int_y


def classify_shape(v0: float, b: float, q: float, tol: float = SHAPE_TOL) -> CycleShape:
    """Shape from the unconstrained minimum of the post-jump free segment."""
    y_min = minimum_value(v0, b, q)
    if y_min < -tol:
        return CycleShape.CLIPPED
    if y_min <= tol:
        return CycleShape.CRITICAL
    return CycleShape.UNCLIPPED


class FluidSimulator:
    """Runs one configuration to its limit cycle and measures averages on it."""

    def __init__(self, config: SimConfig, convergence_gap: float = CONVERGENCE_GAP):
        self.config = config
        self.params = config.params
        self.norm: NormalizedParams = normalize(config.params)
        self.convergence_gap = convergence_gap
        self.trace: List[TraceRow] = []
        self._s = 0.0
        self._t = 0.0

    # trace bookkeeping

    def _record(self, v: float, y: float, event: TraceEvent, overflow: bool = False) -> None:
        if not self.config.record_trace:
            return
        if self.trace and self._s <= self.trace[-1].s:
            return
        p = self.params
        w = p.m * v
        x = p.m * y
        rate = w / (p.T + x / p.mu)
        self.trace.append(
            TraceRow(
                t_seconds=self._t,
                s=self._s,
                v=v,
                y=y,
                event=event,
                w=w,
                x=x,
                rate=rate,
                goodput=p.mu if overflow else rate,
            )
        )

    def _sample_free(self, seg: Segment) -> None:
        if not self.config.record_trace or seg.length <= 0.0:
            return
        q = self.norm.q
        s_base, t_base = self._s, self._t
        for i in range(1, TRACE_SAMPLES):
            ds = seg.length * i / TRACE_SAMPLES
            v, y = segment_state(seg.v0, seg.y0, q, ds)
            self._s = s_base + ds
            partial = seg.model_copy(update={"length": ds})
            self._t = t_base + time_convert(partial, self.params)
            self._record(v, max(y, 0.0), TraceEvent.SEGMENT)
        self._s, self._t = s_base, t_base

    # segment accounting

    def _advance(self, seg: Segment, record: Optional[CycleRecord]) -> None:
        p = self.params
        ints = integrals_of(seg, self.norm.q)
        seconds = p.T * seg.length + p.m / p.mu * ints.int_y
        if seg.kind is SegmentKind.FREE:
            self._sample_free(seg)
        self._s += seg.length
        self._t += seconds
        if record is None:
            return

        sent = p.m * ints.int_v
        record.lambda_integral += sent
        record.goodput_integral += p.mu * seconds if seg.kind is SegmentKind.OVERFLOW else sent
        record.x_integral += p.m * p.T * ints.int_y + p.m**2 / p.mu * ints.int_y2
        record.seconds += seconds
        if seg.kind is SegmentKind.SLIDE:
            record.slide += seg.length
        if seg.kind is not SegmentKind.OVERFLOW:
            record.s_to_overflow += seg.length

    def _to_next_jump(self, v: float, y: float, record: Optional[CycleRecord]) -> Tuple[float, int]:
        """Follow the path from (v, y) through overflow and the jump that ends it."""
        q, b, A = self.norm.q, self.norm.b, self.norm.A

        while True:
            if y <= 0.0 and v < q:
                seg = Segment(kind=SegmentKind.SLIDE, s_start=self._s, length=q - v, v0=v, y0=0.0)
                self._advance(seg, record)
                v, y = q, 0.0
                if seg.length > TOUCH_TOL:
                    self._record(v, y, TraceEvent.SLIDE_END)
                continue

            if y >= b and v >= A:
                self._record(v, b, TraceEvent.HIT_B, overflow=True)
                seg = Segment(kind=SegmentKind.OVERFLOW, s_start=self._s, length=1.0, v0=v, y0=b)
                self._advance(seg, record)
                result = jump(v + 1.0, A, self.norm.beta)
                self._record(result.v_after, b, TraceEvent.JUMP)
                return result.v_after, result.k

            touch = hit_time_to_level(v, y, q, 0.0, Direction.FALLING)
            if touch is not None:
                seg = Segment(kind=SegmentKind.FREE, s_start=self._s, length=touch, v0=v, y0=y)
                self._advance(seg, record)
                v, y = v + touch, 0.0
                self._record(v, y, TraceEvent.HIT_0)
                continue

            rise = hit_time_to_level(v, y, q, b, Direction.RISING)
            if rise is None:
                raise ConvergenceError(f"no event ahead of v={v}, y={y}")
            seg = Segment(kind=SegmentKind.FREE, s_start=self._s, length=rise, v0=v, y0=y)
            self._advance(seg, record)
            # snap onto the ceiling; a tangent touch still counts as overflow
            v, y = max(v + rise, A), b

    def _descriptor(self, rec: CycleRecord) -> CycleDescriptor:
        q, b = self.norm.q, self.norm.b
        shape = classify_shape(rec.v0, b, q)
        s0 = segment_minimum(rec.v0, b, q)
        y_min = 0.0 if shape is CycleShape.CLIPPED else minimum_value(rec.v0, b, q)
        return CycleDescriptor(
            order=rec.k,
            shape=shape,
            v0=rec.v0,
            s1=rec.s_to_overflow,
            s0=None if shape is CycleShape.CLIPPED else s0,
            y_min=y_min,
            S_cycle=rec.s_to_overflow + 1.0,
            clip_duration=rec.slide,
        )

    def run(self) -> SimResult:
        cfg = self.config
        self._record(cfg.v_init, cfg.y_init, TraceEvent.SEGMENT)
        v, _ = self._to_next_jump(cfg.v_init, cfg.y_init, None)

        tail: Deque[float] = deque([v], maxlen=TAIL_LENGTH)
        multiplicities: Counter[int] = Counter()
        limit: Optional[CycleDescriptor] = None
        measured: List[CycleRecord] = []
        transient = 0
        prev_k = 0
        cycles = 0

        while cycles < cfg.max_cycles:
            rec = CycleRecord(v0=v)
            v, rec.k = self._to_next_jump(v, self.norm.b, rec)
            cycles += 1
            multiplicities[rec.k] += 1
            tail.append(v)

            if limit is None:
                settled = abs(v - rec.v0) < self.convergence_gap * max(1.0, abs(v))
                if settled and rec.k == prev_k and cycles > cfg.warmup_cycles:
                    limit = self._descriptor(rec)
                    transient = cycles
                    logger.debug(
                        f"limit cycle after {cycles} cycles: "
                        f"{limit.order}-cycle, {limit.shape.value}"
                    )
                prev_k = rec.k
                continue

            measured.append(rec)
            if len(measured) >= cfg.measure_cycles:
                break

        if limit is None or len(measured) < cfg.measure_cycles:
            raise ConvergenceError(
                f"no limit cycle within {cfg.max_cycles} cycles for {self.norm.echo()}",
                tail=list(tail),
            )
        final = State(s=self._s, v=v, y=self.norm.b)
        return self._summarize(limit, measured, multiplicities, cycles, transient, final)

    def _summarize(
        self,
        limit: CycleDescriptor,
        measured: List[CycleRecord],
        multiplicities: Counter[int],
        cycles: int,
        transient: int,
        final: State,
    ) -> SimResult:
        seconds = math.fsum(r.seconds for r in measured)
        histogram: Dict[int, int] = dict(sorted(multiplicities.items()))
        return SimResult(
            limit_cycle=limit,
            lambda_bar=math.fsum(r.lambda_integral for r in measured) / seconds,
            g_bar=math.fsum(r.goodput_integral for r in measured) / seconds,
            x_bar=math.fsum(r.x_integral for r in measured) / seconds,
            T_cycle_measured=seconds / len(measured),
            jump_multiplicities=histogram,
            converged=True,
            cycles_run=cycles,
            transient_cycles=transient,
            final_state=final,
            trace=self.trace if self.config.record_trace else None,
        )


def run(config: SimConfig, convergence_gap: float = CONVERGENCE_GAP) -> SimResult:
    return FluidSimulator(config, convergence_gap=convergence_gap).run()
