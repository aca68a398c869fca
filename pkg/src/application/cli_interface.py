import json
import sys
from functools import wraps
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Tuple

import click
from loguru import logger
from pydantic import ValidationError
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from ..analysis.model_core import normalize
from ..data_access.data_normalizer import DataNormalizer
from ..models.cycles import ClassificationReport, SimulatorAgreement
from ..models.metrics import BufferCurve, ParetoOptimum, ParetoSet
from ..models.params import DataUnit, FluidParams, LinkParams, NormalizedParams
from ..models.simulation import SeedRule, SimResult
from ..utils.config import Config
from ..utils.errors import AimdModelError, InvalidParametersError
from ..utils.logger import setup_logger
from ..utils.validators import ParameterValidator, RangeParser
from .manifest import ManifestManager
from .pipelines import AnalysisPipeline, buffer_grid

# human-readable output never goes to stdout, which carries the payload
console = Console(stderr=True)


class CLIInterface:
    """Command-line front end for the AIMD / Drop-Tail fluid model."""

    def __init__(self, config_path: str = "config/config.yaml", pretty: bool = False):
        self.config = Config.from_yaml(config_path)
        setup_logger(self.config)
        self.pipeline = AnalysisPipeline(self.config)
        self.manifests = ManifestManager(self.config)
        self.pretty = pretty

    # parameter handling

    @staticmethod
    def resolve_params(
        beta: Optional[float],
        q: Optional[float],
        b: Optional[float],
        mu: Optional[float],
        rtt: Optional[float],
        m: Optional[float],
        buffer: Optional[float],
        unit: str,
    ) -> Tuple[NormalizedParams, Optional[FluidParams]]:
        """Normalized triple from either the normalized or the physical option set."""
        normalized_given = q is not None or b is not None
        physical_given = any(v is not None for v in (mu, rtt, m, buffer))
        if normalized_given and physical_given:
            raise InvalidParametersError("give either --q/--b or --mu/--rtt/--m/--buffer, not both")
        if beta is None:
            raise InvalidParametersError("--beta is required")

        if physical_given:
            if mu is None or rtt is None or m is None or buffer is None:
                raise InvalidParametersError("--mu, --rtt, --m and --buffer are all required")
            ParameterValidator.require(
                ParameterValidator.validate_physical(mu, rtt, m, beta, buffer)
            )
            fluid = FluidParams(mu=mu, T=rtt, m=m, beta=beta, B=buffer, unit=unit)
            return normalize(fluid), fluid

        if q is None or b is None:
            raise InvalidParametersError("--q and --b are both required")
        ParameterValidator.require(ParameterValidator.validate_normalized(beta, q, b))
        return NormalizedParams(beta=beta, q=q, b=b), None

    # output handling

    def emit(
        self,
        command: str,
        parameters: Dict[str, Any],
        unit: str,
        payload: str,
        output: Optional[str],
        extra: Optional[Dict[str, str]] = None,
    ) -> None:
        """Payload to stdout, or to ``output`` with a manifest beside it."""
        if output is None:
            click.echo(payload, nl=False)
            for path, text in (extra or {}).items():
                DataNormalizer.write_text_atomic(self.manifests.resolve(path), text)
            return

        manifest = self.manifests.create(command, parameters, unit)
        target = self.manifests.resolve(output)
        self.manifests.record(manifest, target, DataNormalizer.write_text_atomic(target, payload))
        for path, text in (extra or {}).items():
            extra_target = self.manifests.resolve(path)
            digest = DataNormalizer.write_text_atomic(extra_target, text)
            self.manifests.record(manifest, extra_target, digest)
        self.manifests.save(manifest, target)

    def csv(self, df: Any) -> str:
        return DataNormalizer.to_csv(df, self.config.output.float_digits)

    # commands

    def run_classify(
        self, params: NormalizedParams, physical: Optional[FluidParams], unit: str,
        verify: bool, output: Optional[str],
    ) -> ClassificationReport:
        report, agreement = self.pipeline.classify(params, verify=verify)
        body: Dict[str, Any] = report.model_dump(mode="json")
        body["constants_table"] = dict(report.constants.table_rows())
        body["unit"] = unit
        if agreement is not None:
            body["simulator_agreement"] = agreement.model_dump(mode="json")

        echo = physical.model_dump(mode="json") if physical else params.echo()
        self.emit("classify", echo, unit, DataNormalizer.to_json(body), output)
        if self.pretty:
            self._display_report(report, agreement)
        return report

    def run_pareto(
        self, link: LinkParams, b_min: float, b_max: float, points: int,
        constraint: Optional[str], weights: Optional[Tuple[float, float]],
        empirical: bool, output: Optional[str],
    ) -> Tuple[ParetoSet, Optional[ParetoOptimum]]:
        grid = buffer_grid(b_min, b_max, points)
        pset, optimum = self.pipeline.pareto(
            link, grid, constraint=constraint, weights=weights, empirical=empirical
        )
        df = DataNormalizer.pareto_frame(pset, optimum)
        echo = {
            **link.model_dump(mode="json"), "b_min": b_min, "b_max": b_max,
            "points": points, "constraint": constraint, "weights": weights,
            "empirical": empirical,
        }
        self.emit("pareto", echo, link.unit.value, self.csv(df), output)
        if self.pretty:
            self._display_pareto(pset, optimum)
        return pset, optimum

    def run_bmin(
        self, mu_T: float, beta: float, m_range: Optional[Tuple[float, float]],
        samples: int, m0: Optional[float], n_range: Optional[str], unit: str,
        output: Optional[str],
    ) -> Optional[BufferCurve]:
        echo: Dict[str, Any] = {"mu_T": mu_T, "beta": beta, "samples": samples}
        if m0 is not None:
            if n_range is None:
                raise InvalidParametersError("--m0 needs --n-range")
            counts = RangeParser.parse_counts(n_range)
            rows = self.pipeline.buffer_for_connections(mu_T, beta, m0, counts)
            echo.update({"m0": m0, "n_range": n_range})
            self.emit("bmin", echo, unit, self.csv(DataNormalizer.connections_frame(rows)), output)
            return None

        if m_range is None:
            raise InvalidParametersError("give --m-range, or --m0 with --n-range")
        curve = self.pipeline.buffer_curve(mu_T, beta, m_range, samples)
        echo["m_range"] = list(m_range)
        self.emit("bmin", echo, unit, self.csv(DataNormalizer.curve_frame(curve)), output)
        if self.pretty:
            self._display_curve(curve)
        return curve

    def run_simulate(
        self, fluid: FluidParams, v_init: Optional[float], y_init: Optional[float],
        seed_rule: SeedRule, cycles: Optional[int], trace: Optional[str],
        output: Optional[str],
    ) -> SimResult:
        result = self.pipeline.simulate(
            fluid, v_init=v_init, y_init=y_init, seed_rule=seed_rule,
            max_cycles=cycles, record_trace=trace is not None,
        )
        body = result.model_dump(mode="json", exclude={"trace"})
        body["unit"] = fluid.unit.value

        extra: Dict[str, str] = {}
        if trace is not None and result.trace is not None:
            extra[trace] = self.csv(DataNormalizer.trace_frame(result.trace))
        echo = {
            **fluid.model_dump(mode="json"), "v_init": v_init, "y_init": y_init,
            "seed_rule": seed_rule.value, "cycles": cycles,
        }
        self.emit("simulate", echo, fluid.unit.value, DataNormalizer.to_json(body), output, extra)
        if self.pretty:
            self._display_simulation(result)
        return result

    def run_schema(self) -> str:
        schema_path = Path(self.config.paths.schema_file)
        if not schema_path.exists():
            raise AimdModelError(f"schema file not found: {schema_path}")
        text = schema_path.read_text()
        click.echo(text, nl=not text.endswith("\n"))
        return text

    # rich display on stderr

    def _display_report(
        self, report: ClassificationReport, agreement: Optional[SimulatorAgreement]
    ) -> None:
        table = Table(title="Derived constants", show_header=True)
        table.add_column("Constant", style="cyan")
        table.add_column("Value", style="green")
        for name, value in report.constants.table_rows():
            table.add_row(name, value)
        console.print(table)

        cycles = Table(title="Limit cycles", show_header=True)
        for column in ("Order", "Shape", "v0", "S_cycle", "y_min"):
            cycles.add_column(column, style="cyan" if column == "Order" else "green")
        for c in report.cycles:
            cycles.add_row(
                str(c.order), c.shape.value, f"{c.v0:.6g}", f"{c.S_cycle:.6g}", f"{c.y_min:.3g}"
            )
        console.print(cycles)

        verdict = "single 1-cycle" if report.single_jump_only else "multiple jumps possible"
        lines = (
            f"Case: {report.case_tag.value}\n"
            f"Single-jump condition: {report.pro2_condition.value} ({verdict})"
        )
        if agreement is not None:
            status = "[green]agrees[/green]" if agreement.agrees else "[red]disagrees[/red]"
            lines += f"\nSimulator: {status} over {agreement.runs} runs"
        console.print(Panel.fit(lines, border_style="blue"))

    def _display_pareto(self, pset: ParetoSet, optimum: Optional[ParetoOptimum]) -> None:
        table = Table(title="Pareto set", show_header=True)
        for column in ("B", "g_bar", "x_bar", "regime"):
            table.add_column(column, style="cyan" if column == "B" else "green")
        for pt in pset.points:
            table.add_row(f"{pt.B:.6g}", f"{pt.g_bar:.6g}", f"{pt.x_bar:.6g}", pt.regime.value)
        console.print(table)
        if pset.knee is not None:
            console.print(f"[bold]Knee[/bold] at B = {pset.knee.B:.6g}")
        if optimum is not None:
            console.print(
                f"[bold]Optimum[/bold] ({optimum.kind.value}) at B = {optimum.point.B:.6g}"
            )

    def _display_curve(self, curve: BufferCurve) -> None:
        table = Table(title="Minimal buffer", show_header=True)
        for column in ("m", "N", "B0", "envelope"):
            table.add_column(column, style="cyan" if column == "m" else "green")
        for s in curve.samples:
            table.add_row(f"{s.m:.6g}", str(s.N), f"{s.B0:.6g}", f"{s.envelope:.6g}")
        console.print(table)
        if curve.witness is not None:
            a, b = curve.witness
            console.print(
                f"[bold]Not monotone[/bold]: B0({a.m:.6g}) = {a.B0:.6g} "
                f"< B0({b.m:.6g}) = {b.B0:.6g}"
            )

    def _display_simulation(self, result: SimResult) -> None:
        table = Table(title="Simulation", show_header=True)
        table.add_column("Metric", style="cyan")
        table.add_column("Value", style="green")
        rows = {
            "lambda_bar": result.lambda_bar,
            "g_bar": result.g_bar,
            "x_bar": result.x_bar,
            "T_cycle": result.T_cycle_measured,
            "cycles_run": result.cycles_run,
        }
        for key, value in rows.items():
            table.add_row(key.replace("_", " "), f"{value:.6g}")
        if result.limit_cycle is not None:
            cycle = result.limit_cycle
            table.add_row("limit", f"{cycle.order}-cycle, {cycle.shape.value}")
        if result.final_state is not None:
            state = result.final_state
            table.add_row("final state", f"s={state.s:.6g} v={state.v:.6g} y={state.y:.6g}")
        console.print(table)


def _fail(kind: str, message: str, exit_code: int) -> None:
    click.echo(json.dumps({"error": kind, "message": message, "exit_code": exit_code}), err=True)
    sys.exit(exit_code)


def handle_errors(func: Callable[..., Any]) -> Callable[..., Any]:
    """Map library errors to the documented exit codes and a JSON line on stderr."""

    @wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return func(*args, **kwargs)
        except ValidationError as e:
            logger.error(f"Invalid parameters: {e}")
            _fail(InvalidParametersError.kind, str(e), InvalidParametersError.exit_code)
        except AimdModelError as e:
            logger.error(f"{type(e).__name__}: {e}")
            _fail(e.kind, str(e), e.exit_code)

    return wrapper


def common_options(func: Callable[..., Any]) -> Callable[..., Any]:
    func = click.option("--pretty", is_flag=True, help="Rich tables on stderr")(func)
    func = click.option(
        "--unit",
        type=click.Choice([u.value for u in DataUnit]),
        default=None,
        help="Data unit of mu, m and buffer sizes [default: output.unit from the config]",
    )(func)
    func = click.option("--seed", type=int, default=None, help="Accepted and ignored")(func)
    func = click.option(
        "--config", "-c", default="config/config.yaml", help="Path to configuration file"
    )(func)
    return func


def make_interface(
    config: str, pretty: bool, seed: Optional[int], unit: Optional[str]
) -> Tuple[CLIInterface, str]:
    """Interface plus the data unit, falling back to the configured one."""
    interface = CLIInterface(config, pretty=pretty)
    if seed is not None:
        logger.info(f"--seed {seed} ignored: the model is deterministic")
    return interface, unit or interface.config.output.unit


def check_beta(beta: float) -> None:
    ParameterValidator.require(ParameterValidator.validate_beta(beta))


@click.group()
def cli() -> None:
    """Hybrid fluid model of AIMD sources at a Drop-Tail bottleneck."""


@cli.command()
@click.option("--beta", type=float, required=True, help="Multiplicative decrease factor")
@click.option("--q", type=float, help="Normalized bandwidth-delay product mu*T/m")
@click.option("--b", type=float, help="Normalized buffer B/m")
@click.option("--mu", type=float, help="Capacity, units per second")
@click.option("--rtt", type=float, help="Two-way propagation delay T, seconds")
@click.option("--m", type=float, help="Aggregate increment per RTT")
@click.option("--buffer", type=float, help="Buffer size B")
@click.option("--verify", is_flag=True, help="Cross-check with the simulator")
@click.option("--output", "-o", default=None, help="Write JSON here instead of stdout")
@common_options
@handle_errors
def classify(
    beta: float, q: Optional[float], b: Optional[float], mu: Optional[float],
    rtt: Optional[float], m: Optional[float], buffer: Optional[float], verify: bool,
    output: Optional[str], config: str, seed: Optional[int], unit: Optional[str], pretty: bool,
) -> None:
    """Limit cycles, their shapes and the single-jump verdict."""
    check_beta(beta)
    interface, unit = make_interface(config, pretty, seed, unit)
    params, physical = CLIInterface.resolve_params(beta, q, b, mu, rtt, m, buffer, unit)
    interface.run_classify(params, physical, unit, verify, output)


@cli.command()
@click.option("--mu", type=float, required=True, help="Capacity, units per second")
@click.option("--rtt", type=float, required=True, help="Two-way propagation delay T, seconds")
@click.option("--m", type=float, required=True, help="Aggregate increment per RTT")
@click.option("--beta", type=float, required=True, help="Multiplicative decrease factor")
@click.option("--b-min", type=float, default=0.0, show_default=True, help="Smallest buffer")
@click.option("--b-max", type=float, required=True, help="Largest buffer")
@click.option("--points", type=int, default=50, show_default=True, help="Grid size")
@click.option("--constraint", default=None, help="'gbar>=X[mu]' or 'xbar<=Y'")
@click.option("--weights", type=(float, float), default=None, help="c1 c2 for c1*gbar - c2*xbar")
@click.option("--empirical", is_flag=True, help="Simulator averages outside the closed-form regime")
@click.option("--output", "-o", default=None, help="Write CSV here instead of stdout")
@common_options
@handle_errors
def pareto(
    mu: float, rtt: float, m: float, beta: float, b_min: float, b_max: float, points: int,
    constraint: Optional[str], weights: Optional[Tuple[float, float]], empirical: bool,
    output: Optional[str], config: str, seed: Optional[int], unit: Optional[str], pretty: bool,
) -> None:
    """Goodput/backlog frontier over a buffer grid."""
    check_beta(beta)
    ParameterValidator.require(ParameterValidator.validate_physical(mu, rtt, m, beta))
    if points < 1:
        raise InvalidParametersError(f"--points must be at least 1, got {points}")
    interface, unit = make_interface(config, pretty, seed, unit)
    link = LinkParams(mu=mu, T=rtt, m=m, beta=beta, unit=unit)
    interface.run_pareto(
        link, b_min, b_max, points, constraint, weights, empirical, output
    )


@cli.command()
@click.option("--mu", type=float, required=True, help="Capacity, units per second")
@click.option("--rtt", type=float, required=True, help="Two-way propagation delay T, seconds")
@click.option("--beta", type=float, required=True, help="Multiplicative decrease factor")
@click.option("--m-range", default=None, help="lo:hi range of the aggregate increment")
@click.option("--samples", type=int, default=200, show_default=True, help="Log-spaced samples")
@click.option("--m0", type=float, default=None, help="Per-connection increment")
@click.option("--n-range", default=None, help="lo:hi range of connection counts (with --m0)")
@click.option("--output", "-o", default=None, help="Write CSV here instead of stdout")
@common_options
@handle_errors
def bmin(
    mu: float, rtt: float, beta: float, m_range: Optional[str], samples: int,
    m0: Optional[float], n_range: Optional[str], output: Optional[str], config: str,
    seed: Optional[int], unit: Optional[str], pretty: bool,
) -> None:
    """Minimal buffer for full utilization against the aggregate increment."""
    check_beta(beta)
    ParameterValidator.require(ParameterValidator.validate_positive("mu", mu))
    ParameterValidator.require(ParameterValidator.validate_positive("rtt", rtt))
    if m0 is not None:
        ParameterValidator.require(ParameterValidator.validate_positive("m0", m0))
    parsed = RangeParser.parse(m_range) if m_range else None
    interface, unit = make_interface(config, pretty, seed, unit)
    interface.run_bmin(
        mu * rtt, beta, parsed, samples, m0, n_range, unit, output
    )


@cli.command()
@click.option("--beta", type=float, required=True, help="Multiplicative decrease factor")
@click.option("--q", type=float, help="Normalized bandwidth-delay product mu*T/m")
@click.option("--b", type=float, help="Normalized buffer B/m")
@click.option("--mu", type=float, help="Capacity, units per second")
@click.option("--rtt", type=float, help="Two-way propagation delay T, seconds")
@click.option("--m", type=float, help="Aggregate increment per RTT")
@click.option("--buffer", type=float, help="Buffer size B")
@click.option("--v-init", type=float, default=None, help="Initial normalized window w/m")
@click.option("--y-init", type=float, default=None, help="Initial normalized queue x/m")
@click.option(
    "--seed-rule",
    type=click.Choice([r.value for r in SeedRule]),
    default=SeedRule.UPPER.value,
    show_default=True,
    help="Default initial state when --v-init is not given",
)
@click.option("--cycles", type=int, default=None, help="Cycle cap")
@click.option("--trace", default=None, help="Write the event trace CSV here")
@click.option("--output", "-o", default=None, help="Write JSON here instead of stdout")
@common_options
@handle_errors
def simulate(
    beta: float, q: Optional[float], b: Optional[float], mu: Optional[float],
    rtt: Optional[float], m: Optional[float], buffer: Optional[float],
    v_init: Optional[float], y_init: Optional[float], seed_rule: str, cycles: Optional[int],
    trace: Optional[str], output: Optional[str], config: str, seed: Optional[int],
    unit: Optional[str], pretty: bool,
) -> None:
    """Event-driven run to the limit cycle with measured averages."""
    check_beta(beta)
    interface, unit = make_interface(config, pretty, seed, unit)
    params, physical = CLIInterface.resolve_params(beta, q, b, mu, rtt, m, buffer, unit)
    fluid = physical or FluidParams.from_normalized(params.beta, params.q, params.b)
    if physical is None and unit != fluid.unit.value:
        fluid = fluid.model_copy(update={"unit": DataUnit(unit)})
    interface.run_simulate(
        fluid, v_init, y_init, SeedRule(seed_rule), cycles, trace, output
    )


@cli.command()
@click.option("--config", "-c", default="config/config.yaml", help="Path to configuration file")
@handle_errors
def schema(config: str) -> None:
    """Print the JSON schema of classification reports."""
    CLIInterface(config).run_schema()


if __name__ == "__main__":
    cli()
