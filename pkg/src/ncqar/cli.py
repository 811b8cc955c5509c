"""
Command line front end.

Every command reads its section of the run config, lets explicit flags override it, and embeds the resolved values
in the reports it writes. Machine-readable output (CSV/JSON) goes to stdout or ``--output``; everything meant for a
human goes to stderr through rich.
"""
import dataclasses
import enum
import logging
import time
import typing
from pathlib import Path

import click
import humanize
import numpy as np
from click.core import ParameterSource
from click_aliases import ClickAliasedGroup
from rich.console import Console
from rich.logging import RichHandler
from rich.progress import Progress, SpinnerColumn

from . import __version__
from .distributions import DistributionSpec
from .errors import ConfigurationError, NcqarError
from .models import (
    DEFAULT_P_MAX,
    Direction,
    ModelSpec,
    fit_aml_t,
    fit_qar_many,
    hq_criteria,
    residual_diagnostics,
    select_order_hq,
)
from .montecarlo import (
    DEFAULT_SAMPLE_SIZE,
    PRESET_EXPERIMENTS,
    PRESET_SAMPLE_SIZES,
    McConfig,
    checkpoint_path,
    consistency_study,
    dgp_from_mapping,
    run_binding_function,
    run_selection_frequencies,
)
from .quantile_solver import conventions
from .simulate import DEFAULT_BURN_IN, MarSpec, RegimeSpec, SimConfig, simulate_mar, simulate_two_regime
from .srar import (
    TIE_TOLERANCE,
    AggregateMethod,
    SelectionReport,
    curve_table,
    default_grid,
    select_model,
    winner_cells,
    validate_grid,
)
from .utils import APP_NAME, available_cpus, cache_dir
from .utils.generic__config import load_config, resolve, section
from .utils.generic__io import annualized_log_diff, read_column, write_json, write_rows_csv, write_series_csv
from .utils.generic__rendering import Emoji, binding_table, frequency_table, identification_table, render_as_table

__all__ = ("Transform", "DatasetSpec", "ingest", "run_identification", "parse_grid", "main")

log = logging.getLogger(__name__)
console = Console(stderr=True)

_INNOVATION_FLAGS = ("dist", "nu", "gamma", "mu", "sigma", "demeaned")
_QUIET = (ParameterSource.DEFAULT, ParameterSource.DEFAULT_MAP)


class Transform(str, enum.Enum):
    NONE = "none"
    ANNUALIZED_LOG_DIFF = "annualized_log_diff"


@dataclasses.dataclass(frozen=True)
class DatasetSpec:
    path: Path
    column: typing.Union[str, int] = "value"
    transform: Transform = Transform.NONE
    frequency: typing.Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "path", Path(self.path))
        try:
            object.__setattr__(self, "transform", Transform(self.transform))
        except ValueError:
            raise ConfigurationError(
                f"unknown transform {self.transform!r}; expected one of: {', '.join(t.value for t in Transform)}"
            ) from None

    @property
    def name(self) -> str:
        return self.path.stem

    def to_mapping(self) -> dict:
        return {
            "path": str(self.path),
            "column": self.column,
            "transform": self.transform.value,
            "frequency": self.frequency,
        }


def ingest(dataset: DatasetSpec) -> np.ndarray:
    """
    Reads the dataset's column and applies its transform.

    :raises DataError: On a missing file or column, or a cell that is not a usable number (with its row)
    """
    values, first_row = read_column(dataset.path, dataset.column)
    if dataset.transform is Transform.ANNUALIZED_LOG_DIFF:
        values = annualized_log_diff(values, first_row=first_row)
    log.debug("Ingested %d values from %s (%s)", values.size, dataset.path, dataset.transform.value)
    return values


def run_identification(
    dataset: DatasetSpec,
    p: typing.Optional[int] = None,
    grid: typing.Optional[typing.Iterable[float]] = None,
    include_restricted: bool = False,
    method: typing.Union[str, AggregateMethod] = AggregateMethod.GRID_MEAN,
    p_max: int = DEFAULT_P_MAX,
) -> typing.Tuple[SelectionReport, typing.Dict[str, str], int]:
    """
    Ingests a dataset and compares the causal and noncausal QAR(p) fits on it.

    :param p: Model order. Chosen by Hannan-Quinn over 1..p_max when None.
    :return: The selection report, its winner cells at the reported levels plus the aggregate, and the order used
    """
    try:
        series = ingest(dataset)
        if p is None:
            p = select_order_hq(series, p_max)
            log.info("%s: Hannan-Quinn order p=%d", dataset.name, p)
        report = select_model(series, p, grid, include_restricted=include_restricted, method=method)
    except NcqarError as e:
        e.args = (f"{dataset.path}: {e.args[0] if e.args else e}", *e.args[1:])
        raise
    return report, winner_cells(report), p


def _stepped(text: str, what: str) -> typing.List[float]:
    """``start:stop:step`` (stop included) or a comma separated list."""
    try:
        if ":" in text:
            start, stop, step = (float(part) for part in text.split(":"))
            if step <= 0:
                raise ConfigurationError(f"{what} step must be > 0, got {step:g}")
            count = int(round((stop - start) / step)) + 1
            return [float(v) for v in np.round(start + step * np.arange(count), 12)]
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigurationError(f"cannot parse {what} {text!r}; use start:stop:step or a comma list") from None


def parse_grid(value: typing.Union[None, str, typing.Sequence[float]]) -> np.ndarray:
    """Quantile grid from ``start:stop:step``, a comma separated list, or a list of numbers."""
    if value is None:
        return default_grid()
    if isinstance(value, str):
        value = _stepped(value.strip(), "grid")
    return validate_grid(value)


def _floats(value: typing.Union[None, str, float, typing.Sequence[float]], what: str) -> typing.Tuple[float, ...]:
    if value is None:
        return ()
    if isinstance(value, (int, float)):
        return (float(value),)
    if isinstance(value, str):
        return tuple(_stepped(value, what))
    try:
        return tuple(float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{what} must be a number or a list of numbers, got {value!r}") from None


def _resolved(ctx: click.Context, name: str) -> dict:
    """This command's parameters after applying its config section: flags > file > defaults."""
    explicit = {key for key in ctx.params if ctx.get_parameter_source(key) not in _QUIET}
    values = resolve(section(ctx.obj["config"], name), ctx.params, explicit)
    values["_explicit"] = explicit
    return values


def _innovation(values: dict) -> DistributionSpec:
    """Builds the innovation law, preferring explicit flags, then the section's [innovation] table."""
    explicit = values.pop("_explicit", set())
    flags = {key: values.pop(key, None) for key in _INNOVATION_FLAGS}
    from_file = values.pop("innovation", None)
    if from_file is not None and not explicit.intersection(_INNOVATION_FLAGS):
        spec = DistributionSpec.from_mapping(from_file)
    else:
        spec = DistributionSpec(
            flags["dist"] or "gaussian",
            nu=flags["nu"],
            gamma=flags["gamma"],
            mu=flags["mu"] if flags["mu"] is not None else 0.0,
            sigma=flags["sigma"] if flags["sigma"] is not None else 1.0,
            demeaned=bool(flags["demeaned"]),
        )
    values["innovation"] = spec.to_mapping()
    return spec


def _dataset(values: dict) -> DatasetSpec:
    if values.get("path") is None:
        raise ConfigurationError("no dataset given; pass a CSV path or set 'path' in the config")
    return DatasetSpec(values["path"], values["column"], values["transform"], values["frequency"])


def _clean(values: dict) -> dict:
    return {key: value for key, value in values.items() if not key.startswith("_") and key != "output"}


def _meta(ctx: click.Context, values: dict, *, seed: typing.Optional[int] = None, grid=None) -> dict:
    meta = {
        "tool": APP_NAME,
        "version": __version__,
        "command": ctx.info_name,
        "resolved_config": _clean(values),
        "solver": {**conventions(), "tie_tolerance": TIE_TOLERANCE},
    }
    if seed is not None:
        meta["seed"] = seed
    if grid is not None:
        meta["grid"] = [float(t) for t in grid]
    return meta


def _emit(text: typing.Optional[str], output: typing.Optional[Path], what: str) -> None:
    if output is None:
        click.echo(text, nl=False)
    else:
        console.log(f"{Emoji.CHECK_MARK} Wrote {what} to {output}")


def _sidecar(output: Path) -> Path:
    return Path(output).with_suffix(".json")


def _progress() -> Progress:
    return Progress(SpinnerColumn(), *Progress.get_default_columns(), console=console, transient=True)


class _Group(ClickAliasedGroup):
    """Turns library errors into a short message and the error's exit code."""

    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except NcqarError as e:
            console.print(f"[red]{Emoji.CROSS} {e}[/]", markup=True, highlight=False)
            if e.hint:
                console.print(f"{Emoji.INFO} {e.hint}", highlight=False)
            log.debug("Traceback for the error above", exc_info=True)
            ctx.exit(e.exit_code)


def dataset_options(func):
    """PATH argument and the column/transform/frequency options shared by every command that reads data."""
    options = (
        click.argument("path", type=click.Path(dir_okay=False, path_type=Path), required=False),
        click.option("--column", "-c", default="value", show_default=True, help="Column name or 0-based index"),
        click.option(
            "--transform",
            type=click.Choice([t.value for t in Transform]),
            default=Transform.NONE.value,
            show_default=True,
            help="annualized_log_diff turns prices P_t into 400*(ln P_t - ln P_(t-1))",
        ),
        click.option("--frequency", default=None, help="Free-text sampling frequency, copied into reports"),
    )
    for option in reversed(options):
        func = option(func)
    return func


def innovation_options(func):
    options = (
        click.option(
            "--dist",
            "-d",
            default="gaussian",
            show_default=True,
            help="Innovation law: gaussian, student_t, cauchy, skewed_t or uniform01",
        ),
        click.option("--nu", type=float, default=None, help="Degrees of freedom (student_t, skewed_t)"),
        click.option("--gamma", type=float, default=None, help="Skewness parameter (skewed_t)"),
        click.option("--mu", type=float, default=None, help="Location (default 0)"),
        click.option("--sigma", type=float, default=None, help="Scale (default 1)"),
        click.option("--demeaned", is_flag=True, default=False, help="Subtract the skewed_t mean"),
    )
    for option in reversed(options):
        func = option(func)
    return func


def output_option(func):
    return click.option(
        "--output", "-o", type=click.Path(dir_okay=False, path_type=Path), default=None, help="Write here, not stdout"
    )(func)


@click.group(cls=_Group)
@click.option(
    "--config",
    "-C",
    "config_path",
    type=click.Path(dir_okay=False, path_type=Path),
    default=None,
    help="Run config (TOML). Defaults to ncqar.toml in the user config directory, if present.",
)
@click.option(
    "--log-level",
    "-L",
    default="INFO",
    help="The log level to use. Defaults to INFO.",
    type=click.Choice(("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")),
)
@click.option(
    "--jobs",
    "-j",
    envvar="NCQAR_JOBS",
    type=click.IntRange(min=1),
    default=1,
    show_default=True,
    help="Worker processes for Monte Carlo runs.",
)
@click.option("--no-colour", "--no-color", "no_colour", is_flag=True, help="Disable coloured output.")
@click.version_option(__version__, prog_name=APP_NAME)
@click.pass_context
def main(ctx: click.Context, config_path: typing.Optional[Path], log_level: str, jobs: int, no_colour: bool):
    """
    Causal or noncausal? Simulates mixed autoregressions and identifies the time direction of a series from its
    quantile autoregressions.
    """
    if no_colour:
        console.no_color = True
    logging.basicConfig(
        format="%(message)s",
        datefmt="[%X]",
        level=getattr(logging, log_level),
        handlers=[RichHandler(console=console)],
        force=True,
    )
    if jobs > available_cpus():
        log.warning("%d jobs requested but only %d CPUs are available", jobs, available_cpus())
    ctx.obj = {"config": load_config(config_path), "jobs": jobs}


@main.command(name="simulate", aliases=["sim"])
@click.option("--length", "-T", type=click.IntRange(min=1), default=200, show_default=True, help="Retained length")
@click.option("--burn-in", type=click.IntRange(min=0), default=DEFAULT_BURN_IN, show_default=True)
@click.option("--seed", "-s", type=click.IntRange(0, 2**64 - 1), default=0, show_default=True)
@click.option("--method", type=click.Choice(["matrix", "recursive"]), default="matrix", show_default=True)
@click.option("--pi", default=None, help="Lag coefficients, comma separated")
@click.option("--phi", default=None, help="Lead coefficients, comma separated")
@click.option("--intercept", type=float, default=0.0, show_default=True)
@click.option("--two-regime", is_flag=True, help="Simulate the two-regime noncausal AR(1) instead")
@click.option("--tau-star", type=float, default=0.7, show_default=True)
@click.option("--beta1", type=float, default=0.2, show_default=True)
@click.option("--beta2", type=float, default=0.8, show_default=True)
@innovation_options
@output_option
@click.pass_context
def simulate(ctx: click.Context, **_):
    """Simulates a MAR(r,s) path and writes it as a t,value CSV."""
    values = _resolved(ctx, "simulate")
    innovation = _innovation(values)
    cfg = SimConfig(values["length"] + 2 * values["burn_in"], values["seed"], values["burn_in"], innovation)
    if values["two_regime"]:
        regime = RegimeSpec(values["tau_star"], values["beta1"], values["beta2"], innovation)
        series = simulate_two_regime(regime, cfg)
        label = f"two-regime AR(1), {innovation.describe()}"
    else:
        spec = MarSpec(_floats(values["pi"], "pi"), _floats(values["phi"], "phi"), values["intercept"])
        series = simulate_mar(spec, cfg, values["method"])
        label = f"MAR({spec.r},{spec.s}), {innovation.describe()}"
    log.info("Simulated %d points of a %s process (seed %d)", series.size, label, values["seed"])
    _emit(write_series_csv(values["output"], series), values["output"], "series")


@main.command(name="fit")
@dataset_options
@click.option("--direction", type=click.Choice([d.value for d in Direction]), default="causal", show_default=True)
@click.option("-p", "p", type=click.IntRange(min=1), default=1, show_default=True, help="Model order")
@click.option("--tau", "-t", type=float, multiple=True, help="Quantile level; repeat for several (default 0.5)")
@click.option("--restricted", is_flag=True, help="Fit only on rows where all regressors are non-negative")
@click.option("--aml", is_flag=True, help="Also fit the MAR(r,s) by approximate t maximum likelihood")
@click.option("--r", "r", type=click.IntRange(min=0), default=0, show_default=True, help="AML lag order")
@click.option("--s", "s", type=click.IntRange(min=0), default=1, show_default=True, help="AML lead order")
@output_option
@click.pass_context
def fit(ctx: click.Context, **_):
    """Fits a quantile (non)causal autoregression at one or more quantile levels and writes a JSON report."""
    values = _resolved(ctx, "fit")
    series = ingest(_dataset(values))
    taus = _floats(values["tau"], "tau") or (0.5,)
    values["tau"] = list(taus)
    model = ModelSpec(Direction.parse(values["direction"]), values["p"], values["restricted"])
    with console.status(f"Fitting {model.label} at {len(taus)} level(s)..."):
        fits = fit_qar_many(series, model, taus)
    report = {
        "meta": _meta(ctx, values),
        "model": model.to_mapping(),
        "fits": [f.to_mapping() for f in fits],
    }
    if values["aml"]:
        with console.status(f"Maximising the t likelihood of a MAR({values['r']},{values['s']})..."):
            report["aml"] = fit_aml_t(series, values["r"], values["s"]).to_mapping()
    _emit(write_json(values["output"], report), values["output"], "fit report")


@main.command(name="order")
@dataset_options
@click.option("--p-max", type=click.IntRange(min=1), default=DEFAULT_P_MAX, show_default=True)
@output_option
@click.pass_context
def order(ctx: click.Context, **_):
    """Chooses the autoregressive order by the Hannan-Quinn criterion."""
    values = _resolved(ctx, "order")
    series = ingest(_dataset(values))
    criteria = hq_criteria(series, values["p_max"])
    chosen = min(criteria, key=lambda k: (criteria[k], k))
    console.print(render_as_table(["p", "HQ"], [[k, f"{v:.6f}"] for k, v in criteria.items()], "Hannan-Quinn"))
    report = {"meta": _meta(ctx, values), "p": chosen, "criteria": {str(k): v for k, v in criteria.items()}}
    _emit(write_json(values["output"], report), values["output"], "order report")


def _selection(ctx: click.Context, name: str) -> typing.Tuple[dict, SelectionReport]:
    values = _resolved(ctx, name)
    dataset = _dataset(values)
    grid = parse_grid(values["grid"])
    values["grid"] = [float(t) for t in grid]
    series = ingest(dataset)
    if values["p"] is None:
        values["p"] = select_order_hq(series, values["p_max"])
        log.info("Hannan-Quinn order p=%d", values["p"])
    with console.status("Fitting causal and noncausal quantile autoregressions..."):
        report = select_model(
            series,
            values["p"],
            grid,
            include_restricted=values["include_restricted"],
            method=values.get("method", AggregateMethod.GRID_MEAN.value),
            restricted=values["restricted"],
        )
    return values, report


def selection_options(func):
    options = (
        click.option("-p", "p", type=click.IntRange(min=1), default=None, help="Model order (default: HQ choice)"),
        click.option("--p-max", type=click.IntRange(min=1), default=DEFAULT_P_MAX, show_default=True),
        click.option("--grid", "-g", default=None, help="Quantile grid, start:stop:step or a comma list"),
        click.option("--restricted", is_flag=True, help="Compare the restricted fits"),
        click.option("--include-restricted", is_flag=True, help="Also report the other flavour of fit"),
    )
    for option in reversed(options):
        func = option(func)
    return func


@main.command(name="srar")
@dataset_options
@selection_options
@output_option
@click.pass_context
def srar(ctx: click.Context, **_):
    """Writes the causal and noncausal SRAR curves as CSV."""
    values, report = _selection(ctx, "srar")
    header, rows = curve_table(report)
    _emit(write_rows_csv(values["output"], header, rows), values["output"], "SRAR curves")


@main.command(name="select")
@dataset_options
@selection_options
@click.option(
    "--method",
    type=click.Choice([m.value for m in AggregateMethod]),
    default=AggregateMethod.GRID_MEAN.value,
    show_default=True,
    help="How the curve is aggregated over the grid",
)
@click.option("--curves", type=click.Path(dir_okay=False, path_type=Path), default=None, help="Also write curve CSV")
@output_option
@click.pass_context
def select(ctx: click.Context, **_):
    """Picks the time direction with the smaller aggregate SRAR and writes a JSON selection report."""
    values, report = _selection(ctx, "select")
    console.print(
        f"{Emoji.INFO} p={report.p}: aggregate SRAR causal {report.aggregate_causal:.6g}, "
        f"noncausal {report.aggregate_noncausal:.6g} -> [bold]{report.aggregate_winner.value}[/]"
    )
    if values["curves"] is not None:
        header, rows = curve_table(report)
        write_rows_csv(values["curves"], header, rows)
    values.pop("curves")
    data = {"meta": _meta(ctx, values, grid=report.grid), "report": report.to_mapping()}
    _emit(write_json(values["output"], data), values["output"], "selection report")


def _frequency_csv(tables: typing.Dict[str, typing.Any]) -> typing.Tuple[typing.List[str], typing.List[list]]:
    """One row per quantile level (then ``aggregate``), a frequency and std. error per column."""
    header = ["quantile"]
    columns = []
    for label, table in tables.items():
        header += [label, f"{label}_se"]
        columns.append(table.to_rows())
    rows = []
    for i, first in enumerate(columns[0]):
        row = [first["quantile"]]
        for column in columns:
            row += [column[i]["frequency"], column[i]["std_error"]]
        rows.append(row)
    return header, rows


def _run_consistency(ctx: click.Context, values: dict) -> None:
    Ts = tuple(int(T) for T in _floats(values["Ts"], "Ts"))
    values["Ts"] = list(Ts)
    n = len(Ts) * values["n_reps"]
    started = time.monotonic()
    with _progress() as progress:
        task = progress.add_task("Consistency study", total=n)
        study = consistency_study(
            values["phi"],
            Ts,
            values["n_reps"],
            values["seed"],
            tau=values["tau"],
            burn_in=values["burn_in"],
            jobs=ctx.obj["jobs"],
            advance=lambda k: progress.advance(task, k),
        )
    console.log(f"Finished {n} replicates in {humanize.naturaldelta(time.monotonic() - started)}")
    rows = study.to_rows()
    console.print(
        render_as_table(
            ["T", "Median abs. error", "Replicates"],
            [[r["T"], f"{r['median_abs_error']:.5f}", r["n_used"]] for r in rows],
            f"QNCAR(1) consistency, phi={study.phi:g}, tau={study.tau:g}",
        )
    )
    console.print(f"{Emoji.INFO} shrink factor {study.shrink_factor:.3f}")
    text = write_rows_csv(values["output"], ["T", "median_abs_error", "n_used"], [list(r.values()) for r in rows])
    _emit(text, values["output"], "consistency table")
    if values["output"] is not None:
        data = {"meta": _meta(ctx, values, seed=values["seed"]), "study": study.to_mapping()}
        write_json(_sidecar(values["output"]), data)


@main.command(name="montecarlo", aliases=["mc"])
@click.option(
    "--column",
    type=click.Choice(list(PRESET_EXPERIMENTS)),
    multiple=True,
    help="Preset experiment; repeat for several. Defaults to all of them unless the config defines a dgp.",
)
@click.option("--n-reps", "-n", type=click.IntRange(min=1), default=2000, show_default=True)
@click.option("-T", "T", type=click.IntRange(min=5), default=None, help="Sample size [default: per experiment, 200 or 600]")
@click.option("--seed", "-s", type=click.IntRange(0, 2**64 - 1), default=0, show_default=True)
@click.option("--p-fit", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--grid", "-g", default=None, help="Quantile grid, start:stop:step or a comma list")
@click.option("--burn-in", type=click.IntRange(min=0), default=DEFAULT_BURN_IN, show_default=True)
@click.option("--restricted", is_flag=True, help="Select with the restricted fits")
@click.option("--include-restricted", is_flag=True, help="Also tabulate the other flavour of fit")
@click.option(
    "--method",
    type=click.Choice([m.value for m in AggregateMethod]),
    default=AggregateMethod.GRID_MEAN.value,
    show_default=True,
)
@click.option("--resume", is_flag=True, help="Continue from the checkpoint of an interrupted identical run")
@click.option("--consistency", is_flag=True, help="Run the QNCAR(1) consistency study instead")
@click.option("--Ts", "Ts", default="250,4000", show_default=True, help="Sample sizes for --consistency")
@click.option("--phi", type=float, default=0.8, show_default=True, help="Lead coefficient for --consistency")
@click.option("--tau", type=float, default=0.5, show_default=True, help="Quantile level for --consistency")
@output_option
@click.pass_context
def montecarlo(ctx: click.Context, **_):
    """
    Correct-selection frequencies of the SRAR criteria over simulated series, one column per experiment.

    Writes the frequency table as CSV and, with --output, a JSON sidecar with the same name.
    """
    values = _resolved(ctx, "montecarlo")
    explicit = values.pop("_explicit")
    if values["consistency"]:
        if "n_reps" not in explicit and "n_reps" not in section(ctx.obj["config"], "montecarlo"):
            values["n_reps"] = 200
        return _run_consistency(ctx, values)
    for key in ("consistency", "Ts", "phi", "tau"):
        values.pop(key)

    grid = tuple(float(t) for t in parse_grid(values["grid"]))
    values["grid"] = list(grid)
    columns = [values["column"]] if isinstance(values["column"], str) else list(values["column"] or ())
    unknown = [name for name in columns if name not in PRESET_EXPERIMENTS]
    if unknown:
        raise ConfigurationError(f"unknown experiment(s) {unknown}; expected some of {list(PRESET_EXPERIMENTS)}")
    if values.get("dgp") is not None and not columns:
        experiments = {"custom": dgp_from_mapping(values["dgp"])}
    else:
        experiments = {name: PRESET_EXPERIMENTS[name] for name in (columns or PRESET_EXPERIMENTS)}
        values.pop("dgp", None)
    values["column"] = list(experiments)
    sizes = {
        name: values["T"] if values["T"] is not None else PRESET_SAMPLE_SIZES.get(name, DEFAULT_SAMPLE_SIZE)
        for name in experiments
    }
    values["T"] = sizes

    tables = {}
    started = time.monotonic()
    with _progress() as progress:
        for name, dgp in experiments.items():
            cfg = McConfig(
                n_reps=values["n_reps"],
                T=sizes[name],
                dgp=dgp,
                seed=values["seed"],
                p_fit=values["p_fit"],
                grid=grid,
                parallelism=ctx.obj["jobs"],
                burn_in=values["burn_in"],
                restricted=values["restricted"],
                include_restricted=values["include_restricted"],
                method=values["method"],
            )
            task = progress.add_task(name, total=cfg.n_reps)
            table = run_selection_frequencies(
                cfg,
                checkpoint=checkpoint_path(cfg, cache_dir("montecarlo")),
                resume=values["resume"],
                advance=lambda k, task=task: progress.advance(task, k),
            )
            tables[name] = table
            if table.variant is not None:
                suffix = "restricted" if table.variant.metadata["restricted"] else "unrestricted"
                tables[f"{name}_{suffix}"] = table.variant
    console.log(f"Finished {len(experiments)} experiment(s) in {humanize.naturaldelta(time.monotonic() - started)}")
    values.pop("resume")

    for label, table in tables.items():
        console.print(frequency_table(table.to_rows(), f"{label}: {table.metadata['description']}"))
    header, rows = _frequency_csv(tables)
    _emit(write_rows_csv(values["output"], header, rows), values["output"], "frequency table")
    if values["output"] is not None:
        data = {
            "meta": _meta(ctx, values, seed=values["seed"], grid=grid),
            "tables": {label: table.to_mapping() for label, table in tables.items()},
        }
        write_json(_sidecar(values["output"]), data)


@main.command(name="binding")
@click.option("--tau", "-t", type=float, default=0.5, show_default=True)
@click.option(
    "--coefficients",
    default="-0.9:0.9:0.1",
    show_default=True,
    help="True lead coefficients, start:stop:step or a comma list",
)
@click.option("--n-reps", "-n", type=click.IntRange(min=2), default=500, show_default=True)
@click.option("-T", "T", type=click.IntRange(min=5), default=200, show_default=True)
@click.option("--seed", "-s", type=click.IntRange(0, 2**64 - 1), default=0, show_default=True)
@click.option("--burn-in", type=click.IntRange(min=0), default=DEFAULT_BURN_IN, show_default=True)
@click.option("--dispersion-threshold", type=float, default=0.5, show_default=True)
@innovation_options
@output_option
@click.pass_context
def binding(ctx: click.Context, **_):
    """Mean causal QAR(1) estimate on noncausal AR(1) data, over a grid of true lead coefficients."""
    values = _resolved(ctx, "binding")
    innovation = _innovation(values)
    coefficients = _floats(values["coefficients"], "coefficients")
    values["coefficients"] = list(coefficients)

    started = time.monotonic()
    with _progress() as progress:
        task = progress.add_task("Binding function", total=len(coefficients) * values["n_reps"])
        grid = run_binding_function(
            values["tau"],
            coefficients,
            innovation,
            values["n_reps"],
            values["T"],
            seed=values["seed"],
            burn_in=values["burn_in"],
            jobs=ctx.obj["jobs"],
            dispersion_threshold=values["dispersion_threshold"],
            advance=lambda k: progress.advance(task, k),
        )
    console.log(f"Finished in {humanize.naturaldelta(time.monotonic() - started)}")
    rows = grid.to_rows()
    console.print(binding_table(rows, f"Binding function at tau={grid.tau:g}, {innovation.describe()}"))
    header = list(rows[0])
    text = write_rows_csv(values["output"], header, [[row[key] for key in header] for row in rows])
    _emit(text, values["output"], "binding function")
    if values["output"] is not None:
        data = {"meta": _meta(ctx, values, seed=values["seed"]), "binding": grid.to_mapping()}
        write_json(_sidecar(values["output"]), data)


@main.command(name="identify", aliases=["id"])
@click.argument("paths", nargs=-1, type=click.Path(dir_okay=False, path_type=Path))
@click.option("--column", "-c", default="value", show_default=True, help="Column name or 0-based index")
@click.option(
    "--transform",
    type=click.Choice([t.value for t in Transform]),
    default=Transform.ANNUALIZED_LOG_DIFF.value,
    show_default=True,
)
@click.option("--frequency", default=None, help="Free-text sampling frequency, copied into reports")
@click.option("-p", "p", type=click.IntRange(min=1), default=None, help="Model order (default: HQ choice per series)")
@click.option("--p-max", type=click.IntRange(min=1), default=DEFAULT_P_MAX, show_default=True)
@click.option("--grid", "-g", default=None, help="Quantile grid, start:stop:step or a comma list")
@click.option("--include-restricted", is_flag=True, help="Also report the restricted fits")
@click.option(
    "--method",
    type=click.Choice([m.value for m in AggregateMethod]),
    default=AggregateMethod.GRID_MEAN.value,
    show_default=True,
)
@click.option(
    "--curves-dir",
    type=click.Path(file_okay=False, path_type=Path),
    default=None,
    help="Write one SRAR curve CSV per series here",
)
@output_option
@click.pass_context
def identify(ctx: click.Context, **_):
    """
    Identifies the time direction of one or more series (e.g. quarterly price indices).

    Prints the winner at the 0.1, 0.3, 0.5, 0.7 and 0.9 quantiles and in aggregate for every series, and writes
    the full reports as JSON.
    """
    values = _resolved(ctx, "identify")
    values.pop("_explicit")
    paths = values.pop("paths") or ()
    if not paths and values.get("path") is not None:
        paths = values["path"] if isinstance(values["path"], list) else [values["path"]]
    if not paths:
        raise ConfigurationError("no datasets given; pass CSV paths or set 'path' in the config")
    values["path"] = [str(p) for p in paths]
    grid = parse_grid(values["grid"])
    values["grid"] = [float(t) for t in grid]
    if values["curves_dir"] is not None:
        values["curves_dir"].mkdir(parents=True, exist_ok=True)

    cells, reports = {}, {}
    for path in paths:
        dataset = DatasetSpec(path, values["column"], values["transform"], values["frequency"])
        with console.status(f"Identifying {dataset.name}..."):
            report, row, p = run_identification(
                dataset, values["p"], grid, values["include_restricted"], values["method"], values["p_max"]
            )
        cells[dataset.name] = row
        reports[dataset.name] = {"dataset": dataset.to_mapping(), "p": p, "table": row, **report.to_mapping()}
        if values["curves_dir"] is not None:
            header, rows = curve_table(report)
            write_rows_csv(values["curves_dir"] / f"{dataset.name}.csv", header, rows)
    console.print(identification_table(cells))
    values.pop("curves_dir")
    data = {"meta": _meta(ctx, values, grid=grid), "series": reports}
    _emit(write_json(values["output"], data), values["output"], "identification report")


@main.command(name="describe")
@dataset_options
@click.option("-p", "p", type=click.IntRange(min=1), default=None, help="AR order (default: HQ choice)")
@click.option("--p-max", type=click.IntRange(min=1), default=DEFAULT_P_MAX, show_default=True)
@output_option
@click.pass_context
def describe(ctx: click.Context, **_):
    """Descriptive statistics of a series: HQ order and OLS AR residual diagnostics."""
    values = _resolved(ctx, "describe")
    dataset = _dataset(values)
    series = ingest(dataset)
    if values["p"] is None:
        values["p"] = select_order_hq(series, values["p_max"])
    diagnostics = residual_diagnostics(series, values["p"]).to_mapping()
    headers = ["Series", *diagnostics]
    row = [dataset.name, *(f"{v:.3f}" if isinstance(v, float) else v for v in diagnostics.values())]
    console.print(render_as_table(headers, [row], "Descriptive statistics"))
    data = {"meta": _meta(ctx, values), "dataset": dataset.to_mapping(), "diagnostics": diagnostics}
    _emit(write_json(values["output"], data), values["output"], "diagnostics")


if __name__ == "__main__":
    main()
