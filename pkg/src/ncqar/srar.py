"""
SRAR curves and the aggregate-SRAR criterion for telling a causal autoregression from a noncausal one.

SRAR(tau) is the optimal check-function objective of a quantile autoregression at level tau. Comparing the causal
and noncausal curves level by level is unreliable because the curves can cross; the aggregate over the whole grid
is the selection criterion.
"""
import dataclasses
import enum
import logging
import math
import typing
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from . import distributions
from .errors import ConfigurationError, ParameterDomainError, UndefinedMomentError
from .models import Direction, ModelSpec, as_series, fit_qar_many
from .quantile_solver import RegressionProblem, effective_tau, solve_many

__all__ = (
    "Winner",
    "AggregateMethod",
    "SrarCurve",
    "SelectionReport",
    "ShapeDiagnostics",
    "TIE_TOLERANCE",
    "REPORTED_TAUS",
    "default_grid",
    "validate_grid",
    "srar_curve",
    "residual_srar_curve",
    "aggregate_srar",
    "decide",
    "select_model",
    "shape_diagnostics",
    "theoretical_slope",
    "theoretical_concavity",
    "winner_cells",
    "curve_table",
)

log = logging.getLogger(__name__)

TIE_TOLERANCE = 1e-12
REPORTED_TAUS = (0.1, 0.3, 0.5, 0.7, 0.9)
_GRID_MATCH = 1e-9


class Winner(str, enum.Enum):
    CAUSAL = "causal"
    NONCAUSAL = "noncausal"
    TIE = "tie"


class AggregateMethod(str, enum.Enum):
    GRID_MEAN = "grid_mean"
    TRAPEZOID = "trapezoid"


def default_grid(step: float = 0.05, endpoints: bool = False) -> np.ndarray:
    """0.05, 0.10, ..., 0.95, optionally with 0 and 1 added."""
    count = int(round(1.0 / step))
    grid = np.round(np.arange(0 if endpoints else 1, count + 1 if endpoints else count) * step, 10)
    return grid


def validate_grid(grid: typing.Iterable[float]) -> np.ndarray:
    taus = np.asarray(list(grid), dtype=float)
    if taus.ndim != 1 or taus.size == 0:
        raise ConfigurationError("quantile grid must be a non-empty list of levels")
    if np.any(~np.isfinite(taus)) or np.any(taus < 0.0) or np.any(taus > 1.0):
        raise ParameterDomainError(f"quantile grid must lie within [0, 1], got {taus.tolist()}")
    if np.any(np.diff(taus) <= 0.0):
        raise ConfigurationError("quantile grid must be strictly increasing")
    return taus


@dataclass(frozen=True)
class SrarCurve:
    taus: np.ndarray
    values: np.ndarray
    model: typing.Optional[ModelSpec]
    n_effective: int
    intercepts: typing.Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        taus = validate_grid(self.taus)
        values = np.asarray(self.values, dtype=float)
        if values.shape != taus.shape:
            raise ConfigurationError(f"{values.size} SRAR values for {taus.size} grid points")
        if np.any(values < 0.0):
            raise ConfigurationError("SRAR values must be nonnegative")
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "values", values)

    def at(self, tau: float) -> float:
        matches = np.flatnonzero(np.abs(self.taus - tau) <= _GRID_MATCH)
        if not matches.size:
            raise ConfigurationError(f"tau={tau:g} is not on the curve's grid")
        return float(self.values[matches[0]])

    def scaled(self, factor: float) -> "SrarCurve":
        return SrarCurve(self.taus, self.values * factor, self.model, self.n_effective)


def srar_curve(series: typing.Sequence[float], model: ModelSpec, grid: typing.Optional[typing.Iterable] = None):
    """SRAR of ``model`` at every grid level. Levels 0 and 1 are fitted at their endpoint-shifted values."""
    taus = validate_grid(default_grid() if grid is None else grid)
    fits = fit_qar_many(series, model, [effective_tau(float(tau)) for tau in taus])
    return SrarCurve(
        taus=taus,
        values=np.array([fit.srar for fit in fits]),
        model=model,
        n_effective=fits[0].n_effective,
        intercepts=np.array([fit.intercept for fit in fits]),
    )


def residual_srar_curve(residuals: typing.Sequence[float], grid: typing.Optional[typing.Iterable] = None):
    """Curve of intercept-only fits, i.e. SRAR of the residuals around their own sample quantiles."""
    e = as_series(residuals)
    taus = validate_grid(default_grid() if grid is None else grid)
    fits = solve_many(RegressionProblem(np.ones((e.size, 1)), e), [effective_tau(float(tau)) for tau in taus])
    return SrarCurve(
        taus=taus,
        values=np.array([fit.srar for fit in fits]),
        model=None,
        n_effective=e.size,
        intercepts=np.array([fit.intercept for fit in fits]),
    )


def aggregate_srar(
    curve: SrarCurve,
    method: typing.Union[str, AggregateMethod] = AggregateMethod.GRID_MEAN,
    interior_only: bool = False,
) -> float:
    """
    Aggregate SRAR of a curve.

    ``grid_mean`` is the unweighted mean over the grid; ``trapezoid`` integrates over the grid with the
    trapezoidal rule and divides by the grid span.

    :param interior_only: Drop the levels 0 and 1 first. Model comparisons always do.
    """
    try:
        method = AggregateMethod(method)
    except ValueError:
        raise ConfigurationError(f"Unknown aggregation method {method!r}") from None
    taus, values = curve.taus, curve.values
    if interior_only:
        keep = (taus > 0.0) & (taus < 1.0)
        if not np.any(keep):
            raise ConfigurationError("quantile grid has no level strictly between 0 and 1 to aggregate")
        taus, values = taus[keep], values[keep]
    if method is AggregateMethod.GRID_MEAN or taus.size == 1:
        return math.fsum(values) / values.size
    span = float(taus[-1] - taus[0])
    return float(trapezoid(values, taus)) / span


def decide(causal: float, noncausal: float) -> Winner:
    """The model with the smaller SRAR wins; differences below 1e-12 of the larger value are ties."""
    if abs(causal - noncausal) <= TIE_TOLERANCE * max(abs(causal), abs(noncausal)):
        return Winner.TIE
    return Winner.CAUSAL if causal < noncausal else Winner.NONCAUSAL


@dataclass(frozen=True)
class SelectionReport:
    p: int
    grid: np.ndarray
    causal: SrarCurve
    noncausal: SrarCurve
    per_tau_winner: typing.Tuple[Winner, ...]
    aggregate_causal: float
    aggregate_noncausal: float
    aggregate_winner: Winner
    method: AggregateMethod = AggregateMethod.GRID_MEAN
    restricted: bool = False
    restricted_variant: typing.Optional["SelectionReport"] = None

    def winner_at(self, tau: float) -> Winner:
        matches = np.flatnonzero(np.abs(self.grid - tau) <= _GRID_MATCH)
        if not matches.size:
            raise ConfigurationError(f"tau={tau:g} is not on the report's grid")
        return self.per_tau_winner[matches[0]]

    def to_mapping(self) -> dict:
        data = {
            "p": self.p,
            "restricted": self.restricted,
            "method": self.method.value,
            "grid": [float(t) for t in self.grid],
            "n_effective": {"causal": self.causal.n_effective, "noncausal": self.noncausal.n_effective},
            "srar_causal": [float(v) for v in self.causal.values],
            "srar_noncausal": [float(v) for v in self.noncausal.values],
            "per_tau_winner": [w.value for w in self.per_tau_winner],
            "aggregate_causal": self.aggregate_causal,
            "aggregate_noncausal": self.aggregate_noncausal,
            "aggregate_winner": self.aggregate_winner.value,
        }
        if self.restricted_variant is not None:
            data["restricted_variant"] = self.restricted_variant.to_mapping()
        return data


def _compare(causal: SrarCurve, noncausal: SrarCurve, p: int, method: AggregateMethod, restricted: bool):
    aggregate_causal = aggregate_srar(causal, method, interior_only=True)
    aggregate_noncausal = aggregate_srar(noncausal, method, interior_only=True)
    return SelectionReport(
        p=p,
        grid=causal.taus,
        causal=causal,
        noncausal=noncausal,
        per_tau_winner=tuple(decide(c, n) for c, n in zip(causal.values, noncausal.values)),
        aggregate_causal=aggregate_causal,
        aggregate_noncausal=aggregate_noncausal,
        aggregate_winner=decide(aggregate_causal, aggregate_noncausal),
        method=method,
        restricted=restricted,
    )


def select_model(
    series: typing.Sequence[float],
    p: int,
    grid: typing.Optional[typing.Iterable] = None,
    include_restricted: bool = False,
    method: typing.Union[str, AggregateMethod] = AggregateMethod.GRID_MEAN,
    restricted: bool = False,
) -> SelectionReport:
    """
    Causal against noncausal QAR(p) on the same series, level by level and in aggregate.

    :param restricted: Use the restricted fits as the primary comparison
    :param include_restricted: Also attach the comparison of the opposite flavour as ``restricted_variant``
    """
    method = AggregateMethod(method)
    taus = validate_grid(default_grid() if grid is None else grid)

    def compare(use_restricted: bool) -> SelectionReport:
        causal = srar_curve(series, ModelSpec(Direction.CAUSAL, p, use_restricted), taus)
        noncausal = srar_curve(series, ModelSpec(Direction.NONCAUSAL, p, use_restricted), taus)
        return _compare(causal, noncausal, p, method, use_restricted)

    report = compare(restricted)
    if include_restricted:
        report = dataclasses.replace(report, restricted_variant=compare(not restricted))
    log.debug(
        "p=%d aggregate causal=%.6g noncausal=%.6g -> %s",
        p,
        report.aggregate_causal,
        report.aggregate_noncausal,
        report.aggregate_winner.value,
    )
    return report


@dataclass(frozen=True)
class ShapeDiagnostics:
    peak_tau: float
    second_differences: np.ndarray
    concave: bool
    skewness: str
    asymmetry: typing.Optional[float]
    residual_mean: typing.Optional[float]
    mean_crossing_tau: typing.Optional[float]

    def to_mapping(self) -> dict:
        return {
            "peak_tau": self.peak_tau,
            "second_differences": [float(v) for v in self.second_differences],
            "concave": self.concave,
            "skewness": self.skewness,
            "asymmetry": self.asymmetry,
            "residual_mean": self.residual_mean,
            "mean_crossing_tau": self.mean_crossing_tau,
        }


def shape_diagnostics(curve: SrarCurve, residual_mean: typing.Optional[float] = None) -> ShapeDiagnostics:
    """
    Peak location, second differences and the skewness reading of a curve.

    A peak below the median level reads as left-skewed innovations, above it as right-skewed. A peak at the
    median on a mirror-symmetric grid reads as symmetric when the curve matches its own reflection within 5% of
    its height. When the curve carries fitted intercepts and ``residual_mean`` is given, ``mean_crossing_tau`` is
    the interpolated level where the intercept crosses the mean, which is where the slope should vanish.
    """
    if curve.taus.size < 5:
        raise ConfigurationError(f"shape diagnostics need at least 5 grid points, got {curve.taus.size}")
    taus, values = curve.taus, curve.values
    peak = int(np.argmax(values))
    peak_tau = float(taus[peak])
    second = values[2:] - 2.0 * values[1:-1] + values[:-2]

    asymmetry = None
    if np.allclose(taus + taus[::-1], 1.0, atol=_GRID_MATCH):
        height = float(values.max())
        asymmetry = float(np.max(np.abs(values - values[::-1])) / height) if height > 0 else 0.0

    if abs(peak_tau - 0.5) <= _GRID_MATCH:
        skewness = "symmetric" if asymmetry is not None and asymmetry <= 0.05 else "indeterminate"
    else:
        skewness = "left" if peak_tau < 0.5 else "right"

    crossing = None
    if residual_mean is not None and curve.intercepts is not None:
        gap = curve.intercepts - residual_mean
        signs = np.flatnonzero(np.diff(np.sign(gap)) != 0)
        if signs.size:
            i = int(signs[0])
            crossing = float(np.interp(0.0, [gap[i], gap[i + 1]], [taus[i], taus[i + 1]]))

    return ShapeDiagnostics(
        peak_tau=peak_tau,
        second_differences=second,
        concave=bool(np.all(second < 0.0)),
        skewness=skewness,
        asymmetry=asymmetry,
        residual_mean=residual_mean,
        mean_crossing_tau=crossing,
    )


def _first_moment(dist: distributions.DistributionSpec, mean: typing.Optional[float]) -> float:
    if mean is not None:
        return float(mean)
    value = distributions.mean(dist)
    if value is None:
        raise UndefinedMomentError(f"{dist.describe()} has no first moment")
    return value


def theoretical_slope(
    dist: distributions.DistributionSpec, tau: float, T: int, mean: typing.Optional[float] = None
) -> float:
    """
    Expected slope of the innovations' SRAR curve, T * (E[eps] - F^-1(tau)).

    :param mean: Empirical mean to use instead of the analytic one (needed for laws without a first moment)
    :raises UndefinedMomentError: If the law has no mean and none was given
    """
    return T * (_first_moment(dist, mean) - distributions.quantile(dist, tau))


def theoretical_concavity(dist: distributions.DistributionSpec, tau: float, T: int, step: float = 1e-5) -> float:
    """Expected curvature -2T dF^-1/dtau, by a central difference on the quantile function."""
    if not 0.0 < tau < 1.0:
        raise ParameterDomainError(f"tau must lie in (0, 1), got {tau!r}")
    h = min(step, tau / 2.0, (1.0 - tau) / 2.0)
    derivative = (distributions.quantile(dist, tau + h) - distributions.quantile(dist, tau - h)) / (2.0 * h)
    return -2.0 * T * derivative


def winner_cells(report: SelectionReport, taus: typing.Sequence[float] = REPORTED_TAUS) -> typing.Dict[str, str]:
    """Winners at the given levels plus the aggregate winner, keyed by level label."""
    cells = {f"{tau:g}": report.winner_at(tau).value for tau in taus}
    cells["aggregate"] = report.aggregate_winner.value
    return cells


def curve_table(report: SelectionReport) -> typing.Tuple[typing.List[str], typing.List[typing.List[float]]]:
    """Header and rows of the curve CSV: tau, causal, noncausal and, when present, the restricted pair."""
    header = ["tau", "srar_causal", "srar_noncausal"]
    columns = [report.grid, report.causal.values, report.noncausal.values]
    variant = report.restricted_variant
    if report.restricted and variant is not None:
        # primary comparison is restricted; keep the unrestricted pair in the first columns
        columns = [report.grid, variant.causal.values, variant.noncausal.values, report.causal.values,
                   report.noncausal.values]
        header += ["srar_rcausal", "srar_rnoncausal"]
    elif report.restricted:
        header = ["tau", "srar_rcausal", "srar_rnoncausal"]
    elif variant is not None:
        columns += [variant.causal.values, variant.noncausal.values]
        header += ["srar_rcausal", "srar_rnoncausal"]
    rows = [[float(v) for v in row] for row in zip(*columns)]
    return header, rows
